# cython: language_level=3
# cython: boundscheck=False
# cython: wraparound=False
"""Compiled kernel lane: direct MPFR calls through gmpy2's C API.

Mirrors _kernels_py.py operation for operation (same MPFR calls, same
order, round-to-nearest), so results are bit-identical to the pure lane;
only the interpreter overhead goes away. Any behavioral change here must
be made in the reference lane first.
"""

from libc.stdlib cimport free, malloc

cimport gmpy2
from gmpy2 cimport MPFR_RNDD, MPFR_RNDN, GMPy_MPFR_New, MPFR_Check, import_gmpy2
from gmpy2 cimport mpfr as Pympfr
from gmpy2 cimport mpfr_prec_t, mpfr_ptr, mpfr_rnd_t, mpfr_srcptr, mpfr_t, mpz_t

cdef extern from "gmp.h":
    void mpz_init(mpz_t)
    void mpz_clear(mpz_t)
    void mpz_fac_ui(mpz_t, unsigned long)
    void mpz_mul(mpz_t, mpz_t, mpz_t)
    void mpz_divexact(mpz_t, mpz_t, mpz_t)

cdef extern from "mpfr.h":
    void mpfr_init2(mpfr_ptr, mpfr_prec_t)
    void mpfr_clear(mpfr_ptr)
    mpfr_prec_t c_mpfr_get_prec "mpfr_get_prec" (mpfr_srcptr)
    int c_mpfr_set "mpfr_set" (mpfr_ptr, mpfr_srcptr, mpfr_rnd_t)
    int mpfr_set_si(mpfr_ptr, long, mpfr_rnd_t)
    int mpfr_set_zero(mpfr_ptr, int)
    void mpfr_set_inf(mpfr_ptr, int)
    int mpfr_add(mpfr_ptr, mpfr_srcptr, mpfr_srcptr, mpfr_rnd_t)
    int mpfr_sub(mpfr_ptr, mpfr_srcptr, mpfr_srcptr, mpfr_rnd_t)
    int mpfr_ui_sub(mpfr_ptr, unsigned long, mpfr_srcptr, mpfr_rnd_t)
    int mpfr_sub_si(mpfr_ptr, mpfr_srcptr, long, mpfr_rnd_t)
    int mpfr_mul(mpfr_ptr, mpfr_srcptr, mpfr_srcptr, mpfr_rnd_t)
    int mpfr_mul_si(mpfr_ptr, mpfr_srcptr, long, mpfr_rnd_t)
    int mpfr_mul_z(mpfr_ptr, mpfr_srcptr, mpz_t, mpfr_rnd_t)
    int mpfr_div(mpfr_ptr, mpfr_srcptr, mpfr_srcptr, mpfr_rnd_t)
    int mpfr_div_si(mpfr_ptr, mpfr_srcptr, long, mpfr_rnd_t)
    int mpfr_si_div(mpfr_ptr, long, mpfr_srcptr, mpfr_rnd_t)
    int mpfr_div_z(mpfr_ptr, mpfr_srcptr, mpz_t, mpfr_rnd_t)
    int mpfr_div_2ui(mpfr_ptr, mpfr_srcptr, unsigned long, mpfr_rnd_t)
    int mpfr_neg(mpfr_ptr, mpfr_srcptr, mpfr_rnd_t)
    int mpfr_abs(mpfr_ptr, mpfr_srcptr, mpfr_rnd_t)
    int mpfr_pow_ui(mpfr_ptr, mpfr_srcptr, unsigned long, mpfr_rnd_t)
    int mpfr_exp(mpfr_ptr, mpfr_srcptr, mpfr_rnd_t)
    int mpfr_sin(mpfr_ptr, mpfr_srcptr, mpfr_rnd_t)
    int mpfr_cos(mpfr_ptr, mpfr_srcptr, mpfr_rnd_t)
    int mpfr_cmp(mpfr_srcptr, mpfr_srcptr)
    int mpfr_cmpabs(mpfr_srcptr, mpfr_srcptr)
    int mpfr_cmp_ui(mpfr_srcptr, unsigned long)
    int mpfr_cmp_si(mpfr_srcptr, long)
    int mpfr_sgn(mpfr_srcptr)
    int mpfr_zero_p(mpfr_srcptr)
    long mpfr_get_si(mpfr_srcptr, mpfr_rnd_t)
    void mpfr_swap(mpfr_ptr, mpfr_ptr)

import_gmpy2()

BACKEND_NAME = "compiled"

MAX_DEPTH = 60

cdef enum DensKind:
    KIND_UNIFORM = 0
    KIND_MONOMIAL = 1
    KIND_POLY = 2
    KIND_BUMPPROD = 3
    KIND_BILINEAR = 4


cdef inline mpfr_srcptr borrow(object obj) except NULL:
    if not MPFR_Check(obj):
        raise TypeError("expected mpfr, got %r" % type(obj))
    return <mpfr_srcptr>(<Pympfr>obj).f


cdef inline Pympfr export_mpfr(mpfr_srcptr v):
    cdef Pympfr out = GMPy_MPFR_New(c_mpfr_get_prec(v), NULL)
    c_mpfr_set(out.f, v, MPFR_RNDN)
    return out


cdef struct Rule:
    int n
    mpfr_srcptr* x
    mpfr_srcptr* w


cdef int rule_init(Rule* r, object nodes, object weights) except -1:
    cdef int n = len(nodes)
    if len(weights) != n:
        raise ValueError("nodes/weights length mismatch")
    r.n = n
    r.x = <mpfr_srcptr*>malloc(n * sizeof(mpfr_srcptr))
    r.w = <mpfr_srcptr*>malloc(n * sizeof(mpfr_srcptr))
    if r.x == NULL or r.w == NULL:
        raise MemoryError()
    cdef int i
    for i in range(n):
        r.x[i] = borrow(nodes[i])
        r.w[i] = borrow(weights[i])
    return 0


cdef void rule_free(Rule* r) noexcept:
    if r.x != NULL:
        free(r.x)
        r.x = NULL
    if r.w != NULL:
        free(r.w)
        r.w = NULL


cdef struct Dens:
    int kind
    long a
    long b
    int nterms
    long* ta
    long* tb
    mpfr_srcptr* coef
    long nx
    long ny


cdef int dens_parse(object desc, Dens* dd) except -1:
    cdef str kind = desc[0]
    cdef int i
    dd.ta = NULL
    dd.tb = NULL
    dd.coef = NULL
    if kind == "uniform":
        dd.kind = KIND_UNIFORM
        dd.coef = <mpfr_srcptr*>malloc(sizeof(mpfr_srcptr))
        dd.coef[0] = borrow(desc[1])
        return 0
    if kind == "monomial":
        dd.kind = KIND_MONOMIAL
        dd.a = desc[1]
        dd.b = desc[2]
        dd.coef = <mpfr_srcptr*>malloc(sizeof(mpfr_srcptr))
        dd.coef[0] = borrow(desc[3])
        return 0
    if kind == "poly":
        dd.kind = KIND_POLY
        terms = desc[1]
        dd.nterms = len(terms)
        dd.ta = <long*>malloc(dd.nterms * sizeof(long))
        dd.tb = <long*>malloc(dd.nterms * sizeof(long))
        dd.coef = <mpfr_srcptr*>malloc(dd.nterms * sizeof(mpfr_srcptr))
        for i in range(dd.nterms):
            dd.ta[i] = terms[i][0]
            dd.tb[i] = terms[i][1]
            dd.coef[i] = borrow(terms[i][2])
        return 0
    if kind == "bumpprod":
        dd.kind = KIND_BUMPPROD
        dd.coef = <mpfr_srcptr*>malloc(4 * sizeof(mpfr_srcptr))
        for i in range(4):
            dd.coef[i] = borrow(desc[1 + i])
        return 0
    if kind == "bilinear":
        dd.kind = KIND_BILINEAR
        dd.nx = desc[1]
        dd.ny = desc[2]
        vals = desc[3]
        if len(vals) != dd.nx * dd.ny:
            raise ValueError("bilinear grid size mismatch")
        dd.coef = <mpfr_srcptr*>malloc(dd.nx * dd.ny * sizeof(mpfr_srcptr))
        for i in range(dd.nx * dd.ny):
            dd.coef[i] = borrow(vals[i])
        return 0
    raise ValueError("unknown density descriptor %r" % kind)


cdef void dens_free(Dens* dd) noexcept:
    if dd.ta != NULL:
        free(dd.ta)
    if dd.tb != NULL:
        free(dd.tb)
    if dd.coef != NULL:
        free(dd.coef)


cdef struct Scratch:
    mpfr_t t1
    mpfr_t t2
    mpfr_t t3
    mpfr_t t4
    mpfr_t t5
    mpfr_t t6


cdef void scratch_init(Scratch* s, mpfr_prec_t prec) noexcept:
    mpfr_init2(s.t1, prec)
    mpfr_init2(s.t2, prec)
    mpfr_init2(s.t3, prec)
    mpfr_init2(s.t4, prec)
    mpfr_init2(s.t5, prec)
    mpfr_init2(s.t6, prec)


cdef void scratch_clear(Scratch* s) noexcept:
    mpfr_clear(s.t1)
    mpfr_clear(s.t2)
    mpfr_clear(s.t3)
    mpfr_clear(s.t4)
    mpfr_clear(s.t5)
    mpfr_clear(s.t6)


cdef void dens_eval(Dens* dd, mpfr_srcptr x1, mpfr_srcptr x2, mpfr_ptr out, Scratch* s) noexcept:
    # mirrors _kernels_py._density_eval
    cdef int i
    cdef long ix, iy
    if dd.kind == KIND_UNIFORM:
        c_mpfr_set(out, dd.coef[0], MPFR_RNDN)
        return
    if dd.kind == KIND_MONOMIAL:
        c_mpfr_set(out, dd.coef[0], MPFR_RNDN)
        if dd.a:
            mpfr_pow_ui(s.t1, x1, dd.a, MPFR_RNDN)
            mpfr_mul(out, out, s.t1, MPFR_RNDN)
        if dd.b:
            mpfr_pow_ui(s.t1, x2, dd.b, MPFR_RNDN)
            mpfr_mul(out, out, s.t1, MPFR_RNDN)
        return
    if dd.kind == KIND_POLY:
        mpfr_set_zero(out, 1)
        for i in range(dd.nterms):
            c_mpfr_set(s.t2, dd.coef[i], MPFR_RNDN)
            if dd.ta[i]:
                mpfr_pow_ui(s.t1, x1, dd.ta[i], MPFR_RNDN)
                mpfr_mul(s.t2, s.t2, s.t1, MPFR_RNDN)
            if dd.tb[i]:
                mpfr_pow_ui(s.t1, x2, dd.tb[i], MPFR_RNDN)
                mpfr_mul(s.t2, s.t2, s.t1, MPFR_RNDN)
            mpfr_add(out, out, s.t2, MPFR_RNDN)
        return
    if dd.kind == KIND_BUMPPROD:
        # coef = cx, cy, w, amp
        mpfr_sub(s.t1, x1, dd.coef[0], MPFR_RNDN)
        mpfr_div(s.t1, s.t1, dd.coef[2], MPFR_RNDN)
        mpfr_mul(s.t2, s.t1, s.t1, MPFR_RNDN)
        if mpfr_cmp_ui(s.t2, 1) >= 0:
            mpfr_set_zero(out, 1)
            return
        mpfr_sub(s.t3, x2, dd.coef[1], MPFR_RNDN)
        mpfr_div(s.t3, s.t3, dd.coef[2], MPFR_RNDN)
        mpfr_mul(s.t4, s.t3, s.t3, MPFR_RNDN)
        if mpfr_cmp_ui(s.t4, 1) >= 0:
            mpfr_set_zero(out, 1)
            return
        mpfr_ui_sub(s.t1, 1, s.t2, MPFR_RNDN)
        mpfr_si_div(s.t1, -1, s.t1, MPFR_RNDN)
        mpfr_exp(s.t1, s.t1, MPFR_RNDN)
        mpfr_ui_sub(s.t3, 1, s.t4, MPFR_RNDN)
        mpfr_si_div(s.t3, -1, s.t3, MPFR_RNDN)
        mpfr_exp(s.t3, s.t3, MPFR_RNDN)
        mpfr_mul(out, dd.coef[3], s.t1, MPFR_RNDN)
        mpfr_mul(out, out, s.t3, MPFR_RNDN)
        return
    # bilinear
    mpfr_mul_si(s.t1, x1, dd.nx - 1, MPFR_RNDN)
    ix = mpfr_get_si(s.t1, MPFR_RNDD)
    if ix < 0:
        ix = 0
    elif ix > dd.nx - 2:
        ix = dd.nx - 2
    mpfr_sub_si(s.t1, s.t1, ix, MPFR_RNDN)  # wx
    mpfr_mul_si(s.t2, x2, dd.ny - 1, MPFR_RNDN)
    iy = mpfr_get_si(s.t2, MPFR_RNDD)
    if iy < 0:
        iy = 0
    elif iy > dd.ny - 2:
        iy = dd.ny - 2
    mpfr_sub_si(s.t2, s.t2, iy, MPFR_RNDN)  # wy
    mpfr_ui_sub(s.t3, 1, s.t1, MPFR_RNDN)   # ox
    mpfr_ui_sub(s.t4, 1, s.t2, MPFR_RNDN)   # oy
    mpfr_mul(out, dd.coef[ix * dd.ny + iy], s.t3, MPFR_RNDN)
    mpfr_mul(out, out, s.t4, MPFR_RNDN)
    mpfr_mul(s.t5, dd.coef[(ix + 1) * dd.ny + iy], s.t1, MPFR_RNDN)
    mpfr_mul(s.t5, s.t5, s.t4, MPFR_RNDN)
    mpfr_add(out, out, s.t5, MPFR_RNDN)
    mpfr_mul(s.t5, dd.coef[ix * dd.ny + iy + 1], s.t3, MPFR_RNDN)
    mpfr_mul(s.t5, s.t5, s.t2, MPFR_RNDN)
    mpfr_add(out, out, s.t5, MPFR_RNDN)
    mpfr_mul(s.t5, dd.coef[(ix + 1) * dd.ny + iy + 1], s.t1, MPFR_RNDN)
    mpfr_mul(s.t5, s.t5, s.t2, MPFR_RNDN)
    mpfr_add(out, out, s.t5, MPFR_RNDN)


cdef struct ChordCtx:
    Dens* dd
    mpfr_prec_t prec
    mpfr_t c
    mpfr_t s
    mpfr_t pc
    mpfr_t ps
    mpfr_srcptr tol      # chord tolerance (not owned)
    int max_depth
    mpfr_ptr defect      # accumulator (not owned)


cdef int axis_interval(mpfr_srcptr v0, mpfr_srcptr slope, mpfr_ptr lo, mpfr_ptr hi, Scratch* s) noexcept:
    # 0 = empty, 1 = bounded/full interval written to lo/hi
    if mpfr_zero_p(slope):
        if mpfr_sgn(v0) >= 0 and mpfr_cmp_ui(v0, 1) <= 0:
            mpfr_set_inf(lo, -1)
            mpfr_set_inf(hi, 1)
            return 1
        return 0
    mpfr_neg(s.t5, v0, MPFR_RNDN)
    mpfr_div(s.t5, s.t5, slope, MPFR_RNDN)   # ta
    mpfr_ui_sub(s.t6, 1, v0, MPFR_RNDN)
    mpfr_div(s.t6, s.t6, slope, MPFR_RNDN)   # tb
    if mpfr_cmp(s.t5, s.t6) <= 0:
        c_mpfr_set(lo, s.t5, MPFR_RNDN)
        c_mpfr_set(hi, s.t6, MPFR_RNDN)
    else:
        c_mpfr_set(lo, s.t6, MPFR_RNDN)
        c_mpfr_set(hi, s.t5, MPFR_RNDN)
    return 1


cdef int chord_bounds(ChordCtx* ctx, mpfr_ptr lo, mpfr_ptr hi, Scratch* s) noexcept:
    # intersection of the two axis strips; 0 when the chord misses
    cdef mpfr_t lo2, hi2
    cdef int ok
    mpfr_neg(s.t4, ctx.s, MPFR_RNDN)
    ok = axis_interval(ctx.pc, s.t4, lo, hi, s)
    if not ok:
        return 0
    mpfr_init2(lo2, ctx.prec)
    mpfr_init2(hi2, ctx.prec)
    ok = axis_interval(ctx.ps, ctx.c, lo2, hi2, s)
    if ok:
        if mpfr_cmp(lo2, lo) > 0:
            c_mpfr_set(lo, lo2, MPFR_RNDN)
        if mpfr_cmp(hi2, hi) < 0:
            c_mpfr_set(hi, hi2, MPFR_RNDN)
        ok = mpfr_cmp(lo, hi) < 0
    mpfr_clear(lo2)
    mpfr_clear(hi2)
    return ok


cdef void chord_point(ChordCtx* ctx, mpfr_srcptr t, mpfr_ptr out, Scratch* s) noexcept:
    # integrand: density at (pc - t*s, ps + t*c)
    cdef mpfr_t x1, x2
    mpfr_init2(x1, ctx.prec)
    mpfr_init2(x2, ctx.prec)
    mpfr_mul(s.t6, t, ctx.s, MPFR_RNDN)
    mpfr_sub(x1, ctx.pc, s.t6, MPFR_RNDN)
    mpfr_mul(s.t6, t, ctx.c, MPFR_RNDN)
    mpfr_add(x2, ctx.ps, s.t6, MPFR_RNDN)
    dens_eval(ctx.dd, x1, x2, out, s)
    mpfr_clear(x1)
    mpfr_clear(x2)


cdef void gl_chord(ChordCtx* ctx, Rule* rule, mpfr_srcptr a, mpfr_srcptr b, mpfr_ptr out) noexcept:
    cdef Scratch s
    cdef mpfr_t c, h, u, fv
    cdef int i
    scratch_init(&s, ctx.prec)
    mpfr_init2(c, ctx.prec)
    mpfr_init2(h, ctx.prec)
    mpfr_init2(u, ctx.prec)
    mpfr_init2(fv, ctx.prec)
    mpfr_add(c, a, b, MPFR_RNDN)
    mpfr_div_2ui(c, c, 1, MPFR_RNDN)
    mpfr_sub(h, b, a, MPFR_RNDN)
    mpfr_div_2ui(h, h, 1, MPFR_RNDN)
    mpfr_set_zero(out, 1)
    for i in range(rule.n):
        mpfr_mul(u, h, rule.x[i], MPFR_RNDN)
        mpfr_add(u, c, u, MPFR_RNDN)
        chord_point(ctx, u, fv, &s)
        mpfr_mul(fv, rule.w[i], fv, MPFR_RNDN)
        mpfr_add(out, out, fv, MPFR_RNDN)
    mpfr_mul(out, out, h, MPFR_RNDN)
    mpfr_clear(c)
    mpfr_clear(h)
    mpfr_clear(u)
    mpfr_clear(fv)
    scratch_clear(&s)


cdef void adapt_chord(ChordCtx* ctx, Rule* rule, mpfr_srcptr a, mpfr_srcptr b,
                      mpfr_srcptr tol, mpfr_srcptr whole, int depth, mpfr_ptr out) noexcept:
    cdef mpfr_t m, left, right, ssum, d, t2, sub
    mpfr_init2(m, ctx.prec)
    mpfr_init2(left, ctx.prec)
    mpfr_init2(right, ctx.prec)
    mpfr_init2(ssum, ctx.prec)
    mpfr_init2(d, ctx.prec)
    mpfr_add(m, a, b, MPFR_RNDN)
    mpfr_div_2ui(m, m, 1, MPFR_RNDN)
    gl_chord(ctx, rule, a, m, left)
    gl_chord(ctx, rule, m, b, right)
    mpfr_add(ssum, left, right, MPFR_RNDN)
    mpfr_sub(d, ssum, whole, MPFR_RNDN)
    mpfr_abs(d, d, MPFR_RNDN)
    if mpfr_cmp(d, tol) <= 0 or depth >= ctx.max_depth:
        if mpfr_cmp(d, tol) > 0:
            mpfr_add(ctx.defect, ctx.defect, d, MPFR_RNDN)
        c_mpfr_set(out, ssum, MPFR_RNDN)
    else:
        mpfr_init2(t2, ctx.prec)
        mpfr_init2(sub, ctx.prec)
        mpfr_div_2ui(t2, tol, 1, MPFR_RNDN)
        adapt_chord(ctx, rule, a, m, t2, left, depth + 1, out)
        adapt_chord(ctx, rule, m, b, t2, right, depth + 1, sub)
        mpfr_add(out, out, sub, MPFR_RNDN)
        mpfr_clear(t2)
        mpfr_clear(sub)
    mpfr_clear(m)
    mpfr_clear(left)
    mpfr_clear(right)
    mpfr_clear(ssum)
    mpfr_clear(d)


cdef void chord_value(ChordCtx* ctx, Rule* rule, mpfr_srcptr p, mpfr_ptr out) noexcept:
    # full chord integral at offset p (sets ctx.pc/ps)
    cdef Scratch s
    cdef mpfr_t lo, hi, whole
    scratch_init(&s, ctx.prec)
    mpfr_init2(lo, ctx.prec)
    mpfr_init2(hi, ctx.prec)
    mpfr_mul(ctx.pc, p, ctx.c, MPFR_RNDN)
    mpfr_mul(ctx.ps, p, ctx.s, MPFR_RNDN)
    if not chord_bounds(ctx, lo, hi, &s):
        mpfr_set_zero(out, 1)
    else:
        mpfr_init2(whole, ctx.prec)
        gl_chord(ctx, rule, lo, hi, whole)
        adapt_chord(ctx, rule, lo, hi, ctx.tol, whole, 0, out)
        mpfr_clear(whole)
    mpfr_clear(lo)
    mpfr_clear(hi)
    scratch_clear(&s)


cdef int ctx_init(ChordCtx* ctx, Dens* dd, mpfr_prec_t prec, object theta,
                  mpfr_srcptr tol, int max_depth, mpfr_ptr defect) except -1:
    ctx.dd = dd
    ctx.prec = prec
    ctx.tol = tol
    ctx.max_depth = max_depth
    ctx.defect = defect
    mpfr_init2(ctx.c, prec)
    mpfr_init2(ctx.s, prec)
    mpfr_init2(ctx.pc, prec)
    mpfr_init2(ctx.ps, prec)
    mpfr_cos(ctx.c, borrow(theta), MPFR_RNDN)
    mpfr_sin(ctx.s, borrow(theta), MPFR_RNDN)
    return 0


cdef void ctx_clear(ChordCtx* ctx) noexcept:
    mpfr_clear(ctx.c)
    mpfr_clear(ctx.s)
    mpfr_clear(ctx.pc)
    mpfr_clear(ctx.ps)


def chord_integral(object desc, object theta, object p, long prec, object tol,
                   object nodes, object weights, int max_depth=MAX_DEPTH):
    """Line integral of the density over the chord at (theta, p)."""
    cdef Dens dd
    cdef ChordCtx ctx
    cdef Rule rule
    cdef mpfr_t out, defect
    rule.x = NULL
    rule.w = NULL
    dens_parse(desc, &dd)
    try:
        rule_init(&rule, nodes, weights)
        mpfr_init2(out, prec)
        mpfr_init2(defect, prec)
        mpfr_set_zero(defect, 1)
        ctx_init(&ctx, &dd, prec, theta, borrow(tol), max_depth, defect)
        chord_value(&ctx, &rule, borrow(p), out)
        res = export_mpfr(out)
        dres = export_mpfr(defect)
        ctx_clear(&ctx)
        mpfr_clear(out)
        mpfr_clear(defect)
        return res, dres
    finally:
        rule_free(&rule)
        dens_free(&dd)


def sinogram_values(object desc, object thetas, object offsets, long prec, object tol,
                    object nodes, object weights, int max_depth=MAX_DEPTH):
    """Chord integrals over the full angle x offset grid."""
    cdef Dens dd
    cdef ChordCtx ctx
    cdef Rule rule
    cdef mpfr_t out, defect
    cdef int i, j, nth, noff
    rule.x = NULL
    rule.w = NULL
    dens_parse(desc, &dd)
    try:
        rule_init(&rule, nodes, weights)
        mpfr_init2(out, prec)
        mpfr_init2(defect, prec)
        mpfr_set_zero(defect, 1)
        nth = len(thetas)
        noff = len(offsets)
        rows = []
        for i in range(nth):
            ctx_init(&ctx, &dd, prec, thetas[i], borrow(tol), max_depth, defect)
            row = []
            for j in range(noff):
                chord_value(&ctx, &rule, borrow(offsets[j]), out)
                row.append(export_mpfr(out))
            ctx_clear(&ctx)
            rows.append(row)
        dres = export_mpfr(defect)
        mpfr_clear(out)
        mpfr_clear(defect)
        return rows, dres
    finally:
        rule_free(&rule)
        dens_free(&dd)


cdef void gl_moment_vec(ChordCtx* ctx, Rule* chord_rule, Rule* outer_rule,
                        mpfr_srcptr a, mpfr_srcptr b, int kmax, mpfr_t* acc) noexcept:
    cdef mpfr_t c, h, x, ch, t
    cdef int i, k
    mpfr_init2(c, ctx.prec)
    mpfr_init2(h, ctx.prec)
    mpfr_init2(x, ctx.prec)
    mpfr_init2(ch, ctx.prec)
    mpfr_init2(t, ctx.prec)
    mpfr_add(c, a, b, MPFR_RNDN)
    mpfr_div_2ui(c, c, 1, MPFR_RNDN)
    mpfr_sub(h, b, a, MPFR_RNDN)
    mpfr_div_2ui(h, h, 1, MPFR_RNDN)
    for k in range(kmax + 1):
        mpfr_set_zero(acc[k], 1)
    for i in range(outer_rule.n):
        mpfr_mul(x, h, outer_rule.x[i], MPFR_RNDN)
        mpfr_add(x, c, x, MPFR_RNDN)
        chord_value(ctx, chord_rule, x, ch)
        mpfr_mul(t, outer_rule.w[i], ch, MPFR_RNDN)
        mpfr_add(acc[0], acc[0], t, MPFR_RNDN)
        for k in range(1, kmax + 1):
            mpfr_mul(t, t, x, MPFR_RNDN)
            mpfr_add(acc[k], acc[k], t, MPFR_RNDN)
    for k in range(kmax + 1):
        mpfr_mul(acc[k], acc[k], h, MPFR_RNDN)
    mpfr_clear(c)
    mpfr_clear(h)
    mpfr_clear(x)
    mpfr_clear(ch)
    mpfr_clear(t)


cdef mpfr_t* vec_new(int count, mpfr_prec_t prec) except NULL:
    cdef mpfr_t* v = <mpfr_t*>malloc(count * sizeof(mpfr_t))
    if v == NULL:
        raise MemoryError()
    cdef int i
    for i in range(count):
        mpfr_init2(v[i], prec)
    return v


cdef void vec_free(mpfr_t* v, int count) noexcept:
    cdef int i
    if v == NULL:
        return
    for i in range(count):
        mpfr_clear(v[i])
    free(v)


cdef int adapt_moment_vec(ChordCtx* ctx, Rule* chord_rule, Rule* outer_rule,
                          mpfr_srcptr a, mpfr_srcptr b, mpfr_srcptr tol,
                          mpfr_t* whole, int depth, int kmax,
                          mpfr_t* out) except -1:
    cdef mpfr_t m, d, dk, t2
    cdef mpfr_t* left
    cdef mpfr_t* right
    cdef mpfr_t* ssum
    cdef mpfr_t* sub
    cdef int k
    mpfr_init2(m, ctx.prec)
    mpfr_init2(d, ctx.prec)
    mpfr_init2(dk, ctx.prec)
    mpfr_add(m, a, b, MPFR_RNDN)
    mpfr_div_2ui(m, m, 1, MPFR_RNDN)
    left = vec_new(kmax + 1, ctx.prec)
    right = vec_new(kmax + 1, ctx.prec)
    ssum = vec_new(kmax + 1, ctx.prec)
    try:
        gl_moment_vec(ctx, chord_rule, outer_rule, a, m, kmax, left)
        gl_moment_vec(ctx, chord_rule, outer_rule, m, b, kmax, right)
        mpfr_set_zero(d, 1)
        for k in range(kmax + 1):
            mpfr_add(ssum[k], left[k], right[k], MPFR_RNDN)
            mpfr_sub(dk, ssum[k], whole[k], MPFR_RNDN)
            mpfr_abs(dk, dk, MPFR_RNDN)
            if mpfr_cmp(dk, d) > 0:
                c_mpfr_set(d, dk, MPFR_RNDN)
        if mpfr_cmp(d, tol) <= 0 or depth >= ctx.max_depth:
            if mpfr_cmp(d, tol) > 0:
                mpfr_add(ctx.defect, ctx.defect, d, MPFR_RNDN)
            for k in range(kmax + 1):
                c_mpfr_set(out[k], ssum[k], MPFR_RNDN)
        else:
            mpfr_init2(t2, ctx.prec)
            mpfr_div_2ui(t2, tol, 1, MPFR_RNDN)
            sub = vec_new(kmax + 1, ctx.prec)
            try:
                adapt_moment_vec(ctx, chord_rule, outer_rule, a, m, t2, left, depth + 1, kmax, out)
                adapt_moment_vec(ctx, chord_rule, outer_rule, m, b, t2, right, depth + 1, kmax, sub)
                for k in range(kmax + 1):
                    mpfr_add(out[k], out[k], sub[k], MPFR_RNDN)
            finally:
                vec_free(sub, kmax + 1)
                mpfr_clear(t2)
        return 0
    finally:
        vec_free(left, kmax + 1)
        vec_free(right, kmax + 1)
        vec_free(ssum, kmax + 1)
        mpfr_clear(m)
        mpfr_clear(d)
        mpfr_clear(dk)


def radon_moment_vector(object desc, object theta, int kmax, long prec, object tol,
                        object chord_tol, object splits, object nodes_c, object weights_c,
                        object nodes_o, object weights_o, int max_depth=MAX_DEPTH):
    """All offset moments b_k, k = 0..kmax, of the transform at one angle."""
    cdef Dens dd
    cdef ChordCtx ctx
    cdef Rule chord_rule, outer_rule
    cdef mpfr_t defect
    cdef mpfr_t* whole = NULL
    cdef mpfr_t* seg = NULL
    cdef mpfr_t* total = NULL
    cdef int k, i, nseg
    chord_rule.x = NULL
    chord_rule.w = NULL
    outer_rule.x = NULL
    outer_rule.w = NULL
    dens_parse(desc, &dd)
    try:
        rule_init(&chord_rule, nodes_c, weights_c)
        rule_init(&outer_rule, nodes_o, weights_o)
        mpfr_init2(defect, prec)
        mpfr_set_zero(defect, 1)
        ctx_init(&ctx, &dd, prec, theta, borrow(chord_tol), max_depth, defect)
        whole = vec_new(kmax + 1, prec)
        seg = vec_new(kmax + 1, prec)
        total = vec_new(kmax + 1, prec)
        for k in range(kmax + 1):
            mpfr_set_zero(total[k], 1)
        nseg = len(splits) - 1
        for i in range(nseg):
            a = splits[i]
            b = splits[i + 1]
            if not a < b:
                continue
            gl_moment_vec(&ctx, &chord_rule, &outer_rule, borrow(a), borrow(b), kmax, whole)
            adapt_moment_vec(&ctx, &chord_rule, &outer_rule, borrow(a), borrow(b),
                             borrow(tol), whole, 0, kmax, seg)
            for k in range(kmax + 1):
                mpfr_add(total[k], total[k], seg[k], MPFR_RNDN)
        out = [export_mpfr(total[k]) for k in range(kmax + 1)]
        dres = export_mpfr(defect)
        ctx_clear(&ctx)
        mpfr_clear(defect)
        return out, dres
    finally:
        vec_free(whole, kmax + 1)
        vec_free(seg, kmax + 1)
        vec_free(total, kmax + 1)
        rule_free(&chord_rule)
        rule_free(&outer_rule)
        dens_free(&dd)


def ml_sum(object gam, int m, int n, int mu, int nu, long prec):
    """Alternating beta-synthesis sum; returns (value, max_term)."""
    cdef mpz_t fa1, div, fmu, cmn
    cdef mpfr_t acc, maxt, term
    cdef int a1, a2, bigm, bign
    bigm = m - mu
    bign = n - nu
    mpz_init(fa1)
    mpz_init(div)
    mpz_init(fmu)
    mpz_init(cmn)
    mpfr_init2(acc, prec)
    mpfr_init2(maxt, prec)
    mpfr_init2(term, prec)
    try:
        mpfr_set_zero(acc, 1)
        mpfr_set_zero(maxt, 1)
        for a1 in range(bigm + 1):
            mpz_fac_ui(fa1, a1)
            mpz_fac_ui(div, bigm - a1)
            mpz_mul(fa1, fa1, div)
            row = gam[a1]
            for a2 in range(bign + 1):
                mpz_fac_ui(div, a2)
                mpz_mul(div, div, fa1)
                mpz_fac_ui(fmu, bign - a2)
                mpz_mul(div, div, fmu)
                mpfr_div_z(term, borrow(row[a2]), div, MPFR_RNDN)
                if mpfr_cmpabs(term, maxt) > 0:
                    mpfr_abs(maxt, term, MPFR_RNDN)
                if (a1 + a2) % 2:
                    mpfr_sub(acc, acc, term, MPFR_RNDN)
                else:
                    mpfr_add(acc, acc, term, MPFR_RNDN)
        mpz_fac_ui(cmn, m + 1)
        mpz_fac_ui(fmu, mu)
        mpz_divexact(cmn, cmn, fmu)
        mpz_fac_ui(div, n + 1)
        mpz_fac_ui(fmu, nu)
        mpz_divexact(div, div, fmu)
        mpz_mul(cmn, cmn, div)
        mpfr_mul_z(acc, acc, cmn, MPFR_RNDN)
        mpfr_mul_z(maxt, maxt, cmn, MPFR_RNDN)
        return export_mpfr(acc), export_mpfr(maxt)
    finally:
        mpz_clear(fa1)
        mpz_clear(div)
        mpz_clear(fmu)
        mpz_clear(cmn)
        mpfr_clear(acc)
        mpfr_clear(maxt)
        mpfr_clear(term)


def convolve_uniform(object rows, object kernel, object dp, long prec):
    """Per-row discrete convolution with trapezoid weight dp."""
    cdef int L, nk, mcols, j, l, idx
    cdef mpfr_t acc, t
    nk = len(kernel)
    L = (nk - 1) // 2
    cdef mpfr_srcptr* kptr = <mpfr_srcptr*>malloc(nk * sizeof(mpfr_srcptr))
    if kptr == NULL:
        raise MemoryError()
    cdef mpfr_srcptr* rptr = NULL
    cdef mpfr_srcptr dpp = borrow(dp)
    mpfr_init2(acc, prec)
    mpfr_init2(t, prec)
    try:
        for l in range(nk):
            kptr[l] = borrow(kernel[l])
        out = []
        for row in rows:
            mcols = len(row)
            rptr = <mpfr_srcptr*>malloc(mcols * sizeof(mpfr_srcptr))
            if rptr == NULL:
                raise MemoryError()
            try:
                for j in range(mcols):
                    rptr[j] = borrow(row[j])
                orow = []
                for j in range(mcols):
                    mpfr_set_zero(acc, 1)
                    for l in range(nk):
                        idx = j - l + L
                        if 0 <= idx < mcols:
                            mpfr_mul(t, kptr[l], rptr[idx], MPFR_RNDN)
                            mpfr_add(acc, acc, t, MPFR_RNDN)
                    mpfr_mul(t, acc, dpp, MPFR_RNDN)
                    orow.append(export_mpfr(t))
                out.append(orow)
            finally:
                free(rptr)
                rptr = NULL
        return out
    finally:
        free(kptr)
        mpfr_clear(acc)
        mpfr_clear(t)


def trapezoid_moments(object row, object offsets, int kmax, object dp, long prec):
    """Trapezoid-rule offset moments of one sinogram row."""
    cdef int mcols = len(row)
    cdef int j, k
    cdef mpfr_t half, acc, t
    cdef mpfr_t* cur = NULL
    cdef mpfr_srcptr* offp = NULL
    cdef mpfr_srcptr dpp = borrow(dp)
    mpfr_init2(half, prec)
    mpfr_init2(acc, prec)
    mpfr_init2(t, prec)
    try:
        mpfr_div_2ui(half, dpp, 1, MPFR_RNDN)
        cur = vec_new(mcols, prec)
        offp = <mpfr_srcptr*>malloc(mcols * sizeof(mpfr_srcptr))
        if offp == NULL:
            raise MemoryError()
        for j in range(mcols):
            c_mpfr_set(cur[j], borrow(row[j]), MPFR_RNDN)
            offp[j] = borrow(offsets[j])
        out = []
        for k in range(kmax + 1):
            if k > 0:
                for j in range(mcols):
                    mpfr_mul(cur[j], cur[j], offp[j], MPFR_RNDN)
            mpfr_set_zero(acc, 1)
            for j in range(mcols):
                if j == 0 or j == mcols - 1:
                    mpfr_mul(t, half, cur[j], MPFR_RNDN)
                else:
                    mpfr_mul(t, dpp, cur[j], MPFR_RNDN)
                mpfr_add(acc, acc, t, MPFR_RNDN)
            out.append(export_mpfr(acc))
        return out
    finally:
        vec_free(cur, mcols)
        if offp != NULL:
            free(offp)
        mpfr_clear(half)
        mpfr_clear(acc)
        mpfr_clear(t)


def lu_solve(object A, object Bs, long prec, object pivot_floor):
    """Partial-pivot LU solve for several right-hand sides.

    Returns (solutions, min_pivot, det); ValueError when a pivot falls
    below pivot_floor.
    """
    cdef int n = len(A)
    cdef int nb = len(Bs)
    cdef int col, r, c2, ib, p
    cdef mpfr_t best, ar, f, t, det, min_piv
    cdef mpfr_t** M = NULL
    cdef mpfr_t** X = NULL
    cdef mpfr_t* rowswap
    cdef mpfr_srcptr floorp = borrow(pivot_floor)
    cdef int sign = 1
    mpfr_init2(best, prec)
    mpfr_init2(ar, prec)
    mpfr_init2(f, prec)
    mpfr_init2(t, prec)
    mpfr_init2(det, prec)
    mpfr_init2(min_piv, prec)
    M = <mpfr_t**>malloc(n * sizeof(mpfr_t*))
    X = <mpfr_t**>malloc(nb * sizeof(mpfr_t*)) if nb else NULL
    if M == NULL or (nb and X == NULL):
        raise MemoryError()
    for r in range(n):
        M[r] = NULL
    for ib in range(nb):
        X[ib] = NULL
    try:
        for r in range(n):
            M[r] = vec_new(n, prec)
            arow = A[r]
            for c2 in range(n):
                c_mpfr_set(M[r][c2], borrow(arow[c2]), MPFR_RNDN)
        for ib in range(nb):
            X[ib] = vec_new(n, prec)
            brow = Bs[ib]
            for r in range(n):
                c_mpfr_set(X[ib][r], borrow(brow[r]), MPFR_RNDN)
        mpfr_set_si(min_piv, -1, MPFR_RNDN)
        for col in range(n):
            p = col
            mpfr_abs(best, M[col][col], MPFR_RNDN)
            for r in range(col + 1, n):
                mpfr_abs(ar, M[r][col], MPFR_RNDN)
                if mpfr_cmp(ar, best) > 0:
                    c_mpfr_set(best, ar, MPFR_RNDN)
                    p = r
            if mpfr_cmp(best, floorp) < 0:
                raise ValueError(
                    "pivot %s below threshold at column %d" % (export_mpfr(best), col)
                )
            if p != col:
                rowswap = M[col]
                M[col] = M[p]
                M[p] = rowswap
                sign = -sign
                for ib in range(nb):
                    mpfr_swap(X[ib][col], X[ib][p])
            if mpfr_sgn(min_piv) < 0 or mpfr_cmp(best, min_piv) < 0:
                c_mpfr_set(min_piv, best, MPFR_RNDN)
            for r in range(col + 1, n):
                mpfr_div(f, M[r][col], M[col][col], MPFR_RNDN)
                c_mpfr_set(M[r][col], f, MPFR_RNDN)
                for c2 in range(col + 1, n):
                    mpfr_mul(t, f, M[col][c2], MPFR_RNDN)
                    mpfr_sub(M[r][c2], M[r][c2], t, MPFR_RNDN)
                for ib in range(nb):
                    mpfr_mul(t, f, X[ib][col], MPFR_RNDN)
                    mpfr_sub(X[ib][r], X[ib][r], t, MPFR_RNDN)
        mpfr_set_si(det, sign, MPFR_RNDN)
        for r in range(n):
            mpfr_mul(det, det, M[r][r], MPFR_RNDN)
        for ib in range(nb):
            for r in range(n - 1, -1, -1):
                c_mpfr_set(t, X[ib][r], MPFR_RNDN)
                for c2 in range(r + 1, n):
                    mpfr_mul(f, M[r][c2], X[ib][c2], MPFR_RNDN)
                    mpfr_sub(t, t, f, MPFR_RNDN)
                mpfr_div(X[ib][r], t, M[r][r], MPFR_RNDN)
        xs = [[export_mpfr(X[ib][r]) for r in range(n)] for ib in range(nb)]
        if mpfr_sgn(min_piv) < 0:
            mpfr_set_zero(min_piv, 1)
        return xs, export_mpfr(min_piv), export_mpfr(det)
    finally:
        if M != NULL:
            for r in range(n):
                if M[r] != NULL:
                    vec_free(M[r], n)
            free(M)
        if X != NULL:
            for ib in range(nb):
                if X[ib] != NULL:
                    vec_free(X[ib], n)
            free(X)
        mpfr_clear(best)
        mpfr_clear(ar)
        mpfr_clear(f)
        mpfr_clear(t)
        mpfr_clear(det)
        mpfr_clear(min_piv)


def lower_tri_solve(object L, object y, long prec, object pivot_floor):
    """Forward substitution for a lower-triangular system."""
    cdef int n = len(L)
    cdef int r, c
    cdef mpfr_t acc, t, ad
    cdef mpfr_t* x = NULL
    cdef mpfr_srcptr floorp = borrow(pivot_floor)
    mpfr_init2(acc, prec)
    mpfr_init2(t, prec)
    mpfr_init2(ad, prec)
    try:
        x = vec_new(n, prec)
        for r in range(n):
            row = L[r]
            d = row[r]
            mpfr_abs(ad, borrow(d), MPFR_RNDN)
            if mpfr_cmp(ad, floorp) < 0:
                raise ValueError("zero diagonal %s at row %d" % (d, r))
            c_mpfr_set(acc, borrow(y[r]), MPFR_RNDN)
            for c in range(r):
                mpfr_mul(t, borrow(row[c]), x[c], MPFR_RNDN)
                mpfr_sub(acc, acc, t, MPFR_RNDN)
            mpfr_div(x[r], acc, borrow(d), MPFR_RNDN)
        return [export_mpfr(x[r]) for r in range(n)]
    finally:
        vec_free(x, n)
        mpfr_clear(acc)
        mpfr_clear(t)
        mpfr_clear(ad)
