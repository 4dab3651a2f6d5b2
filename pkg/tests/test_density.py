import gmpy2
import pytest
from gmpy2 import mpfr

from conftest import assert_abs_close, assert_close
from oracles import bump_moment
from radmom import density
from radmom.errors import DomainError, IncompleteMomentsError, ValidationError


class TestEval:
    def test_uniform_inside(self, prec256):
        assert density.from_registry("uniform").eval("0.3", "0.7") == 1

    def test_xy_product(self, prec256):
        assert density.from_registry("xy").eval("0.5", "0.5") == mpfr("0.25")

    def test_outside_support(self, prec256):
        d = density.from_registry("xy")
        assert d.eval("1.5", "0.5") == 0
        assert d.eval("0.5", "-0.1") == 0

    def test_mix_polynomial(self, prec256):
        d = density.from_registry("mix")  # 1/2 + x^2 y
        assert d.eval("1", "1") == mpfr("1.5")
        assert d.eval("0", "0.9") == mpfr("0.5")

    def test_bump_boundary(self, prec256):
        d = density.from_registry("bump")
        assert d.eval("0", "0.5") == 0
        assert d.eval("0.5", "0.5") > 0


class TestTrueMoment:
    def test_uniform_closed_form(self, prec256):
        d = density.from_registry("uniform")
        for a, b in ((0, 0), (2, 5), (7, 1)):
            assert_close(density.true_moment(d, a, b), mpfr(1) / ((a + 1) * (b + 1)), "1e-70")

    def test_xy_closed_form(self, prec256):
        d = density.from_registry("xy")
        for a, b in ((0, 0), (3, 2), (10, 10)):
            assert_close(density.true_moment(d, a, b), mpfr(1) / ((a + 2) * (b + 2)), "1e-70")

    def test_xy_mass(self, prec256):
        assert density.from_registry("xy").mass() == mpfr("0.25")

    def test_bump_moment_against_trapezoid_oracle(self, prec256):
        # separable bump: gamma_00 = I1^2 with I1 the 1-D profile integral.
        # The center-line trapezoid integral g1 = e^-1 * I1 and the center
        # value g0 = e^-2 give gamma_00 = g1^2/g0.
        from oracles import trapezoid_richardson as tr

        d = density.from_registry("bump")
        got = density.true_moment(d, 0, 0)
        g1 = tr(lambda t: d.eval(t, mpfr("0.5")), mpfr(0), mpfr(1), n0=512, levels=3)
        g0 = d.eval(mpfr("0.5"), mpfr("0.5"))
        assert_close(got, g1 * g1 / g0, "1e-18")

    def test_negative_order_rejected(self, prec256):
        with pytest.raises(DomainError):
            density.true_moment(density.from_registry("xy"), -1, 0)


class TestMomentTriangle:
    def test_uniform_order_one(self, prec256):
        t = density.moment_triangle(density.from_registry("uniform"), 1)
        assert t.get(0, 0) == 1
        assert_close(t.get(1, 0), mpfr("0.5"), "1e-70")
        assert_close(t.get(0, 1), mpfr("0.5"), "1e-70")

    def test_xy_order_two(self, prec256):
        t = density.moment_triangle(density.from_registry("xy"), 2)
        expect = {
            (0, 0): mpfr(1) / 4,
            (1, 0): mpfr(1) / 6,
            (0, 1): mpfr(1) / 6,
            (2, 0): mpfr(1) / 8,
            (1, 1): mpfr(1) / 9,
            (0, 2): mpfr(1) / 8,
        }
        for key, val in expect.items():
            assert_close(t.get(*key), val, "1e-70")

    def test_order_zero_is_mass(self, prec256):
        for name in density.registry_ids():
            d = density.from_registry(name)
            t = density.moment_triangle(d, 0)
            assert t.mass() == d.mass()

    def test_incomplete_rejected(self, prec256):
        with pytest.raises(IncompleteMomentsError):
            density.MomentTriangle(1, {(0, 0): mpfr(1)})

    def test_missing_lookup_names_entry(self, prec256):
        t = density.moment_triangle(density.from_registry("xy"), 1)
        with pytest.raises(IncompleteMomentsError) as err:
            t.get(2, 2)
        assert (2, 2) in err.value.missing


class TestMomentProperties:
    @pytest.mark.parametrize("name", ["uniform", "xy", "x2y3", "mix", "bump"])
    def test_monotone_in_each_index(self, prec256, name):
        d = density.from_registry(name)
        t = density.moment_triangle(d, 5)
        for k in range(5):
            for a in range(k + 1):
                b = k - a
                assert t.get(a + 1, b) <= t.get(a, b)
                assert t.get(a, b + 1) <= t.get(a, b)

    def test_product_factorization(self, prec256):
        d = density.from_registry("x2y3")
        for a, b in ((0, 0), (2, 1), (4, 5)):
            gx = mpfr(1) / (a + 3)  # 1-D moment of t^2
            gy = mpfr(1) / (b + 4)  # 1-D moment of t^3
            assert_close(density.true_moment(d, a, b), gx * gy, "1e-70")


class TestGridDensity:
    def test_bilinear_matches_samples(self, prec256):
        vals = [[mpfr(1), mpfr(2)], [mpfr(3), mpfr(4)]]
        d = density.from_grid(vals)
        assert d.eval(0, 0) == 1
        assert d.eval(0, 1) == 2
        assert d.eval(1, 0) == 3
        assert d.eval(1, 1) == 4
        assert_close(d.eval("0.5", "0.5"), mpfr("2.5"), "1e-70")

    def test_constant_grid_moments(self, prec256):
        vals = [[mpfr(1)] * 4 for _ in range(4)]
        d = density.from_grid(vals)
        assert_close(density.true_moment(d, 1, 2), mpfr(1) / 6, "1e-25")

    def test_csv_roundtrip(self, prec256, tmp_path):
        path = tmp_path / "grid.csv"
        rows = ["x1,x2,value"]
        for i in range(3):
            for j in range(3):
                rows.append("%s,%s,%s" % (i / 2, j / 2, 1 + i + j))
        path.write_text("\n".join(rows) + "\n")
        d = density.load_grid_csv(path)
        assert d.eval("0.5", "0.5") == 3

    def test_bad_header_rejected(self, prec256, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n0,0,1\n")
        with pytest.raises(ValidationError):
            density.load_grid_csv(path)

    def test_negative_rejected(self, prec256):
        with pytest.raises(ValidationError):
            density.from_grid([[mpfr(1), mpfr(-1)], [mpfr(1), mpfr(1)]])


class TestNormalize:
    def test_unit_mass(self, prec256):
        d = density.from_registry("xy").normalized()
        assert_close(d.mass(), 1, "1e-70")

    def test_scales_eval(self, prec256):
        d = density.from_registry("xy")
        dn = d.normalized()
        assert_close(dn.eval("0.5", "0.5"), mpfr("0.25") * 4, "1e-70")
