"""Command-line interface.

Subcommands mirror the pipeline stages file-to-file, so a chain of
invocations reproduces a single `pipeline` run value for value. Exit
codes: 0 success, 1 stage or validation failure, 2 usage error.
"""

import argparse
import json
import sys

from gmpy2 import mpfr

from . import __version__, density, fileio, mollifier, momentsys, radon, reconstruct
from .backend import backend_name
from .errors import RadmomError
from .pipeline import PipelineConfig, run_pipeline
from .precision import from_decimal, working_precision
from .radon import MIN_ANGLE_SNAP

_EPILOG = "file schemas: " + ", ".join(fileio.ALL_SCHEMAS)


def _add_precision(p):
    p.add_argument("--precision-bits", type=int, default=256, help="working precision in bits")


def _parse_angles(spec_str):
    angles = []
    pival = None
    for tok in spec_str.split(","):
        v = from_decimal(tok)
        if v == 0:
            print("warning: angle 0 snapped to %s" % MIN_ANGLE_SNAP, file=sys.stderr)
            v = mpfr(MIN_ANGLE_SNAP)
        if pival is None:
            import gmpy2

            pival = gmpy2.const_pi()
        if v == pival:
            print("warning: angle pi snapped to pi - %s" % MIN_ANGLE_SNAP, file=sys.stderr)
            v = pival - mpfr(MIN_ANGLE_SNAP)
        angles.append(v)
    return angles


def _cmd_simulate(args):
    with working_precision(args.precision_bits):
        d = density.from_registry(args.density)
        if args.normalize:
            d = d.normalized()
        if args.angle_list:
            angles = _parse_angles(args.angle_list)
        else:
            angles = radon.default_angles(args.angles)
        s = radon.make_sinogram(d, angles, args.offsets, from_decimal(args.pad), from_decimal(args.tol))
        fileio.write_sinogram(s, args.out)
    print("wrote %s (%d angles x %d offsets)" % (args.out, len(s.angles), len(s.offsets)))
    return 0


def _cmd_noise(args):
    with working_precision(args.precision_bits):
        s = fileio.read_sinogram(args.infile)
        if args.model == "gaussian":
            model = radon.GaussianNoise(from_decimal(args.sigma))
        elif args.model == "uniform":
            model = radon.UniformNoise(from_decimal(args.amplitude))
        else:
            model = radon.SinusoidalNoise(from_decimal(args.amplitude), from_decimal(args.frequency))
        out = radon.add_noise(s, model, args.seed)
        fileio.write_sinogram(out, args.out)
    print("wrote %s" % args.out)
    return 0


def _cmd_mollify(args):
    with working_precision(args.precision_bits):
        s = fileio.read_sinogram(args.infile)
        spec = mollifier.MollifierSpec(args.family, from_decimal(args.bandwidth), max_order=args.max_order)
        out = mollifier.mollify_sinogram(s, spec)
        fileio.write_sinogram(out, args.out)
    print("wrote %s" % args.out)
    return 0


def _cmd_moments(args):
    with working_precision(args.precision_bits):
        s = fileio.read_sinogram(args.infile)
        ms = momentsys.sinogram_moments(s, args.max_order)
        fileio.write_momentset(ms, args.out)
    print("wrote %s (kind=%s, K=%d)" % (args.out, ms.kind, ms.max_order))
    return 0


def _cmd_recover(args):
    with working_precision(args.precision_bits):
        ms = fileio.read_momentset(args.moments)
        if ms.kind == "mollified":
            if not args.family or not args.bandwidth:
                raise RadmomError("mollified moments need --family and --bandwidth to invert")
            spec = mollifier.MollifierSpec(args.family, from_decimal(args.bandwidth), max_order=ms.max_order)
            ms = momentsys.hatb_to_b(ms, spec)
            if args.raw_out:
                fileio.write_momentset(ms, args.raw_out)
        tri, info = momentsys.recover_triangle(ms, least_squares=args.least_squares)
        fileio.write_triangle(tri, args.out)
    conds = [rep.get("condition") for rep in info["orders"] if rep.get("condition") is not None]
    worst = max((float(c) for c in conds), default=float("nan"))
    print("wrote %s (K=%d, worst condition %.3e)" % (args.out, tri.max_order, worst))
    return 0


def _cmd_reconstruct(args):
    with working_precision(args.precision_bits):
        tri = fileio.read_triangle(args.triangle)
        g = reconstruct.reconstruct_grid(tri, args.m, args.n, args.resolution)
        fileio.write_grid(g, args.out)
    print("wrote %s (%dx%d)" % (args.out, len(g.xs), len(g.ys)))
    return 0


def _cmd_pipeline(args):
    cfg = PipelineConfig.load(args.config)
    if args.out_dir:
        cfg.out_dir = args.out_dir
    if args.seed is not None:
        cfg.seed = args.seed
    if args.least_squares:
        cfg.solver = "least-squares"
    result = run_pipeline(cfg)
    for stage in result.manifest["stages"]:
        print("%-12s %-6s %8.1f ms" % (stage["stage"], stage["status"], stage["ms"]))
    print("manifest: %s" % result.paths["manifest"])
    return 0


def _cmd_study(args):
    orders = [int(tok) for tok in args.orders.split(",")]
    with working_precision(args.precision_bits):
        d = density.from_registry(args.density)
        kwargs = {}
        if args.family:
            kwargs["mollifier_family"] = args.family
            if args.bandwidth:
                kwargs["mollifier_h"] = from_decimal(args.bandwidth)
            else:
                kwargs["rate_constants"] = (
                    from_decimal(args.rate_c),
                    from_decimal(args.rate_c1),
                )
        result = reconstruct.convergence_study(
            d,
            orders,
            angle_count=args.angles,
            resolution=args.resolution,
            least_squares=args.least_squares,
            **kwargs,
        )
        fileio.write_study(result, args.out)
    for row in result.rows:
        print("n=%-4d sup_error=%.6e  %8.1f ms" % (row.order, float(row.sup_error), row.runtime_ms))
    print("fitted log-log slope: %.4f" % result.fitted_slope)
    print("wrote %s" % args.out)
    return 0


def _cmd_validate(args):
    failures = 0
    with working_precision(args.precision_bits):
        ms = fileio.read_momentset(args.moments)
        if ms.kind == "raw":
            tol = from_decimal(args.homogeneity_tol)
            kmax = ms.max_order if args.max_order is None else args.max_order
            for k in range(kmax + 1):
                res, _ = momentsys.homogeneity_fit(ms, k)
                ok = res <= tol
                failures += 0 if ok else 1
                print("homogeneity k=%-3d residual=%.3e %s" % (k, float(res), "ok" if ok else "FAIL"))
        else:
            if not args.triangle or not args.family or not args.bandwidth:
                raise RadmomError(
                    "mollified moments validate against a triangle: need --triangle, --family, --bandwidth"
                )
            tri = fileio.read_triangle(args.triangle)
            spec = mollifier.MollifierSpec(args.family, from_decimal(args.bandwidth), max_order=ms.max_order)
            tol = from_decimal(args.synthesis_tol)
            kmax = min(ms.max_order, tri.max_order) if args.max_order is None else args.max_order
            for k in range(kmax + 1):
                for i, theta in enumerate(ms.angles):
                    res = momentsys.synthesis_residual(tri, spec, theta, k, ms.values[k][i])
                    if abs(res) > tol:
                        failures += 1
                        print("synthesis k=%d angle=%d residual=%.3e FAIL" % (k, i, float(res)))
            print("synthesis constraint: %d breaches at tol %s" % (failures, args.synthesis_tol))
    return 0 if failures == 0 else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="radmom",
        description="moment-method density reconstruction from line-integral data",
        epilog=_EPILOG,
    )
    parser.add_argument("--version", action="version", version="radmom %s (backend %s)" % (__version__, backend_name()))
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample a density's transform to a sinogram CSV", epilog=_EPILOG)
    p.add_argument("--density", required=True, help="registry id: %s" % ", ".join(density.registry_ids()))
    p.add_argument("--angles", type=int, default=radon.DEFAULT_ANGLE_COUNT)
    p.add_argument("--angle-list", help="explicit comma-separated angles (0 and pi are snapped inward)")
    p.add_argument("--offsets", type=int, default=radon.DEFAULT_OFFSET_COUNT)
    p.add_argument("--pad", default="0.2")
    p.add_argument("--tol", default="1e-30")
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--out", required=True)
    _add_precision(p)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("noise", help="perturb a sinogram", epilog=_EPILOG)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--model", choices=["gaussian", "uniform", "sinusoidal"], required=True)
    p.add_argument("--sigma", default="0")
    p.add_argument("--amplitude", default="0")
    p.add_argument("--frequency", default="1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_precision(p)
    p.set_defaults(fn=_cmd_noise)

    p = sub.add_parser("mollify", help="smooth a sinogram in the offset variable", epilog=_EPILOG)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--family", choices=list(mollifier.FAMILIES), default="bump")
    p.add_argument("--bandwidth", required=True)
    p.add_argument("--max-order", type=int, default=mollifier.DEFAULT_MAX_ORDER)
    p.add_argument("--out", required=True)
    _add_precision(p)
    p.set_defaults(fn=_cmd_mollify)

    p = sub.add_parser("moments", help="offset moments of a sinogram", epilog=_EPILOG)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--max-order", type=int, required=True)
    p.add_argument("--out", required=True)
    _add_precision(p)
    p.set_defaults(fn=_cmd_moments)

    p = sub.add_parser("recover", help="moments of the smoothed transform -> density moment triangle", epilog=_EPILOG)
    p.add_argument("--moments", required=True)
    p.add_argument("--family", choices=list(mollifier.FAMILIES))
    p.add_argument("--bandwidth")
    p.add_argument("--raw-out", help="write the unsmoothed moment set here too")
    p.add_argument("--least-squares", action="store_true")
    p.add_argument("--out", required=True)
    _add_precision(p)
    p.set_defaults(fn=_cmd_recover)

    p = sub.add_parser("reconstruct", help="synthesize a density grid from a moment triangle", epilog=_EPILOG)
    p.add_argument("--triangle", required=True)
    p.add_argument("-m", type=int, required=True)
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--resolution", type=int, default=51)
    p.add_argument("--out", required=True)
    _add_precision(p)
    p.set_defaults(fn=_cmd_reconstruct)

    p = sub.add_parser("pipeline", help="run all stages from a JSON config", epilog=_EPILOG)
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--least-squares", action="store_true")
    p.set_defaults(fn=_cmd_pipeline)

    p = sub.add_parser("study", help="convergence study over synthesis orders", epilog=_EPILOG)
    p.add_argument("--density", required=True)
    p.add_argument("--orders", required=True, help="comma-separated ascending orders")
    p.add_argument("--angles", type=int, default=radon.DEFAULT_ANGLE_COUNT)
    p.add_argument("--resolution", type=int, default=51)
    p.add_argument("--least-squares", action="store_true")
    p.add_argument("--family", choices=list(mollifier.FAMILIES))
    p.add_argument("--bandwidth")
    p.add_argument("--rate-c", default="4.5")
    p.add_argument("--rate-c1", default="0.158")
    p.add_argument("--out", required=True)
    _add_precision(p)
    p.set_defaults(fn=_cmd_study)

    p = sub.add_parser("validate", help="homogeneity / synthesis-consistency checks on moment files", epilog=_EPILOG)
    p.add_argument("--moments", required=True)
    p.add_argument("--triangle")
    p.add_argument("--family", choices=list(mollifier.FAMILIES))
    p.add_argument("--bandwidth")
    p.add_argument("--max-order", type=int)
    p.add_argument("--homogeneity-tol", default="1e-8")
    p.add_argument("--synthesis-tol", default="1e-12")
    _add_precision(p)
    p.set_defaults(fn=_cmd_validate)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except RadmomError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
