"""End-to-end orchestration: simulate, perturb, smooth, invert, synthesize.

Artifacts of every stage are written to the output directory together
with a manifest recording configuration, versions, per-stage wall times,
solve condition numbers and the synthesis cancellation monitor. A stage
failure aborts the run with the stage name; the manifest is then written
with a .partial suffix.
"""

import json
import os
import time
from dataclasses import asdict, dataclass, field

from gmpy2 import mpfr

from . import __version__, density, fileio, mollifier, momentsys, radon, reconstruct
from .backend import backend_name
from .errors import ConfigError, StageError
from .precision import ensure_real, from_decimal, working_precision

ARTIFACTS = {
    "sinogram": "sinogram.csv",
    "sinogram_noisy": "sinogram_noisy.csv",
    "sinogram_mollified": "sinogram_mollified.csv",
    "moments_mollified": "moments_mollified.json",
    "moments_raw": "moments_raw.json",
    "triangle": "triangle.json",
    "reconstruction": "reconstruction.csv",
    "manifest": "manifest.json",
}


@dataclass
class PipelineConfig:
    density: str = "xy"
    sinogram_in: str = None
    angle_count: int = radon.DEFAULT_ANGLE_COUNT
    offset_count: int = radon.DEFAULT_OFFSET_COUNT
    pad: str = "0.2"
    mollifier: dict = None
    noise: dict = None
    seed: int = 0
    max_order: int = 20
    reconstruction: dict = None
    precision: int = 256
    quad_tol: str = "auto"
    sinogram_tol: str = "1e-30"
    moment_source: str = "auto"
    solver: str = "square"
    emit_sinogram: bool = True
    normalize: bool = False
    out_dir: str = "out"

    @classmethod
    def from_dict(cls, payload):
        known = {f for f in cls.__dataclass_fields__}
        bad = set(payload) - known
        if bad:
            raise ConfigError("unknown config keys: %s" % ", ".join(sorted(bad)))
        return cls(**payload)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return asdict(self)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def resolved_source(self):
        if self.moment_source != "auto":
            return self.moment_source
        if self.sinogram_in or self.noise:
            return "grid"
        return "continuous"

    def validate(self):
        if self.precision < 64:
            raise ConfigError("precision must be at least 64 bits")
        if not self.density and not self.sinogram_in:
            raise ConfigError("need a density id or an input sinogram")
        if self.max_order < 0:
            raise ConfigError("max_order must be nonnegative")
        if self.offset_count < 2:
            raise ConfigError("offset_count must be at least 2")
        if self.angle_count < 1:
            raise ConfigError("angle_count must be at least 1")
        if self.solver not in ("square", "least-squares"):
            raise ConfigError("solver must be square or least-squares")
        if self.moment_source not in ("auto", "grid", "continuous"):
            raise ConfigError("moment_source must be auto, grid or continuous")
        src = self.resolved_source()
        if src == "continuous":
            if not self.density:
                raise ConfigError("continuous moments need a density")
            if self.noise:
                raise ConfigError("noise applies to sampled sinograms; use the grid path")
        if self.reconstruction is not None:
            m = int(self.reconstruction["m"])
            n = int(self.reconstruction["n"])
            if self.max_order < m + n:
                raise ConfigError(
                    "max_order %d cannot cover the (%d, %d) synthesis rectangle"
                    % (self.max_order, m, n)
                )
        if self.mollifier is not None:
            # h <= pad is enforced by the mollify stage itself (grid path),
            # so a breach aborts there with the support-overflow error
            if self.mollifier.get("family") not in mollifier.FAMILIES:
                raise ConfigError("unknown mollifier family %r" % self.mollifier.get("family"))
            h = mpfr(str(self.mollifier["h"]))
            if not h > 0:
                raise ConfigError("mollifier bandwidth must be positive")
        if self.noise is not None:
            model = self.noise.get("model")
            if model not in ("gaussian", "uniform", "sinusoidal"):
                raise ConfigError("unknown noise model %r" % model)


@dataclass
class PipelineResult:
    out_dir: str
    paths: dict
    manifest: dict
    sinogram: object = None
    moments_mollified: object = None
    moments_raw: object = None
    triangle: object = None
    grid: object = None


def _noise_model(noise_cfg):
    model = noise_cfg["model"]
    if model == "gaussian":
        return radon.GaussianNoise(mpfr(str(noise_cfg["sigma"])))
    if model == "uniform":
        return radon.UniformNoise(mpfr(str(noise_cfg["amplitude"])))
    return radon.SinusoidalNoise(
        mpfr(str(noise_cfg["amplitude"])), mpfr(str(noise_cfg["frequency"]))
    )


def run_pipeline(cfg):
    """Execute the configured run and write all artifacts plus manifest."""
    cfg.validate()
    os.makedirs(cfg.out_dir, exist_ok=True)
    stages = []
    paths = {}
    result = PipelineResult(cfg.out_dir, paths, {})

    def run_stage(name, fn):
        t0 = time.perf_counter()
        try:
            out = fn()
        except Exception as exc:
            stages.append(
                {"stage": name, "status": "error", "error": str(exc),
                 "ms": (time.perf_counter() - t0) * 1000.0}
            )
            manifest["stages"] = stages
            manifest["status"] = "error"
            fileio.write_manifest(
                manifest, os.path.join(cfg.out_dir, ARTIFACTS["manifest"] + ".partial")
            )
            raise StageError(name, exc) from exc
        stages.append(
            {"stage": name, "status": "ok", "ms": (time.perf_counter() - t0) * 1000.0}
        )
        return out

    def art(key):
        path = os.path.join(cfg.out_dir, ARTIFACTS[key])
        paths[key] = path
        return path

    manifest = {
        "config": cfg.to_dict(),
        "versions": {"radmom": __version__, "backend": backend_name()},
        "status": "running",
    }

    with working_precision(cfg.precision):
        src = cfg.resolved_source()
        tol = None if cfg.quad_tol == "auto" else from_decimal(cfg.quad_tol)
        sino_tol = from_decimal(cfg.sinogram_tol)
        dens = None
        if cfg.density:
            dens = density.from_registry(cfg.density)
            if cfg.normalize:
                dens = dens.normalized()

        spec = None
        if cfg.mollifier is not None:
            spec = mollifier.MollifierSpec(
                cfg.mollifier["family"], mpfr(str(cfg.mollifier["h"])), max_order=cfg.max_order
            )

        sino = None
        if cfg.sinogram_in:
            sino = run_stage("simulate", lambda: fileio.read_sinogram(cfg.sinogram_in))
        elif src == "grid" or cfg.emit_sinogram:
            def simulate():
                s = radon.make_sinogram(
                    dens,
                    radon.default_angles(cfg.angle_count),
                    cfg.offset_count,
                    ensure_real(cfg.pad),
                    sino_tol,
                )
                fileio.write_sinogram(s, art("sinogram"))
                return s

            sino = run_stage("simulate", simulate)
        result.sinogram = sino

        if cfg.noise is not None:
            def noisify():
                s = radon.add_noise(sino, _noise_model(cfg.noise), cfg.seed)
                fileio.write_sinogram(s, art("sinogram_noisy"))
                return s

            sino = run_stage("noise", noisify)
            result.sinogram = sino

        hatb = None
        if src == "grid":
            if spec is not None:
                def mollify():
                    s = mollifier.mollify_sinogram(sino, spec)
                    fileio.write_sinogram(s, art("sinogram_mollified"))
                    return s

                sino = run_stage("mollify", mollify)

            def grid_moments():
                ms = momentsys.sinogram_moments(sino, cfg.max_order)
                if ms.kind == "mollified":
                    fileio.write_momentset(ms, art("moments_mollified"))
                else:
                    fileio.write_momentset(ms, art("moments_raw"))
                return ms

            ms = run_stage("moments", grid_moments)
            if ms.kind == "mollified":
                hatb = ms
        else:
            def cont_moments():
                raw = momentsys.continuous_moments(
                    dens, radon.default_angles(cfg.angle_count), cfg.max_order, tol=tol
                )
                if spec is not None:
                    hb = momentsys.transfer_hatb(raw, spec)
                    fileio.write_momentset(hb, art("moments_mollified"))
                    return hb
                fileio.write_momentset(raw, art("moments_raw"))
                return raw

            ms = run_stage("moments", cont_moments)
            if spec is not None:
                hatb = ms
        result.moments_mollified = hatb

        def recover():
            raw = ms
            if hatb is not None:
                raw = momentsys.hatb_to_b(hatb, spec)
                fileio.write_momentset(raw, art("moments_raw"))
            tri, info = momentsys.recover_triangle(
                raw, cfg.max_order, least_squares=(cfg.solver == "least-squares")
            )
            fileio.write_triangle(tri, art("triangle"))
            manifest["solves"] = [
                {
                    "order": rep["order"],
                    "mode": rep["mode"],
                    "condition": None if rep.get("condition") is None else float(rep["condition"]),
                }
                for rep in info["orders"]
            ]
            result.moments_raw = raw
            return tri

        tri = run_stage("recover", recover)
        result.triangle = tri

        if cfg.reconstruction is not None:
            def synthesize():
                m = int(cfg.reconstruction["m"])
                n = int(cfg.reconstruction["n"])
                res = int(cfg.reconstruction.get("resolution", 51))
                meta = {}
                if spec is not None:
                    meta["h"] = spec.h
                g = reconstruct.reconstruct_grid(tri, m, n, res, meta=meta)
                fileio.write_grid(g, art("reconstruction"))
                manifest["cancellation"] = {
                    "max_term": g.meta["cancellation_max_term"],
                    "worst_ratio": g.meta["cancellation_worst_ratio"],
                }
                return g

            result.grid = run_stage("reconstruct", synthesize)

    manifest["stages"] = stages
    manifest["status"] = "ok"
    fileio.write_manifest(manifest, os.path.join(cfg.out_dir, ARTIFACTS["manifest"]))
    paths["manifest"] = os.path.join(cfg.out_dir, ARTIFACTS["manifest"])
    result.manifest = manifest
    return result
