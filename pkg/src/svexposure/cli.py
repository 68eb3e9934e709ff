"""Command-line entry point: ``svexp <subcommand> ...``.

Exit codes: 0 success, 2 bad arguments, 3 file I/O or format error,
4 failed precondition, 5 resource guard refused the job.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from . import experiments as X
from .histogram import DEFAULT_BINS, RadianceHistogram
from .io import (ImageFormatError, ensure_dir, read_image, read_json, read_pfm, write_csv_rows,
                 write_json, write_pfm, write_png_preview)
from .patterns import LevelSet, Pattern, enumerate_classes
from .reconstruct import RECONSTRUCTORS, reconstruct
from .risk import Estimator, build_neighbor_table, rank_patterns
from .scenes import SCENE_KINDS, synth_scene
from .sensor import RawCapture, SensorConfig, simulate_capture
from .validation import PreconditionError

log = logging.getLogger("svexposure")

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_IO = 3
EXIT_PRECONDITION = 4
EXIT_RESOURCE = 5

# exhaustive evaluation reconstructs every pattern twice, so keep scenes modest unless asked
DEFAULT_MAX_PIXELS = 256 * 256


class ResourceGuardError(RuntimeError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunManifest:
    """Everything needed to reproduce a run."""

    seed: int = 0
    config: str | None = None
    levels: str | None = None
    scenes: list[str] = field(default_factory=list)
    out: str = "."
    estimators: list[str] = field(default_factory=lambda: list(X.DEFAULT_ESTIMATORS))
    reconstructors: list[str] = field(default_factory=lambda: list(X.DEFAULT_RECONSTRUCTORS))

    def validate(self) -> None:
        for path in [self.config, self.levels, *self.scenes]:
            if path is not None and not Path(path).is_file():
                raise FileNotFoundError(f"manifest references missing file {path}")
        for est in self.estimators:
            Estimator(est)
        for rec in self.reconstructors:
            if rec not in RECONSTRUCTORS:
                raise PreconditionError(f"unknown reconstructor {rec!r}")

    @classmethod
    def from_file(cls, path) -> "RunManifest":
        data = read_json(path)
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise PreconditionError(f"unknown manifest fields {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------- helpers


def _load_config(path) -> SensorConfig:
    return SensorConfig.from_dict(read_json(path)) if path else SensorConfig()


def _load_levels(path) -> LevelSet:
    return LevelSet.from_dict(read_json(path)) if path else LevelSet.default()


def _parse_params(items: list[str]) -> dict:
    params = {}
    for item in items or []:
        if "=" not in item:
            raise PreconditionError(f"--param expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        try:
            params[key] = json.loads(value)
        except json.JSONDecodeError:
            params[key] = value
    return params


def _parse_quad(text: str, name: str) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise PreconditionError(f"--{name} expects four comma-separated numbers") from None
    if len(values) != 4:
        raise PreconditionError(f"--{name} expects four values, got {len(values)}")
    return values


def _parse_resolutions(text: str) -> list[tuple[int, int]]:
    out = []
    for item in text.split(","):
        try:
            h, w = (int(v) for v in item.lower().split("x"))
        except ValueError:
            raise PreconditionError(f"resolution {item!r} is not HxW") from None
        out.append((h, w))
    return out


def _sidecar(path) -> Path:
    return Path(str(path) + ".json")


def _load_pattern(args) -> Pattern:
    if args.pattern:
        return Pattern.from_dict(read_json(args.pattern))
    if args.tau and args.alpha:
        return Pattern(_parse_quad(args.tau, "tau"), _parse_quad(args.alpha, "alpha"))
    raise PreconditionError("give --pattern FILE or both --tau and --alpha")


def save_capture(capture: RawCapture, path) -> None:
    write_pfm(path, capture.codes.astype(np.float32))
    write_json(_sidecar(path), {
        "kind": "raw-capture",
        "pattern": capture.pattern.to_dict(),
        "config": capture.config.to_dict(),
        "seed": capture.seed,
        "noise_enabled": capture.noise_enabled,
    })


def load_capture(path) -> RawCapture:
    codes = read_pfm(path)
    meta = read_json(_sidecar(path))
    if meta.get("kind") != "raw-capture":
        raise ImageFormatError(f"{path}: sidecar does not describe a raw capture")
    return RawCapture(np.rint(codes).astype(np.int64), Pattern.from_dict(meta["pattern"]),
                      SensorConfig.from_dict(meta["config"]), int(meta["seed"]),
                      bool(meta.get("noise_enabled", True)))


def _resize_short_edge(radiance: np.ndarray, short_edge: int) -> np.ndarray:
    from scipy import ndimage

    h, w = radiance.shape
    factor = short_edge / min(h, w)
    out = ndimage.zoom(radiance, factor, order=1)
    h2, w2 = out.shape
    return np.clip(out[: h2 - h2 % 2, : w2 - w2 % 2], 0.0, None)


def _guard(shape, max_pixels: int, allow_large: bool) -> None:
    n = int(shape[0]) * int(shape[1])
    if n > max_pixels and not allow_large:
        raise ResourceGuardError(
            f"scene has {n} pixels, above the cap of {max_pixels}; pass --allow-large to run anyway")


# ---------------------------------------------------------------- subcommands


def cmd_synth(args) -> int:
    config = _load_config(args.config)
    levels = _load_levels(args.levels)
    params = _parse_params(args.param)
    if args.kind == "hdr-composite":
        params.setdefault("seed", args.seed)
    if args.width % 2 or args.height % 2:
        raise PreconditionError("scene dimensions must be even to tile the 2x2 pattern")
    scene = synth_scene(args.kind, args.width, args.height, config, levels, **params)
    write_pfm(args.out, scene)
    write_json(_sidecar(args.out), {"kind": args.kind, "width": args.width, "height": args.height,
                                    "params": params, "seed": args.seed})
    log.info("wrote %s (%dx%d)", args.out, args.width, args.height)
    return EXIT_OK


def cmd_capture(args) -> int:
    config = _load_config(args.config)
    scene = read_image(args.scene)
    capture = simulate_capture(scene, _load_pattern(args), config, seed=args.seed,
                               noise_enabled=not args.no_noise)
    save_capture(capture, args.out)
    return EXIT_OK


def cmd_pilot(args) -> int:
    config = _load_config(args.config)
    levels = _load_levels(args.levels)
    scene = read_image(args.scene)
    hist, pilot = X.pilot_histogram(scene, config, levels, args.seed, args.downsample, args.bins)
    data = hist.to_dict()
    data["seed"] = args.seed
    write_json(args.out, data)
    if args.capture_out:
        save_capture(pilot, args.capture_out)
    return EXIT_OK


def cmd_rank(args) -> int:
    config = _load_config(args.config)
    levels = _load_levels(args.levels)
    est = Estimator(args.estimator)
    if est.needs_histogram:
        if not args.histogram:
            raise PreconditionError(f"{est.value} ranks from a pilot histogram; pass --histogram")
        data = RadianceHistogram.from_dict(read_json(args.histogram))
    else:
        if not args.scene:
            raise PreconditionError(f"{est.value} needs the ground-truth scene; pass --scene")
        data = read_image(args.scene)
    report = rank_patterns(est, data, list(enumerate_classes(levels)), config,
                           build_neighbor_table(args.neighborhood), seed=args.seed)
    report.to_csv(args.out)
    if args.json_out:
        Path(args.json_out).write_text(report.to_json() + "\n")
    print(report.top.pattern.label())
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    capture = load_capture(args.capture)
    out = reconstruct(capture, args.method)
    write_pfm(args.out, out)
    if args.preview:
        if not write_png_preview(args.preview, out, X.tonemap_mu(capture.config)):
            log.warning("Pillow is not installed; skipped the PNG preview")
    return EXIT_OK


def _eval_scenes(args, manifest: RunManifest, config, levels) -> list[tuple[str, np.ndarray]]:
    scenes = []
    for path in manifest.scenes:
        rad = read_image(path)
        if args.resize_short_edge:
            rad = _resize_short_edge(rad, args.resize_short_edge)
        scenes.append((Path(path).stem, rad))
    for n in range(args.synthetic):
        scenes.append((f"synthetic-{n:02d}",
                       synth_scene("hdr-composite", args.size, args.size, config, levels,
                                   seed=X.derive_seed(manifest.seed, 1000 + n))))
    if not scenes:
        raise PreconditionError("no scenes: pass --scene FILE or --synthetic N")
    for _, rad in scenes:
        _guard(rad.shape, args.max_pixels, args.allow_large)
    return scenes


def _manifest_from_args(args) -> RunManifest:
    if getattr(args, "manifest", None):
        m = RunManifest.from_file(args.manifest)
    else:
        m = RunManifest(seed=args.seed, config=args.config, levels=args.levels,
                        scenes=list(args.scene or []), out=args.out)
        if getattr(args, "estimators", None):
            m.estimators = args.estimators.split(",")
        if getattr(args, "reconstructors", None):
            m.reconstructors = args.reconstructors.split(",")
    m.validate()
    return m


def cmd_eval(args) -> int:
    manifest = _manifest_from_args(args)
    config = _load_config(manifest.config)
    levels = _load_levels(manifest.levels)
    scenes = _eval_scenes(args, manifest, config, levels)
    out = ensure_dir(manifest.out)
    t0 = time.perf_counter()
    evals = X.evaluate_scenes(scenes, config, levels, manifest.seed, workers=args.workers,
                              estimators=tuple(manifest.estimators),
                              reconstructors=tuple(manifest.reconstructors),
                              pilot_factor=args.pilot_downsample, bins=args.bins)
    elapsed = time.perf_counter() - t0

    score_rows, scatter, risk_rows = [], [], []
    for ev in evals:
        t = ev.scores
        for i, pid in enumerate(t.pattern_ids):
            for j, alg in enumerate(t.algorithms):
                for k, met in enumerate(t.metrics):
                    score_rows.append({"scene": ev.name, "pattern_id": pid, "algorithm": alg,
                                       "metric": met, "score": float(t.scores[i, j, k]),
                                       "seed": manifest.seed})
        for alg in t.algorithms:
            for met in t.metrics:
                for row in X.scatter_rows(ev, alg, met):
                    scatter.append({**row, "algorithm": alg, "metric": met, "seed": manifest.seed})
        for est, report in ev.reports.items():
            for row in report.rows:
                risk_rows.append({"scene": ev.name, "estimator": est, "rank": row.rank,
                                  "pattern_id": row.pattern_id, "risk": row.risk.report_value,
                                  "infinite": int(row.risk.infinite), "seed": manifest.seed})
    write_csv_rows(out / "scores.csv", score_rows)
    write_csv_rows(out / "scatter.csv", scatter)
    write_csv_rows(out / "risks.csv", risk_rows)

    stats_rows = []
    for st in X.ranking_statistics(evals, (X.ORACLE_RANKING, *manifest.estimators)):
        row = {"estimator": st.estimator, "algorithm": st.algorithm, "metric": st.metric}
        row.update({f"delta_{k}": v for k, v in st.delta.items()})
        row.update({f"q_{eta:g}": v for eta, v in st.q.items()})
        row["seed"] = manifest.seed
        stats_rows.append(row)
    write_csv_rows(out / "statistics.csv", stats_rows)

    corr_rows = [{**asdict(c), "seed": manifest.seed} for c in X.universality(evals)]
    corr_fields = [f.name for f in fields(X.Correlation)] + ["seed"]
    write_csv_rows(out / "spearman.csv", corr_rows, corr_fields)
    summary = {"manifest": manifest.to_dict(), "scenes": [name for name, _ in scenes],
               "n_patterns": len(evals[0].scores.pattern_ids), "elapsed_seconds": elapsed,
               "statistics": stats_rows, "spearman": corr_rows}
    write_json(out / "summary.json", summary)
    for row in stats_rows:
        if row["metric"] == "mu_psnr":
            print(f"{row['estimator']:8s} {row['algorithm']:8s} delta_1={row['delta_1']:.3f} dB")
    return EXIT_OK


def cmd_bench(args) -> int:
    config = _load_config(args.config)
    levels = _load_levels(args.levels)
    rows = X.bench_risks(config, levels, _parse_resolutions(args.resolutions), args.repeats,
                         args.seed, args.bins)
    write_csv_rows(args.out, [{**asdict(r), "seed": args.seed} for r in rows])
    for r in rows:
        print(f"{r.estimator:4s} {r.height}x{r.width}: {r.mean_seconds:.4f} +/- {r.std_seconds:.4f} s")
    return EXIT_OK


def cmd_pipeline(args) -> int:
    manifest = _manifest_from_args(args)
    if len(manifest.scenes) != 1:
        raise PreconditionError("pipeline runs on exactly one scene")
    config = _load_config(manifest.config)
    levels = _load_levels(manifest.levels)
    out = ensure_dir(manifest.out)
    stage = "load"
    try:
        scene = read_image(manifest.scenes[0])
        stage = "pipeline"
        result = X.run_pipeline(scene, config, levels, manifest.seed,
                                estimator=manifest.estimators[0],
                                reconstructor=manifest.reconstructors[0],
                                pilot_factor=args.pilot_downsample, bins=args.bins,
                                neighborhood=args.neighborhood)
        stage = "write"
        result.report.to_csv(out / "rank.csv")
        write_json(out / "histogram.json", {**result.histogram.to_dict(), "seed": manifest.seed})
        write_pfm(out / "reconstruction.pfm", result.reconstruction)
        write_png_preview(out / "reconstruction.png", result.reconstruction, X.tonemap_mu(config))
        save_capture(result.capture, out / "capture.pfm")
        write_json(out / "metrics.json", result.metrics)
        write_json(out / "manifest.json", manifest.to_dict())
    except (OSError, ImageFormatError, PreconditionError):
        raise
    except Exception as exc:
        raise StageError(stage, exc) from exc
    print(f"top-1 {result.report.top.pattern.label()}  muPSNR {result.metrics['mu_psnr']:.2f} dB")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _common(p, seed=True):
    p.add_argument("--config", help="sensor config JSON (default: built-in)")
    p.add_argument("--levels", help="level set JSON (default: 3 exposures x 3 gains)")
    if seed:
        p.add_argument("--seed", type=int, default=0, help="run seed (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="svexp", description="Spatially varying exposure toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--verbose", "-v", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a radiance map")
    p.add_argument("--kind", choices=SCENE_KINDS, default="hdr-composite")
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--height", type=int, default=128)
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="scene parameter (repeatable)")
    p.add_argument("--out", required=True)
    _common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("capture", help="simulate a raw capture")
    p.add_argument("--scene", required=True)
    p.add_argument("--pattern", help="pattern JSON with tau and alpha lists")
    p.add_argument("--tau", help="four comma-separated exposures, row-major")
    p.add_argument("--alpha", help="four comma-separated gains, row-major")
    p.add_argument("--no-noise", action="store_true")
    p.add_argument("--out", required=True)
    _common(p)
    p.set_defaults(func=cmd_capture)

    p = sub.add_parser("pilot", help="pilot capture and radiance histogram")
    p.add_argument("--scene", required=True)
    p.add_argument("--downsample", type=int, default=X.DEFAULT_PILOT_DOWNSAMPLE)
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.add_argument("--capture-out", help="also write the pilot capture")
    p.add_argument("--out", required=True)
    _common(p)
    p.set_defaults(func=cmd_pilot)

    p = sub.add_parser("rank", help="rank all pattern classes by a risk")
    p.add_argument("--estimator", choices=[e.value for e in Estimator], default="sve")
    p.add_argument("--histogram", help="histogram JSON (SVE variants)")
    p.add_argument("--scene", help="ground-truth scene (SNR variants)")
    p.add_argument("--neighborhood", type=int, default=3)
    p.add_argument("--json-out")
    p.add_argument("--out", required=True)
    _common(p)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("reconstruct", help="reconstruct radiance from a raw capture")
    p.add_argument("--capture", required=True)
    p.add_argument("--method", choices=sorted(RECONSTRUCTORS), default="lpa")
    p.add_argument("--preview", help="8-bit tone-mapped PNG")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("eval", help="exhaustive ranking evaluation over scenes")
    p.add_argument("--manifest")
    p.add_argument("--scene", action="append", help="scene file (repeatable)")
    p.add_argument("--synthetic", type=int, default=0, help="number of synthetic scenes to add")
    p.add_argument("--size", type=int, default=128, help="synthetic scene edge length")
    p.add_argument("--resize-short-edge", type=int, help="resize loaded scenes (e.g. 512)")
    p.add_argument("--estimators", help="comma list (default: all)")
    p.add_argument("--reconstructors", help="comma list (default: lpa,admm-tv)")
    p.add_argument("--pilot-downsample", type=int, default=X.DEFAULT_PILOT_DOWNSAMPLE)
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--max-pixels", type=int, default=DEFAULT_MAX_PIXELS)
    p.add_argument("--allow-large", action="store_true")
    p.add_argument("--out", default="eval-out")
    _common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="time SVE-Risk vs SNR-Risk")
    p.add_argument("--resolutions", default="128x128,256x256")
    p.add_argument("--repeats", type=int, default=100)
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.add_argument("--out", required=True)
    _common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("pipeline", help="pilot -> rank -> capture -> reconstruct -> score")
    p.add_argument("--manifest")
    p.add_argument("--scene", action="append")
    p.add_argument("--estimators", help="estimator to rank with (first is used)")
    p.add_argument("--reconstructors", help="reconstructor (first is used)")
    p.add_argument("--pilot-downsample", type=int, default=X.DEFAULT_PILOT_DOWNSAMPLE)
    p.add_argument("--bins", type=int, default=DEFAULT_BINS)
    p.add_argument("--neighborhood", type=int, default=3)
    p.add_argument("--out", default="pipeline-out")
    _common(p)
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_PARSE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ResourceGuardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO if isinstance(exc.cause, OSError) else EXIT_PRECONDITION
    except (OSError, ImageFormatError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (PreconditionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
