"""Command-line runner: ``glmpu <subcommand> --config exp.json [--set key=value ...]``.

Exit status is 0 on success, 2 for configuration errors and 3 for runtime
errors. Every run writes ``manifest.json`` (resolved config, overrides and
seeds) to the output directory.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .bench import runtime_sweep, write_reports
from .config import ConfigError, ExperimentConfig, apply_overrides, load_config
from .detectors import KappaPair, compute_statistic
from .montecarlo import (
    CALIBRATION_STREAM,
    CalibratedDetector,
    calibrate_threshold,
    derive_seed,
    detection_curve,
    roc_curve,
)
from .signal_model import ObservationSet, generate_observations

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
CURVE_STREAM = 10
ROC_STREAM = 11


def _alpha_tag(alpha: float) -> str:
    return f"a{alpha:g}"


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cmd_generate(cfg: ExperimentConfig, out: Path, args) -> dict:
    seed = cfg.master_seed
    obs = generate_observations(cfg.scenario, cfg.hypothesis, seed, noiseless=cfg.noiseless)
    path = out / "observations.csv"
    obs.to_csv(path)
    return {"files": [path.name], "seeds": {"observations": seed}}


def _calibrate_all(cfg: ExperimentConfig, args) -> list[tuple[int, CalibratedDetector]]:
    cal_trials = cfg.calibration_trials or cfg.trials
    out = []
    for i, alpha in enumerate(cfg.alpha_list):
        seed = derive_seed(cfg.master_seed, CALIBRATION_STREAM, i)
        for det in cfg.detector_ids:
            cal = calibrate_threshold(
                det, cfg.scenario, alpha, cal_trials, seed, cfg.grid, threads=args.threads
            )
            out.append((seed, cal))
    return out


def cmd_calibrate(cfg: ExperimentConfig, out: Path, args) -> dict:
    files, seeds = [], {}
    for seed, cal in _calibrate_all(cfg, args):
        name = f"calibration_{cal.name}_{_alpha_tag(cal.alpha)}.json"
        _write_json(out / name, cal.to_dict())
        files.append(name)
        seeds[name] = seed
    return {"files": files, "seeds": seeds}


def cmd_detect(cfg: ExperimentConfig, out: Path, args) -> dict:
    if args.input is None:
        raise ConfigError("detect needs --input <observations.csv>")
    obs = ObservationSet.from_csv(Path(args.input))
    if obs.shape != (cfg.scenario.M, cfg.scenario.N):
        raise ValueError(
            f"observation shape {obs.shape} does not match scenario "
            f"(M, N) = ({cfg.scenario.M}, {cfg.scenario.N})"
        )
    if args.calibration:
        cals = [(None, CalibratedDetector.from_dict(json.loads(Path(p).read_text())))
                for p in args.calibration]
    else:
        cals = _calibrate_all(cfg, args)
    lines = ["detector,alpha,statistic,threshold,decision"]
    for _, cal in cals:
        stat = float(compute_statistic(
            cal.detector_id, obs, cfg.scenario, cal.grid,
            kappa=KappaPair(0.0, cal.kappa.kappa2), design_delta=cal.design_delta,
        ))
        decision = "reject" if stat > cal.threshold else "accept"
        print(f"{cal.name} alpha={cal.alpha:g} statistic={stat!r} "
              f"threshold={cal.threshold!r} decision={decision}")
        lines.append(f"{cal.name},{cal.alpha:.17g},{stat:.17g},{cal.threshold:.17g},{decision}")
    (out / "detect.csv").write_text("\n".join(lines) + "\n")
    return {"files": ["detect.csv"], "seeds": {"calibration": [s for s, _ in cals]}}


def cmd_curve(cfg: ExperimentConfig, out: Path, args) -> dict:
    values = cfg.sweep.resolved(cfg.scenario)
    files, seeds = [], {}
    for i, alpha in enumerate(cfg.alpha_list):
        seed = derive_seed(cfg.master_seed, CURVE_STREAM, i)
        for det in cfg.detector_ids:
            curve = detection_curve(
                det, cfg.scenario, cfg.sweep.axis, values, alpha, cfg.trials, seed, cfg.grid,
                calibration_trials=cfg.calibration_trials, threads=args.threads,
            )
            name = f"curve_{det.value}_{_alpha_tag(alpha)}.csv"
            curve.write(out / name)
            files += [name, Path(name).with_suffix(".json").name]
            seeds[name] = seed
    return {"files": files, "seeds": seeds}


def cmd_roc(cfg: ExperimentConfig, out: Path, args) -> dict:
    seed = derive_seed(cfg.master_seed, ROC_STREAM, 0)
    files = []
    for det in cfg.detector_ids:
        curve = roc_curve(det, cfg.scenario, cfg.trials, seed, cfg.grid,
                          max_points=cfg.roc_max_points, threads=args.threads)
        name = f"roc_{det.value}.csv"
        curve.write(out / name)
        files += [name, Path(name).with_suffix(".json").name]
    return {"files": files, "seeds": {"roc": seed}}


def cmd_bench(cfg: ExperimentConfig, out: Path, args) -> dict:
    reports = runtime_sweep(
        cfg.detector_ids, cfg.bench_N_values, cfg.scenario, cfg.grid,
        repetitions=cfg.bench_repetitions, seed=cfg.master_seed,
    )
    write_reports(reports, out / "bench.csv")
    batches = {f"{r.detector_id}@N={r.N}": r.batch for r in reports}
    return {"files": ["bench.csv"], "seeds": {"data": cfg.master_seed}, "batch": batches}


COMMANDS = {
    "generate": cmd_generate,
    "detect": cmd_detect,
    "calibrate": cmd_calibrate,
    "curve": cmd_curve,
    "roc": cmd_roc,
    "bench": cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="glmpu", description="Detect small frequency deviations by local tests."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="experiment JSON file")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config field (repeatable)")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--seed", type=int, help="master seed (overrides master_seed)")
        p.add_argument("--threads", type=int, default=1, help="worker threads, 0 = auto")
        if name == "detect":
            p.add_argument("--input", help="observation CSV to test")
            p.add_argument("--calibration", action="append",
                           help="calibration JSON to use instead of calibrating (repeatable)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "bench":
        args.threads = 1
    try:
        overrides = list(args.overrides)
        if args.out is not None:
            overrides.append(f"output_dir={json.dumps(args.out)}")
        if args.seed is not None:
            overrides.append(f"master_seed={args.seed}")
        raw = apply_overrides(load_config(args.config), overrides)
        cfg = ExperimentConfig.from_dict(raw)
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = COMMANDS[args.command](cfg, out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    manifest = {
        "command": args.command,
        "version": __version__,
        "config": cfg.to_dict(),
        "overrides": overrides,
        "threads": args.threads,
        **result,
    }
    _write_json(out / "manifest.json", manifest)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
