"""Command-line interface.

Exit codes: 0 success, 1 an estimation stage failed, 2 invalid input.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline, report, scenarios
from .dataset import DatasetFile, read_dataset, write_dataset
from .errors import DatasetError
from .sigproc import SignalConfigError

EXIT_OK, EXIT_STAGE_FAILURE, EXIT_INVALID = 0, 1, 2


class InvalidInput(Exception):
    pass


def _cutoff(text: str):
    if text.lower() in ("none", "off", "0"):
        return "none"
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"cutoff must be a number or 'none', got {text!r}") from None


def _stages(text: str) -> tuple:
    names = tuple(s.strip() for s in text.split(",") if s.strip())
    bad = set(names) - set(pipeline.STAGES)
    if bad or not names:
        raise argparse.ArgumentTypeError(f"stages must be a comma list from {','.join(pipeline.STAGES)}")
    return names


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("processing")
    g.add_argument("--ideal", action="store_true", help="noise-free settings: no filter, dataset twists, motion-gated static windows")
    g.add_argument("--cutoff", type=_cutoff, help="low-pass cutoff in Hz, or 'none'")
    g.add_argument("--order", type=int, dest="filter_order", help="Butterworth order")
    g.add_argument("--trim", type=float, dest="trim_s", help="seconds trimmed from each end")
    g.add_argument("--static-tolerance", type=float, dest="static_force_tolerance", help="force peak-to-peak tolerance (N)")
    g.add_argument("--static-duration", type=float, dest="static_min_duration", help="minimum static window (s)")
    g.add_argument("--static-twist-tolerance", type=float, dest="static_twist_tolerance", help="twist-norm gate for static windows")
    g.add_argument("--no-refine", action="store_false", dest="refine", default=None, help="skip loop-closure refinement")
    g.add_argument("--psd-policy", choices=("project", "discard"))
    g.add_argument("--twist-source", choices=pipeline.TWIST_SOURCES)
    g.add_argument("--ignore-moments", action="store_true", default=None, help="treat grasp moments as zero")


def _add_trial_flags(p: argparse.ArgumentParser, trials: bool = True) -> None:
    p.add_argument("--seed", type=int, help="base seed (trial k uses seed + k)")
    if trials:
        p.add_argument("--trials", type=int, help="trials per scenario")
    p.add_argument("--noise-profile", default="none", help="none, calibrated, or a profile JSON path")


RUN_KEYS = (
    "filter_order", "trim_s", "static_force_tolerance", "static_min_duration", "static_twist_tolerance",
    "refine", "psd_policy", "twist_source", "ignore_moments", "seed", "trials",
)


def run_config_from_args(args, profile: str | None = None) -> pipeline.RunConfig:
    """Defaults, then ``--ideal``, then the noise profile's settings, then
    explicit flags."""
    cfg = pipeline.RunConfig.ideal() if getattr(args, "ideal", False) else pipeline.RunConfig()
    kw = {}
    if profile:
        kw.update(scenarios.profile_run_overrides(profile))
    for k in RUN_KEYS:
        v = getattr(args, k, None)
        if v is not None:
            kw[k] = v
    c = getattr(args, "cutoff", None)
    if c is not None:
        kw["cutoff_hz"] = None if c == "none" else c
    if getattr(args, "stages", None):
        kw["stages"] = args.stages
    try:
        return cfg.with_overrides(**kw)
    except (TypeError, ValueError) as exc:
        raise InvalidInput(str(exc)) from None


def _noise(profile: str):
    try:
        return scenarios.load_noise_profile(profile)
    except (OSError, ValueError, TypeError) as exc:
        raise InvalidInput(f"cannot load noise profile {profile!r}: {exc}") from None


def _scenario(name: str, seed: int | None):
    try:
        return scenarios.load_scenario(name, seed)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InvalidInput(f"cannot load scenario {name!r}: {exc}") from None


def _read(path: str) -> DatasetFile:
    try:
        return read_dataset(sys.stdin if path == "-" else path)
    except (OSError, ValueError, KeyError) as exc:
        raise InvalidInput(f"cannot read dataset {path}: {exc}") from None


def _write(ds: DatasetFile, path: str) -> None:
    if path == "-":
        write_dataset(ds, sys.stdout)
    else:
        write_dataset(ds, path)


def _emit(rep: report.EstimationReport, fmt: str, out: str | None) -> int:
    report.emit_report(rep, fmt, None if out in (None, "-") else out)
    return EXIT_OK if rep.ok else EXIT_STAGE_FAILURE


def cmd_simulate(args) -> int:
    sc = _scenario(args.scenario, args.seed)
    if args.noise_profile != "none":
        sc = sc.with_noise(_noise(args.noise_profile))
    ds = pipeline.simulate(sc, include_derived=args.with_rates)
    _write(ds, args.out)
    return EXIT_OK


def cmd_preprocess(args) -> int:
    cfg = run_config_from_args(args)
    raw = _read(args.input)
    try:
        ds = pipeline.preprocess(raw, cfg)
    except (DatasetError, SignalConfigError) as exc:
        raise InvalidInput(str(exc)) from None
    _write(ds, args.out)
    return EXIT_OK


def cmd_estimate(args) -> int:
    cfg = run_config_from_args(args)
    ds = _read(args.input)
    name = str(ds.meta.get("scenario", Path(args.input).stem))
    if "preprocessed" in ds.meta and ds.has_derived:
        res = report.TrialResult(scenario=name, trial=0, seed=ds.meta.get("seed"))
        res.stages["preprocess"] = {"status": "skipped", "reason": "input already preprocessed"}
        pipeline.run_stages(ds, cfg, res)
        if ds.ground_truth:
            from .sim import payload_from_dict

            res.errors = report.compute_errors(res.estimates, payload_from_dict(ds.ground_truth), cfg.reference)
    else:
        res = pipeline.run_trial(ds, cfg, name, 0, ds.meta.get("seed"))
    rep = report.EstimationReport(config={"run": cfg.to_dict(), "noise": None}, trials=[res])
    return _emit(rep, args.format, args.out)


def cmd_pipeline(args) -> int:
    inputs = list(args.scenario or []) + list(args.dataset or [])
    if not inputs:
        raise InvalidInput("give at least one --scenario or --dataset")
    for s in args.scenario or []:
        _scenario(s, None)
    noise = None if args.noise_profile == "none" else _noise(args.noise_profile)
    cfg = run_config_from_args(args, None if noise is None else args.noise_profile)
    try:
        rep = pipeline.run_full_pipeline(inputs, cfg, noise)
    except (DatasetError, OSError) as exc:
        raise InvalidInput(str(exc)) from None
    rep.config["noise_profile"] = args.noise_profile
    if args.json_out:
        report.emit_report(rep, "json", args.json_out)
    return _emit(rep, args.format, args.out)


def cmd_report(args) -> int:
    try:
        text = sys.stdin.read() if args.input == "-" else Path(args.input).read_text()
        rep = report.parse_report(text)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InvalidInput(f"cannot read report {args.input}: {exc}") from None
    return _emit(rep, args.format, args.out)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="coop-payload", description="Cooperative payload estimation: simulate, preprocess, estimate, report.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="scenario -> dataset file")
    p.add_argument("--scenario", required=True, help="a, b, c, d or a scenario JSON path")
    _add_trial_flags(p, trials=False)
    p.add_argument("--with-rates", action="store_true", help="attach exact twists and twist rates")
    p.add_argument("--out", required=True, help="output dataset path or '-'")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("preprocess", help="filter, differentiate and trim a dataset")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    _add_run_flags(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("estimate", help="run estimation stages on one dataset")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--stages", type=_stages, default=pipeline.STAGES, help="comma list of kin,statics,inertia")
    p.add_argument("--format", choices=report.FORMATS, default="human")
    p.add_argument("--out")
    _add_run_flags(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("pipeline", help="simulate and estimate scenarios over several trials")
    p.add_argument("--scenario", action="append", help="repeatable: a, b, c, d or a scenario JSON path")
    p.add_argument("--dataset", action="append", help="repeatable: dataset file to process once")
    _add_trial_flags(p)
    p.add_argument("--stages", type=_stages, help="comma list of kin,statics,inertia")
    p.add_argument("--format", choices=report.FORMATS, default="human")
    p.add_argument("--out")
    p.add_argument("--json-out", help="also write the machine-readable report here")
    _add_run_flags(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("report", help="re-render a saved JSON report")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--format", choices=report.FORMATS, default="human")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InvalidInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
