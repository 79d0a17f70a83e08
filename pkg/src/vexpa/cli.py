"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 analysis failure, 3 an experiment
missed one of its acceptance thresholds.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import jsonschema

from . import io
from .diagnostics import crlb, disposedness
from .errors import VexpaError
from .experiments import ExperimentName, ExperimentSpec, default_spec, run_experiment, write_report
from .pipeline import BaseMethod, VexpaConfig, run_baseline, run_vexpa
from .signal_model import SamplingGrid, add_noise, inject_outlier, noise_variance, sample

log = logging.getLogger("vexpa")

OUTPUT_ROOT_ENV = "VEXPA_OUTPUT_ROOT"
EXIT_OK, EXIT_USAGE, EXIT_ANALYSIS, EXIT_THRESHOLD = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "vexpa-output"))


def _grid(args) -> SamplingGrid:
    if args.delta is not None and args.rate is not None:
        raise UsageError("give either --delta or --rate, not both")
    delta = args.delta if args.delta is not None else 1.0 / args.rate if args.rate else None
    if delta is None:
        raise UsageError("one of --delta or --rate is required")
    if not delta > 0:
        raise UsageError(f"sampling interval must be positive, got {delta}")
    return SamplingGrid(delta, args.count)


def _outlier(text: str) -> tuple[int, complex]:
    try:
        idx, re_, im = text.split(":")
        return int(idx), complex(float(re_), float(im))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected idx:re:im, got {text!r}") from None


def cmd_generate(args) -> int:
    model = io.read_model(args.model)
    smp = add_noise(sample(model, _grid(args)), args.snr, args.seed)
    for idx, off in args.outlier or []:
        smp = inject_outlier(smp, idx, off)
    out = Path(args.output) if args.output else output_root() / "samples.csv"
    io.write_samples(out, smp, model)
    print(out)
    return EXIT_OK


def _load_config(path) -> VexpaConfig:
    if path is None:
        return VexpaConfig()
    return VexpaConfig.from_dict(io.read_json(path))


def cmd_analyze(args) -> int:
    smp = io.read_samples(args.samples)
    if args.mode == "baseline":
        if args.order is None:
            raise UsageError("--mode baseline needs --order")
        terms = run_baseline(smp, args.order, args.method)
        data = {"mode": "baseline", "model_order": len(terms),
                "terms": [{"beta": t.beta, "gamma": t.gamma, "psi": t.psi, "omega": t.omega} for t in terms],
                "metadata": {"method": args.method, "samples": str(args.samples),
                             "noise": [list(n) for n in smp.noise]}}
    else:
        config = _load_config(args.config)
        res = run_vexpa(smp, config, workers=args.workers)
        data = res.to_dict()
        data["mode"] = "vexpa"
        data["metadata"] = {**data["metadata"], "samples": str(args.samples),
                            "noise": [list(n) for n in smp.noise],
                            "outliers": [[i, [o.real, o.imag]] for i, o in smp.outliers]}
    out = Path(args.output) if args.output else output_root() / "result.json"
    io.write_json(out, data, io.RESULT_SCHEMA)
    print(out)
    return EXIT_OK


def cmd_experiment(args) -> int:
    if args.spec:
        spec = ExperimentSpec.from_dict(io.read_json(args.spec))
    elif args.name:
        spec = default_spec(args.name)
    else:
        raise UsageError("give a spec file or --name")
    if args.seeds is not None:
        spec = ExperimentSpec.from_dict({**spec.to_dict(), "seeds": list(range(args.seeds))})
    if args.workers is not None:
        spec = ExperimentSpec.from_dict({**spec.to_dict(), "workers": args.workers})
    report = run_experiment(spec)
    out = Path(args.output) if args.output else output_root() / spec.name.value
    write_report(report, out)
    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}  {c.detail}")
    print(out)
    return EXIT_OK if report.passed else EXIT_THRESHOLD


def cmd_crlb(args) -> int:
    model = io.read_model(args.model)
    grid = _grid(args)
    rep = crlb(model, grid, noise_variance(sample(model, grid).values, args.snr), allow_pinv=args.allow_pinv)
    data = {**rep.to_dict(), "snr_db": args.snr}
    _emit(data, args.output)
    return EXIT_OK


def cmd_disposedness(args) -> int:
    model = io.read_model(args.model)
    delta = _grid(args).delta
    _emit(disposedness(model, delta, args.u).to_dict(), args.output)
    return EXIT_OK


def _emit(data: dict, output):
    if output:
        print(io.write_json(output, data))
    else:
        print(json.dumps(io.jsonable(data), indent=2, sort_keys=True))


def _add_grid(p, count_default: int = 300):
    p.add_argument("--delta", type=float, help="sampling interval")
    p.add_argument("--rate", type=float, help="sampling rate, the inverse of --delta")
    p.add_argument("--count", type=int, default=count_default, help="number of samples N")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vexpa", description="Validated exponential analysis of uniformly sampled signals.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="sample a model to CSV, optionally with noise and outliers")
    p.add_argument("model", help="model JSON with a 'terms' list")
    _add_grid(p)
    p.add_argument("--snr", type=float, help="SNR in dB of added white circular Gaussian noise")
    p.add_argument("--seed", type=int, default=0, help="noise generator seed")
    p.add_argument("--outlier", type=_outlier, action="append", metavar="IDX:RE:IM",
                   help="add RE+iIM to sample IDX; repeatable")
    p.add_argument("-o", "--output", help=f"CSV path (default ${OUTPUT_ROOT_ENV}/samples.csv)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("analyze", help="run VEXPA or the full-rate baseline on a sample CSV")
    p.add_argument("samples", help="sample CSV with header j,t,re,im")
    p.add_argument("config", nargs="?", help="VEXPA config JSON (default: built-in defaults)")
    p.add_argument("--mode", choices=["vexpa", "baseline"], default="vexpa")
    p.add_argument("--order", type=int, help="model order for --mode baseline")
    p.add_argument("--method", choices=[m.value for m in BaseMethod], default="esprit",
                   help="baseline estimator")
    p.add_argument("--workers", type=int, help="threads for the per-decimation stage")
    p.add_argument("-o", "--output", help=f"result JSON path (default ${OUTPUT_ROOT_ENV}/result.json)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("experiment", help="run a reproducible experiment protocol")
    p.add_argument("spec", nargs="?", help="experiment spec JSON; fields override the named defaults")
    p.add_argument("--name", choices=[e.value for e in ExperimentName], help="run a built-in experiment")
    p.add_argument("--seeds", type=int, help="use seeds 0..SEEDS-1")
    p.add_argument("--workers", type=int, help="threads for the seed sweep")
    p.add_argument("-o", "--output", help=f"report directory (default ${OUTPUT_ROOT_ENV}/<name>)")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("crlb", help="Cramer-Rao bounds of a model on a sampling grid")
    p.add_argument("model")
    _add_grid(p)
    p.add_argument("--snr", type=float, required=True, help="SNR in dB")
    p.add_argument("--allow-pinv", action="store_true", help="pseudo-invert a singular Fisher matrix")
    p.add_argument("-o", "--output", help="JSON path (default: stdout)")
    p.set_defaults(func=cmd_crlb)

    p = sub.add_parser("disposedness", help="conditioning bounds of the u-undersampled pencil")
    p.add_argument("model")
    _add_grid(p)
    p.add_argument("-u", type=int, default=1, help="undersampling factor")
    p.add_argument("-o", "--output", help="JSON path (default: stdout)")
    p.set_defaults(func=cmd_disposedness)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"vexpa: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (VexpaError, ValueError, OSError, jsonschema.ValidationError) as exc:
        log.debug("analysis failed", exc_info=True)
        print(f"vexpa: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
