"""
Command-line front end.

Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 I/O error.
Failures print a machine-parsable ``error_code=`` line on stderr followed by
a human-readable message.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import lab
from .errors import (
    ConfigError,
    DegeneratePath,
    DomainError,
    EmptyWindow,
    HurstSpecError,
    NotPositiveSemidefinite,
    OutOfRange,
    ParameterDomainError,
    PathFormatError,
)
from .estim import (
    LocalEstimateConfig,
    get_filter,
    hmin_estimate,
    lambda_of_rho,
    local_estimate,
    rho_filter,
)
from .formats import read_lambda_table, read_path_csv, table_csv, write_path_csv, write_table
from .hurst import parse_hurst_spec
from .synth import sample_path

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

ESTIMATE_FIELDS = ("replicate", "n", "S_n", "hmin_raw", "hmin_clamped")
LOCAL_FIELDS = ("replicate", "t", "alpha", "window_count", "h_hat", "flagged")
LAMBDA_FIELDS = ("H", "rho", "lambda")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _report(EXIT_USAGE, "usage", f"{self.prog}: {message}")
        sys.exit(EXIT_USAGE)


def _report(code: int, kind: str, message: str, **extra) -> None:
    tags = " ".join(f"{k}={v}" for k, v in extra.items())
    print(f"error_code={code} kind={kind}" + (f" {tags}" if tags else ""), file=sys.stderr)
    print(message, file=sys.stderr)


def _u64(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not (0 <= v < 1 << 64):
        raise argparse.ArgumentTypeError(f"must be an unsigned 64-bit integer: {text!r}")
    return v


def _n_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from None


def _grid(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"--grid must be START:STEP:END, got {text!r}")
    try:
        start, step, end = (float(p) for p in parts)
    except ValueError:
        raise UsageError(f"--grid must hold three numbers, got {text!r}") from None
    if not step > 0.0 or end < start:
        raise UsageError(f"--grid needs STEP > 0 and END >= START, got {text!r}")
    count = int(round((end - start) / step)) + 1
    H = start + step * np.arange(count)
    if not (H[0] > 0.0 and H[-1] < 1.0):
        raise UsageError(f"--grid points must lie in (0, 1), got [{float(H[0])!r}, {float(H[-1])!r}]")
    return H


def cmd_simulate(args) -> int:
    f = parse_hurst_spec(args.hurst)
    path = sample_path(f, args.n, args.seed, args.replicate)
    out = write_path_csv(path, args.out)
    print(out)
    return EXIT_OK


def cmd_estimate(args) -> int:
    path = read_path_csv(args.input)
    if args.local:
        missing = [flag for flag, v in (("--t", args.t), ("--alpha", args.alpha)) if v is None]
        if missing:
            raise UsageError(f"--local requires {', '.join(missing)}")
        cfg = LocalEstimateConfig(args.t, args.alpha, get_filter(args.filter))
        table = read_lambda_table(args.table) if args.table else None
        if table is not None and table.filter != cfg.filter:
            raise UsageError(f"--table was built for a different filter than --filter {args.filter}")
        est = local_estimate(path, cfg, table)
        row = {"replicate": path.replicate, "t": cfg.t, "alpha": cfg.alpha,
               "window_count": est.window_count, "h_hat": est.h_hat, "flagged": est.flagged}
        sys.stdout.write(table_csv(LOCAL_FIELDS, [row]))
    else:
        est = hmin_estimate(path)
        row = {"replicate": path.replicate, "n": path.n, "S_n": est.ratio,
               "hmin_raw": est.raw, "hmin_clamped": est.clamped}
        sys.stdout.write(table_csv(ESTIMATE_FIELDS, [row]))
    return EXIT_OK


def cmd_lambda_table(args) -> int:
    H = _grid(args.grid)
    a = get_filter(args.filter)
    rows = []
    for h in H:
        rho = rho_filter(float(h), a, 1)
        rows.append({"H": float(h), "rho": rho, "lambda": lambda_of_rho(rho)})
    print(write_table(args.out, LAMBDA_FIELDS, rows, [f"filter={args.filter}"]))
    return EXIT_OK


def _study_config(args, study: lab.Study) -> lab.ExperimentConfig:
    base: dict = {}
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise PathFormatError(f"cannot read config {args.config}: {exc}") from exc
        base = lab.ExperimentConfig.from_json(text).to_dict()
    options = dict(base.get("options", {}))
    if args.options:
        try:
            extra = json.loads(args.options)
        except json.JSONDecodeError as exc:
            raise UsageError(f"--options is not valid JSON: {exc}") from None
        if not isinstance(extra, dict):
            raise UsageError("--options must be a JSON object")
        options.update(extra)
    for key in ("t", "alpha", "filter"):
        if getattr(args, key, None) is not None:
            options[key] = getattr(args, key)

    merged = {
        "hurst": args.hurst if args.hurst is not None else base.get("hurst"),
        "n_list": args.n_list if args.n_list is not None else base.get("n_list"),
        "replicates": args.replicates if args.replicates is not None else base.get("replicates", 1),
        "seed": args.seed if args.seed is not None else base.get("seed", 0),
        "study": study.value,
        "options": options,
    }
    missing = [flag for flag, key in (("--hurst", "hurst"), ("--n-list", "n_list"))
               if merged[key] is None]
    if missing:
        raise UsageError(f"missing required flags: {', '.join(missing)} (or give --config)")
    return lab.ExperimentConfig.from_dict(merged)


def _run_study(args, study: lab.Study) -> int:
    if study is lab.Study.MC and getattr(args, "local", False):
        study = lab.Study.LOCAL
    cfg = _study_config(args, study)
    report = lab.run_study(cfg, workers=args.workers)
    if args.out:
        for p in lab.write_report(report, args.out):
            print(p)
    else:
        name, (fields, rows) = next(iter(report.tables().items()))
        sys.stdout.write(table_csv(fields, rows, [f"config={cfg.to_json()}"]))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="mbm", description="Multifractional Brownian motion synthesis and h_min estimation.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="draw one exact mBm path and write it as CSV")
    s.add_argument("--hurst", required=True, help="Hurst spec, e.g. const:H=0.5")
    s.add_argument("--n", required=True, type=int, help="grid resolution")
    s.add_argument("--seed", required=True, type=_u64, help="64-bit master seed")
    s.add_argument("--replicate", type=_u64, default=0, help="replicate index (default 0)")
    s.add_argument("--out", required=True, help="output CSV path")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="estimate h_min (or h(t) with --local) from a path CSV")
    e.add_argument("--in", dest="input", required=True, help="path CSV")
    e.add_argument("--local", action="store_true", help="local ratio-type estimate of h(t)")
    e.add_argument("--t", type=float, help="time point for --local")
    e.add_argument("--alpha", type=float, help="bandwidth exponent for --local")
    e.add_argument("--filter", choices=("a1", "a2"), default="a2")
    e.add_argument("--table", help="lambda-table CSV used to bracket the inversion")
    e.set_defaults(func=cmd_estimate)

    studies = (
        ("un-study", lab.Study.UN, "exact expectation-ratio convergence"),
        ("mc", lab.Study.MC, "Monte Carlo study of the global estimate"),
        ("bias-study", lab.Study.BIAS, "exact bias and 1/ln n fit for an isolated minimum"),
        ("var-rate-study", lab.Study.VAR_RATE, "log-log slopes of exact variances"),
    )
    for name, study, text in studies:
        c = sub.add_parser(name, help=text)
        c.add_argument("--config", help="JSON config file (flags override its keys)")
        c.add_argument("--hurst", help="Hurst spec")
        c.add_argument("--n-list", type=_n_list, help="comma-separated increasing resolutions")
        c.add_argument("--replicates", type=int)
        c.add_argument("--seed", type=_u64)
        c.add_argument("--options", help="JSON object of study options")
        c.add_argument("--workers", type=int, help="worker threads (default MBM_THREADS or CPU count)")
        c.add_argument("--out", help="output directory (default: main table to stdout)")
        if study is lab.Study.MC:
            c.add_argument("--local", action="store_true", help="study the local estimator instead")
            c.add_argument("--t", type=float)
            c.add_argument("--alpha", type=float)
            c.add_argument("--filter", choices=("a1", "a2"))
        c.set_defaults(func=lambda args, study=study: _run_study(args, study))

    lt = sub.add_parser("lambda-table", help="tabulate Lambda(H) for a filter")
    lt.add_argument("--filter", choices=("a1", "a2"), required=True)
    lt.add_argument("--grid", required=True, help="START:STEP:END inside (0, 1)")
    lt.add_argument("--out", required=True)
    lt.set_defaults(func=cmd_lambda_table)
    return p


_NUMERIC = (NotPositiveSemidefinite, DegeneratePath, EmptyWindow, OutOfRange, ArithmeticError)


def _dispatch_error(exc: BaseException) -> int:
    cause = exc.cause if isinstance(exc, lab.ReplicateFailure) else exc
    if isinstance(cause, HurstSpecError):
        _report(EXIT_USAGE, "hurst-spec", str(exc), key=cause.key)
        return EXIT_USAGE
    if isinstance(cause, ParameterDomainError):
        _report(EXIT_USAGE, "parameter", str(exc), key=cause.key)
        return EXIT_USAGE
    if isinstance(cause, (ConfigError, UsageError, DomainError)):
        _report(EXIT_USAGE, "usage", str(exc))
        return EXIT_USAGE
    if isinstance(cause, PathFormatError):
        _report(EXIT_IO, "io", str(exc))
        return EXIT_IO
    if isinstance(cause, _NUMERIC):
        _report(EXIT_NUMERIC, type(cause).__name__, str(exc))
        return EXIT_NUMERIC
    if isinstance(cause, OSError):
        _report(EXIT_IO, "io", str(exc))
        return EXIT_IO
    raise exc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - mapped to the exit-code contract
        return _dispatch_error(exc)


if __name__ == "__main__":
    sys.exit(main())
