"""
Experiment orchestration.

Deterministic studies (``UnStudy``, ``VarRateStudy``, ``BiasStudy``) use only
exact kernel moments. Stochastic studies (``McStudy``, ``LocalStudy``)
synthesize one path per (n, replicate); the Cholesky factor for each n is
shared read-only by the workers, results are collected in replicate order,
so every report is a pure function of the configuration.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Sequence

import numpy as np

from . import kernel
from .errors import ConfigError, MbmError
from .estim import LocalEstimateConfig, get_filter, hmin_estimate, local_estimate, lambda_table
from .formats import table_csv
from .hurst import Family, HurstFunction, make_constant, parse_hurst_spec
from .synth import cached_factor, sample_path

__all__ = [
    "Study",
    "ExperimentConfig",
    "ReplicateFailure",
    "UnStudyReport",
    "EstimateReport",
    "LocalReport",
    "BiasReport",
    "VarRateReport",
    "default_workers",
    "run_un_study",
    "run_mc_study",
    "run_local_study",
    "run_bias_study",
    "run_var_rate_study",
    "run_study",
    "write_report",
]

LN2 = math.log(2.0)
_U64 = (1 << 64) - 1


class Study(str, Enum):
    UN = "UnStudy"
    MC = "McStudy"
    VAR_RATE = "VarRateStudy"
    BIAS = "BiasStudy"
    LOCAL = "LocalStudy"

    @classmethod
    def parse(cls, name: str) -> "Study":
        key = name.strip().lower().replace("_", "-")
        aliases = {
            "un": cls.UN, "un-study": cls.UN, "unstudy": cls.UN,
            "mc": cls.MC, "mcstudy": cls.MC,
            "var-rate": cls.VAR_RATE, "var-rate-study": cls.VAR_RATE, "varratestudy": cls.VAR_RATE,
            "bias": cls.BIAS, "bias-study": cls.BIAS, "biasstudy": cls.BIAS,
            "local": cls.LOCAL, "localstudy": cls.LOCAL,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ConfigError(f"unknown study {name!r}") from None

    @property
    def stochastic(self) -> bool:
        return self in (Study.MC, Study.LOCAL)

    @property
    def slug(self) -> str:
        return {
            Study.UN: "un_study",
            Study.MC: "mc",
            Study.VAR_RATE: "var_rate_study",
            Study.BIAS: "bias_study",
            Study.LOCAL: "local_study",
        }[self]


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a study's output.

    Worker count is deliberately absent: it must not change any result.
    """

    hurst: str
    n_list: tuple[int, ...]
    study: Study
    replicates: int = 1
    seed: int = 0
    options: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.study, Study):
            object.__setattr__(self, "study", Study.parse(str(self.study)))
        try:
            n_list = tuple(int(n) for n in self.n_list)
        except (TypeError, ValueError):
            raise ConfigError(f"n_list must be a list of integers, got {self.n_list!r}") from None
        if not n_list:
            raise ConfigError("n_list is empty")
        if any(int(a) != a for a in self.n_list):
            raise ConfigError(f"n_list must hold integers, got {self.n_list!r}")
        if any(n < 2 for n in n_list):
            raise ConfigError(f"every n must be >= 2, got {n_list}")
        if any(b <= a for a, b in zip(n_list, n_list[1:])):
            raise ConfigError(f"n_list must be strictly increasing, got {n_list}")
        object.__setattr__(self, "n_list", n_list)
        if int(self.replicates) != self.replicates or self.replicates < 1:
            raise ConfigError(f"replicates must be a positive integer, got {self.replicates!r}")
        object.__setattr__(self, "replicates", int(self.replicates))
        if int(self.seed) != self.seed or not (0 <= self.seed <= _U64):
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "options", dict(self.options or {}))
        # fail early on a bad spec; HurstSpecError names the key
        parse_hurst_spec(self.hurst)

    @property
    def hurst_function(self) -> HurstFunction:
        return parse_hurst_spec(self.hurst)

    def to_dict(self) -> dict:
        return {
            "hurst": self.hurst,
            "n_list": list(self.n_list),
            "replicates": self.replicates,
            "seed": self.seed,
            "study": self.study.value,
            "options": dict(sorted(self.options.items())),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentConfig":
        known = {"hurst", "n_list", "replicates", "seed", "study", "options"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(extra))}")
        missing = [k for k in ("hurst", "n_list", "study") if k not in d]
        if missing:
            raise ConfigError(f"missing config keys: {', '.join(missing)}")
        return cls(
            hurst=str(d["hurst"]),
            n_list=tuple(d["n_list"]),
            study=Study.parse(str(d["study"])),
            replicates=d.get("replicates", 1),
            seed=d.get("seed", 0),
            options=d.get("options") or {},
        )

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    @classmethod
    def from_report_header(cls, path) -> "ExperimentConfig":
        """Recover the configuration echoed in a report CSV's comment header."""
        for line in Path(path).read_text().splitlines():
            if line.startswith("# config="):
                return cls.from_json(line[len("# config="):])
        raise ConfigError(f"{path}: no config header")


class ReplicateFailure(MbmError):
    def __init__(self, n: int, replicate: int, cause: BaseException):
        super().__init__(f"replicate {replicate} at n={n} failed: {type(cause).__name__}: {cause}")
        self.n = n
        self.replicate = replicate
        self.cause = cause


def default_workers() -> int:
    env = os.environ.get("MBM_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ConfigError(f"MBM_THREADS must be a positive integer, got {env!r}") from None
        if value < 1:
            raise ConfigError(f"MBM_THREADS must be a positive integer, got {env!r}")
        return value
    return os.cpu_count() or 1


def _map_replicates(fn: Callable[[int], Any], n: int, count: int, workers: Optional[int]) -> list:
    def guarded(r):
        try:
            return fn(r)
        except Exception as exc:  # noqa: BLE001 - re-raised with the replicate index
            raise ReplicateFailure(n, r, exc) from exc

    workers = workers or default_workers()
    if workers <= 1 or count <= 1:
        return [guarded(r) for r in range(count)]
    with ThreadPoolExecutor(max_workers=min(workers, count)) as pool:
        # map yields in submission order, i.e. sorted by replicate index
        return list(pool.map(guarded, range(count)))


@dataclass(frozen=True)
class Summary:
    mean: float
    sd: Optional[float]
    se: Optional[float]


def _summarize(xs: Sequence[float]) -> Summary:
    m = len(xs)
    mean = math.fsum(xs) / m
    if m < 2:
        return Summary(mean, None, None)
    var = math.fsum((x - mean) ** 2 for x in xs) / (m - 1)
    sd = math.sqrt(var)
    return Summary(mean, sd, sd / math.sqrt(m))


class _Report:
    """Shared persistence: named CSV tables plus a JSON summary."""

    config: ExperimentConfig

    def tables(self) -> dict[str, tuple[Sequence[str], list[dict]]]:
        raise NotImplementedError

    def headline(self) -> dict:
        return {}

    def summary(self) -> dict:
        return {
            "study": self.config.study.value,
            "config": self.config.to_dict(),
            "headline": self.headline(),
        }


@dataclass
class UnStudyReport(_Report):
    config: ExperimentConfig
    rows: list[kernel.MomentReport]

    FIELDS = kernel.MomentReport.CSV_FIELDS + ("error",)

    def tables(self):
        rows = [dict(r.as_row(), error=r.error) for r in self.rows]
        return {"moments": (self.FIELDS, rows)}

    def headline(self):
        errs = [r.error for r in self.rows]
        return {
            "final_error": errs[-1],
            "error_decreasing": all(b < a for a, b in zip(errs, errs[1:])),
        }


def run_un_study(cfg: ExperimentConfig, workers: Optional[int] = None) -> UnStudyReport:
    """Exact moments and the expectation ratio for every n; no randomness."""
    f = cfg.hurst_function
    variance = bool(cfg.options.get("variance", True))
    rows = [kernel.moment_report(f, n, variance=variance, workers=workers) for n in cfg.n_list]
    return UnStudyReport(cfg, rows)


@dataclass
class EstimateReport(_Report):
    config: ExperimentConfig
    rows: list[dict]
    detail: list[dict]

    FIELDS = ("n", "replicates", "mean_hmin", "sd_hmin", "se_hmin", "mean_hmin_clamped",
              "u_ratio", "target_hmin", "hmin_true", "allowance")
    DETAIL_FIELDS = ("replicate", "n", "S_n", "hmin_raw", "hmin_clamped")

    def tables(self):
        return {"summary": (self.FIELDS, self.rows), "replicates": (self.DETAIL_FIELDS, self.detail)}

    def headline(self):
        return {str(r["n"]): {"mean_hmin": r["mean_hmin"], "se_hmin": r["se_hmin"],
                              "target_hmin": r["target_hmin"]} for r in self.rows}


def second_order_allowance(m: kernel.MomentReport) -> float:
    """Second-order gap between E[-ln S_n]/(2 ln 2) and -ln(U_n)/(2 ln 2).

    Expanding ln V_k around E[V_k] gives E[ln V_k] = ln E[V_k] - cv_k^2/2 +
    O(cv^3), so the gap is |cv_1^2 - cv_2^2| / (4 ln 2), bounded here by
    (cv_1^2 + cv_2^2) / (4 ln 2) with cv_k^2 = var(V_k) / E[V_k]^2.
    """
    cv1 = m.var1 / m.ev1**2
    cv2 = m.var2 / m.ev2**2
    return (cv1 + cv2) / (4.0 * LN2)


def run_mc_study(cfg: ExperimentConfig, workers: Optional[int] = None) -> EstimateReport:
    """Monte Carlo distribution of the global estimate at each n."""
    f = cfg.hurst_function
    want_allowance = bool(cfg.options.get("allowance", False))
    rows, detail = [], []
    for n in cfg.n_list:
        cached_factor(f, n)

        def one(r, n=n):
            return r, hmin_estimate(sample_path(f, n, cfg.seed, r))

        results = sorted(_map_replicates(one, n, cfg.replicates, workers), key=lambda x: x[0])
        raw = [e.raw for _, e in results]
        stats = _summarize(raw)
        clamped = _summarize([e.clamped for _, e in results])
        u = kernel.u_ratio(f, n)
        allowance = None
        if want_allowance:
            allowance = second_order_allowance(kernel.moment_report(f, n, workers=workers))
        rows.append({
            "n": n,
            "replicates": cfg.replicates,
            "mean_hmin": stats.mean,
            "sd_hmin": stats.sd,
            "se_hmin": stats.se,
            "mean_hmin_clamped": clamped.mean,
            "u_ratio": u,
            "target_hmin": -math.log(u) / (2.0 * LN2),
            "hmin_true": f.h_min,
            "allowance": allowance,
        })
        detail.extend(
            {"replicate": r, "n": n, "S_n": e.ratio, "hmin_raw": e.raw, "hmin_clamped": e.clamped}
            for r, e in results
        )
    return EstimateReport(cfg, rows, detail)


@dataclass
class LocalReport(_Report):
    config: ExperimentConfig
    rows: list[dict]
    detail: list[dict]

    FIELDS = ("n", "replicates", "t", "alpha", "mean_h_hat", "sd_h_hat", "se_h_hat",
              "h_true", "window_count", "flagged_count")
    DETAIL_FIELDS = ("replicate", "n", "t", "alpha", "window_count", "h_hat", "flagged")

    def tables(self):
        return {"summary": (self.FIELDS, self.rows), "replicates": (self.DETAIL_FIELDS, self.detail)}

    def headline(self):
        return {str(r["n"]): {"mean_h_hat": r["mean_h_hat"], "h_true": r["h_true"]} for r in self.rows}


def _local_config(cfg: ExperimentConfig) -> LocalEstimateConfig:
    opts = cfg.options
    if "t" not in opts or "alpha" not in opts:
        raise ConfigError("LocalStudy needs options t and alpha")
    return LocalEstimateConfig(float(opts["t"]), float(opts["alpha"]),
                               get_filter(str(opts.get("filter", "a2"))))


def run_local_study(cfg: ExperimentConfig, workers: Optional[int] = None) -> LocalReport:
    """Monte Carlo distribution of the local ratio-type estimate of h(t)."""
    f = cfg.hurst_function
    lcfg = _local_config(cfg)
    table = lambda_table(lcfg.filter)
    rows, detail = [], []
    for n in cfg.n_list:
        cached_factor(f, n)

        def one(r, n=n):
            return r, local_estimate(sample_path(f, n, cfg.seed, r), lcfg, table)

        results = sorted(_map_replicates(one, n, cfg.replicates, workers), key=lambda x: x[0])
        stats = _summarize([e.h_hat for _, e in results])
        rows.append({
            "n": n,
            "replicates": cfg.replicates,
            "t": lcfg.t,
            "alpha": lcfg.alpha,
            "mean_h_hat": stats.mean,
            "sd_h_hat": stats.sd,
            "se_h_hat": stats.se,
            "h_true": f(lcfg.t),
            "window_count": results[0][1].window_count,
            "flagged_count": sum(e.flagged for _, e in results),
        })
        detail.extend(
            {"replicate": r, "n": n, "t": lcfg.t, "alpha": lcfg.alpha,
             "window_count": e.window_count, "h_hat": e.h_hat, "flagged": e.flagged}
            for r, e in results
        )
    return LocalReport(cfg, rows, detail)


@dataclass
class BiasReport(_Report):
    config: ExperimentConfig
    rows: list[dict]
    beta: float
    r2: float

    FIELDS = ("n", "u_ratio", "hmin_target", "error", "fitted", "bias_hmin", "noise_sd_bound")

    def tables(self):
        return {"bias": (self.FIELDS, self.rows)}

    def headline(self):
        errs = [r["error"] for r in self.rows]
        return {
            "beta": self.beta,
            "r2": self.r2,
            "error_decreasing": all(b < a for a, b in zip(errs, errs[1:])),
        }


def fit_inverse_log(ns: Sequence[int], errors: Sequence[float]) -> tuple[float, float]:
    """Least squares e ~ beta / ln n through the origin; returns (beta, R^2).

    R^2 is the centered coefficient 1 - SS_res / sum (e - mean e)^2.
    """
    x = 1.0 / np.log(np.asarray(ns, dtype=float))
    e = np.asarray(errors, dtype=float)
    beta = float(np.dot(x, e) / np.dot(x, x))
    ss_res = float(np.sum((e - beta * x) ** 2))
    ss_tot = float(np.sum((e - e.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else float("nan")
    return beta, r2


def run_bias_study(cfg: ExperimentConfig, workers: Optional[int] = None) -> BiasReport:
    """Exact bias |U_n - 2^{-2 h_min}| for an isolated minimum, fitted by beta / ln n.

    With option ``noise`` the O(n^2) variances are also computed and a bound
    (cv1 + cv2) / (2 ln 2) on the standard deviation of the estimate is
    reported next to the bias on the same scale; no verdict is drawn.
    """
    f = cfg.hurst_function
    if f.family is not Family.CUSP:
        raise ConfigError(f"bias study needs a cusp family (isolated minimum), got {f.family.value}")
    if len(cfg.n_list) < 5:
        raise ConfigError(f"bias study needs at least 5 resolutions, got {len(cfg.n_list)}")
    noise = bool(cfg.options.get("noise", False))
    rows = []
    for n in cfg.n_list:
        m = kernel.moment_report(f, n, variance=noise, workers=workers)
        bound = None
        if noise:
            bound = (math.sqrt(m.var1) / m.ev1 + math.sqrt(m.var2) / m.ev2) / (2.0 * LN2)
        rows.append({
            "n": n,
            "u_ratio": m.u_ratio,
            "hmin_target": m.hmin_target,
            "error": m.error,
            "bias_hmin": abs(-math.log(m.u_ratio) / (2.0 * LN2) - f.h_min),
            "noise_sd_bound": bound,
        })
    beta, r2 = fit_inverse_log([r["n"] for r in rows], [r["error"] for r in rows])
    for r in rows:
        r["fitted"] = beta / math.log(r["n"])
    return BiasReport(cfg, rows, beta, r2)


@dataclass
class VarRateReport(_Report):
    config: ExperimentConfig
    rows: list[dict]
    detail: list[dict]

    FIELDS = ("H", "k", "slope", "expected_slope", "flagged")
    DETAIL_FIELDS = ("H", "n", "k", "variance")

    def tables(self):
        return {"slopes": (self.FIELDS, self.rows), "variances": (self.DETAIL_FIELDS, self.detail)}

    def headline(self):
        return {repr(r["H"]): {"slope": r["slope"], "expected_slope": r["expected_slope"]}
                for r in self.rows}


def expected_variance_slope(H: float) -> Optional[float]:
    """Log-log slope of var(V) in n: 1 - 4H below 3/4, -2 above, None at 3/4."""
    if H < 0.75:
        return 1.0 - 4.0 * H
    if H > 0.75:
        return -2.0
    return None


def run_var_rate_study(cfg: ExperimentConfig, workers: Optional[int] = None) -> VarRateReport:
    """Regress log var(V(B;k)^n) on log n for constant Hurst functions.

    ``options.H_list`` overrides the single H of the hurst spec;
    ``options.k`` selects the lag (default 1).
    """
    f = cfg.hurst_function
    if f.family is not Family.CONSTANT:
        raise ConfigError(f"variance-rate study needs constant families, got {f.family.value}")
    if len(cfg.n_list) < 2:
        raise ConfigError("variance-rate study needs at least 2 resolutions")
    k = int(cfg.options.get("k", 1))
    hs = [float(h) for h in cfg.options.get("H_list", [f.h_min])]
    rows, detail = [], []
    for H in hs:
        g = make_constant(H)
        var = [kernel.qv_variance(g, n, k, workers) for n in cfg.n_list]
        slope = float(np.polyfit(np.log(cfg.n_list), np.log(var), 1)[0])
        expected = expected_variance_slope(H)
        rows.append({"H": H, "k": k, "slope": slope, "expected_slope": expected,
                     "flagged": expected is None})
        detail.extend({"H": H, "n": n, "k": k, "variance": v} for n, v in zip(cfg.n_list, var))
    return VarRateReport(cfg, rows, detail)


_RUNNERS = {
    Study.UN: run_un_study,
    Study.MC: run_mc_study,
    Study.LOCAL: run_local_study,
    Study.BIAS: run_bias_study,
    Study.VAR_RATE: run_var_rate_study,
}


def run_study(cfg: ExperimentConfig, workers: Optional[int] = None) -> _Report:
    return _RUNNERS[cfg.study](cfg, workers)


def write_report(report: _Report, out_dir) -> list[Path]:
    """Write ``<study>_<table>.csv`` files and ``<study>_summary.json``.

    Every CSV starts with a ``# config=<json>`` comment line.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    slug = report.config.study.slug
    header = [f"config={report.config.to_json()}"]
    written = []
    for name, (fields, rows) in report.tables().items():
        p = out / f"{slug}_{name}.csv"
        p.write_text(table_csv(fields, rows, header))
        written.append(p)
    p = out / f"{slug}_summary.json"
    p.write_text(json.dumps(report.summary(), indent=2, sort_keys=True, default=_json_default) + "\n")
    written.append(p)
    return written


def _json_default(obj):
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, Enum):
        return obj.value
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")
