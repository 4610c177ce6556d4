"""Simulation pipelines: condition planning, selection, chunked execution.

Everything here is deterministic for a given master seed. Replicates get
their own counter-based streams keyed by a condition id and the
replicate index, work is split into fixed-size chunks whose boundaries
do not depend on the worker count, and chunk results are folded in
chunk order. Running with --jobs 8 therefore produces the same CSV as
--jobs 1.

The selection protocol used by the retained-sample experiments: draw
candidate samples from the replicate's data stream until the correction
method under study flags at least one point, then analyse that
candidate. Each replicate may consume at most max_draws // reps
candidates; exceeding the budget aborts the run with the partial
results attached.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import power_table
from .distributions import (
    NORMAL,
    LOGNORMAL,
    UNIFORM,
    PopulationSpec,
    draw_from,
    sample_mean,
    sample_std,
    true_params,
)
from .methods import (
    NONE,
    MethodSpec,
    detect_and_correct,
    detection_mask,
)
from .reporting import ResultRow
from .stat_tests import (
    TTEST,
    PERMUTATION,
    DegenerateSampleError,
    TestSpec,
    run_test,
)
from .streams import RngStream

# Replicates per work item. Fixed so chunk boundaries, and with them the
# floating-point reduction order, never depend on the worker count.
CHUNK = 1024

Z95 = 1.959963984540054

RSO_PROBABILITY = "RsoProbability"
PARAM_ESTIMATION = "ParamEstimation"
TYPE1 = "Type1"
TYPE2 = "Type2"
EFFECT_ERROR = "EffectError"
PHACK = "PHack"
CONTAM_ESTIMATION = "ContamEstimation"
CONTAM_TYPE1 = "ContamType1"
CONTAM_TYPE2 = "ContamType2"
CALIBRATE = "CalibrateSampling"

EXPERIMENTS = (
    RSO_PROBABILITY,
    PARAM_ESTIMATION,
    TYPE1,
    TYPE2,
    EFFECT_ERROR,
    PHACK,
    CONTAM_ESTIMATION,
    CONTAM_TYPE1,
    CONTAM_TYPE2,
    CALIBRATE,
)

_SELECTION = frozenset({PARAM_ESTIMATION, TYPE1, TYPE2, EFFECT_ERROR})
_NEEDS_MU2 = frozenset({TYPE2, EFFECT_ERROR, CONTAM_TYPE2})
_NEEDS_INJECTION = frozenset({CONTAM_ESTIMATION, CONTAM_TYPE1, CONTAM_TYPE2})
_TWO_SAMPLE = frozenset(
    {TYPE1, TYPE2, EFFECT_ERROR, PHACK, CONTAM_TYPE1, CONTAM_TYPE2}
)
_TEST_BASED = frozenset({TYPE1, TYPE2, PHACK, CONTAM_TYPE1, CONTAM_TYPE2})

ALPHA = 0.05


class ConfigError(ValueError):
    """A run configuration that cannot be executed as given."""


class IncompleteRunError(RuntimeError):
    """Raised when a replicate exhausts its candidate-draw budget.

    Carries the rows that were completed before the failing replicate so
    callers can still write a partial CSV.
    """

    def __init__(self, condition, method, replicate, budget, rows, diagnostics):
        super().__init__(
            f"selection budget exhausted: condition {condition!r}, "
            f"method {method!r}, replicate {replicate} drew {budget} "
            f"candidates without flagging any point"
        )
        self.condition = condition
        self.method = method
        self.replicate = replicate
        self.budget = budget
        self.partial_rows = rows
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class InjectionSpec:
    """Contamination settings: how many points, and how far out.

    Outliers replace the first `count` points of the first sample with
    mu + U(lo_sigma, hi_sigma) * sigma, using the true mean and true
    standard deviation of that sample's population.
    """

    count: int = 3
    lo_sigma: float = 4.0
    hi_sigma: float = 8.0

    MAX_COUNT = 7

    def __post_init__(self):
        if not 0 <= self.count <= self.MAX_COUNT:
            raise ConfigError(
                f"injection count must be in [0, {self.MAX_COUNT}], got {self.count}"
            )
        if not self.lo_sigma < self.hi_sigma:
            raise ConfigError("injection needs lo_sigma < hi_sigma")
        if self.lo_sigma < 0:
            raise ConfigError("injection lo_sigma must be >= 0")


@dataclass(frozen=True)
class RateEstimate:
    """A proportion with its Wilson 95% interval."""

    hits: int
    trials: int
    rate: float
    ci_lo: float
    ci_hi: float

    @classmethod
    def from_counts(cls, hits: int, trials: int) -> "RateEstimate":
        if trials <= 0:
            return cls(0, 0, 0.0, 0.0, 1.0)
        p = hits / trials
        z2 = Z95 * Z95
        denom = 1.0 + z2 / trials
        centre = (p + z2 / (2.0 * trials)) / denom
        half = (
            Z95
            * math.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials))
            / denom
        )
        return cls(
            hits,
            trials,
            p,
            min(p, max(0.0, centre - half)),
            max(p, min(1.0, centre + half)),
        )


@dataclass(frozen=True)
class ErrorSummary:
    """Mean absolute error with a normal-approximation 95% interval."""

    mean: float
    ci_lo: float
    ci_hi: float
    count: int

    @classmethod
    def from_sums(cls, total: float, total_sq: float, count: int) -> "ErrorSummary":
        if count <= 0:
            return cls(0.0, 0.0, 0.0, 0)
        mean = total / count
        var = max(total_sq / count - mean * mean, 0.0)
        se = math.sqrt(var / count)
        return cls(mean, mean - Z95 * se, mean + Z95 * se, count)


_DEFAULT_CALIBRATION_COUNTS = (100, 300, 1000, 3000, 10000, 30000)


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment block: what to simulate and at which settings.

    methods and tests are taken literally; an empty methods tuple means
    "no correction" and runs only the baseline phase (the config loader
    fills in the full defaults when the keys are absent).
    """

    experiment: str
    distribution: PopulationSpec
    ns: "tuple[int, ...]"
    methods: "tuple[MethodSpec, ...]" = ()
    tests: "tuple[TestSpec, ...]" = ()
    reps: int = 10000
    power_target: "float | None" = None
    mu2: "float | None" = None
    injection: "InjectionSpec | None" = None
    master_seed: int = 0
    max_draws: int = 10**9
    name: "str | None" = None
    calibration_counts: "tuple[int, ...]" = _DEFAULT_CALIBRATION_COUNTS
    calibration_repeats: int = 100

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {self.experiment!r}; "
                f"expected one of {', '.join(EXPERIMENTS)}"
            )
        if not isinstance(self.distribution, PopulationSpec):
            raise ConfigError("distribution must be a PopulationSpec")
        if self.distribution.kind == UNIFORM:
            raise ConfigError(
                "uniform populations are only used for injected outliers, "
                "not as a source distribution"
            )
        if not self.ns:
            raise ConfigError("ns must list at least one sample size")
        for n in self.ns:
            if not isinstance(n, int) or n < 2:
                raise ConfigError(f"sample sizes must be integers >= 2, got {n!r}")
        if self.reps < 1:
            raise ConfigError("reps must be positive")
        if self.max_draws < self.reps:
            raise ConfigError("max_draws must be at least reps")
        min_n = min(self.ns)
        for m in self.methods:
            if m.min_length() > min_n:
                raise ConfigError(
                    f"method {m.label()} needs n >= {m.min_length()}, "
                    f"but ns includes {min_n}"
                )
        if self.experiment in _NEEDS_MU2:
            if self.mu2 is None and self.power_target is None:
                raise ConfigError(
                    f"{self.experiment} needs either mu2 or power_target"
                )
        if self.experiment in _NEEDS_INJECTION and self.injection is None:
            raise ConfigError(f"{self.experiment} needs an injection block")
        if self.injection is not None and self.injection.count > min_n:
            raise ConfigError(
                "injection count cannot exceed the smallest sample size"
            )
        if self.experiment in _TEST_BASED and not self.tests:
            raise ConfigError(f"{self.experiment} needs at least one test")
        if self.experiment == CALIBRATE:
            if not self.calibration_counts:
                raise ConfigError("calibration_counts must not be empty")
            for c in self.calibration_counts:
                if c < 1:
                    raise ConfigError("calibration counts must be positive")
            if self.calibration_repeats < 2:
                raise ConfigError("calibration_repeats must be at least 2")
            if len(self.tests) > 1 or (
                self.tests and self.tests[0].id != TTEST
            ):
                raise ConfigError(
                    "CalibrateSampling currently supports only the t test"
                )

    def resolved_mu2(self, n: int) -> float:
        if self.mu2 is not None:
            return self.mu2
        try:
            return power_table.lookup_mu2(
                self.distribution.kind, n, self.power_target
            )
        except KeyError as exc:
            raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class _Condition:
    """One (distribution pair, n, injection) data-generating condition.

    The id feeds the stream path, so it covers exactly the inputs that
    shape the raw data: the populations, the sample size, and the
    injection settings. Methods and tests are deliberately absent; every
    method sees the same candidate draws.
    """

    experiment: str
    dist1: PopulationSpec
    dist2: "PopulationSpec | None"
    n: int
    power_target: "float | None"
    mu2: "float | None"
    injection: "InjectionSpec | None"

    @property
    def cid(self) -> str:
        parts = [self.experiment, self.dist1.label()]
        if self.dist2 is not None:
            parts.append(self.dist2.label())
        parts.append(f"n={self.n}")
        if self.injection is not None:
            parts.append(
                f"inj={self.injection.count}"
                f"@{self.injection.lo_sigma}-{self.injection.hi_sigma}"
            )
        return "|".join(parts)


def plan_conditions(cfg: ExperimentConfig) -> "list[_Condition]":
    out = []
    for n in cfg.ns:
        mu2 = None
        dist2 = None
        if cfg.experiment in _NEEDS_MU2:
            mu2 = cfg.resolved_mu2(n)
            dist2 = replace(cfg.distribution, mu=mu2)
        elif cfg.experiment in _TWO_SAMPLE:
            dist2 = cfg.distribution
        out.append(
            _Condition(
                experiment=cfg.experiment,
                dist1=cfg.distribution,
                dist2=dist2,
                n=n,
                power_target=cfg.power_target if mu2 is not None else None,
                mu2=mu2,
                injection=cfg.injection
                if cfg.experiment in _NEEDS_INJECTION
                else None,
            )
        )
    return out


def inject_outliers(
    x: np.ndarray,
    spec: InjectionSpec,
    population: PopulationSpec,
    uniforms: np.ndarray,
) -> np.ndarray:
    """Replace the first spec.count points of x with planted outliers.

    uniforms supplies the U(0,1) variates (at least spec.count of them);
    callers draw a full block of MAX_COUNT per replicate so that the
    stream layout does not depend on the count under study.
    """
    if spec.count > len(x):
        raise ValueError("cannot inject more outliers than sample points")
    mu_t, sigma_t = true_params(population)
    out = np.array(x, dtype=np.float64, copy=True)
    if spec.count == 0:
        return out
    u = np.asarray(uniforms, dtype=np.float64)[: spec.count]
    if len(u) < spec.count:
        raise ValueError("not enough uniforms for the requested injection count")
    offsets = spec.lo_sigma + (spec.hi_sigma - spec.lo_sigma) * u
    out[: spec.count] = mu_t + offsets * sigma_t
    return out


# ---------------------------------------------------------------------------
# Replicate-level helpers (shared by the chunk workers)


def _analysis_gen(cond: _Condition, cfg, rep: int, tag: str):
    return (
        RngStream(cfg.master_seed, ())
        .derive(cond.cid, rep, "a", tag)
        .generator()
    )


def _data_gen(cond: _Condition, cfg, rep: int):
    return (
        RngStream(cfg.master_seed, ()).derive(cond.cid, rep, "d").generator()
    )


def _needs_perm(tests) -> bool:
    return any(t.id == PERMUTATION for t in tests)


def _pvals(tests, a, b, gen) -> "tuple[list[float], int]":
    """p-values per test; degenerate samples count as p = 1 (never sig)."""
    out = []
    degenerate = 0
    for ts in tests:
        if len(a) < 2 or len(b) < 2:
            out.append(1.0)
            degenerate += 1
            continue
        try:
            out.append(run_test(ts, a, b, gen).p_value)
        except DegenerateSampleError:
            out.append(1.0)
            degenerate += 1
    return out, degenerate


def _estimation_errors(x: np.ndarray, dist: PopulationSpec, divisor: str):
    mu_t, sigma_t = true_params(dist)
    mu_err = abs(sample_mean(x) - mu_t) / sigma_t
    sigma_err = abs(sample_std(x, divisor) - sigma_t) / sigma_t
    return mu_err, sigma_err


def _selection_budget(cfg: ExperimentConfig) -> int:
    return max(1, cfg.max_draws // cfg.reps)


class _BudgetExhausted(Exception):
    def __init__(self, rep):
        self.rep = rep


def _draw_selected_pair(cond, cfg, method, rep, budget):
    """Candidate pairs until the method flags a point in either sample."""
    gen = _data_gen(cond, cfg, rep)
    for attempt in range(budget):
        a = draw_from(cond.dist1, cond.n, gen)
        b = draw_from(cond.dist2, cond.n, gen)
        if detection_mask(a, method).any() or detection_mask(b, method).any():
            return a, b, attempt + 1
    raise _BudgetExhausted(rep)


def _draw_selected_single(cond, cfg, method, rep, budget):
    gen = _data_gen(cond, cfg, rep)
    for attempt in range(budget):
        a = draw_from(cond.dist1, cond.n, gen)
        if detection_mask(a, method).any():
            return a, attempt + 1
    raise _BudgetExhausted(rep)


def _first_pair(cond, cfg, rep):
    gen = _data_gen(cond, cfg, rep)
    a = draw_from(cond.dist1, cond.n, gen)
    b = draw_from(cond.dist2, cond.n, gen)
    return a, b


def _first_single(cond, cfg, rep):
    gen = _data_gen(cond, cfg, rep)
    return draw_from(cond.dist1, cond.n, gen)


def _hit(experiment: str, p: float) -> int:
    """Per-test event of interest: false positive or false negative."""
    if experiment in (TYPE2, CONTAM_TYPE2):
        return 1 if p >= ALPHA else 0
    return 1 if p < ALPHA else 0


# ---------------------------------------------------------------------------
# Chunk workers. Each returns an aggregate dict mapping small tuples to
# lists of floats that fold elementwise; "ok"/"abort" tells the reducer
# whether the chunk completed.


def _fold(acc: dict, part: dict) -> None:
    for key, vals in part.items():
        slot = acc.get(key)
        if slot is None:
            acc[key] = list(vals)
        else:
            for i, v in enumerate(vals):
                slot[i] += v


def _bump(agg: dict, key, *vals) -> None:
    slot = agg.get(key)
    if slot is None:
        agg[key] = list(vals)
    else:
        for i, v in enumerate(vals):
            slot[i] += v


def _chunk_selection_method(cfg, cond, method, start, stop):
    """Type1/Type2/EffectError/ParamEstimation, one method, one chunk."""
    agg: dict = {}
    budget = _selection_budget(cfg)
    single = cfg.experiment == PARAM_ESTIMATION
    perm = _needs_perm(cfg.tests)
    for rep in range(start, stop):
        try:
            if single:
                a, used = _draw_selected_single(cond, cfg, method, rep, budget)
            else:
                a, b, used = _draw_selected_pair(cond, cfg, method, rep, budget)
        except _BudgetExhausted as exc:
            return "abort", exc.rep, agg
        _bump(agg, ("draws",), used)
        if single:
            out_a = detect_and_correct(a, method)
            mu_b, sg_b = _estimation_errors(a, cond.dist1, method.std_divisor)
            _bump(agg, ("err", "before", "mu_error"), mu_b, mu_b * mu_b, 1)
            _bump(agg, ("err", "before", "sigma_error"), sg_b, sg_b * sg_b, 1)
            if len(out_a.corrected) >= 2:
                mu_a, sg_a = _estimation_errors(
                    out_a.corrected, cond.dist1, method.std_divisor
                )
                _bump(agg, ("err", "after", "mu_error"), mu_a, mu_a * mu_a, 1)
                _bump(agg, ("err", "after", "sigma_error"), sg_a, sg_a * sg_a, 1)
            else:
                _bump(agg, ("short",), 1)
            continue
        gen_a = (
            _analysis_gen(cond, cfg, rep, method.label()) if perm else None
        )
        ps_before, deg_b = _pvals(cfg.tests, a, b, gen_a)
        ca = detect_and_correct(a, method).corrected
        cb = detect_and_correct(b, method).corrected
        ps_after, deg_a = _pvals(cfg.tests, ca, cb, gen_a)
        if deg_b or deg_a:
            _bump(agg, ("degenerate",), deg_b + deg_a)
        if cfg.experiment == EFFECT_ERROR:
            mu1, _ = true_params(cond.dist1)
            mu2, _ = true_params(cond.dist2)
            true_diff = mu1 - mu2
            scale = abs(true_diff)
            err_b = abs(true_diff - (sample_mean(a) - sample_mean(b))) / scale * 100.0
            _bump(agg, ("err", "before", "effect_error_pct"), err_b, err_b * err_b, 1)
            if len(ca) >= 1 and len(cb) >= 1:
                err_a = (
                    abs(true_diff - (sample_mean(ca) - sample_mean(cb)))
                    / scale
                    * 100.0
                )
                _bump(
                    agg, ("err", "after", "effect_error_pct"), err_a, err_a * err_a, 1
                )
            else:
                _bump(agg, ("short",), 1)
        else:
            for ti in range(len(cfg.tests)):
                _bump(
                    agg,
                    ("rate", "before", ti),
                    _hit(cfg.experiment, ps_before[ti]),
                )
                _bump(
                    agg,
                    ("rate", "after", ti),
                    _hit(cfg.experiment, ps_after[ti]),
                )
    return "ok", None, agg


def _chunk_baseline(cfg, cond, start, stop):
    """First-candidate rows: the no-selection, no-correction reference."""
    agg: dict = {}
    single = cfg.experiment == PARAM_ESTIMATION
    perm = _needs_perm(cfg.tests)
    for rep in range(start, stop):
        if single:
            a = _first_single(cond, cfg, rep)
            mu_e, sg_e = _estimation_errors(a, cond.dist1, "n-1")
            _bump(agg, ("err", "baseline", "mu_error"), mu_e, mu_e * mu_e, 1)
            _bump(agg, ("err", "baseline", "sigma_error"), sg_e, sg_e * sg_e, 1)
            continue
        a, b = _first_pair(cond, cfg, rep)
        if cfg.experiment == EFFECT_ERROR:
            mu1, _ = true_params(cond.dist1)
            mu2, _ = true_params(cond.dist2)
            true_diff = mu1 - mu2
            err = (
                abs(true_diff - (sample_mean(a) - sample_mean(b)))
                / abs(true_diff)
                * 100.0
            )
            _bump(agg, ("err", "baseline", "effect_error_pct"), err, err * err, 1)
            continue
        gen_a = _analysis_gen(cond, cfg, rep, "none") if perm else None
        ps, deg = _pvals(cfg.tests, a, b, gen_a)
        if deg:
            _bump(agg, ("degenerate",), deg)
        for ti in range(len(cfg.tests)):
            _bump(agg, ("rate", "baseline", ti), _hit(cfg.experiment, ps[ti]))
    return "ok", None, agg


def _chunk_rso(cfg, cond, start, stop):
    """Per-method probability that a fresh sample has a flagged point."""
    agg: dict = {}
    for rep in range(start, stop):
        a = _first_single(cond, cfg, rep)
        for mi, method in enumerate(cfg.methods):
            if detection_mask(a, method).any():
                _bump(agg, ("rso", mi), 1)
    return "ok", None, agg


def _chunk_phack(cfg, cond, start, stop):
    """Battery false positives: raw or any corrected analysis significant."""
    agg: dict = {}
    perm = _needs_perm(cfg.tests)
    for rep in range(start, stop):
        a, b = _first_pair(cond, cfg, rep)
        gen_a = _analysis_gen(cond, cfg, rep, "battery") if perm else None
        corrected = [
            (detect_and_correct(a, m).corrected, detect_and_correct(b, m).corrected)
            for m in cfg.methods
        ]
        for ti, ts in enumerate(cfg.tests):
            ps, deg = _pvals((ts,), a, b, gen_a)
            sig = ps[0] < ALPHA
            for ca, cb in corrected:
                if sig:
                    break
                cps, cdeg = _pvals((ts,), ca, cb, gen_a)
                deg += cdeg
                sig = cps[0] < ALPHA
            if deg:
                _bump(agg, ("degenerate",), deg)
            if sig:
                _bump(agg, ("fp", ti), 1)
    return "ok", None, agg


def _chunk_contam_estimation(cfg, cond, start, stop):
    agg: dict = {}
    inj = cond.injection
    for rep in range(start, stop):
        gen = _data_gen(cond, cfg, rep)
        a0 = draw_from(cond.dist1, cond.n, gen)
        u = gen.random(InjectionSpec.MAX_COUNT)
        for count in range(inj.count + 1):
            spec_c = replace(inj, count=count)
            a = inject_outliers(a0, spec_c, cond.dist1, u)
            mu_b, sg_b = _estimation_errors(a, cond.dist1, "n-1")
            _bump(agg, ("err", "before", "mu_error", count), mu_b, mu_b * mu_b, 1)
            _bump(agg, ("err", "before", "sigma_error", count), sg_b, sg_b * sg_b, 1)
            for mi, method in enumerate(cfg.methods):
                out = detect_and_correct(a, method)
                if len(out.corrected) < 2:
                    _bump(agg, ("short",), 1)
                    continue
                mu_a, sg_a = _estimation_errors(
                    out.corrected, cond.dist1, method.std_divisor
                )
                _bump(
                    agg, ("err", "after", "mu_error", count, mi), mu_a, mu_a * mu_a, 1
                )
                _bump(
                    agg,
                    ("err", "after", "sigma_error", count, mi),
                    sg_a,
                    sg_a * sg_a,
                    1,
                )
    return "ok", None, agg


def _chunk_contam_test(cfg, cond, start, stop):
    """ContamType1/ContamType2: the first sample carries the outliers."""
    agg: dict = {}
    inj = cond.injection
    perm = _needs_perm(cfg.tests)
    for rep in range(start, stop):
        gen = _data_gen(cond, cfg, rep)
        a0 = draw_from(cond.dist1, cond.n, gen)
        b = draw_from(cond.dist2, cond.n, gen)
        u = gen.random(InjectionSpec.MAX_COUNT)
        gen_a = _analysis_gen(cond, cfg, rep, "contam") if perm else None
        for count in range(inj.count + 1):
            spec_c = replace(inj, count=count)
            a = inject_outliers(a0, spec_c, cond.dist1, u)
            ps, deg = _pvals(cfg.tests, a, b, gen_a)
            for ti in range(len(cfg.tests)):
                _bump(
                    agg,
                    ("rate", "before", ti, count),
                    _hit(cfg.experiment, ps[ti]),
                )
            for mi, method in enumerate(cfg.methods):
                ca = detect_and_correct(a, method).corrected
                cb = detect_and_correct(b, method).corrected
                cps, cdeg = _pvals(cfg.tests, ca, cb, gen_a)
                deg += cdeg
                for ti in range(len(cfg.tests)):
                    _bump(
                        agg,
                        ("rate", "after", ti, count, mi),
                        _hit(cfg.experiment, cps[ti]),
                    )
            if deg:
                _bump(agg, ("degenerate",), deg)
    return "ok", None, agg


def _draw_block(dist: PopulationSpec, rows: int, n: int, gen) -> np.ndarray:
    if dist.kind == NORMAL:
        return dist.mu + dist.sigma * gen.standard_normal((rows, n))
    if dist.kind == LOGNORMAL:
        return np.exp(dist.mu + dist.sigma * gen.standard_normal((rows, n)))
    raise ValueError(f"no block sampler for {dist.kind!r}")


def _chunk_calibration(cfg, cond, count, start, stop):
    """One repeat per work unit: a full type-1 rate at sampling `count`."""
    from .kernels import t_p_array

    agg: dict = {}
    n = cond.n
    for r in range(start, stop):
        gen = (
            RngStream(cfg.master_seed, ())
            .derive(cond.cid, "cal", count, r)
            .generator()
        )
        a = _draw_block(cond.dist1, count, n, gen)
        b = _draw_block(cond.dist1, count, n, gen)
        ma = a.mean(axis=1)
        mb = b.mean(axis=1)
        va = a.var(axis=1, ddof=1)
        vb = b.var(axis=1, ddof=1)
        sp2 = 0.5 * (va + vb)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (ma - mb) / np.sqrt(sp2 * (2.0 / n))
        t = np.where(np.isfinite(t), t, 0.0)
        p = t_p_array(np.ascontiguousarray(t), 2 * n - 2)
        rate = float(np.mean(p < ALPHA))
        _bump(agg, ("cal", count), rate, rate * rate, 1)
    return "ok", None, agg


def _run_chunk(task):
    kind = task["kind"]
    cfg = task["cfg"]
    cond = task["cond"]
    start = task["start"]
    stop = task["stop"]
    if kind == "method":
        return _chunk_selection_method(cfg, cond, task["method"], start, stop)
    if kind == "baseline":
        return _chunk_baseline(cfg, cond, start, stop)
    if kind == "rso":
        return _chunk_rso(cfg, cond, start, stop)
    if kind == "phack":
        return _chunk_phack(cfg, cond, start, stop)
    if kind == "contam_est":
        return _chunk_contam_estimation(cfg, cond, start, stop)
    if kind == "contam_test":
        return _chunk_contam_test(cfg, cond, start, stop)
    if kind == "calibration":
        return _chunk_calibration(cfg, cond, task["count"], start, stop)
    raise ValueError(f"unknown chunk kind {kind!r}")


# ---------------------------------------------------------------------------
# Pass execution and row assembly


class _PassAbort(Exception):
    def __init__(self, rep, agg):
        self.rep = rep
        self.agg = agg


def _execute_pass(task_base: dict, total: int, pool, chunk: int = CHUNK) -> dict:
    """Run one pass over `total` replicates in fixed chunks, folding in order."""
    bounds = [
        (lo, min(lo + chunk, total)) for lo in range(0, total, chunk)
    ]
    tasks = [dict(task_base, start=lo, stop=hi) for lo, hi in bounds]
    acc: dict = {}
    if pool is None:
        for task in tasks:
            status, rep, agg = _run_chunk(task)
            if status == "abort":
                _fold(acc, agg)
                raise _PassAbort(rep, acc)
            _fold(acc, agg)
        return acc
    futures = [pool.submit(_run_chunk, task) for task in tasks]
    abort = None
    for fut in futures:
        if abort is not None:
            fut.cancel()
            continue
        status, rep, agg = fut.result()
        _fold(acc, agg)
        if status == "abort":
            abort = rep
    if abort is not None:
        raise _PassAbort(abort, acc)
    return acc


@dataclass
class RunResult:
    rows: "list[ResultRow]"
    diagnostics: dict


def _row(cfg, cond, method_label, test_label, phase, metric, est, reps_val=None):
    if isinstance(est, RateEstimate):
        value, lo, hi = est.rate, est.ci_lo, est.ci_hi
        reps = est.trials
    else:
        value, lo, hi = est.mean, est.ci_lo, est.ci_hi
        reps = est.count
    return ResultRow(
        experiment=cfg.experiment,
        distribution=cond.dist1.label(),
        method=method_label,
        test=test_label,
        n=cond.n,
        power_target=cond.power_target,
        injected_count=None,
        phase=phase,
        metric=metric,
        value=value,
        ci_lo=lo,
        ci_hi=hi,
        reps=reps_val if reps_val is not None else reps,
        seed=cfg.master_seed,
    )


def _rate_from(agg, key, trials) -> RateEstimate:
    hits = int(agg.get(key, [0])[0])
    return RateEstimate.from_counts(hits, trials)


def _err_from(agg, key) -> "ErrorSummary | None":
    vals = agg.get(key)
    if vals is None:
        return None
    return ErrorSummary.from_sums(vals[0], vals[1], int(vals[2]))


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> RunResult:
    """Execute one experiment block and return its result rows.

    Raises IncompleteRunError if any replicate exhausts the candidate
    budget; rows completed before the failure ride along on the error.
    """
    conditions = plan_conditions(cfg)
    rows: "list[ResultRow]" = []
    diagnostics: dict = {"conditions": {}}
    pool = None
    try:
        if jobs > 1:
            pool = ProcessPoolExecutor(max_workers=jobs)
        for cond in conditions:
            try:
                cond_rows, cond_diag = _run_condition(cfg, cond, pool)
            except _ConditionAbort as exc:
                diagnostics["conditions"][cond.cid] = exc.diagnostics
                raise IncompleteRunError(
                    cond.cid,
                    exc.method_label,
                    exc.rep,
                    _selection_budget(cfg),
                    rows + exc.partial_rows,
                    diagnostics,
                ) from None
            rows.extend(cond_rows)
            diagnostics["conditions"][cond.cid] = cond_diag
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    return RunResult(rows, diagnostics)


class _ConditionAbort(Exception):
    def __init__(self, method_label, rep, partial_rows, diagnostics):
        self.method_label = method_label
        self.rep = rep
        self.partial_rows = partial_rows
        self.diagnostics = diagnostics


def _run_condition(cfg, cond, pool):
    exp = cfg.experiment
    base = {"cfg": cfg, "cond": cond}
    diag = {"degenerate": 0, "short": 0, "draws": 0}

    def note(agg):
        diag["degenerate"] += int(agg.get(("degenerate",), [0])[0])
        diag["short"] += int(agg.get(("short",), [0])[0])
        diag["draws"] += int(agg.get(("draws",), [0])[0])

    rows: "list[ResultRow]" = []
    if exp == RSO_PROBABILITY:
        agg = _execute_pass(dict(base, kind="rso"), cfg.reps, pool)
        note(agg)
        for mi, m in enumerate(cfg.methods):
            est = _rate_from(agg, ("rso", mi), cfg.reps)
            rows.append(
                _row(cfg, cond, m.label(), "", "baseline", "rso_probability", est)
            )
        return rows, diag

    if exp == PHACK:
        agg = _execute_pass(dict(base, kind="phack"), cfg.reps, pool)
        note(agg)
        for ti, ts in enumerate(cfg.tests):
            est = _rate_from(agg, ("fp", ti), cfg.reps)
            rows.append(
                _row(cfg, cond, "any", ts.label(), "after", "fp_any_rate", est)
            )
        return rows, diag

    if exp == CONTAM_ESTIMATION:
        agg = _execute_pass(dict(base, kind="contam_est"), cfg.reps, pool)
        note(agg)
        for count in range(cond.injection.count + 1):
            for metric in ("mu_error", "sigma_error"):
                before = _err_from(agg, ("err", "before", metric, count))
                for mi, m in enumerate(cfg.methods):
                    after = _err_from(agg, ("err", "after", metric, count, mi))
                    for phase, est in (("before", before), ("after", after)):
                        if est is None:
                            continue
                        row = _row(cfg, cond, m.label(), "", phase, metric, est)
                        rows.append(replace(row, injected_count=count))
        return rows, diag

    if exp in (CONTAM_TYPE1, CONTAM_TYPE2):
        agg = _execute_pass(dict(base, kind="contam_test"), cfg.reps, pool)
        note(agg)
        metric = "type1_rate" if exp == CONTAM_TYPE1 else "type2_rate"
        for count in range(cond.injection.count + 1):
            for ti, ts in enumerate(cfg.tests):
                before = _rate_from(agg, ("rate", "before", ti, count), cfg.reps)
                for mi, m in enumerate(cfg.methods):
                    after = _rate_from(
                        agg, ("rate", "after", ti, count, mi), cfg.reps
                    )
                    for phase, est in (("before", before), ("after", after)):
                        row = _row(
                            cfg, cond, m.label(), ts.label(), phase, metric, est
                        )
                        rows.append(replace(row, injected_count=count))
        return rows, diag

    if exp == CALIBRATE:
        for count in cfg.calibration_counts:
            agg = _execute_pass(
                dict(base, kind="calibration", count=count),
                cfg.calibration_repeats,
                pool,
                chunk=1,
            )
            vals = agg[("cal", count)]
            repeats = int(vals[2])
            mean = vals[0] / repeats
            var = max(vals[1] / repeats - mean * mean, 0.0)
            sd = math.sqrt(var * repeats / (repeats - 1))
            se_mean = sd / math.sqrt(repeats)
            # SE of a normal-sample SD: sd / sqrt(2 (R - 1))
            se_sd = sd / math.sqrt(2.0 * (repeats - 1))
            rows.append(
                _row(
                    cfg,
                    cond,
                    NONE,
                    TTEST,
                    "baseline",
                    "type1_mean",
                    ErrorSummary(
                        mean, mean - Z95 * se_mean, mean + Z95 * se_mean, repeats
                    ),
                    reps_val=count,
                )
            )
            rows.append(
                _row(
                    cfg,
                    cond,
                    NONE,
                    TTEST,
                    "baseline",
                    "type1_sd",
                    ErrorSummary(sd, sd - Z95 * se_sd, sd + Z95 * se_sd, repeats),
                    reps_val=count,
                )
            )
        return rows, diag

    # Selection-based experiments: a baseline pass shared by every
    # method, then one selection pass per method.
    base_agg = _execute_pass(dict(base, kind="baseline"), cfg.reps, pool)
    note(base_agg)
    baseline_rows: "list[ResultRow]" = []

    def emit_baseline(method_label):
        if exp == PARAM_ESTIMATION:
            for metric in ("mu_error", "sigma_error"):
                est = _err_from(base_agg, ("err", "baseline", metric))
                if est is not None:
                    baseline_rows.append(
                        _row(cfg, cond, method_label, "", "baseline", metric, est)
                    )
        elif exp == EFFECT_ERROR:
            est = _err_from(base_agg, ("err", "baseline", "effect_error_pct"))
            if est is not None:
                baseline_rows.append(
                    _row(
                        cfg,
                        cond,
                        method_label,
                        "",
                        "baseline",
                        "effect_error_pct",
                        est,
                    )
                )
        else:
            metric = "type1_rate" if exp == TYPE1 else "type2_rate"
            for ti, ts in enumerate(cfg.tests):
                est = _rate_from(base_agg, ("rate", "baseline", ti), cfg.reps)
                baseline_rows.append(
                    _row(
                        cfg, cond, method_label, ts.label(), "baseline", metric, est
                    )
                )

    if not cfg.methods:
        emit_baseline(NONE)
        rows.extend(baseline_rows)
        return rows, diag

    for method in cfg.methods:
        try:
            agg = _execute_pass(
                dict(base, kind="method", method=method), cfg.reps, pool
            )
        except _PassAbort as exc:
            note(exc.agg)
            raise _ConditionAbort(
                method.label(), exc.rep, rows + baseline_rows, diag
            ) from None
        note(agg)
        emit_baseline(method.label())
        draws = int(agg.get(("draws",), [0])[0])
        sel = RateEstimate.from_counts(cfg.reps, draws)
        rows.append(
            _row(
                cfg,
                cond,
                method.label(),
                "",
                "baseline",
                "selection_rate",
                sel,
                reps_val=cfg.reps,
            )
        )
        if exp == PARAM_ESTIMATION:
            for metric in ("mu_error", "sigma_error"):
                for phase in ("before", "after"):
                    est = _err_from(agg, ("err", phase, metric))
                    if est is not None:
                        rows.append(
                            _row(cfg, cond, method.label(), "", phase, metric, est)
                        )
        elif exp == EFFECT_ERROR:
            for phase in ("before", "after"):
                est = _err_from(agg, ("err", phase, "effect_error_pct"))
                if est is not None:
                    rows.append(
                        _row(
                            cfg,
                            cond,
                            method.label(),
                            "",
                            phase,
                            "effect_error_pct",
                            est,
                        )
                    )
        else:
            metric = "type1_rate" if exp == TYPE1 else "type2_rate"
            for ti, ts in enumerate(cfg.tests):
                for phase in ("before", "after"):
                    est = _rate_from(agg, ("rate", phase, ti), cfg.reps)
                    rows.append(
                        _row(
                            cfg,
                            cond,
                            method.label(),
                            ts.label(),
                            phase,
                            metric,
                            est,
                        )
                    )
    rows.extend(baseline_rows)
    return rows, diag


def run_all(
    configs: "list[ExperimentConfig]", jobs: int = 1
) -> RunResult:
    """Run several experiment blocks, concatenating their rows.

    On a budget failure the rows of every block completed so far are
    attached to the raised IncompleteRunError.
    """
    rows: "list[ResultRow]" = []
    diagnostics: dict = {"conditions": {}}
    for cfg in configs:
        try:
            res = run_experiment(cfg, jobs=jobs)
        except IncompleteRunError as exc:
            exc.partial_rows = rows + exc.partial_rows
            diagnostics["conditions"].update(exc.diagnostics.get("conditions", {}))
            exc.diagnostics = diagnostics
            raise
        rows.extend(res.rows)
        diagnostics["conditions"].update(res.diagnostics["conditions"])
    return RunResult(rows, diagnostics)


def verify_power(
    distribution: PopulationSpec,
    n: int,
    test: TestSpec,
    mu2: "float | None" = None,
    power_target: "float | None" = None,
    reps: int = 10000,
    master_seed: int = 0,
) -> RateEstimate:
    """Measure the plain-test rejection rate for a shifted second sample.

    This checks tabulated effect sizes: at the tabulated mu2 the
    measured power should sit near its nominal target. No selection and
    no correction is involved.
    """
    if mu2 is None:
        if power_target is None:
            raise ConfigError("verify_power needs mu2 or power_target")
        mu2 = power_table.lookup_mu2(distribution.kind, n, power_target)
    dist2 = replace(distribution, mu=mu2)
    cid = f"VerifyPower|{distribution.label()}|{dist2.label()}|n={n}|{test.label()}"
    root = RngStream(master_seed, ())
    hits = 0
    for rep in range(reps):
        gen = root.derive(cid, rep, "d").generator()
        a = draw_from(distribution, n, gen)
        b = draw_from(dist2, n, gen)
        gen_a = (
            root.derive(cid, rep, "a").generator()
            if test.id == PERMUTATION
            else None
        )
        try:
            p = run_test(test, a, b, gen_a).p_value
        except DegenerateSampleError:
            p = 1.0
        if p < ALPHA:
            hits += 1
    return RateEstimate.from_counts(hits, reps)
