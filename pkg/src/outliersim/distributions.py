"""Source populations and reproducible sampling.

Log-normal populations are parameterized by the (mu, sigma) of the
underlying normal; :func:`true_params` converts to observation-space
mean and STD. The uniform interval population exists only as the source
of injected contaminating values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .streams import RngStream

NORMAL = "normal"
LOGNORMAL = "lognormal"
UNIFORM = "uniform"

_KINDS = (NORMAL, LOGNORMAL, UNIFORM)


@dataclass(frozen=True)
class PopulationSpec:
    """A sampling distribution plus everything needed to draw from it."""

    kind: str
    mu: float = 0.0
    sigma: float = 1.0
    lo: float = 0.0
    hi: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.kind in (NORMAL, LOGNORMAL) and not self.sigma > 0:
            raise ValueError("sigma must be > 0")
        if self.kind == UNIFORM and not self.lo < self.hi:
            raise ValueError("uniform interval needs lo < hi")

    def label(self) -> str:
        if self.kind == UNIFORM:
            return f"Uniform({self.lo:g},{self.hi:g})"
        name = "Normal" if self.kind == NORMAL else "LogNormal"
        return f"{name}({self.mu:g},{self.sigma:g})"


def normal(mu: float = 0.0, sigma: float = 1.0) -> PopulationSpec:
    return PopulationSpec(NORMAL, mu=mu, sigma=sigma)


def lognormal(mu: float = 0.0, sigma: float = 1.0) -> PopulationSpec:
    return PopulationSpec(LOGNORMAL, mu=mu, sigma=sigma)


def uniform_interval(lo: float, hi: float) -> PopulationSpec:
    return PopulationSpec(UNIFORM, lo=lo, hi=hi)


def true_params(spec: PopulationSpec) -> tuple[float, float]:
    """Observation-space (mean, STD) of the population.

    For a log-normal with underlying (mu, sigma) these are
    exp(mu + sigma^2/2) and sqrt((exp(sigma^2) - 1) * exp(2*mu + sigma^2)).
    """
    if spec.kind == NORMAL:
        return spec.mu, spec.sigma
    if spec.kind == LOGNORMAL:
        s2 = spec.sigma * spec.sigma
        mean = math.exp(spec.mu + s2 / 2.0)
        std = math.sqrt((math.exp(s2) - 1.0) * math.exp(2.0 * spec.mu + s2))
        return mean, std
    width = spec.hi - spec.lo
    return (spec.lo + spec.hi) / 2.0, width / math.sqrt(12.0)


def draw_sample(spec: PopulationSpec, n: int, stream: RngStream) -> np.ndarray:
    """n i.i.d. values from the population, deterministic given the stream."""
    if n < 2:
        raise ValueError("sample size must be at least 2")
    return draw_from(spec, n, stream.generator())


def draw_from(spec: PopulationSpec, n: int, gen: np.random.Generator) -> np.ndarray:
    """Like :func:`draw_sample` but consuming an already materialized generator.

    The engine uses this to pull several samples from one replicate stream
    in a fixed documented order.
    """
    if spec.kind == NORMAL:
        return spec.mu + spec.sigma * gen.standard_normal(n)
    if spec.kind == LOGNORMAL:
        return np.exp(spec.mu + spec.sigma * gen.standard_normal(n))
    return spec.lo + (spec.hi - spec.lo) * gen.random(n)


def sample_mean(x: np.ndarray) -> float:
    return float(np.mean(x))


def sample_std(x: np.ndarray, divisor: str = "n-1") -> float:
    """Sample STD with the divisor named explicitly by the caller."""
    if divisor == "n-1":
        return float(np.std(x, ddof=1))
    if divisor == "n":
        return float(np.std(x, ddof=0))
    raise ValueError(f"divisor must be 'n' or 'n-1', got {divisor!r}")
