"""Node-weight distributions with a mean-1 contract, plus the bias diagnostic.

Every full-perturbation family below has E(w) = 1 analytically.  The
perturbation strength is the standard deviation sigma_w.  The bias diagnostic
E(sqrt(w)) * E(1/sqrt(w)) equals the expected multiplicative distortion of
off-diagonal Laplacian entries under asymmetric perturbation; it is 1 exactly
at sigma_w = 0 and strictly greater than 1 otherwise (Jensen) for
distributions supported on (0, inf).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln

from .errors import ConfigError

__all__ = [
    "Degenerate", "NodeResampling", "Binary", "Gamma", "Mixture",
    "mixture_gamma_uniform", "mixture_lognormal_uniform", "mixture_binary_gamma",
    "WeightVector", "BiasDiagnostic", "sample_weights", "bias_diagnostic",
    "make_partial_mean_shift", "make_partial_uniform_window",
    "distribution_for_sigma", "FAMILY_NAMES",
]


@dataclass(frozen=True)
class WeightVector:
    """Realized per-node weights with provenance."""

    values: np.ndarray
    source: str
    sigma_hat: float

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class BiasDiagnostic:
    estimate: float
    std_error: float
    closed_form: float | None
    trials: int
    zero_draws_excluded: int = 0


class Degenerate:
    """Point mass at 1 (sigma_w = 0); the no-perturbation control."""

    name = "degenerate"
    may_emit_zero = False

    @property
    def sigma_w(self) -> float:
        return 0.0

    def describe(self) -> str:
        return "degenerate()"

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.ones(n)

    def sample_iid(self, count: int, rng: np.random.Generator) -> np.ndarray:
        return np.ones(count)

    def closed_form_diagnostic(self) -> float:
        return 1.0


class NodeResampling:
    """Weights from resampling n nodes with replacement, N trials.

    Node i appearing m times gets w_i = m * n / N, so sum(w) = n exactly per
    draw and sigma_w = sqrt((n - 1) / N).  Weights of 0 occur (a node never
    resampled) and act as node deletions downstream.
    """

    name = "node_resampling"
    may_emit_zero = True

    def __init__(self, sample_size: int, n: int):
        if sample_size < 1:
            raise ConfigError("node resampling needs sample size N >= 1")
        if n < 2:
            raise ConfigError("node resampling needs n >= 2")
        self.sample_size = int(sample_size)
        self.n = int(n)

    @property
    def sigma_w(self) -> float:
        return math.sqrt((self.n - 1) / self.sample_size)

    def describe(self) -> str:
        return f"node_resampling(N={self.sample_size}, n={self.n})"

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if n != self.n:
            raise ConfigError(
                f"node resampling was configured for n={self.n}, got n={n}")
        counts = rng.multinomial(self.sample_size, np.full(n, 1.0 / n))
        return counts * (n / self.sample_size)

    def sample_iid(self, count: int, rng: np.random.Generator) -> np.ndarray:
        rounds = -(-count // self.n)
        draws = [self.sample(self.n, rng) for _ in range(rounds)]
        return np.concatenate(draws)[:count]

    def closed_form_diagnostic(self) -> None:
        return None


class Binary:
    """Two-point distribution on {a, b} with P(a) = p and b = (1 - a p)/(1 - p)."""

    name = "binary"
    may_emit_zero = False

    def __init__(self, a: float, p: float):
        if not 0 < a < 1:
            raise ConfigError(f"binary weight a must be in (0, 1), got {a}")
        if not 0 < p < 1:
            raise ConfigError(f"binary probability p must be in (0, 1), got {p}")
        self.a = float(a)
        self.p = float(p)
        self.b = (1.0 - a * p) / (1.0 - p)

    @property
    def sigma_w(self) -> float:
        var = self.p * (self.a - 1) ** 2 + (1 - self.p) * (self.b - 1) ** 2
        return math.sqrt(var)

    @classmethod
    def for_sigma(cls, sigma: float) -> "Binary":
        # a = 0.5 fixed; var = 0.25 p / (1 - p) solves to p = 4 s^2/(1 + 4 s^2)
        p = 4 * sigma**2 / (1 + 4 * sigma**2)
        return cls(0.5, p)

    def describe(self) -> str:
        return f"binary(a={self.a:g}, p={self.p:g})"

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return np.where(rng.random(n) < self.p, self.a, self.b)

    sample_iid = sample

    def closed_form_diagnostic(self) -> float:
        mx = self.p * math.sqrt(self.a) + (1 - self.p) * math.sqrt(self.b)
        my = self.p / math.sqrt(self.a) + (1 - self.p) / math.sqrt(self.b)
        return mx * my


class Gamma:
    """Gamma(shape, scale=1/shape), so E(w) = 1 and sigma_w = 1/sqrt(shape)."""

    name = "gamma"
    may_emit_zero = False

    def __init__(self, shape: float):
        if shape <= 0:
            raise ConfigError(f"gamma shape must be positive, got {shape}")
        self.shape = float(shape)

    @property
    def sigma_w(self) -> float:
        return 1.0 / math.sqrt(self.shape)

    @classmethod
    def for_sigma(cls, sigma: float) -> "Gamma":
        return cls(1.0 / sigma**2)

    def describe(self) -> str:
        return f"gamma(shape={self.shape:g})"

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.gamma(self.shape, 1.0 / self.shape, size=n)

    sample_iid = sample

    def closed_form_diagnostic(self) -> float | None:
        # E(w^s) = Gamma(a + s) / (Gamma(a) a^s); 1/sqrt moment finite iff a > 1/2
        a = self.shape
        if a <= 0.5:
            return None
        return math.exp(gammaln(a + 0.5) + gammaln(a - 0.5) - 2 * gammaln(a))


class Mixture:
    """Two-component mixture: lower T- on (0, 1) w.p. p, upper T+ on (1, inf).

    The lower component is Uniform(0, 1) (mean a = 1/2) or a point mass at a.
    The upper component has mean b and variance sigma_plus^2, realized as
    1 + Gamma or 1 + Lognormal with (shape, scale) fixed by those two moments.
    b is derived from the mean-1 constraint a p + b (1 - p) = 1.
    """

    may_emit_zero = False

    def __init__(self, upper: str, sigma_plus: float, p: float,
                 lower: str = "uniform01", lower_point: float = 0.51):
        if upper not in ("gamma", "lognormal"):
            raise ConfigError(f"unknown upper mixture component {upper!r}")
        if lower not in ("uniform01", "point"):
            raise ConfigError(f"unknown lower mixture component {lower!r}")
        if not 0 < p < 1:
            raise ConfigError(f"mixture probability p must be in (0, 1), got {p}")
        if sigma_plus <= 0:
            raise ConfigError("mixture sigma_plus must be positive")
        self.upper = upper
        self.lower = lower
        self.sigma_plus = float(sigma_plus)
        self.p = float(p)
        if lower == "uniform01":
            self.a = 0.5
            self.var_minus = 1.0 / 12.0
        else:
            if not 0 < lower_point < 1:
                raise ConfigError("lower point mass must be in (0, 1)")
            self.a = float(lower_point)
            self.var_minus = 0.0
        self.b = (1.0 - self.a * self.p) / (1.0 - self.p)
        if self.b <= 1.0:
            raise ConfigError("mixture upper mean b must exceed 1")

    @property
    def name(self) -> str:
        low = "uniform" if self.lower == "uniform01" else "binary"
        return f"mixture_{self.upper}_{low}"

    @property
    def sigma_w(self) -> float:
        var = (self.p * self.var_minus + (1 - self.p) * self.sigma_plus**2
               + self.p * (1 - self.p) * (self.b - self.a) ** 2)
        return math.sqrt(var)

    @classmethod
    def for_sigma(cls, upper: str, sigma: float, lower: str = "uniform01",
                  lower_point: float = 0.51) -> "Mixture":
        """Solve (p, sigma_plus) so the total variance hits sigma^2.

        Half the variance is assigned to the upper component,
        (1 - p) sigma_plus^2 = sigma^2 / 2, and p absorbs the rest through the
        lower component plus the between-component spread.
        """
        a = 0.5 if lower == "uniform01" else lower_point
        var_minus = 1.0 / 12.0 if lower == "uniform01" else 0.0
        target = sigma**2 / 2.0

        def rest(p):
            return p * var_minus + p * (1 - a) ** 2 / (1 - p) - target

        p = brentq(rest, 1e-12, 1 - 1e-9)
        sigma_plus = math.sqrt(sigma**2 / (2 * (1 - p)))
        return cls(upper, sigma_plus, p, lower=lower, lower_point=lower_point)

    def describe(self) -> str:
        low = (f"point({self.a:g})" if self.lower == "point" else "uniform01")
        return (f"mixture(upper={self.upper}, lower={low}, "
                f"sigma_plus={self.sigma_plus:g}, p={self.p:g})")

    def _sample_upper(self, count: int, rng: np.random.Generator) -> np.ndarray:
        m = self.b - 1.0
        v = self.sigma_plus**2
        if self.upper == "gamma":
            return 1.0 + rng.gamma(m * m / v, v / m, size=count)
        s2 = math.log1p(v / (m * m))
        mu = math.log(m) - s2 / 2.0
        return 1.0 + rng.lognormal(mu, math.sqrt(s2), size=count)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        low_mask = rng.random(n) < self.p
        out = np.empty(n)
        k = int(low_mask.sum())
        if self.lower == "uniform01":
            out[low_mask] = rng.random(k)
        else:
            out[low_mask] = self.a
        out[~low_mask] = self._sample_upper(n - k, rng)
        return out

    sample_iid = sample

    def closed_form_diagnostic(self) -> None:
        return None


def mixture_gamma_uniform(sigma_plus: float, p: float) -> Mixture:
    return Mixture("gamma", sigma_plus, p, lower="uniform01")


def mixture_lognormal_uniform(sigma_plus: float, p: float) -> Mixture:
    return Mixture("lognormal", sigma_plus, p, lower="uniform01")


def mixture_binary_gamma(sigma_plus: float, p: float, lower_point: float = 0.51) -> Mixture:
    return Mixture("gamma", sigma_plus, p, lower="point", lower_point=lower_point)


FAMILY_NAMES = (
    "node_resampling", "binary", "gamma",
    "mixture_gamma_uniform", "mixture_lognormal_uniform", "mixture_binary_gamma",
)


def distribution_for_sigma(family: str, sigma: float, n: int | None = None):
    """A distribution of the named family with standard deviation sigma.

    sigma = 0 gives the degenerate all-ones distribution for every family.
    Node resampling needs the target vector length n and is exact only up to
    integer rounding of the sample size.
    """
    if sigma < 0:
        raise ConfigError("sigma_w must be nonnegative")
    if sigma == 0:
        return Degenerate()
    if family == "node_resampling":
        if n is None:
            raise ConfigError("node_resampling needs the node count n")
        return NodeResampling(max(1, round((n - 1) / sigma**2)), n)
    if family == "binary":
        return Binary.for_sigma(sigma)
    if family == "gamma":
        return Gamma.for_sigma(sigma)
    if family == "mixture_gamma_uniform":
        return Mixture.for_sigma("gamma", sigma)
    if family == "mixture_lognormal_uniform":
        return Mixture.for_sigma("lognormal", sigma)
    if family == "mixture_binary_gamma":
        return Mixture.for_sigma("gamma", sigma, lower="point")
    raise ConfigError(f"unknown weight family {family!r}")


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def sample_weights(dist, n: int, rng) -> WeightVector:
    """Draw an n-vector of node weights from dist (rng: Generator or seed)."""
    values = dist.sample(n, _as_rng(rng))
    sigma_hat = float(values.std(ddof=1)) if n > 1 else 0.0
    return WeightVector(values=values, source=dist.describe(), sigma_hat=sigma_hat)


def bias_diagnostic(dist, trials: int, rng) -> BiasDiagnostic:
    """Monte-Carlo estimate of E(sqrt(w)) * E(1/sqrt(w)) with standard error.

    Node-resampling draws of exactly 0 are excluded from the 1/sqrt(w) factor
    (they act as deletions, not weights); the count is reported.  The standard
    error uses the delta method for the product of the two sample means.
    """
    rng = _as_rng(rng)
    w = dist.sample_iid(trials, rng)
    if np.any(w < 0):
        raise ConfigError("weight distribution emitted a negative value")
    x = np.sqrt(w)
    pos = w > 0
    n_zero = int(trials - pos.sum())
    if n_zero and not dist.may_emit_zero:
        raise ConfigError(f"{dist.describe()} emitted zero weights unexpectedly")
    mx = float(x.mean())
    if n_zero == 0:
        y = 1.0 / x
        my = float(y.mean())
        cov = np.cov(np.vstack([x, y]))
        var_est = (my**2 * cov[0, 0] + mx**2 * cov[1, 1]
                   + 2 * mx * my * cov[0, 1]) / trials
    else:
        y = 1.0 / x[pos]
        my = float(y.mean())
        # disjoint averaging sets: treat the two means as independent
        var_est = (my**2 * x.var(ddof=1) / trials
                   + mx**2 * y.var(ddof=1) / max(len(y), 2))
    se = math.sqrt(max(var_est, 0.0))
    return BiasDiagnostic(estimate=mx * my, std_error=se,
                          closed_form=dist.closed_form_diagnostic(),
                          trials=trials, zero_draws_excluded=n_zero)


@dataclass(frozen=True)
class PartialWeights:
    """Weight generator for perturbing only a subset of nodes.

    Nodes in the subset draw i.i.d. from the configured law; all others keep
    weight 1.  ``mean`` is E(w) on the subset.
    """

    subset: np.ndarray
    mean: float
    kind: str
    params: tuple
    label: str = field(default="", compare=False)

    def sample(self, n: int, rng) -> np.ndarray:
        rng = _as_rng(rng)
        if self.subset.max(initial=0) >= n:
            raise ConfigError("partial perturbation subset exceeds node range")
        w = np.ones(n)
        k = len(self.subset)
        if self.kind == "gamma":
            mu, var = self.params
            if var == 0:
                w[self.subset] = mu
            else:
                w[self.subset] = rng.gamma(mu * mu / var, var / mu, size=k)
        else:  # uniform window
            lo, hi = self.params
            w[self.subset] = rng.uniform(lo, hi, size=k)
        return w

    def describe(self) -> str:
        return self.label


def make_partial_mean_shift(subset, mean: float, variance: float) -> PartialWeights:
    """Gamma(mean mu, variance v) weights on a node subset, 1 elsewhere.

    variance = 0 is accepted as the deterministic limit (all subset weights
    exactly mu).
    """
    subset = np.asarray(subset, dtype=np.int64)
    if subset.size == 0:
        raise ConfigError("partial perturbation subset is empty")
    if mean <= 0:
        raise ConfigError("partial perturbation mean must be positive")
    if variance < 0:
        raise ConfigError("partial perturbation variance must be nonnegative")
    return PartialWeights(
        subset=subset, mean=float(mean), kind="gamma",
        params=(float(mean), float(variance)),
        label=f"partial_gamma(mu={mean:g}, var={variance:g}, k={subset.size})")


def make_partial_uniform_window(subset, base: float, width: float = 0.25) -> PartialWeights:
    """Uniform(base, base + width) weights on a subset, 1 elsewhere.

    Keeps weights at least `base`, which keeps symmetric-perturbation
    affinities nonnegative whenever base >= 0.5.  E(w) on the subset is
    base + width / 2.
    """
    subset = np.asarray(subset, dtype=np.int64)
    if subset.size == 0:
        raise ConfigError("partial perturbation subset is empty")
    if base < 0 or width <= 0:
        raise ConfigError("uniform window needs base >= 0 and width > 0")
    return PartialWeights(
        subset=subset, mean=float(base + width / 2), kind="uniform",
        params=(float(base), float(base + width)),
        label=f"partial_uniform({base:g}..{base + width:g}, k={subset.size})")
