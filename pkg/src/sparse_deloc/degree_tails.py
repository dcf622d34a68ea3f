"""Tail bounds for the extreme normalized degrees of G(N, d/N).

With ``d = b log N`` and ``alpha_x = deg(x) / d``:

* ``P(max alpha >= 2 - eps) <= 2 exp(-log N (b/b_* - 1 - 2 eps))``
* ``P(min alpha <= eps)     <= 2 exp(-log N (b (1 + 2 eps log eps) - 1))``

with ``b_* = 1 / (log 4 - 1)``.  The lower-tail bound rests on a chain of
Poisson estimates that is exposed term by term, together with the exact
Poisson CDF it dominates.  :func:`empirical_extremes` samples graphs and
compares the observed exceedance frequencies with both bounds.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from statsmodels.stats.proportion import proportion_confint

from .matrix_model import derive_seed, er_degrees, make_rng

EPS_MAX = 0.2


def b_star() -> float:
    return 1.0 / (math.log(4.0) - 1.0)


@dataclass(frozen=True)
class TailBoundInput:
    N: int
    b: float
    epsilon: float

    def __post_init__(self) -> None:
        if self.N < 2:
            raise ValueError("N must be at least 2")
        if self.b < 0:
            raise ValueError("b must be nonnegative")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if 1 + 2 * self.epsilon * math.log(self.epsilon) <= 0:
            raise ValueError("epsilon too large: 1 + 2 eps log eps <= 0")
        if self.d > math.sqrt(self.N):
            raise ValueError("d = b log N exceeds sqrt(N)")

    @property
    def d(self) -> float:
        return self.b * math.log(self.N)


def upper_tail_bound(inp: TailBoundInput) -> float:
    """Bound on ``P(exists x: alpha_x >= 2 - eps)``.  Not clamped to 1."""
    return 2 * math.exp(-math.log(inp.N) * (inp.b / b_star() - 1 - 2 * inp.epsilon))


def lower_tail_bound(inp: TailBoundInput) -> float:
    """Bound on ``P(exists x: alpha_x <= eps)``.  Not clamped to 1."""
    e = inp.epsilon
    return 2 * math.exp(-math.log(inp.N) * (inp.b * (1 + 2 * e * math.log(e)) - 1))


def poisson_lower_tail_exact(d: float, epsilon: float) -> float:
    """``P(X <= eps d)`` for ``X ~ Poisson(d)``, summed in log space."""
    if not d > 0:
        raise ValueError("d must be positive")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    K = math.floor(epsilon * d + 1e-12)
    logd = math.log(d)
    return math.fsum(math.exp(k * logd - math.lgamma(k + 1) - d) for k in range(K + 1))


@dataclass(frozen=True)
class StirlingChain:
    exact: float
    leading_term: float  # (4/3) d^K / K! e^-d
    stirling: float  # (3/2) exp(-d + eps d (1 - log eps))
    final: float  # (3/2) exp(-b (1 + 2 eps log eps) log N)

    def monotone(self) -> bool:
        return self.exact <= self.leading_term <= self.stirling <= self.final


def stirling_chain_bound(d: float, epsilon: float, N: float, eps_max: float = EPS_MAX) -> StirlingChain:
    """The three successive upper bounds on ``P(X <= eps d)``, ``X ~ Poisson(d)``.

    Only valid for small ``eps``; anything above ``eps_max`` is rejected.
    """
    if not 0 < epsilon <= eps_max:
        raise ValueError(f"epsilon must lie in (0, {eps_max}]")
    K = math.floor(epsilon * d + 1e-12)
    lead = (4 / 3) * math.exp(K * math.log(d) - math.lgamma(K + 1) - d)
    stir = 1.5 * math.exp(-d + epsilon * d * (1 - math.log(epsilon)))
    b = d / math.log(N)
    final = 1.5 * math.exp(-b * (1 + 2 * epsilon * math.log(epsilon)) * math.log(N))
    return StirlingChain(poisson_lower_tail_exact(d, epsilon), lead, stir, final)


def wilson_interval(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    lo, hi = proportion_confint(successes, trials, alpha=1 - level, method="wilson")
    return float(lo), float(hi)


@dataclass
class ExtremesSummary:
    N: int
    b: float
    trials: int
    min_alpha: np.ndarray
    max_alpha: np.ndarray

    @property
    def d(self) -> float:
        return self.b * math.log(self.N)

    def upper_count(self, epsilon: float) -> int:
        return int(np.count_nonzero(self.max_alpha >= 2 - epsilon))

    def lower_count(self, epsilon: float) -> int:
        return int(np.count_nonzero(self.min_alpha <= epsilon))

    def rows(self, epsilons: Sequence[float], level: float = 0.95) -> list[dict]:
        """One comparison row per ``eps`` covering both tails."""
        out = []
        for e in epsilons:
            inp = TailBoundInput(self.N, self.b, e)
            cu, cl = self.upper_count(e), self.lower_count(e)
            ulo, uhi = wilson_interval(cu, self.trials, level)
            llo, lhi = wilson_interval(cl, self.trials, level)
            out.append({
                "N": self.N,
                "b": self.b,
                "epsilon": e,
                "bound_upper": upper_tail_bound(inp),
                "bound_lower": lower_tail_bound(inp),
                "emp_upper": cu / self.trials,
                "emp_lower": cl / self.trials,
                "ci_lo": llo,
                "ci_hi": lhi,
                "ci_upper_lo": ulo,
                "ci_upper_hi": uhi,
                "trials": self.trials,
            })
        return out


def empirical_extremes(N: int, b: float, trials: int, seed: int = 0) -> ExtremesSummary:
    """Per-trial min and max normalized degree of independent G(N, d/N) samples."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    d = b * math.log(N)
    if d > math.sqrt(N):
        raise ValueError("d = b log N exceeds sqrt(N)")
    mins = np.empty(trials)
    maxs = np.empty(trials)
    for t in range(trials):
        if d == 0:
            mins[t] = maxs[t] = 0.0
            continue
        rng = make_rng(derive_seed(seed, 0xDE, t), 0xE5)
        deg = er_degrees(N, d / N, rng)
        mins[t] = deg.min() / d
        maxs[t] = deg.max() / d
    return ExtremesSummary(N=N, b=b, trials=trials, min_alpha=mins, max_alpha=maxs)


TAIL_COLUMNS = ["N", "b", "epsilon", "bound_upper", "bound_lower", "emp_upper", "emp_lower", "ci_lo", "ci_hi", "trials"]


def write_tail_csv(path, rows: Sequence[dict]) -> None:
    """``ci_lo``/``ci_hi`` are the Wilson 95% limits of the lower-tail frequency;
    the upper-tail limits go in the trailing ``ci_upper_lo``/``ci_upper_hi``."""
    cols = TAIL_COLUMNS + ["ci_upper_lo", "ci_upper_hi"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([str(r[c]) if c in ("N", "trials") else format(float(r[c]), ".17g") for c in cols])
