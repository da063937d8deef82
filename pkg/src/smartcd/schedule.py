"""Homotopy schedules for tau and beta, and the block sampler."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels

__all__ = [
    "LIPSCHITZ",
    "CONSTRAINED",
    "Schedule",
    "Sampler",
    "next_tau_lipschitz",
    "next_tau_constrained",
    "next_beta",
    "tau_sequence",
    "build_sampler",
    "sample",
    "make_rng",
    "combination_weights",
]

LIPSCHITZ = "lipschitz"
CONSTRAINED = "constrained"
_REGIMES = (LIPSCHITZ, CONSTRAINED)

# Above this many blocks the sampler switches from inverse-CDF to an alias table.
ALIAS_THRESHOLD = 1024


def _check_tau(tau):
    if not 0.0 < tau <= 1.0:
        raise ValueError(f"tau must lie in (0, 1], got {tau}")


def next_tau_lipschitz(tau: float) -> float:
    """Unique root in ``(0, tau)`` of ``t^3 + t^2 + tau^2 t - tau^2``.

    The cubic is convex and increasing on ``[0, tau]`` with a sign change, so
    Newton started at the right end of the bracket decreases monotonically
    onto the root. Bisection takes over if a step ever leaves the bracket.
    """
    _check_tau(tau)
    return kernels.next_tau_lipschitz(float(tau))


def next_tau_constrained(tau: float) -> float:
    _check_tau(tau)
    return tau / (1.0 + tau)


def next_beta(regime: str, beta: float, tau: float) -> float:
    if regime == LIPSCHITZ:
        return beta / (1.0 + tau)
    if regime == CONSTRAINED:
        return (1.0 - tau) * beta
    raise ValueError(f"unknown regime {regime!r}")


def tau_sequence(regime: str, tau0: float, count: int, beta1: float = 1.0):
    """``(tau_0..tau_count, beta_1..beta_{count+1})`` for one regime."""
    _check_tau(tau0)
    if regime not in _REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    return kernels.schedule_sequence(0 if regime == LIPSCHITZ else 1, float(tau0),
                                     int(count), float(beta1))


@dataclass
class Schedule:
    """Current ``tau_k`` and ``beta_{k+1}`` of one run."""

    regime: str
    tau: float
    beta_next: float
    k: int = 0

    def __post_init__(self):
        if self.regime not in _REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")

    def advance(self) -> None:
        if self.regime == LIPSCHITZ:
            self.tau = next_tau_lipschitz(self.tau)
        else:
            self.tau = next_tau_constrained(self.tau)
        self.beta_next = next_beta(self.regime, self.beta_next, self.tau)
        self.k += 1


@dataclass(frozen=True)
class Sampler:
    q: np.ndarray
    cdf: np.ndarray
    alias_prob: np.ndarray | None = field(default=None, repr=False)
    alias_idx: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.q)

    @property
    def tau0(self) -> float:
        return float(self.q.min())

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """``size`` i.i.d. block indices. Deterministic given the RNG state."""
        if self.n == 1:
            return np.zeros(size, dtype=np.int64)
        if self.alias_prob is None:
            u = rng.random(size)
            idx = np.searchsorted(self.cdf, u, side="right")
            return np.minimum(idx, self.n - 1).astype(np.int64)
        u = rng.random((size, 2))
        col = np.minimum((u[:, 0] * self.n).astype(np.int64), self.n - 1)
        keep = u[:, 1] < self.alias_prob[col]
        return np.where(keep, col, self.alias_idx[col]).astype(np.int64)


def _alias_table(q):
    # Vose's construction.
    n = len(q)
    scaled = q * n
    prob = np.zeros(n)
    alias = np.zeros(n, dtype=np.int64)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        s = small.pop()
        g = large.pop()
        prob[s] = scaled[s]
        alias[s] = g
        scaled[g] = (scaled[g] + scaled[s]) - 1.0
        (small if scaled[g] < 1.0 else large).append(g)
    for i in large + small:
        prob[i] = 1.0
        alias[i] = i
    return prob, alias


def build_sampler(B0, alpha: float) -> Sampler:
    B0 = np.asarray(B0, dtype=float)
    if B0.size == 0:
        raise ValueError("need at least one block")
    if np.any(~(B0 > 0)):
        raise ValueError("block constants B0 must all be positive")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    weights = B0**alpha
    q = weights / weights.sum()
    cdf = np.cumsum(q)
    cdf /= cdf[-1]
    if len(q) > ALIAS_THRESHOLD:
        prob, alias = _alias_table(q)
        return Sampler(q, cdf, prob, alias)
    return Sampler(q, cdf)


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox stream; bit-identical across platforms."""
    return np.random.Generator(np.random.Philox(int(seed) & (2**64 - 1)))


def sample(s: Sampler, rng: np.random.Generator) -> int:
    return int(s.draw(rng, 1)[0])


def combination_weights(taus, tau0: float) -> np.ndarray:
    """Weights expressing the averaged iterate of one block as a combination
    of that block's past proximal iterates.

    Row ``k`` of the returned lower-triangular array holds ``gamma^{k,l}`` for
    ``l <= k`` given ``taus = [tau_0, ..., tau_{K-1}]``.
    """
    taus = np.asarray(taus, dtype=float)
    K = len(taus)
    gamma = np.zeros((K + 1, K + 1))
    gamma[0, 0] = 1.0
    for k in range(K):
        t = taus[k]
        gamma[k + 1, :k] = (1.0 - t) * gamma[k, :k]
        gamma[k + 1, k] = (1.0 - t) * gamma[k, k] + t - t / tau0
        gamma[k + 1, k + 1] = t / tau0
    return gamma
