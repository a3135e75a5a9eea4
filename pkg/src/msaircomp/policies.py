"""Transmission policies: slot selection, Tx-scaling and the single-slot
AirComp baseline.

All quantities are real and positive (phases are pre-compensated).
Scalar functions operate on one node; the ``*_batch`` variants are the
vectorized forms used by the simulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import GainMatrix

__all__ = [
    "POLICIES",
    "PolicyParams",
    "TxDecision",
    "sqrt_pmax",
    "tx_scaling",
    "clip_magnitude",
    "select_slot_selfirst",
    "select_slot_optsel",
    "selfirst_slots",
    "optsel_slots",
    "aircomp_baseline",
    "aircomp_baseline_batch",
    "aircomp_objective",
    "apply_policy",
]

POLICIES = ("aircomp", "selfirst", "optsel")

ALIGN_TOL = 1e-9


def _positive(name, value):
    if not (isinstance(value, (int, float, np.floating, np.integer)) and value > 0):
        raise ValueError(f"{name} must be positive, got {value!r}")


@dataclass(frozen=True)
class PolicyParams:
    n_slots: int
    g_th: float
    alpha_th: float
    rx_scale: float
    p_max: float = 10.0
    noise_var: float = 1.0
    beta: float = 0.0

    def __post_init__(self):
        if int(self.n_slots) != self.n_slots or self.n_slots < 1:
            raise ValueError(f"n_slots must be a positive integer, got {self.n_slots!r}")
        for name in ("g_th", "alpha_th", "rx_scale", "p_max", "noise_var"):
            _positive(name, getattr(self, name))
        if not self.beta >= 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta!r}")
        if self.alpha_th > self.alpha_0 * (1 + 1e-9):
            raise ValueError(
                f"alpha_th={self.alpha_th} exceeds alpha_0=sqrt(p_max*g_th)={self.alpha_0}"
            )

    @property
    def alpha_0(self) -> float:
        """Full-power magnitude at the threshold gain."""
        return math.sqrt(self.p_max * self.g_th)

    @property
    def g_0(self) -> float:
        """Smallest gain at which channel inversion reaches ``alpha_th``."""
        return self.alpha_th**2 / self.p_max

    @classmethod
    def for_aircomp(cls, p_max: float = 10.0, noise_var: float = 1.0, alpha_th=None, rx_scale=None):
        """Single-slot parameters; unset ``alpha_th``/``rx_scale`` are placeholders
        that the per-realization baseline optimizer replaces."""
        alpha = math.sqrt(p_max) if alpha_th is None else alpha_th
        a = 1.0 / alpha if rx_scale is None else rx_scale
        return cls(n_slots=1, g_th=math.inf, alpha_th=alpha, rx_scale=a,
                   p_max=p_max, noise_var=noise_var)


@dataclass(frozen=True)
class TxDecision:
    slot: int
    b: float
    magnitude: float
    aligned: bool

    @property
    def power(self) -> float:
        return self.b * self.b


def sqrt_pmax(p_max: float) -> float:
    """Largest float whose square does not exceed ``p_max``."""
    s = math.sqrt(p_max)
    while s * s > p_max:
        s = math.nextafter(s, 0.0)
    return s


def tx_scaling(h: float, alpha_th: float, p_max: float) -> float:
    """Channel inversion capped at full power: ``min(alpha_th / h, sqrt(p_max))``."""
    if not h > 0:
        raise ValueError(f"channel coefficient must be positive, got {h!r}")
    return min(alpha_th / h, sqrt_pmax(p_max))


def clip_magnitude(x: float, alpha_th: float) -> float:
    return x if x < alpha_th else alpha_th


def _as_gains(node_gains):
    g = np.asarray(node_gains, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise ValueError("a nonempty list of slot gains is required")
    return g


def selfirst_slots(gains: np.ndarray, g_th: float) -> np.ndarray:
    """First slot with gain >= ``g_th`` along the last axis, else the last slot."""
    hit = gains >= g_th
    first = np.argmax(hit, axis=-1)
    return np.where(hit.any(axis=-1), first, gains.shape[-1] - 1)


def optsel_slots(gains: np.ndarray) -> np.ndarray:
    # argmax returns the first maximal index: ties go to the earliest slot
    return np.argmax(gains, axis=-1)


def select_slot_selfirst(node_gains: Sequence[float], g_th: float) -> int:
    return int(selfirst_slots(_as_gains(node_gains), g_th))


def select_slot_optsel(node_gains: Sequence[float]) -> int:
    return int(optsel_slots(_as_gains(node_gains)))


def aircomp_objective(gains, alpha, rx_scale, p_max, noise_var):
    """Single-slot computation MSE for instantaneous ``gains``."""
    g = np.asarray(gains, dtype=float)
    mag = np.minimum(alpha, np.sqrt(p_max * g))
    return float(np.sum((rx_scale * mag - 1.0) ** 2) + noise_var * rx_scale**2)


def aircomp_baseline_batch(gains: np.ndarray, p_max: float, noise_var: float):
    """Exact minimizer of the single-slot MSE for each row of ``gains``.

    ``gains`` has shape ``(R, K)``. Returns ``(alpha, rx_scale, mse)`` arrays.

    For a fixed ``alpha`` the optimal receive scaling is
    ``sum(d) / (sum(d**2) + noise_var)`` with ``d = min(alpha, sqrt(p_max g))``.
    Between consecutive sorted full-power magnitudes the ``i`` weakest nodes are
    capped, and the profiled objective has a single stationary point
    ``(sum_{j<=i} d_j**2 + noise_var) / sum_{j<=i} d_j``; the global optimum is the
    best of these (clipped to their intervals) and the interval endpoints.
    """
    g = np.asarray(gains, dtype=float)
    if g.ndim != 2 or g.shape[1] < 1:
        raise ValueError("gains must have shape (R, K) with K >= 1")
    r, k = g.shape
    mags = np.sort(np.sqrt(p_max * g), axis=1)
    zeros = np.zeros((r, 1))
    c1 = np.concatenate([zeros, np.cumsum(mags, axis=1)], axis=1)
    c2 = np.concatenate([zeros, np.cumsum(mags**2, axis=1)], axis=1)

    best = np.full(r, np.inf)
    best_alpha = np.zeros(r)

    def consider(i, alpha):
        s1 = c1[:, i] + (k - i) * alpha
        s2 = c2[:, i] + (k - i) * alpha**2 + noise_var
        obj = k - s1 * s1 / s2
        better = obj < best
        best[better] = obj[better]
        best_alpha[better] = alpha[better]

    # i = number of capped nodes; alpha lies in [mags[i-1], mags[i]]
    consider(0, mags[:, 0])
    for i in range(1, k):
        lo, hi = mags[:, i - 1], mags[:, i]
        stationary = (c2[:, i] + noise_var) / c1[:, i]
        consider(i, np.clip(stationary, lo, hi))
        consider(i, hi)
    consider(k, mags[:, -1])

    s1 = np.minimum(best_alpha[:, None], mags).sum(axis=1)
    s2 = (np.minimum(best_alpha[:, None], mags) ** 2).sum(axis=1) + noise_var
    a = s1 / s2
    return best_alpha, a, np.maximum(best, 0.0)


def aircomp_baseline(gains: Sequence[float], p_max: float, noise_var: float):
    """Optimal ``(alpha, rx_scale)`` of single-slot AirComp given known gains."""
    g = np.asarray(gains, dtype=float)
    if g.ndim != 1 or g.size == 0 or np.any(g <= 0):
        raise ValueError("a nonempty list of positive gains is required")
    alpha, a, _ = aircomp_baseline_batch(g[None, :], p_max, noise_var)
    return float(alpha[0]), float(a[0])


def _decisions(selected_gains, slots, alpha_th, p_max):
    cap = sqrt_pmax(p_max)
    out = []
    for g, slot in zip(selected_gains, slots):
        h = math.sqrt(g)
        b = min(alpha_th / h, cap)
        mag = h * b
        out.append(TxDecision(int(slot), b, mag, abs(mag - alpha_th) <= ALIGN_TOL))
    return out


def apply_policy(realization: GainMatrix, params: PolicyParams, policy: str):
    """Per-node decisions for one realization.

    For ``aircomp`` only slot 0 is used and ``params.alpha_th`` is taken as
    given (see :func:`aircomp_baseline` for its optimal value).
    """
    g = realization.gains
    if policy == "selfirst":
        slots = selfirst_slots(g, params.g_th)
    elif policy == "optsel":
        slots = optsel_slots(g)
    elif policy == "aircomp":
        slots = np.zeros(g.shape[0], dtype=int)
    else:
        raise ValueError(f"unknown policy {policy!r}; expected one of {POLICIES}")
    selected = g[np.arange(g.shape[0]), slots]
    return _decisions(selected, slots, params.alpha_th, params.p_max)
