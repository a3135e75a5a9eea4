"""Channel-gain distributions, their order statistics and truncations, and
seeded sampling of fading realizations.

Gains are power gains on a linear scale; ``h = sqrt(g)`` is the channel
coefficient magnitude.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "FadingModel",
    "RayleighFading",
    "GainMatrix",
    "DegenerateCutError",
    "gain_pdf",
    "gain_cdf",
    "alpha_pdf",
    "alpha_cdf",
    "order_stat_max_pdf",
    "order_stat_max_cdf",
    "truncated_pdf",
    "truncated_cdf",
    "sample_gains",
    "block_rng",
    "sample_gain_block",
]

Density = Callable[[np.ndarray], np.ndarray]


class DegenerateCutError(ValueError):
    """A truncation point carries no probability mass on one side."""


class FadingModel(abc.ABC):
    """Distribution of one node's per-slot channel power gain."""

    mean_gain: float

    @abc.abstractmethod
    def pdf(self, x): ...

    @abc.abstractmethod
    def cdf(self, x): ...

    @abc.abstractmethod
    def sample(self, rng: np.random.Generator, size) -> np.ndarray: ...


@dataclass(frozen=True)
class RayleighFading(FadingModel):
    """Rayleigh fading: the power gain is exponential with mean ``mean_gain``."""

    mean_gain: float

    def __post_init__(self):
        g = self.mean_gain
        if not (isinstance(g, (int, float, np.floating)) and math.isfinite(g) and g > 0):
            raise ValueError(f"mean_gain must be a positive finite number, got {g!r}")
        object.__setattr__(self, "mean_gain", float(g))

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.exp(-x / self.mean_gain) / self.mean_gain
        return np.where(x >= 0, out, 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, -np.expm1(-np.maximum(x, 0.0) / self.mean_gain), 0.0)

    def sample(self, rng, size):
        draw = rng.standard_exponential(size)
        return np.maximum(draw, np.finfo(float).tiny) * self.mean_gain

    # Closed forms, used as an independent cross-check of the quadrature path.

    def magnitude_partial_moment(self, p_max: float, t: float, order: int) -> float:
        """``int_0^t x**order f_alpha(x) dx`` for ``alpha = sqrt(p_max g)``."""
        s = p_max * self.mean_gain
        tau = t * t / s
        if order == 0:
            return -math.expm1(-tau)
        if order == 1:
            return -t * math.exp(-tau) + 0.5 * math.sqrt(math.pi * s) * math.erf(t / math.sqrt(s))
        if order == 2:
            return s * (1.0 - math.exp(-tau) * (1.0 + tau))
        raise ValueError("order must be 0, 1 or 2")


def _check_x(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ValueError(f"x must be finite and nonnegative, got {x!r}")
    return arr


def _scalar(val, like):
    return float(val) if np.ndim(like) == 0 else val


def gain_pdf(model: FadingModel, x):
    x_arr = _check_x(x)
    return _scalar(model.pdf(x_arr), x)


def gain_cdf(model: FadingModel, x):
    x_arr = _check_x(x)
    return _scalar(model.cdf(x_arr), x)


def _check_pmax(p_max):
    if not (math.isfinite(p_max) and p_max > 0):
        raise ValueError(f"p_max must be positive, got {p_max!r}")


def alpha_pdf(model: FadingModel, p_max: float, x):
    """Density of the full-power magnitude ``sqrt(p_max * g)``."""
    _check_pmax(p_max)
    x_arr = _check_x(x)
    return _scalar(model.pdf(x_arr * x_arr / p_max) * 2.0 * x_arr / p_max, x)


def alpha_cdf(model: FadingModel, p_max: float, x):
    _check_pmax(p_max)
    x_arr = _check_x(x)
    return _scalar(model.cdf(x_arr * x_arr / p_max), x)


def _check_n(n):
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    return int(n)


def order_stat_max_pdf(base_pdf: Density, base_cdf: Density, n: int, x):
    """Density of the maximum of ``n`` i.i.d. draws: ``n f F**(n-1)``."""
    n = _check_n(n)
    x_arr = np.asarray(x, dtype=float)
    val = n * base_pdf(x_arr) * base_cdf(x_arr) ** (n - 1)
    return _scalar(val, x)


def order_stat_max_cdf(base_cdf: Density, n: int, x):
    n = _check_n(n)
    x_arr = np.asarray(x, dtype=float)
    return _scalar(base_cdf(x_arr) ** n, x)


def _cut_mass(base_cdf, cut):
    mass = float(base_cdf(np.asarray(cut, dtype=float)))
    if not 0.0 < mass < 1.0:
        raise DegenerateCutError(f"cut={cut!r} leaves mass {mass} below it")
    return mass


def truncated_pdf(base_pdf: Density, base_cdf: Density, cut: float, side: str, x):
    """Density conditioned on lying below or above ``cut``."""
    if side not in ("below", "above"):
        raise ValueError(f"side must be 'below' or 'above', got {side!r}")
    mass = _cut_mass(base_cdf, cut)
    x_arr = np.asarray(x, dtype=float)
    f = base_pdf(x_arr)
    if side == "below":
        val = np.where((x_arr >= 0) & (x_arr < cut), f / mass, 0.0)
    else:
        val = np.where(x_arr >= cut, f / (1.0 - mass), 0.0)
    return _scalar(val, x)


def truncated_cdf(base_cdf: Density, cut: float, side: str, x):
    if side not in ("below", "above"):
        raise ValueError(f"side must be 'below' or 'above', got {side!r}")
    mass = _cut_mass(base_cdf, cut)
    x_arr = np.asarray(x, dtype=float)
    F = base_cdf(x_arr)
    if side == "below":
        val = np.where(x_arr < cut, F / mass, 1.0)
    else:
        val = np.where(x_arr >= cut, (F - mass) / (1.0 - mass), 0.0)
    return _scalar(val, x)


@dataclass(frozen=True)
class GainMatrix:
    """One realization: ``gains[k, i]`` is node ``k``'s gain in slot ``i``."""

    gains: np.ndarray
    seed: int = field(default=0)

    def __post_init__(self):
        g = np.asarray(self.gains, dtype=float)
        if g.ndim != 2 or g.shape[1] < 1:
            raise ValueError(f"gains must be a K x N array, got shape {g.shape}")
        if not np.all(g > 0):
            raise ValueError("all gains must be strictly positive")
        g.setflags(write=False)
        object.__setattr__(self, "gains", g)

    @property
    def k_nodes(self) -> int:
        return self.gains.shape[0]

    @property
    def n_slots(self) -> int:
        return self.gains.shape[1]

    @property
    def coefficients(self) -> np.ndarray:
        return np.sqrt(self.gains)


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Independent generator for the ``block``-th stream under ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(block)])))


def sample_gain_block(
    profiles: Sequence[FadingModel], n_slots: int, n_real: int, rng: np.random.Generator
) -> np.ndarray:
    """Gains of shape ``(n_real, K, n_slots)``."""
    k = len(profiles)
    if k and all(type(p) is RayleighFading for p in profiles):
        means = np.array([p.mean_gain for p in profiles])
        draw = np.maximum(rng.standard_exponential((n_real, k, n_slots)), np.finfo(float).tiny)
        return draw * means[None, :, None]
    out = np.empty((n_real, k, n_slots))
    for j, p in enumerate(profiles):
        out[:, j, :] = p.sample(rng, (n_real, n_slots))
    return out


def sample_gains(profiles: Sequence[FadingModel], n_slots: int, seed: int) -> GainMatrix:
    if not profiles:
        raise ValueError("at least one fading profile is required")
    if int(n_slots) != n_slots or n_slots < 1:
        raise ValueError(f"n_slots must be a positive integer, got {n_slots!r}")
    rng = block_rng(seed, 0)
    gains = sample_gain_block(profiles, int(n_slots), 1, rng)[0]
    return GainMatrix(gains, seed=int(seed))
