"""Closed-form computation MSE, optimal receive scaling, threshold solving,
parameter search and the gain / misalignment / power analytics.

Every policy reduces, per node, to a quadratic in the receive scaling ``a``::

    E[(a * delta - 1)**2] = A * a**2 - 2 * B * a + C

with ``B = E[delta]`` and ``A = E[delta**2]``, so the optimal ``a`` is a ratio
of first and second moments of the aligned magnitude. Moments come from the
adaptive quadrature in :mod:`msaircomp.quadrature`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import optimize, stats

from .channel import FadingModel, RayleighFading
from .policies import PolicyParams
from .quadrature import integrate

__all__ = [
    "MseBreakdown",
    "PowerBreakdown",
    "MisalignmentStats",
    "Optimum",
    "solve_g_th",
    "success_prob",
    "rx_scale_selfirst",
    "rx_scale_optsel",
    "mse_selfirst",
    "mse_optsel",
    "mse_curve",
    "optimize_params",
    "avg_channel_gain",
    "misalignment_stats",
    "avg_tx_power",
    "count_distribution",
    "beta_for_power",
]

RTOL = 1e-8


@dataclass(frozen=True)
class MseBreakdown:
    mse1: float
    mse2: float
    noise: float
    total: float

    @classmethod
    def of(cls, mse1, mse2, noise):
        return cls(float(mse1), float(mse2), float(noise), math.fsum((mse1, mse2, noise)))


@dataclass(frozen=True)
class PowerBreakdown:
    """Node-averaged transmit power.

    For SelFirst ``e_above``/``e_below`` are the node averages of the power
    used after a threshold crossing and in the last-slot fallback. For OptSel
    they split the average into the channel-inversion and full-power parts.
    """

    e_above: float
    e_below: float
    avg: float


@dataclass(frozen=True)
class MisalignmentStats:
    aligned_prob: np.ndarray
    expected_count: float
    count_pmf: np.ndarray


@dataclass(frozen=True)
class Optimum:
    params: PolicyParams
    mse: MseBreakdown
    objective: float


# -- node grouping and vectorized densities ---------------------------------


def _group(profiles: Sequence[FadingModel]):
    if not profiles:
        raise ValueError("at least one fading profile is required")
    index: dict = {}
    models: list = []
    counts: list = []
    for p in profiles:
        if p in index:
            counts[index[p]] += 1
        else:
            index[p] = len(models)
            models.append(p)
            counts.append(1)
    return models, np.array(counts, dtype=float)


def _gain_pdf_cdf(models, g):
    """``(pdf, cdf)`` for each model at gains ``g``; shapes ``(M, U)``."""
    g = np.asarray(g, dtype=float)
    if all(type(m) is RayleighFading for m in models):
        mean = np.array([m.mean_gain for m in models])[None, :]
        z = np.maximum(g, 0.0)[:, None] / mean
        return np.exp(-z) / mean, -np.expm1(-z)
    pdf = np.stack([m.pdf(g) for m in models], axis=1)
    cdf = np.stack([m.cdf(g) for m in models], axis=1)
    return pdf, cdf


def _gain_cdf(models, g: float) -> np.ndarray:
    return _gain_pdf_cdf(models, np.array([g]))[1][0]


def _tail_scale(models) -> float:
    return 2.0 * max(m.mean_gain for m in models)


def _mag_moments(models, p_max, uppers, n_slots):
    """``int_0^u x**m f(x) dx`` for ``m = 1, 2`` and each upper limit ``u``.

    ``f`` is the density of the full-power magnitude ``sqrt(p_max g)``, or of its
    maximum over ``n_slots`` slots when ``n_slots > 1``. Returns two arrays of
    shape ``(len(uppers), U)``. Integrates over ``t`` in ``[0, 1]`` with
    ``x = u t`` so all limits share one adaptive pass.
    """
    u = np.atleast_1d(np.asarray(uppers, dtype=float))
    n_models = len(models)

    def integrand(t):
        x = t[:, None] * u[None, :]                      # (M, G)
        pdf, cdf = _gain_pdf_cdf(models, (x * x / p_max).ravel())
        pdf = pdf.reshape(x.shape + (n_models,))
        cdf = cdf.reshape(x.shape + (n_models,))
        dens = pdf * (2.0 * x / p_max)[..., None]
        if n_slots > 1:
            dens = n_slots * dens * cdf ** (n_slots - 1)
        xs = x[..., None]
        jac = u[None, :, None]
        m1 = xs * dens * jac
        m2 = xs * xs * dens * jac
        return np.concatenate([m1, m2], axis=1).reshape(len(t), -1)

    out = integrate(integrand, 0.0, 1.0, rtol=RTOL, atol=1e-300)
    out = np.asarray(out).reshape(2 * len(u), n_models)
    return out[: len(u)], out[len(u):]


# -- thresholds ---------------------------------------------------------------


def success_prob(model: FadingModel, g_th: float, n_slots: int) -> float:
    """Probability that at least one of ``n_slots`` gains reaches ``g_th``."""
    if not g_th > 0:
        raise ValueError(f"g_th must be positive, got {g_th!r}")
    if int(n_slots) != n_slots or n_slots < 1:
        raise ValueError(f"n_slots must be a positive integer, got {n_slots!r}")
    return float(-np.expm1(n_slots * np.log(float(model.cdf(np.asarray(g_th))))))


def _avg_success(models, weights, g_th, n_slots):
    cdf = _gain_cdf(models, g_th)
    return float(np.dot(weights, 1.0 - cdf**n_slots) / weights.sum())


def solve_g_th(profiles: Sequence[FadingModel], n_slots: int, p_th: float) -> float:
    """Common gain threshold at which the node-averaged success probability
    over ``n_slots`` slots equals ``p_th``."""
    if not 0.0 < p_th < 1.0:
        raise ValueError(f"p_th must lie in (0, 1), got {p_th!r}")
    if int(n_slots) != n_slots or n_slots < 1:
        raise ValueError(f"n_slots must be a positive integer, got {n_slots!r}")
    models, weights = _group(profiles)
    if len(models) == 1 and type(models[0]) is RayleighFading:
        q = (1.0 - p_th) ** (1.0 / n_slots)
        return -models[0].mean_gain * math.log1p(-q)

    def excess(g):
        return _avg_success(models, weights, g, n_slots) - p_th

    hi = max(m.mean_gain for m in models)
    while excess(hi) > 0:
        hi *= 2.0
    lo = hi / 2.0
    while excess(lo) < 0:
        lo /= 2.0
    return optimize.brentq(excess, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


# -- per-node quadratic coefficients ---------------------------------------


def _selfirst_coeffs(models, p_max, g_th, n_slots, alphas):
    """Per-node ``(A1, B1, C1, A2, B2, C2)`` of shape ``(G, U)`` for SelFirst.

    Suffix 1 is the above-threshold part, suffix 2 the last-slot fallback.
    """
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    f0 = _gain_cdf(models, g_th)[None, :]                # F_alpha(alpha_0)
    ps = -np.expm1(n_slots * np.log(f0))                 # success probability
    fa = _gain_pdf_cdf(models, alphas**2 / p_max)[1]     # F_alpha(alpha_th)
    m1, m2 = _mag_moments(models, p_max, alphas, 1)
    al = alphas[:, None]
    q = (f0 - fa) / f0
    ps = np.broadcast_to(ps, fa.shape)
    fail = 1.0 - ps
    return (
        ps * al**2, ps * al, ps,
        fail * (q * al**2 + m2 / f0), fail * (q * al + m1 / f0), fail * (q + fa / f0),
    )


def _optsel_coeffs(models, p_max, n_slots, alphas):
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    fn = _gain_pdf_cdf(models, alphas**2 / p_max)[1] ** n_slots
    m1, m2 = _mag_moments(models, p_max, alphas, n_slots)
    al = alphas[:, None]
    up = 1.0 - fn
    return up * al**2, up * al, up, m2, m1, fn


def _coeffs(models, params: PolicyParams, policy, alphas=None):
    al = params.alpha_th if alphas is None else alphas
    if policy == "selfirst":
        return _selfirst_coeffs(models, params.p_max, params.g_th, params.n_slots, al)
    if policy == "optsel":
        return _optsel_coeffs(models, params.p_max, params.n_slots, al)
    raise ValueError(f"policy must be 'selfirst' or 'optsel', got {policy!r}")


def _capped_rx_scale(second, first, n_slots, noise_var, beta):
    """Minimizer over ``a`` of ``second a**2 - 2 first a + max(N a**2, beta) noise_var``.

    The objective is convex; with ``beta = 0`` this is the plain moment ratio.
    """
    second = np.asarray(second, dtype=float)
    first = np.asarray(first, dtype=float)
    a_free = first / (second + n_slots * noise_var)
    if beta <= 0:
        return a_free
    a_signal = first / second
    a_knee = math.sqrt(beta / n_slots)
    return np.where(
        n_slots * a_free**2 >= beta,
        a_free,
        np.where(n_slots * a_signal**2 <= beta, a_signal, a_knee),
    )


def _check_ordering(params: PolicyParams):
    if params.alpha_th > params.alpha_0 * (1 + 1e-9):
        raise ValueError("alpha_th must not exceed alpha_0 = sqrt(p_max * g_th)")


def _rx_scale(profiles, params, policy):
    _check_ordering(params)
    models, w = _group(profiles)
    a1, b1, _, a2, b2, _ = _coeffs(models, params, policy)
    second = float(w @ (a1 + a2)[0])
    first = float(w @ (b1 + b2)[0])
    return float(_capped_rx_scale(second, first, params.n_slots, params.noise_var, params.beta))


def rx_scale_selfirst(profiles: Sequence[FadingModel], params: PolicyParams) -> float:
    """Optimal receive scaling for SelFirst at ``params.alpha_th``.

    Honors the ``params.beta`` floor on the noise term; ``params.rx_scale`` is
    ignored.
    """
    return _rx_scale(profiles, params, "selfirst")


def rx_scale_optsel(profiles: Sequence[FadingModel], params: PolicyParams) -> float:
    """Optimal receive scaling when each node picks its best slot."""
    return _rx_scale(profiles, params, "optsel")


def _breakdown(models, w, coeffs, a, alpha_th, n_slots, noise_var):
    a1, b1, c1, a2, b2, c2 = (np.asarray(c)[0] for c in coeffs)
    # c1 is the aligned mass; factor it to keep MSE1 exact near a * alpha_th = 1
    mse1 = float(w @ (c1 * (a * alpha_th - 1.0) ** 2))
    mse2 = float(w @ np.maximum(a2 * a * a - 2.0 * b2 * a + c2, 0.0))
    return MseBreakdown.of(mse1, mse2, n_slots * a * a * noise_var)


def mse_selfirst(profiles: Sequence[FadingModel], params: PolicyParams) -> MseBreakdown:
    """Expected computation MSE of SelFirst at ``params.rx_scale``."""
    _check_ordering(params)
    models, w = _group(profiles)
    co = _coeffs(models, params, "selfirst")
    return _breakdown(models, w, co, params.rx_scale, params.alpha_th, params.n_slots, params.noise_var)


def mse_optsel(profiles: Sequence[FadingModel], params: PolicyParams) -> MseBreakdown:
    _check_ordering(params)
    models, w = _group(profiles)
    co = _coeffs(models, params, "optsel")
    return _breakdown(models, w, co, params.rx_scale, params.alpha_th, params.n_slots, params.noise_var)


def _grid_eval(models, w, policy, n_slots, g_th, p_max, noise_var, beta, alphas):
    """Optimal ``a``, true MSE and capped objective at each grid ``alpha``."""
    proto = PolicyParams(n_slots, g_th, float(alphas[0]), 1.0, p_max, noise_var, beta)
    a1, b1, c1, a2, b2, c2 = _coeffs(models, proto, policy, alphas)
    second = (a1 + a2) @ w
    first = (b1 + b2) @ w
    const = (c1 + c2) @ w
    a = _capped_rx_scale(second, first, n_slots, noise_var, beta)
    signal = second * a * a - 2.0 * first * a + const
    mse = signal + n_slots * a * a * noise_var
    objective = signal + np.maximum(n_slots * a * a, beta) * noise_var
    return a, mse, objective


def mse_curve(profiles, policy, n_slots, g_th, p_max, noise_var, alphas, beta=0.0):
    """Optimal ``a`` and closed-form MSE along a sweep of ``alpha_th`` values."""
    models, w = _group(profiles)
    a, mse, _ = _grid_eval(models, w, policy, n_slots, g_th, p_max, noise_var, beta,
                           np.asarray(alphas, dtype=float))
    return a, mse


def _grid(lo, hi, step):
    n = int(math.floor(hi / step + 1e-9))
    pts = np.round(step * np.arange(1, n + 1), 12)
    pts = pts[(pts >= lo - 1e-12) & (pts <= hi + 1e-12)]
    if hi - (pts[-1] if len(pts) else 0.0) > 1e-12:
        pts = np.append(pts, hi)
    return pts


def optimize_params(
    profiles: Sequence[FadingModel],
    n_candidates: Iterable[int],
    p_th: float,
    p_max: float = 10.0,
    noise_var: float = 1.0,
    beta: float = 0.0,
    policy: str = "selfirst",
    alpha_step: float = 0.05,
    refine_step: float = 0.005,
) -> Optimum:
    """Grid search over ``(N, alpha_th)`` with the optimal ``a`` at every cell.

    For each ``N`` the threshold comes from :func:`solve_g_th`; ``alpha_th``
    ranges over ``(0, alpha_0]`` on a coarse grid refined once around the coarse
    minimum. ``beta`` only shapes the search objective: the returned MSE
    always carries the true noise term.
    """
    if policy not in ("selfirst", "optsel"):
        raise ValueError(f"policy must be 'selfirst' or 'optsel', got {policy!r}")
    candidates = sorted({int(n) for n in n_candidates})
    if not candidates or candidates[0] < 1:
        raise ValueError("at least one positive number of slots is required")
    models, w = _group(profiles)
    best = None
    for n in candidates:
        g_th = solve_g_th(profiles, n, p_th)
        alpha_0 = math.sqrt(p_max * g_th)
        coarse = _grid(0.0, alpha_0, alpha_step)
        if len(coarse) == 0:
            continue
        _, _, obj = _grid_eval(models, w, policy, n, g_th, p_max, noise_var, beta, coarse)
        centre = coarse[int(np.argmin(obj))]
        lo = max(centre - alpha_step, refine_step)
        hi = min(centre + alpha_step, alpha_0)
        fine = np.concatenate([_grid(lo, hi, refine_step), [centre]])
        fine = np.unique(fine[(fine > 0) & (fine <= alpha_0)])
        a, _, obj = _grid_eval(models, w, policy, n, g_th, p_max, noise_var, beta, fine)
        j = int(np.argmin(obj))
        if best is None or obj[j] < best[0]:
            best = (float(obj[j]), n, g_th, float(fine[j]), float(a[j]))
    if best is None:
        raise ValueError("empty feasible grid: no alpha_th candidate in (0, alpha_0]")
    objective, n, g_th, alpha_th, a = best
    params = PolicyParams(n, g_th, alpha_th, a, p_max, noise_var, beta)
    mse = mse_selfirst(profiles, params) if policy == "selfirst" else mse_optsel(profiles, params)
    return Optimum(params, mse, objective)


# -- further analytics ------------------------------------------------------


def _gain_integral(models, fn, lo, hi):
    """``int_lo^hi fn(x, pdf, cdf) dx`` per model; ``hi`` may be ``inf``."""

    def integrand(x):
        pdf, cdf = _gain_pdf_cdf(models, x)
        return fn(x[:, None], pdf, cdf)

    if hi <= lo:
        return np.zeros(len(models))
    return np.asarray(
        integrate(integrand, lo, hi, rtol=RTOL, atol=1e-300, scale=_tail_scale(models))
    )


def avg_channel_gain(profiles: Sequence[FadingModel], params: PolicyParams, policy: str) -> float:
    """Mean gain of the slot each node transmits in."""
    models, w = _group(profiles)
    n = params.n_slots
    if policy == "aircomp":
        per_node = np.array([m.mean_gain for m in models])
    elif policy == "selfirst":
        f0 = _gain_cdf(models, params.g_th)
        ps = 1.0 - f0**n
        below = _gain_integral(models, lambda x, p, c: x * p, 0.0, params.g_th)
        above = _gain_integral(models, lambda x, p, c: x * p, params.g_th, math.inf)
        per_node = ps * above / (1.0 - f0) + (1.0 - ps) * below / f0
    elif policy == "optsel":
        per_node = _gain_integral(
            models, lambda x, p, c: x * n * p * c ** (n - 1), 0.0, math.inf
        )
    else:
        raise ValueError(f"unknown policy {policy!r}")
    return float(w @ per_node / w.sum())


def count_distribution(misaligned_prob: Sequence[float]) -> np.ndarray:
    """Distribution of the number of misaligned nodes, independent nodes."""
    p = np.asarray(misaligned_prob, dtype=float)
    k = len(p)
    if k and np.all(p == p[0]):
        return stats.binom.pmf(np.arange(k + 1), k, p[0])
    pmf = np.zeros(k + 1)
    pmf[0] = 1.0
    for j, pj in enumerate(p):
        pmf[1 : j + 2] = pmf[1 : j + 2] * (1.0 - pj) + pmf[: j + 1] * pj
        pmf[0] *= 1.0 - pj
    return pmf


def misalignment_stats(
    profiles: Sequence[FadingModel], params: PolicyParams, policy: str
) -> MisalignmentStats:
    """Per-node alignment probability and the misaligned-count distribution."""
    g0 = params.g_0
    if g0 > params.g_th * (1 + 1e-9):
        raise ValueError(f"g_0={g0} exceeds g_th={params.g_th}")
    models, _ = _group(profiles)
    n = params.n_slots
    index = {m: i for i, m in enumerate(models)}
    f_th = _gain_cdf(models, params.g_th)
    f_0 = _gain_cdf(models, g0)
    if policy == "selfirst":
        ps = 1.0 - f_th**n
        per_model = ps + (1.0 - ps) * (f_th - f_0) / f_th
    elif policy == "optsel":
        per_model = 1.0 - f_0**n
    else:
        raise ValueError(f"policy must be 'selfirst' or 'optsel', got {policy!r}")
    aligned = np.array([per_model[index[p]] for p in profiles])
    return MisalignmentStats(aligned, float(np.sum(1.0 - aligned)), count_distribution(1.0 - aligned))


def avg_tx_power(profiles: Sequence[FadingModel], params: PolicyParams, policy: str) -> PowerBreakdown:
    """Mean transmit power ``b**2`` per node."""
    models, w = _group(profiles)
    n, p_max, alpha2 = params.n_slots, params.p_max, params.alpha_th**2
    g_th, g0 = params.g_th, params.g_0
    if g0 > g_th * (1 + 1e-9):
        raise ValueError(f"g_0={g0} exceeds g_th={g_th}")
    g0 = min(g0, g_th)
    wn = w / w.sum()
    if policy == "selfirst":
        f_th = _gain_cdf(models, g_th)
        f_0 = _gain_cdf(models, g0)
        ps = 1.0 - f_th**n
        inv = lambda x, p, c: alpha2 * p / x
        e1 = _gain_integral(models, inv, g_th, math.inf) / (1.0 - f_th)
        e2 = (p_max * f_0 + _gain_integral(models, inv, g0, g_th)) / f_th
        return PowerBreakdown(float(wn @ e1), float(wn @ e2), float(wn @ (ps * e1 + (1.0 - ps) * e2)))
    if policy == "optsel":
        inv = _gain_integral(models, lambda x, p, c: alpha2 * n * p * c ** (n - 1) / x, g0, math.inf)
        capped = p_max * _gain_cdf(models, g0) ** n
        return PowerBreakdown(float(wn @ inv), float(wn @ capped), float(wn @ (inv + capped)))
    raise ValueError(f"policy must be 'selfirst' or 'optsel', got {policy!r}")


def beta_for_power(
    profiles: Sequence[FadingModel],
    target_power: float,
    n_candidates: Iterable[int],
    p_th: float,
    p_max: float = 10.0,
    noise_var: float = 1.0,
    beta_max: float = 10.0,
    tol: float = 1e-3,
) -> float:
    """Noise floor ``beta`` at which the optimized SelFirst average power drops
    to ``target_power``. Power is nonincreasing in ``beta``; bisection."""
    candidates = list(n_candidates)

    def power(beta):
        o = optimize_params(profiles, candidates, p_th, p_max, noise_var, beta)
        return avg_tx_power(profiles, o.params, "selfirst").avg

    lo, hi = 0.0, beta_max
    if power(lo) <= target_power:
        return lo
    if power(hi) > target_power:
        raise ValueError(f"target power {target_power} not reached for beta <= {beta_max}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if power(mid) > target_power:
            lo = mid
        else:
            hi = mid
    return hi
