"""Analytic tables, simulation tables and the figure/table presets."""

from __future__ import annotations

import math
from dataclasses import replace
from typing import Sequence

import numpy as np

from .analysis import (
    avg_channel_gain,
    avg_tx_power,
    misalignment_stats,
    mse_curve,
    optimize_params,
    solve_g_th,
)
from .channel import FadingModel
from .policies import PolicyParams
from .report import analytic_row, empirical_row
from .scenarios import Config, OptimizerSettings, SimSettings, generate_profiles, split_config
from .simulator import SimConfig, derive_seed, run_monte_carlo

__all__ = [
    "FIGURES",
    "optimal_pair",
    "analytic_table",
    "simulation_table",
    "reproduce",
]

FIG_PTH = (0.80, 0.85, 0.90, 0.92, 0.94, 0.95, 0.96, 0.97, 0.98, 0.99)


def optimal_pair(profiles: Sequence[FadingModel], opt: OptimizerSettings, p_th: float):
    """SelFirst optimum over the slot range, and the OptSel optimum at the same
    number of slots."""
    sel = optimize_params(profiles, opt.n_slots, p_th, opt.p_max, opt.noise_var, opt.beta,
                          "selfirst", opt.alpha_step, opt.refine_step)
    best = optimize_params(profiles, [sel.params.n_slots], p_th, opt.p_max, opt.noise_var,
                           opt.beta_optsel, "optsel", opt.alpha_step, opt.refine_step)
    return sel, best


def _analytic(profiles, label, policy, p_th, optimum):
    p = optimum.params
    return analytic_row(
        label, policy, p_th, p, optimum.mse,
        avg_tx_power(profiles, p, policy).avg,
        misalignment_stats(profiles, p, policy).expected_count,
    )


def analytic_table(profiles, opt: OptimizerSettings, policies=("selfirst",)):
    rows = []
    for p_th in opt.p_th:
        sel, best = optimal_pair(profiles, opt, p_th)
        for policy in policies:
            if policy == "selfirst":
                rows.append(_analytic(profiles, "selfirst", "selfirst", p_th, sel))
            elif policy == "optsel":
                rows.append(_analytic(profiles, "optsel", "optsel", p_th, best))
    return rows


def simulation_table(profiles, opt: OptimizerSettings, sim: SimSettings, threads=1, labels=None):
    """Monte Carlo rows for every (P_th, policy). All policies at one P_th share
    a seed, so they see common channel draws where their slot counts agree."""
    rows = []
    for i, p_th in enumerate(opt.p_th):
        seed = derive_seed(sim.seed, i)
        sel, best = optimal_pair(profiles, opt, p_th)
        for policy in sim.policies:
            if policy == "selfirst":
                params = sel.params
            elif policy == "optsel":
                params = best.params
            else:
                params = PolicyParams.for_aircomp(opt.p_max, opt.noise_var)
            cfg = SimConfig(params, policy, sim.n_runs, seed)
            m = run_monte_carlo(cfg, profiles, threads)
            label = (labels or {}).get(policy, policy)
            rows.append(empirical_row(label, policy, p_th, params, m, seed))
    return rows


# -- presets ---------------------------------------------------------------------


def _fig3(profiles, opt, sim, threads):
    rows = []
    for n in range(1, 9):
        g_th = solve_g_th(profiles, n, 0.98)
        p = PolicyParams(n, g_th, math.sqrt(opt.p_max * g_th), 1.0, opt.p_max, opt.noise_var)
        rows.append({
            "n_slots": n, "g_th": g_th,
            "gain_selfirst": avg_channel_gain(profiles, p, "selfirst"),
            "gain_optsel": avg_channel_gain(profiles, p, "optsel"),
        })
    return rows, ("n_slots", "g_th", "gain_selfirst", "gain_optsel")


def _fig4(profiles, opt, sim, threads):
    rows = []
    for n in range(1, 7):
        g_th = solve_g_th(profiles, n, 0.98)
        alpha_0 = math.sqrt(opt.p_max * g_th)
        alphas = np.arange(1, int(alpha_0 / 0.05) + 1) * 0.05
        a, mse = mse_curve(profiles, "selfirst", n, g_th, opt.p_max, opt.noise_var, alphas)
        rows += [{"n_slots": n, "g_th": g_th, "alpha_th": float(al), "rx_scale": float(ai),
                  "mse_total": float(m)} for al, ai, m in zip(alphas, a, mse)]
    return rows, ("n_slots", "g_th", "alpha_th", "rx_scale", "mse_total")


def _fig5(profiles, opt, sim, threads):
    rows = []
    for n in range(1, 9):
        for policy in ("selfirst", "optsel"):
            o = optimize_params(profiles, [n], 0.98, opt.p_max, opt.noise_var, 0.0, policy,
                                opt.alpha_step, opt.refine_step)
            p = o.params
            rows.append({"n_slots": n, "policy": policy, "g_th": p.g_th, "alpha_th": p.alpha_th,
                         "rx_scale": p.rx_scale, "mse_total": o.mse.total})
    return rows, ("n_slots", "policy", "g_th", "alpha_th", "rx_scale", "mse_total")


def _fig6(profiles, opt, sim, threads):
    grid = tuple(round(0.80 + 0.01 * i, 2) for i in range(20))
    return analytic_table(profiles, replace(opt, p_th=grid, beta=0.0)), None


def _table2(profiles, opt, sim, threads):
    return analytic_table(profiles, replace(opt, beta=0.0)), None


def _fig7(profiles, opt, sim, threads):
    o = replace(opt, p_th=FIG_PTH, beta=0.0, beta_optsel=0.0)
    return simulation_table(profiles, o, replace(sim, policies=("aircomp", "selfirst", "optsel")), threads), None


def _fig9(profiles, opt, sim, threads):
    o = replace(opt, beta=0.0, beta_optsel=0.0)
    sel, best = optimal_pair(profiles, o, 0.98)
    seed = derive_seed(sim.seed, 0)
    k = len(profiles)
    rows = []
    for policy, params in (("aircomp", PolicyParams.for_aircomp(o.p_max, o.noise_var)),
                           ("selfirst", sel.params), ("optsel", best.params)):
        m = run_monte_carlo(SimConfig(params, policy, sim.n_runs, seed), profiles, threads)
        emp = np.cumsum(m.misaligned_hist) / m.n_runs
        ana = (np.cumsum(misalignment_stats(profiles, params, policy).count_pmf)
               if policy != "aircomp" else np.full(k + 1, math.nan))
        rows += [{"policy": policy, "k": j, "cum_prob_empirical": float(emp[j]),
                  "cum_prob_analytic": float(ana[j])} for j in range(k + 1)]
    return rows, ("policy", "k", "cum_prob_empirical", "cum_prob_analytic")


def _tradeoff(profiles, opt, sim, threads):
    # beta presets: 0.4 for SelFirst, 0.25 for OptSel; uncontrolled SelFirst for contrast
    plain = replace(opt, p_th=FIG_PTH, beta=0.0, beta_optsel=0.0)
    capped = replace(opt, p_th=FIG_PTH, beta=0.4, beta_optsel=0.25)
    rows = simulation_table(profiles, plain, replace(sim, policies=("selfirst",)), threads,
                            labels={"selfirst": "selfirst_beta0"})
    rows += simulation_table(profiles, capped, replace(sim, policies=("aircomp", "selfirst", "optsel")),
                             threads)
    return rows, None


FIGURES = {
    "fig3": _fig3,
    "fig4": _fig4,
    "fig5": _fig5,
    "fig6": _fig6,
    "fig7": _fig7,
    "fig8": _fig7,
    "fig9": _fig9,
    "fig10": _tradeoff,
    "fig11": _tradeoff,
    "table2": _table2,
}


def reproduce(figure_id: str, config: Config, threads: int = 1):
    """Rows and column list (``None`` means the standard report columns)."""
    if figure_id not in FIGURES:
        raise KeyError(f"unknown figure id {figure_id!r}; valid ids: {', '.join(FIGURES)}")
    if figure_id == "fig11":
        config = config.model_copy(update={"scenario": "placed"})
    scenario, sim, opt = split_config(config)
    profiles = generate_profiles(scenario)
    return FIGURES[figure_id](profiles, opt, sim, threads)
