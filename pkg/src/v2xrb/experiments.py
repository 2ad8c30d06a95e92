"""Figure-reproduction runners that return plain rows; the CLI writes them."""

from __future__ import annotations

import numpy as np

from . import bandit as bd
from .config import RunConfig
from .geometry import realization_rng
from .mac import estimate_tau
from .risk import weight_distance, weight_speed
from .sim import EpisodeResult, run_episode

CURVES_HEADER = ["c", "w_v", "w_d"]
HEATMAP_HEADER = ["context_bin", "arm", "visits", "reward_sum"]
CONVERGE_HEADER = ["t", "chosen_weight", "optimal_weight", "cum_regret"]
TAU_HEADER = ["n_cs", "ar_level", "tau"]


def curves_rows(cfg: RunConfig) -> list:
    c = cfg.section("curves")
    r = cfg.section("risk")
    n = c["n_points"]
    span = c["c_max"] - c["c_min"]
    rows = []
    for i in range(n):
        x = c["c_min"] + i * span / (n - 1)
        rows.append([x, weight_speed(x, r["k_v"]), weight_distance(x, r["k_d"])])
    return rows


def heatmap_episode(cfg: RunConfig, epsilon: float) -> EpisodeResult:
    h = cfg.section("heatmap")
    ep = cfg.episode_config(epsilon=epsilon, horizon_rounds=h["horizon_rounds"],
                            contexts="sweep", env="calibrated")
    return run_episode(ep)


def heatmap_rows(table: bd.ArmTable) -> list:
    return [[b, a + 1, int(table.pulls[b, a]), float(table.reward_sum[b, a])]
            for b in range(table.n_bins) for a in range(table.n_arm)]


def ridge_hits(table: bd.ArmTable, params: bd.BanditParams, k_d: float, tol: float = 0.1):
    """Per bin: does the max-reward arm sit within ``tol`` of the analytic weight at the bin center?"""
    low, high = params.context_range
    width = (high - low) / params.n_context_bins
    hits = []
    for b in range(table.n_bins):
        arm = int(np.argmax(table.reward_sum[b])) + 1
        target = weight_distance(low + (b + 0.5) * width, k_d)
        hits.append(abs(bd.arm_weight(arm, params.n_arm) - target) <= tol)
    return hits


def converge_episode(cfg: RunConfig, epsilon: float, seed: int | None = None) -> EpisodeResult:
    c = cfg.section("converge")
    ep = cfg.episode_config(seed=seed, epsilon=epsilon, horizon_rounds=c["horizon_rounds"],
                            contexts="fixed", fixed_c_v=c["c_v"], fixed_c_d=c["c_d"])
    return run_episode(ep)


def converge_rows(result: EpisodeResult) -> list:
    curve = result.agents[0].ledgers["d"].curve()
    return [[r.t, r.w_d, r.opt_w_d, float(curve[i])] for i, r in enumerate(result.records)]


def exploit_mean_weight(result: EpisodeResult, window: int):
    """Mean distance weight over exploit rounds among the last ``window`` rounds."""
    tail = [r.w_d for r in result.records[-window:] if r.phase == bd.EXPLOIT]
    return float(np.mean(tail)) if tail else None


def converge_summary(cfg: RunConfig) -> dict:
    c = cfg.section("converge")
    window = min(1000, max(1, c["horizon_rounds"] // 10))
    out = {}
    for eps in c["epsilons"]:
        runs = [converge_episode(cfg, eps, cfg.seed + i) for i in range(c["seeds"])]
        rhos = [r.agents[0].ledgers["d"].rho for r in runs]
        out[f"{eps:g}"] = {
            "cum_regret": rhos,
            "cum_regret_mean": float(np.mean(rhos)),
            "rho_per_round_mean": float(np.mean(rhos)) / c["horizon_rounds"],
            "exploit_mean_weight": [exploit_mean_weight(r, window) for r in runs],
            "optimal_weight": runs[0].records[0].opt_w_d,
        }
    return out


def tau_estimates(cfg: RunConfig) -> dict:
    """``{(n_cs, ar_level): TauEstimate}`` over the configured grid."""
    t = cfg.section("tau")
    ep = cfg.episode_config()
    out = {}
    for i, n_cs in enumerate(t["n_cs"]):
        for j, ar in enumerate(t["ar_levels"]):
            rng = realization_rng(cfg.seed, 1000 * i + j)
            out[(int(n_cs), ar)] = estimate_tau(int(n_cs), ar, t["trials"], ep.mac, rng)
    return out


def tau_rows(cfg: RunConfig) -> list:
    return [[n_cs, ar, est.tau] for (n_cs, ar), est in tau_estimates(cfg).items()]
