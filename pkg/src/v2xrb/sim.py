"""Per-round learning cycle: observe contexts, pick arms, derive risk and
backoff, resolve the outcome, reward, update.

Two reward environments are available. ``network`` is the literal one:
the reward is 1 unless the BSM expired in the MAC. ``calibrated`` replaces
the MAC with a Bernoulli oracle whose success probability peaks at the
analytic weight, which is what produces a learnable ridge.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import bandit as bd
from .errors import ParameterError
from .geometry import GeometryParams, Region, VehicleState, neighborhood, sample_ppp, step_mobility
from .mac import MacParams, Outcome, reward_from_outcome, run_slots
from .risk import (CONTEXT_KEYS, N_CONTEXTS, ContextVector, RiskParams, WeightVector,
                   accident_risk, backoff_from_risk, observe_context, weight_distance,
                   weight_speed)

ENV_KINDS = ("network", "calibrated")
CONTEXT_SOURCES = ("world", "fixed", "sweep")


@dataclass(frozen=True)
class CalibratedOracleParams:
    p_max: float = 0.9
    sigma_r: float = 0.1

    def __post_init__(self):
        bad = []
        if not 0 < self.p_max <= 1:
            bad.append("p_max")
        if not self.sigma_r > 0:
            bad.append("sigma_r")
        if bad:
            raise ParameterError(f"invalid oracle parameters: {bad}", bad)


@dataclass(frozen=True)
class SimParams:
    """Episode knobs that belong to no single module.

    ``contexts`` chooses where observations come from: the moving PPP
    world, a constant ``(fixed_c_v, fixed_c_d)`` pair, or a uniform sweep
    over each bandit's context range. The last two drive a single learner
    that, in network mode, contends with ``n_competitors`` uniform-backoff
    vehicles.
    """
    contexts: str = "world"
    fixed_c_v: float = 0.0
    fixed_c_d: float = 1.1
    n_competitors: int = 10
    round_s: float = 0.1

    def __post_init__(self):
        bad = []
        if self.contexts not in CONTEXT_SOURCES:
            bad.append("contexts")
        if not self.fixed_c_v >= 0:
            bad.append("fixed_c_v")
        if not self.fixed_c_d >= 0:
            bad.append("fixed_c_d")
        if not self.n_competitors >= 0:
            bad.append("n_competitors")
        if not self.round_s > 0:
            bad.append("round_s")
        if bad:
            raise ParameterError(f"invalid sim parameters: {bad}", bad)


@dataclass(frozen=True)
class EpisodeConfig:
    seed: int = 0
    env: str = "calibrated"
    region: Region = Region(1000.0, 1000.0)
    geometry: GeometryParams = GeometryParams()
    risk: RiskParams = RiskParams()
    bandit_v: bd.BanditParams = bd.BanditParams(n_context_bins=13, context_range=(0.0, 6.0))
    bandit_d: bd.BanditParams = bd.BanditParams()
    mac: MacParams = MacParams()
    oracle: CalibratedOracleParams = CalibratedOracleParams()
    sim: SimParams = SimParams()

    def __post_init__(self):
        bad = []
        if self.env not in ENV_KINDS:
            bad.append("env")
        bv, bdd = self.bandit_v, self.bandit_d
        if (bv.n_arm, bv.epsilon, bv.horizon_rounds, bv.train_rounds, bv.policy) != \
                (bdd.n_arm, bdd.epsilon, bdd.horizon_rounds, bdd.train_rounds, bdd.policy):
            bad.append("bandit")
        if bad:
            raise ParameterError(f"invalid episode configuration: {bad}", bad)

    def bandit(self, key: str) -> bd.BanditParams:
        return self.bandit_v if key == "v" else self.bandit_d

    @property
    def horizon(self) -> int:
        return self.bandit_d.horizon_rounds


@dataclass(slots=True)
class RoundRecord:
    t: int
    vehicle: int
    c_v: float
    c_d: float
    bin_v: int
    bin_d: int
    phase: str
    arm_v: int
    arm_d: int
    w_v: float
    w_d: float
    ar: float
    backoff: int
    outcome: str
    reward_v: int
    reward_d: int
    opt_w_v: float
    opt_w_d: float
    opt_reward_v: float
    opt_reward_d: float


RECORD_COLUMNS = tuple(f.name for f in fields(RoundRecord))
_INT_COLUMNS = {"t", "vehicle", "bin_v", "bin_d", "arm_v", "arm_d", "backoff",
                "reward_v", "reward_d"}
_STR_COLUMNS = {"phase", "outcome"}


def optimal_weight(context: ContextVector, risk_params: RiskParams) -> WeightVector:
    """Analytic weights for a context, i.e. what a shadow agent with a-priori knowledge plays."""
    return WeightVector(weight_speed(context.c_v, risk_params.k_v),
                        weight_distance(context.c_d, risk_params.k_d))


def success_probability(chosen_w: float, optimal_w: float, params: CalibratedOracleParams) -> float:
    diff = chosen_w - optimal_w
    return params.p_max * math.exp(-diff * diff / (2.0 * params.sigma_r ** 2))


def calibrated_reward(chosen_w: float, optimal_w: float, params: CalibratedOracleParams,
                      rng: np.random.Generator) -> int:
    return int(rng.random() < success_probability(chosen_w, optimal_w, params))


@dataclass
class VehicleAgent:
    vehicle_id: int
    tables: dict
    ledgers: dict
    rng: np.random.Generator


def make_agent(vehicle_id: int, config: EpisodeConfig) -> VehicleAgent:
    tables = {k: bd.ArmTable(config.bandit(k).n_context_bins, config.bandit(k).n_arm)
              for k in CONTEXT_KEYS}
    ledgers = {k: bd.RegretLedger() for k in CONTEXT_KEYS}
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 1, vehicle_id]))
    return VehicleAgent(vehicle_id, tables, ledgers, rng)


@dataclass
class World:
    config: EpisodeConfig
    vehicles: list
    t: int = 0
    env_rng: np.random.Generator = field(default=None, repr=False)
    ctx_rng: np.random.Generator = field(default=None, repr=False)
    mob_rng: np.random.Generator = field(default=None, repr=False)


def init_world(config: EpisodeConfig) -> tuple[World, list[VehicleAgent]]:
    def stream(tag):
        return np.random.default_rng(np.random.SeedSequence([config.seed, tag]))

    if config.sim.contexts == "world":
        geometry = config.geometry
        if geometry.rng_seed != config.seed:
            geometry = replace(geometry, rng_seed=config.seed)
        vehicles = sample_ppp(config.region, geometry)
    else:
        vehicles = [VehicleState(0, 0.0, 0.0, 0.0, config.risk.v_ref_kmh, config.risk.v_ref_kmh)]
    world = World(config, vehicles, 0, stream(2), stream(3), stream(4))
    return world, [make_agent(v.id, config) for v in vehicles]


def _observe(world: World):
    cfg = world.config
    src = cfg.sim.contexts
    if src == "fixed":
        return [ContextVector(cfg.sim.fixed_c_v, cfg.sim.fixed_c_d)], None
    if src == "sweep":
        lo_v, hi_v = cfg.bandit_v.context_range
        lo_d, hi_d = cfg.bandit_d.context_range
        c_v = float(world.ctx_rng.uniform(max(lo_v, 0.0), hi_v))
        c_d = float(world.ctx_rng.uniform(max(lo_d, 0.0), hi_d))
        return [ContextVector(c_v, c_d)], None
    d_min, adjacency = neighborhood(world.vehicles, cfg.geometry.cs_range_m)
    ctxs = [observe_context(v.speed_kmh, v.v_ref_kmh, float(d_min[i]), cfg.risk)
            for i, v in enumerate(world.vehicles)]
    return ctxs, adjacency


def _mac_outcomes(world: World, backoffs, shadow_backoffs, adjacency):
    """Transmit/expire flags for the learners and for the shadow network."""
    cfg = world.config
    if cfg.sim.contexts != "world":
        competitors = world.env_rng.integers(0, cfg.mac.cw, cfg.sim.n_competitors)
        backoffs = np.concatenate([backoffs, competitors])
        shadow_backoffs = np.concatenate([shadow_backoffs, competitors])
        adjacency = None
    both = np.stack([backoffs, shadow_backoffs])
    start = run_slots(both, cfg.mac.slots_per_interval, cfg.mac.tx_duration_slots, adjacency)
    n = len(world.vehicles)
    return start[0, :n] >= 0, start[1, :n] >= 0


def run_round(world: World, agents: list[VehicleAgent]) -> tuple[World, list[RoundRecord]]:
    """One BSM period for every vehicle, in id order, then one mobility step."""
    cfg = world.config
    t = world.t + 1
    ctxs, adjacency = _observe(world)
    b_v, b_d = cfg.bandit_v, cfg.bandit_d
    picks = []
    for agent, ctx in zip(agents, ctxs):
        phase = bd.draw_phase(t, b_d, agent.rng)
        bin_v = bd.bin_context(ctx.c_v, b_v.context_range, b_v.n_context_bins)
        bin_d = bd.bin_context(ctx.c_d, b_d.context_range, b_d.n_context_bins)
        arm_v = bd.pick_arm(phase, bin_v, agent.tables["v"], b_v, agent.rng)
        arm_d = bd.pick_arm(phase, bin_d, agent.tables["d"], b_d, agent.rng)
        w = WeightVector(bd.arm_weight(arm_v, b_v.n_arm), bd.arm_weight(arm_d, b_d.n_arm))
        ar = accident_risk(w)
        w_opt = optimal_weight(ctx, cfg.risk)
        picks.append((phase, bin_v, bin_d, arm_v, arm_d, w, ar,
                      backoff_from_risk(ar, cfg.mac.cw, N_CONTEXTS), w_opt))

    if cfg.env == "network" and picks:
        bos = np.array([p[7] for p in picks], dtype=np.int64)
        shadow = np.array([backoff_from_risk(accident_risk(p[8]), cfg.mac.cw, N_CONTEXTS)
                           for p in picks], dtype=np.int64)
        sent, shadow_sent = _mac_outcomes(world, bos, shadow, adjacency)

    records = []
    for i, (agent, ctx, p) in enumerate(zip(agents, ctxs, picks)):
        phase, bin_v, bin_d, arm_v, arm_d, w, ar, bo, w_opt = p
        if cfg.env == "network":
            outcome = Outcome.TRANSMITTED if sent[i] else Outcome.EXPIRED
            r_v = r_d = reward_from_outcome(outcome)
            opt_v = opt_d = float(shadow_sent[i])
            outcome = outcome.value
        else:
            outcome = "none"
            r_v = calibrated_reward(w.w_v, w_opt.w_v, cfg.oracle, world.env_rng)
            r_d = calibrated_reward(w.w_d, w_opt.w_d, cfg.oracle, world.env_rng)
            opt_v = opt_d = cfg.oracle.p_max
        bd.update(agent.tables["v"], bin_v, arm_v, r_v)
        bd.update(agent.tables["d"], bin_d, arm_d, r_d)
        bd.record_regret(agent.ledgers["v"], opt_v, r_v)
        bd.record_regret(agent.ledgers["d"], opt_d, r_d)
        records.append(RoundRecord(t, agent.vehicle_id, ctx.c_v, ctx.c_d, bin_v, bin_d, phase,
                                   arm_v, arm_d, w.w_v, w.w_d, ar, bo, outcome, r_v, r_d,
                                   w_opt.w_v, w_opt.w_d, opt_v, opt_d))

    if cfg.sim.contexts == "world":
        world.vehicles = [step_mobility(v, cfg.region, cfg.sim.round_s, world.mob_rng,
                                        cfg.geometry.heading_jitter_rad)
                          for v in world.vehicles]
    world.t = t
    return world, records


@dataclass
class EpisodeResult:
    config: EpisodeConfig
    records: list
    agents: list
    world: World

    @property
    def rho_total(self) -> float:
        return sum(a.ledgers[k].rho for a in self.agents for k in CONTEXT_KEYS)

    @property
    def rho_per_round(self) -> float:
        """Regret per vehicle-round, summed over contexts."""
        n = self.config.horizon * len(self.agents)
        return self.rho_total / n if n else 0.0

    def rho_by_context(self) -> dict:
        return {k: sum(a.ledgers[k].rho for a in self.agents) for k in CONTEXT_KEYS}

    def tau_table(self) -> dict:
        """Empirical transmission probability grouped by backoff counter."""
        if self.config.env != "network":
            return {}
        rows = {}
        for r in self.records:
            cell = rows.setdefault(r.backoff, [0, 0])
            cell[0] += 1
            cell[1] += r.outcome == Outcome.TRANSMITTED.value
        return {str(bo): {"total": tot, "transmitted": tx, "tau": tx / tot}
                for bo, (tot, tx) in sorted(rows.items())}

    def arm_histogram(self) -> dict:
        return {k: [int(c) for c in sum((a.tables[k].pulls.sum(axis=0) for a in self.agents),
                                        np.zeros(self.config.bandit(k).n_arm, dtype=np.int64))]
                for k in CONTEXT_KEYS}

    def summary(self, config_echo=None) -> dict:
        return {
            "config": config_echo,
            "rho_total": self.rho_total,
            "rho_per_round": self.rho_per_round,
            "rho_by_context": self.rho_by_context(),
            "tau_table": self.tau_table(),
            "arm_histogram": self.arm_histogram(),
            "n_vehicles": len(self.agents),
            "rounds": self.config.horizon,
        }


def run_episode(config: EpisodeConfig) -> EpisodeResult:
    world, agents = init_world(config)
    records = []
    for _ in range(config.horizon):
        world, recs = run_round(world, agents)
        records.extend(recs)
    return EpisodeResult(config, records, agents, world)


def record_row(r: RoundRecord) -> list:
    row = []
    for name in RECORD_COLUMNS:
        v = getattr(r, name)
        row.append(repr(float(v)) if isinstance(v, float) else v)
    return row


def parse_record(row: dict) -> RoundRecord:
    kw = {}
    for name in RECORD_COLUMNS:
        v = row[name]
        if name in _INT_COLUMNS:
            kw[name] = int(v)
        elif name in _STR_COLUMNS:
            kw[name] = v
        else:
            kw[name] = float(v)
    return RoundRecord(**kw)


def read_log(path) -> list[RoundRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        lines = (line for line in fh if not line.startswith("#"))
        return [parse_record(row) for row in csv.DictReader(lines)]


def replay_tables(records, config: EpisodeConfig) -> dict:
    """Rebuild every (vehicle, context) ArmTable from a round log."""
    tables = {}
    for r in records:
        for k, b, a, rew in (("v", r.bin_v, r.arm_v, r.reward_v), ("d", r.bin_d, r.arm_d, r.reward_d)):
            key = (r.vehicle, k)
            if key not in tables:
                p = config.bandit(k)
                tables[key] = bd.ArmTable(p.n_context_bins, p.n_arm)
            bd.update(tables[key], b, a, rew)
    return tables


def replay_regret(records) -> dict:
    """Per (vehicle, context) regret recomputed from the log, in log order."""
    opt, act = {}, {}
    for r in records:
        for k, o, a in (("v", r.opt_reward_v, r.reward_v), ("d", r.opt_reward_d, r.reward_d)):
            key = (r.vehicle, k)
            opt[key] = opt.get(key, 0.0) + o
            act[key] = act.get(key, 0.0) + a
    return {key: opt[key] - act[key] for key in opt}
