"""Tabular contextual epsilon-greedy bandit over a discretized weight grid.

Arms are 1-based indices into a uniform grid on [0, 1]. Each context bin
keeps its own pull counts and reward sums; that table is the learner's
whole memory.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, ParameterError

TRAINING = "training"
EXPLORE = "explore"
EXPLOIT = "exploit"

POLICIES = ("argmax", "literal")


@dataclass(frozen=True)
class BanditParams:
    n_arm: int = 100
    epsilon: float = 0.1
    horizon_rounds: int = 1000
    train_rounds: int | None = None
    n_context_bins: int = 21
    context_range: tuple[float, float] = (0.0, 2.0)
    policy: str = "argmax"

    def __post_init__(self):
        object.__setattr__(self, "context_range", tuple(float(c) for c in self.context_range))
        if self.train_rounds is None:
            object.__setattr__(self, "train_rounds", max(1, self.horizon_rounds // 10))
        bad = []
        if not self.n_arm >= 2:
            bad.append("n_arm")
        if not 0.0 <= self.epsilon <= 1.0:
            bad.append("epsilon")
        if not self.horizon_rounds >= 1:
            bad.append("horizon_rounds")
        if not 0 < self.train_rounds <= self.horizon_rounds:
            bad.append("train_rounds")
        if not self.n_context_bins >= 1:
            bad.append("n_context_bins")
        low, high = self.context_range
        if not high > low:
            bad.append("context_range")
        if self.policy not in POLICIES:
            bad.append("policy")
        if bad:
            raise ParameterError(f"invalid bandit parameters: {bad}", bad)


def arm_weight(k: int, n_arm: int) -> float:
    if not 1 <= k <= n_arm:
        raise ContractViolation(f"arm {k} outside [1, {n_arm}]")
    return (k - 1) / (n_arm - 1)


def bin_context(c: float, context_range: tuple[float, float], n_bins: int) -> int:
    """Uniform-width bin of ``c`` after clamping; the top edge joins the last bin."""
    low, high = context_range
    c = min(max(c, low), high)
    return min(int(math.floor((c - low) / (high - low) * n_bins)), n_bins - 1)


@dataclass
class ArmTable:
    n_bins: int
    n_arm: int
    pulls: np.ndarray = field(init=False, repr=False)
    reward_sum: np.ndarray = field(init=False, repr=False)
    # Cached empirical means, -inf where never pulled; kept in step by update().
    _means: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.pulls = np.zeros((self.n_bins, self.n_arm), dtype=np.int64)
        self.reward_sum = np.zeros((self.n_bins, self.n_arm), dtype=float)
        self._means = np.full((self.n_bins, self.n_arm), -np.inf)

    def mean(self, context_bin: int) -> np.ndarray:
        """Empirical mean per arm of a bin; NaN where the arm was never pulled."""
        m = self._means[context_bin].copy()
        m[self.pulls[context_bin] == 0] = np.nan
        return m

    def _refresh(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            self._means = np.where(self.pulls > 0, self.reward_sum / self.pulls, -np.inf)

    def __eq__(self, other):
        if not isinstance(other, ArmTable):
            return NotImplemented
        return (self.pulls.shape == other.pulls.shape
                and np.array_equal(self.pulls, other.pulls)
                and np.array_equal(self.reward_sum, other.reward_sum))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin", "arm", "pulls", "reward_sum"])
        for b in range(self.n_bins):
            for a in range(self.n_arm):
                w.writerow([b, a + 1, int(self.pulls[b, a]), repr(float(self.reward_sum[b, a]))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, n_bins: int, n_arm: int) -> "ArmTable":
        table = cls(n_bins, n_arm)
        for row in csv.DictReader(io.StringIO(text)):
            b, a = int(row["bin"]), int(row["arm"]) - 1
            table.pulls[b, a] = int(row["pulls"])
            table.reward_sum[b, a] = float(row["reward_sum"])
        table._refresh()
        return table


def draw_phase(t: int, params: BanditParams, rng: np.random.Generator) -> str:
    """Training during the first ``train_rounds``; afterwards explore w.p. epsilon."""
    if t < 1:
        raise ContractViolation(f"round index must be >= 1, got {t}")
    if t <= params.train_rounds:
        return TRAINING
    return EXPLORE if rng.random() < params.epsilon else EXPLOIT


def exploit_arm(context_bin: int, table: ArmTable, policy: str = "argmax") -> int | None:
    """Greedy arm for a bin, or None if the bin was never visited.

    ``argmax`` takes the best empirical mean (lowest index on ties);
    ``literal`` takes the largest weight tried so far in the bin.
    """
    if policy == "literal":
        pulled = np.flatnonzero(table.pulls[context_bin])
        return int(pulled[-1]) + 1 if pulled.size else None
    means = table._means[context_bin]
    k = int(np.argmax(means))
    if means[k] == -np.inf:
        return None
    return k + 1


def pick_arm(phase: str, context_bin: int, table: ArmTable, params: BanditParams,
             rng: np.random.Generator) -> int:
    if phase == EXPLOIT:
        arm = exploit_arm(context_bin, table, params.policy)
        if arm is not None:
            return arm
    return int(rng.integers(1, params.n_arm + 1))


def select_arm(t: int, context_bin: int, table: ArmTable, params: BanditParams,
               rng: np.random.Generator) -> int:
    return pick_arm(draw_phase(t, params, rng), context_bin, table, params, rng)


def update(table: ArmTable, context_bin: int, arm: int, reward: int) -> ArmTable:
    if reward not in (0, 1):
        raise ContractViolation(f"reward must be 0 or 1, got {reward!r}")
    if not 1 <= arm <= table.n_arm:
        raise ContractViolation(f"arm {arm} outside [1, {table.n_arm}]")
    a = arm - 1
    table.pulls[context_bin, a] += 1
    table.reward_sum[context_bin, a] += reward
    table._means[context_bin, a] = table.reward_sum[context_bin, a] / table.pulls[context_bin, a]
    return table


@dataclass
class RegretLedger:
    cumulative_opt_reward: float = 0.0
    cumulative_actual_reward: float = 0.0
    opt_rewards: list = field(default_factory=list)
    actual_rewards: list = field(default_factory=list)

    @property
    def rounds(self) -> int:
        return len(self.actual_rewards)

    @property
    def rho(self) -> float:
        return self.cumulative_opt_reward - self.cumulative_actual_reward

    @property
    def rho_per_round(self) -> float:
        return self.rho / self.rounds if self.rounds else 0.0

    def curve(self) -> np.ndarray:
        """Cumulative regret after each round."""
        return (np.cumsum(np.asarray(self.opt_rewards, dtype=float))
                - np.cumsum(np.asarray(self.actual_rewards, dtype=float)))


def record_regret(ledger: RegretLedger, r_opt: float, r_actual: float) -> RegretLedger:
    if not (0.0 <= r_opt <= 1.0 and 0.0 <= r_actual <= 1.0):
        raise ContractViolation("rewards must lie in [0, 1]")
    ledger.cumulative_opt_reward += r_opt
    ledger.cumulative_actual_reward += r_actual
    ledger.opt_rewards.append(r_opt)
    ledger.actual_rewards.append(r_actual)
    return ledger
