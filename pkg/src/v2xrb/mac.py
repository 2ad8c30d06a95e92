"""Slotted listen-before-talk broadcast MAC with per-BSM expiry.

Slot rules, applied simultaneously to every pending packet in slot ``s``:

* the medium is *busy* for a packet if any carrier-sense neighbor was
  transmitting during slot ``s - 1``; the counter then freezes;
* on an idle slot a packet with counter 0 starts transmitting (occupying
  ``tx_duration_slots`` slots), otherwise its counter decrements;
* a packet that has not started by its deadline slot expires (EXP).

Simultaneous starts all count as transmitted; reception is not modeled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import ContractViolation, ParameterError
from .risk import N_CONTEXTS, backoff_from_risk


class Outcome(str, Enum):
    PENDING = "pending"
    TRANSMITTED = "transmitted"
    EXPIRED = "expired"


@dataclass(frozen=True)
class MacParams:
    cw: int = 15
    slots_per_interval: int = 64
    tx_duration_slots: int = 8

    def __post_init__(self):
        bad = []
        if not self.cw >= 2:
            bad.append("cw")
        if not self.slots_per_interval >= self.cw:
            bad.append("slots_per_interval")
        if not self.tx_duration_slots >= 1:
            bad.append("tx_duration_slots")
        if bad:
            raise ParameterError(f"invalid MAC parameters: {bad}", bad)


# 802.11p-like timing: 13 us slots in a 100 ms BSM period, ~0.4 ms frames.
REALISTIC_MAC = MacParams(cw=15, slots_per_interval=7692, tx_duration_slots=31)


@dataclass(frozen=True)
class MacPacket:
    owner_id: int
    backoff_remaining: int
    deadline_slot: int
    outcome: Outcome = Outcome.PENDING
    tx_slot: int | None = None


@dataclass(frozen=True)
class TauEstimate:
    transmitted_count: int
    total_count: int

    @property
    def tau(self) -> float:
        return self.transmitted_count / self.total_count

    @property
    def sigma(self) -> float:
        """Binomial standard error of ``tau``."""
        p = self.tau
        return math.sqrt(p * (1.0 - p) / self.total_count)


def schedule_bsm(owner, backoff_counter: int, params: MacParams) -> MacPacket:
    if not 0 <= backoff_counter <= params.cw - 1:
        raise ContractViolation(
            f"backoff {backoff_counter} outside [0, {params.cw - 1}]")
    return MacPacket(owner, int(backoff_counter), params.slots_per_interval)


def reward_from_outcome(outcome: Outcome) -> int:
    """1 unless the packet expired."""
    if outcome is Outcome.PENDING:
        raise ContractViolation("packet outcome not resolved")
    return 0 if outcome is Outcome.EXPIRED else 1


def run_slots(backoffs: np.ndarray, deadlines, tx_duration: int,
              adjacency: np.ndarray | None = None, watch: int | None = None) -> np.ndarray:
    """Batched slot loop.

    ``backoffs`` is (trials, N); every trial shares the same topology.
    ``adjacency`` is an (N, N) boolean carrier-sense matrix, None meaning
    everyone senses everyone. Returns the start slot per packet, -1 for
    expired ones. With ``watch`` set, the loop stops as soon as that
    column has resolved in every trial (other columns are then partial).
    """
    counter = np.array(backoffs, dtype=np.int64, copy=True)
    if counter.ndim != 2:
        raise ContractViolation("backoffs must be a (trials, N) array")
    n_trials, n = counter.shape
    deadlines = np.broadcast_to(np.asarray(deadlines, dtype=np.int64), (n,))
    start = np.full((n_trials, n), -1, dtype=np.int64)
    pending = np.ones((n_trials, n), dtype=bool)
    active = np.zeros((n_trials, n), dtype=bool)
    adj = None if adjacency is None else np.asarray(adjacency, dtype=np.int64)
    horizon = int(deadlines.max()) if n else 0
    for s in range(horizon):
        if adj is None:
            busy = np.broadcast_to(active.any(axis=1, keepdims=True), active.shape)
        else:
            busy = (active.astype(np.int64) @ adj) > 0
        idle = pending & ~busy
        zero = counter == 0
        fire = idle & zero & (s < deadlines)
        counter[idle & ~zero] -= 1
        start[fire] = s
        pending &= ~fire
        active = (start >= 0) & (start + tx_duration > s)
        if watch is not None:
            if not pending[:, watch].any():
                break
        elif not pending.any():
            break
    return start


def simulate_interval(packets, contention_topology=None, params: MacParams | None = None):
    """Resolve one BSM interval; returns the packets with outcome and tx slot.

    ``contention_topology`` is an (N, N) boolean matrix aligned with
    ``packets`` or None for a fully connected neighborhood.
    """
    params = params or MacParams()
    packets = list(packets)
    if not packets:
        return []
    for p in packets:
        if p.outcome is not Outcome.PENDING:
            raise ContractViolation(f"packet of {p.owner_id} already resolved")
    backoffs = np.array([[p.backoff_remaining for p in packets]])
    deadlines = np.array([p.deadline_slot for p in packets])
    start = run_slots(backoffs, deadlines, params.tx_duration_slots, contention_topology)[0]
    out = []
    for p, s in zip(packets, start):
        if s >= 0:
            out.append(replace(p, outcome=Outcome.TRANSMITTED, tx_slot=int(s)))
        else:
            out.append(replace(p, outcome=Outcome.EXPIRED))
    return out


def estimate_tau(n_cs: int, fixed_ar_level: float, n_trials: int,
                 params: MacParams, rng: np.random.Generator,
                 n_ctx: int = N_CONTEXTS, chunk: int = 20000) -> TauEstimate:
    """Monte-Carlo transmission probability of a tagged vehicle.

    The tagged vehicle's backoff follows its accident risk; the ``n_cs``
    competitors draw backoffs uniformly from [0, CW-1]. All vehicles sense
    each other.
    """
    if n_trials < 1:
        raise ContractViolation("n_trials must be >= 1")
    if n_cs < 0:
        raise ContractViolation("n_cs must be >= 0")
    bo = backoff_from_risk(fixed_ar_level, params.cw, n_ctx)
    transmitted = 0
    done = 0
    while done < n_trials:
        m = min(chunk, n_trials - done)
        backoffs = np.empty((m, n_cs + 1), dtype=np.int64)
        backoffs[:, 0] = bo
        backoffs[:, 1:] = rng.integers(0, params.cw, size=(m, n_cs))
        start = run_slots(backoffs, params.slots_per_interval,
                          params.tx_duration_slots, None, watch=0)
        transmitted += int(np.count_nonzero(start[:, 0] >= 0))
        done += m
    return TauEstimate(transmitted, n_trials)
