"""Higher-level policy for the fixed-capacity scenario.

A principal spawns one agent per guessed optimum value (geometric guesses
spanning the closed-form optimum sandwich).  Each round, every agent runs a
controlled greedy pass over the candidates in a shared random order, then a
continuous minimalist pass over the dimensions, and combines the two into a
per-round fraction; the principal emits the across-agent average.

Both "continuous increase" processes are piecewise linear, so they are
realized here as exact closed-form event computations, never time-stepped.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .benchmark import opt_bounds_from_marginals
from .core import EPS, Instance, Round, min_count_at_least_sqrt_d, solution_from_rows
from .errors import DimensionError


def guess_count(under: float, over: float) -> int:
    """Number of geometric guesses covering [under, over].

    ceil(log2(over/under)) is 0 when the sandwich is tight; one agent with
    gamma = under still covers that case, hence the floor of 1.  A ratio that
    is an exact power of two is snapped before the ceiling to avoid float
    drift.
    """
    if under <= 0.0:
        return 0
    ratio = over / under
    if ratio <= 1.0:
        return 1
    lg = math.log2(ratio)
    rounded = round(lg)
    if abs(lg - rounded) < 1e-9:
        lg = rounded
    return max(1, math.ceil(lg))


@dataclass
class AgentState:
    """Per-guess running state across the horizon."""

    gamma: float
    d: int
    c: tuple[float, ...]
    capacity: int
    phi_total: tuple[int, ...]
    y_used: float = 0.0
    z_used: float = 0.0
    v: list[float] = field(default_factory=list)  # c_k * sum of y on dim k
    z_acc: list[float] = field(default_factory=list)  # sum over past rounds of z_ik
    consumed_marginal: list[int] = field(default_factory=list)  # arrivals seen so far
    rows: list[list[float]] = field(default_factory=list)
    y_rows: list[list[float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.v:
            self.v = [0.0] * self.d
        if not self.z_acc:
            self.z_acc = [0.0] * self.d
        if not self.consumed_marginal:
            self.consumed_marginal = [0] * self.d


def controlled_greedy_round(agent: AgentState, rnd: Round, order: list[int]) -> list[float]:
    """Stage 1: raise each candidate's fraction while it still benefits at
    least sqrt(d) underrepresented dimensions.

    For candidate j the thresholds tau_k = (gamma/sqrt(d) - v_k)/c_k over its
    attributes with v_k below the scaled guess are the exits from the
    underrepresented set; the raise stops at the m-th largest threshold
    (m = least integer with m^2 >= d), at 1, or at the capacity, whichever is
    smallest.
    """
    target = agent.gamma / math.sqrt(agent.d)
    m = min_count_at_least_sqrt_d(agent.d)
    y_i = [0.0] * len(rnd)
    for pos in order:
        cand = rnd.candidates[pos]
        thresholds = []
        for k in cand.bits:
            tau = (target - agent.v[k]) / agent.c[k]
            if tau > 0.0:
                thresholds.append(tau)
        if len(thresholds) < m:
            y_stop = 0.0
        else:
            thresholds.sort(reverse=True)
            y_stop = thresholds[m - 1]
        y = min(1.0, max(0.0, agent.capacity - agent.y_used), y_stop)
        y_i[pos] = y
        if y > 0.0:
            agent.y_used += y
            for k in cand.bits:
                agent.v[k] += agent.c[k] * y
    return y_i


def continuous_minimalist_round(agent: AgentState, rnd: Round) -> list[float]:
    """Stage 2: per-dimension utility adjustments, in index order.

    Requires stage 1 of this round to be applied already (the accumulated
    utility w counts y through the current round, z only before it).  The
    adjustment stops when the dimension's maximal achievable end-of-horizon
    utility reaches the scaled guess, at the round arrival count, or at the
    capacity, in closed form.
    """
    target = agent.gamma / math.sqrt(agent.d)
    counts = rnd.attribute_counts(agent.d)
    z_i = [0.0] * agent.d
    for k in range(agent.d):
        w = agent.v[k] + agent.c[k] * agent.z_acc[k]
        res = agent.c[k] * (agent.phi_total[k] - agent.consumed_marginal[k])
        room = min(float(counts[k]), max(0.0, agent.capacity - agent.z_used))
        z = (target - w - res) / agent.c[k]
        z = min(max(z, 0.0), room)
        z_i[k] = z
        agent.z_used += z
        agent.z_acc[k] += z
    return z_i


def combine_agent_round(y_i: list[float], z_i: list[float], rnd: Round, d: int) -> list[float]:
    """Stage 3: x_j = [y_j + max_k z_ik t_jk / phi_k(R_i)] / 2 (0/0 -> 0)."""
    counts = rnd.attribute_counts(d)
    x_i = []
    for j, cand in enumerate(rnd):
        adj = 0.0
        for k in cand.bits:
            if counts[k] > 0:
                adj = max(adj, z_i[k] / counts[k])
        x_i.append((y_i[j] + adj) / 2.0)
    return x_i


@dataclass
class FixedPolicy:
    """Principal driving all agents; emits the per-round across-agent average."""

    d: int
    c: tuple[float, ...]
    capacity: int
    phi_total: tuple[int, ...]
    seed: int
    under: float = field(init=False)
    over: float = field(init=False)
    agents: list[AgentState] = field(init=False)
    round_index: int = 0
    rows: list[list[float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if len(self.phi_total) != self.d:
            raise DimensionError(f"marginals length {len(self.phi_total)} != d={self.d}")
        self.under, self.over = opt_bounds_from_marginals(
            self.d, self.c, self.capacity, list(self.phi_total)
        )
        count = guess_count(self.under, self.over)
        self.agents = [
            AgentState(
                gamma=(2.0**r) * self.under,
                d=self.d,
                c=self.c,
                capacity=self.capacity,
                phi_total=self.phi_total,
            )
            for r in range(count)
        ]

    def process_round(self, rnd: Round) -> list[float]:
        # One shuffle per round, shared by all agents; replay is exact given
        # (seed, round index).
        order = list(range(len(rnd)))
        mix = (self.seed * 1_000_003 + self.round_index) & 0xFFFFFFFFFFFFFFFF
        random.Random(mix).shuffle(order)
        self.round_index += 1
        if not self.agents:
            x_avg = [0.0] * len(rnd)
            self.rows.append(x_avg)
            return x_avg
        counts = rnd.attribute_counts(self.d)
        per_agent = []
        for agent in self.agents:
            for k in range(self.d):
                agent.consumed_marginal[k] += counts[k]
            y_i = controlled_greedy_round(agent, rnd, order)
            z_i = continuous_minimalist_round(agent, rnd)
            x_i = combine_agent_round(y_i, z_i, rnd, self.d)
            agent.rows.append(x_i)
            agent.y_rows.append([y_i[j] for j in range(len(rnd))])
            per_agent.append(x_i)
        denom = float(len(self.agents))
        x_avg = [sum(col) / denom for col in zip(*per_agent)] if len(rnd) else []
        self.rows.append(x_avg)
        return x_avg


def new_fixed_policy(
    d: int,
    c: tuple[float, ...],
    capacity: int,
    phi_total: list[int],
    seed: int,
) -> FixedPolicy:
    return FixedPolicy(d=d, c=c, capacity=capacity, phi_total=tuple(phi_total), seed=seed)


def run_fixed_policy(inst: Instance, seed: int) -> FixedPolicy:
    """Stream all rounds of an instance through a fresh policy.

    The marginal counts are granted by the scenario's information contract
    and are computed here from the instance itself.
    """
    from .core import marginals

    policy = new_fixed_policy(inst.d, inst.c, inst.capacity, marginals(inst), seed)
    for rnd in inst.rounds:
        policy.process_round(rnd)
    return policy


def policy_solution(policy: FixedPolicy):
    return solution_from_rows(policy.rows)


def agent_solution(policy: FixedPolicy, index: int):
    return solution_from_rows(policy.agents[index].rows)


def agent_y_solution(policy: FixedPolicy, index: int):
    return solution_from_rows(policy.agents[index].y_rows)


def best_guess_index(policy: FixedPolicy, opt_value: float) -> int | None:
    """Largest agent index whose guess does not exceed the true optimum."""
    best = None
    for idx, agent in enumerate(policy.agents):
        if agent.gamma <= opt_value + EPS:
            best = idx
    return best
