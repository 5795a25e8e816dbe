"""Higher-level policy for the unknown-capacity scenario.

Three building blocks run each round: a myopic equal-improvement allocation,
a forward-looking pass (core candidates at full tendency, then water-filled
utility adjustments under a sqrt(d)*a budget, scaled into a feasible
fraction), and the hybrid average of the two.  An optional second agent tops
unused capacity back up without ever influencing the first agent's state.

The policy reads only (d, c, a); it never sees K, n, or marginal information.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .core import Instance, Round, is_core, solution_from_rows
from .errors import ContractError, ShapeError


def myopic_round(d: int, c: tuple[float, ...], a: int, rnd: Round) -> list[float]:
    """Equal-improvement allocation of the fresh capacity a.

    The common utility raise is alpha = min(min_k c_k phi_k, a / sum_k 1/c_k);
    each candidate takes the largest per-dimension share it is needed for.
    A dimension with no arrivals this round forces alpha = 0.
    """
    if not rnd.candidates:
        return []
    counts = rnd.attribute_counts(d)
    if min(counts) == 0:
        return [0.0] * len(rnd)
    inv_c_sum = math.fsum(1.0 / ck for ck in c)
    alpha = min(min(c[k] * counts[k] for k in range(d)), a / inv_c_sum)
    out = []
    for cand in rnd:
        share = max((alpha / c[k]) / counts[k] for k in cand.bits) if cand.bits else 0.0
        out.append(share)
    return out


def core_set(rnd: Round, d: int) -> list[int]:
    """Positions of core candidates (popcount^2 >= d, exact integer test)."""
    return [j for j, cand in enumerate(rnd) if is_core(cand, d)]


def water_fill(
    u: list[float],
    caps: list[float],
    budget: float,
    c: list[float],
    continue_after_cap: bool = False,
) -> list[float]:
    """Raise the lowest utility levels under a total budget and per-dim caps.

    Levels L_k = u_k + c_k z_k; the tied minimum set rises at unit level rate,
    a dimension joining when the level reaches its u_k.  By default the
    process stops at budget exhaustion or at the first level where some
    dimension sits at its cap, whichever is earlier; the achieved value
    min_k L_k then equals the optimum of the one-round adjustment LP.  With
    ``continue_after_cap`` the capped dimension is frozen and the rest keep
    rising until the budget runs out (same value, more mass).
    """
    d = len(u)
    if d == 0 or budget <= 0.0:
        return [0.0] * d
    ceilings = [u[k] + c[k] * caps[k] for k in range(d)]
    level_cap = min(ceilings)

    def consumption(level: float, frozen: set[int], z_frozen: list[float]) -> float:
        total = 0.0
        for k in range(d):
            if k in frozen:
                total += z_frozen[k]
            elif level > u[k]:
                total += (level - u[k]) / c[k]
        return total

    def budget_level(frozen: set[int], z_frozen: list[float], remaining_cap: float) -> float:
        # Level at which the running consumption hits the budget, scanning
        # join events in sorted order; capped above by remaining_cap.
        events = sorted(set(u[k] for k in range(d) if k not in frozen))
        prev = events[0] if events else remaining_cap
        for ev in events + [remaining_cap]:
            ev = min(ev, remaining_cap)
            if ev > prev:
                c_prev = consumption(prev, frozen, z_frozen)
                c_ev = consumption(ev, frozen, z_frozen)
                if c_ev >= budget - 1e-18:
                    rate = (c_ev - c_prev) / (ev - prev)
                    if rate <= 0.0:
                        return ev
                    return prev + (budget - c_prev) / rate
                prev = ev
            if ev >= remaining_cap:
                break
        return remaining_cap

    z = [0.0] * d
    if not continue_after_cap:
        level = min(level_cap, budget_level(set(), z, level_cap))
        return [min(caps[k], max(0.0, (level - u[k]) / c[k])) for k in range(d)]

    # Opt-in variant: freeze each capped dimension and keep raising the rest.
    frozen: set[int] = set()
    level = min(u)
    while True:
        active = [k for k in range(d) if k not in frozen]
        if not active:
            break
        next_cap = min(ceilings[k] for k in active)
        lb = budget_level(frozen, z, next_cap)
        level = min(next_cap, lb)
        for k in active:
            if level > u[k]:
                z[k] = min(caps[k], (level - u[k]) / c[k])
        if lb <= next_cap + 1e-15 and consumption(level, frozen, z) >= budget - 1e-12:
            break
        for k in active:
            if ceilings[k] <= level + 1e-15:
                frozen.add(k)
                z[k] = caps[k]
    return z


def fill_value(u: list[float], z: list[float], c: list[float]) -> float:
    """Objective min_k (u_k + c_k z_k) achieved by an adjustment vector."""
    return min(u[k] + c[k] * z[k] for k in range(len(u)))


@dataclass
class ForwardState:
    """Running accumulators of the forward-looking pass."""

    d: int
    c: tuple[float, ...]
    a: int
    u: list[float] = field(default_factory=list)
    round_index: int = 0
    y_history: list[tuple[float, ...]] = field(default_factory=list)
    z_history: list[tuple[float, ...]] = field(default_factory=list)
    f_history: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.u:
            self.u = [0.0] * self.d


def forward_round(
    state: ForwardState,
    rnd: Round,
    continue_after_cap: bool = False,
) -> tuple[list[float], list[float], list[float]]:
    """One round of the forward-looking pass: returns (y_i, z_i, x_i).

    Stage 1 marks core candidates (tendency 1) and enters them into the
    accumulated utilities immediately; stage 2 water-fills the adjustments
    against the current utilities; stage 3 scales both into a fraction that
    consumes at most a/2 + a/2 of the fresh capacity.  The adjustments enter
    the accumulators only after the fraction is formed.
    """
    d, c, a = state.d, state.c, state.a
    counts = rnd.attribute_counts(d)
    cores = set(core_set(rnd, d))
    y_i = [1.0 if j in cores else 0.0 for j in range(len(rnd))]
    for j in cores:
        for k in rnd.candidates[j].bits:
            state.u[k] += c[k]

    budget = math.sqrt(d) * a
    z_i = water_fill(state.u, [float(v) for v in counts], budget, list(c), continue_after_cap)
    state.f_history.append(fill_value(state.u, z_i, list(c)))

    total_count = sum(counts)
    y_scale = min(1.0, a / (total_count / math.sqrt(d))) if total_count > 0 else 0.0
    two_sqrt_d = 2.0 * math.sqrt(d)
    x_i = []
    for j, cand in enumerate(rnd):
        y_part = (y_i[j] / 2.0) * y_scale
        z_part = 0.0
        for k in cand.bits:
            if counts[k] > 0:
                z_part = max(z_part, z_i[k] / counts[k])
        x_i.append(y_part + z_part / two_sqrt_d)

    for k in range(d):
        state.u[k] += c[k] * z_i[k]
    state.y_history.append(tuple(y_i))
    state.z_history.append(tuple(z_i))
    state.round_index += 1
    return y_i, z_i, x_i


def hybrid_round(x_bar: list[float], x_hat: list[float]) -> list[float]:
    if len(x_bar) != len(x_hat):
        raise ShapeError(f"hybrid inputs differ in length: {len(x_bar)} vs {len(x_hat)}")
    return [(b + h) / 2.0 for b, h in zip(x_bar, x_hat)]


def _equal_increment_topup(x_i: list[float], budget: float) -> list[float]:
    """Raise all entries by a common increment, clipping at 1, until the
    budget or every headroom is consumed.  Never reduces an entry."""
    if not x_i or budget <= 0.0:
        return list(x_i)
    order = sorted(range(len(x_i)), key=lambda j: 1.0 - x_i[j])
    result = list(x_i)
    remaining = budget
    active = len(x_i)
    base = 0.0
    for rank, j in enumerate(order):
        headroom = (1.0 - x_i[j]) - base
        active = len(x_i) - rank
        if headroom * active >= remaining - 1e-15:
            base += remaining / active
            for jj in order[rank:]:
                result[jj] = min(1.0, x_i[jj] + base)
            return result
        base += headroom
        remaining -= headroom * active
        result[j] = 1.0
    return result


def leftover_topup(policy: "UnknownPolicy", rnd: Round, x_i: list[float]) -> list[float]:
    """Second agent: distribute the accumulated unused capacity over the
    current round's candidates, never reducing an entry.

    The budget is the capacity released so far minus everything already
    emitted (including past top-ups) minus the first agent's current row; the
    first agent's own state never sees the result, so its future decisions
    are unchanged and the combined solution dominates the plain one.
    """
    budget = policy.round_index * policy.a - policy.emitted_total - math.fsum(x_i)
    return _equal_increment_topup(x_i, budget)


@dataclass
class UnknownPolicy:
    """Sequential per-round driver for the unknown-capacity scenario."""

    d: int
    c: tuple[float, ...]
    a: int
    variant: str = "hybrid"  # hybrid | myopic | forward
    topup_enabled: bool = False
    continue_after_cap: bool = False
    forward: ForwardState = field(init=False)
    emitted_total: float = 0.0
    round_index: int = 0
    rows: list[list[float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.a < 1:
            raise ContractError("unknown-capacity policies require a >= 1")
        if self.variant not in ("hybrid", "myopic", "forward"):
            raise ContractError(f"unknown variant {self.variant!r}")
        self.forward = ForwardState(d=self.d, c=self.c, a=self.a)

    @property
    def leftover(self) -> float:
        return self.round_index * self.a - self.emitted_total

    def process_round(self, rnd: Round) -> list[float]:
        self.round_index += 1
        x_bar = myopic_round(self.d, self.c, self.a, rnd)
        _, _, x_hat = forward_round(self.forward, rnd, self.continue_after_cap)
        if self.variant == "myopic":
            x_i = x_bar
        elif self.variant == "forward":
            x_i = x_hat
        else:
            x_i = hybrid_round(x_bar, x_hat)
        if self.topup_enabled:
            x_i = leftover_topup(self, rnd, x_i)
        self.emitted_total += math.fsum(x_i)
        self.rows.append(x_i)
        return x_i


def run_unknown_policy(
    inst: Instance,
    variant: str = "hybrid",
    topup: bool = False,
    continue_after_cap: bool = False,
) -> UnknownPolicy:
    """Stream all rounds of an instance through a fresh policy."""
    if inst.per_round_capacity is None:
        raise ContractError("instance carries no per-round capacity a")
    policy = UnknownPolicy(
        d=inst.d,
        c=inst.c,
        a=inst.per_round_capacity,
        variant=variant,
        topup_enabled=topup,
        continue_after_cap=continue_after_cap,
    )
    for rnd in inst.rounds:
        policy.process_round(rnd)
    return policy


def policy_solution(policy: UnknownPolicy):
    return solution_from_rows(policy.rows)
