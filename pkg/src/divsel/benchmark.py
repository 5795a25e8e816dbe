"""Exact offline benchmarks: the fluid relaxation, the intermediate (y, z)
formulation with its round-prefix truncation, closed-form optimum bounds, and
a brute-force grid oracle for tiny instances.

The max-min objectives are linearized with one auxiliary level variable and
solved with scipy's HiGHS backend; every returned solution is re-validated
against its own constraints before it leaves this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linprog

from .core import (
    EPS,
    MAX_CANDIDATES,
    FractionalSolution,
    Instance,
    is_core,
    least_utility,
    marginals,
    solution_from_rows,
)
from .errors import ContractError, InvariantError, SizeError

#: Constraint/value re-validation tolerance for LP results.
LP_TOL = 1e-7


@dataclass(frozen=True)
class LPResult:
    value: float
    solution: Optional[FractionalSolution]
    status: str  # optimal | infeasible | unbounded_guard
    degenerate_zero: bool = False


@dataclass(frozen=True)
class IntSolution:
    """Feasible point of the intermediate formulation.

    ``y`` mirrors the instance rounds (nonzero only on core candidates);
    ``z`` is an n x d matrix of per-round utility adjustments.
    """

    y: tuple[tuple[float, ...], ...]
    z: tuple[tuple[float, ...], ...]


def _status_name(status: int) -> str:
    if status == 0:
        return "optimal"
    if status == 2:
        return "infeasible"
    return "unbounded_guard"


def solve_fluid(inst: Instance) -> LPResult:
    """Maximize the least utility subject to sum(x) <= K and 0 <= x <= 1."""
    n_cands = inst.total_candidates
    if n_cands > MAX_CANDIDATES:
        raise SizeError(f"{n_cands} candidates exceeds the LP cap {MAX_CANDIDATES}")
    phi = marginals(inst)
    if n_cands == 0 or min(phi) == 0 or inst.capacity == 0:
        # Some dimension can never be served: the optimum is 0 (x = 0 allowed).
        zero = solution_from_rows([[0.0] * len(r) for r in inst.rounds])
        return LPResult(value=0.0, solution=zero, status="optimal", degenerate_zero=True)

    # Variables: x_1..x_N, t.  max t  s.t.  sum x <= K,  t - c_k (T x)_k <= 0.
    n_vars = n_cands + 1
    cost = np.zeros(n_vars)
    cost[-1] = -1.0
    a_ub = np.zeros((1 + inst.d, n_vars))
    b_ub = np.zeros(1 + inst.d)
    a_ub[0, :n_cands] = 1.0
    b_ub[0] = float(inst.capacity)
    col = 0
    for rnd in inst.rounds:
        for cand in rnd:
            for k in cand.bits:
                a_ub[1 + k, col] = -inst.c[k]
            col += 1
    a_ub[1:, -1] = 1.0
    bounds = [(0.0, 1.0)] * n_cands + [(0.0, None)]
    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        return LPResult(value=float("nan"), solution=None, status=_status_name(res.status))

    value = float(res.x[-1])
    rows, col = [], 0
    for rnd in inst.rounds:
        row = [min(max(float(res.x[col + j]), 0.0), 1.0) for j in range(len(rnd))]
        rows.append(row)
        col += len(rnd)
    sol = solution_from_rows(rows)
    lu, _ = least_utility(inst, sol)
    if sol.total() > inst.capacity + LP_TOL or lu < value - LP_TOL:
        raise InvariantError("fluid LP solution failed re-validation")
    return LPResult(value=value, solution=sol, status="optimal", degenerate_zero=value <= EPS)


def opt_bounds(inst: Instance) -> tuple[float, float]:
    """Closed-form sandwich for the fluid optimum, from marginals alone."""
    phi = marginals(inst)
    return opt_bounds_from_marginals(inst.d, inst.c, inst.capacity, phi)


def opt_bounds_from_marginals(
    d: int, c: tuple[float, ...], capacity: int, phi: list[int]
) -> tuple[float, float]:
    under = min(c[k] * min(capacity / d, phi[k]) for k in range(d))
    over = min(c[k] * min(capacity, phi[k]) for k in range(d))
    return under, over


def _core_contributions(inst: Instance, prefix_rounds: int) -> list[float]:
    contrib = [0.0] * inst.d
    for rnd in inst.rounds[:prefix_rounds]:
        for cand in rnd:
            if is_core(cand, inst.d):
                for k in cand.bits:
                    contrib[k] += 1.0
    return contrib


def solve_int(inst: Instance, prefix_rounds: Optional[int] = None) -> tuple[LPResult, IntSolution]:
    """Optimum g(tau) of the intermediate formulation truncated to the first
    ``prefix_rounds`` rounds (the full horizon when omitted).

    Presolve: the objective is nondecreasing in every y_j and nothing else
    constrains y, so y_j = 1 on all core candidates is optimal; only the z
    block is handed to the LP.
    """
    if inst.per_round_capacity is None:
        raise ContractError("solve_int requires per-round capacity a")
    tau = inst.n if prefix_rounds is None else prefix_rounds
    if not 1 <= tau <= inst.n:
        raise InvariantError(f"prefix_rounds must be in [1, {inst.n}]")
    if tau * inst.d > MAX_CANDIDATES * 10:
        raise SizeError(f"{tau * inst.d} z-variables exceeds the LP cap")

    a = inst.per_round_capacity
    budget = math.sqrt(inst.d) * a
    counts = [rnd.attribute_counts(inst.d) for rnd in inst.rounds]
    core_part = _core_contributions(inst, tau)

    # Variables: z_{ik} for i < tau (row-major), then t.
    n_z = tau * inst.d
    cost = np.zeros(n_z + 1)
    cost[-1] = -1.0
    a_ub = np.zeros((tau + inst.d, n_z + 1))
    b_ub = np.zeros(tau + inst.d)
    for i in range(tau):
        a_ub[i, i * inst.d : (i + 1) * inst.d] = 1.0
        b_ub[i] = budget
    for k in range(inst.d):
        row = tau + k
        for i in range(tau):
            a_ub[row, i * inst.d + k] = -inst.c[k]
        a_ub[row, -1] = 1.0
        b_ub[row] = inst.c[k] * core_part[k]
    bounds = [(0.0, float(counts[i][k])) for i in range(tau) for k in range(inst.d)]
    bounds.append((0.0, None))
    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        return (
            LPResult(value=float("nan"), solution=None, status=_status_name(res.status)),
            IntSolution(y=(), z=()),
        )

    value = float(res.x[-1])
    y_rows = []
    for i, rnd in enumerate(inst.rounds):
        y_rows.append(
            tuple(1.0 if i < tau and is_core(cand, inst.d) else 0.0 for cand in rnd)
        )
    z_rows = []
    for i in range(inst.n):
        if i < tau:
            z_rows.append(
                tuple(
                    min(max(float(res.x[i * inst.d + k]), 0.0), float(counts[i][k]))
                    for k in range(inst.d)
                )
            )
        else:
            z_rows.append(tuple(0.0 for _ in range(inst.d)))
    sol = IntSolution(y=tuple(y_rows), z=tuple(z_rows))
    achieved = int_objective(inst, sol)
    if achieved < value - LP_TOL:
        raise InvariantError("intermediate LP solution failed re-validation")
    return LPResult(value=value, solution=None, status="optimal"), sol


def int_objective(inst: Instance, sol: IntSolution, eps: float = EPS) -> float:
    """Objective of the intermediate formulation; validates constraints first."""
    if len(sol.y) != inst.n or len(sol.z) != inst.n:
        raise InvariantError("IntSolution shape does not match the instance")
    a = inst.per_round_capacity
    if a is None:
        raise ContractError("int_objective requires per-round capacity a")
    budget = math.sqrt(inst.d) * a
    acc = [0.0] * inst.d
    for i, (rnd, y_row, z_row) in enumerate(zip(inst.rounds, sol.y, sol.z)):
        if len(y_row) != len(rnd) or len(z_row) != inst.d:
            raise InvariantError(f"round {i}: IntSolution row shape mismatch")
        counts = rnd.attribute_counts(inst.d)
        for j, (yj, cand) in enumerate(zip(y_row, rnd)):
            if is_core(cand, inst.d):
                if yj < -eps or yj > 1.0 + eps:
                    raise InvariantError(f"y[{i}][{j}]={yj!r} outside [0,1]")
            elif abs(yj) > eps:
                raise InvariantError(f"y[{i}][{j}] nonzero on a regular candidate")
            for k in cand.bits:
                acc[k] += yj
        if math.fsum(z_row) > budget + eps:
            raise InvariantError(f"round {i}: sum_k z exceeds sqrt(d)*a")
        for k, zik in enumerate(z_row):
            if zik < -eps or zik > counts[k] + eps:
                raise InvariantError(f"z[{i}][{k}]={zik!r} outside [0, phi_k(R_i)]")
            acc[k] += zik
    return min(inst.c[k] * acc[k] for k in range(inst.d))


def solve_adjustment_lp(
    u: list[float], caps: list[float], budget: float, c: list[float]
) -> tuple[float, list[float]]:
    """One-round utility-adjustment LP: max min_k (c_k z_k + u_k) subject to
    sum z <= budget and 0 <= z_k <= caps_k.  Oracle side of the water-filling
    dual-route check."""
    d = len(u)
    cost = np.zeros(d + 1)
    cost[-1] = -1.0
    a_ub = np.zeros((1 + d, d + 1))
    b_ub = np.zeros(1 + d)
    a_ub[0, :d] = 1.0
    b_ub[0] = budget
    for k in range(d):
        a_ub[1 + k, k] = -c[k]
        a_ub[1 + k, -1] = 1.0
        b_ub[1 + k] = u[k]
    bounds = [(0.0, float(caps[k])) for k in range(d)] + [(None, None)]
    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        raise InvariantError(f"adjustment LP unexpectedly {_status_name(res.status)}")
    return float(res.x[-1]), [float(v) for v in res.x[:d]]


def grid_oracle(inst: Instance, grid_steps: int = 200) -> float:
    """Exhaustive evaluation of the least utility over the grid
    {0, 1/q, ..., 1}^|S| restricted to sum(x) <= K.

    Independent of the LP path.  The result is a certified lower bound on the
    fluid optimum; the gap is at most d * max_k c_k / q.  Exact reductions
    applied before enumerating: dimensions with no arrivals force the answer
    to 0; monotonicity lets the search saturate the budget; candidates with
    identical types are merged (the objective depends only on group totals).
    """
    n_cands = inst.total_candidates
    if n_cands > 5:
        raise SizeError(f"grid oracle limited to 5 candidates, got {n_cands}")
    if grid_steps < 1:
        raise InvariantError("grid_steps must be >= 1")
    phi = marginals(inst)
    if n_cands == 0 or min(phi) == 0 or inst.capacity == 0:
        return 0.0

    groups: dict[tuple[int, ...], int] = {}
    for cand in inst.all_candidates():
        groups[cand.bits] = groups.get(cand.bits, 0) + 1
    types = list(groups.keys())
    sizes = [groups[t] for t in types]
    q = grid_steps
    budget_units = min(inst.capacity * q, sum(sizes) * q)

    def utility(totals_units: tuple[int, ...]) -> float:
        acc = [0] * inst.d
        for t_bits, units in zip(types, totals_units):
            for k in t_bits:
                acc[k] += units
        return min(inst.c[k] * acc[k] / q for k in range(inst.d))

    best = 0.0
    caps = [s * q for s in sizes]
    g = len(types)

    def per_dim_cap(rest: list[int]) -> list[int]:
        out = [0] * inst.d
        for idx in rest:
            for k in types[idx]:
                out[k] += caps[idx]
        return out

    suffix_caps = [per_dim_cap(list(range(i, g))) for i in range(g + 1)]

    def dfs(idx: int, remaining: int, acc: list[int]) -> None:
        nonlocal best
        if idx == g:
            if remaining == 0:
                best = max(best, min(inst.c[k] * acc[k] / q for k in range(inst.d)))
            return
        rest_cap = sum(caps[idx:])
        if remaining > rest_cap:
            return
        # Optimistic bound: give every dimension all its remaining coverage.
        ub = min(
            inst.c[k] * (acc[k] + min(remaining, suffix_caps[idx][k])) / q
            for k in range(inst.d)
        )
        if ub <= best + 1e-15:
            return
        lo = max(0, remaining - sum(caps[idx + 1 :]))
        hi = min(caps[idx], remaining)
        for units in range(hi, lo - 1, -1):
            for k in types[idx]:
                acc[k] += units
            dfs(idx + 1, remaining - units, acc)
            for k in types[idx]:
                acc[k] -= units
        return

    dfs(0, budget_units, [0] * inst.d)
    return best


def enumerate_g(inst: Instance) -> list[float]:
    """g(tau) for tau = 1..n; used by monotonicity and prefix checks."""
    return [solve_int(inst, tau)[0].value for tau in range(1, inst.n + 1)]
