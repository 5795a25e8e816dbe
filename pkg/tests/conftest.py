import random

import pytest

from divsel.core import AttributeVector, Instance, Round


def make_instance(d, cand_rounds, capacity, c=None, a=None):
    """Compact instance builder: cand_rounds is a list of rounds, each a list
    of attribute-index tuples."""
    rounds = tuple(
        Round(tuple(AttributeVector(tuple(sorted(bits))) for bits in rnd))
        for rnd in cand_rounds
    )
    return Instance(
        d=d,
        c=tuple(c) if c is not None else tuple(1.0 for _ in range(d)),
        capacity=capacity,
        rounds=rounds,
        per_round_capacity=a,
    )


def random_feasible_x(inst, seed, saturate=False):
    """Seeded feasible fractional solution with boundary values mixed in."""
    rng = random.Random(seed)
    rows = []
    for rnd in inst.rounds:
        row = []
        for _ in rnd:
            roll = rng.random()
            if roll < 0.15:
                row.append(0.0)
            elif roll < 0.3:
                row.append(1.0)
            else:
                row.append(rng.random())
        rows.append(row)
    total = sum(v for row in rows for v in row)
    if total > inst.capacity and total > 0:
        scale = inst.capacity / total
        rows = [[v * scale for v in row] for row in rows]
    from divsel.core import solution_from_rows

    return solution_from_rows(rows)


@pytest.fixture
def tiny_instance():
    return make_instance(2, [[(0,), (1,)]], capacity=2)
