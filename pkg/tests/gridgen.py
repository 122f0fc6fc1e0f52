"""Random (view, formula) instances for the evaluator-vs-brute-force duels.

All geometry (positions, sizes, braking distances, claim sets) sits on a
0.25 m lattice and the view window is 49.95 m long, so a 1000-point chop
grid (step 0.05 m) passes through every point where any atom can change
truth value.  Length constants are 0.25 multiples as well.  Under these
conditions the dense grid search is exhaustive, which is what makes a
zero-disagreement comparison meaningful rather than lucky.
"""

from __future__ import annotations

import random

from crossings.logic import (
    And,
    Cl,
    Cs,
    Dir,
    Eq,
    Exists,
    Free,
    HChop,
    LenCmp,
    Not,
    Re,
    TRUE,
    VChop,
)
from crossings.network import NodeId
from crossings.randomgen import ROUTES, demo_topology
from crossings.snapshot import CarState, TrafficSnapshot
from crossings.views import build_multiview

H_B = 10.0
H_F = 39.95
GRID_POINTS = 1000

_TOPO = demo_topology()


def q(rng: random.Random, lo: float, hi: float) -> float:
    """A 0.25-lattice value in [lo, hi]."""
    steps = int((hi - lo) / 0.25)
    return lo + 0.25 * rng.randint(0, steps)


def random_scene(rng: random.Random, max_cars: int = 5):
    """A snapshot around the demo crossing plus one of the ego's views."""
    n_cars = rng.randint(1, max_cars)
    cars = {}
    entries = [7, 1, 3, 5]
    rng.shuffle(entries)
    names = ["E", "B", "C", "D", "F"][:n_cars]
    for i, name in enumerate(names):
        entry = entries[i % 4]
        intent = rng.choice(("right", "straight", "left"))
        path = tuple(NodeId.parse(p) for p in ROUTES[entry][intent].split(","))
        pos = q(rng, 15.0, 140.0)
        size = rng.choice((2.0, 3.0, 4.0, 4.75))
        braking = q(rng, 0.0, 6.0)
        crossing_run = frozenset(n for n in path if n.is_crossing)
        cclm = frozenset()
        cres = frozenset()
        if rng.random() < 0.3:
            cclm = crossing_run
        elif rng.random() < 0.3:
            cres = crossing_run
        clm = frozenset()
        res = frozenset({path[0]})
        if not cclm and rng.random() < 0.2:
            clm = frozenset({_TOPO.net.lane_partner(path[0])})
        elif not cclm and rng.random() < 0.15:
            res = res | {_TOPO.net.lane_partner(path[0])}
        cars[name] = CarState(
            path=path,
            curr=0,
            pos=pos,
            speed=q(rng, 0.0, 15.0),
            size=size,
            braking=braking,
            heading_with_lane=rng.random() < 0.85,
            res=res,
            clm=clm,
            cclm=cclm,
            cres=cres,
        )
    ts = TrafficSnapshot(cars, _TOPO.net)
    mv = build_multiview(_TOPO, ts, "E", h_b=H_B, h_f=H_F)
    view = mv.views[rng.randrange(len(mv.views))]
    return ts, view


def random_formula(rng: random.Random, depth: int, car_vars):
    atoms = [
        lambda: TRUE,
        lambda: Free(),
        lambda: Cs(),
        lambda: Re(rng.choice(car_vars)),
        lambda: Cl(rng.choice(car_vars)),
        lambda: Dir(rng.choice(car_vars)),
        lambda: Eq(rng.choice(car_vars), rng.choice(car_vars)),
        lambda: LenCmp(rng.choice("<>="), q(rng, 0.25, 12.0)),
    ]
    if depth <= 1:
        return rng.choice(atoms)()
    op = rng.choice(("atom", "not", "and", "and", "hchop", "hchop", "vchop",
                     "exists"))
    if op == "atom":
        return rng.choice(atoms)()
    if op == "not":
        return Not(random_formula(rng, depth - 1, car_vars))
    if op == "and":
        return And(random_formula(rng, depth - 1, car_vars),
                   random_formula(rng, depth - 1, car_vars))
    if op == "hchop":
        return HChop(random_formula(rng, depth - 1, car_vars),
                     random_formula(rng, depth - 1, car_vars))
    if op == "vchop":
        return VChop(random_formula(rng, depth - 1, car_vars),
                     random_formula(rng, depth - 1, car_vars))
    return Exists("v", random_formula(rng, depth - 1, tuple(car_vars) + ("v",)))


def random_instance(rng: random.Random, max_depth: int = 4):
    ts, view = random_scene(rng)
    f = random_formula(rng, rng.randint(1, max_depth), tuple(sorted(ts.cars)))
    return ts, view, f
