"""Named protocol formulas, as ASTs and as direct interval checks.

The AST builders give the exact logic-level formulation of every check the
controllers use (reachable from concrete syntax as ``@ca``, ``@pc(c)``, ...).
The ``geom_*`` functions compute the same predicates straight from the
projected occupancy intervals; the controller engine and the safety monitor
call these on every tick, so they avoid chop search where the pattern allows
it.  ``test_formulas`` pins both routes against each other on randomized
snapshots.
"""

from __future__ import annotations

from typing import Optional

from .logic import (
    EPS,
    And,
    Cl,
    Cs,
    Dir,
    Eq,
    EvalContext,
    Exists,
    Formula,
    Free,
    LenCmp,
    Not,
    Re,
    SetDisjoint,
    TRUE,
    _context,
    _intersects_open,
    ands,
    chops,
    ors,
    somewhere,
)
from .params import ProtocolParams
from .snapshot import TrafficSnapshot
from .views import Kind, MultiView, View, car_fragments


def _fresh(taken: str) -> str:
    return "c" if taken != "c" else "c2"


def safe_formula(actor: str = "ego") -> Formula:
    """No other car's reservation overlaps the actor's anywhere."""
    v = _fresh(actor)
    return Not(Exists(v, And(Not(Eq(v, actor)), somewhere(And(Re(actor), Re(v))))))


def col_formula(actor: str = "ego") -> Formula:
    """Some other car's reservation overlaps the actor's."""
    v = _fresh(actor)
    return Exists(v, And(Not(Eq(v, actor)), somewhere(And(Re(actor), Re(v)))))


def pc_formula(c: str, actor: str = "ego") -> Formula:
    """Potential collision: the actor's claim meets c's reservation or claim."""
    return And(Not(Eq(c, actor)), somewhere(And(Cl(actor), ors(Re(c), Cl(c)))))


def oc_formula(c: str) -> Formula:
    """c reserves space on the crossing."""
    return somewhere(And(Re(c), Cs()))


def ol_formula() -> Formula:
    """Exactly one lane, with free space or some car on it (never zero lanes)."""
    v = "olc"
    return ors(chops(TRUE, Free(), TRUE), Exists(v, ors(Re(v), Cl(v))))


def ocac_formula(c: str, params: ProtocolParams, actor: str = "ego") -> Formula:
    """c approaches the crossing from the opposite side within d_c + max_se."""
    gap = ands(Not(somewhere(Cs())), Free(), LenCmp("<", params.d_c_prime))
    upper = chops(Cs(), gap, Re(c))
    from .logic import HChop, VChop

    return HChop(
        somewhere(VChop(ol_formula(), Re(actor))),
        And(somewhere(VChop(upper, ol_formula())), Dir(c)),
    )


def lc_formula(c: str) -> Formula:
    """c is mid lane change: its reservation covers both lanes at one stretch."""
    from .logic import VChop

    return somewhere(VChop(Re(c), Re(c)))


def ph_formula(c: str, params: ProtocolParams, actor: str = "ego") -> Formula:
    """c is a potential helper: on the crossing or approaching, not changing lanes."""
    return ands(
        Not(Eq(c, actor)),
        ors(oc_formula(c), ocac_formula(c, params, actor)),
        Not(lc_formula(c)),
    )


def ca_formula(params: ProtocolParams, actor: str = "ego") -> Formula:
    """A crossing lies ahead within d_c with only free space before it."""
    gap = ands(Free(), LenCmp("<", params.d_c), Not(somewhere(Cs())))
    return somewhere(chops(Re(actor), gap, Cs()))


def phinv_formula(c: str, cs_var: str, params: ProtocolParams) -> Formula:
    """Receiver-side helper check for a crossing request ``(c, cs_var)``.

    The magic variable ``csa`` must be bound to the receiver's own claimed
    plus reserved crossing segments when this is evaluated.
    """
    return ands(
        Not(Eq("ego", c)),
        ors(oc_formula("ego"), ca_formula(params)),
        Not(lc_formula("ego")),
        SetDisjoint("csa", cs_var),
    )


_BUILTINS = {
    "safe": (safe_formula, 0, 1),
    "col": (col_formula, 0, 1),
    "ca": (None, 0, 1),
    "pc": (None, 1, 2),
    "oc": (oc_formula, 1, 1),
    "ol": (ol_formula, 0, 0),
    "ocac": (None, 1, 2),
    "lc": (lc_formula, 1, 1),
    "ph": (None, 1, 2),
    "phinv": (None, 2, 2),
    "disjoint": (None, 2, 2),
}


def builtin(name: str, args: list, params: Optional[ProtocolParams]) -> Formula:
    """Resolve an @-builtin reference from the concrete syntax."""
    if name not in _BUILTINS:
        raise KeyError(name)
    builder, lo, hi = _BUILTINS[name]
    if not (lo <= len(args) <= hi):
        raise TypeError(f"takes {lo} to {hi} arguments, got {len(args)}")
    params = params or ProtocolParams()
    if name == "safe":
        return safe_formula(*args)
    if name == "col":
        return col_formula(*args)
    if name == "ca":
        return ca_formula(params, *args)
    if name == "pc":
        return pc_formula(*args)
    if name == "oc":
        return oc_formula(*args)
    if name == "ol":
        return ol_formula()
    if name == "ocac":
        c = args[0]
        return ocac_formula(c, params, *args[1:])
    if name == "lc":
        return lc_formula(*args)
    if name == "ph":
        return ph_formula(args[0], params, *args[1:])
    if name == "phinv":
        return phinv_formula(args[0], args[1], params)
    if name == "disjoint":
        return SetDisjoint(args[0], args[1])
    raise KeyError(name)


# ---------------------------------------------------------------------------
# direct interval checks


def view_context(ts: TrafficSnapshot, view: View, ground_truth: bool = False) -> EvalContext:
    return _context(ts, view, ground_truth)


def _res(ctx: EvalContext, lane: int, car: str):
    return ctx.by_key.get((lane, Kind.RESERVED, car), [])


def _clm(ctx: EvalContext, lane: int, car: str):
    return ctx.by_key.get((lane, Kind.CLAIMED, car), [])


def _overlap_pos(a, b) -> bool:
    i = j = 0
    while i < len(a) and j < len(b):
        lo = max(a[i][0], b[j][0])
        hi = min(a[i][1], b[j][1])
        if hi - lo > EPS:
            return True
        if a[i][1] < b[j][1]:
            i += 1
        else:
            j += 1
    return False


def geom_oc(ctx: EvalContext, car: str) -> bool:
    for lane in (0, 1):
        span = ctx.crossing_span.get(lane)
        if span and _overlap_pos(_res(ctx, lane, car), [span]):
            return True
    return False


def geom_col_pair(ctx: EvalContext, a: str, b: str) -> bool:
    if a == b:
        return False
    for lane in (0, 1):
        if _overlap_pos(_res(ctx, lane, a), _res(ctx, lane, b)):
            return True
    return False


def geom_lc(ctx: EvalContext, car: str) -> bool:
    return _overlap_pos(_res(ctx, 0, car), _res(ctx, 1, car))


def geom_pc(ctx: EvalContext, ego: str, c: str) -> bool:
    if c == ego:
        return False
    for lane in (0, 1):
        mine = _clm(ctx, lane, ego)
        if not mine:
            continue
        if _overlap_pos(mine, _res(ctx, lane, c)) or _overlap_pos(mine, _clm(ctx, lane, c)):
            return True
    return False


def geom_ca(ctx: EvalContext, ego: str, d_c: float) -> bool:
    for lane in (0, 1):
        span = ctx.crossing_span.get(lane)
        if span is None:
            continue
        start = span[0]
        for lo, hi in _res(ctx, lane, ego):
            if hi >= start - EPS:
                continue
            if start - hi < d_c - EPS and not _intersects_open(
                ctx.any_occ.get(lane, []), hi, start
            ):
                return True
    return False


def _gaps(intervals, lo_bound, hi_bound):
    """Maximal free stretches of [lo_bound, hi_bound] between the intervals."""
    out = []
    cursor = lo_bound
    for lo, hi in intervals:
        if lo > cursor:
            out.append((cursor, min(lo, hi_bound)))
        cursor = max(cursor, hi)
        if cursor >= hi_bound:
            break
    if cursor < hi_bound:
        out.append((cursor, hi_bound))
    return [(lo, hi) for lo, hi in out if hi - lo > EPS]


def _one_lane_slice_ok(ctx: EvalContext, lane: int, p_lo, p_hi, q_lo, q_hi) -> bool:
    """Can the one-lane condition hold on some [p, q], p in [p_lo, p_hi),
    q in (q_lo, q_hi]?  Either a free stretch fits inside the widest window
    or a single reservation/claim interval covers a valid [p, q] whole."""
    if p_lo >= p_hi - EPS or q_lo >= q_hi - EPS:
        return False
    a, b = ctx.extent
    window_lo, window_hi = max(p_lo, a), min(q_hi, b)
    for g_lo, g_hi in _gaps(ctx.any_occ.get(lane, []), window_lo, window_hi):
        if min(g_hi, window_hi) - max(g_lo, window_lo) > EPS:
            return True
    for (lane_i, _kind, _car), intervals in ctx.by_key.items():
        if lane_i != lane:
            continue
        for k_lo, k_hi in intervals:
            if max(k_lo, p_lo) < p_hi - EPS and k_hi > q_lo + EPS:
                return True
    return False


def geom_ocac(ts: TrafficSnapshot, view: View, ego: str, c: str,
              params: ProtocolParams) -> bool:
    """Direct form of the opposing-approacher pattern.

    On the upper lane: crossing cells, then a free stretch shorter than
    d_c + max_se, then c's perceived reservation, with c heading along its
    lane.  The lower lane must carry the ego reservation earlier on and
    satisfy the one-lane condition beside the pattern.
    """
    ctx = view_context(ts, view)
    if c == ego or c not in ctx.visible or not ctx.heading.get(c):
        return False
    span = ctx.crossing_span.get(1)
    if span is None:
        return False
    s1, t1 = span
    ego_intervals = _res(ctx, 0, ego)
    if not ego_intervals:
        return False
    min_lo = min(lo for lo, _ in ego_intervals)
    p_lo = max(s1, min_lo)  # the cs part starts after some ego reservation
    if p_lo >= t1 - EPS:
        return False
    for j1, j2 in _res(ctx, 1, c):
        if j1 <= t1 + EPS or j1 - t1 >= params.d_c_prime - EPS:
            continue
        if _intersects_open(ctx.any_occ.get(1, []), t1, j1):
            continue
        if _one_lane_slice_ok(ctx, 0, p_lo, t1, j1, j2):
            return True
    return False


def geom_ph(ts: TrafficSnapshot, view: View, ego: str, c: str,
            params: ProtocolParams) -> bool:
    if c == ego:
        return False
    ctx = view_context(ts, view)
    if geom_lc(ctx, c):
        return False
    return geom_oc(ctx, c) or geom_ocac(ts, view, ego, c, params)


# ---------------------------------------------------------------------------
# multi-view wrappers used by the controllers and the monitor
#
# Guards re-evaluate many times against one snapshot during a micro-step, so
# the per-car results are memoized for the snapshot's lifetime.

_SWEEP_CACHE: dict = {}


def _cached(ts, key, compute):
    entry = _SWEEP_CACHE.get(key)
    if entry is not None and entry[0] is ts:
        return entry[1]
    value = compute()
    if len(_SWEEP_CACHE) > 20000:
        _SWEEP_CACHE.clear()
    _SWEEP_CACHE[key] = (ts, value)
    return value


def pc_cars(ts: TrafficSnapshot, mv: MultiView, ego: str) -> set:
    """Cars in potential collision with the ego claim, in any view."""

    def compute():
        out = set()
        for view in mv.views:
            ctx = view_context(ts, view)
            for c in ctx.car_ids:
                if c != ego and c not in out and geom_pc(ctx, ego, c):
                    out.add(c)
        return out

    return _cached(ts, (id(ts), id(mv), ego, "pc"), compute)


def ph_cars(ts: TrafficSnapshot, mv: MultiView, ego: str,
            params: ProtocolParams) -> set:
    """Potential helpers for the ego manoeuvre, in any view."""

    def compute():
        out = set()
        for view in mv.views:
            for c in sorted(ts.cars):
                if c != ego and c not in out and geom_ph(ts, view, ego, c, params):
                    out.add(c)
        return out

    return _cached(ts, (id(ts), id(mv), ego, "ph"), compute)


def check_ca(ts: TrafficSnapshot, mv: MultiView, ego: str,
             params: ProtocolParams) -> bool:
    """Crossing-ahead, judged on the view aligned with the ego path."""
    if not mv.views:
        return False
    return _cached(
        ts, (id(ts), id(mv), ego, "ca"),
        lambda: geom_ca(view_context(ts, mv.views[0]), ego, params.d_c),
    )


def check_oc(ts: TrafficSnapshot, mv: MultiView, car: str) -> bool:
    return _cached(
        ts, (id(ts), id(mv), car, "oc"),
        lambda: any(geom_oc(view_context(ts, v), car) for v in mv.views),
    )


def check_lc(ts: TrafficSnapshot, mv: MultiView, car: str) -> bool:
    return _cached(
        ts, (id(ts), id(mv), car, "lc"),
        lambda: any(geom_lc(view_context(ts, v), car) for v in mv.views),
    )


def col_witness(ts: TrafficSnapshot, mv: MultiView, ego: str,
                ground_truth: bool = False) -> Optional[tuple]:
    """First (car, view index) whose reservation overlaps the ego's.

    Works straight off the per-car fragments: the monitor calls this for
    every car on every tick, so no full evaluation context is assembled.
    """

    def compute():
        for idx, view in enumerate(mv.views):
            frags = car_fragments(ts, view, ground_truth)
            mine = frags.get(ego)
            if mine is None:
                continue
            for lane_idx in (0, 1):
                ego_runs = mine.merged.get((lane_idx, Kind.RESERVED))
                if not ego_runs:
                    continue
                for c, frag in frags.items():
                    if c == ego:
                        continue
                    runs = frag.merged.get((lane_idx, Kind.RESERVED))
                    if runs and _overlap_pos(ego_runs, runs):
                        return (c, idx)
        return None

    return _cached(ts, (id(ts), id(mv), ego, "col", ground_truth), compute)
