"""Oriented rewriting of LOv circuits to canonical normal forms.

Rewrite layout: visible inputs on top, every source inserted at the bottom
before the first gate, every detector consuming the wires right below the
visible outputs after the last gate, and a final *connecting* wire that no
gate touches. ``preprocess`` brings any valid circuit into this layout.

Normal form semantics: ``x ↦ Σ_ℓ (⟨N(ℓ)| ⊗ id) T (x ⊗ f_ℓ)`` where ``f_ℓ`` is
the slice of the source with ``ℓ`` photons on the connecting wire and ``N``
is the iterated Cantor bijection.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple

import numpy as np

from .circuit import (
    BeamSplitter,
    Circuit,
    CircuitError,
    Detector,
    PhaseShifter,
    SemanticError,
    Source,
    Swap,
    validate,
)
from .euler import mod2pi, solve_e2_rhs
from .fock import (
    DualFockVector,
    EvalConfig,
    FockVector,
    apply_bs,
    apply_phase,
    as_dual,
    eval_circuit,
    format_state,
    probe_basis,
    tensor,
)
from .synthesis import (
    Tmn,
    TriangleClass,
    TriangleParams,
    classify,
    synthesize_triangle,
    triangle_to_circuit,
)
from .unitary import bs_matrix, matrix_of

ANGLE_EPS = 1e-9
AMP_EPS = 1e-9
ONE_EPS = 1e-12
DEFAULT_STEP_LIMIT = 10**6
TWO_PI = 2.0 * math.pi
HALF_PI = math.pi / 2
_GRID = (0.0, HALF_PI, math.pi, 1.5 * math.pi, TWO_PI)


class LayoutError(CircuitError):
    pass


class NotARedex(ValueError):
    pass


class StepLimitExceeded(RuntimeError):
    pass


class SoundnessError(AssertionError):
    pass


class RuleId(enum.Enum):
    """Rules in priority order: earlier members are tried first."""

    BS_MOD_2PI = "bs-mod-2pi"
    ZERO_BS = "zero-bs"
    MINUS_PI = "minus-pi"
    THETA_RANGE = "theta-range"
    ZERO_PHASE = "zero-phase"
    PHASE_FUSION = "phase-fusion"
    TOP_PHASE = "top-phase"
    PI_OVER_2 = "pi-over-2"
    PHASE_MOD_2PI = "phase-mod-2pi"
    E2 = "E2-rewrite"
    E3 = "E3-rewrite"
    SS = "ss"
    DD = "dd"
    S_B = "s-b"
    S_P = "s-p"
    B_D = "b-d"
    P_D = "p-d"
    WIRE_REMOVAL = "wire-removal"
    ZERO_F = "zero-f"
    ZERO_G = "zero-g"
    REMOVE_G = "remove-g"


class Loc(NamedTuple):
    """``col`` is a gate index (or slice label), ``row`` a wire (or -1)."""

    col: int
    row: int

    def __str__(self) -> str:
        return f"{self.col},{self.row}"


class RankTuple(NamedTuple):
    x1: int
    x2: int
    x3: int
    x4: int
    x5: int
    x6: int

    def __str__(self) -> str:
        return "(" + ",".join(str(x) for x in self) + ")"


# ---------------------------------------------------------------------------
# Cantor bijection


def cantor_pair(l1: int, l2: int) -> int:
    if l1 < 0 or l2 < 0:
        raise ValueError("pairing is defined on non-negative integers")
    s = l1 + l2
    return s * (s + 1) // 2 + l2


def cantor_unpair(x: int) -> tuple[int, int]:
    if x < 0:
        raise ValueError("pairing is defined on non-negative integers")
    w = (math.isqrt(8 * x + 1) - 1) // 2
    l2 = x - w * (w + 1) // 2
    return w - l2, l2


def pair_m(vec: Iterable[int]) -> int:
    """``N_m^{-1}``; the empty vector maps to 0."""
    vec = tuple(vec)
    if not vec:
        return 0
    acc = vec[0]
    for x in vec[1:]:
        acc = cantor_pair(acc, x)
    return acc


def unpair_m(x: int, m: int) -> tuple[int, ...] | None:
    """``N_m``; for ``m = 0`` only ``x = 0`` has an image, otherwise ``None``."""
    if m == 0:
        return () if x == 0 else None
    out: list[int] = []
    for _ in range(m - 1):
        x, last = cantor_unpair(x)
        out.append(last)
    out.append(x)
    return tuple(reversed(out))


# ---------------------------------------------------------------------------
# angles


def snap(x: float) -> float:
    for g in _GRID:
        if abs(x - g) < ANGLE_EPS:
            return g
    return x


def _in(x: float, lo: float, hi: float, closed: bool) -> bool:
    return lo <= x <= hi if closed else lo <= x < hi


def _bs(w: int, th: float) -> BeamSplitter:
    return BeamSplitter(w, snap(th))


def _ps(w: int, ph: float) -> PhaseShifter:
    return PhaseShifter(w, snap(ph))


# ---------------------------------------------------------------------------
# ranking


def ranking(c: Circuit) -> RankTuple:
    seq = c.sequence()
    width = max(c.widths())
    x1 = x2 = x5 = x6 = 0
    for g in seq:
        if isinstance(g, BeamSplitter):
            x1 += width - 1 - g.wire
            th = g.theta
            x2 += (not _in(th, 0.0, HALF_PI, True)) + (not _in(th, 0.0, math.pi, False)) + (
                not _in(th, 0.0, TWO_PI, False)
            )
        elif isinstance(g, Source):
            x5 += 1
            x6 += len(g.state)
        elif isinstance(g, Detector):
            x5 += 1
            x6 += 2 * len(g.effect) - _c3(g.effect)

    depth = [0] * c.n_out
    nxt: list[str | None] = [None] * c.n_out
    x3 = 0
    for g in reversed(seq):
        if isinstance(g, BeamSplitter):
            w = g.wire
            d = 1 + max(depth[w], depth[w + 1])
            depth[w] = depth[w + 1] = d
            nxt[w], nxt[w + 1] = "top", "bot"
        elif isinstance(g, PhaseShifter):
            w = g.wire
            weight = 4 if nxt[w] == "top" else (3 if not 0.0 <= g.phi < TWO_PI else 2)
            x3 += weight * 9 ** depth[w]
            nxt[w] = "ps"
        elif isinstance(g, Swap):
            w = g.wire
            depth[w], depth[w + 1] = depth[w + 1], depth[w]
            nxt[w] = nxt[w + 1] = "swap"
        elif isinstance(g, Source):
            del depth[g.wire : g.wire + g.state.modes]
            del nxt[g.wire : g.wire + g.state.modes]
        elif isinstance(g, Detector):
            k = g.effect.modes
            depth[g.wire : g.wire] = [0] * k
            nxt[g.wire : g.wire] = [None] * k

    # lanes: (born at a source, touched by a gate)
    lanes = [(False, False)] * c.n_in
    x4 = 0
    for g in seq:
        if isinstance(g, Source):
            lanes[g.wire : g.wire] = [(True, False)] * g.state.modes
        elif isinstance(g, Detector):
            k = g.effect.modes
            x4 += sum(1 for born, touched in lanes[g.wire : g.wire + k] if born and not touched)
            del lanes[g.wire : g.wire + k]
        else:
            for w in range(g.wire, g.wire + g.n_consumed):
                lanes[w] = (lanes[w][0], True)
    return RankTuple(x1, x2, x3, x4, x5, x6)


def _c3(g: FockVector) -> int:
    rows = g.modes - 1
    return sum(1 for occ, a in g.items() if unpair_m(occ[-1], rows) == occ[:-1] and abs(a - 1.0) <= ONE_EPS)


# ---------------------------------------------------------------------------
# preprocessing


def _swap_gadget(p: int) -> list:
    return [BeamSplitter(p, HALF_PI), PhaseShifter(p, 1.5 * math.pi), PhaseShifter(p + 1, 1.5 * math.pi)]


def preprocess(c: Circuit) -> Circuit:
    """Equivalent circuit in rewrite layout, with one fresh connecting wire.

    Swaps of the input only relabel wires; swaps needed to make beam
    splitter partners adjacent are emitted as ``BS(π/2)`` plus two phases.
    """
    rep = validate(c)
    if not rep.ok:
        raise SemanticError(rep.violations[0].kind + ": " + rep.violations[0].message)
    n = c.n_in
    alive = list(range(n))
    nid = n
    sources: list[tuple[FockVector, list[int]]] = []
    dets: list[tuple[DualFockVector, list[int]]] = []
    events: list[tuple] = []
    for g in c.sequence():
        if isinstance(g, PhaseShifter):
            events.append(("ps", g.phi, alive[g.wire]))
        elif isinstance(g, BeamSplitter):
            events.append(("bs", g.theta, alive[g.wire], alive[g.wire + 1]))
        elif isinstance(g, Swap):
            alive[g.wire], alive[g.wire + 1] = alive[g.wire + 1], alive[g.wire]
        elif isinstance(g, Source):
            ids = list(range(nid, nid + g.state.modes))
            nid += g.state.modes
            alive[g.wire : g.wire] = ids
            sources.append((g.state, ids))
        else:
            k = g.effect.modes
            dets.append((as_dual(g.effect), alive[g.wire : g.wire + k]))
            del alive[g.wire : g.wire + k]
    cid = nid
    arr = list(range(n)) + [i for _, ids in sources for i in ids] + [cid]
    gates: list = []

    def swap_at(p: int) -> None:
        gates.extend(_swap_gadget(p))
        arr[p], arr[p + 1] = arr[p + 1], arr[p]

    for ev in events:
        if ev[0] == "ps":
            gates.append(PhaseShifter(arr.index(ev[2]), ev[1]))
            continue
        _, th, u, v = ev
        while arr.index(v) != arr.index(u) + 1:
            pv, pu = arr.index(v), arr.index(u)
            swap_at(pv - 1 if pv > pu else pv)
        gates.append(BeamSplitter(arr.index(u), th))
    target = alive + [i for _, ids in dets for i in ids] + [cid]
    for p, ident in enumerate(target):
        q = arr.index(ident)
        while q > p:
            swap_at(q - 1)
            q -= 1

    cols: list[tuple] = []
    width = n
    for state, _ in sources:
        cols.append((Source(width, state),))
        width += state.modes
    cols.append((Source(width, FockVector.basis((0,))),))
    cols.extend((g,) for g in gates)
    m = c.n_out
    for eff, _ in dets:
        cols.append((Detector(m, eff),))
    cols.append((Detector(m, as_dual(FockVector.basis((0,)))),))
    return Circuit(n, m, tuple(cols))


# ---------------------------------------------------------------------------
# rewrite state


_VAC = FockVector.basis((0,))


@dataclass(frozen=True)
class _State:
    n: int
    m: int
    gates: tuple
    sources: tuple
    detectors: tuple
    implicit: bool = False

    @property
    def width(self) -> int:
        return self.n + sum(s.modes for s in self.sources)

    def with_(self, **kw) -> _State:
        d = dict(n=self.n, m=self.m, gates=self.gates, sources=self.sources, detectors=self.detectors, implicit=self.implicit)
        d.update(kw)
        return _State(**d)


def _to_state(c: Circuit) -> _State:
    seq = c.sequence()
    i = 0
    width = c.n_in
    sources: list[FockVector] = []
    while i < len(seq) and isinstance(seq[i], Source):
        if seq[i].wire != width:
            raise LayoutError("sources must be inserted at the bottom before the first gate")
        sources.append(seq[i].state)
        width += seq[i].state.modes
        i += 1
    gates: list = []
    while i < len(seq) and isinstance(seq[i], (PhaseShifter, BeamSplitter, Swap)):
        g = seq[i]
        if isinstance(g, Swap):
            gates.extend(_swap_gadget(g.wire))
        elif isinstance(g, BeamSplitter):
            gates.append(_bs(g.wire, g.theta))
        else:
            gates.append(_ps(g.wire, g.phi))
        i += 1
    dets: list[DualFockVector] = []
    while i < len(seq) and isinstance(seq[i], Detector):
        if seq[i].wire != c.n_out:
            raise LayoutError("detectors must consume the wires right below the visible outputs")
        dets.append(as_dual(seq[i].effect))
        i += 1
    if i < len(seq):
        raise LayoutError("source or detector inside the gate region")
    implicit = not sources and not dets
    if implicit:
        sources, dets = [_VAC], [as_dual(_VAC)]
        width += 1
    elif not sources or not dets:
        raise LayoutError("rewrite layout needs a connecting wire from a source to a detector")
    last = width - 1
    if last < max(c.n_in, c.n_out):
        raise LayoutError("last wire must be an ancilla on both sides")
    for g in gates:
        if g.wire + g.n_consumed - 1 >= last:
            raise LayoutError("a gate touches the connecting wire")
    return _State(c.n_in, c.n_out, tuple(gates), tuple(sources), tuple(dets), implicit)


def _to_circuit(st: _State) -> Circuit:
    sources, dets = st.sources, st.detectors
    if st.implicit and len(sources) == 1 and len(dets) == 1 and sources[0] == _VAC and dets[0] == as_dual(_VAC):
        return Circuit(st.n, st.m, tuple((g,) for g in st.gates))
    cols: list[tuple] = []
    width = st.n
    for s in sources:
        cols.append((Source(width, s),))
        width += s.modes
    cols.extend((g,) for g in st.gates)
    for d in dets:
        cols.append((Detector(st.m, d),))
    return Circuit(st.n, st.m, tuple(cols))


def _wires(g) -> range:
    return range(g.wire, g.wire + g.n_consumed)


def _links(gates: tuple, width: int) -> tuple[list[dict], list[dict]]:
    """Per gate and wire, the index of the previous and next gate (-1 at a boundary)."""
    last = [-1] * width
    prev: list[dict] = []
    nxt: list[dict] = [dict() for _ in gates]
    for i, g in enumerate(gates):
        p = {}
        for w in _wires(g):
            p[w] = last[w]
            if last[w] >= 0:
                nxt[last[w]][w] = i
            last[w] = i
        prev.append(p)
    for i, g in enumerate(gates):
        for w in _wires(g):
            nxt[i].setdefault(w, -1)
    return prev, nxt


def _rebuild(gates: tuple, remove: Iterable[int] = (), before: dict[int, list] | None = None) -> tuple:
    before = before or {}
    remove = set(remove)
    out: list = []
    for i, g in enumerate(gates):
        out.extend(before.get(i, ()))
        if i not in remove:
            out.append(g)
    out.extend(before.get(len(gates), ()))
    return tuple(out)


class _Ctx:
    """Lazily computed wiring of a state, shared by the rule matchers."""

    def __init__(self, st: _State) -> None:
        self.st = st
        self.prev, self.next = _links(st.gates, st.width)

    def walk(self, i: int, w: int) -> int:
        """First non-phase gate on wire ``w`` after gate ``i``."""
        j = self.next[i][w]
        while j >= 0 and isinstance(self.st.gates[j], PhaseShifter):
            j = self.next[j][w]
        return j


def _sorted(locs: list[Loc]) -> list[Loc]:
    return sorted(locs, key=lambda l: (l.row, l.col))


# ---------------------------------------------------------------------------
# gate rules


def _gate_locs(ctx: _Ctx, kind: type, pred: Callable[[int, object], bool]) -> list[Loc]:
    return _sorted([Loc(i, g.wire) for i, g in enumerate(ctx.st.gates) if isinstance(g, kind) and pred(i, g)])


def _find_bs_mod(ctx):
    return _gate_locs(ctx, BeamSplitter, lambda i, g: not 0.0 <= g.theta < TWO_PI)


def _apply_bs_mod(st, loc):
    g = st.gates[loc.col]
    return st.with_(gates=_rebuild(st.gates, [loc.col], {loc.col: [_bs(g.wire, mod2pi(g.theta))]}))


def _find_zero_bs(ctx):
    return _gate_locs(ctx, BeamSplitter, lambda i, g: g.theta == 0.0)


def _apply_remove(st, loc):
    return st.with_(gates=_rebuild(st.gates, [loc.col]))


def _find_minus_pi(ctx):
    return _gate_locs(ctx, BeamSplitter, lambda i, g: math.pi <= g.theta < TWO_PI)


def _apply_minus_pi(st, loc):
    g = st.gates[loc.col]
    w = g.wire
    new = [_bs(w, g.theta - math.pi), _ps(w, math.pi), _ps(w + 1, math.pi)]
    return st.with_(gates=_rebuild(st.gates, [loc.col], {loc.col: new}))


def _find_theta_range(ctx):
    return _gate_locs(ctx, BeamSplitter, lambda i, g: HALF_PI < g.theta < math.pi)


def _apply_theta_range(st, loc):
    # B(θ) = P_bot(π) B(π-θ) P_top(π)
    g = st.gates[loc.col]
    w = g.wire
    new = [_ps(w, math.pi), _bs(w, math.pi - g.theta), _ps(w + 1, math.pi)]
    return st.with_(gates=_rebuild(st.gates, [loc.col], {loc.col: new}))


def _find_zero_phase(ctx):
    return _gate_locs(ctx, PhaseShifter, lambda i, g: g.phi == 0.0)


def _fusion_partner(ctx, i, g):
    j = ctx.next[i][g.wire]
    return j if j >= 0 and isinstance(ctx.st.gates[j], PhaseShifter) else -1


def _find_fusion(ctx):
    return _gate_locs(ctx, PhaseShifter, lambda i, g: _fusion_partner(ctx, i, g) >= 0)


def _apply_fusion(st, loc, ctx):
    g = st.gates[loc.col]
    j = _fusion_partner(ctx, loc.col, g)
    fused = _ps(g.wire, mod2pi(g.phi + st.gates[j].phi))
    return st.with_(gates=_rebuild(st.gates, [loc.col, j], {j: [fused]}))


def _top_partner(ctx, i, g):
    j = ctx.next[i][g.wire]
    if j < 0:
        return -1
    h = ctx.st.gates[j]
    return j if isinstance(h, BeamSplitter) and h.wire == g.wire else -1


def _find_top_phase(ctx):
    return _gate_locs(ctx, PhaseShifter, lambda i, g: _top_partner(ctx, i, g) >= 0)


def _e2_gates(w: int, u: np.ndarray) -> list:
    r = solve_e2_rhs(u)
    out = []
    if snap(r.beta1) not in (0.0, TWO_PI):
        out.append(_ps(w + 1, r.beta1))
    if snap(r.beta2) != 0.0:
        out.append(_bs(w, r.beta2))
    if snap(r.beta0) not in (0.0, TWO_PI):
        out.append(_ps(w, r.beta0))
    if snap(r.beta3) not in (0.0, TWO_PI):
        out.append(_ps(w + 1, r.beta3))
    return out


def _apply_top_phase(st, loc, ctx):
    g = st.gates[loc.col]
    j = _top_partner(ctx, loc.col, g)
    u = bs_matrix(st.gates[j].theta) @ np.diag([np.exp(1j * g.phi), 1.0])
    return st.with_(gates=_rebuild(st.gates, [loc.col, j], {j: _e2_gates(g.wire, u)}))


def _pi2_partner(ctx, j, g):
    if g.theta != HALF_PI:
        return -1
    i = ctx.next[j][g.wire]
    return i if i >= 0 and isinstance(ctx.st.gates[i], PhaseShifter) else -1


def _find_pi_over_2(ctx):
    return _gate_locs(ctx, BeamSplitter, lambda j, g: _pi2_partner(ctx, j, g) >= 0)


def _apply_pi_over_2(st, loc, ctx):
    # P_top(φ) B(π/2) = B(π/2) P_bot(φ)
    g = st.gates[loc.col]
    i = _pi2_partner(ctx, loc.col, g)
    new = [_ps(g.wire + 1, st.gates[i].phi), g]
    return st.with_(gates=_rebuild(st.gates, [i, loc.col], {loc.col: new}))


def _find_phase_mod(ctx):
    return _gate_locs(ctx, PhaseShifter, lambda i, g: not 0.0 <= g.phi < TWO_PI)


def _apply_phase_mod(st, loc):
    g = st.gates[loc.col]
    return st.with_(gates=_rebuild(st.gates, [loc.col], {loc.col: [_ps(g.wire, mod2pi(g.phi))]}))


def _segment_phases(ctx, i: int, w: int, stop: int) -> list[int]:
    out = []
    j = ctx.next[i][w]
    while j != stop:
        out.append(j)
        j = ctx.next[j][w]
    return out


def _block_matrix(gates: tuple, idx: list[int], w: int, size: int) -> np.ndarray:
    u = np.eye(size, dtype=complex)
    for i in sorted(idx):
        g = gates[i]
        k = g.wire - w
        if isinstance(g, PhaseShifter):
            u[k, :] *= np.exp(1j * g.phi)
        else:
            u[k : k + 2, :] = bs_matrix(g.theta) @ u[k : k + 2, :]
    return u


def _e2_match(ctx, a, g):
    c = ctx.walk(a, g.wire)
    if c < 0 or c != ctx.walk(a, g.wire + 1):
        return None
    h = ctx.st.gates[c]
    if not isinstance(h, BeamSplitter) or h.wire != g.wire:
        return None
    return [a, c] + _segment_phases(ctx, a, g.wire, c) + _segment_phases(ctx, a, g.wire + 1, c)


def _find_e2(ctx):
    return _gate_locs(ctx, BeamSplitter, lambda i, g: _e2_match(ctx, i, g) is not None)


def _apply_e2(st, loc, ctx):
    g = st.gates[loc.col]
    block = _e2_match(ctx, loc.col, g)
    u = _block_matrix(st.gates, block, g.wire, 2)
    return st.with_(gates=_rebuild(st.gates, block, {max(block): _e2_gates(g.wire, u)}))


def _e3_match(ctx, a, g):
    w = g.wire
    gates = ctx.st.gates
    b = ctx.walk(a, w + 1)
    if b < 0 or not isinstance(gates[b], BeamSplitter) or gates[b].wire != w + 1:
        return None
    c = ctx.walk(a, w)
    if c < 0 or not isinstance(gates[c], BeamSplitter) or gates[c].wire != w:
        return None
    if ctx.walk(b, w + 1) != c:
        return None
    return (
        [a, b, c]
        + _segment_phases(ctx, a, w, c)
        + _segment_phases(ctx, a, w + 1, b)
        + _segment_phases(ctx, b, w + 1, c)
    )


def _find_e3(ctx):
    return _gate_locs(ctx, BeamSplitter, lambda i, g: _e3_match(ctx, i, g) is not None)


def _apply_e3(st, loc, ctx):
    g = st.gates[loc.col]
    w = g.wire
    block = set(_e3_match(ctx, loc.col, g))
    lo, hi = min(block), max(block)
    u = _block_matrix(st.gates, sorted(block), w, 3)
    t = synthesize_triangle(u)
    new = [_bs(h.wire + w, h.theta) if isinstance(h, BeamSplitter) else _ps(h.wire + w, h.phi) for h in triangle_to_circuit(t).sequence()]
    # gates between the block's ends that depend on it move after the new block
    tainted: set[int] = set()
    ahead, behind = [], []
    for i in range(lo, hi + 1):
        h = st.gates[i]
        ws = set(_wires(h))
        if i in block:
            tainted |= ws
        elif ws & tainted:
            tainted |= ws
            behind.append(h)
        else:
            ahead.append(h)
    gates = st.gates[:lo] + tuple(ahead) + tuple(new) + tuple(behind) + st.gates[hi + 1 :]
    return st.with_(gates=gates)


# ---------------------------------------------------------------------------
# source and detector rules


def _find_ss(ctx):
    return [Loc(0, ctx.st.n)] if len(ctx.st.sources) >= 2 else []


def _apply_ss(st, loc):
    s = st.sources
    return st.with_(sources=(tensor(s[0], s[1]),) + s[2:])


def _find_dd(ctx):
    return [Loc(0, ctx.st.m)] if len(ctx.st.detectors) >= 2 else []


def _apply_dd(st, loc):
    d = st.detectors
    return st.with_(detectors=(as_dual(tensor(d[0], d[1])),) + d[2:])


def _single(st: _State) -> bool:
    return len(st.sources) == 1 and len(st.detectors) == 1


def _from_source(ctx, i, g):
    return _single(ctx.st) and g.wire >= ctx.st.n and all(ctx.prev[i][w] < 0 for w in _wires(g))


def _to_detector(ctx, i, g):
    return _single(ctx.st) and g.wire >= ctx.st.m and all(ctx.next[i][w] < 0 for w in _wires(g))


def _find_s_b(ctx):
    return _gate_locs(ctx, BeamSplitter, lambda i, g: _from_source(ctx, i, g))


def _find_s_p(ctx):
    return _gate_locs(ctx, PhaseShifter, lambda i, g: _from_source(ctx, i, g))


def _find_b_d(ctx):
    return _gate_locs(ctx, BeamSplitter, lambda i, g: _to_detector(ctx, i, g))


def _find_p_d(ctx):
    return _gate_locs(ctx, PhaseShifter, lambda i, g: _to_detector(ctx, i, g))


def _absorb(v: FockVector, g, at: int) -> FockVector:
    if isinstance(g, BeamSplitter):
        return apply_bs(g.theta, g.wire - at, v)
    return apply_phase(g.phi, g.wire - at, v)


def _apply_s_gate(st, loc):
    g = st.gates[loc.col]
    f = _absorb(st.sources[0], g, st.n)
    return st.with_(gates=_rebuild(st.gates, [loc.col]), sources=(f,))


def _apply_gate_d(st, loc):
    # Fock-space beam splitter and phase matrices are symmetric, so a bra absorbs them like a ket.
    g = st.gates[loc.col]
    d = as_dual(_absorb(st.detectors[0], g, st.m))
    return st.with_(gates=_rebuild(st.gates, [loc.col]), detectors=(d,))


def _idle_wires(st: _State) -> list[int]:
    used = set()
    for g in st.gates:
        used.update(_wires(g))
    return [w for w in range(max(st.n, st.m), st.width - 1) if w not in used]


def _find_wire_removal(ctx):
    if not _single(ctx.st):
        return []
    return [Loc(0, w) for w in _idle_wires(ctx.st)]


def _merge_wire(v: FockVector, pos: int) -> list:
    return [(o[:pos] + o[pos + 1 : -1] + (cantor_pair(o[pos], o[-1]),), a) for o, a in v.items()]


def _apply_wire_removal(st, loc):
    w = loc.row
    f, g = st.sources[0], st.detectors[0]
    f2 = FockVector(f.modes - 1, _merge_wire(f, w - st.n))
    g2 = DualFockVector(g.modes - 1, _merge_wire(g, w - st.m))
    gates = tuple(type(h)(h.wire - 1, *_angle(h)) if h.wire > w else h for h in st.gates)
    return st.with_(gates=gates, sources=(f2,), detectors=(g2,))


def _angle(h) -> tuple[float]:
    return (h.theta,) if isinstance(h, BeamSplitter) else (h.phi,)


def _slices(v: FockVector) -> dict[int, dict[tuple, complex]]:
    out: dict[int, dict[tuple, complex]] = {}
    for o, a in v.items():
        out.setdefault(o[-1], {})[o[:-1]] = a
    return out


def _find_zero_f(ctx):
    if not _single(ctx.st):
        return []
    gs = _slices(ctx.st.detectors[0])
    return [Loc(k, -1) for k in sorted(_slices(ctx.st.sources[0])) if k not in gs]


def _apply_zero_f(st, loc):
    f = st.sources[0]
    return st.with_(sources=(FockVector(f.modes, [(o, a) for o, a in f.items() if o[-1] != loc.col]),))


def _find_zero_g(ctx):
    if not _single(ctx.st):
        return []
    fs = _slices(ctx.st.sources[0])
    return [Loc(l, -1) for l in sorted(_slices(ctx.st.detectors[0])) if l not in fs]


def _apply_zero_g(st, loc):
    g = st.detectors[0]
    return st.with_(detectors=(DualFockVector(g.modes, [(o, a) for o, a in g.items() if o[-1] != loc.col]),))


def _canonical(g: FockVector) -> bool:
    return _c3(g) == len(g)


def _single_l(g: FockVector) -> list[int]:
    """Labels ``L`` where transferring ``Σ_ℓ ξ_ℓ ⟨N(L)|⟨ℓ|`` is sound and needed."""
    rows = g.modes - 1
    sl = _slices(g)
    out = []
    for L, slice_ in sl.items():
        key = unpair_m(L, rows)
        if key is None or set(slice_) != {key}:
            continue
        xi_l = slice_[key]
        others = any(l != L and key in s for l, s in sl.items())
        if abs(xi_l - 1.0) > ONE_EPS or others:
            out.append(L)
    return sorted(out)


def _find_remove_g(ctx):
    if not _single(ctx.st):
        return []
    g = ctx.st.detectors[0]
    if _canonical(g):
        return []
    single = _single_l(g)
    # -1 marks the batch transfer used when no single label qualifies
    return [Loc(L, -1) for L in single] if single else [Loc(-1, -1)]


def _apply_remove_g(st, loc):
    f, g = st.sources[0], st.detectors[0]
    rows = g.modes - 1
    fs, gs = _slices(f), _slices(g)
    if loc.col >= 0:
        L = loc.col
        key = unpair_m(L, rows)
        xi = {l: s[key] for l, s in gs.items() if key in s}
        f_terms = [(o, a) for o, a in f.items() if o[-1] != L]
        for l, x in xi.items():
            f_terms += [(occ + (L,), x * a) for occ, a in fs.get(l, {}).items()]
        g_terms = [(o, a) for o, a in g.items() if o[:-1] != key]
        g_terms.append((key + (L,), 1.0))
    else:
        by_row: dict[tuple, dict[int, complex]] = {}
        for o, a in g.items():
            by_row.setdefault(o[:-1], {})[o[-1]] = a
        f_terms, g_terms = [], []
        for row, coeffs in by_row.items():
            ell = pair_m(row)
            for k, x in coeffs.items():
                f_terms += [(occ + (ell,), x * a) for occ, a in fs.get(k, {}).items()]
            g_terms.append((row + (ell,), 1.0))
    return st.with_(sources=(FockVector(f.modes, f_terms),), detectors=(DualFockVector(g.modes, g_terms),))


_FIND = {
    RuleId.BS_MOD_2PI: _find_bs_mod,
    RuleId.ZERO_BS: _find_zero_bs,
    RuleId.MINUS_PI: _find_minus_pi,
    RuleId.THETA_RANGE: _find_theta_range,
    RuleId.ZERO_PHASE: _find_zero_phase,
    RuleId.PHASE_FUSION: _find_fusion,
    RuleId.TOP_PHASE: _find_top_phase,
    RuleId.PI_OVER_2: _find_pi_over_2,
    RuleId.PHASE_MOD_2PI: _find_phase_mod,
    RuleId.E2: _find_e2,
    RuleId.E3: _find_e3,
    RuleId.SS: _find_ss,
    RuleId.DD: _find_dd,
    RuleId.S_B: _find_s_b,
    RuleId.S_P: _find_s_p,
    RuleId.B_D: _find_b_d,
    RuleId.P_D: _find_p_d,
    RuleId.WIRE_REMOVAL: _find_wire_removal,
    RuleId.ZERO_F: _find_zero_f,
    RuleId.ZERO_G: _find_zero_g,
    RuleId.REMOVE_G: _find_remove_g,
}

_APPLY = {
    RuleId.BS_MOD_2PI: _apply_bs_mod,
    RuleId.ZERO_BS: _apply_remove,
    RuleId.MINUS_PI: _apply_minus_pi,
    RuleId.THETA_RANGE: _apply_theta_range,
    RuleId.ZERO_PHASE: _apply_remove,
    RuleId.PHASE_MOD_2PI: _apply_phase_mod,
    RuleId.SS: _apply_ss,
    RuleId.DD: _apply_dd,
    RuleId.S_B: _apply_s_gate,
    RuleId.S_P: _apply_s_gate,
    RuleId.B_D: _apply_gate_d,
    RuleId.P_D: _apply_gate_d,
    RuleId.WIRE_REMOVAL: _apply_wire_removal,
    RuleId.ZERO_F: _apply_zero_f,
    RuleId.ZERO_G: _apply_zero_g,
    RuleId.REMOVE_G: _apply_remove_g,
}

_APPLY_CTX = {
    RuleId.PHASE_FUSION: _apply_fusion,
    RuleId.TOP_PHASE: _apply_top_phase,
    RuleId.PI_OVER_2: _apply_pi_over_2,
    RuleId.E2: _apply_e2,
    RuleId.E3: _apply_e3,
}


def _find(st: _State) -> tuple[RuleId, Loc] | None:
    ctx = _Ctx(st)
    for rule in RuleId:
        locs = _FIND[rule](ctx)
        if locs:
            return rule, locs[0]
    return None


def _apply(st: _State, rule: RuleId, loc: Loc, ctx: _Ctx | None = None) -> _State:
    if rule in _APPLY_CTX:
        return _APPLY_CTX[rule](st, loc, ctx or _Ctx(st))
    return _APPLY[rule](st, loc)


def find_redex(c: Circuit) -> tuple[RuleId, Loc] | None:
    """First redex of a circuit in rewrite layout, by rule priority then position."""
    return _find(_to_state(c))


def redexes(c: Circuit, rule: RuleId) -> list[Loc]:
    return _FIND[rule](_Ctx(_to_state(c)))


def apply_rule(c: Circuit, rule: RuleId, loc: Loc | tuple[int, int], *, debug: bool = False) -> Circuit:
    st = _to_state(c)
    ctx = _Ctx(st)
    loc = Loc(*loc)
    if loc not in _FIND[rule](ctx):
        raise NotARedex(f"{rule.value} does not match at {loc}")
    out = _to_circuit(_apply(st, rule, loc, ctx))
    if debug:
        check_step(c, out)
    return out


def semantic_residual(c1: Circuit, c2: Circuit, photons: int = 4) -> float:
    cfg = EvalConfig()
    worst = 0.0
    for occ in probe_basis(c1.n_in, photons):
        v = FockVector.basis(occ)
        worst = max(worst, eval_circuit(c1, v, cfg).distance(eval_circuit(c2, v, cfg)))
    return worst


def check_step(before: Circuit, after: Circuit, photons: int = 4) -> None:
    res = semantic_residual(before, after, photons)
    if not res < 1e-9:
        raise SoundnessError(f"rewrite step changed the semantics (residual {res:.3g})")


# ---------------------------------------------------------------------------
# normal forms


@dataclass(frozen=True)
class NormalForm:
    n: int
    m: int
    n_anc: int
    m_anc: int
    triangle: TriangleParams
    f: FockVector = field(compare=False)

    @property
    def K(self) -> tuple[int, ...]:
        return tuple(sorted({o[-1] for o in self.f}))

    @property
    def g(self) -> DualFockVector:
        return DualFockVector(self.m_anc + 1, {unpair_m(l, self.m_anc) + (l,): 1.0 for l in self.K})

    @property
    def alpha(self) -> complex | None:
        return self.f[(0,)] if self.n_anc == 0 and self.m_anc == 0 else None

    def classification(self) -> TriangleClass:
        return classify(self.triangle, self.n, self.n_anc, self.m, self.m_anc)


@dataclass(frozen=True)
class ZeroForm:
    n: int
    m: int


def render(nf: NormalForm | ZeroForm) -> Circuit:
    if isinstance(nf, ZeroForm):
        cols: list[tuple] = [(Source(nf.n, _VAC),), (Detector(nf.n, as_dual(FockVector.basis((1,)))),)]
        if nf.n:
            cols.append((Detector(0, as_dual(FockVector.basis((0,) * nf.n))),))
        if nf.m:
            cols.append((Source(0, FockVector.basis((0,) * nf.m)),))
        return Circuit(nf.n, nf.m, tuple(cols))
    core = triangle_to_circuit(nf.triangle)
    cols = [(Source(nf.n, nf.f),)] + list(core.columns) + [(Detector(nf.m, nf.g),)]
    return Circuit(nf.n, nf.m, tuple(cols))


def _package(st: _State) -> NormalForm | ZeroForm:
    f = st.sources[0] if len(st.sources) == 1 else None
    if f is None or len(st.detectors) != 1:
        raise SoundnessError("irreducible circuit still has several sources or detectors")
    if f.is_zero() or st.detectors[0].is_zero():
        return ZeroForm(st.n, st.m)
    g = st.detectors[0]
    if not _canonical(g) or set(_slices(g)) != set(_slices(f)):
        raise SoundnessError("irreducible detector is not canonical")
    width = st.width - 1
    core = Circuit(width, width, tuple((h,) for h in st.gates))
    t = synthesize_triangle(matrix_of(core))
    return NormalForm(st.n, st.m, width - st.n, width - st.m, t, f)


StepHook = Callable[[int, RuleId, Loc, Circuit], None]


def normalize_steps(
    c: Circuit,
    *,
    step_limit: int = DEFAULT_STEP_LIMIT,
    hook: StepHook | None = None,
    debug: bool = False,
) -> NormalForm | ZeroForm:
    """Normalize ``c``; ``hook`` sees every step with the circuit it produced."""
    st = _to_state(preprocess(c))
    prev = _to_circuit(st) if debug else None
    step = 0
    while True:
        ctx = _Ctx(st)
        found = None
        for rule in RuleId:
            locs = _FIND[rule](ctx)
            if locs:
                found = rule, locs[0]
                break
        if found is None:
            return _package(st)
        step += 1
        if step > step_limit:
            raise StepLimitExceeded(f"no normal form after {step_limit} steps")
        st = _apply(st, found[0], found[1], ctx)
        if hook is not None or debug:
            cur = _to_circuit(st)
            if debug:
                check_step(prev, cur)
                prev = cur
            if hook is not None:
                hook(step, found[0], found[1], cur)


def normalize(c: Circuit, *, step_limit: int = DEFAULT_STEP_LIMIT, debug: bool = False) -> NormalForm | ZeroForm:
    return normalize_steps(c, step_limit=step_limit, debug=debug)


def trace_line(step: int, rule: RuleId, loc: Loc, c: Circuit) -> str:
    return f"step={step} rule={rule.value} loc={loc} rank={ranking(c)}"


def _phase_dist(a: float, b: float) -> float:
    x = abs(a - b) % TWO_PI
    return min(x, TWO_PI - x)


def nf_equal(a: NormalForm | ZeroForm, b: NormalForm | ZeroForm, angle_eps: float = ANGLE_EPS, amp_eps: float = AMP_EPS) -> bool:
    if isinstance(a, ZeroForm) or isinstance(b, ZeroForm):
        return a == b
    if (a.n, a.m, a.n_anc, a.m_anc) != (b.n, b.m, b.n_anc, b.m_anc):
        return False
    if a.triangle.n != b.triangle.n:
        return False
    for s, th in a.triangle.theta.items():
        if abs(th - b.triangle.theta[s]) > angle_eps:
            return False
    for s, ph in a.triangle.phi.items():
        if _phase_dist(ph, b.triangle.phi[s]) > angle_eps:
            return False
    return a.f.distance(b.f) <= amp_eps


def nf_difference(a: NormalForm | ZeroForm, b: NormalForm | ZeroForm) -> str | None:
    """Name of the first differing component, or ``None`` when equal."""
    if nf_equal(a, b):
        return None
    if isinstance(a, ZeroForm) != isinstance(b, ZeroForm):
        return "zero form"
    if isinstance(a, ZeroForm):
        return "arity"
    if (a.n_anc, a.m_anc) != (b.n_anc, b.m_anc):
        return "ancilla counts"
    if a.triangle.max_diff(b.triangle) > ANGLE_EPS:
        return "triangle angles"
    return "source state"


def nf_to_obj(nf: NormalForm | ZeroForm) -> dict:
    if isinstance(nf, ZeroForm):
        return {"kind": "zero", "n": nf.n, "m": nf.m}
    return {
        "kind": "normal",
        "n": nf.n,
        "m": nf.m,
        "n_anc": nf.n_anc,
        "m_anc": nf.m_anc,
        "T": nf.triangle.to_obj(),
        "f": format_state(nf.f),
        "K": list(nf.K),
        "g": format_state(nf.g),
    }
