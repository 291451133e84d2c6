"""Equivalence checking, the Ω/Δ operator harness, and axiom soundness checks."""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .circuit import BeamSplitter, Circuit, Detector, PhaseShifter, Source, Swap, shifted
from .euler import E3Lhs, solve_e2_lhs, solve_e2_rhs, solve_e3
from .fock import (
    DualFockVector,
    FockVector,
    apply_bs,
    apply_creation,
    apply_phase,
    as_dual,
    eval_circuit,
    probe_basis,
    tensor,
)
from .rewrite import NormalForm, ZeroForm, nf_difference, nf_equal, normalize
from .synthesis import NotTmn, Tmn, TriangleParams, Trec, classify, triangle_to_circuit
from .unitary import bs_matrix, matrix_of, random_unitary


class NotTrec(ValueError):
    pass


class CostGuard(ValueError):
    pass


class ArityMismatch(ValueError):
    pass


# ---------------------------------------------------------------------------
# sampled linear maps


@dataclass
class LinearMapSample:
    """A linear map ``F(n_in) -> F(n_out)`` known on the probe basis up to ``cutoff`` photons."""

    n_in: int
    n_out: int
    cutoff: int
    values: dict[tuple[int, ...], FockVector] = field(default_factory=dict)

    @staticmethod
    def from_function(fn: Callable[[FockVector], FockVector], n_in: int, n_out: int, cutoff: int) -> LinearMapSample:
        vals = {occ: fn(FockVector.basis(occ)) for occ in probe_basis(n_in, cutoff)}
        return LinearMapSample(n_in, n_out, cutoff, vals)

    @staticmethod
    def from_circuit(c: Circuit, cutoff: int) -> LinearMapSample:
        return LinearMapSample.from_function(lambda v: eval_circuit(c, v), c.n_in, c.n_out, cutoff)

    def __call__(self, v: FockVector) -> FockVector:
        out = FockVector.zero(self.n_out)
        for occ, a in v.items():
            if occ not in self.values:
                raise KeyError(f"{occ} lies outside the sampled probe basis")
            out = out + self.values[occ].scale(a)
        return out

    def entry(self, y: tuple[int, ...], x: tuple[int, ...]) -> complex:
        return self.values[tuple(x)][tuple(y)]

    def combine(self, terms: list[tuple[complex, LinearMapSample]]) -> LinearMapSample:
        vals = {}
        for occ in self.values:
            acc = FockVector.zero(self.n_out)
            for z, lm in terms:
                acc = acc + lm.values[occ].scale(z)
            vals[occ] = acc
        return LinearMapSample(self.n_in, self.n_out, self.cutoff, vals)

    def distance(self, other: LinearMapSample) -> float:
        if (self.n_in, self.n_out) != (other.n_in, other.n_out):
            raise ArityMismatch("maps have different arities")
        keys = set(self.values) & set(other.values)
        return max((self.values[k].distance(other.values[k]) for k in keys), default=0.0)


# ---------------------------------------------------------------------------
# Ω and Δ


def _core_with_ancillas(t: TriangleParams, n: int, m: int, i: tuple[int, ...], j: tuple[int, ...]) -> Circuit:
    cols: list[tuple] = []
    if i:
        cols.append((Source(n, FockVector.basis(i)),))
    cols.extend(triangle_to_circuit(t).columns)
    if j:
        cols.append((Detector(m, as_dual(FockVector.basis(j))),))
    return Circuit(n, m, tuple(cols))


def omega(t: TriangleParams, split: Tmn, i, j, cutoff: int = 4) -> LinearMapSample:
    """``(id ⊗ ⟨j|) ⟦t⟧ (id ⊗ |i⟩)`` sampled on inputs with at most ``cutoff`` photons."""
    n, n_anc, m, m_anc = split.n, split.n_anc, split.m, split.m_anc
    cls = classify(t, n, n_anc, m, m_anc)
    if not isinstance(cls, Tmn) and not (n_anc == 0 and m_anc == 0 and cls.__class__.__name__ == "PlainT"):
        raise NotTmn(f"triangle is not a Tmn for the split {n}+{n_anc} -> {m}+{m_anc}: {cls}")
    i, j = tuple(i), tuple(j)
    if len(i) != n_anc or len(j) != m_anc:
        raise ValueError("ancilla occupation vectors have the wrong length")
    return LinearMapSample.from_circuit(_core_with_ancillas(t, n, m, i, j), cutoff)


def creation_power(v: FockVector, s) -> FockVector:
    """``Λ^s v = Π_j (a†_j)^{s_j} v`` on the first ``len(s)`` modes."""
    for mode, k in enumerate(s):
        for _ in range(k):
            v = apply_creation(mode, v)
    return v


def delta(t: TriangleParams, split: Tmn, s, tvec, cutoff: int = 4) -> LinearMapSample:
    """``Δ^{s,t} = Λ^s ∘ Ω^{0,t}`` for a T_rec split (visible-out ``s``, visible-in ``t``)."""
    if not isinstance(classify(t, split.n, split.n_anc, split.m, split.m_anc), Trec):
        raise NotTrec("triangle is not a T_rec for the given split")
    s, tvec = tuple(s), tuple(tvec)
    if len(s) != split.m or len(tvec) != split.m_anc:
        raise ValueError("s must index the visible outputs and t the ancilla outputs")
    om = omega(t, split, (0,) * split.n_anc, tvec, cutoff)
    vals = {k: creation_power(v, s) for k, v in om.values.items()}
    return LinearMapSample(om.n_in, om.n_out, cutoff, vals)


def rev_lex_less(x, y) -> bool:
    """``x ≺ y`` comparing from the last component backwards."""
    for a, b in zip(reversed(tuple(x)), reversed(tuple(y))):
        if a != b:
            return a < b
    return False


def random_trec(rng: np.random.Generator, a: int, b: int) -> tuple[TriangleParams, Trec]:
    """A T_rec triangle on ``a + b`` wires: ``a`` visible inputs, ``b`` visible outputs.

    Only slots inside the ``b × a`` corner are populated, with angles kept away
    from the grid so every beam splitter there is nonzero.
    """
    t = TriangleParams.zeros(a + b)
    theta = {k: float(rng.uniform(0.2, 1.3)) for k in t.theta if k[0] <= b and k[1] <= a}
    phi = {k: float(rng.uniform(0.1, 6.1)) for k in t.phi if k[0] <= b and k[1] <= a}
    t = t.with_angles(theta, phi)
    split = classify(t, a, b, b, a)
    if not isinstance(split, Trec):
        raise NotTrec(f"generated triangle is not a T_rec: {split}")
    return t, split


def delta_threshold_violations(
    t: TriangleParams, split: Trec, max_component: int = 3, zero_tol: float = 1e-10, nonzero_tol: float = 1e-8
) -> list[str]:
    """Every ``(s, t, x, y)`` with components ≤ ``max_component`` breaking the threshold pattern.

    ``⟨y|Δ^{s,t}|x⟩`` must exceed ``nonzero_tol`` at ``(x, y) = (t, s)`` and
    stay below ``zero_tol`` when ``x ≺ t`` or ``y ≺ s`` in reverse-lex order.
    """
    grid_in = list(itertools.product(range(max_component + 1), repeat=split.n))
    grid_out = list(itertools.product(range(max_component + 1), repeat=split.m))
    cutoff = max_component * split.n
    bad: list[str] = []
    for tv in itertools.product(range(max_component + 1), repeat=split.m_anc):
        om = omega(t, split, (0,) * split.n_anc, tv, cutoff)
        for s in grid_out:
            for x in grid_in:
                out = creation_power(om(FockVector.basis(x)), s)
                for y in grid_out:
                    z = abs(out[y])
                    if x == tv and y == s:
                        if z <= nonzero_tol:
                            bad.append(f"s={s} t={tv}: diagonal entry {z:.3g}")
                    elif (rev_lex_less(x, tv) or rev_lex_less(y, s)) and z >= zero_tol:
                        bad.append(f"s={s} t={tv} x={x} y={y}: {z:.3g}")
    return bad


def lambda_commute_check(d: Circuit, u, cutoff: int = 4) -> float:
    """Residual of ``⟦D⟧ Λ^u = Π_j (Σ_i d_ij a†_i)^{u_j} ⟦D⟧`` on the probe basis."""
    u = tuple(u)
    if any(k > 3 for k in u) or cutoff > 8:
        raise CostGuard("lambda_commute_check limits u to components ≤ 3 and cutoff ≤ 8")
    mat = matrix_of(d)
    n = d.n_in
    if len(u) > n:
        raise ValueError("u is longer than the circuit width")
    worst = 0.0
    for occ in probe_basis(n, cutoff):
        x = FockVector.basis(occ)
        lhs = eval_circuit(d, creation_power(x, u))
        rhs = eval_circuit(d, x)
        for j, k in enumerate(u):
            for _ in range(k):
                acc = FockVector.zero(n)
                for i in range(n):
                    if abs(mat[i, j]) > 0:
                        acc = acc + apply_creation(i, rhs).scale(mat[i, j])
                rhs = acc
        worst = max(worst, lhs.distance(rhs))
    return worst


def slice_last_mode(v: FockVector) -> dict[int, FockVector]:
    """``v = Σ_k v_k ⊗ |k⟩``: the pieces ``v_k`` keyed by the last mode's occupation."""
    parts: dict[int, list] = {}
    for occ, a in v.items():
        parts.setdefault(occ[-1], []).append((occ[:-1], a))
    return {k: FockVector(v.modes - 1, terms) for k, terms in sorted(parts.items())}


def sum_of_diagrams_residual(d: Circuit, f: FockVector, g: FockVector, cutoff: int = 3) -> float:
    """Compare a source/detector pair sharing an idle wire with the sum over that wire's photon count.

    The left side plugs ``f`` (ancillas plus one extra wire) under ``d ⊗ id``
    and closes with ``g``; the right side is ``Σ_j`` of ``f_j → d → g_j`` with
    the extra wire gone.
    """
    a = f.modes - 1
    if a < 0 or g.modes != f.modes:
        raise ArityMismatch("f and g must share the same ancilla width plus one connecting wire")
    n = d.n_in - a
    if d.n_out != d.n_in or n < 0:
        raise ArityMismatch("d must be an LOpp circuit wide enough for the ancillas")
    body = tuple(tuple(g_ for g_ in col) for col in d.columns)
    lhs = Circuit(n, n, ((Source(n, f),), *body, (Detector(n, as_dual(g)),)))
    whole = LinearMapSample.from_circuit(lhs, cutoff)
    fs, gs = slice_last_mode(f), slice_last_mode(g)
    terms: list[tuple[complex, LinearMapSample]] = []
    for j in sorted(set(fs) & set(gs)):
        if fs[j].is_zero() or gs[j].is_zero():
            continue
        if a == 0:
            # scalar pieces: the term is ⟨g_j|f_j⟩ ⟦d⟧
            terms.append((complex(fs[j][()] * gs[j][()]), LinearMapSample.from_circuit(d, cutoff)))
            continue
        rhs = Circuit(n, n, ((Source(n, fs[j]),), *body, (Detector(n, as_dual(gs[j])),)))
        terms.append((1.0, LinearMapSample.from_circuit(rhs, cutoff)))
    return whole.distance(whole.combine(terms)) if terms else max(
        (v.norm() for v in whole.values.values()), default=0.0
    )


def bs_sector_error(theta: float, photons: int) -> float:
    """Unitarity defect of the beam splitter restricted to the ``photons``-photon sector."""
    from . import _kernels

    b = _kernels.bs_sector(photons, theta)
    return float(np.abs(b.conj().T @ b - np.eye(photons + 1)).max())


# ---------------------------------------------------------------------------
# equivalence


@dataclass(frozen=True)
class EquivalentNF:
    nf: NormalForm | ZeroForm


@dataclass(frozen=True)
class NumericMismatch:
    input: tuple[int, ...]
    delta: float


@dataclass(frozen=True)
class DistinctNF:
    witness: str
    mismatch: NumericMismatch | None = None


EquivVerdict = EquivalentNF | DistinctNF | NumericMismatch


def source_photons(c: Circuit) -> int:
    return sum(g.state.max_photons() for g in c.generators() if isinstance(g, Source))


def equiv(c1: Circuit, c2: Circuit, cutoff: int | None = None) -> EquivVerdict:
    if (c1.n_in, c1.n_out) != (c2.n_in, c2.n_out):
        raise ArityMismatch(f"{c1.n_in}->{c1.n_out} vs {c2.n_in}->{c2.n_out}")
    a, b = normalize(c1), normalize(c2)
    if nf_equal(a, b):
        return EquivalentNF(a)
    if cutoff is None:
        cutoff = max(source_photons(c1), source_photons(c2)) + 4
    mismatch = numeric_witness(c1, c2, cutoff)
    return DistinctNF(nf_difference(a, b) or "normal form", mismatch)


def numeric_witness(c1: Circuit, c2: Circuit, cutoff: int, tol: float = 1e-9) -> NumericMismatch | None:
    for occ in probe_basis(c1.n_in, cutoff):
        v = FockVector.basis(occ)
        d = eval_circuit(c1, v).distance(eval_circuit(c2, v))
        if d > tol:
            return NumericMismatch(occ, d)
    return None


# ---------------------------------------------------------------------------
# random instances


def _angle(rng: np.random.Generator, wide: bool = True) -> float:
    r = rng.random()
    if r < 0.1:
        return float(rng.choice([0.0, math.pi / 2, math.pi, 1.5 * math.pi]))
    if wide and r < 0.3:
        return float(rng.uniform(-2 * math.pi, 4 * math.pi))
    return float(rng.uniform(0.0, 2 * math.pi))


def random_state(rng: np.random.Generator, modes: int, support: int = 3, max_k: int = 2) -> FockVector:
    terms = {}
    while not terms:
        for _ in range(int(rng.integers(1, support + 1))):
            occ = tuple(int(x) for x in rng.integers(0, max_k + 1, size=modes))
            terms[occ] = complex(rng.normal(), rng.normal())
    return FockVector(modes, terms)


def random_circuit(
    rng: np.random.Generator,
    max_visible: int = 4,
    max_sources: int = 2,
    max_detectors: int = 2,
    support: int = 3,
    max_gates: int = 20,
) -> Circuit:
    """Valid circuit with interleaved sources, detectors and gates."""
    n = int(rng.integers(1, max_visible + 1))
    n_src = int(rng.integers(0, max_sources + 1))
    n_det = int(rng.integers(0, max_detectors + 1))
    n_gates = int(rng.integers(0, max_gates - n_src - n_det + 1))
    kinds = ["g"] * n_gates + ["s"] * n_src + ["d"] * n_det
    rng.shuffle(kinds)
    width = n
    seq: list = []
    for kind in kinds:
        if kind == "s":
            k = int(rng.integers(1, 3))
            seq.append(Source(int(rng.integers(0, width + 1)), random_state(rng, k, support)))
            width += k
        elif kind == "d":
            if width == 0:
                continue
            k = int(rng.integers(1, min(2, width) + 1))
            seq.append(Detector(int(rng.integers(0, width - k + 1)), as_dual(random_state(rng, k, support))))
            width -= k
        else:
            if width == 0:
                continue
            r = rng.random()
            if width >= 2 and r < 0.45:
                seq.append(BeamSplitter(int(rng.integers(0, width - 1)), _angle(rng)))
            elif width >= 2 and r < 0.55:
                seq.append(Swap(int(rng.integers(0, width - 1))))
            else:
                seq.append(PhaseShifter(int(rng.integers(0, width)), _angle(rng)))
    return Circuit.from_sequence(n, seq)


# ---------------------------------------------------------------------------
# axioms


FIG3_AXIOMS = ("p2pi", "swap", "p-p", "E2", "E3")
FIG4_AXIOMS = ("s0-0d", "zero", "ss", "s-b", "s-0d", "s-p", "dd", "b-d", "s0-d", "p-d", "h2")
ALL_AXIOMS = FIG3_AXIOMS + FIG4_AXIOMS


def _seq(n: int, gens: list) -> Circuit:
    return Circuit.from_sequence(n, gens)


def _rand_e3_lhs(rng) -> E3Lhs:
    return E3Lhs(*(float(x) for x in rng.uniform(0, 2 * math.pi, size=3)))


def axiom_instance(axiom: str, rng: np.random.Generator) -> tuple[Circuit, Circuit]:
    """A random ``(LHS, RHS)`` pair for one axiom, padded with idle wires where useful."""
    phi = float(rng.uniform(0, 2 * math.pi))
    if axiom == "p2pi":
        k = int(rng.integers(-2, 3)) or 1
        return _seq(1, [PhaseShifter(0, phi + 2 * math.pi * k)]), _seq(1, [PhaseShifter(0, phi)])
    if axiom == "swap":
        lhs = _seq(2, [Swap(0)])
        rhs = _seq(2, [BeamSplitter(0, math.pi / 2), PhaseShifter(0, 1.5 * math.pi), PhaseShifter(1, 1.5 * math.pi)])
        return lhs, rhs
    if axiom == "p-p":
        phi2 = float(rng.uniform(0, 2 * math.pi))
        return _seq(1, [PhaseShifter(0, phi), PhaseShifter(0, phi2)]), _seq(1, [PhaseShifter(0, phi + phi2)])
    if axiom == "E2":
        u = random_unitary(2, rng)
        return solve_e2_lhs(u).circuit(), solve_e2_rhs(u).circuit()
    if axiom == "E3":
        lhs = _rand_e3_lhs(rng)
        _, rhs = solve_e3(lhs.matrix())
        return lhs.circuit(), rhs.circuit()
    f1 = random_state(rng, 1)
    f2 = random_state(rng, 2)
    g2 = as_dual(random_state(rng, 2))
    vac = FockVector.basis((0,))
    if axiom == "s0-0d":
        return _seq(0, [Source(0, vac), Detector(0, as_dual(vac))]), Circuit.identity(0)
    if axiom == "zero":
        # X ⊗ (⟨1|0⟩) equals the null map written with vacuum sources and detectors
        x = _seq(2, [BeamSplitter(0, phi), PhaseShifter(1, phi)])
        lhs = Circuit(2, 2, x.columns + ((Source(2, vac),), (Detector(2, as_dual(FockVector.basis((1,)))),)))
        rhs = _seq(2, [Source(2, vac), Detector(2, as_dual(FockVector.basis((1,)))), Detector(0, as_dual(FockVector.basis((0, 0)))), Source(0, FockVector.basis((0, 0)))])
        return lhs, rhs
    if axiom == "ss":
        return _seq(0, [Source(0, f2), Source(2, f1)]), _seq(0, [Source(0, tensor(f2, f1))])
    if axiom == "dd":
        g1 = as_dual(random_state(rng, 1))
        return _seq(3, [Detector(0, g2), Detector(0, g1)]), _seq(3, [Detector(0, as_dual(tensor(g2, g1)))])
    if axiom == "s-b":
        return _seq(0, [Source(0, f2), BeamSplitter(0, phi)]), _seq(0, [Source(0, apply_bs(phi, 0, f2))])
    if axiom == "s-p":
        return _seq(0, [Source(0, f1), PhaseShifter(0, phi)]), _seq(0, [Source(0, apply_phase(phi, 0, f1))])
    if axiom == "b-d":
        return _seq(2, [BeamSplitter(0, phi), Detector(0, g2)]), _seq(2, [Detector(0, as_dual(apply_bs(phi, 0, g2)))])
    if axiom == "p-d":
        g1 = as_dual(random_state(rng, 1))
        return _seq(1, [PhaseShifter(0, phi), Detector(0, g1)]), _seq(1, [Detector(0, as_dual(apply_phase(phi, 0, g1)))])
    if axiom == "s-0d":
        junk = FockVector(2, {(a, k): complex(rng.normal(), rng.normal()) for a in range(2) for k in range(1, 3)})
        lhs_state = tensor(f1, vac) + junk
        return _seq(0, [Source(0, lhs_state), Detector(1, as_dual(vac))]), _seq(0, [Source(0, f1)])
    if axiom == "s0-d":
        g1 = random_state(rng, 1)
        junk = FockVector(2, {(a, k): complex(rng.normal(), rng.normal()) for a in range(2) for k in range(1, 3)})
        eff = as_dual(tensor(g1, vac) + junk)
        return _seq(1, [Source(1, vac), Detector(0, eff)]), _seq(1, [Detector(0, as_dual(g1))])
    if axiom == "h2":
        return _h2_instance(rng)
    raise ValueError(f"unknown axiom {axiom!r}")


def _apply_block(h: np.ndarray, basis: list, v: FockVector, transpose: bool = False) -> FockVector:
    idx = {o: i for i, o in enumerate(basis)}
    vec = np.zeros(len(basis), dtype=complex)
    for o, a in v.items():
        vec[idx[o]] = a
    out = (h.T if transpose else h) @ vec
    return FockVector(2, {basis[i]: out[i] for i in range(len(basis))})


def _h2_instance(rng) -> tuple[Circuit, Circuit]:
    # h acts on the block of two-mode occupations with at most two photons per mode
    basis = [(a, b) for a in range(3) for b in range(3)]
    h = rng.normal(size=(9, 9)) + 1j * rng.normal(size=(9, 9))
    f = random_state(rng, 2)
    g = as_dual(random_state(rng, 2))
    lhs = _seq(1, [Source(1, _apply_block(h, basis, f)), Detector(1, g)])
    rhs = _seq(1, [Source(1, f), Detector(1, as_dual(_apply_block(h, basis, g, transpose=True)))])
    return lhs, rhs


def check_axiom(axiom: str, rng: np.random.Generator | int | None = None, cutoff: int = 4) -> float:
    """Max-norm difference of both sides on every probe input with at most ``cutoff`` photons."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    lhs, rhs = axiom_instance(axiom, rng)
    return LinearMapSample.from_circuit(lhs, cutoff).distance(LinearMapSample.from_circuit(rhs, cutoff))


# ---------------------------------------------------------------------------
# semantics-preserving mutations


_MUTATIONS = ("p2pi", "p-p split", "swap", "E2", "E3", "s0-0d", "s-p", "s-b", "p-d", "b-d", "s-0d", "s0-d", "p-p fuse")


def _positions(c: Circuit, kind) -> list[int]:
    return [t for t, col in enumerate(c.columns) if len(col) == 1 and isinstance(col[0], kind)]


def _replace(c: Circuit, t: int, gens: list) -> Circuit:
    cols = c.columns[:t] + tuple((g,) for g in gens) + c.columns[t + 1 :]
    return Circuit(c.n_in, c.n_out, cols)


def _mutate_once(c: Circuit, rng: np.random.Generator) -> tuple[str, Circuit] | None:
    """Apply one axiom instance (either orientation) at a random matching site."""
    c = Circuit.from_sequence(c.n_in, c.sequence())
    widths = c.widths()
    name = str(rng.choice(_MUTATIONS))
    ps, bs = _positions(c, PhaseShifter), _positions(c, BeamSplitter)
    srcs, dets, swaps = _positions(c, Source), _positions(c, Detector), _positions(c, Swap)
    pick = lambda xs: xs[int(rng.integers(len(xs)))]  # noqa: E731
    if name == "p2pi" and ps:
        t = pick(ps)
        g = c.columns[t][0]
        return name, _replace(c, t, [PhaseShifter(g.wire, g.phi + 2 * math.pi * (1 if rng.random() < 0.5 else -1))])
    if name == "p-p split" and ps:
        t = pick(ps)
        g = c.columns[t][0]
        a = float(rng.uniform(0, 2 * math.pi))
        return name, _replace(c, t, [PhaseShifter(g.wire, a), PhaseShifter(g.wire, g.phi - a)])
    if name == "p-p fuse":
        for t in ps:
            if t + 1 in ps and c.columns[t][0].wire == c.columns[t + 1][0].wire:
                g, h = c.columns[t][0], c.columns[t + 1][0]
                cols = c.columns[:t] + ((PhaseShifter(g.wire, g.phi + h.phi),),) + c.columns[t + 2 :]
                return name, Circuit(c.n_in, c.n_out, cols)
        return None
    if name == "swap" and swaps:
        t = pick(swaps)
        w = c.columns[t][0].wire
        return name, _replace(c, t, [BeamSplitter(w, math.pi / 2), PhaseShifter(w, 1.5 * math.pi), PhaseShifter(w + 1, 1.5 * math.pi)])
    if name == "E2" and bs:
        t = pick(bs)
        g = c.columns[t][0]
        sol = solve_e2_lhs(bs_matrix(g.theta))
        return name, _replace(c, t, list(sol.circuit(g.wire, widths[t]).sequence()))
    if name == "E3":
        cands = [t for t in bs if c.columns[t][0].wire + 2 < widths[t]]
        if not cands:
            return None
        t = pick(cands)
        g = c.columns[t][0]
        # B12(θ) read as the top-heavy triple (θ, 0, 0), rewritten bottom-heavy
        _, rhs = solve_e3(E3Lhs(g.theta, 0.0, 0.0).matrix())
        return name, _replace(c, t, list(rhs.circuit(g.wire, widths[t]).sequence()))
    if name == "s0-0d":
        t = int(rng.integers(len(c.columns) + 1))
        w = int(rng.integers(widths[t] + 1))
        vac = FockVector.basis((0,))
        cols = c.columns[:t] + ((Source(w, vac),), (Detector(w, as_dual(vac)),)) + c.columns[t:]
        return name, Circuit(c.n_in, c.n_out, cols)
    if name in ("s-p", "s-b") and srcs:
        t = pick(srcs)
        s = c.columns[t][0]
        k = s.state.modes
        if name == "s-b" and k < 2:
            return None
        a = float(rng.uniform(0, 2 * math.pi))
        j = int(rng.integers(k - (1 if name == "s-b" else 0)))
        if name == "s-p":
            new = [Source(s.wire, apply_phase(-a, j, s.state)), PhaseShifter(s.wire + j, a)]
        else:
            new = [Source(s.wire, apply_bs(-a, j, s.state)), BeamSplitter(s.wire + j, a)]
        return name, _replace(c, t, new)
    if name in ("p-d", "b-d") and dets:
        t = pick(dets)
        d = c.columns[t][0]
        k = d.effect.modes
        if name == "b-d" and k < 2:
            return None
        a = float(rng.uniform(0, 2 * math.pi))
        j = int(rng.integers(k - (1 if name == "b-d" else 0)))
        if name == "p-d":
            new = [PhaseShifter(d.wire + j, a), Detector(d.wire, as_dual(apply_phase(-a, j, d.effect)))]
        else:
            new = [BeamSplitter(d.wire + j, a), Detector(d.wire, as_dual(apply_bs(-a, j, d.effect)))]
        return name, _replace(c, t, new)
    if name == "s-0d" and srcs:
        t = pick(srcs)
        s = c.columns[t][0]
        k = s.state.modes
        junk = random_state(rng, k + 1, 2)
        junk = FockVector(k + 1, [(o[:-1] + (o[-1] + 1,), a) for o, a in junk.items()])
        state = tensor(s.state, FockVector.basis((0,))) + junk
        new = [Source(s.wire, state), Detector(s.wire + k, as_dual(FockVector.basis((0,))))]
        return name, _replace(c, t, new)
    if name == "s0-d" and dets:
        t = pick(dets)
        d = c.columns[t][0]
        k = d.effect.modes
        junk = random_state(rng, k + 1, 2)
        junk = FockVector(k + 1, [(o[:-1] + (o[-1] + 1,), a) for o, a in junk.items()])
        eff = as_dual(tensor(d.effect, FockVector.basis((0,))) + junk)
        new = [Source(d.wire + k, FockVector.basis((0,))), Detector(d.wire, eff)]
        return name, _replace(c, t, new)
    return None


def mutate(c: Circuit, rng: np.random.Generator, count: int) -> tuple[Circuit, list[str]]:
    """Apply ``count`` random axiom instances; returns the new circuit and the applied names."""
    applied: list[str] = []
    tries = 0
    while len(applied) < count and tries < 50 * count:
        tries += 1
        out = _mutate_once(c, rng)
        if out is not None:
            applied.append(out[0])
            c = out[1]
    return c, applied


__all__ = [
    "ALL_AXIOMS",
    "ArityMismatch",
    "CostGuard",
    "DistinctNF",
    "EquivalentNF",
    "EquivVerdict",
    "FIG3_AXIOMS",
    "FIG4_AXIOMS",
    "LinearMapSample",
    "NotTrec",
    "NumericMismatch",
    "axiom_instance",
    "bs_sector_error",
    "check_axiom",
    "creation_power",
    "delta",
    "delta_threshold_violations",
    "equiv",
    "lambda_commute_check",
    "mutate",
    "numeric_witness",
    "omega",
    "random_circuit",
    "random_state",
    "random_trec",
    "rev_lex_less",
    "slice_last_mode",
    "source_photons",
    "sum_of_diagrams_residual",
]
