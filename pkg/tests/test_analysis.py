from __future__ import annotations

import cmath
import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lov.analysis import (
    ALL_AXIOMS,
    ArityMismatch,
    CostGuard,
    DistinctNF,
    EquivalentNF,
    LinearMapSample,
    NotTrec,
    axiom_instance,
    check_axiom,
    creation_power,
    delta,
    delta_threshold_violations,
    equiv,
    lambda_commute_check,
    mutate,
    numeric_witness,
    omega,
    random_circuit,
    random_state,
    random_trec,
    rev_lex_less,
    slice_last_mode,
    source_photons,
    sum_of_diagrams_residual,
)
from lov.circuit import BeamSplitter, Circuit, Detector, PhaseShifter, Source, load
from lov.fock import FockVector, as_dual, eval_circuit, probe_basis
from lov.rewrite import nf_equal, normalize, render, semantic_residual, unpair_m
from lov.synthesis import NotTmn, Tmn, TriangleParams, synthesize_triangle, triangle_matrix, triangle_to_circuit
from lov.unitary import random_unitary


def permanent(a: np.ndarray) -> complex:
    n = a.shape[0]
    if n == 0:
        return 1.0
    return sum(np.prod([a[i, p[i]] for i in range(n)]) for p in itertools.permutations(range(n)))


def fock_amplitude(u: np.ndarray, x: tuple[int, ...], y: tuple[int, ...]) -> complex:
    """⟨y|U|x⟩ as a permanent of the repeated-row/column submatrix."""
    if sum(x) != sum(y):
        return 0.0
    cols = [j for j, k in enumerate(x) for _ in range(k)]
    rows = [i for i, k in enumerate(y) for _ in range(k)]
    norm = math.sqrt(math.prod(math.factorial(k) for k in x + y))
    return permanent(u[np.ix_(rows, cols)]) / norm


def lopp(rng: np.random.Generator, n: int, depth: int = 6) -> Circuit:
    gens = []
    for _ in range(depth):
        if n > 1 and rng.random() < 0.5:
            gens.append(BeamSplitter(int(rng.integers(0, n - 1)), float(rng.uniform(0, 2 * math.pi))))
        else:
            gens.append(PhaseShifter(int(rng.integers(0, n)), float(rng.uniform(0, 2 * math.pi))))
    return Circuit.from_sequence(n, gens)


# --- Ω and Δ


def test_omega_without_ancillas_is_semantics():
    t = synthesize_triangle(random_unitary(3, 2))
    om = omega(t, Tmn(3, 0, 3, 0), (), (), cutoff=2)
    assert om.distance(LinearMapSample.from_circuit(triangle_to_circuit(t), 2)) < 1e-12


@pytest.mark.parametrize("split", [(2, 1, 1, 2), (2, 2, 3, 1), (1, 2, 2, 1)])
def test_omega_matches_permanents(random_tmn, split):
    t = random_tmn(np.random.default_rng(sum(split)), *split)
    n, n_anc, m, m_anc = split
    u = triangle_matrix(t)
    for i in probe_basis(n_anc, 1):
        for j in probe_basis(m_anc, 2):
            om = omega(t, Tmn(*split), i, j, cutoff=2)
            for x in probe_basis(n, 2):
                for y in probe_basis(m, 3):
                    assert abs(om.entry(y, x) - fock_amplitude(u, x + i, y + j)) < 1e-12


def test_omega_rejects_bad_split():
    t = TriangleParams.zeros(3).with_angles({(2, 1): 0.5})
    with pytest.raises(NotTmn):
        omega(t, Tmn(1, 2, 1, 2), (0, 0), (0, 0))


def test_omega_checks_lengths(random_tmn):
    t = random_tmn(np.random.default_rng(1), 2, 1, 1, 2)
    with pytest.raises(ValueError):
        omega(t, Tmn(2, 1, 1, 2), (0, 0), (0, 0))


def test_delta_zero_is_omega():
    t, split = random_trec(np.random.default_rng(4), 1, 2)
    d = delta(t, split, (0, 0), (0,), cutoff=2)
    om = omega(t, split, (0, 0), (0,), cutoff=2)
    assert d.distance(om) == 0.0


def test_delta_requires_trec(random_tmn):
    t = random_tmn(np.random.default_rng(5), 3, 0, 2, 1)
    with pytest.raises(NotTrec):
        delta(t, Tmn(3, 0, 2, 1), (0, 0), (0,))


def test_delta_single_photon_entry():
    # one photon in, caught on the ancilla, then re-created on the visible output
    t, split = random_trec(np.random.default_rng(0), 1, 1)
    u = triangle_matrix(t)
    d = delta(t, split, (1,), (1,), cutoff=2)
    assert abs(d.entry((1,), (1,)) - u[1, 0]) < 1e-12
    assert abs(d.entry((2,), (2,)) - 2 * u[0, 0] * u[1, 0]) < 1e-12
    assert d.values[(0,)].is_zero()


@pytest.mark.parametrize(("x", "y", "expected"), [((1, 0), (0, 1), True), ((0, 1), (1, 0), False), ((2, 3), (2, 3), False)])
def test_rev_lex_less(x, y, expected):
    assert rev_lex_less(x, y) is expected


@pytest.mark.parametrize(("a", "b"), [(1, 1), (1, 2), (2, 1)])
def test_delta_threshold(a, b):
    t, split = random_trec(np.random.default_rng(10 * a + b), a, b)
    assert delta_threshold_violations(t, split, max_component=2) == []


def test_delta_decomposition():
    t, split = random_trec(np.random.default_rng(1), 1, 1)
    u, v = (1,), (1,)
    om = omega(t, split, u, v, 3)
    cands = [((s,), (r,)) for s in range(3) for r in range(4) if s - r == sum(u) - sum(v)]
    ds = {c: delta(t, split, c[0], c[1], 3) for c in cands}
    rows = sorted({(k, o) for lm in (om, *ds.values()) for k, val in lm.values.items() for o in val.support()})
    a = np.array([[ds[c].values[k][o] for c in cands] for k, o in rows])
    b = np.array([om.values[k][o] for k, o in rows])
    coef, *_ = np.linalg.lstsq(a, b, rcond=None)
    assert np.abs(a @ coef - b).max() < 1e-9
    assert abs(coef[cands.index((u, v))]) > 1e-8


def test_omega_decomposition_of_cz(circuits_dir):
    nf = normalize(load(str(circuits_dir / "cz_left.lov")))
    split = nf.classification()
    whole = LinearMapSample.from_circuit(render(nf), 2)
    terms = [(a, omega(nf.triangle, split, occ[:-1], unpair_m(occ[-1], nf.m_anc), 2)) for occ, a in nf.f.items()]
    assert whole.distance(whole.combine(terms)) < 1e-9
    # linear independence witness: nudging one coefficient shows up
    for k in range(len(terms)):
        bumped = list(terms)
        bumped[k] = (terms[k][0] + 1e-3, terms[k][1])
        assert whole.distance(whole.combine(bumped)) > 1e-6


# --- commutation and sectors


def test_lambda_commute_empty():
    assert lambda_commute_check(lopp(np.random.default_rng(0), 3), (0, 0, 0)) == 0.0


def test_lambda_commute_single_mode():
    assert lambda_commute_check(Circuit.from_sequence(1, [PhaseShifter(0, 0.7)]), (1,)) < 1e-12


def test_lambda_commute_three_modes():
    assert lambda_commute_check(lopp(np.random.default_rng(1), 3, depth=8), (1, 0, 2)) < 1e-9


@pytest.mark.parametrize(("u", "cutoff"), [((4,), 2), ((1,), 9)])
def test_lambda_commute_cost_guard(u, cutoff):
    with pytest.raises(CostGuard):
        lambda_commute_check(Circuit.identity(1), u, cutoff)


def test_creation_power():
    out = creation_power(FockVector.basis((1, 0)), (2, 1))
    assert out.support() == [(3, 1)]
    assert out[(3, 1)] == pytest.approx(math.sqrt(6))


def test_base_case_separation():
    # ⟨n+k|W|n⟩ ratios for nearby (θ, φ) drift from 1 as n grows
    def amp(theta, phi, n, k):
        w = Circuit.from_sequence(
            1,
            [Source(1, FockVector.basis((k,))), BeamSplitter(0, theta), PhaseShifter(0, phi), Detector(1, as_dual(FockVector.basis((0,))))],
        )
        return eval_circuit(w, FockVector.basis((n,)))[(n + k,)]

    for (th, ph), (th2, ph2) in [((0.5, 0.3), (0.51, 0.3)), ((0.5, 0.3), (0.5, 0.31))]:
        drift = [abs(amp(th, ph, n, 2) / amp(th2, ph2, n, 2) - 1) for n in (10, 20, 30)]
        assert drift[0] < drift[1] < drift[2]


# --- sum of diagrams


def test_slice_last_mode():
    parts = slice_last_mode(FockVector(2, {(1, 0): 1.0, (0, 2): 0.5}))
    assert parts == {0: FockVector(1, {(1,): 1.0}), 2: FockVector(1, {(0,): 0.5})}


@pytest.mark.parametrize("a", [0, 1])
def test_sum_of_diagrams(a):
    rng = np.random.default_rng(a)
    d = lopp(rng, 2 + a)
    f = random_state(rng, a + 1, support=4)
    g = random_state(rng, a + 1, support=4)
    assert sum_of_diagrams_residual(d, f, g) < 1e-10


def test_sum_of_diagrams_arity():
    with pytest.raises(ArityMismatch):
        sum_of_diagrams_residual(Circuit.identity(2), FockVector.basis((1, 0)), FockVector.basis((1,)))


# --- equivalence


def test_equiv_self():
    c = lopp(np.random.default_rng(3), 3)
    assert isinstance(equiv(c, c), EquivalentNF)


def test_equiv_cz(circuits_dir):
    a = load(str(circuits_dir / "cz_left.lov"))
    b = load(str(circuits_dir / "cz_right.lov"))
    assert isinstance(equiv(a, b), EquivalentNF)


def test_equiv_distinct_phases():
    got = equiv(Circuit.from_sequence(1, [PhaseShifter(0, 0.1)]), Circuit.from_sequence(1, [PhaseShifter(0, 0.2)]))
    assert isinstance(got, DistinctNF)
    assert got.mismatch.input == (1,)
    assert got.mismatch.delta == pytest.approx(abs(cmath.exp(0.1j) - cmath.exp(0.2j)))


def test_equiv_arity():
    with pytest.raises(ArityMismatch):
        equiv(Circuit.identity(1), Circuit.identity(2))


def test_numeric_witness_none_for_equal():
    assert numeric_witness(Circuit.identity(2), Circuit.identity(2), 3) is None


def test_source_photons(circuits_dir):
    assert source_photons(load(str(circuits_dir / "cz_left.lov"))) == 2


# --- axioms and mutations


@pytest.mark.parametrize("axiom", ALL_AXIOMS)
def test_axiom_is_sound(axiom):
    rng = np.random.default_rng(7)
    for _ in range(5):
        assert check_axiom(axiom, rng, cutoff=4) < 1e-9


def test_p2pi_exact():
    assert check_axiom("p2pi", 0) < 1e-12


def test_unknown_axiom():
    with pytest.raises(ValueError):
        axiom_instance("h3", np.random.default_rng())


def test_axiom_sides_share_arity():
    rng = np.random.default_rng(2)
    for axiom in ALL_AXIOMS:
        lhs, rhs = axiom_instance(axiom, rng)
        assert (lhs.n_in, lhs.n_out) == (rhs.n_in, rhs.n_out)


@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_mutate_preserves_normal_form(seed, count):
    rng = np.random.default_rng(seed)
    c = random_circuit(rng, max_visible=3, max_gates=8, support=2)
    c2, names = mutate(c, rng, count)
    assert names
    assert semantic_residual(c, c2, 3) < 1e-9
    assert nf_equal(normalize(c), normalize(c2))
