from __future__ import annotations

import math
from collections import defaultdict

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lov.analysis import random_circuit
from lov.circuit import BeamSplitter, Circuit, Detector, PhaseShifter, Source, load
from lov.fock import FockVector, as_dual
from lov.rewrite import (
    Loc,
    NormalForm,
    NotARedex,
    RankTuple,
    RuleId,
    StepLimitExceeded,
    ZeroForm,
    apply_rule,
    cantor_pair,
    cantor_unpair,
    find_redex,
    nf_difference,
    nf_equal,
    nf_to_obj,
    normalize,
    normalize_steps,
    pair_m,
    preprocess,
    ranking,
    render,
    semantic_residual,
    trace_line,
    unpair_m,
)
from lov.synthesis import PlainT, Tmn

# rules whose steps may raise the rank; see the decisions ledger
RANK_EXEMPT = {RuleId.PI_OVER_2, RuleId.REMOVE_G}


DRAWS_PER_RULE = 50


@pytest.fixture(scope="module")
def trace_pairs():
    """``DRAWS_PER_RULE`` (before, after) circuits per rule, taken from normalization traces."""
    rng = np.random.default_rng(3)
    pairs: dict[RuleId, list[tuple[Circuit, Circuit]]] = defaultdict(list)
    for _ in range(3000):
        if all(len(pairs[r]) >= DRAWS_PER_RULE for r in RuleId):
            break
        c = random_circuit(rng, max_visible=3, max_gates=8, support=2)
        prev = [preprocess(c)]

        def hook(step, rule, loc, cur):
            if len(pairs[rule]) < DRAWS_PER_RULE:
                pairs[rule].append((prev[0], cur))
            prev[0] = cur

        normalize_steps(c, hook=hook)
    return pairs


@pytest.mark.parametrize(("pair", "x"), [((0, 0), 0), ((1, 0), 1), ((0, 1), 2), ((2, 0), 3), ((1, 1), 4)])
def test_cantor_pair(pair, x):
    assert cantor_pair(*pair) == x
    assert cantor_unpair(x) == pair


def test_unpair_m_examples():
    assert unpair_m(0, 3) == (0, 0, 0)
    assert unpair_m(0, 0) == ()
    assert unpair_m(5, 0) is None


def test_pair_rejects_negative():
    with pytest.raises(ValueError):
        cantor_pair(-1, 0)


@given(st.lists(st.integers(0, 30), min_size=1, max_size=4))
def test_pair_unpair_bijection(vec):
    assert unpair_m(pair_m(vec), len(vec)) == tuple(vec)


@given(st.integers(0, 10**6), st.integers(1, 4))
def test_unpair_pair_bijection(x, m):
    assert pair_m(unpair_m(x, m)) == x


def test_rank_identity():
    assert ranking(Circuit.identity(2)) == RankTuple(0, 0, 0, 0, 0, 0)


def test_rank_out_of_range_bs():
    assert ranking(Circuit.from_sequence(2, [BeamSplitter(0, 1.5 * math.pi)])) == (1, 2, 0, 0, 0, 0)


def test_rank_source():
    c = Circuit.from_sequence(0, [Source(0, FockVector(2, {(1, 0): 1.0, (0, 1): 1.0}))])
    assert ranking(c) == (0, 0, 0, 0, 1, 2)


def test_find_redex_phase_mod():
    assert find_redex(Circuit.from_sequence(1, [PhaseShifter(0, 7.0)])) == (RuleId.PHASE_MOD_2PI, Loc(0, 0))


def test_fusion_step():
    c = Circuit.from_sequence(1, [PhaseShifter(0, 1.5), PhaseShifter(0, 1.0)])
    rule, loc = find_redex(c)
    assert rule is RuleId.PHASE_FUSION
    assert apply_rule(c, rule, loc).generators() == [PhaseShifter(0, 2.5)]


def test_zero_bs_step():
    c = Circuit.from_sequence(2, [BeamSplitter(0, 0.0)])
    assert apply_rule(c, RuleId.ZERO_BS, (0, 0)).generators() == []


def test_not_a_redex():
    with pytest.raises(NotARedex):
        apply_rule(Circuit.from_sequence(1, [PhaseShifter(0, 1.0)]), RuleId.PHASE_FUSION, (0, 0))


def test_identity_has_no_redex():
    assert find_redex(Circuit.identity(3)) is None


def test_trace_line_format():
    c = Circuit.from_sequence(1, [PhaseShifter(0, 0.5)])
    assert trace_line(3, RuleId.ZERO_PHASE, Loc(1, 0), c) == "step=3 rule=zero-phase loc=1,0 rank=(0,0,2,0,0,0)"


@pytest.mark.parametrize("rule", list(RuleId), ids=lambda r: r.value)
def test_rule_is_sound(trace_pairs, rule):
    assert len(trace_pairs[rule]) == DRAWS_PER_RULE, f"{rule.value} fired too rarely on the corpus"
    for before, after in trace_pairs[rule]:
        assert semantic_residual(before, after, 4) < 1e-9


@pytest.mark.parametrize("rule", [r for r in RuleId if r not in RANK_EXEMPT], ids=lambda r: r.value)
def test_rule_decreases_rank(trace_pairs, rule):
    for before, after in trace_pairs[rule]:
        assert ranking(after) < ranking(before)


def test_lopp_normal_form():
    nf = normalize(Circuit.from_sequence(2, [BeamSplitter(0, 0.3), PhaseShifter(1, 0.4)]))
    assert isinstance(nf, NormalForm)
    assert (nf.n_anc, nf.m_anc, nf.K) == (0, 0, (0,))
    assert nf.alpha == 1
    assert nf.triangle.theta[(1, 1)] == pytest.approx(0.3)


def test_impossible_event_is_zero_form():
    c = Circuit.from_sequence(1, [Source(1, FockVector.basis((0,))), Detector(1, as_dual(FockVector.basis((1,))))])
    assert normalize(c) == ZeroForm(1, 1)


def test_zero_form_renders_to_zero():
    nf = normalize(render(ZeroForm(2, 1)))
    assert nf == ZeroForm(2, 1)


def test_cz_renderings_agree(circuits_dir):
    a = normalize(load(str(circuits_dir / "cz_left.lov")))
    b = normalize(load(str(circuits_dir / "cz_right.lov")))
    assert nf_equal(a, b)
    assert nf_difference(a, b) is None


def test_nf_equal_detects_angle():
    a = normalize(Circuit.from_sequence(2, [BeamSplitter(0, 0.3)]))
    b = normalize(Circuit.from_sequence(2, [BeamSplitter(0, 0.301)]))
    assert not nf_equal(a, b)
    assert nf_difference(a, b) == "triangle angles"


def test_nf_equal_zero_vs_normal():
    assert not nf_equal(ZeroForm(1, 1), normalize(Circuit.identity(1)))


def test_step_limit():
    c = Circuit.from_sequence(2, [BeamSplitter(0, 7.0), PhaseShifter(0, 9.0), PhaseShifter(0, 1.0)])
    with pytest.raises(StepLimitExceeded):
        normalize(c, step_limit=1)


def test_nf_to_obj_keys():
    obj = nf_to_obj(normalize(Circuit.identity(1)))
    assert obj["kind"] == "normal" and obj["K"] == [0]
    assert nf_to_obj(ZeroForm(1, 2)) == {"kind": "zero", "n": 1, "m": 2}


# --- properties


small_circuits = st.integers(0, 2**32 - 1).map(
    lambda seed: random_circuit(np.random.default_rng(seed), max_visible=3, max_gates=10, support=2)
)


@given(small_circuits)
def test_normalize_preserves_semantics(c):
    nf = normalize(c)
    assert semantic_residual(c, render(nf), 3) < 1e-9


@given(small_circuits)
def test_normalize_is_idempotent(c):
    nf = normalize(c)
    again = normalize(render(nf))
    assert nf_equal(nf, again)


@given(small_circuits)
def test_normal_form_shape(c):
    nf = normalize(c)
    if isinstance(nf, ZeroForm):
        return
    assert isinstance(nf.classification(), PlainT if nf.n_anc == nf.m_anc == 0 else Tmn)
    # the detector is the canonical effect Σ_{l∈K} ⟨N_m̃(l), l|
    for occ, amp in nf.g.items():
        assert unpair_m(occ[-1], nf.m_anc) == occ[:-1] and amp == 1.0
    assert {o[-1] for o in nf.f} == set(nf.K)
