from __future__ import annotations

import cmath
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lov.circuit import (
    BeamSplitter,
    Circuit,
    Detector,
    DslSyntaxError,
    ModeMismatch,
    PhaseShifter,
    SchemaError,
    SemanticError,
    Source,
    Swap,
    canonicalize_layout,
    compose_seq,
    compose_tensor,
    eval_angle,
    from_json,
    load,
    parse_dsl,
    print_dsl,
    to_json,
    validate,
)
from lov.fock import FockVector, as_dual, eval_circuit
from lov.unitary import matrix_of


def _ps(w, phi):
    return PhaseShifter(w, phi)


def test_compose_identities():
    idt = Circuit.identity(2)
    assert compose_seq(idt, idt) == idt


def test_compose_phases_evaluates_to_sum():
    c = compose_seq(Circuit.from_sequence(1, [_ps(0, 1.0)]), Circuit.from_sequence(1, [_ps(0, 0.5)]))
    out = eval_circuit(c, FockVector.basis((1,)))
    assert abs(out[(1,)] - cmath.exp(1.5j)) < 1e-12


def test_compose_mismatch():
    with pytest.raises(ModeMismatch):
        compose_seq(Circuit.identity(2), Circuit.identity(3))


def test_tensor_identities():
    assert compose_tensor(Circuit.identity(1), Circuit.identity(1)).n_in == 2


def test_tensor_phase_matrix():
    c = compose_tensor(Circuit.from_sequence(1, [_ps(0, 0.3)]), Circuit.identity(1))
    np.testing.assert_allclose(matrix_of(c), np.diag([cmath.exp(0.3j), 1.0]), atol=1e-15)


def test_tensor_source_detector_arity():
    src = Circuit.from_sequence(0, [Source(0, FockVector.basis((1, 0)))])
    det = Circuit.from_sequence(2, [Detector(0, as_dual(FockVector.basis((1, 0))))])
    c = compose_tensor(src, det)
    assert (c.n_in, c.n_out) == (2, 2)
    assert validate(c).ok


def test_validate_cz(circuits_dir):
    assert validate(load(str(circuits_dir / "cz_left.lov"))).ok


def test_validate_overlap():
    c = Circuit(3, 3, ((BeamSplitter(0, 0.1), BeamSplitter(1, 0.2)),))
    assert "OverlapViolation" in validate(c).kinds()


def test_validate_empty_detector():
    c = Circuit(1, 1, ((Detector(0, as_dual(FockVector(0, {(): 1.0}))),),))
    assert "ArityViolation" in validate(c).kinds()


def test_validate_wire_range():
    c = Circuit(2, 2, ((BeamSplitter(1, 0.1),),))
    assert "WireRangeViolation" in validate(c).kinds()


def test_validate_mode_chain():
    c = Circuit(2, 3, ((BeamSplitter(0, 0.1),),))
    assert "ModeChainViolation" in validate(c).kinds()


def test_parse_single_bs():
    c = parse_dsl("circuit 2 -> 2\nbs 0 pi/4")
    (g,) = c.generators()
    assert isinstance(g, BeamSplitter) and g.theta == pytest.approx(math.pi / 4, abs=1e-15)


def test_parse_source_state():
    c = parse_dsl("circuit 2 -> 4\nsource 2 { 1,0: 1.0 ; 0,1: 0+1.0i }")
    (g,) = c.generators()
    assert g.state[(1, 0)] == 1.0 and g.state[(0, 1)] == 1j


def test_parse_bad_wire():
    with pytest.raises(SemanticError):
        parse_dsl("circuit 2 -> 2\nbs 5 pi/4")


@pytest.mark.parametrize(
    "text",
    [
        "bs 0 0.1",
        "circuit 2 -> 2\nbs zero 0.1",
        "circuit 2 -> 2\nfrobnicate 0",
        "circuit 1 -> 1\nsource 1 { 1: 1.0",
    ],
)
def test_parse_syntax_errors(text):
    with pytest.raises(DslSyntaxError) as info:
        parse_dsl(text)
    assert "line" in str(info.value)


@pytest.mark.parametrize(
    ("expr", "value"),
    [("pi/4", math.pi / 4), ("3*pi/2", 1.5 * math.pi), ("-pi", -math.pi), ("0.25", 0.25), ("2*pi - 0.5", 2 * math.pi - 0.5)],
)
def test_eval_angle(expr, value):
    assert eval_angle(expr) == pytest.approx(value, abs=1e-15)


def test_eval_angle_rejects_names():
    with pytest.raises(Exception):
        eval_angle("__import__('os')")


def test_json_round_trip_bell(circuits_dir):
    c = load(str(circuits_dir / "bell.lov"))
    assert from_json(to_json(c)) == c


def test_json_angle_expression():
    c = parse_dsl("circuit 2 -> 2\nbs 0 pi/4")
    obj = json.loads(to_json(c))
    text = json.dumps(obj)
    assert '"expr": "pi/4"' in text and "0.7853981633974483" in text
    assert from_json(text) == c


def test_json_truncated():
    text = to_json(parse_dsl("circuit 2 -> 2\nbs 0 pi/4"))
    with pytest.raises(SchemaError):
        from_json(text[: len(text) // 2])


def test_json_wrong_shape():
    with pytest.raises(SchemaError):
        from_json('{"n_in": 1}')


def test_load_detects_format(circuits_dir):
    c = load(str(circuits_dir / "cz_right.lov"))
    assert load("x.json", to_json(c)) == c


# --- properties


@st.composite
def lopp_circuits(draw, max_modes=4, max_gates=8):
    n = draw(st.integers(1, max_modes))
    angle = st.floats(-7.0, 7.0, allow_nan=False)
    gens = []
    for _ in range(draw(st.integers(0, max_gates))):
        kind = draw(st.sampled_from(("ps", "bs", "swap") if n > 1 else ("ps",)))
        if kind == "ps":
            gens.append(PhaseShifter(draw(st.integers(0, n - 1)), draw(angle)))
        elif kind == "bs":
            gens.append(BeamSplitter(draw(st.integers(0, n - 2)), draw(angle)))
        else:
            gens.append(Swap(draw(st.integers(0, n - 2))))
    return Circuit.from_sequence(n, gens)


@given(lopp_circuits())
def test_dsl_round_trip(c):
    assert parse_dsl(print_dsl(c)) == c


@given(lopp_circuits())
def test_json_round_trip(c):
    assert from_json(to_json(c)) == c


@given(lopp_circuits(), lopp_circuits())
def test_compose_semantics(c1, c2):
    if c1.n_in != c2.n_in:
        c2 = Circuit.identity(c1.n_in)
    v = FockVector(c1.n_in, {(2,) + (0,) * (c1.n_in - 1): 0.6, (0,) * (c1.n_in - 1) + (1,): 0.8})
    lhs = eval_circuit(compose_seq(c1, c2), v)
    rhs = eval_circuit(c2, eval_circuit(c1, v))
    assert lhs.distance(rhs) < 1e-12


@given(lopp_circuits(), lopp_circuits(), lopp_circuits())
def test_tensor_associative(a, b, c):
    left = compose_tensor(compose_tensor(a, b), c)
    right = compose_tensor(a, compose_tensor(b, c))
    assert canonicalize_layout(left) == canonicalize_layout(right)


@given(lopp_circuits(max_gates=10))
def test_layout_sliding_preserves_semantics(c):
    packed = canonicalize_layout(c)
    assert len(packed.columns) <= len(c.columns)
    np.testing.assert_allclose(matrix_of(packed), matrix_of(c), atol=1e-12)
