"""Closed-form angle solvers for the two Euler equations of the LOpp theory.

Matrix conventions used throughout (``B`` is the beam splitter, products act
right to left):

* E2 right-hand side: ``diag(e^{iβ0}, e^{iβ3}) · B(β2) · diag(1, e^{iβ1})``,
  i.e. a phase ``β1`` on the bottom input, the beam splitter, then output
  phases ``β0`` (top) and ``β3`` (bottom).
* E2 left-hand side: ``B(α1) · diag(e^{iα0}, e^{iα2}) · B(α3)``.
* E3 left-hand side: ``B12(γ1) · B23(γ2) · B12(γ3)`` (top-heavy).
* E3 right-hand side: ``B23(δ1) · B12(δ2) · B23(δ3)`` (bottom-heavy).

Conjugating by ``P = diag(1, i, 1)`` turns the 3-mode products into real
rotations, from which the angles are read off with ``atan2``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .circuit import BeamSplitter, Circuit, PhaseShifter
from .unitary import NotUnitary, bs_matrix, embed, unitarity_error

TWO_PI = 2.0 * math.pi
BRANCH_EPS = 1e-9
SNAP_EPS = 1e-12


class NotRealRotation(ValueError):
    pass


def mod2pi(x: float) -> float:
    """Reduce to ``[0, 2π)``; values within ``SNAP_EPS`` of ``2π`` snap to 0."""
    y = math.fmod(x, TWO_PI)
    if y < 0:
        y += TWO_PI
    if y >= TWO_PI - SNAP_EPS or y < SNAP_EPS:
        return 0.0
    return y


def _modpi(x: float) -> float:
    y = math.fmod(x, math.pi)
    if y < 0:
        y += math.pi
    if y >= math.pi - SNAP_EPS or y < SNAP_EPS:
        return 0.0
    return y


@dataclass(frozen=True)
class E2Rhs:
    beta0: float
    beta1: float
    beta2: float
    beta3: float

    def matrix(self) -> np.ndarray:
        return (
            np.diag([cmath.exp(1j * self.beta0), cmath.exp(1j * self.beta3)])
            @ bs_matrix(self.beta2)
            @ np.diag([1.0, cmath.exp(1j * self.beta1)])
        )

    def circuit(self, wire: int = 0, n: int = 2) -> Circuit:
        return Circuit.from_sequence(
            n,
            [
                PhaseShifter(wire + 1, self.beta1),
                BeamSplitter(wire, self.beta2),
                PhaseShifter(wire, self.beta0),
                PhaseShifter(wire + 1, self.beta3),
            ],
        )


@dataclass(frozen=True)
class E2Lhs:
    alpha0: float
    alpha1: float
    alpha2: float
    alpha3: float

    def matrix(self) -> np.ndarray:
        d = np.diag([cmath.exp(1j * self.alpha0), cmath.exp(1j * self.alpha2)])
        return bs_matrix(self.alpha1) @ d @ bs_matrix(self.alpha3)

    def circuit(self, wire: int = 0, n: int = 2) -> Circuit:
        return Circuit.from_sequence(
            n,
            [
                BeamSplitter(wire, self.alpha3),
                PhaseShifter(wire, self.alpha0),
                PhaseShifter(wire + 1, self.alpha2),
                BeamSplitter(wire, self.alpha1),
            ],
        )


def _check2(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2) or not unitarity_error(u) < BRANCH_EPS:
        raise NotUnitary("expected a 2x2 unitary")
    return u


def _rhs_angles(u: np.ndarray) -> tuple[float, float, float, float]:
    # compare both magnitudes against zero; cos is too flat near 1 to branch on
    c, s = abs(u[0, 0]), abs(u[1, 0])
    if s < SNAP_EPS:
        return mod2pi(cmath.phase(u[0, 0])), 0.0, 0.0, mod2pi(cmath.phase(u[1, 1]))
    if c < SNAP_EPS:
        return (
            mod2pi(cmath.phase(u[0, 1]) - math.pi / 2),
            0.0,
            math.pi / 2,
            mod2pi(cmath.phase(u[1, 0]) - math.pi / 2),
        )
    b0 = cmath.phase(u[0, 0])
    b3 = cmath.phase(u[1, 0]) - math.pi / 2
    b1 = cmath.phase(u[1, 1]) - cmath.phase(u[1, 0]) + math.pi / 2
    return mod2pi(b0), mod2pi(b1), math.atan2(s, c), mod2pi(b3)


def solve_e2_rhs(u: np.ndarray) -> E2Rhs:
    """Angles with ``β2 ∈ [0, π/2]``, the rest in ``[0, 2π)``, and ``β1 = 0`` when ``β2 ∈ {0, π/2}``."""
    return E2Rhs(*_rhs_angles(_check2(u)))


_H = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)


def solve_e2_lhs(u: np.ndarray) -> E2Lhs:
    """Angles with ``α1 ∈ [0, π/2)``, ``α3 ∈ [0, π)``, ``α0, α2 ∈ [0, 2π)``.

    Conjugation by the Hadamard matrix maps the left-hand shape onto
    ``e^{iS} diag(1, e^{-2iα1}) B(x) diag(1, e^{-2iα3})`` with ``x = (α0-α2)/2``.
    """
    u = _check2(u)
    v = _H @ u @ _H
    c, t = abs(v[0, 0]), abs(v[1, 0])
    if t < SNAP_EPS:
        x = 0.0
        s = cmath.phase(v[0, 0])
        a1 = 0.0
        a3 = _modpi(-cmath.phase(v[1, 1] / v[0, 0]) / 2.0)
    elif c < SNAP_EPS:
        x = math.pi / 2
        a1 = 0.0
        a3 = _modpi(-cmath.phase(v[0, 1] / v[1, 0]) / 2.0)
        s = cmath.phase(v[0, 1]) + 2.0 * a3 - math.pi / 2
    else:
        b0, b1, b2, b3 = _rhs_angles(v)
        s, x = b0, b2
        a1 = _modpi((b0 - b3) / 2.0)
        a3 = _modpi(-b1 / 2.0)
        if a1 >= math.pi / 2:
            # B(-x) = Z B(x) Z trades a quarter turn on both outer angles for the sign of x.
            a1 -= math.pi / 2
            a3 = _modpi(a3 - math.pi / 2)
            x = -x
    return E2Lhs(mod2pi(s - a1 - a3 + x), a1, mod2pi(s - a1 - a3 - x), a3)


@dataclass(frozen=True)
class E3Lhs:
    gamma1: float
    gamma2: float
    gamma3: float

    def matrix(self) -> np.ndarray:
        return b12(self.gamma1) @ b23(self.gamma2) @ b12(self.gamma3)

    def circuit(self, wire: int = 0, n: int = 3) -> Circuit:
        return Circuit.from_sequence(
            n, [BeamSplitter(wire, self.gamma3), BeamSplitter(wire + 1, self.gamma2), BeamSplitter(wire, self.gamma1)]
        )


@dataclass(frozen=True)
class E3Rhs:
    delta1: float
    delta2: float
    delta3: float

    def matrix(self) -> np.ndarray:
        return b23(self.delta1) @ b12(self.delta2) @ b23(self.delta3)

    def circuit(self, wire: int = 0, n: int = 3) -> Circuit:
        return Circuit.from_sequence(
            n, [BeamSplitter(wire + 1, self.delta3), BeamSplitter(wire, self.delta2), BeamSplitter(wire + 1, self.delta1)]
        )


def b12(theta: float) -> np.ndarray:
    return embed(bs_matrix(theta), 0, 3)


def b23(theta: float) -> np.ndarray:
    return embed(bs_matrix(theta), 1, 3)


_PIY = np.diag([1.0, 1j, 1.0])


def real_rotation(u: np.ndarray) -> np.ndarray:
    """``P† u P`` with ``P = diag(1, i, 1)``; real orthogonal for beam-splitter-only products."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (3, 3):
        raise NotRealRotation("expected a 3x3 matrix")
    r = _PIY.conj().T @ u @ _PIY
    if np.abs(r.imag).max() > BRANCH_EPS or np.abs(r.real.T @ r.real - np.eye(3)).max() > BRANCH_EPS:
        raise NotRealRotation("matrix is not a real rotation after conjugation")
    if np.linalg.det(r.real) < 0:
        raise NotRealRotation("matrix has determinant -1")
    return r.real


def solve_e3(u: np.ndarray) -> tuple[E3Lhs, E3Rhs]:
    """Both Euler triples of a beam-splitter-only 3-mode unitary.

    Underdetermined branches fix the first angle to 0.
    """
    u = np.asarray(u, dtype=complex)
    r = real_rotation(u)
    # the last angle is read from the residual, so it absorbs error in the
    # first one when the middle angle is close to 0 or π
    # top-heavy: column 2 carries γ1 and γ2
    s = math.hypot(r[0, 2], r[1, 2])
    g2 = math.atan2(s, r[2, 2])
    g1 = mod2pi(math.atan2(-r[0, 2], r[1, 2])) if s > SNAP_EPS else 0.0
    rest = real_rotation(b23(g2).conj().T @ b12(g1).conj().T @ u)
    lhs = E3Lhs(g1, g2, mod2pi(math.atan2(rest[1, 0], rest[0, 0])))
    # bottom-heavy: column 0 carries δ1 and δ2
    s = math.hypot(r[1, 0], r[2, 0])
    d2 = math.atan2(s, r[0, 0])
    d1 = mod2pi(math.atan2(-r[2, 0], r[1, 0])) if s > SNAP_EPS else 0.0
    rest = real_rotation(b12(d2).conj().T @ b23(d1).conj().T @ u)
    rhs = E3Rhs(d1, d2, mod2pi(math.atan2(-rest[2, 1], rest[1, 1])))
    return lhs, rhs
