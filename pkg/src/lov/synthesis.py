"""Triangular circuit forms: synthesis, rendering, classification and factorization.

Grid layout (1-based ``(i, j)``, ``N`` wires):

* ``θ[i, j]`` exists for ``i + j ≤ N``; it is a beam splitter on row
  ``r = i + j - 1``, i.e. on the 0-based wires ``(r - 1, r)``;
* ``φ[i, j]`` exists for ``i + j ≤ N + 1``; it is a phase on wire ``i + j - 2``
  placed right after ``θ[i, j]`` on its top output (the slots with
  ``i + j = N + 1`` are the final phases on the last wire);
* gates are ordered by ``i - j``; equal keys act on disjoint wires.

``i`` indexes the right diagonals: diagonal 1 holds the first gate of every
row and factors out on the right, ``U = (1 ⊕ U') · R_1``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .circuit import BeamSplitter, Circuit, PhaseShifter
from .euler import mod2pi
from .unitary import check_unitary, matrix_of

ANGLE_EPS = 1e-9
HALF_PI = math.pi / 2


class InvariantViolation(ValueError):
    pass


class NotTmn(ValueError):
    pass


def bs_slots(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(1, n + 1) for j in range(1, n + 1) if i + j <= n]


def ps_slots(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(1, n + 1) for j in range(1, n + 2 - i)]


@dataclass(frozen=True)
class TriangleParams:
    """Angle grid of a triangular circuit on ``n`` wires."""

    n: int
    theta: dict[tuple[int, int], float] = field(hash=False)
    phi: dict[tuple[int, int], float] = field(hash=False)

    @staticmethod
    def zeros(n: int) -> TriangleParams:
        return TriangleParams(n, {s: 0.0 for s in bs_slots(n)}, {s: 0.0 for s in ps_slots(n)})

    def with_angles(self, theta: dict | None = None, phi: dict | None = None) -> TriangleParams:
        th = dict(self.theta)
        ph = dict(self.phi)
        th.update(theta or {})
        ph.update(phi or {})
        return TriangleParams(self.n, th, ph)

    @property
    def bs_count(self) -> int:
        return len(self.theta)

    @property
    def ps_count(self) -> int:
        return len(self.phi)

    def nonzero_bs(self) -> list[tuple[int, int]]:
        return [s for s, t in self.theta.items() if t != 0.0]

    def max_diff(self, other: TriangleParams) -> float:
        """Largest angle difference, phases compared on the circle."""
        if other.n != self.n:
            return math.inf
        d = max((abs(self.theta[s] - other.theta[s]) for s in self.theta), default=0.0)
        for s in self.phi:
            x = abs(self.phi[s] - other.phi[s]) % (2 * math.pi)
            d = max(d, min(x, 2 * math.pi - x))
        return d

    def to_obj(self) -> dict:
        return {
            "n": self.n,
            "theta": [[i, j, self.theta[(i, j)]] for (i, j) in sorted(self.theta)],
            "phi": [[i, j, self.phi[(i, j)]] for (i, j) in sorted(self.phi)],
        }

    @staticmethod
    def from_obj(obj: dict) -> TriangleParams:
        n = int(obj["n"])
        th = {(int(i), int(j)): float(v) for i, j, v in obj["theta"]}
        ph = {(int(i), int(j)): float(v) for i, j, v in obj["phi"]}
        t = TriangleParams(n, th, ph)
        check_invariants(t)
        return t


def check_invariants(t: TriangleParams, eps: float = 0.0) -> None:
    n = t.n
    if set(t.theta) != set(bs_slots(n)) or set(t.phi) != set(ps_slots(n)):
        raise InvariantViolation("grid slots do not match the triangle shape")
    for (i, j), th in t.theta.items():
        if not -eps <= th <= HALF_PI + eps:
            raise InvariantViolation(f"θ[{i},{j}] = {th} outside [0, π/2]")
        if abs(th) <= eps:
            for jj in range(j + 1, n + 2 - i):
                if t.phi[(i, jj)] != 0.0 or t.theta.get((i, jj), 0.0) != 0.0:
                    raise InvariantViolation(f"θ[{i},{j}] = 0 but slot ({i},{jj}) is nonzero")
        if abs(th - HALF_PI) <= eps and t.phi[(i, j)] != 0.0:
            raise InvariantViolation(f"θ[{i},{j}] = π/2 but φ[{i},{j}] ≠ 0")
    for s, ph in t.phi.items():
        if not 0.0 <= ph < 2 * math.pi:
            raise InvariantViolation(f"φ{s} = {ph} outside [0, 2π)")


def gate_order(n: int) -> Iterator[tuple[str, int, int, int]]:
    """Yield ``(kind, i, j, wire)`` in application order."""
    for key in range(1 - n, n):
        items = [(i, i - key) for i in range(1, n + 1) if 1 <= i - key and i + (i - key) <= n + 1]
        for i, j in items:
            if i + j <= n:
                yield "bs", i, j, i + j - 2
        for i, j in items:
            yield "ps", i, j, i + j - 2


def triangle_to_circuit(t: TriangleParams, *, keep_zeros: bool = False) -> Circuit:
    """Render the grid as a circuit; zero angles are omitted unless ``keep_zeros``."""
    check_invariants(t, ANGLE_EPS)
    cols: list[tuple] = []
    cur: list = []
    cur_key = None
    for kind, i, j, w in gate_order(t.n):
        key = (i - j, kind)
        if key != cur_key:
            if cur:
                cols.append(tuple(cur))
            cur, cur_key = [], key
        if kind == "bs":
            val = t.theta[(i, j)]
            if val != 0.0 or keep_zeros:
                cur.append(BeamSplitter(w, val))
        else:
            val = t.phi[(i, j)]
            if val != 0.0 or keep_zeros:
                cur.append(PhaseShifter(w, val))
    if cur:
        cols.append(tuple(cur))
    return Circuit(t.n, t.n, tuple(c for c in cols if c))


def _snap_theta(th: float) -> float:
    if th < ANGLE_EPS:
        return 0.0
    if abs(th - HALF_PI) < ANGLE_EPS:
        return HALF_PI
    return th


def _snap_phase(ph: float) -> float:
    ph = mod2pi(ph)
    return 0.0 if ph < ANGLE_EPS or ph > 2.0 * math.pi - ANGLE_EPS else ph


def _diag_matrix(n: int, i: int, theta: dict, phi: dict) -> np.ndarray:
    """Matrix of right diagonal ``i`` (all slots ``(i, j)``) embedded in ``n`` wires."""
    u = np.eye(n, dtype=complex)
    for j in range(n + 1 - i, 0, -1):
        w = i + j - 2
        if i + j <= n:
            th = theta[(i, j)]
            if th:
                c, s = math.cos(th), math.sin(th)
                u[w : w + 2, :] = np.array([[c, 1j * s], [1j * s, c]]) @ u[w : w + 2, :]
        ph = phi[(i, j)]
        if ph:
            u[w, :] *= cmath.exp(1j * ph)
    return u


def synthesize_triangle(u: np.ndarray) -> TriangleParams:
    """The unique triangular circuit realizing ``u``, peeling one right diagonal at a time.

    Row ``i`` of the remaining matrix gives the path coefficients of diagonal
    ``i``: ``t_j = cos θ_j e^{iφ_j} Π_{l<j} i sin θ_l e^{iφ_l}``, solved for
    ``(θ_j, φ_j)`` left to right.
    """
    u = check_unitary(u)
    n = u.shape[0]
    theta: dict[tuple[int, int], float] = {}
    phi: dict[tuple[int, int], float] = {}
    cur = u.copy()
    for i in range(1, n + 1):
        q: complex = 1.0
        row = cur[i - 1]
        size = n + 1 - i
        for j in range(1, size + 1):
            last = j == size
            if q == 0:
                if not last:
                    theta[(i, j)] = 0.0
                phi[(i, j)] = 0.0
                continue
            k = i - 1 + j - 1
            z = row[k] / q
            if last:
                phi[(i, j)] = _snap_phase(cmath.phase(z)) if abs(z) > ANGLE_EPS else 0.0
                continue
            # atan2 of the tail norm stays accurate near θ = 0, where acos loses half the digits
            th = _snap_theta(math.atan2(float(np.linalg.norm(row[k + 1 :])), abs(row[k])))
            ph = 0.0 if th == HALF_PI else _snap_phase(cmath.phase(z))
            theta[(i, j)] = th
            phi[(i, j)] = ph
            q = q * 1j * math.sin(th) * cmath.exp(1j * ph) if th else 0.0
        cur = cur @ _diag_matrix(n, i, theta, phi).conj().T if i < n else cur
    return TriangleParams(n, theta, phi)


def triangle_matrix(t: TriangleParams) -> np.ndarray:
    return matrix_of(triangle_to_circuit(t))


# ---------------------------------------------------------------------------
# path sums


def path_coefficient(t: TriangleParams, i: int, j: int) -> complex:
    """Sum over paths from input ``j`` to output ``i`` (both 1-based)."""
    n = t.n
    if not (1 <= i <= n and 1 <= j <= n):
        raise IndexError(f"({i},{j}) outside a {n}-wire triangle")
    gates = [g for g in gate_order(n)]

    def walk(k: int, wire: int) -> complex:
        if k == len(gates):
            return 1.0 if wire == i - 1 else 0.0
        kind, a, b, w = gates[k]
        if kind == "ps":
            f = cmath.exp(1j * t.phi[(a, b)]) if w == wire else 1.0
            return f * walk(k + 1, wire)
        if wire not in (w, w + 1):
            return walk(k + 1, wire)
        th = t.theta[(a, b)]
        other = w + 1 if wire == w else w
        total = 0j
        if math.cos(th) != 0:
            total += math.cos(th) * walk(k + 1, wire)
        if math.sin(th) != 0:
            total += 1j * math.sin(th) * walk(k + 1, other)
        return total

    return walk(0, j - 1)


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class PlainT:
    pass


@dataclass(frozen=True)
class Tmn:
    n: int
    n_anc: int
    m: int
    m_anc: int


@dataclass(frozen=True)
class Trec(Tmn):
    pass


@dataclass(frozen=True)
class NotTriangular:
    reason: str


TriangleClass = PlainT | Tmn | Trec | NotTriangular


def light_cones(t: TriangleParams) -> dict[tuple[str, int, int], tuple[frozenset[int], frozenset[int]]]:
    """Past and future cones (sets of 0-based input / output wires) of every nonzero gate.

    Reachability is structural: it follows wires through nonzero beam splitters.
    """
    order = [g for g in gate_order(t.n) if (t.theta if g[0] == "bs" else t.phi)[(g[1], g[2])] != 0.0]
    past = [frozenset([w]) for w in range(t.n)]
    cones_in: dict = {}
    for kind, i, j, w in order:
        if kind == "bs":
            reach = past[w] | past[w + 1]
            past[w] = past[w + 1] = reach
        else:
            reach = past[w]
        cones_in[(kind, i, j)] = reach
    fut = [frozenset([w]) for w in range(t.n)]
    cones_out: dict = {}
    for kind, i, j, w in reversed(order):
        if kind == "bs":
            reach = fut[w] | fut[w + 1]
            fut[w] = fut[w + 1] = reach
        else:
            reach = fut[w]
        cones_out[(kind, i, j)] = reach
    return {g: (cones_in[g], cones_out[g]) for g in cones_in}


def classify(t: TriangleParams, n: int, n_anc: int, m: int, m_anc: int) -> TriangleClass:
    if n + n_anc != t.n or m + m_anc != t.n:
        return NotTriangular(f"split {n}+{n_anc} -> {m}+{m_anc} does not match size {t.n}")
    try:
        check_invariants(t, ANGLE_EPS)
    except InvariantViolation as exc:
        return NotTriangular(f"property 1: {exc}")
    if n_anc == 0 and m_anc == 0:
        return PlainT()
    for (kind, i, j), (cin, cout) in light_cones(t).items():
        if min(cin) >= n:
            return NotTriangular(f"property 2: {kind}[{i},{j}] is fully connected to the ancilla inputs")
        if min(cout) >= m:
            return NotTriangular(f"property 3: {kind}[{i},{j}] is fully connected to the ancilla outputs")
    # An ancilla wire on both sides must carry a nonzero beam splitter,
    # otherwise it would be an idle source-to-detector wire.
    touched = set()
    for (i, j) in t.nonzero_bs():
        touched.update((i + j - 2, i + j - 1))
    for w in range(max(n, m), t.n):
        if w not in touched:
            return NotTriangular(f"property 4: ancilla wire {w} carries no beam splitter")
    if m_anc == n:
        return Trec(n, n_anc, m, m_anc)
    return Tmn(n, n_anc, m, m_anc)


def literal_zero_predicate(t: TriangleParams, n: int, m: int, side: str, order: str) -> set[tuple[int, int]]:
    """Slots forced to zero by the textual rule for properties 2 (``side='in'``) or 3 (``'out'``).

    ``order`` selects the comparison on the previous row: ``'lt'`` for
    ``k < i`` and ``'ge'`` for ``k ≥ i``. Used to test which reading matches
    the light-cone semantics.
    """
    bound = n if side == "in" else m
    forced = set()
    for (i, j) in t.phi:
        row = i + j - 1
        if row <= bound:
            continue
        prev = [(k, l) for (k, l) in t.theta if k + l - 1 == row - 1]
        if order == "lt":
            prev = [(k, l) for (k, l) in prev if k < i]
        else:
            prev = [(k, l) for (k, l) in prev if k >= i]
        if not any(t.theta[s] != 0.0 for s in prev):
            forced.add((i, j))
    return forced


# ---------------------------------------------------------------------------
# T_rec extraction


@dataclass(frozen=True)
class TrecExtraction:
    """``⟦t⟧ = (D2 ⊕ P_out) · (1_δ ⊕ ◇) · (D ⊕ P_in)`` with ``δ = n - m̃``.

    ``P_in`` / ``P_out`` are diagonal phases on the ancilla wires. They act
    trivially once those wires carry vacuum sources and detectors, but a
    diamond cannot absorb them: phases on ancilla-only wires are exactly the
    generators that properties 2 and 3 forbid.
    """

    d: Circuit
    diamond: TriangleParams
    d2: Circuit
    in_phases: tuple[float, ...]
    out_phases: tuple[float, ...]

    def matrix(self) -> np.ndarray:
        n, m = self.d.n_in, self.d2.n_in
        n_anc, m_anc = len(self.in_phases), len(self.out_phases)
        pin = np.diag(np.exp(1j * np.array(self.in_phases, dtype=float))).reshape(n_anc, n_anc)
        pout = np.diag(np.exp(1j * np.array(self.out_phases, dtype=float))).reshape(m_anc, m_anc)
        size = n + n_anc
        mid = _dsum(np.eye(size - self.diamond.n, dtype=complex), triangle_matrix(self.diamond))
        return _dsum(matrix_of(self.d2), pout) @ mid @ _dsum(matrix_of(self.d), pin)


def _dsum(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0] + b.shape[0],) * 2, dtype=complex)
    out[: a.shape[0], : a.shape[0]] = a
    out[a.shape[0] :, a.shape[0] :] = b
    return out


def _rq(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``x = r @ q`` with ``r`` upper triangular and ``q`` unitary."""
    flip = np.eye(x.shape[0])[::-1]
    q1, r1 = np.linalg.qr((flip @ x).conj().T)
    return flip @ r1.conj().T @ flip, flip @ q1.conj().T


def _ql(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``y = q @ l`` with ``q`` unitary and ``l`` lower triangular."""
    flip = np.eye(y.shape[0])[::-1]
    q1, r1 = np.linalg.qr(flip @ y @ flip)
    return flip @ q1 @ flip, flip @ r1 @ flip


def _complete(w: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the complement of the orthonormal columns of ``w``."""
    m, k = w.shape
    if k == 0:
        return np.eye(m, dtype=complex)
    q, _ = np.linalg.qr(np.hstack([w, np.eye(m, dtype=complex)]))
    g = q[:, k:m]
    g = g - w @ (w.conj().T @ g)
    return np.linalg.qr(g)[0][:, : m - k]


def _identity_circuit(n: int) -> Circuit:
    return Circuit.identity(n)


def extract_trec(t: TriangleParams, n: int, n_anc: int, m: int, m_anc: int) -> TrecExtraction:
    """Split a Tmn-circuit into ``D : n→n``, a T_rec diamond on the last ``m̃ + ñ`` wires and ``D2 : m→m``.

    Matrix-level factorization: ``D`` clears the columns of the visible inputs
    that never reach an ancilla output, ``D2`` collects the rows they land on,
    and the remaining freedom (a unitary on the diamond's visible inputs and
    one on its visible outputs, plus diagonal phases) is fixed by matching the
    zero and phase pattern every T_rec matrix has: the ancilla-out × visible-in
    block is upper triangular with diagonal phase ``i^ñ``, the visible-out ×
    ancilla-in block is lower triangular, and the last row has phases
    ``i^(N-1-c)``. Each factor is re-synthesized and the product is checked.
    """
    cls = classify(t, n, n_anc, m, m_anc)
    if not isinstance(cls, Tmn):
        raise NotTmn(f"not a Tmn-circuit: {cls}")
    delta = n - m_anc
    size = m_anc + n_anc
    if isinstance(cls, Trec):
        return TrecExtraction(_identity_circuit(n), t, _identity_circuit(m), (0.0,) * n_anc, (0.0,) * m_anc)
    u = triangle_matrix(t)
    if n_anc == 0:
        # nothing to extract: the diamond is empty and D2 ∘ D reproduces u
        return TrecExtraction(
            triangle_to_circuit(synthesize_triangle(u)),
            TriangleParams.zeros(0),
            _identity_circuit(m),
            (),
            (0.0,) * m_anc,
        )
    if m_anc == 0:
        return TrecExtraction(
            _identity_circuit(n),
            TriangleParams.zeros(0),
            triangle_to_circuit(synthesize_triangle(u)),
            (0.0,) * n_anc,
            (),
        )

    # D: null space of the ancilla-out × visible-in block first, then its row space
    b = u[m:, :n]
    _, _, vh = np.linalg.svd(b)
    v = vh.conj().T
    null, rng = v[:, m_anc:], v[:, :m_anc]
    r, q = _rq(b @ rng)
    rng = rng @ q.conj().T
    d_inv = np.hstack([null, rng])
    w = u @ _dsum(d_inv, np.eye(n_anc, dtype=complex))

    # D2: the images of the cleared columns, then a completion made lower triangular
    lead = w[:m, :delta]
    g = _complete(lead)
    qy, _ = _ql(g.conj().T @ w[:m, n:])
    g = g @ qy
    d2 = np.hstack([lead, g])
    dia = (_dsum(d2.conj().T, np.eye(m_anc, dtype=complex)) @ w)[delta:, delta:]

    # diagonal gauge: Δ = diag(e^{iβ}) Δ' diag(e^{-iα})
    alpha = np.zeros(size)
    beta = np.zeros(size)
    last = size - 1
    for c in range(m_anc - 1, size):
        alpha[c] = (last - c) * HALF_PI - cmath.phase(dia[last, c])
    for k in range(m_anc - 1):
        beta[n_anc + k] = cmath.phase(dia[n_anc + k, k]) + alpha[k] - n_anc * HALF_PI
    dia = np.exp(-1j * beta)[:, None] * dia * np.exp(1j * alpha)[None, :]

    d_mat = np.linalg.inv(d_inv)
    d_mat[delta:, :] *= np.exp(-1j * alpha[:m_anc])[:, None]
    d2[:, delta:] *= np.exp(1j * beta[:n_anc])[None, :]
    diamond = synthesize_triangle(dia)
    out = TrecExtraction(
        triangle_to_circuit(synthesize_triangle(d_mat)),
        diamond,
        triangle_to_circuit(synthesize_triangle(d2)),
        tuple(float(mod2pi(-a)) for a in alpha[m_anc:]),
        tuple(float(mod2pi(x)) for x in beta[n_anc:]),
    )
    if not isinstance(classify(diamond, m_anc, n_anc, n_anc, m_anc), Trec):
        raise NotTmn("degenerate Tmn-circuit: the diamond has a vanishing beam splitter")
    err = float(np.abs(out.matrix() - u).max())
    if err > 1e-9:
        raise NotTmn(f"factorization residual {err:.3g} (degenerate input)")
    return out
