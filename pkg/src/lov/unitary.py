"""Single-photon (matrix) semantics of LOpp circuits.

Index convention: ``U[i, j]`` is the amplitude for a photon entering on wire
``j`` to leave on wire ``i``. Sequential composition multiplies on the left,
so ``matrix_of(c1 then c2) == matrix_of(c2) @ matrix_of(c1)``.
"""

from __future__ import annotations

import cmath
import math

import numpy as np

from .circuit import BeamSplitter, Circuit, PhaseShifter, Swap

UNITARY_TOL = 1e-9


class NotLOpp(ValueError):
    pass


class DimMismatch(ValueError):
    pass


class NotUnitary(ValueError):
    pass


def bs_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, 1j * s], [1j * s, c]], dtype=complex)


def ps_matrix(phi: float) -> np.ndarray:
    return np.array([[cmath.exp(1j * phi)]], dtype=complex)


def embed(block: np.ndarray, at: int, n: int) -> np.ndarray:
    out = np.eye(n, dtype=complex)
    k = block.shape[0]
    out[at : at + k, at : at + k] = block
    return out


def matrix_of(c: Circuit) -> np.ndarray:
    if not c.is_lopp:
        raise NotLOpp("circuit contains sources or detectors")
    n = c.n_in
    u = np.eye(n, dtype=complex)
    for col in c.columns:
        for g in col:
            if isinstance(g, PhaseShifter):
                u[g.wire, :] *= cmath.exp(1j * g.phi)
            elif isinstance(g, BeamSplitter):
                u[g.wire : g.wire + 2, :] = bs_matrix(g.theta) @ u[g.wire : g.wire + 2, :]
            elif isinstance(g, Swap):
                u[[g.wire, g.wire + 1], :] = u[[g.wire + 1, g.wire], :]
    return u


def direct_sum(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    na, nb = a.shape[0], b.shape[0]
    out = np.zeros((na + nb, na + nb), dtype=complex)
    out[:na, :na] = a
    out[na:, na:] = b
    return out


def multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[1] != b.shape[0]:
        raise DimMismatch(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def unitarity_error(u: np.ndarray) -> float:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return math.inf
    return float(np.abs(u.conj().T @ u - np.eye(u.shape[0])).max()) if u.size else 0.0


def check_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    err = unitarity_error(u)
    if not err < tol:
        raise NotUnitary(f"matrix is not unitary (error {err:.3g})")
    return u


def random_unitary(n: int, seed: int | np.random.Generator | None = None) -> np.ndarray:
    """Haar-random ``n x n`` unitary: QR of a complex Gaussian with the phase fix of Mezzadri."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def format_matrix(u: np.ndarray) -> str:
    def fmt(z: complex) -> str:
        sign = "-" if z.imag < 0 else "+"
        return f"{z.real:.12g}{sign}{abs(z.imag):.12g}i"

    return "\n".join(" ".join(fmt(z) for z in row) for row in np.asarray(u))


def matrix_to_obj(u: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(u)]


def matrix_from_obj(obj: list) -> np.ndarray:
    try:
        return np.array([[complex(re, im) for re, im in row] for row in obj], dtype=complex)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"matrix must be nested [re, im] pairs: {exc}") from exc
