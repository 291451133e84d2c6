"""Numeric kernels for the beam-splitter action on Fock sectors.

Two interchangeable backends are provided. The numba one is used by default;
setting ``LOV_DISABLE_NUMBA=1`` selects the pure-numpy path (useful for
debugging and for platforms without numba).
"""

from __future__ import annotations

import functools
import math
import os

import numpy as np

MAX_FACTORIAL = 170

# Above this photon number the alternating double sum loses digits to
# cancellation (about 1e-11 at 32 photons), so sectors are built from the
# eigendecomposition of the generator instead.
STABLE_LIMIT = 24

LN_FACT = np.array([math.lgamma(k + 1.0) for k in range(MAX_FACTORIAL + 1)])

# i**b for b mod 4
_I_POW = np.array([1.0 + 0.0j, 1.0j, -1.0 + 0.0j, -1.0j])


def _numba_disabled() -> bool:
    return os.environ.get("LOV_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")


def _bs_column_loop(k1, k2, c, s, lnf, ipow):
    """Amplitudes of B|k1,k2> indexed by the photon count of the first output mode."""
    n = k1 + k2
    out = np.zeros(n + 1, dtype=np.complex128)
    lc = math.log(abs(c)) if c != 0.0 else 0.0
    ls = math.log(abs(s)) if s != 0.0 else 0.0
    norm = -0.5 * (lnf[k1] + lnf[k2])
    for p in range(k1 + 1):
        lbin1 = lnf[k1] - lnf[p] - lnf[k1 - p]
        for q in range(k2 + 1):
            a = p + k2 - q
            b = k1 - p + q
            if a > 0 and c == 0.0:
                continue
            if b > 0 and s == 0.0:
                continue
            lbin2 = lnf[k2] - lnf[q] - lnf[k2 - q]
            r = p + q
            logmag = lbin1 + lbin2 + a * lc + b * ls + norm + 0.5 * (lnf[r] + lnf[n - r])
            sign = 1.0
            if c < 0.0 and a % 2 == 1:
                sign = -sign
            if s < 0.0 and b % 2 == 1:
                sign = -sign
            out[r] += sign * ipow[b % 4] * math.exp(logmag)
    return out


def _bs_column_numpy(k1, k2, c, s, lnf, ipow):
    n = k1 + k2
    p = np.arange(k1 + 1)[:, None]
    q = np.arange(k2 + 1)[None, :]
    a = p + k2 - q
    b = k1 - p + q
    r = p + q
    lc = math.log(abs(c)) if c != 0.0 else 0.0
    ls = math.log(abs(s)) if s != 0.0 else 0.0
    logmag = (
        lnf[k1] - lnf[p] - lnf[k1 - p]
        + lnf[k2] - lnf[q] - lnf[k2 - q]
        + a * lc + b * ls
        - 0.5 * (lnf[k1] + lnf[k2])
        + 0.5 * (lnf[r] + lnf[n - r])
    )
    alive = np.ones(logmag.shape, dtype=bool)
    if c == 0.0:
        alive &= a == 0
    if s == 0.0:
        alive &= b == 0
    sign = np.ones(logmag.shape)
    if c < 0.0:
        sign = np.where(a % 2 == 1, -sign, sign)
    if s < 0.0:
        sign = np.where(b % 2 == 1, -sign, sign)
    terms = np.where(alive, sign * ipow[b % 4] * np.exp(logmag), 0.0)
    out = np.zeros(n + 1, dtype=np.complex128)
    np.add.at(out, r.ravel(), terms.ravel())
    return out


def _bs_sector_numpy(n, c, s, lnf, ipow):
    mat = np.zeros((n + 1, n + 1), dtype=np.complex128)
    for k1 in range(n + 1):
        mat[:, k1] = _bs_column_numpy(k1, n - k1, c, s, lnf, ipow)
    return mat


def _select():
    if _numba_disabled():
        return _bs_column_numpy, _bs_sector_numpy, "numpy"
    try:
        import numba
    except ImportError:  # pragma: no cover - numba is a declared dependency
        return _bs_column_numpy, _bs_sector_numpy, "numpy"
    col = numba.njit(cache=True)(_bs_column_loop)

    @numba.njit(cache=True)
    def sector(n, c, s, lnf, ipow):
        mat = np.zeros((n + 1, n + 1), dtype=np.complex128)
        for k1 in range(n + 1):
            mat[:, k1] = col(k1, n - k1, c, s, lnf, ipow)
        return mat

    return col, sector, "numba"


_column, _sector, BACKEND = _select()


def _check(n: int) -> None:
    if n > MAX_FACTORIAL:
        raise OverflowError(f"photon number {n} exceeds the factorial table ({MAX_FACTORIAL})")


@functools.lru_cache(maxsize=64)
def _stable_sector(n: int, theta: float) -> np.ndarray:
    # B_theta = exp(i theta (a1† a2 + a2† a1)); on n photons the generator is
    # tridiagonal in the first-mode occupation with integer spectrum n - 2k.
    k = np.arange(n)
    off = np.sqrt((k + 1.0) * (n - k))
    gen = np.diag(off, 1) + np.diag(off, -1)
    _, vecs = np.linalg.eigh(gen)
    spectrum = np.rint(np.einsum("ij,jk,ki->i", vecs.T, gen, vecs))
    mat = (vecs * np.exp(1j * theta * spectrum)) @ vecs.T
    mat.flags.writeable = False
    return mat


def bs_column(k1: int, k2: int, theta: float) -> np.ndarray:
    """Return ``B_theta |k1, k2>`` as a vector indexed by the first output occupation."""
    _check(k1 + k2)
    if k1 + k2 > STABLE_LIMIT:
        return _stable_sector(k1 + k2, float(theta))[:, k1].copy()
    return _column(k1, k2, math.cos(theta), math.sin(theta), LN_FACT, _I_POW)


def bs_sector(n: int, theta: float) -> np.ndarray:
    """Matrix of ``B_theta`` on the sector of ``n`` photons in two modes.

    Column ``k`` is the input ``|k, n-k>``; row ``r`` the output ``|r, n-r>``.
    """
    _check(n)
    if n > STABLE_LIMIT:
        return _stable_sector(n, float(theta)).copy()
    return _sector(n, math.cos(theta), math.sin(theta), LN_FACT, _I_POW)


def bs_column_numpy(k1: int, k2: int, theta: float) -> np.ndarray:
    """Reference path, always numpy. Used by the benchmark and by cross-checks."""
    _check(k1 + k2)
    return _bs_column_numpy(k1, k2, math.cos(theta), math.sin(theta), LN_FACT, _I_POW)


def bs_sector_numpy(n: int, theta: float) -> np.ndarray:
    _check(n)
    return _bs_sector_numpy(n, math.cos(theta), math.sin(theta), LN_FACT, _I_POW)
