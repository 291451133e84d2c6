"""Finite-support Fock states and the many-photon semantics of circuits."""

from __future__ import annotations

import cmath
import math
import re
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Iterator, Mapping

import numpy as np

from . import _kernels

if TYPE_CHECKING:
    from .circuit import Circuit

PRUNE_EPS = 1e-12

Occupation = tuple[int, ...]


class FockError(ValueError):
    """Base class for errors raised by the Fock-space layer."""


class BadMode(FockError):
    pass


class BadInput(FockError):
    pass


class PhotonCapExceeded(FockError):
    pass


@dataclass(frozen=True)
class EvalConfig:
    prune_eps: float = PRUNE_EPS
    max_photons: int | None = None

    def __post_init__(self) -> None:
        if not self.prune_eps > 0:
            raise ValueError("prune_eps must be positive")


DEFAULT_CONFIG = EvalConfig()


class FockVector:
    """Sparse complex superposition of occupation-number basis states.

    ``modes == 0`` represents a scalar, stored under the empty occupation ``()``.
    Terms below ``prune_eps`` in magnitude are dropped on construction.
    """

    __slots__ = ("modes", "_amps")

    def __init__(
        self,
        modes: int,
        amps: Mapping[Occupation, complex] | Iterable[tuple[Occupation, complex]] = (),
        prune_eps: float = PRUNE_EPS,
    ) -> None:
        if modes < 0:
            raise BadMode(f"negative mode count {modes}")
        items = amps.items() if isinstance(amps, Mapping) else amps
        acc: dict[Occupation, complex] = {}
        for occ, a in items:
            occ = tuple(int(k) for k in occ)
            if len(occ) != modes:
                raise BadMode(f"occupation {occ} does not have {modes} modes")
            if any(k < 0 for k in occ):
                raise BadInput(f"negative occupation in {occ}")
            acc[occ] = acc.get(occ, 0j) + complex(a)
        self.modes = modes
        self._amps = {k: v for k, v in sorted(acc.items()) if abs(v) >= prune_eps}

    @classmethod
    def basis(cls, occ: Iterable[int]) -> FockVector:
        occ = tuple(occ)
        return cls(len(occ), {occ: 1.0})

    @classmethod
    def scalar(cls, value: complex) -> FockVector:
        return cls(0, {(): value})

    @classmethod
    def zero(cls, modes: int) -> FockVector:
        return cls(modes)

    def items(self) -> Iterator[tuple[Occupation, complex]]:
        return iter(self._amps.items())

    def support(self) -> list[Occupation]:
        return list(self._amps)

    def __getitem__(self, occ: Occupation) -> complex:
        return self._amps.get(tuple(occ), 0j)

    def __len__(self) -> int:
        return len(self._amps)

    def __iter__(self) -> Iterator[Occupation]:
        return iter(self._amps)

    def __bool__(self) -> bool:
        return bool(self._amps)

    def is_zero(self) -> bool:
        return not self._amps

    def as_dict(self) -> dict[Occupation, complex]:
        return dict(self._amps)

    def max_photons(self) -> int:
        return max((sum(o) for o in self._amps), default=0)

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self._amps.values()))

    def scale(self, z: complex) -> FockVector:
        return FockVector(self.modes, ((o, z * a) for o, a in self._amps.items()))

    def __add__(self, other: FockVector) -> FockVector:
        if other.modes != self.modes:
            raise BadMode(f"cannot add {self.modes}-mode and {other.modes}-mode vectors")
        return FockVector(self.modes, list(self._amps.items()) + list(other._amps.items()))

    def __sub__(self, other: FockVector) -> FockVector:
        return self + other.scale(-1.0)

    def __mul__(self, z: complex) -> FockVector:
        return self.scale(z)

    __rmul__ = __mul__

    def distance(self, other: FockVector) -> float:
        """Max-norm of the coefficient difference."""
        if other.modes != self.modes:
            raise BadMode("mode count mismatch")
        keys = set(self._amps) | set(other._amps)
        return max((abs(self[k] - other[k]) for k in keys), default=0.0)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FockVector):
            return NotImplemented
        return self.modes == other.modes and self._amps == other._amps

    def __hash__(self) -> int:
        return hash((self.modes, tuple(self._amps.items())))

    def __repr__(self) -> str:
        return f"FockVector({self.modes}, {format_state(self)})"


class DualFockVector(FockVector):
    """A bra ``<g| = sum_k g_k <k|``. Coefficients are stored as they pair, without conjugation."""

    __slots__ = ()

    def __repr__(self) -> str:
        return f"DualFockVector({self.modes}, {format_state(self)})"


def as_dual(v: FockVector) -> DualFockVector:
    return DualFockVector(v.modes, v.as_dict())


def _check_mode(v: FockVector, mode: int, width: int = 1) -> None:
    if mode < 0 or mode + width > v.modes:
        raise BadMode(f"mode {mode} (width {width}) out of range for {v.modes} modes")


def apply_phase(phi: float, mode: int, v: FockVector, prune_eps: float = PRUNE_EPS) -> FockVector:
    _check_mode(v, mode)
    return FockVector(
        v.modes,
        ((o, a * cmath.exp(1j * o[mode] * phi)) for o, a in v.items()),
        prune_eps,
    )


def apply_bs(theta: float, wire: int, v: FockVector, prune_eps: float = PRUNE_EPS) -> FockVector:
    """Beam splitter on modes ``(wire, wire+1)``; photon number is preserved termwise."""
    _check_mode(v, wire, 2)
    out: dict[Occupation, complex] = {}
    cache: dict[tuple[int, int], np.ndarray] = {}
    for o, a in v.items():
        k1, k2 = o[wire], o[wire + 1]
        col = cache.get((k1, k2))
        if col is None:
            col = _kernels.bs_column(k1, k2, theta)
            cache[(k1, k2)] = col
        n = k1 + k2
        for r in range(n + 1):
            amp = col[r]
            if amp == 0:
                continue
            key = o[:wire] + (r, n - r) + o[wire + 2 :]
            out[key] = out.get(key, 0j) + a * amp
    return FockVector(v.modes, out, prune_eps)


def apply_creation(mode: int, v: FockVector) -> FockVector:
    _check_mode(v, mode)
    return FockVector(
        v.modes,
        ((o[:mode] + (o[mode] + 1,) + o[mode + 1 :], a * math.sqrt(o[mode] + 1)) for o, a in v.items()),
    )


def apply_swap(wire: int, v: FockVector) -> FockVector:
    _check_mode(v, wire, 2)
    return FockVector(
        v.modes,
        ((o[:wire] + (o[wire + 1], o[wire]) + o[wire + 2 :], a) for o, a in v.items()),
    )


def inner_product(g: FockVector, v: FockVector) -> complex:
    """Pairing ``<g|v>``; ``g`` holds bra coefficients already."""
    if g.modes != v.modes:
        raise BadMode(f"bra has {g.modes} modes, ket has {v.modes}")
    if len(g) > len(v):
        return sum((g[o] * a for o, a in v.items()), 0j)
    return sum((a * v[o] for o, a in g.items()), 0j)


def tensor(v1: FockVector, v2: FockVector) -> FockVector:
    return FockVector(
        v1.modes + v2.modes,
        ((o1 + o2, a1 * a2) for o1, a1 in v1.items() for o2, a2 in v2.items()),
    )


def insert_state(v: FockVector, at: int, s: FockVector, prune_eps: float = PRUNE_EPS) -> FockVector:
    """Tensor ``s`` into ``v`` so that its modes start at position ``at``."""
    if not 0 <= at <= v.modes:
        raise BadMode(f"insertion point {at} out of range for {v.modes} modes")
    return FockVector(
        v.modes + s.modes,
        ((o[:at] + so + o[at:], a * sa) for o, a in v.items() for so, sa in s.items()),
        prune_eps,
    )


def contract(g: FockVector, at: int, v: FockVector, prune_eps: float = PRUNE_EPS) -> FockVector:
    """Partial pairing of the bra ``g`` with modes ``[at, at + g.modes)`` of ``v``."""
    _check_mode(v, at, g.modes)
    w = g.modes
    out: dict[Occupation, complex] = {}
    for o, a in v.items():
        coeff = g[o[at : at + w]]
        if coeff == 0:
            continue
        key = o[:at] + o[at + w :]
        out[key] = out.get(key, 0j) + coeff * a
    return FockVector(v.modes - w, out, prune_eps)


def eval_circuit(c: Circuit, v: FockVector, cfg: EvalConfig = DEFAULT_CONFIG) -> FockVector:
    """Apply the many-photon semantics of ``c`` to ``v`` column by column."""
    from .circuit import BeamSplitter, Detector, PhaseShifter, Source, Swap, _application_order

    if v.modes != c.n_in:
        raise BadInput(f"circuit expects {c.n_in} modes, got a {v.modes}-mode state")
    eps = cfg.prune_eps
    cur = v
    for column in c.columns:
        for gen in _application_order(column):
            if isinstance(gen, PhaseShifter):
                cur = apply_phase(gen.phi, gen.wire, cur, eps)
            elif isinstance(gen, BeamSplitter):
                cur = apply_bs(gen.theta, gen.wire, cur, eps)
            elif isinstance(gen, Swap):
                cur = apply_swap(gen.wire, cur)
            elif isinstance(gen, Source):
                cur = insert_state(cur, gen.wire, gen.state, eps)
            elif isinstance(gen, Detector):
                cur = contract(gen.effect, gen.wire, cur, eps)
            else:  # pragma: no cover - closed variant
                raise TypeError(f"unknown generator {gen!r}")
        if cfg.max_photons is not None and cur.max_photons() > cfg.max_photons:
            raise PhotonCapExceeded(f"state exceeds {cfg.max_photons} photons")
    return cur


def sector_basis(modes: int, photons: int) -> list[Occupation]:
    """All occupation vectors over ``modes`` modes with exactly ``photons`` photons, lexicographic."""
    if modes == 0:
        return [()] if photons == 0 else []
    if modes == 1:
        return [(photons,)]
    out = []
    for k in range(photons + 1):
        out.extend((k,) + rest for rest in sector_basis(modes - 1, photons - k))
    return out


def probe_basis(modes: int, max_photons: int) -> list[Occupation]:
    """Occupation vectors with total photon number at most ``max_photons``."""
    out: list[Occupation] = []
    for n in range(max_photons + 1):
        out.extend(sector_basis(modes, n))
    return out


_COMPLEX_RE = re.compile(r"^\s*([^:;{}]+?)\s*$")


def parse_complex(text: str) -> complex:
    t = text.strip().replace(" ", "")
    if not _COMPLEX_RE.match(t) or not t:
        raise ValueError(f"bad complex literal {text!r}")
    t = t.replace("I", "i")
    if t.endswith("i"):
        body = t[:-1]
        if body in ("", "+", "-"):
            body += "1"
        elif body[-1] in "+-":
            body += "1"
        t = body + "j"
    try:
        return complex(t)
    except ValueError as exc:
        raise ValueError(f"bad complex literal {text!r}") from exc


def format_complex(z: complex) -> str:
    re_, im = z.real + 0.0, z.imag + 0.0
    sign = "-" if math.copysign(1.0, im) < 0 else "+"
    return f"{re_!r}{sign}{abs(im)!r}i"


def format_state(v: FockVector) -> str:
    if not len(v):
        return "{ }"
    body = " ; ".join(f"{','.join(map(str, o))}: {format_complex(a)}" for o, a in v.items())
    return "{ " + body + " }"


def parse_state(text: str, modes: int | None = None) -> FockVector:
    """Parse ``{ n1,...,nk: a+bi ; ... }``. An empty body gives the zero vector."""
    t = text.strip()
    if not (t.startswith("{") and t.endswith("}")):
        raise ValueError(f"state must be enclosed in braces: {text!r}")
    body = t[1:-1].strip()
    terms: list[tuple[Occupation, complex]] = []
    if body:
        for chunk in body.split(";"):
            if not chunk.strip():
                continue
            if ":" not in chunk:
                raise ValueError(f"term without ':' in {chunk!r}")
            occ_txt, amp_txt = chunk.split(":", 1)
            occ_txt = occ_txt.strip()
            occ = tuple(int(x) for x in occ_txt.split(",")) if occ_txt else ()
            terms.append((occ, parse_complex(amp_txt)))
    if modes is None:
        if not terms:
            raise ValueError("cannot infer mode count of an empty state")
        modes = len(terms[0][0])
    return FockVector(modes, terms)
