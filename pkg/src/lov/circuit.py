"""Circuit representation, composition, validation, text DSL and JSON persistence.

A circuit is a list of columns. Inside a column every generator is positioned
with respect to the column's *input* wires: gates and detectors name the first
wire they consume, a source names the insertion point (the input wire it is
placed above, or ``n`` for the bottom). Columns are applied left to right.
"""

from __future__ import annotations

import ast
import json
import math
import operator
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

from .fock import DualFockVector, FockVector, format_state, parse_state


class CircuitError(ValueError):
    pass


class ModeMismatch(CircuitError):
    pass


class DslSyntaxError(CircuitError):
    def __init__(self, message: str, line: int, col: int = 1) -> None:
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


class SemanticError(CircuitError):
    def __init__(self, message: str, line: int | None = None) -> None:
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line


class SchemaError(CircuitError):
    pass


# ---------------------------------------------------------------------------
# generators


@dataclass(frozen=True)
class PhaseShifter:
    wire: int
    phi: float
    expr: str | None = field(default=None, compare=False)

    n_consumed = 1
    n_produced = 1

    @property
    def lo(self) -> int:
        return self.wire


@dataclass(frozen=True)
class BeamSplitter:
    wire: int
    theta: float
    expr: str | None = field(default=None, compare=False)

    n_consumed = 2
    n_produced = 2

    @property
    def lo(self) -> int:
        return self.wire


@dataclass(frozen=True)
class Swap:
    wire: int

    n_consumed = 2
    n_produced = 2

    @property
    def lo(self) -> int:
        return self.wire


@dataclass(frozen=True)
class Source:
    wire: int
    state: FockVector

    n_consumed = 0

    @property
    def n_produced(self) -> int:
        return self.state.modes

    @property
    def lo(self) -> int:
        return self.wire


@dataclass(frozen=True)
class Detector:
    wire: int
    effect: DualFockVector

    n_produced = 0

    @property
    def n_consumed(self) -> int:
        return self.effect.modes

    @property
    def lo(self) -> int:
        return self.wire


Generator = Union[PhaseShifter, BeamSplitter, Swap, Source, Detector]
Gate = Union[PhaseShifter, BeamSplitter, Swap]


def shifted(g: Generator, by: int) -> Generator:
    if isinstance(g, PhaseShifter):
        return PhaseShifter(g.wire + by, g.phi, g.expr)
    if isinstance(g, BeamSplitter):
        return BeamSplitter(g.wire + by, g.theta, g.expr)
    if isinstance(g, Swap):
        return Swap(g.wire + by)
    if isinstance(g, Source):
        return Source(g.wire + by, g.state)
    return Detector(g.wire + by, g.effect)


def _application_order(column: Iterable[Generator]) -> list[Generator]:
    # Bottom-up keeps the input indices of the remaining generators valid; at
    # equal positions the source goes last since it sits above that wire.
    return sorted(column, key=lambda g: (g.lo, 0 if isinstance(g, Source) else 1), reverse=True)


# ---------------------------------------------------------------------------
# circuits


@dataclass(frozen=True)
class Circuit:
    n_in: int
    n_out: int
    columns: tuple[tuple[Generator, ...], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "columns", tuple(tuple(col) for col in self.columns))

    @staticmethod
    def identity(n: int) -> Circuit:
        return Circuit(n, n, ())

    @staticmethod
    def from_sequence(n_in: int, gens: Sequence[Generator]) -> Circuit:
        """One generator per column, indices relative to the running wire layout."""
        n = n_in
        for g in gens:
            n += g.n_produced - g.n_consumed
        return Circuit(n_in, n, tuple((g,) for g in gens))

    @property
    def is_lopp(self) -> bool:
        return all(not isinstance(g, (Source, Detector)) for col in self.columns for g in col)

    def generators(self) -> list[Generator]:
        return [g for col in self.columns for g in col]

    def sequence(self) -> list[Generator]:
        """Generators in application order with running-layout indices."""
        return [g for col in self.columns for g in _application_order(col)]

    def widths(self) -> list[int]:
        """Mode count before each column, plus the final count."""
        out = [self.n_in]
        n = self.n_in
        for col in self.columns:
            n += sum(g.n_produced - g.n_consumed for g in col)
            out.append(n)
        return out

    def __len__(self) -> int:
        return sum(len(col) for col in self.columns)


def compose_seq(c1: Circuit, c2: Circuit) -> Circuit:
    """``c2 ∘ c1``: run ``c1`` then ``c2``."""
    if c1.n_out != c2.n_in:
        raise ModeMismatch(f"cannot compose {c1.n_in}->{c1.n_out} with {c2.n_in}->{c2.n_out}")
    return Circuit(c1.n_in, c2.n_out, c1.columns + c2.columns)


def compose_tensor(c1: Circuit, c2: Circuit) -> Circuit:
    """Place ``c2`` below ``c1``; columns are zipped and ``c2`` is shifted by ``c1``'s width."""
    w1 = c1.widths()
    cols = []
    for t in range(max(len(c1.columns), len(c2.columns))):
        top = c1.columns[t] if t < len(c1.columns) else ()
        width = w1[min(t, len(c1.columns))]
        bottom = tuple(shifted(g, width) for g in c2.columns[t]) if t < len(c2.columns) else ()
        cols.append(top + bottom)
    return Circuit(c1.n_in + c2.n_in, c1.n_out + c2.n_out, tuple(cols))


def tensor_all(circuits: Iterable[Circuit]) -> Circuit:
    out = Circuit.identity(0)
    for c in circuits:
        out = compose_tensor(out, c)
    return out


def compose_all(circuits: Iterable[Circuit]) -> Circuit:
    it = iter(circuits)
    out = next(it)
    for c in it:
        out = compose_seq(out, c)
    return out


def canonicalize_layout(c: Circuit) -> Circuit:
    """Pack generators into the earliest column allowed by wire dependencies.

    Gates slide freely across independent wires. Sources and detectors act as
    barriers: nothing crosses them, which keeps the packing planar without
    tracking wire births and deaths.
    """
    seq = c.sequence()
    cols: list[list[Generator]] = []
    last_on_wire: dict[int, int] = {}
    barrier = -1
    for g in seq:
        if isinstance(g, (Source, Detector)):
            t = max([barrier] + list(last_on_wire.values())) + 1
            barrier = t
            last_on_wire = {}
        else:
            wires = range(g.wire, g.wire + g.n_consumed)
            t = max([barrier] + [last_on_wire.get(w, -1) for w in wires]) + 1
            for w in wires:
                last_on_wire[w] = t
        while len(cols) <= t:
            cols.append([])
        cols[t].append(g)
    fixed: list[tuple[Generator, ...]] = [tuple(sorted(col, key=lambda g: (g.lo, isinstance(g, Source)))) for col in cols]
    return Circuit(c.n_in, c.n_out, tuple(fixed))


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    kind: str
    column: int | None
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> list[str]:
        return [v.kind for v in self.violations]

    def __bool__(self) -> bool:
        return self.ok


def validate(c: Circuit) -> ValidationReport:
    out: list[Violation] = []
    n = c.n_in
    for t, col in enumerate(c.columns):
        used: dict[int, Generator] = {}
        inserts: dict[int, Generator] = {}
        delta = 0
        for g in col:
            if isinstance(g, Source):
                if g.state.modes < 1:
                    out.append(Violation("ArityViolation", t, "source with no output modes"))
                if g.state.is_zero():
                    out.append(Violation("StateViolation", t, "source state is empty"))
                if not 0 <= g.wire <= n:
                    out.append(Violation("WireRangeViolation", t, f"source insertion point {g.wire} outside 0..{n}"))
                if g.wire in inserts:
                    out.append(Violation("OverlapViolation", t, f"two sources inserted at {g.wire}"))
                inserts[g.wire] = g
                delta += g.state.modes
                continue
            span = g.n_consumed
            if isinstance(g, Detector):
                if g.effect.modes < 1:
                    out.append(Violation("ArityViolation", t, "detector with no input modes"))
                    continue
                if g.effect.is_zero():
                    out.append(Violation("StateViolation", t, "detector effect is empty"))
                delta -= span
            if g.wire < 0 or g.wire + span > n:
                out.append(Violation("WireRangeViolation", t, f"{type(g).__name__} on wires {g.wire}..{g.wire + span - 1} outside 0..{n - 1}"))
                continue
            for w in range(g.wire, g.wire + span):
                if w in used:
                    out.append(Violation("OverlapViolation", t, f"wire {w} used by {type(used[w]).__name__} and {type(g).__name__}"))
                used[w] = g
        for w, s in inserts.items():
            for g in col:
                if g is s or isinstance(g, Source):
                    continue
                if g.n_consumed >= 2 and g.wire < w < g.wire + g.n_consumed:
                    out.append(Violation("OverlapViolation", t, f"source inserted inside the span of {type(g).__name__}"))
        for g in col:
            for ang in (getattr(g, "phi", None), getattr(g, "theta", None)):
                if ang is not None and not math.isfinite(ang):
                    out.append(Violation("AngleViolation", t, "non-finite angle"))
        n += delta
    if n != c.n_out:
        out.append(Violation("ModeChainViolation", None, f"columns produce {n} modes, declared {c.n_out}"))
    return ValidationReport(tuple(out))


# ---------------------------------------------------------------------------
# angle expressions

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def eval_angle(text: str) -> float:
    """Evaluate decimal literals and ``pi`` arithmetic such as ``3*pi/2``."""
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"bad angle {text!r}") from exc

    def ev(node: ast.AST) -> float:
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id in ("pi", "π"):
            return math.pi
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError(f"unsupported angle expression {text!r}")

    return ev(tree)


def _angle_text(value: float, expr: str | None) -> str:
    return expr if expr is not None else repr(float(value))


# ---------------------------------------------------------------------------
# DSL


def print_dsl(c: Circuit) -> str:
    lines = [f"circuit {c.n_in} -> {c.n_out}"]
    for t, col in enumerate(c.columns):
        if t:
            lines.append("---")
        for g in sorted(col, key=lambda g: (g.lo, not isinstance(g, Source))):
            if isinstance(g, PhaseShifter):
                lines.append(f"ps {g.wire} {_angle_text(g.phi, g.expr)}")
            elif isinstance(g, BeamSplitter):
                lines.append(f"bs {g.wire} {_angle_text(g.theta, g.expr)}")
            elif isinstance(g, Swap):
                lines.append(f"swap {g.wire}")
            elif isinstance(g, Source):
                lines.append(f"source {g.wire} {format_state(g.state)}")
            else:
                lines.append(f"detector {g.wire} {format_state(g.effect)}")
    return "\n".join(lines) + "\n"


def _fits(col: list[Generator], g: Generator, width: int) -> bool:
    trial = Circuit(width, width, (tuple(col) + (g,),))
    return not any(v.kind == "OverlapViolation" for v in validate(trial).violations)


def parse_dsl(text: str) -> Circuit:
    """Parse the line-based circuit language.

    A statement that would overlap a generator already in the current column
    opens a new column, so ``---`` separators are only required to force a
    break.
    """
    lines = text.splitlines()
    header_seen = False
    n_in = n_out = 0
    cols: list[list[Generator]] = []
    cur: list[Generator] = []
    width = 0
    cur_width = 0

    def close() -> None:
        nonlocal cur, width, cur_width
        if cur:
            cols.append(cur)
            width = cur_width + sum(g.n_produced - g.n_consumed for g in cur)
        cur = []
        cur_width = width

    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if not header_seen:
            parts = line.replace("->", " -> ").split()
            if len(parts) != 4 or parts[0] != "circuit" or parts[2] != "->":
                raise DslSyntaxError("expected header 'circuit <n_in> -> <n_out>'", lineno)
            try:
                n_in, n_out = int(parts[1]), int(parts[3])
            except ValueError:
                raise DslSyntaxError("mode counts must be integers", lineno) from None
            if n_in < 0 or n_out < 0:
                raise DslSyntaxError("mode counts must be non-negative", lineno)
            header_seen = True
            width = cur_width = n_in
            continue
        if line == "---":
            close()
            continue
        word, _, rest = line.partition(" ")
        rest = rest.strip()
        gen: Generator
        try:
            if word in ("ps", "bs"):
                wire_txt, _, ang_txt = rest.partition(" ")
                wire = int(wire_txt)
                ang_txt = ang_txt.strip()
                if not ang_txt:
                    raise DslSyntaxError(f"missing angle for {word}", lineno, len(word) + 2)
                value = eval_angle(ang_txt)
                expr = None if _is_plain_number(ang_txt) else ang_txt
                gen = PhaseShifter(wire, value, expr) if word == "ps" else BeamSplitter(wire, value, expr)
            elif word == "swap":
                gen = Swap(int(rest))
            elif word in ("source", "detector"):
                wire_txt, _, state_txt = rest.partition(" ")
                wire = int(wire_txt)
                state = parse_state(state_txt)
                gen = Source(wire, state) if word == "source" else Detector(wire, DualFockVector(state.modes, state.as_dict()))
            else:
                raise DslSyntaxError(f"unknown statement {word!r}", lineno)
        except DslSyntaxError:
            raise
        except ValueError as exc:
            raise DslSyntaxError(str(exc), lineno, len(word) + 2) from None
        if not _fits(cur, gen, cur_width):
            close()
        single = validate(Circuit(cur_width, cur_width + gen.n_produced - gen.n_consumed, ((gen,),)))
        bad = [v for v in single.violations if v.kind in ("WireRangeViolation", "ArityViolation", "StateViolation")]
        if bad:
            raise SemanticError(bad[0].message, lineno)
        cur.append(gen)
    if not header_seen:
        raise DslSyntaxError("missing header", 1)
    close()
    c = Circuit(n_in, n_out, tuple(tuple(col) for col in cols))
    report = validate(c)
    if not report.ok:
        raise SemanticError("; ".join(v.message for v in report.violations))
    return c


def _is_plain_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


# ---------------------------------------------------------------------------
# JSON


def _state_to_obj(v: FockVector) -> dict:
    return {
        "modes": v.modes,
        "terms": [{"occ": list(o), "re": a.real, "im": a.imag} for o, a in v.items()],
    }


def _state_from_obj(obj: dict, dual: bool = False) -> FockVector:
    cls = DualFockVector if dual else FockVector
    return cls(int(obj["modes"]), [(tuple(t["occ"]), complex(float(t["re"]), float(t["im"]))) for t in obj["terms"]])


def _angle_obj(value: float, expr: str | None) -> dict:
    return {"expr": expr, "value": float(value)}


def _gen_to_obj(g: Generator) -> dict:
    if isinstance(g, PhaseShifter):
        return {"type": "ps", "wire": g.wire, "phi": _angle_obj(g.phi, g.expr)}
    if isinstance(g, BeamSplitter):
        return {"type": "bs", "wire": g.wire, "theta": _angle_obj(g.theta, g.expr)}
    if isinstance(g, Swap):
        return {"type": "swap", "wire": g.wire}
    if isinstance(g, Source):
        return {"type": "source", "wire": g.wire, "state": _state_to_obj(g.state)}
    return {"type": "detector", "wire": g.wire, "effect": _state_to_obj(g.effect)}


def _gen_from_obj(obj: dict) -> Generator:
    kind = obj["type"]
    wire = int(obj["wire"])
    if kind == "ps":
        return PhaseShifter(wire, float(obj["phi"]["value"]), obj["phi"].get("expr"))
    if kind == "bs":
        return BeamSplitter(wire, float(obj["theta"]["value"]), obj["theta"].get("expr"))
    if kind == "swap":
        return Swap(wire)
    if kind == "source":
        return Source(wire, _state_from_obj(obj["state"]))
    if kind == "detector":
        return Detector(wire, _state_from_obj(obj["effect"], dual=True))  # type: ignore[arg-type]
    raise SchemaError(f"unknown generator type {kind!r}")


def circuit_to_obj(c: Circuit) -> dict:
    return {
        "n_in": c.n_in,
        "n_out": c.n_out,
        "columns": [[_gen_to_obj(g) for g in col] for col in c.columns],
    }


def circuit_from_obj(obj: dict) -> Circuit:
    try:
        c = Circuit(
            int(obj["n_in"]),
            int(obj["n_out"]),
            tuple(tuple(_gen_from_obj(g) for g in col) for col in obj["columns"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed circuit JSON: {exc}") from exc
    return c


def to_json(c: Circuit, indent: int | None = 2) -> str:
    return json.dumps(circuit_to_obj(c), indent=indent)


def from_json(text: str) -> Circuit:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaError("top-level JSON value must be an object")
    return circuit_from_obj(obj)


def load(path: str, text: str | None = None) -> Circuit:
    """Read a circuit in either format; JSON is detected by a leading brace."""
    if text is None:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return from_json(text) if text.lstrip().startswith("{") else parse_dsl(text)
