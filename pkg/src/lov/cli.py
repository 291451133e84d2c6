"""Command-line entry point: ``python -m lov <command> ...``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from typing import Any

import numpy as np

from . import __version__
from .analysis import (
    ALL_AXIOMS,
    ArityMismatch,
    DistinctNF,
    EquivalentNF,
    check_axiom,
    equiv,
    source_photons,
)
from .circuit import Circuit, CircuitError, load, print_dsl, to_json, validate
from .euler import E3Lhs, NotRealRotation, solve_e2_lhs, solve_e2_rhs, solve_e3
from .fock import FockError, FockVector, eval_circuit, format_complex, format_state
from .rewrite import (
    DEFAULT_STEP_LIMIT,
    LayoutError,
    SoundnessError,
    StepLimitExceeded,
    nf_to_obj,
    normalize_steps,
    ranking,
    trace_line,
)
from .synthesis import InvariantViolation, NotTmn, synthesize_triangle, triangle_to_circuit
from .unitary import DimMismatch, NotUnitary, matrix_from_obj, random_unitary

EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass
class CliConfig:
    angle_eps: float = 1e-9
    amp_eps: float = 1e-9
    prune_eps: float = 1e-12
    cutoff: int | None = None
    step_limit: int = DEFAULT_STEP_LIMIT
    seed: int = 0
    fmt: str = "text"

    def __post_init__(self) -> None:
        if min(self.angle_eps, self.amp_eps, self.prune_eps) <= 0:
            raise UsageError("tolerances must be positive")


def _env_int(name: str) -> int | None:
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError as exc:
        raise UsageError(f"{name} must be an integer, got {raw!r}") from exc


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc


def _circuit(path: str) -> Circuit:
    c = load(path, _read(path))
    rep = validate(c)
    if not rep.ok:
        v = rep.violations[0]
        raise CircuitError(f"{v.kind}: {v.message}")
    return c


def _parse_occupation(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.replace(" ", "").split(",") if x != "")
    except ValueError as exc:
        raise UsageError(f"bad occupation vector {text!r}") from exc


def _matrix(args, size: int) -> np.ndarray:
    if args.matrix is not None:
        try:
            obj = json.loads(_read(args.matrix))
            return matrix_from_obj(obj["matrix"] if isinstance(obj, dict) else obj)
        except (KeyError, TypeError, IndexError) as exc:
            raise UsageError("matrix JSON must be nested [re, im] pairs") from exc
    if args.random is None:
        raise UsageError(f"{args.command} needs a matrix file or --random")
    return random_unitary(args.random or size, args.seed)


# ---------------------------------------------------------------------------
# commands; each returns (exit code, text, json-able result)


def cmd_eval(args, cfg: CliConfig):
    c = _circuit(args.file)
    occ = _parse_occupation(args.input)
    out = eval_circuit(c, FockVector.basis(occ))
    result: dict[str, Any] = {"input": list(occ), "output": format_state(out)}
    text = [f"output {format_state(out)}"]
    if args.dual_rail:
        kept = FockVector(out.modes, [(o, a) for o, a in out.items() if _one_per_pair(o)])
        prob = sum(abs(a) ** 2 for _, a in kept.items())
        result.update(postselected=format_state(kept), probability=prob)
        text.append(f"postselected {format_state(kept)}")
        text.append(f"probability {prob!r}")
    return EXIT_OK, "\n".join(text), result


def _one_per_pair(o: tuple[int, ...]) -> bool:
    return len(o) % 2 == 0 and all(o[k] + o[k + 1] == 1 for k in range(0, len(o), 2))


def cmd_normalize(args, cfg: CliConfig):
    c = _circuit(args.file)
    lines: list[str] = []
    hook = (lambda s, r, loc, cur: lines.append(trace_line(s, r, loc, cur))) if args.trace else None
    nf = normalize_steps(c, step_limit=cfg.step_limit, hook=hook)
    obj = nf_to_obj(nf)
    if obj["kind"] == "zero":
        text = f"zero form {obj['n']} -> {obj['m']}"
    else:
        text = "\n".join(
            [
                f"normal form {obj['n']}+{obj['n_anc']} -> {obj['m']}+{obj['m_anc']}",
                "T " + json.dumps(obj["T"]),
                "f " + obj["f"],
                "K " + json.dumps(obj["K"]),
                "g " + obj["g"],
            ]
        )
    if args.trace:
        obj["trace"] = lines
        text = "\n".join(lines + [text])
    return EXIT_OK, text, obj


def cmd_equiv(args, cfg: CliConfig):
    c1, c2 = _circuit(args.a), _circuit(args.b)
    cutoff = args.cutoff if args.cutoff is not None else cfg.cutoff
    verdict = equiv(c1, c2, cutoff)
    if isinstance(verdict, EquivalentNF):
        return EXIT_OK, "equivalent", {"verdict": "EquivalentNF"}
    assert isinstance(verdict, DistinctNF)
    res: dict[str, Any] = {"verdict": "DistinctNF", "witness": verdict.witness}
    text = f"distinct ({verdict.witness})"
    if verdict.mismatch is not None:
        res["input"] = list(verdict.mismatch.input)
        res["delta"] = verdict.mismatch.delta
        text += f"; differs on |{','.join(map(str, verdict.mismatch.input))}> by {verdict.mismatch.delta:.3g}"
    else:
        used = cutoff if cutoff is not None else max(source_photons(c1), source_photons(c2)) + 4
        text += f"; no numeric witness up to {used} photons"
    return EXIT_NEGATIVE, text, res


def cmd_synth(args, cfg: CliConfig):
    t = synthesize_triangle(_matrix(args, 0))
    c = triangle_to_circuit(t)
    text = json.dumps(t.to_obj()) if args.grid else print_dsl(c).rstrip("\n")
    return EXIT_OK, text, {"triangle": t.to_obj(), "dsl": print_dsl(c)}


def _angles(obj: Any, names: tuple[str, ...]) -> dict[str, float]:
    return {k: float(getattr(obj, k)) for k in names}


def cmd_euler2(args, cfg: CliConfig):
    u = _matrix(args, 2)
    res = {
        "lhs": _angles(solve_e2_lhs(u), ("alpha0", "alpha1", "alpha2", "alpha3")),
        "rhs": _angles(solve_e2_rhs(u), ("beta0", "beta1", "beta2", "beta3")),
    }
    return EXIT_OK, json.dumps(res), res


def cmd_euler3(args, cfg: CliConfig):
    if args.matrix is None and args.random is not None:
        # a random E3 LHS so the matrix is guaranteed to be in range
        u = E3Lhs(*np.random.default_rng(args.seed).uniform(0.0, 2 * np.pi, size=3)).matrix()
    else:
        u = _matrix(args, 3)
    lhs, rhs = solve_e3(u)
    res = {
        "lhs": _angles(lhs, ("gamma1", "gamma2", "gamma3")),
        "rhs": _angles(rhs, ("delta1", "delta2", "delta3")),
    }
    return EXIT_OK, json.dumps(res), res


def cmd_check_axioms(args, cfg: CliConfig):
    rng = np.random.default_rng(cfg.seed)
    cutoff = args.cutoff if args.cutoff is not None else (cfg.cutoff or 4)
    rows = []
    for ax in ALL_AXIOMS:
        worst = max(check_axiom(ax, rng, cutoff) for _ in range(args.instances))
        rows.append({"axiom": ax, "instances": args.instances, "max_residual": worst, "ok": worst < args.tol})
    width = max(len(r["axiom"]) for r in rows)
    text = "\n".join(f"{r['axiom']:<{width}}  {r['max_residual']:.3e}  {'ok' if r['ok'] else 'FAIL'}" for r in rows)
    code = EXIT_OK if all(r["ok"] for r in rows) else EXIT_NEGATIVE
    return code, text, {"seed": cfg.seed, "cutoff": cutoff, "axioms": rows}


def cmd_rank(args, cfg: CliConfig):
    c = _circuit(args.file)
    r = ranking(c)
    return EXIT_OK, str(r), {"rank": list(r)}


def cmd_fmt(args, cfg: CliConfig):
    text = _read(args.file)
    c = load(args.file, text)
    target = args.to or ("dsl" if text.lstrip().startswith("{") else "json")
    out = to_json(c) if target == "json" else print_dsl(c).rstrip("\n")
    return EXIT_OK, out, {"to": target, "text": out}


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    # SUPPRESS lets the shared flags appear before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="overrides LOV_SEED")
    common.add_argument("--step-limit", type=int, default=argparse.SUPPRESS)
    p = argparse.ArgumentParser(prog="lov", description="linear optical circuit toolkit", parents=[common])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    _add = sub.add_parser

    def add_parser(name: str, **kw):
        return _add(name, parents=[common], **kw)

    sub.add_parser = add_parser  # type: ignore[method-assign]

    s = sub.add_parser("eval", help="evaluate a circuit on a basis state")
    s.add_argument("file")
    s.add_argument("--input", required=True, help="occupation vector, e.g. 1,0,1,0")
    s.add_argument("--dual-rail", action="store_true", help="keep outputs with one photon per wire pair")
    s.set_defaults(fn=cmd_eval)

    s = sub.add_parser("normalize", help="rewrite to the normal form")
    s.add_argument("file")
    s.add_argument("--trace", action="store_true")
    s.set_defaults(fn=cmd_normalize)

    s = sub.add_parser("equiv", help="decide semantic equality")
    s.add_argument("a")
    s.add_argument("b")
    s.add_argument("--cutoff", type=int, default=None, help="overrides LOV_CUTOFF")
    s.set_defaults(fn=cmd_equiv)

    for name, fn, help_ in (
        ("synth", cmd_synth, "triangle synthesis of a unitary"),
        ("euler2", cmd_euler2, "angles of both sides of E2"),
        ("euler3", cmd_euler3, "angles of both sides of E3"),
    ):
        s = sub.add_parser(name, help=help_)
        s.add_argument("matrix", nargs="?", help="JSON matrix of [re, im] pairs, - for stdin")
        s.add_argument("--random", type=int, nargs="?", const=0, metavar="N", help="random instance instead")
        if name == "synth":
            s.add_argument("--grid", action="store_true", help="print the angle grid instead of DSL")
        s.set_defaults(fn=fn)

    s = sub.add_parser("check-axioms", help="residual table of the axiom soundness checks")
    s.add_argument("--instances", type=int, default=50)
    s.add_argument("--cutoff", type=int, default=None)
    s.add_argument("--tol", type=float, default=1e-9)
    s.set_defaults(fn=cmd_check_axioms)

    s = sub.add_parser("rank", help="termination ranking tuple")
    s.add_argument("file")
    s.set_defaults(fn=cmd_rank)

    s = sub.add_parser("fmt", help="convert between DSL and JSON")
    s.add_argument("file")
    s.add_argument("--to", choices=("dsl", "json"))
    s.set_defaults(fn=cmd_fmt)
    return p


_KINDS: list[tuple[type, str, int]] = [
    (UsageError, "usage", EXIT_USAGE),
    (CircuitError, "circuit", EXIT_USAGE),
    (FockError, "state", EXIT_USAGE),
    (ArityMismatch, "arity", EXIT_USAGE),
    (NotUnitary, "not-unitary", EXIT_USAGE),
    (NotRealRotation, "not-rotation", EXIT_USAGE),
    (DimMismatch, "dimension", EXIT_USAGE),
    (json.JSONDecodeError, "json", EXIT_USAGE),
    (StepLimitExceeded, "step-limit", EXIT_INTERNAL),
    (SoundnessError, "soundness", EXIT_INTERNAL),
    (InvariantViolation, "invariant", EXIT_INTERNAL),
    (NotTmn, "not-tmn", EXIT_INTERNAL),
    (ValueError, "value", EXIT_USAGE),
]


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        seed = getattr(args, "seed", None)
        seed = seed if seed is not None else _env_int("LOV_SEED")
        cfg = CliConfig(
            cutoff=_env_int("LOV_CUTOFF"),
            step_limit=getattr(args, "step_limit", DEFAULT_STEP_LIMIT),
            seed=seed or 0,
            fmt=getattr(args, "format", "text"),
        )
        args.seed = cfg.seed
        code, text, result = args.fn(args, cfg)
    except Exception as exc:  # noqa: BLE001 - mapped to exit codes below
        for cls, kind, code in _KINDS:
            if isinstance(exc, cls):
                print(f"error[{kind}]: {exc}", file=sys.stderr)
                return code
        print(f"error[internal]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    if cfg.fmt == "json":
        print(json.dumps({"command": args.command, "version": __version__, "result": result}, default=_jsonable))
    else:
        print(text)
    return code


def _jsonable(x: Any) -> Any:
    if isinstance(x, complex):
        return format_complex(x)
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def run() -> None:
    sys.exit(main())

