"""``qfilt`` command-line front end.

Subcommands follow the pipeline stages: check -> realize -> slh -> synth,
plus the verification sweeps. Exit codes: 0 pass, 1 domain failure,
2 usage or I/O error. Output is deterministic for a given input and flags.
"""

from __future__ import annotations

import argparse
import dataclasses
import io
import json
import sys
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from qfilt import dynamics as dyn
from qfilt import realizability as rz
from qfilt.oscillator import (
    GeneralizedOpenOscillator,
    extract_slh,
    format_coupling,
    format_terms,
    oscillator_to_doc,
    total_hamiltonian_terms,
)
from qfilt.pipeline import pick_rate, realize
from qfilt.statespace import (
    ImproperError,
    NonMinimalError,
    NormalizationError,
    Scale,
    SingularityError,
    StateSpace,
    state_space_to_doc,
    tf_to_minimal_ss,
)
from qfilt.synthesis import hardware_table, realization_to_doc, synthesize
from qfilt.tfio import (
    ParseError,
    PoleError,
    SchemaError,
    TransferMatrix,
    UnresolvedSymbolError,
    assemble_doubled_up,
    dumps,
    encode_matrix,
    load_document,
    normalize_grid,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

DOMAIN_ERRORS = (
    rz.RealizabilityError,
    ImproperError,
    NonMinimalError,
    NormalizationError,
    SingularityError,
    PoleError,
    ZeroDivisionError,
)
INPUT_ERRORS = (OSError, json.JSONDecodeError, SchemaError, ParseError, UnresolvedSymbolError)


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    input: str | None = None
    output: str | None = None
    json: bool = False
    tol: dict[str, float] = field(default_factory=dict)
    start: float = 0.0
    stop: float = 10.0
    points: int = 200
    scale: str = "linear"
    rate: float | None = None
    gamma_aux: float | None = None
    cavity_length: float | None = None
    aux_cavity_length: float | None = None
    gamma: float | None = None
    gamma_a_eps: float = 0.0
    gamma_b_eps: float = 0.0
    arm_length: float = 4000.0
    target: float = 0.1
    convention: str = "amplitude"

    def __post_init__(self) -> None:
        if self.points < 2:
            raise UsageError("grid needs at least 2 points")
        if self.scale not in ("linear", "log"):
            raise UsageError("scale must be 'linear' or 'log'")
        if self.scale == "log" and (self.start <= 0 or self.stop <= 0):
            raise UsageError("log grid needs positive start and stop")
        if self.convention not in dyn.CONVENTIONS:
            raise UsageError(f"convention must be one of {dyn.CONVENTIONS}")
        names = {f.name for f in dataclasses.fields(rz.Tolerances)}
        for k, v in self.tol.items():
            if k not in names:
                raise UsageError(f"unknown tolerance {k!r} (known: {', '.join(sorted(names))})")
            if not v > 0:
                raise UsageError(f"tolerance {k} must be positive")

    @property
    def tolerances(self) -> rz.Tolerances:
        return rz.Tolerances(**self.tol)

    def grid(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.start, self.stop, self.points)
        return np.linspace(self.start, self.stop, self.points)


# ------------------------------------------------------------------ helpers

def _read_input(path: str | None) -> tuple[str, Any]:
    if path is None:
        raise UsageError("an INPUT file is required")
    with open(path, encoding="utf-8") as fh:
        return load_document(fh.read())


def _to_state_space(kind: str, value: Any, cfg: RunConfig) -> StateSpace:
    """Realisable state space from a transfer matrix or a state space."""
    if kind == "transfer_matrix":
        return realize(value, cfg.rate, cfg.tolerances).realizable
    if kind == "state_space":
        rep = rz.check_realizable(value, cfg.tolerances)
        return value if rep.passed else rz.transform_to_realizable(value, cfg.tolerances)
    raise UsageError(f"expected a transfer matrix or state space, got {kind}")


def _to_oscillator(kind: str, value: Any, cfg: RunConfig) -> GeneralizedOpenOscillator:
    if kind == "oscillator":
        return value
    if kind == "transfer_matrix":
        return realize(value, cfg.rate, cfg.tolerances).oscillator
    return extract_slh(_to_state_space(kind, value, cfg), cfg.tolerances)


def _cx(z: complex) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


def _fmt_matrix(name: str, M: np.ndarray) -> list[str]:
    lines = [f"{name} ({M.shape[0]}x{M.shape[1]}):"]
    if M.size == 0:
        return lines
    for row in np.atleast_2d(M):
        # adding 0.0 turns -0.0 into 0.0 so the sign noise does not show
        lines.append("  " + "  ".join(f"{v.real + 0.0:+.10g}{v.imag + 0.0:+.10g}i" for v in row))
    return lines


def _csv(header: Sequence[str], rows: Sequence[Sequence[float]]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join("%.12e" % (v + 0.0) for v in row) + "\n")
    return buf.getvalue()


# ------------------------------------------------------------------ commands

def cmd_check(cfg: RunConfig) -> tuple[int, Any, str]:
    kind, value = _read_input(cfg.input)
    tol = cfg.tolerances
    points = 1j * cfg.grid()
    doc: dict[str, Any] = {"kind": "check_report", "input_kind": kind}
    failed: list[str] = []
    if kind == "transfer_matrix":
        symp = rz.check_symplectic_tf(assemble_doubled_up(value), points, tol)
        ss = tf_to_minimal_ss(normalize_grid(assemble_doubled_up(value), pick_rate(value, cfg.rate)))
    elif kind == "state_space":
        symp = rz.check_symplectic_tf(value, points, tol)
        ss = value
        rep = rz.check_realizable(value, tol)
        doc["realizable"] = rep.to_doc()
        if not rep.passed:
            failed.append("physical realisability")
    else:
        raise UsageError(f"check expects a transfer matrix or state space, got {kind}")
    doc["symplectic"] = {"max_residual": symp["max_residual"], "at": _cx(symp["at"]), "pass": symp["pass"]}
    if not symp["pass"]:
        failed.append("symplectic condition")
    cond = rz.check_transform_conditions(ss, tol)
    det = cond["details"]
    doc["eigenvalue_pairs"] = {"min_pair_sum": det["min_pair_sum"] if ss.n_states else None, "pass": cond["eigen_ok"]}
    doc["feedthrough"] = {
        "unitary_residual": det["unitary_residual"],
        "symplectic_residual": det["feedthrough_residual"],
        "pass": cond["d_ok"],
    }
    if not cond["eigen_ok"]:
        failed.append("eigenvalue pair condition")
    if not cond["d_ok"]:
        failed.append("unitary symplectic feedthrough")
    doc["failed"] = failed
    doc["pass"] = not failed
    lines = [
        f"symplectic condition: max residual {symp['max_residual']:.3e} -> {'pass' if symp['pass'] else 'FAIL'}",
        f"eigenvalue pair condition: {'pass' if cond['eigen_ok'] else 'FAIL'}",
        f"unitary symplectic feedthrough: {'pass' if cond['d_ok'] else 'FAIL'}",
    ]
    if "realizable" in doc:
        r = doc["realizable"]
        lines.append(
            f"physical realisability: residuals {r['residual_dyn']:.3e} {r['residual_out']:.3e} "
            f"{r['residual_feed']:.3e} -> {'pass' if r['pass'] else 'FAIL'}"
        )
    lines.append("result: " + ("pass" if not failed else "FAIL (" + ", ".join(failed) + ")"))
    return (EXIT_OK if not failed else EXIT_FAIL), doc, "\n".join(lines) + "\n"


def cmd_realize(cfg: RunConfig) -> tuple[int, Any, str]:
    kind, value = _read_input(cfg.input)
    tol = cfg.tolerances
    if kind == "transfer_matrix":
        res = realize(value, cfg.rate, tol)
        ss, T, X, rep = res.realizable, res.T, res.X, res.report
    elif kind == "state_space":
        out, det = rz.transform_to_realizable(value, tol, return_details=True)
        ss, T, X, rep = out, det["T"], det["X"], det["report"]
    else:
        raise UsageError(f"realize expects a transfer matrix or state space, got {kind}")
    doc = {
        "kind": "realize_result",
        "state_space": state_space_to_doc(ss),
        "T": encode_matrix(T),
        "X": encode_matrix(X),
        "residuals": rep.to_doc(),
    }
    lines = []
    for name, M in (("A", ss.A), ("B", ss.B), ("C", ss.C), ("D", ss.D), ("T", T)):
        lines += _fmt_matrix(name, M)
    r = rep.to_doc()
    lines.append(
        f"residuals: dyn {r['residual_dyn']:.3e}, out {r['residual_out']:.3e}, feed {r['residual_feed']:.3e}"
    )
    return EXIT_OK, doc, "\n".join(lines) + "\n"


def cmd_slh(cfg: RunConfig) -> tuple[int, Any, str]:
    kind, value = _read_input(cfg.input)
    goo = _to_oscillator(kind, value, cfg)
    terms = total_hamiltonian_terms(goo)
    doc = oscillator_to_doc(goo)
    doc["hamiltonian_terms"] = [
        {"kind": t["kind"], "operators": t["operators"], "coefficient": _cx(t["coefficient"])}
        for t in terms
    ]
    internal = [t for t in terms if t["kind"] == "internal"]
    lines = _fmt_matrix("S", goo.S)
    lines += format_coupling(goo)
    lines.append("H/hbar = " + format_terms(internal))
    lines.append("H_tot/hbar = " + format_terms(terms))
    return EXIT_OK, doc, "\n".join(lines) + "\n"


def cmd_synth(cfg: RunConfig) -> tuple[int, Any, str]:
    kind, value = _read_input(cfg.input)
    goo = _to_oscillator(kind, value, cfg)
    gamma_aux = cfg.gamma_aux
    if gamma_aux is None:
        band = max(abs(cfg.start), abs(cfg.stop))
        if band <= 0:
            raise UsageError("cannot pick an auxiliary bandwidth from an empty band; pass --gamma-aux")
        gamma_aux = 100.0 * band
    pr = synthesize(goo, gamma_aux, cfg.cavity_length, cfg.aux_cavity_length)
    doc = realization_to_doc(pr)
    doc["aux_bandwidth"] = gamma_aux
    return EXIT_OK, doc, hardware_table(pr) + "\n"


def _two_mode_from_input(cfg: RunConfig) -> dyn.TwoModeModel:
    if cfg.input is None:
        raise UsageError("sweep needs an INPUT file")
    with open(cfg.input, encoding="utf-8") as fh:
        doc = json.loads(fh.read())
    if isinstance(doc, dict) and doc.get("kind") == "two_mode_model":
        try:
            s0, gamma = float(doc["s0"]), float(doc["gamma"])
        except (KeyError, TypeError, ValueError):
            raise SchemaError("s0", "two_mode_model needs numeric s0 and gamma") from None
        ga = float(doc.get("gamma_a_eps", cfg.gamma_a_eps))
        gb = float(doc.get("gamma_b_eps", cfg.gamma_b_eps))
    else:
        kind, tm = load_document(json.dumps(doc))
        if kind != "transfer_matrix" or "s0" not in tm.symbols:
            raise UsageError("sweep expects a two_mode_model document or a transfer matrix with symbol s0")
        s0 = tm.symbols["s0"]
        gamma = cfg.gamma if cfg.gamma is not None else 100.0 * s0
        ga, gb = cfg.gamma_a_eps, cfg.gamma_b_eps
    if cfg.gamma is not None:
        gamma = cfg.gamma
    try:
        return dyn.TwoModeModel(s0, gamma, ga, gb)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_sweep(cfg: RunConfig) -> tuple[int, Any, str]:
    model = _two_mode_from_input(cfg)
    rows = []
    for w in cfg.grid():
        r = dyn.lossy_transfer(model, float(w))
        if model.gamma_a_eps > 0:
            ratio = w**2 * model.gamma_b_eps / (model.s0 * model.gamma * model.gamma_a_eps)
        else:
            ratio = float("nan")
        rows.append(
            [
                float(w),
                r.signal.real,
                r.signal.imag,
                abs(r.signal) ** 2,
                abs(r.noise_a) ** 2,
                abs(r.noise_b) ** 2,
                ratio,
            ]
        )
    header = ["omega", "re_signal", "im_signal", "abs2_signal", "abs2_noise_a", "abs2_noise_b", "formula_ratio"]
    doc = {
        "kind": "sweep",
        "model": dataclasses.asdict(model),
        "columns": header,
        "rows": [[None if np.isnan(v) else v for v in row] for row in rows],
    }
    return EXIT_OK, doc, _csv(header, rows)


def cmd_losscurve(cfg: RunConfig) -> tuple[int, Any, str]:
    if cfg.input is not None:
        # optional config-style input: {"arm_length": ..., "target": ...}
        with open(cfg.input, encoding="utf-8") as fh:
            extra = json.loads(fh.read())
        if not isinstance(extra, dict):
            raise SchemaError("$", "expected an object")
        cfg = dataclasses.replace(
            cfg,
            arm_length=float(extra.get("arm_length", cfg.arm_length)),
            target=float(extra.get("target", cfg.target)),
        )
    grid = cfg.grid()
    if np.any(grid < 0):
        raise UsageError("cavity lengths must be non-negative")
    if not 0 < cfg.target < 1:
        raise UsageError("--target must lie in (0, 1)")
    curve = dyn.loss_requirement_curve(cfg.arm_length, cfg.target, grid, cfg.convention)
    header = ["L_a", "eps_a", "eps_a_per_L_a"]
    rows = [[r["L_a"], r["eps_a"], r["eps_per_length"]] for r in curve["rows"]]
    doc = dict(curve, kind="loss_curve")
    text = (
        f"# convention={curve['convention']} target={curve['target_ratio']:.12e} "
        f"other_convention_eps_per_length={curve['eps_per_length_other_convention']:.12e}\n"
        + _csv(header, rows)
    )
    return EXIT_OK, doc, text


COMMANDS = {
    "check": cmd_check,
    "realize": cmd_realize,
    "slh": cmd_slh,
    "synth": cmd_synth,
    "sweep": cmd_sweep,
    "losscurve": cmd_losscurve,
}


# ------------------------------------------------------------------ argument handling

def _parse_tol(items: Sequence[str]) -> dict[str, float]:
    out = {}
    for item in items:
        name, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--tol expects name=value, got {item!r}")
        try:
            out[name.strip()] = float(val)
        except ValueError:
            raise UsageError(f"--tol value for {name} is not a number") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qfilt", description="Quantum filter realisation and synthesis.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("input", nargs="?", help="input JSON document")
    p.add_argument("-o", "--output", help="write output here instead of stdout")
    p.add_argument("--json", action="store_true", default=None, help="machine-readable JSON output")
    p.add_argument("--config", help="JSON file with default flag values")
    p.add_argument("--tol", action="append", default=None, metavar="NAME=VALUE")
    p.add_argument("--start", type=float)
    p.add_argument("--stop", type=float)
    p.add_argument("--points", type=int)
    p.add_argument("--scale", choices=["linear", "log"])
    p.add_argument("--rate", type=float, help="normalisation rate (default: symbol s0)")
    p.add_argument("--gamma-aux", type=float, help="auxiliary-mode bandwidth (default 100x band edge)")
    p.add_argument("--cavity-length", type=float, help="main cavity length in metres")
    p.add_argument("--aux-cavity-length", type=float, help="auxiliary cavity length in metres")
    p.add_argument("--gamma", type=float, help="auxiliary bandwidth for sweep")
    p.add_argument("--gamma-a-eps", type=float)
    p.add_argument("--gamma-b-eps", type=float)
    p.add_argument("--arm-length", type=float)
    p.add_argument("--target", type=float)
    p.add_argument("--convention", choices=list(dyn.CONVENTIONS))
    return p


def make_config(ns: argparse.Namespace) -> RunConfig:
    values: dict[str, Any] = {}
    if ns.config:
        with open(ns.config, encoding="utf-8") as fh:
            loaded = json.load(fh)
        if not isinstance(loaded, dict):
            raise SchemaError("$", "config must be an object")
        values.update({k.replace("-", "_"): v for k, v in loaded.items()})
    tol = dict(values.pop("tol", {}) or {})
    for key, val in vars(ns).items():
        if key in ("config", "tol") or val is None:
            continue
        values[key] = val
    if ns.tol:
        tol.update(_parse_tol(ns.tol))
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
    try:
        return RunConfig(tol=tol, **values)
    except TypeError as exc:
        raise UsageError(str(exc)) from None


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    want_json = bool(ns.json)
    try:
        cfg = make_config(ns)
        want_json = cfg.json
        code, doc, text = COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc), want_json, ns.output)
    except INPUT_ERRORS as exc:
        return _fail(EXIT_USAGE, type(exc).__name__, str(exc), want_json, ns.output)
    except DOMAIN_ERRORS as exc:
        return _fail(EXIT_FAIL, type(exc).__name__, str(exc), want_json, ns.output)
    _emit(dumps(doc) if cfg.json else text, cfg.output)
    return code


def _fail(code: int, kind: str, message: str, as_json: bool, output: str | None) -> int:
    if as_json:
        _emit(dumps({"error": kind, "message": message, "exit_code": code}), output)
    sys.stderr.write(f"qfilt: {kind}: {message}\n")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
