"""Network synthesis: split an n-mode oscillator into one-mode oscillators plus
direct interactions, and map each piece onto optical hardware.

Hamiltonians are quoted as H / hbar. A one-mode oscillator with coupling
L = alpha a + beta a^dag is realised through a fast auxiliary mode b of
bandwidth gamma with

    H_ab = eps1 a^dag b^dag + eps1* a b + eps2 a^dag b + eps2* a b^dag,
    alpha = -eps2* sqrt(2/gamma),   beta = eps1 sqrt(2/gamma),
    eps2 = 2 theta_bs exp(-i phi).

Phases are reported modulo that convention: eps2 real positive means phi = 0.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from qfilt._matrices import fro
from qfilt.oscillator import GeneralizedOpenOscillator
from qfilt.tfio import SchemaError

C_LIGHT = 299_792_458.0
ROUNDED_SQUEEZING_PREFACTOR = 7.7e-5
REF_T = 100e-6
REF_L_AUX = 0.24
REF_L_ARM = 4000.0


@dataclass(frozen=True)
class OneModeRealization:
    mode_id: int
    detuning: float = 0.0
    internal_pump: complex = 0j
    coupling_alpha: complex = 0j
    coupling_beta: complex = 0j
    aux_bandwidth: float | None = None
    mixing_angle: float = 0.0
    phase: float = 0.0
    pump_intensity_1: complex = 0j
    pump_intensity_2: complex = 0j

    def __post_init__(self) -> None:
        if self.aux_bandwidth is None:
            if self.coupling_alpha or self.coupling_beta:
                raise ValueError("a coupled mode needs an auxiliary bandwidth")
            return
        k = np.sqrt(2.0 / self.aux_bandwidth)
        if abs(self.coupling_alpha + np.conj(self.pump_intensity_2) * k) > 1e-12 * max(
            1.0, abs(self.coupling_alpha)
        ):
            raise ValueError("alpha inconsistent with eps2")
        if abs(self.coupling_beta - self.pump_intensity_1 * k) > 1e-12 * max(
            1.0, abs(self.coupling_beta)
        ):
            raise ValueError("beta inconsistent with eps1")
        eps2 = 2 * self.mixing_angle * np.exp(-1j * self.phase)
        if abs(eps2 - self.pump_intensity_2) > 1e-12 * max(1.0, abs(self.pump_intensity_2)):
            raise ValueError("eps2 inconsistent with mixing angle and phase")


@dataclass(frozen=True)
class InteractionTerm:
    """H_kl = eps2 a_k^dag a_l + eps2* a_k a_l^dag + eps1 a_k^dag a_l^dag + eps1* a_k a_l."""

    mode_pair: tuple[int, int]
    eps1: complex = 0j
    eps2: complex = 0j

    def omega_blocks(self) -> np.ndarray:
        """Off-diagonal Omega block (k, l); the (l, k) block is its adjoint."""
        return 0.5 * np.array(
            [[self.eps2, self.eps1], [np.conj(self.eps1), np.conj(self.eps2)]], dtype=complex
        )


@dataclass(frozen=True)
class CrystalParams:
    r: float
    cavity_length: float | None = None
    mirror_transmissivity: float | None = None


@dataclass(frozen=True)
class PhysicalRealization:
    oscillators: tuple[OneModeRealization, ...]
    interactions: tuple[InteractionTerm, ...] = ()
    series_order: tuple[int, ...] = ()
    crystal_params: dict[int, dict[str, CrystalParams]] = field(default_factory=dict)
    scattering: np.ndarray | None = None


# ------------------------------------------------------------------ decomposition

def decompose_network(
    goo: GeneralizedOpenOscillator, tol: float = 1e-12
) -> tuple[list[GeneralizedOpenOscillator], list[InteractionTerm], list[int]]:
    """Split into one-mode oscillators, pairwise interactions and a series order.

    The scattering matrix is kept by the first oscillator in the chain only.
    Every mode keeps its own columns of K and its diagonal Omega block.
    """
    n, m = goo.n, goo.m
    K, Om = goo.K, goo.Omega
    scale = max(1.0, fro(K), fro(Om))
    series = [k for k in range(n) if fro(K[:, 2 * k : 2 * k + 2]) > tol * scale]
    first = series[0] if series else 0
    parts = []
    for k in range(n):
        S = goo.S if k == first else np.eye(m)
        parts.append(
            GeneralizedOpenOscillator(
                S, K[:, 2 * k : 2 * k + 2], Om[2 * k : 2 * k + 2, 2 * k : 2 * k + 2]
            )
        )
    interactions = []
    for k in range(n):
        for l in range(k + 1, n):
            blk = Om[2 * k : 2 * k + 2, 2 * l : 2 * l + 2]
            if fro(blk) <= tol * scale:
                continue
            eps2 = blk[0, 0] + np.conj(blk[1, 1])
            eps1 = blk[0, 1] + np.conj(blk[1, 0])
            interactions.append(InteractionTerm((k, l), complex(eps1), complex(eps2)))
    return parts, interactions, series


def reassemble_omega(parts: Sequence[GeneralizedOpenOscillator], interactions: Sequence[InteractionTerm]) -> np.ndarray:
    """Inverse of the Omega split in :func:`decompose_network` (symmetric form)."""
    n = len(parts)
    Om = np.zeros((2 * n, 2 * n), dtype=complex)
    for k, p in enumerate(parts):
        Om[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = p.Omega
    for t in interactions:
        k, l = t.mode_pair
        blk = t.omega_blocks()
        Om[2 * k : 2 * k + 2, 2 * l : 2 * l + 2] = blk
        Om[2 * l : 2 * l + 2, 2 * k : 2 * k + 2] = blk.conj().T
    return Om


# ------------------------------------------------------------------ hardware maps

def realize_coupling(k_row: Sequence[complex], gamma_aux: float) -> dict[str, Any]:
    """Auxiliary-mode parameters for L = alpha a + beta a^dag.

    Returns an empty dict when the row is zero (no auxiliary mode needed).
    """
    if gamma_aux <= 0:
        raise ValueError("auxiliary bandwidth must be positive")
    alpha, beta = complex(k_row[0]), complex(k_row[1])
    if alpha == 0 and beta == 0:
        return {}
    root = np.sqrt(gamma_aux / 2.0)
    eps2 = -np.conj(alpha) * root
    eps1 = beta * root
    return {
        "coupling_alpha": alpha,
        "coupling_beta": beta,
        "aux_bandwidth": float(gamma_aux),
        "pump_intensity_1": complex(eps1),
        "pump_intensity_2": complex(eps2),
        "mixing_angle": float(abs(eps2) / 2.0),
        "phase": float(-np.angle(eps2)) if eps2 != 0 else 0.0,
    }


def squeezing_from_pump(eps: complex, length: float) -> float:
    """Single-pass squeezing factor for an effective pump eps = c r / (2 L)."""
    return float(2.0 * length * abs(eps) / C_LIGHT)


def realize_internal(block: np.ndarray, cavity_length: float | None = None) -> dict[str, Any]:
    """Detuned-DPA parameters for H = Delta a^dag a + eps (a^dag)^2 + eps* a^2."""
    block = np.asarray(block, dtype=complex)
    if fro(block - block.conj().T) > 1e-12 * max(1.0, fro(block)):
        raise ValueError("Omega block must be Hermitian")
    delta = float((block[0, 0] + block[1, 1]).real)
    eps = complex(block[0, 1])
    out: dict[str, Any] = {"detuning": delta, "internal_pump": eps}
    if cavity_length is not None:
        out["crystal"] = CrystalParams(squeezing_from_pump(eps, cavity_length), cavity_length)
    return out


def realize_interaction(term: InteractionTerm) -> dict[str, Any]:
    """Beamsplitter and crystal settings for one interaction Hamiltonian."""
    return {
        "mode_pair": term.mode_pair,
        "mixing_angle": float(abs(term.eps2) / 2.0),
        "phase": float(-np.angle(term.eps2)) if term.eps2 != 0 else 0.0,
        "crystal_pump": complex(-2j * term.eps1),
    }


def interaction_hamiltonian_matrix(term: InteractionTerm) -> np.ndarray:
    """4x4 Omega of H_kl on (a_k, a_k^dag, a_l, a_l^dag), Hermitian by construction."""
    blk = term.omega_blocks()
    out = np.zeros((4, 4), dtype=complex)
    out[:2, 2:] = blk
    out[2:, :2] = blk.conj().T
    return out


def map_crystal_params(coupling_rate: float, length: float, transmissivity: float) -> dict[str, float]:
    """Cavity bandwidth gamma = T c / (4 L) and single-pass squeezing r = 2 sqrt(s0 gamma) L / c.

    ``coupling_rate`` is s0, so the crystal coupling is sqrt(s0 gamma).
    ``r_closed_form`` is sqrt(T L s0 / c), the same quantity after substitution.
    """
    if length <= 0 or not 0 <= transmissivity < 1:
        raise ValueError("need L > 0 and 0 <= T < 1")
    gamma = transmissivity * C_LIGHT / (4.0 * length)
    r = 2.0 * np.sqrt(coupling_rate * gamma) * length / C_LIGHT
    return {"gamma": float(gamma), "r": float(r), "r_closed_form": float(np.sqrt(transmissivity * length * coupling_rate / C_LIGHT))}


def transmissivity_for_bandwidth(gamma: float, length: float) -> float:
    return 4.0 * length * gamma / C_LIGHT


def required_squeezing(t_aux: float, l_aux: float, l_arm: float) -> float:
    """Single-pass squeezing for the unstable filter with s0 = c / L_arm.

    Evaluated through the crystal mapping, which reduces to
    sqrt(T_aux L_aux / L_arm); the rounded prefactor 7.7e-5 at
    (100 ppm, 24 cm, 4 km) is kept in ``ROUNDED_SQUEEZING_PREFACTOR`` for
    comparison.
    """
    if min(t_aux, l_aux, l_arm) <= 0:
        raise ValueError("inputs must be positive")
    return map_crystal_params(C_LIGHT / l_arm, l_aux, t_aux)["r"]


def required_squeezing_rounded(t_aux: float, l_aux: float, l_arm: float) -> float:
    """The same scaling law with the rounded 7.7e-5 prefactor."""
    return ROUNDED_SQUEEZING_PREFACTOR * np.sqrt(t_aux / REF_T) * np.sqrt(l_aux / REF_L_AUX) * np.sqrt(REF_L_ARM / l_arm)


# ------------------------------------------------------------------ full synthesis

def synthesize(
    goo: GeneralizedOpenOscillator,
    gamma_aux: float,
    cavity_length: float | None = None,
    aux_cavity_length: float | None = None,
) -> PhysicalRealization:
    """Map every piece of an oscillator onto hardware parameters.

    Lengths are inputs; SI crystal values are only reported when given.
    """
    parts, interactions, series = decompose_network(goo)
    oscillators = []
    crystals: dict[int, dict[str, CrystalParams]] = {}
    for k, part in enumerate(parts):
        internal = realize_internal(part.Omega)
        fields: dict[str, Any] = {
            "detuning": internal["detuning"],
            "internal_pump": internal["internal_pump"],
        }
        if part.m == 1 or k in series:
            # one external channel per mode is what the auxiliary-mode scheme realises
            row = part.K[0] if part.m else np.zeros(2)
            fields.update(realize_coupling(row, gamma_aux))
        oscillators.append(OneModeRealization(mode_id=k, **fields))
        entry: dict[str, CrystalParams] = {}
        if cavity_length is not None and internal["internal_pump"] != 0:
            entry["internal"] = CrystalParams(
                squeezing_from_pump(internal["internal_pump"], cavity_length), cavity_length
            )
        eps1 = fields.get("pump_intensity_1", 0j)
        if aux_cavity_length is not None and "aux_bandwidth" in fields:
            T = transmissivity_for_bandwidth(gamma_aux, aux_cavity_length)
            entry["aux"] = CrystalParams(
                squeezing_from_pump(eps1, aux_cavity_length), aux_cavity_length, T
            )
        if entry:
            crystals[k] = entry
    return PhysicalRealization(
        tuple(oscillators), tuple(interactions), tuple(series), crystals, np.array(goo.S)
    )


def hardware_table(pr: PhysicalRealization) -> str:
    """Plain-text summary of a realisation."""
    lines = ["mode  detuning      internal_pump            eps1 (crystal)           eps2 (beamsplitter)      gamma_aux"]
    for o in pr.oscillators:
        g = "-" if o.aux_bandwidth is None else f"{o.aux_bandwidth:.6g}"
        lines.append(
            f"{o.mode_id:<5d} {o.detuning:<+13.6g} {_c(o.internal_pump):<24s} "
            f"{_c(o.pump_intensity_1):<24s} {_c(o.pump_intensity_2):<24s} {g}"
        )
    if pr.interactions:
        lines.append("")
        lines.append("pair   eps1                     eps2                     crystal pump")
        for t in pr.interactions:
            lines.append(
                f"{t.mode_pair!s:<6s} {_c(t.eps1):<24s} {_c(t.eps2):<24s} {_c(-2j * t.eps1)}"
            )
    lines.append("")
    lines.append("series order: " + (" -> ".join(str(k) for k in pr.series_order) or "(none)"))
    for k, entry in sorted(pr.crystal_params.items()):
        for role, cp in sorted(entry.items()):
            extra = "" if cp.mirror_transmissivity is None else f", T={cp.mirror_transmissivity:.6g}"
            lines.append(f"mode {k} {role} crystal: r={cp.r:.6g}, L={cp.cavity_length:.6g} m{extra}")
    return "\n".join(lines)


def _c(z: complex) -> str:
    return f"{z.real:+.6g}{z.imag:+.6g}i"


# ------------------------------------------------------------------ documents

def _cx(z: complex) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


def realization_to_doc(pr: PhysicalRealization) -> dict[str, Any]:
    osc = []
    for o in pr.oscillators:
        d = asdict(o)
        for key, val in d.items():
            if isinstance(val, complex):
                d[key] = _cx(val)
        osc.append(d)
    crystals = {
        str(k): {role: asdict(cp) for role, cp in sorted(entry.items())}
        for k, entry in sorted(pr.crystal_params.items())
    }
    doc: dict[str, Any] = {
        "kind": "physical_realization",
        "phase_convention": "eps2 = 2 theta exp(-i phi); eps2 real positive -> phi = 0",
        "oscillators": osc,
        "interactions": [
            {"mode_pair": list(t.mode_pair), "eps1": _cx(t.eps1), "eps2": _cx(t.eps2)}
            for t in pr.interactions
        ],
        "series_order": list(pr.series_order),
        "crystal_params": crystals,
    }
    if pr.scattering is not None:
        from qfilt.tfio import encode_matrix

        doc["scattering"] = encode_matrix(pr.scattering)
    return doc


def _complex_field(val: Any, path: str) -> complex:
    if (
        not isinstance(val, list)
        or len(val) != 2
        or not all(isinstance(x, (int, float)) for x in val)
    ):
        raise SchemaError(path, "expected [re, im]")
    return complex(val[0], val[1])


_COMPLEX_FIELDS = {
    "internal_pump",
    "coupling_alpha",
    "coupling_beta",
    "pump_intensity_1",
    "pump_intensity_2",
}


def realization_from_doc(doc: Any) -> PhysicalRealization:
    if not isinstance(doc, dict):
        raise SchemaError("$", "expected an object")
    oscillators = []
    for i, o in enumerate(doc.get("oscillators", [])):
        if not isinstance(o, dict):
            raise SchemaError(f"oscillators[{i}]", "expected an object")
        kw = dict(o)
        for key in _COMPLEX_FIELDS & kw.keys():
            kw[key] = _complex_field(kw[key], f"oscillators[{i}].{key}")
        try:
            oscillators.append(OneModeRealization(**kw))
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"oscillators[{i}]", str(exc)) from None
    interactions = []
    for i, t in enumerate(doc.get("interactions", [])):
        try:
            pair = tuple(int(x) for x in t["mode_pair"])
        except (KeyError, TypeError, ValueError):
            raise SchemaError(f"interactions[{i}].mode_pair", "expected [k, l]") from None
        interactions.append(
            InteractionTerm(
                pair,  # type: ignore[arg-type]
                _complex_field(t.get("eps1"), f"interactions[{i}].eps1"),
                _complex_field(t.get("eps2"), f"interactions[{i}].eps2"),
            )
        )
    crystals: dict[int, dict[str, CrystalParams]] = {}
    for k, entry in doc.get("crystal_params", {}).items():
        crystals[int(k)] = {role: CrystalParams(**cp) for role, cp in entry.items()}
    scattering = None
    if doc.get("scattering") is not None:
        from qfilt.tfio import decode_matrix

        scattering = decode_matrix(doc["scattering"], "scattering")
    return PhysicalRealization(
        tuple(oscillators),
        tuple(interactions),
        tuple(int(x) for x in doc.get("series_order", [])),
        crystals,
        scattering,
    )
