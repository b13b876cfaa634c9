"""Generalised open oscillators (S, L = K x, H = x^dag Omega x) and the
quadrature <-> ladder basis maps.

Omega is stored with hbar divided out, so ``H / hbar = x^dag Omega x``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from qfilt._matrices import (
    fro,
    interleave_permutation,
    j_matrix,
    ladder_unitary,
    pair_swap,
    theta_matrix,
)
from qfilt.realizability import (
    DEFAULT_TOL,
    RealizabilityError,
    Tolerances,
    apply_similarity,
    check_doubled_up_symmetry,
    check_realizable,
)
from qfilt.statespace import StateSpace
from qfilt.tfio import SchemaError, decode_matrix, encode_matrix


@dataclass(frozen=True, eq=False)
class GeneralizedOpenOscillator:
    S: np.ndarray
    K: np.ndarray
    Omega: np.ndarray

    def __post_init__(self) -> None:
        S = np.atleast_2d(np.asarray(self.S, dtype=complex))
        m = S.shape[0]
        K = np.asarray(self.K, dtype=complex)
        Omega = np.asarray(self.Omega, dtype=complex)
        if Omega.size == 0:
            Omega = np.zeros((0, 0), dtype=complex)
        N = Omega.shape[0]
        K = K.reshape(m, N)
        if S.shape != (m, m):
            raise ValueError("S must be square")
        if Omega.shape != (N, N) or N % 2:
            raise ValueError("Omega must be square with even dimension")
        if fro(S.conj().T @ S - np.eye(m)) > 1e-10:
            raise ValueError("S must be unitary")
        if fro(Omega - Omega.conj().T) > 1e-12 * max(1.0, fro(Omega)):
            raise ValueError("Omega must be Hermitian")
        for name, a in (("S", S), ("K", K), ("Omega", Omega)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @property
    def n(self) -> int:
        return self.Omega.shape[0] // 2

    @property
    def m(self) -> int:
        return self.S.shape[0]


@dataclass(frozen=True)
class BasisMaps:
    """U (quadrature -> ladder), Theta, and the channel permutation P."""

    n: int
    m: int

    @property
    def U(self) -> np.ndarray:
        return ladder_unitary(self.n)

    @property
    def Theta(self) -> np.ndarray:
        return theta_matrix(self.n)

    @property
    def P(self) -> np.ndarray:
        return interleave_permutation(self.m)


def theta_identity_residual(n: int) -> float:
    """||Theta - (-i U^dag J U)||, zero by construction of U."""
    U = ladder_unitary(n)
    return fro(theta_matrix(n) - (-1j) * U.conj().T @ j_matrix(n) @ U)


def extract_slh(ss: StateSpace, tol: Tolerances = DEFAULT_TOL) -> GeneralizedOpenOscillator:
    """Read (S, K, Omega) off a realisable model.

    S_kl = D_{2k-1,2l-1}, K = [I 0] P C and Omega = (i/4)(J A - A^dag J),
    after removing the phase that pairs each annihilation state with its adjoint.
    """
    report = check_realizable(ss, tol)
    if not report.passed:
        raise RealizabilityError(f"state space is not physically realisable: {report.to_doc()}")
    m, n = ss.m, ss.n
    if n:
        sym = check_doubled_up_symmetry(ss, tol)
        if not sym["pass"]:
            raise RealizabilityError(
                f"state basis does not pair modes with their adjoints (residual {sym['residual']:.3e})"
            )
        # the fitted basis is x = (q b, b^dag); rescale so x = (b, b^dag)
        q = np.asarray(sym["phases"], dtype=complex)
        if np.any(np.abs(q - 1) > 0):
            W = np.diag(np.stack([q, np.ones(n)], axis=1).ravel())
            ss = apply_similarity(ss, W)
    S = ss.D[0::2, 0::2]
    K = (interleave_permutation(m) @ ss.C)[:m, :]
    J = j_matrix(n)
    Omega = 0.25j * (J @ ss.A - ss.A.conj().T @ J)
    Omega = 0.5 * (Omega + Omega.conj().T)
    return GeneralizedOpenOscillator(S, K, Omega)


def slh_to_ss(
    goo: GeneralizedOpenOscillator, pair_phases: Sequence[complex] | None = None
) -> StateSpace:
    """Build the realisable (A, B, C, D) of an oscillator.

    The creation-channel rows of C are the adjoint partners of K's rows, taken
    in the state basis x = (a_1, q_1 a_1^dag; ...) with ``pair_phases`` q
    (all ones by default). B, A follow from the realisability constraints:
    ``B = -J C^dag D J_m`` and ``A = -2i J Omega - (1/2) B J_m B^dag J``.
    """
    m, n = goo.m, goo.n
    K, S, Omega = goo.K, goo.S, goo.Omega
    Pm = interleave_permutation(m)
    q = np.ones(n, dtype=complex) if pair_phases is None else np.asarray(pair_phases, dtype=complex)
    # x^# = Qbar x for the phased basis, so L^dag = conj(K) Qbar x
    Qbar = np.zeros((2 * n, 2 * n), dtype=complex)
    for k in range(n):
        Qbar[2 * k, 2 * k + 1] = np.conj(q[k])
        Qbar[2 * k + 1, 2 * k] = np.conj(q[k])
    C = Pm.T @ np.vstack([K, K.conj() @ Qbar]) if n else np.zeros((2 * m, 0))
    D = Pm.T @ np.block([[S, np.zeros((m, m))], [np.zeros((m, m)), S.conj()]]) @ Pm
    J, Jm = j_matrix(n), j_matrix(m)
    B = -J @ C.conj().T @ D @ Jm
    A = -2j * J @ Omega - 0.5 * B @ Jm @ B.conj().T @ J
    return StateSpace(A, B, C, D)


def hamiltonian_matrix_quadrature(A_r: np.ndarray) -> np.ndarray:
    """Omega_r = (1/4)(-Theta A_r + A_r^T Theta) for a real quadrature drift."""
    A_r = np.asarray(A_r, dtype=float)
    Th = theta_matrix(A_r.shape[0] // 2)
    return 0.25 * (-Th @ A_r + A_r.T @ Th)


def convert_basis(ss: StateSpace, direction: str) -> StateSpace:
    """Switch between quadrature (q, p) and ladder (a, a^dag) coordinates.

    Ladder x = U x_r for states and fields, hence A = U A_r U^dag,
    B = U B_r U_m^dag, C = U_m C_r U^dag, D = U_m D_r U_m^dag.
    """
    if ss.n_states % 2 or ss.D.shape[0] % 2:
        raise ValueError("basis conversion needs even dimensions")
    U = ladder_unitary(ss.n_states // 2)
    Um = ladder_unitary(ss.D.shape[0] // 2)
    if direction == "to_ladder":
        L, R, Lm, Rm = U, U.conj().T, Um, Um.conj().T
    elif direction == "to_quadrature":
        L, R, Lm, Rm = U.conj().T, U, Um.conj().T, Um
    else:
        raise ValueError("direction must be 'to_ladder' or 'to_quadrature'")
    return StateSpace(L @ ss.A @ R, L @ ss.B @ Rm, Lm @ ss.C @ R, Lm @ ss.D @ Rm, ss.scale)


def _op(kind: str, k: int) -> str:
    name = f"a{k + 1}"
    return name + "^dag" if kind == "dag" else name


def total_hamiltonian_terms(goo: GeneralizedOpenOscillator, tol: float = 1e-12) -> list[dict[str, Any]]:
    """Normal-ordered term list of H_tot / hbar.

    Internal terms come from Omega (constant offsets from reordering dropped);
    interaction terms from i [L^dag, -L^T] u with u = (u_1, u_1^dag; ...).
    """
    n, m = goo.n, goo.m
    Om = goo.Omega
    coeff: dict[tuple[str, ...], complex] = {}

    def add(key: tuple[str, ...], c: complex) -> None:
        coeff[key] = coeff.get(key, 0) + c

    ops = [(_op("ann", k), _op("dag", k)) for k in range(n)]
    x = [o for pair in ops for o in pair]
    for i in range(2 * n):
        for j in range(2 * n):
            c = Om[i, j]
            if c == 0:
                continue
            left = x[i].replace("^dag", "") if x[i].endswith("^dag") else x[i] + "^dag"
            a, b = left, x[j]
            # normal order: creation operators first
            if not a.endswith("^dag") and b.endswith("^dag"):
                a, b = b, a
            add(tuple(sorted((a, b), key=lambda t: (not t.endswith("^dag"), t))), c)
    terms = [
        {"kind": "internal", "operators": list(k), "coefficient": complex(v)}
        for k, v in sorted(coeff.items())
        if abs(v) > tol
    ]
    # i (L^dag u - L^T u^dag) with L_k = sum_j K_kj x_j
    for ch in range(m):
        u, udag = f"u{ch + 1}", f"u{ch + 1}^dag"
        for j in range(2 * n):
            c = goo.K[ch, j]
            if abs(c) <= tol:
                continue
            xdag = x[j].replace("^dag", "") if x[j].endswith("^dag") else x[j] + "^dag"
            terms.append(
                {"kind": "coupling", "operators": [xdag, u], "coefficient": complex(1j * np.conj(c))}
            )
            terms.append(
                {"kind": "coupling", "operators": [x[j], udag], "coefficient": complex(-1j * c)}
            )
    return terms


def format_terms(terms: Sequence[dict[str, Any]]) -> str:
    parts = []
    for t in terms:
        c = t["coefficient"]
        parts.append(f"({c.real:+.6g}{c.imag:+.6g}i) {' '.join(t['operators'])}")
    return " + ".join(parts) if parts else "0"


def format_coupling(goo: GeneralizedOpenOscillator) -> list[str]:
    """Human-readable L_k = sum_j K_kj x_j for every channel."""
    lines = []
    x = [o for k in range(goo.n) for o in (_op("ann", k), _op("dag", k))]
    for ch in range(goo.m):
        pieces = [
            f"({c.real:+.6g}{c.imag:+.6g}i) {x[j]}"
            for j, c in enumerate(goo.K[ch])
            if abs(c) > 1e-12
        ]
        lines.append(f"L{ch + 1} = " + (" + ".join(pieces) if pieces else "0"))
    return lines


def oscillator_to_doc(goo: GeneralizedOpenOscillator) -> dict[str, Any]:
    return {
        "kind": "oscillator",
        "n": goo.n,
        "m": goo.m,
        "S": encode_matrix(goo.S),
        "K": encode_matrix(goo.K),
        "Omega": encode_matrix(goo.Omega),
    }


def oscillator_from_doc(doc: Any) -> GeneralizedOpenOscillator:
    if not isinstance(doc, dict):
        raise SchemaError("$", "expected an object")
    mats = {}
    for name in ("S", "K", "Omega"):
        if name not in doc:
            raise SchemaError(name, "missing matrix")
        mats[name] = decode_matrix(doc[name], name)
    S, K, Om = mats["S"], mats["K"], mats["Omega"]
    if S.shape[0] != S.shape[1]:
        raise SchemaError("S", "must be square")
    if Om.shape[0] != Om.shape[1] or Om.shape[0] % 2:
        raise SchemaError("Omega", "must be square with even dimension")
    if K.shape != (S.shape[0], Om.shape[0]):
        raise SchemaError("K", f"expected {S.shape[0]}x{Om.shape[0]}")
    try:
        return GeneralizedOpenOscillator(S, K, Om)
    except ValueError as exc:
        raise SchemaError("$", str(exc)) from None
