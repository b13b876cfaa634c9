"""Quantum physical realisability: residual checks, the Hermitian X solve,
J-factorisation and the similarity transform to a realisable model."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
import scipy.linalg as sla

from qfilt._matrices import fro, j_matrix, pair_swap
from qfilt.statespace import StateSpace, ss_to_tf
from qfilt.tfio import Grid, evaluate


@dataclass(frozen=True)
class Tolerances:
    """Relative tolerances; every default can be overridden from the CLI."""

    realizable: float = 1e-9
    symplectic: float = 1e-8
    eigen_pair: float = 1e-8
    unitary: float = 1e-10
    hermitian: float = 1e-10
    eq9: float = 1e-8
    inertia: float = 1e-10
    factor: float = 1e-9
    symmetry: float = 1e-9


DEFAULT_TOL = Tolerances()


class RealizabilityError(ValueError):
    pass


class EigenvaluePairError(RealizabilityError):
    def __init__(self, detail: str = ""):
        super().__init__(f"eigenvalue pair condition violated{': ' + detail if detail else ''}")


class FeedthroughError(RealizabilityError):
    """D fails the unitary/symplectic requirement."""


class SylvesterError(RealizabilityError):
    pass


class InertiaError(RealizabilityError):
    """X does not have balanced inertia: no quantum realisation exists."""


@dataclass(frozen=True)
class JStructure:
    pairs: int

    @property
    def matrix(self) -> np.ndarray:
        return j_matrix(self.pairs)


@dataclass(frozen=True)
class RealizabilityReport:
    residual_dyn: float
    residual_out: float
    residual_feed: float
    threshold: float
    passed: bool = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "passed",
            max(self.residual_dyn, self.residual_out, self.residual_feed) < self.threshold,
        )

    def to_doc(self) -> dict[str, Any]:
        return {
            "residual_dyn": self.residual_dyn,
            "residual_out": self.residual_out,
            "residual_feed": self.residual_feed,
            "threshold": self.threshold,
            "pass": self.passed,
        }


def _dims(ss: StateSpace) -> tuple[np.ndarray, np.ndarray]:
    return j_matrix(ss.n), j_matrix(ss.m)


def check_realizable(ss: StateSpace, tol: Tolerances = DEFAULT_TOL) -> RealizabilityReport:
    """Frobenius residuals of the three commutator-preservation constraints."""
    A, B, C, D = ss.matrices()
    J, Jm = _dims(ss)
    dyn = fro(A @ J + J @ A.conj().T + B @ Jm @ B.conj().T)
    out = fro(J @ C.conj().T + B @ Jm @ D.conj().T)
    feed = fro(D @ Jm @ D.conj().T - Jm)
    return RealizabilityReport(dyn, out, feed, tol.realizable * max(1.0, fro(A)))


def symplectic_residual(G_star: np.ndarray, G_minus: np.ndarray) -> float:
    """||G^dag(s*) J G(-s) - J|| given G(s*) and G(-s)."""
    Jm = j_matrix(G_star.shape[0] // 2)
    return fro(G_star.conj().T @ Jm @ G_minus - Jm)


def check_symplectic_tf(
    grid: Grid | StateSpace, points: Sequence[complex], tol: Tolerances = DEFAULT_TOL
) -> dict[str, Any]:
    """Maximum symplectic residual of a transfer matrix over ``points``.

    ``grid`` may be a doubled-up rational grid or a state space; poles on the
    grid raise from the evaluator.
    """
    if isinstance(grid, StateSpace):
        ev = lambda s: ss_to_tf(grid, s)  # noqa: E731
    else:
        ev = lambda s: evaluate(grid, s)  # noqa: E731
    residuals = [symplectic_residual(ev(np.conj(s)), ev(-s)) for s in points]
    worst = int(np.argmax(residuals)) if residuals else 0
    max_res = float(max(residuals)) if residuals else 0.0
    return {
        "max_residual": max_res,
        "at": complex(points[worst]) if residuals else None,
        "pass": max_res < tol.symplectic,
    }


def imaginary_grid(start: float, stop: float, points: int) -> np.ndarray:
    return 1j * np.linspace(start, stop, points)


def check_transform_conditions(ss: StateSpace, tol: Tolerances = DEFAULT_TOL) -> dict[str, Any]:
    """Eigenvalue-pair and unitary-symplectic-feedthrough preconditions."""
    A, D = ss.A, ss.D
    Jm = j_matrix(ss.m)
    if ss.n_states:
        lam = np.linalg.eigvals(A)
        sums = np.abs(lam[:, None] + lam[None, :].conj())
        min_pair = float(sums.min())
        eigen_ok = min_pair > tol.eigen_pair * max(fro(A), 1e-300)
    else:
        lam = np.zeros(0)
        min_pair = float("inf")
        eigen_ok = True
    unitary = fro(D.conj().T @ D - np.eye(D.shape[0]))
    feed = fro(D @ Jm @ D.conj().T - Jm)
    return {
        "eigen_ok": bool(eigen_ok),
        "d_ok": bool(unitary < tol.unitary and feed < tol.unitary),
        "details": {
            "eigenvalues": [complex(x) for x in lam],
            "min_pair_sum": min_pair,
            "unitary_residual": unitary,
            "feedthrough_residual": feed,
        },
    }


def sylvester_operator(A: np.ndarray) -> np.ndarray:
    """Matrix of X -> A X + X A^dag acting on column-major vec(X)."""
    N = A.shape[0]
    I = np.eye(N)
    return np.kron(I, A) + np.kron(A.conj(), I)


def solve_X(ss: StateSpace, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Hermitian X with A X + X A^dag + B J_m B^dag = 0 and X C^dag + B J_m D^dag = 0.

    The Sylvester equation is solved densely through its Kronecker form, which
    costs O(N^6) for N states; intended for filters of up to ~10 modes.
    """
    cond = check_transform_conditions(ss, tol)
    if not cond["eigen_ok"]:
        raise EigenvaluePairError(f"min |l_i + l_j*| = {cond['details']['min_pair_sum']:.3e}")
    A, B, C, D = ss.matrices()
    N = ss.n_states
    if N == 0:
        return np.zeros((0, 0), dtype=complex)
    Jm = j_matrix(ss.m)
    rhs = -(B @ Jm @ B.conj().T)
    L = sylvester_operator(A)
    try:
        vec = np.linalg.solve(L, rhs.reshape(-1, order="F"))
    except np.linalg.LinAlgError as exc:
        raise SylvesterError("Sylvester operator is singular") from exc
    X = vec.reshape(N, N, order="F")
    scale = max(1.0, fro(X))
    asym = fro(X - X.conj().T)
    if asym >= tol.hermitian * scale:
        raise SylvesterError(f"solution is not Hermitian (asymmetry {asym:.3e})")
    X = 0.5 * (X + X.conj().T)
    eq9 = fro(X @ C.conj().T + B @ Jm @ D.conj().T)
    if eq9 >= tol.eq9 * max(1.0, fro(X) * fro(C), fro(B) * fro(D)):
        raise RealizabilityError(
            f"output constraint inconsistent (residual {eq9:.3e}): the transfer matrix "
            "violates the symplectic condition or the realisation is not minimal"
        )
    return X


def inertia(X: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> tuple[int, int, int]:
    w = np.linalg.eigvalsh(0.5 * (X + X.conj().T))
    cut = tol.inertia * max(np.max(np.abs(w), initial=0.0), 1e-300)
    return int(np.sum(w > cut)), int(np.sum(w < -cut)), int(np.sum(np.abs(w) <= cut))


def j_factorize(X: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Nonsingular T with T J T^dag = X for Hermitian X of balanced inertia.

    Columns are scaled eigenvectors ordered (+, -, +, -, ...). Phases are fixed
    so each eigenvector's largest entry is real positive, then each negative
    column is rotated to make its pair's 2x2 diagonal block of T have a
    positive real determinant where that block is non-degenerate.
    """
    N = X.shape[0]
    if N == 0:
        return np.zeros((0, 0), dtype=complex)
    if N % 2:
        raise InertiaError(f"odd dimension {N}")
    Xh = 0.5 * (X + X.conj().T)
    w, V = np.linalg.eigh(Xh)
    scale = np.max(np.abs(w))
    if np.min(np.abs(w)) <= tol.inertia * scale:
        raise InertiaError("X is singular to working tolerance")
    pos = [i for i in np.argsort(-w) if w[i] > 0]
    neg = [i for i in np.argsort(w) if w[i] < 0]
    if len(pos) != len(neg):
        raise InertiaError(
            f"X has inertia ({len(pos)}, {len(neg)}); a quantum system needs ({N // 2}, {N // 2})"
        )
    T = np.zeros((N, N), dtype=complex)
    for k, (ip, ineg) in enumerate(zip(pos, neg)):
        for col, idx in ((2 * k, ip), (2 * k + 1, ineg)):
            v = V[:, idx]
            big = v[np.argmax(np.abs(v))]
            T[:, col] = v * (abs(big) / big) * np.sqrt(abs(w[idx]))
        block = T[2 * k : 2 * k + 2, 2 * k : 2 * k + 2]
        det = np.linalg.det(block)
        if abs(det) > 1e-8 * np.linalg.norm(block) ** 2:
            T[:, 2 * k + 1] *= np.conj(det) / abs(det)
    J = j_matrix(N // 2)
    err = fro(T @ J @ T.conj().T - Xh)
    if err >= tol.factor * max(fro(Xh), 1e-300):
        raise InertiaError(f"factorisation residual {err:.3e} too large")
    return T


def verify_factor(T: np.ndarray, X: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> bool:
    """Accept any T (including hand-derived ones) with T J T^dag = X."""
    J = j_matrix(T.shape[0] // 2)
    return fro(T @ J @ T.conj().T - X) < tol.factor * max(fro(X), 1e-300)


def apply_similarity(ss: StateSpace, T: np.ndarray) -> StateSpace:
    """(T^-1 A T, T^-1 B, C T, D)."""
    if ss.n_states == 0:
        return ss
    A, B, C, D = ss.matrices()
    return StateSpace(np.linalg.solve(T, A @ T), np.linalg.solve(T, B), C @ T, D, ss.scale)


def transform_to_realizable(
    ss: StateSpace, tol: Tolerances = DEFAULT_TOL, return_details: bool = False
) -> StateSpace | tuple[StateSpace, dict[str, Any]]:
    """Similarity-transform a minimal realisation into a physically realisable one."""
    cond = check_transform_conditions(ss, tol)
    if not cond["d_ok"]:
        raise FeedthroughError(
            "feedthrough must be unitary and symplectic "
            f"(unitary residual {cond['details']['unitary_residual']:.3e}, "
            f"symplectic residual {cond['details']['feedthrough_residual']:.3e})"
        )
    X = solve_X(ss, tol)
    T = j_factorize(X, tol)
    out = apply_similarity(ss, T)
    if not check_doubled_up_symmetry(out, tol)["pass"]:
        W = pairing_transform(out, tol)
        out = apply_similarity(out, W)
        T = T @ W
    report = check_realizable(out, tol)
    if not report.passed:
        raise RealizabilityError(f"transformed model is not realisable: {report.to_doc()}")
    if return_details:
        return out, {"X": X, "T": T, "report": report}
    return out


def check_doubled_up_symmetry(ss: StateSpace, tol: Tolerances = DEFAULT_TOL) -> dict[str, Any]:
    """Residual of the conjugate-pair structure, allowing a phase per state pair.

    A state basis x = (a_1, q_1 a_1^dag; ...) with |q_k| = 1 is consistent when
    A Q = Q conj(A), B Pi = Q conj(B), C Q = Pi conj(C) and D Pi = Pi conj(D),
    where Q pairs the states with phases and Pi swaps the field pairs. The
    phases are fitted by least squares before the residual is taken.
    """
    A, B, C, D = ss.matrices()
    Pm = pair_swap(D.shape[0] // 2)
    res_D = fro(D @ Pm - Pm @ D.conj())
    if ss.n_states == 0:
        residual = res_D
        phases: list[complex] = []
    else:
        n = ss.n
        Pn = pair_swap(n)
        # Q = sum_k q_k E_k with E_k the swap restricted to pair k
        E = []
        for k in range(n):
            e = np.zeros_like(Pn)
            e[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = Pn[2 * k : 2 * k + 2, 2 * k : 2 * k + 2]
            E.append(e)
        cols, rhs = [], []
        rhs = np.concatenate(
            [np.zeros(A.size), (B @ Pm).ravel(), (Pm @ C.conj()).ravel()]
        )
        for e in E:
            cols.append(
                np.concatenate(
                    [(A @ e - e @ A.conj()).ravel(), (e @ B.conj()).ravel(), (C @ e).ravel()]
                )
            )
        M = np.stack(cols, axis=1)
        q, *_ = np.linalg.lstsq(M, rhs, rcond=None)
        q = np.array([x / abs(x) if abs(x) > 1e-12 else 1.0 for x in q])
        Q = sum(qk * e for qk, e in zip(q, E))
        residual = np.sqrt(
            fro(A @ Q - Q @ A.conj()) ** 2
            + fro(B @ Pm - Q @ B.conj()) ** 2
            + fro(C @ Q - Pm @ C.conj()) ** 2
            + res_D**2
        )
        phases = [complex(x) for x in q]
    scale = max(1.0, fro(A), fro(B), fro(C), fro(D))
    return {
        "residual": float(residual),
        "phases": phases,
        "pass": bool(residual < tol.symmetry * scale),
    }


def conjugation_matrix(ss: StateSpace) -> np.ndarray:
    """Sigma with A Sigma = Sigma conj(A) and B Pi = Sigma conj(B) for a minimal model.

    Sigma conj(A^k B) = A^k B Pi, so Sigma follows from the controllability
    matrix. It exists whenever the transfer matrix has conjugate-pair symmetry.
    """
    A, B, _, D = ss.matrices()
    Pm = pair_swap(D.shape[0] // 2)
    blocks, blk = [], B
    for _ in range(ss.n_states):
        blocks.append(blk)
        blk = A @ blk
    K = np.hstack(blocks)
    KP = np.hstack([b @ Pm for b in blocks])
    return KP @ np.linalg.pinv(K.conj())


def pairing_transform(ss: StateSpace, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """J-unitary W so that W^-1 A W, W^-1 B, C W pair each state with its conjugate.

    Works on a realisable model (X = J). The conjugation-fixed vectors form a
    real space carrying the skew form Im(u^dag J v); a real Schur form of that
    form gives canonical pairs (x_k, y_k), and w_k = (x_k + i y_k)/sqrt2 with
    its conjugate partner become the new state columns.
    """
    N = ss.n_states
    Sig = conjugation_matrix(ss)
    scale = max(1.0, fro(Sig))
    if fro(Sig @ Sig.conj() - np.eye(N)) >= 1e-6 * scale**2:
        raise RealizabilityError("transfer matrix lacks conjugate-pair symmetry")
    # real basis of {v : Sig conj(v) = v}
    cand = np.hstack([np.eye(N) + Sig, 1j * np.eye(N) - 1j * Sig])
    stacked = np.vstack([cand.real, cand.imag])
    U, sv, _ = np.linalg.svd(stacked)
    if np.sum(sv > 1e-8 * sv[0]) != N:
        raise RealizabilityError("conjugation-fixed space has the wrong dimension")
    R = U[:N, :N] + 1j * U[N:, :N]
    J = j_matrix(N // 2)
    Om = (R.conj().T @ J @ R).imag
    Om = 0.5 * (Om - Om.T)
    S, Z = sla.schur(Om, output="real")
    W = np.zeros((N, N), dtype=complex)
    for k in range(N // 2):
        b = S[2 * k, 2 * k + 1]
        if abs(b) <= tol.inertia * max(1.0, fro(Om)):
            raise InertiaError("degenerate symplectic form on the real subspace")
        x, y = R @ Z[:, 2 * k], R @ Z[:, 2 * k + 1]
        if b > 0:
            x, y = y, x
        w = (x + 1j * y) / np.sqrt(2 * abs(b))
        W[:, 2 * k] = w
        W[:, 2 * k + 1] = Sig @ w.conj()
    if fro(W.conj().T @ J @ W - J) >= 1e-8 * max(1.0, fro(W)) ** 2:
        raise RealizabilityError("pairing transform is not J-unitary")
    return W
