"""State-space models under the sign convention G(s) = C(-sI - A)^{-1} B + D.

With the ``e^{+st}`` Laplace transform the roles of ``s`` and ``-s`` are swapped
relative to the usual control-theory tools, so a realisation is built for the
reflected function ``H(p) = G(-p) - D`` in the variable ``p = -s``. Matrices
serialized by this module carry ``"sign_convention": "paper_negative_s"`` so
they are not fed silently into ``(sI - A)`` software.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from qfilt.tfio import (
    Grid,
    RationalFunction,
    SchemaError,
    decode_matrix,
    encode_matrix,
)

SIGN_CONVENTION = "paper_negative_s"
RANK_RTOL = 1e-10
POLE_CLUSTER_RTOL = 1e-8
# a k-fold root comes back from the eigen-solver split by ~eps**(1/k)
REPEATED_ROOT_RTOL = 1e-5


class ImproperError(ValueError):
    pass


class NonMinimalError(ValueError):
    pass


class SingularityError(ZeroDivisionError):
    pass


class NormalizationError(ValueError):
    pass


@dataclass(frozen=True)
class Scale:
    """Record of a rate normalization s = (rate/2) s'."""

    rate: float
    dimensionless: bool = True


@dataclass(frozen=True, eq=False)
class StateSpace:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    scale: Scale | None = None

    def __post_init__(self) -> None:
        mats = {}
        for name in "ABCD":
            a = np.array(getattr(self, name), dtype=complex)
            if a.ndim != 2:
                a = a.reshape(0, 0) if a.size == 0 else np.atleast_2d(a)
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{name} has non-finite entries")
            a.setflags(write=False)
            mats[name] = a
        D = mats["D"]
        k = D.shape[0]
        N = mats["A"].shape[0] if mats["A"].size else 0
        # normalise empty matrices to consistent zero-state shapes
        if N == 0:
            mats["A"] = np.zeros((0, 0), dtype=complex)
            mats["B"] = np.zeros((0, D.shape[1]), dtype=complex)
            mats["C"] = np.zeros((k, 0), dtype=complex)
        A, B, C = mats["A"], mats["B"], mats["C"]
        if A.shape != (N, N):
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape != (N, D.shape[1]):
            raise ValueError(f"B must be {N}x{D.shape[1]}, got {B.shape}")
        if C.shape != (k, N):
            raise ValueError(f"C must be {k}x{N}, got {C.shape}")
        for name, a in mats.items():
            object.__setattr__(self, name, a)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        """Number of modes (conjugate pairs) in the state."""
        if self.n_states % 2:
            raise ValueError(f"state dimension {self.n_states} is not doubled-up")
        return self.n_states // 2

    @property
    def m(self) -> int:
        """Number of field channels."""
        if self.D.shape[0] % 2 or self.D.shape[0] != self.D.shape[1]:
            raise ValueError(f"feedthrough shape {self.D.shape} is not doubled-up")
        return self.D.shape[0] // 2

    def matrices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return self.A, self.B, self.C, self.D

    def __call__(self, s: complex) -> np.ndarray:
        return ss_to_tf(self, s)


def ss_to_tf(ss: StateSpace, s: complex) -> np.ndarray:
    """C(-sI - A)^{-1} B + D by a linear solve."""
    if ss.n_states == 0:
        return np.array(ss.D)
    s = complex(s)
    eig = np.linalg.eigvals(ss.A)
    gap = np.abs(s + eig)
    if np.any(gap <= 1e-10 * np.maximum(1.0, np.abs(eig))):
        raise SingularityError(f"s={s!r} coincides with an eigenvalue of -A")
    M = -s * np.eye(ss.n_states) - ss.A
    return ss.C @ np.linalg.solve(M, ss.B) + ss.D


def condition_at(ss: StateSpace, s: complex) -> float:
    """Condition number of (-sI - A), reported alongside sweeps."""
    if ss.n_states == 0:
        return 1.0
    return float(np.linalg.cond(-complex(s) * np.eye(ss.n_states) - ss.A))


# ----------------------------------------------------------------- realisation

def _feedthrough(g: RationalFunction) -> complex:
    if not g.is_proper:
        raise ImproperError(f"entry {g.to_text()} is improper (deg num > deg den)")
    if g.num_degree == g.den_degree:
        return g.num[-1] / g.den[-1]
    return 0j


def _strict_part(g: RationalFunction, d: complex) -> RationalFunction:
    """Strictly proper part of g(-p) - d as a function of p, common factors removed."""
    h = g.reflect()
    if h.den_degree == 0:
        return RationalFunction.constant(0)
    num = P.polysub(np.asarray(h.num), d * np.asarray(h.den))
    num = num[: len(h.den) - 1]
    return RationalFunction(tuple(num), h.den).reduced(1e-9)


def _cluster(values: Sequence[complex], rtol: float) -> list[list[int]]:
    clusters: list[list[int]] = []
    reps: list[complex] = []
    for i, v in enumerate(values):
        for c, r in enumerate(reps):
            if abs(v - r) <= rtol * max(1.0, abs(r)):
                clusters[c].append(i)
                break
        else:
            clusters.append([i])
            reps.append(v)
    return clusters


def _entry_roots(h: RationalFunction) -> np.ndarray:
    if h.num_degree < 0:
        return np.zeros(0, dtype=complex)
    return h.poles()


def _has_repeated(roots: np.ndarray) -> bool:
    return any(len(c) > 1 for c in _cluster(list(roots), REPEATED_ROOT_RTOL))


def tf_to_minimal_ss(grid: Grid, scale: Scale | None = None) -> StateSpace:
    """Minimal realisation of a proper rational grid.

    Simple poles use Gilbert's residue construction: every pole ``p_i`` of
    ``H(p) = G(-p) - D`` contributes ``rank(R_i)`` states with ``A`` block
    ``p_i I`` and ``R_i = C_i B_i``. A full-rank residue is split as
    ``B_i = I, C_i = R_i``. Repeated poles fall back to column-wise
    controllable companion blocks followed by a staircase reduction.
    """
    rows = len(grid)
    cols = len(grid[0]) if rows else 0
    D = np.array([[_feedthrough(g) for g in row] for row in grid], dtype=complex).reshape(rows, cols)
    H = [[_strict_part(grid[i][j], D[i, j]) for j in range(cols)] for i in range(rows)]
    roots = {(i, j): _entry_roots(H[i][j]) for i in range(rows) for j in range(cols)}
    if all(r.size == 0 for r in roots.values()):
        return StateSpace(np.zeros((0, 0)), np.zeros((0, cols)), np.zeros((rows, 0)), D, scale)
    if any(_has_repeated(r) for r in roots.values()):
        ss = _companion_realization(H, D)
        ss = minimal_reduction(ss)
    else:
        ss = _gilbert(H, roots, D)
    report = minimality_report(ss)
    if not report["minimal"]:
        raise NonMinimalError(f"realisation is not minimal: {report}")
    return replace(ss, scale=scale)


def _gilbert(H, roots, D) -> StateSpace:
    rows, cols = D.shape
    flat = [(key, complex(r)) for key, rs in roots.items() for r in rs]
    clusters = _cluster([r for _, r in flat], POLE_CLUSTER_RTOL)
    reps = [(complex(np.mean([flat[i][1] for i in c])), c) for c in clusters]
    reps.sort(key=lambda t: (round(t[0].real, 12), round(t[0].imag, 12)))
    residues = []
    for pole, members in reps:
        R = np.zeros((rows, cols), dtype=complex)
        for idx in members:
            (i, j), root = flat[idx]
            h = H[i][j]
            dden = P.polyder(np.asarray(h.den))
            R[i, j] = P.polyval(root, np.asarray(h.num)) / P.polyval(root, dden)
        residues.append((pole, R))
    # residues negligible against the largest one carry no observable state
    big = max((np.linalg.norm(R, 2) for _, R in residues), default=0.0)
    A_blocks, B_blocks, C_blocks = [], [], []
    for pole, R in residues:
        U, sv, Vh = np.linalg.svd(R)
        if sv.size == 0 or sv[0] <= RANK_RTOL * big:
            continue
        rank = int(np.sum(sv > RANK_RTOL * big))
        if rank == rows == cols:
            Bi, Ci = np.eye(cols, dtype=complex), R
        else:
            Ci = U[:, :rank] * sv[:rank]
            Bi = Vh[:rank, :]
        A_blocks.append(pole * np.eye(rank))
        B_blocks.append(Bi)
        C_blocks.append(Ci)
    if not A_blocks:
        return StateSpace(np.zeros((0, 0)), np.zeros((0, cols)), np.zeros((rows, 0)), D)
    N = sum(a.shape[0] for a in A_blocks)
    A = np.zeros((N, N), dtype=complex)
    k = 0
    for a in A_blocks:
        r = a.shape[0]
        A[k : k + r, k : k + r] = a
        k += r
    return StateSpace(A, np.vstack(B_blocks), np.hstack(C_blocks), D)


def _companion_realization(H, D) -> StateSpace:
    rows, cols = D.shape
    A_blocks, B_cols, C_blocks = [], [], []
    for j in range(cols):
        # least common denominator of the column from root multiplicities
        lcm: list[tuple[complex, int]] = []
        for i in range(rows):
            rs = _entry_roots(H[i][j])
            for c in _cluster(list(rs), REPEATED_ROOT_RTOL):
                root = complex(np.mean([rs[t] for t in c]))
                mult = len(c)
                for t, (r0, m0) in enumerate(lcm):
                    if abs(r0 - root) <= REPEATED_ROOT_RTOL * max(1.0, abs(r0)):
                        lcm[t] = (r0, max(m0, mult))
                        break
                else:
                    lcm.append((root, mult))
        lcm_roots = [r for r, mult in lcm for _ in range(mult)]
        k = len(lcm_roots)
        if k == 0:
            continue
        d = P.polyfromroots(lcm_roots)  # monic, ascending
        Aj = np.zeros((k, k), dtype=complex)
        Aj[:-1, 1:] = np.eye(k - 1)
        Aj[-1, :] = -d[:k]
        Cj = np.zeros((rows, k), dtype=complex)
        for i in range(rows):
            h = H[i][j]
            if h.num_degree < 0:
                continue
            # h = num/den; multiply by lcm/den to put over the common denominator
            q, r = P.polydiv(d, np.asarray(h.den) / h.den[-1])
            n = P.polymul(np.asarray(h.num) / h.den[-1], q)
            Cj[i, : min(k, len(n))] = n[:k]
        A_blocks.append(Aj)
        col = np.zeros((k, cols), dtype=complex)
        col[-1, j] = 1.0
        B_cols.append(col)
        C_blocks.append(Cj)
    N = sum(a.shape[0] for a in A_blocks)
    A = np.zeros((N, N), dtype=complex)
    k = 0
    for a in A_blocks:
        r = a.shape[0]
        A[k : k + r, k : k + r] = a
        k += r
    return StateSpace(A, np.vstack(B_cols), np.hstack(C_blocks), D)


def _reachable_basis(A: np.ndarray, B: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis of the reachable subspace by a block-Arnoldi staircase."""
    N = A.shape[0]
    basis = np.zeros((N, 0), dtype=complex)
    block = B
    scale = max(1.0, np.linalg.norm(A), np.linalg.norm(B))
    while block.size and basis.shape[1] < N:
        block = block - basis @ (basis.conj().T @ block)
        block = block - basis @ (basis.conj().T @ block)
        U, sv, _ = np.linalg.svd(block, full_matrices=False)
        ambiguous = (sv > 1e-12 * scale) & (sv <= tol * scale)
        if np.any(ambiguous & (sv > 1e3 * 1e-12 * scale)):
            raise NonMinimalError("rank decision is tolerance-ambiguous")
        new = U[:, sv > tol * scale]
        if new.shape[1] == 0:
            break
        basis = np.hstack([basis, new])
        block = A @ new
    return basis


def minimal_reduction(ss: StateSpace, tol: float = 1e-9) -> StateSpace:
    """Remove unreachable then unobservable states (orthogonal Kalman reduction)."""
    A, B, C, D = ss.matrices()
    if ss.n_states == 0:
        return ss
    Q = _reachable_basis(A, B, tol)
    A, B, C = Q.conj().T @ A @ Q, Q.conj().T @ B, C @ Q
    W = _reachable_basis(A.conj().T, C.conj().T, tol)
    A, B, C = W.conj().T @ A @ W, W.conj().T @ B, C @ W
    return StateSpace(A, B, C, D, ss.scale)


def _block_krylov(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    N = A.shape[0]
    blocks = []
    cur = B
    for _ in range(N):
        norm = np.linalg.norm(cur)
        blocks.append(cur / norm if norm > 0 else cur)
        cur = A @ blocks[-1]
    return np.hstack(blocks)


def _rank(M: np.ndarray) -> int:
    if M.size == 0:
        return 0
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[0] == 0:
        return 0
    return int(np.sum(sv > RANK_RTOL * sv[0]))


def minimality_report(ss: StateSpace) -> dict[str, Any]:
    """Controllability / observability ranks of the (block-normalised) Krylov matrices."""
    N = ss.n_states
    if N == 0:
        return {"states": 0, "controllable_rank": 0, "observable_rank": 0, "minimal": True}
    ctrb = _rank(_block_krylov(ss.A, ss.B))
    obsv = _rank(_block_krylov(ss.A.conj().T, ss.C.conj().T))
    return {
        "states": N,
        "controllable_rank": ctrb,
        "observable_rank": obsv,
        "minimal": ctrb == N and obsv == N,
    }


# ---------------------------------------------------------------- normalisation

def normalize(ss: StateSpace, rate: float) -> StateSpace:
    """Rescale to the dimensionless variable s' where s = (rate/2) s'."""
    if rate <= 0:
        raise ValueError("rate must be positive")
    if ss.scale is not None:
        raise NormalizationError("state space is already normalised")
    k = 2.0 / rate
    r = np.sqrt(k)
    return StateSpace(ss.A * k, ss.B * r, ss.C * r, ss.D, Scale(float(rate)))


def denormalize(ss: StateSpace) -> StateSpace:
    if ss.scale is None:
        raise NormalizationError("state space carries no normalisation record")
    k = ss.scale.rate / 2.0
    r = np.sqrt(k)
    return StateSpace(ss.A * k, ss.B * r, ss.C * r, ss.D, None)


# ---------------------------------------------------------------- documents

def state_space_to_doc(ss: StateSpace) -> dict[str, Any]:
    N, k = ss.n_states, ss.D.shape[0]
    return {
        "kind": "state_space",
        "sign_convention": SIGN_CONVENTION,
        "n": N // 2 if N % 2 == 0 else None,
        "m": k // 2 if k % 2 == 0 else None,
        "A": encode_matrix(ss.A),
        "B": encode_matrix(ss.B),
        "C": encode_matrix(ss.C),
        "D": encode_matrix(ss.D),
        "scale": None
        if ss.scale is None
        else {"rate": ss.scale.rate, "dimensionless": ss.scale.dimensionless},
    }


def state_space_from_doc(doc: Any) -> StateSpace:
    if not isinstance(doc, dict):
        raise SchemaError("$", "expected an object")
    conv = doc.get("sign_convention")
    if conv != SIGN_CONVENTION:
        raise SchemaError("sign_convention", f"expected {SIGN_CONVENTION!r}, got {conv!r}")
    mats = {}
    for name in "ABCD":
        if name not in doc:
            raise SchemaError(name, "missing matrix")
        mats[name] = decode_matrix(doc[name], name)
    A, B, C, D = (mats[x] for x in "ABCD")
    N = A.shape[0]
    if A.shape[1] != N:
        raise SchemaError("A", f"must be square, got {A.shape[0]}x{A.shape[1]}")
    if D.shape[0] != D.shape[1]:
        raise SchemaError("D", f"must be square, got {D.shape[0]}x{D.shape[1]}")
    if B.shape != (N, D.shape[1]):
        raise SchemaError("B", f"expected {N}x{D.shape[1]}, got {B.shape[0]}x{B.shape[1]}")
    if C.shape != (D.shape[0], N):
        raise SchemaError("C", f"expected {D.shape[0]}x{N}, got {C.shape[0]}x{C.shape[1]}")
    if doc.get("n") is not None and 2 * doc["n"] != N:
        raise SchemaError("n", f"inconsistent with A ({N} states)")
    if doc.get("m") is not None and 2 * doc["m"] != D.shape[0]:
        raise SchemaError("m", f"inconsistent with D ({D.shape[0]} channels)")
    scale = doc.get("scale")
    if scale is not None:
        if not isinstance(scale, dict) or not isinstance(scale.get("rate"), (int, float)):
            raise SchemaError("scale.rate", "expected a number")
        scale = Scale(float(scale["rate"]), bool(scale.get("dimensionless", True)))
    return StateSpace(A, B, C, D, scale)
