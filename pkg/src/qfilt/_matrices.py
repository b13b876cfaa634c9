"""Structural matrices shared by the doubled-up (a, a^dagger) machinery."""

from __future__ import annotations

import numpy as np


def j_matrix(n: int) -> np.ndarray:
    """J = diag(1, -1; ...; 1, -1) for n conjugate pairs."""
    return np.diag(np.tile([1.0, -1.0], n)).astype(complex)


def pair_swap(n: int) -> np.ndarray:
    """Permutation exchanging the two members of every conjugate pair."""
    out = np.zeros((2 * n, 2 * n), dtype=complex)
    for k in range(n):
        out[2 * k, 2 * k + 1] = 1.0
        out[2 * k + 1, 2 * k] = 1.0
    return out


def interleave_permutation(m: int) -> np.ndarray:
    """P mapping (u1, u1^dag; ...; um, um^dag) to (u1..um, u1^dag..um^dag)."""
    out = np.zeros((2 * m, 2 * m))
    for k in range(m):
        out[k, 2 * k] = 1.0
        out[m + k, 2 * k + 1] = 1.0
    return out


def ladder_unitary(n: int) -> np.ndarray:
    """Block-diagonal U taking quadratures (q, p) to ladder operators (a, a^dag)."""
    u1 = np.array([[1.0, 1.0j], [1.0, -1.0j]]) / np.sqrt(2.0)
    return np.kron(np.eye(n), u1)


def theta_matrix(n: int) -> np.ndarray:
    """Block-diagonal real symplectic form with blocks [[0, 1], [-1, 0]]."""
    return np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def fro(x: np.ndarray) -> float:
    return float(np.linalg.norm(x)) if np.size(x) else 0.0
