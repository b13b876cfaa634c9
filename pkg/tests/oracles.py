"""Independent reference computations used by the tests.

Nothing here imports the package's solvers: each oracle recomputes a value
through a different route (sympy, scipy, closed-form algebra, brute force).
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import sympy as sp

C = 299_792_458.0


def sympy_coeffs(text: str, symbols: dict[str, float]) -> tuple[list[complex], list[complex]]:
    """Ascending numerator/denominator coefficients via sympy's own parser."""
    s = sp.Symbol("s")
    local = {k: sp.Float(v) for k, v in symbols.items()}
    local.update({"s": s, "i": sp.I, "j": sp.I})
    expr = sp.sympify(text.replace("^", "**"), locals=local)
    num, den = sp.fraction(sp.together(expr))
    pn = sp.Poly(sp.expand(num), s)
    pd = sp.Poly(sp.expand(den), s)
    lead = complex(pd.all_coeffs()[0])
    to = lambda p: [complex(c) / lead for c in reversed(p.all_coeffs())]  # noqa: E731
    return to(pn), to(pd)


def eval_ratio(num: list[complex], den: list[complex], s: complex) -> complex:
    return np.polynomial.polynomial.polyval(s, num) / np.polynomial.polynomial.polyval(s, den)


def tf_negative_s(A, B, C_, D, s):
    """G(s) = C(-sI - A)^{-1} B + D by explicit inverse."""
    n = A.shape[0]
    return C_ @ np.linalg.inv(-s * np.eye(n) - A) @ B + D


def sylvester_X(A, B, m):
    """X from scipy's Bartels-Stewart solver: A X + X A^dag = -B J B^dag."""
    J = np.diag([1.0 if k % 2 == 0 else -1.0 for k in range(2 * m)])
    return sla.solve_sylvester(A, A.conj().T, -(B @ J @ B.conj().T))


def jmat(n):
    return np.diag([1.0 if k % 2 == 0 else -1.0 for k in range(2 * n)]).astype(complex)


def realizable_residuals(A, B, C_, D):
    n, m = A.shape[0] // 2, D.shape[0] // 2
    J, Jm = jmat(n), jmat(m)
    return (
        np.linalg.norm(A @ J + J @ A.conj().T + B @ Jm @ B.conj().T),
        np.linalg.norm(J @ C_.conj().T + B @ Jm @ D.conj().T),
        np.linalg.norm(D @ Jm @ D.conj().T - Jm),
    )


def unstable_filter_two_mode_dc(s0: float, gamma: float) -> complex:
    """Lossless two-mode model at w = 0, solved by hand.

    With no loss the a row reads 0 = i g b^dag, so b^dag = b = 0 and the
    output is y = sqrt(2 gamma) b - u = -u for every gamma > 0.
    """
    return -1.0 + 0j


def two_mode_bruteforce(s0, gamma, ga, gb, w):
    """Dense solve of the doubled-up Langevin system built element by element
    from the Hamiltonian, an independent route to the dynamics module.

    State (a, a^dag, b, b^dag); inputs (u, u^dag, n_a, n_a^dag, n_b, n_b^dag).
    dx/dt = M x + N v, y = sqrt(2 gamma) b - u.
    """
    g = np.sqrt(s0 * gamma)
    M = np.zeros((4, 4), complex)
    N = np.zeros((4, 6), complex)
    # H = -g (a^dag b^dag + a b): da/dt = -i[a, H] = i g b^dag
    M[0, 3] = 1j * g
    M[1, 2] = -1j * g
    M[2, 1] = 1j * g
    M[3, 0] = -1j * g
    M[0, 0] = M[1, 1] = -ga
    M[2, 2] = M[3, 3] = -(gamma + gb)
    N[0, 2] = N[1, 3] = -np.sqrt(2 * ga)
    N[2, 4] = N[3, 5] = np.sqrt(2 * gb)
    N[2, 0] = N[3, 1] = np.sqrt(2 * gamma)
    X = np.linalg.solve(-1j * w * np.eye(4) - M, N)
    y = np.sqrt(2 * gamma) * X[2]
    y[0] -= 1
    return y


def random_unitary(rng, m):
    z = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_goo_parts(rng, n, m):
    """Random (S, K, Omega) in doubled-up form with consistent pairing."""
    S = random_unitary(rng, m)
    K = np.zeros((m, 2 * n), complex)
    for k in range(n):
        K[:, 2 * k] = rng.normal(size=m) + 1j * rng.normal(size=m)
        K[:, 2 * k + 1] = rng.normal(size=m) + 1j * rng.normal(size=m)
    Om = np.zeros((2 * n, 2 * n), complex)
    for k in range(n):
        for l in range(n):
            if l < k:
                continue
            e2 = complex(rng.normal(), rng.normal()) * 0.5
            e1 = complex(rng.normal(), rng.normal()) * 0.5
            if k == l:
                d = rng.normal()
                blk = np.array([[d, e1], [np.conj(e1), d]])
                Om[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = blk
            else:
                blk = 0.5 * np.array([[e2, e1], [np.conj(e1), np.conj(e2)]])
                Om[2 * k : 2 * k + 2, 2 * l : 2 * l + 2] = blk
                Om[2 * l : 2 * l + 2, 2 * k : 2 * k + 2] = blk.conj().T
    return S, K, Om
