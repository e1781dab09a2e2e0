"""Closed-form 2x2 control mathematics.

Every system in this package is second order, so eigenvalues, pole
placement and the Lyapunov equation are solved explicitly instead of
through general-n routines. Matrices are ``(2, 2)`` float arrays and
vectors ``(2,)`` float arrays.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

CONTROLLABILITY_TOL = 1e-12
SYMMETRY_TOL = 1e-12
LYAPUNOV_COND_LIMIT = 1e12

_EPS = np.finfo(float).eps


class Uncontrollable(ValueError):
    """The pair (A, B) has a (numerically) singular controllability matrix."""


class NotHurwitz(ValueError):
    pass


class SingularSystem(ValueError):
    pass


def as_mat2(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix entries must be finite")
    return A


def as_vec2(b) -> np.ndarray:
    b = np.asarray(b, dtype=float).reshape(-1)
    if b.shape != (2,):
        raise ValueError(f"expected a 2-vector, got shape {b.shape}")
    if not np.all(np.isfinite(b)):
        raise ValueError("vector entries must be finite")
    return b


@dataclass(frozen=True)
class StateSpace2:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "A", as_mat2(self.A))
        object.__setattr__(self, "B", as_vec2(self.B))
        object.__setattr__(self, "C", as_vec2(self.C))
        object.__setattr__(self, "D", float(self.D))


def eig2(A) -> tuple[complex, complex]:
    """Eigenvalues of a 2x2 matrix, ordered by descending real part.

    Uses the half-discriminant ``((a11 - a22)/2)^2 + a12*a21``, which avoids
    the ``tr^2 - 4 det`` cancellation. A discriminant within its own rounding
    error of zero is treated as a double root; otherwise the sqrt of a 1e-16
    perturbation would scatter a repeated pole by ~1e-8.
    """
    A = as_mat2(A)
    (a11, a12), (a21, a22) = A
    half_tr = 0.5 * (a11 + a22)
    half_gap = 0.5 * (a11 - a22)
    disc = half_gap * half_gap + a12 * a21
    scale = half_gap * half_gap + abs(a12 * a21)
    if abs(disc) <= 8 * _EPS * scale:
        disc = 0.0
    if disc >= 0:
        root = disc**0.5
        # larger-magnitude root first, the other from the product to keep precision
        big = half_tr + root if half_tr >= 0 else half_tr - root
        det = a11 * a22 - a12 * a21
        if big == 0:
            small = 0.0
        elif root == 0:
            small = big
        else:
            small = det / big
        lo, hi = sorted((big, small))
        return complex(hi), complex(lo)
    root = cmath.sqrt(disc)
    return complex(half_tr, root.imag), complex(half_tr, -root.imag)


def _real_char_coeffs(mu1: complex, mu2: complex) -> tuple[float, float]:
    mu1, mu2 = complex(mu1), complex(mu2)
    real_pair = mu1.imag == 0 and mu2.imag == 0
    conj_pair = abs(mu1 - mu2.conjugate()) <= 1e-12 * max(1.0, abs(mu1))
    if not (real_pair or conj_pair):
        raise ValueError(f"poles must be real or a conjugate pair, got {mu1}, {mu2}")
    # s^2 + c1 s + c0
    return -(mu1 + mu2).real, (mu1 * mu2).real


def controllability_det(A, B) -> float:
    A, B = as_mat2(A), as_vec2(B)
    AB = A @ B
    return B[0] * AB[1] - B[1] * AB[0]


def place_poles2(A, B, mu1: complex, mu2: complex) -> np.ndarray:
    """State-feedback row ``K`` such that ``A - outer(B, K)`` has poles mu1, mu2.

    Matches the coefficients of ``det(sI - A + B K)`` against
    ``(s - mu1)(s - mu2)``. Both coefficients are affine in K, so this is a
    2x2 linear solve.
    """
    A, B = as_mat2(A), as_vec2(B)
    if abs(controllability_det(A, B)) < CONTROLLABILITY_TOL:
        raise Uncontrollable("controllability matrix [B, AB] is singular")
    c1, c0 = _real_char_coeffs(mu1, mu2)
    tr = A[0, 0] + A[1, 1]
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    adj_b = np.array([A[1, 1] * B[0] - A[0, 1] * B[1], -A[1, 0] * B[0] + A[0, 0] * B[1]])
    # tr(A - BK) = tr - B.K = -c1 ; det(A - BK) = det - K.adj(A)B = c0
    lhs = np.array([B, adj_b])
    rhs = np.array([tr + c1, det - c0])
    return np.linalg.solve(lhs, rhs)


def is_hurwitz2(A) -> bool:
    A = as_mat2(A)
    tr = A[0, 0] + A[1, 1]
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    return bool(tr < 0 and det > 0)


def is_spd2(P) -> bool:
    P = as_mat2(P)
    scale = max(1.0, float(np.max(np.abs(P))))
    if abs(P[0, 1] - P[1, 0]) > SYMMETRY_TOL * scale:
        return False
    return bool(P[0, 0] > 0 and P[0, 0] * P[1, 1] - P[0, 1] * P[1, 0] > 0)


def _lyapunov_operator(Am: np.ndarray) -> np.ndarray:
    (a11, a12), (a21, a22) = Am
    # rows: (1,1), (1,2), (2,2) entries of P Am + Am^T P in unknowns (p11, p12, p22)
    return np.array(
        [
            [2 * a11, 2 * a21, 0.0],
            [a12, a11 + a22, a21],
            [0.0, 2 * a12, 2 * a22],
        ]
    )


def lyapunov_residual(P, Am, Q) -> float:
    P, Am, Q = as_mat2(P), as_mat2(Am), as_mat2(Q)
    return float(np.max(np.abs(P @ Am + Am.T @ P + Q)))


def solve_lyapunov2(Am, Q) -> np.ndarray:
    """Symmetric ``P`` with ``P Am + Am^T P = -Q``.

    Raises :class:`NotHurwitz` unless Am is Hurwitz and ``ValueError`` unless
    Q is symmetric positive definite.
    """
    Am, Q = as_mat2(Am), as_mat2(Q)
    if not is_hurwitz2(Am):
        raise NotHurwitz("reference matrix is not Hurwitz")
    if not is_spd2(Q):
        raise ValueError("Q must be symmetric positive definite")
    op = _lyapunov_operator(Am)
    if np.linalg.cond(op) > LYAPUNOV_COND_LIMIT:
        raise SingularSystem("Lyapunov linear system is ill-conditioned")
    q12 = 0.5 * (Q[0, 1] + Q[1, 0])
    rhs = -np.array([Q[0, 0], q12, Q[1, 1]])
    p = np.linalg.solve(op, rhs)
    # one step of iterative refinement
    p = p + np.linalg.solve(op, rhs - op @ p)
    return np.array([[p[0], p[1]], [p[1], p[2]]])
