"""Dense d x d linear algebra used throughout the package.

Everything is plain float64 numpy; matrices are small (d <= 64 by
contract) so LAPACK-backed factorizations are used instead of hand-rolled
iterations.  All public routines reject non-finite input and raise the
package error types on rank/definiteness failures rather than returning
garbage.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import NotPositiveDefinite, Singular

MAX_DIM = 64
# Conditioning past this signals a bug upstream (the projection sets bound
# condition numbers), so fail loudly instead of limping on.
COND_LIMIT = 1e12


def check_matrix(M: np.ndarray, name: str = "matrix") -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    if not 1 <= M.shape[0] <= MAX_DIM:
        raise ValueError(f"{name} dimension {M.shape[0]} outside [1, {MAX_DIM}]")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


def symmetrize(M: np.ndarray) -> np.ndarray:
    """Canonical symmetric storage: exact average of M and M.T."""
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


def is_symmetric(M: np.ndarray, tol: float = 0.0) -> bool:
    return bool(np.all(np.abs(M - M.T) <= tol))


def cholesky(S: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L @ L.T = S; S must be positive definite."""
    S = check_matrix(S, "S")
    if not is_symmetric(S, tol=1e-12 * (1.0 + np.abs(S).max())):
        raise ValueError("cholesky requires a symmetric matrix")
    try:
        return np.linalg.cholesky(symmetrize(S))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"non-positive pivot during factorization: {exc}") from exc


def log_det(M: np.ndarray) -> tuple[float, float]:
    """(log|det M|, sign); raises Singular when rank-deficient to tolerance."""
    M = check_matrix(M, "M")
    sign, logabs = np.linalg.slogdet(M)
    if sign == 0.0 or not np.isfinite(logabs):
        raise Singular("matrix is singular to working precision")
    if condition_number(M) > COND_LIMIT:
        raise Singular("matrix condition number exceeds 1e12")
    return float(logabs), float(sign)


def sym_eig(S: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of symmetric S."""
    S = check_matrix(S, "S")
    lam, Q = np.linalg.eigh(symmetrize(S))
    return lam, Q


def condition_number(M: np.ndarray) -> float:
    s = np.linalg.svd(np.asarray(M, dtype=float), compute_uv=False)
    if s[-1] == 0.0:
        return np.inf
    return float(s[0] / s[-1])


def inverse(M: np.ndarray) -> np.ndarray:
    """Inverse via factorization; raises Singular above the condition limit."""
    M = check_matrix(M, "M")
    if condition_number(M) > COND_LIMIT:
        raise Singular("matrix condition number exceeds 1e12")
    return np.linalg.inv(M)


def spd_sqrt(S: np.ndarray) -> np.ndarray:
    """Symmetric square root of a positive definite matrix."""
    lam, Q = sym_eig(S)
    if lam[0] <= 0.0:
        raise NotPositiveDefinite("matrix has a non-positive eigenvalue")
    return (Q * np.sqrt(lam)) @ Q.T


def spd_inv_sqrt(S: np.ndarray) -> np.ndarray:
    """Inverse symmetric square root of a positive definite matrix."""
    lam, Q = sym_eig(S)
    if lam[0] <= 0.0:
        raise NotPositiveDefinite("matrix has a non-positive eigenvalue")
    if lam[-1] / lam[0] > COND_LIMIT:
        raise Singular("matrix condition number exceeds 1e12")
    return (Q / np.sqrt(lam)) @ Q.T


def frobenius(M: np.ndarray) -> float:
    return float(np.linalg.norm(M, "fro"))


def lu_log_det(M: np.ndarray) -> tuple[float, float]:
    """Independent log|det| oracle via explicit LU with partial pivoting.

    Kept separate from log_det on purpose: tests compare the two routes.
    """
    M = check_matrix(M, "M")
    P, L, U = scipy.linalg.lu(M)
    diag = np.diag(U)
    if np.any(diag == 0.0):
        raise Singular("zero pivot in LU factorization")
    sign = float(np.linalg.det(P)) * float(np.prod(np.sign(diag)))
    return float(np.sum(np.log(np.abs(diag)))), sign
