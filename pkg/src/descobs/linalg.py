"""Tolerance-aware dense matrix primitives.

Numerical rank, kernels, images and pre-images of subspaces, kernel
inclusion tests, and an ordered spectral split of a square matrix into
its closed-right-half-plane and open-left-half-plane parts.

Subspaces are represented by matrices with orthonormal columns; the
ambient dimension is the row count.  A subspace basis is recomputed
(re-orthonormalized) after every operation so that containment tests
stay well conditioned.  All functions accept real or complex input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds shared by all decision procedures.

    rank_rtol   relative singular-value cutoff for numerical rank
    stab_margin half-plane boundary margin: eigenvalues with real part
                >= -stab_margin count as "closed right half-plane"
    zero_atol   absolute threshold for declaring a matrix block zero
    """

    rank_rtol: float = 1e-10
    stab_margin: float = 1e-9
    zero_atol: float = 1e-8

    def __post_init__(self):
        if self.rank_rtol <= 0 or self.stab_margin <= 0 or self.zero_atol <= 0:
            raise ValueError("tolerances must be strictly positive")


DEFAULT_TOL = Tolerances()


def as_matrix(M, dtype=None) -> np.ndarray:
    """Coerce input to a 2-D ndarray with inexact dtype."""
    M = np.atleast_2d(np.asarray(M))
    if dtype is not None:
        return M.astype(dtype)
    if not np.issubdtype(M.dtype, np.inexact):
        M = M.astype(float)
    return M


def empty_subspace(ambient: int, complex_: bool = False) -> np.ndarray:
    dtype = complex if complex_ else float
    return np.zeros((ambient, 0), dtype=dtype)


def numerical_rank(M, tol: Tolerances = DEFAULT_TOL) -> int:
    """Number of singular values above rank_rtol * max(shape) * sigma_max."""
    M = as_matrix(M)
    if min(M.shape) == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0
    cutoff = tol.rank_rtol * max(M.shape) * s[0]
    return int(np.sum(s > cutoff))


def rank_gap(M, tol: Tolerances = DEFAULT_TOL) -> float:
    """Smallest ratio between a singular value and the rank cutoff.

    Values near 1 indicate a borderline rank decision.  Returns inf for
    matrices whose singular values are all comfortably classified.
    """
    M = as_matrix(M)
    if min(M.shape) == 0:
        return np.inf
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return np.inf
    cutoff = tol.rank_rtol * max(M.shape) * s[0]
    ratios = np.where(s > cutoff, s / cutoff, cutoff / np.maximum(s, 1e-300))
    return float(ratios.min())


def kernel_basis(M, tol: Tolerances = DEFAULT_TOL, sigma_floor: float = 0.0) -> np.ndarray:
    """Orthonormal basis of the right null space of M.

    The returned matrix has shape (cols, cols - numerical_rank(M)).
    Singular values below sigma_floor are treated as zero regardless of
    the relative cutoff; callers use this to anchor rank decisions to an
    external scale (e.g. the norm of a pencil whose projection is being
    examined).
    """
    M = as_matrix(M)
    m, n = M.shape
    if n == 0:
        return np.zeros((0, 0), dtype=M.dtype)
    if m == 0:
        return np.eye(n, dtype=M.dtype)
    _, s, Vh = np.linalg.svd(M, full_matrices=True)
    if s.size == 0 or s[0] == 0.0:
        r = 0
    else:
        cutoff = max(tol.rank_rtol * max(M.shape) * s[0], sigma_floor)
        r = int(np.sum(s > cutoff))
    return Vh[r:].conj().T


def orth_basis(M, tol: Tolerances = DEFAULT_TOL, sigma_floor: float = 0.0) -> np.ndarray:
    """Orthonormal basis of the column space of M."""
    M = as_matrix(M)
    if min(M.shape) == 0:
        return np.zeros((M.shape[0], 0), dtype=M.dtype)
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        r = 0
    else:
        cutoff = max(tol.rank_rtol * max(M.shape) * s[0], sigma_floor)
        r = int(np.sum(s > cutoff))
    return U[:, :r]


def _matrix_scale_floor(M, tol: Tolerances) -> float:
    """Rank cutoff anchored to the spectral norm of M itself.

    Projections and restrictions of M can have an arbitrarily small
    leading singular value, so a cutoff relative to their own norm would
    treat pure rounding noise as structure; directions of M below
    tol * ||M|| are not meaningful regardless of what survives the
    projection.
    """
    if min(M.shape) == 0:
        return 0.0
    return tol.rank_rtol * max(M.shape) * np.linalg.norm(M, 2)


def image(M, S, tol: Tolerances = DEFAULT_TOL, sigma_floor: float = 0.0) -> np.ndarray:
    """Basis of M * span(S)."""
    M, S = as_matrix(M), as_matrix(S)
    if M.shape[1] != S.shape[0]:
        raise ValueError(
            f"image: matrix has {M.shape[1]} columns, subspace ambient is {S.shape[0]}"
        )
    floor = max(sigma_floor, _matrix_scale_floor(M, tol))
    return orth_basis(M @ S, tol, floor)


def preimage(M, S, tol: Tolerances = DEFAULT_TOL, sigma_floor: float = 0.0) -> np.ndarray:
    """Basis of the pre-image {x : M x in span(S)}.

    Computed as the kernel of the projection of M onto the orthogonal
    complement of span(S).
    """
    M, S = as_matrix(M), as_matrix(S)
    if M.shape[0] != S.shape[0]:
        raise ValueError(
            f"preimage: matrix has {M.shape[0]} rows, subspace ambient is {S.shape[0]}"
        )
    proj = M - S @ (S.conj().T @ M)
    floor = max(sigma_floor, _matrix_scale_floor(M, tol))
    return kernel_basis(proj, tol, floor)


def kernel_included(X, Y, tol: Tolerances = DEFAULT_TOL) -> bool:
    """True iff ker X is contained in ker Y.

    Equivalent to rank [X; Y] == rank X.
    """
    X, Y = as_matrix(X), as_matrix(Y)
    if X.shape[1] != Y.shape[1]:
        raise ValueError("kernel_included: column counts differ")
    return numerical_rank(np.vstack([X, Y]), tol) == numerical_rank(X, tol)


def intersection(S1, S2, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Basis of span(S1) intersected with span(S2)."""
    S1, S2 = as_matrix(S1), as_matrix(S2)
    if S1.shape[0] != S2.shape[0]:
        raise ValueError("intersection: ambient dimensions differ")
    if S1.shape[1] == 0 or S2.shape[1] == 0:
        return empty_subspace(S1.shape[0], np.iscomplexobj(S1) or np.iscomplexobj(S2))
    ker = kernel_basis(np.hstack([S1, -S2]), tol)
    return orth_basis(S1 @ ker[: S1.shape[1]], tol)


def complement_within(inner, outer, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Basis C such that [inner, C] spans span(outer) + span(inner).

    inner and outer are subspace bases in the same ambient space.
    """
    inner, outer = as_matrix(inner), as_matrix(outer)
    if inner.shape[0] != outer.shape[0]:
        raise ValueError("complement_within: ambient dimensions differ")
    if inner.shape[1] == 0:
        return orth_basis(outer, tol)
    residual = outer - inner @ (inner.conj().T @ outer)
    # the residual of directions already inside span(inner) is pure
    # rounding noise; judge its rank against the scale of outer itself
    floor = _matrix_scale_floor(outer, tol)
    return orth_basis(residual, tol, floor)


def orthogonal_complement(S, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Basis of the orthogonal complement of span(S)."""
    S = as_matrix(S)
    return kernel_basis(S.conj().T, tol)


def ordered_spectral_split(M, tol: Tolerances = DEFAULT_TOL):
    """Split a real square matrix by half-plane.

    Returns (U, M1, M2, n1, n2) with U nonsingular,
    inv(U) @ M @ U = blkdiag(M1, M2), the spectrum of M1 in the closed
    right half-plane (with stab_margin slack) and the spectrum of M2 in
    the open left half-plane.  Built from an ordered real Schur
    decomposition followed by a Sylvester decoupling step.
    """
    M = as_matrix(M, dtype=float)
    n, nc = M.shape
    if n != nc:
        raise ValueError("ordered_spectral_split: matrix must be square")
    if n == 0:
        Z = np.zeros((0, 0))
        return Z, Z, Z, 0, 0
    T, Z, n1 = scipy.linalg.schur(
        M, output="real", sort=lambda re, im: re >= -tol.stab_margin
    )
    n2 = n - n1
    if n1 == 0 or n2 == 0:
        U = Z
    else:
        T11, T12, T22 = T[:n1, :n1], T[:n1, n1:], T[n1:, n1:]
        # T has disjoint half-plane spectra on the diagonal blocks, so the
        # Sylvester equation T11 X - X T22 = -T12 is uniquely solvable.
        X = scipy.linalg.solve_sylvester(T11, -T22, -T12)
        W = np.eye(n)
        W[:n1, n1:] = X
        U = Z @ W
    M1 = T[:n1, :n1].copy()
    M2 = T[n1:, n1:].copy()
    return U, M1, M2, n1, n2
