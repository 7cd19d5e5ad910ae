"""Subspace and rank primitives."""

import numpy as np
import pytest

from descobs.linalg import (
    DEFAULT_TOL,
    Tolerances,
    complement_within,
    intersection,
    kernel_basis,
    image,
    numerical_rank,
    ordered_spectral_split,
    orth_basis,
    orthogonal_complement,
    preimage,
    rank_gap,
)

rng = np.random.default_rng(42)


def test_tolerances_reject_nonpositive():
    with pytest.raises(ValueError):
        Tolerances(rank_rtol=0.0)
    with pytest.raises(ValueError):
        Tolerances(zero_atol=-1.0)


def test_numerical_rank_basic():
    assert numerical_rank(np.zeros((3, 4))) == 0
    assert numerical_rank(np.eye(5)) == 5
    M = np.outer([1.0, 2.0, 3.0], [4.0, 5.0])
    assert numerical_rank(M) == 1


def test_rank_gap_flags_borderline():
    # a singular value sitting exactly at 10x the cutoff gives gap ~ 10
    tol = DEFAULT_TOL
    cutoff = tol.rank_rtol * 2 * 1.0
    M = np.diag([1.0, 10 * cutoff])
    assert rank_gap(M, tol) == pytest.approx(10.0, rel=0.5)


def test_kernel_basis_orthonormal_and_annihilating():
    M = rng.standard_normal((3, 6))
    Kb = kernel_basis(M)
    assert Kb.shape == (6, 3)
    assert np.allclose(Kb.conj().T @ Kb, np.eye(3), atol=1e-12)
    assert np.linalg.norm(M @ Kb) < 1e-10


def test_orth_basis_spans_columns():
    M = rng.standard_normal((5, 2))
    B = orth_basis(np.hstack([M, M]))  # duplicated columns
    assert B.shape == (5, 2)
    # every original column lies in span(B)
    resid = M - B @ (B.conj().T @ M)
    assert np.linalg.norm(resid) < 1e-10


def test_preimage_image_duality():
    # x in preimage(M, S)  <=>  M x in span(S)
    M = rng.standard_normal((6, 5))
    S = orth_basis(rng.standard_normal((6, 2)))
    Pm = preimage(M, S)
    MS = M @ Pm
    resid = MS - S @ (S.conj().T @ MS)
    assert np.linalg.norm(resid) < 1e-9


def test_image_of_full_space_is_column_space():
    M = rng.standard_normal((4, 7))
    Im = image(M, np.eye(7))
    assert Im.shape[1] == numerical_rank(M)


def test_complement_within_ignores_rounding_noise():
    # inner already spans outer: the complement must be empty even though
    # the projection residual is nonzero rounding noise
    Q = orth_basis(rng.standard_normal((8, 5)))
    mixed = Q @ rng.standard_normal((5, 5))  # same span, different basis
    C = complement_within(Q, mixed)
    assert C.shape[1] == 0


def test_complement_within_dimensions():
    inner = orth_basis(rng.standard_normal((7, 2)))
    outer = orth_basis(rng.standard_normal((7, 5)))
    C = complement_within(inner, outer)
    total = np.hstack([inner, C])
    assert numerical_rank(total) == total.shape[1]
    # inner + complement covers outer
    resid = outer - total @ np.linalg.lstsq(total, outer, rcond=None)[0]
    assert np.linalg.norm(resid) < 1e-9


def test_intersection_dimension_identity():
    # dim(U) + dim(V) - dim(U cap V) = dim(U + V)
    U = orth_basis(rng.standard_normal((6, 4)))
    V = orth_basis(rng.standard_normal((6, 4)))
    cap = intersection(U, V)
    cup = orth_basis(np.hstack([U, V]))
    assert U.shape[1] + V.shape[1] - cap.shape[1] == cup.shape[1]


def test_intersection_of_identical_spans():
    U = orth_basis(rng.standard_normal((5, 3)))
    cap = intersection(U, U @ rng.standard_normal((3, 3)))
    assert cap.shape[1] == 3


def test_orthogonal_complement():
    S = orth_basis(rng.standard_normal((6, 2)))
    Oc = orthogonal_complement(S)
    assert Oc.shape == (6, 4)
    assert np.linalg.norm(S.conj().T @ Oc) < 1e-12


def test_ordered_spectral_split_reconstruction():
    for _ in range(20):
        n = int(rng.integers(1, 7))
        M = rng.standard_normal((n, n))
        U, M1, M2, n1, n2 = ordered_spectral_split(M)
        assert n1 + n2 == n
        rebuilt = U @ np.block(
            [
                [M1, np.zeros((n1, n2))],
                [np.zeros((n2, n1)), M2],
            ]
        ) @ np.linalg.inv(U)
        assert np.linalg.norm(rebuilt - M) <= 1e-8 * max(1.0, np.linalg.norm(M))
        if n1:
            assert np.all(np.linalg.eigvals(M1).real >= -1e-8)
        if n2:
            assert np.all(np.linalg.eigvals(M2).real < 1e-8)
