"""Pencil machinery: point Wong sequences, quasi-Kronecker decomposition,
finite spectrum, row compression."""

import numpy as np
import pytest
import scipy.linalg

from descobs.fixtures import load_system
from descobs.linalg import DEFAULT_TOL
from descobs.pencil import (
    QkfError,
    eta_compress,
    finite_spectrum,
    qkf,
    wong_sequence,
)

rng = np.random.default_rng(2024)


def residual(dec, E, A):
    scale = max(1.0, np.linalg.norm(E), np.linalg.norm(A))
    rE = np.linalg.norm(dec.P @ E @ dec.Q - dec.blkdiag_E())
    rA = np.linalg.norm(dec.P @ A @ dec.Q - dec.blkdiag_A())
    return max(rE, rA) / scale


def random_invertible(sz):
    M = rng.integers(-2, 3, (sz, sz)).astype(float)
    while abs(np.linalg.det(M)) < 0.5:
        M = rng.integers(-2, 3, (sz, sz)).astype(float)
    return M


# --- Wong sequences ---------------------------------------------------


def test_wong_dims_monotone_until_stable():
    sys_ = load_system("worked_example")
    E, A = sys_.stacked()
    for lam in (1.0, -1.0, 0.3 + 0.7j):
        ws = wong_sequence(E, A, lam)
        dims = ws.dims
        assert all(b > a for a, b in zip(dims, dims[1:]))
        # terminal space is a fixed point of one more step
        again = wong_sequence(E, A, lam)
        assert again.terminal.shape == ws.terminal.shape


def test_wong_identity_pencil_jordan_block():
    # for E = I, A a Jordan block at 1: the sequence at 1 climbs one
    # dimension per step through the generalized eigenspace
    A = np.array([[1.0, 1.0], [0.0, 1.0]])
    ws = wong_sequence(np.eye(2), A, 1.0)
    assert ws.dims == [0, 1, 2]
    assert ws.termination_index == 2


def test_wong_at_non_eigenvalue_is_trivial():
    A = np.diag([1.0, -2.0])
    ws = wong_sequence(np.eye(2), A, 5.0)
    assert ws.terminal.shape[1] == 0


# --- canonical single blocks ------------------------------------------


def test_qkf_underdetermined_block():
    E = np.array([[1.0, 0.0]])
    A = np.array([[0.0, 1.0]])
    dec = qkf(E, A)
    assert dec.sizes == (1, 2, 0, 0, 0, 0)


def test_qkf_finite_block():
    A = np.array([[3.0, 1.0], [0.0, -2.0]])
    dec = qkf(np.eye(2), A)
    assert dec.sizes == (0, 0, 2, 0, 0, 0)
    assert sorted(np.linalg.eigvals(dec.J_f).real.tolist()) == pytest.approx([-2.0, 3.0])


def test_qkf_nilpotent_block():
    E = np.diag([1.0], k=1)  # 2x2 with superdiagonal 1
    dec = qkf(E[:2, :2], np.eye(2))
    assert dec.sizes == (0, 0, 0, 2, 0, 0)
    assert np.linalg.norm(np.linalg.matrix_power(dec.J_sig, 2)) < 1e-10
    assert dec.nilpotency_index() == 2


def test_qkf_overdetermined_block():
    E = np.array([[1.0], [0.0]])
    A = np.array([[0.0], [1.0]])
    dec = qkf(E, A)
    assert dec.sizes == (0, 0, 0, 0, 2, 1)


# --- fixtures ---------------------------------------------------------


def test_qkf_worked_example_structure():
    sys_ = load_system("worked_example")
    E, A = sys_.stacked()
    dec = qkf(E, A)
    assert dec.sizes == (0, 0, 2, 2, 3, 1)
    assert residual(dec, E, A) < 1e-8
    assert dec.nilpotency_index() == 2
    spec = sorted(z.real for z in finite_spectrum(dec))
    assert spec == pytest.approx([-1.0, 1.0], abs=1e-8)


def test_qkf_jordan_counterexample_structure():
    sys_ = load_system("jordan_counterexample")
    E, A = sys_.stacked()
    dec = qkf(E, A)
    assert dec.sizes == (0, 0, 2, 0, 1, 0)


def test_qkf_derivative_gap_structure():
    sys_ = load_system("derivative_gap")
    E, A = sys_.stacked()
    dec = qkf(E, A)
    assert dec.sizes == (0, 0, 0, 0, 3, 2)


# --- random and planted structure -------------------------------------


def test_qkf_random_pencils_certified():
    for _ in range(60):
        m = int(rng.integers(1, 7))
        n = int(rng.integers(1, 7))
        E = rng.integers(-2, 3, (m, n)).astype(float)
        A = rng.integers(-2, 3, (m, n)).astype(float)
        dec = qkf(E, A)
        m_eps, n_eps, n_f, n_sig, m_eta, n_eta = dec.sizes
        assert m_eps + n_f + n_sig + m_eta == m
        assert n_eps + n_f + n_sig + n_eta == n
        assert m_eps < n_eps or (m_eps, n_eps) == (0, 0)
        assert m_eta > n_eta or (m_eta, n_eta) == (0, 0)
        assert residual(dec, E, A) < 1e-8
        if n_sig:
            assert (
                np.linalg.norm(np.linalg.matrix_power(dec.J_sig, n_sig)) < 1e-10
            )


def test_qkf_spectrum_strict_equivalence_invariant():
    for _ in range(20):
        n = int(rng.integers(1, 6))
        m = int(rng.integers(1, 6))
        E = rng.integers(-2, 3, (m, n)).astype(float)
        A = rng.integers(-2, 3, (m, n)).astype(float)
        dec = qkf(E, A)
        P, Q = random_invertible(m), random_invertible(n)
        dec2 = qkf(P @ E @ Q, P @ A @ Q)
        assert dec.sizes == dec2.sizes
        s1 = sorted(finite_spectrum(dec), key=lambda z: (z.real, z.imag))
        s2 = sorted(finite_spectrum(dec2), key=lambda z: (z.real, z.imag))
        assert len(s1) == len(s2)
        for a, b in zip(s1, s2):
            assert abs(a - b) < 1e-6


def planted_pencil():
    """Random block-diagonal pencil with known structure, scrambled by a
    random integer strict equivalence."""
    blocks = []
    m_eps = n_eps = n_f = n_sig = m_eta = n_eta = 0
    for _ in range(int(rng.integers(1, 4))):
        kind = int(rng.integers(0, 4))
        if kind == 0:  # underdetermined a x (a+1)
            a = int(rng.integers(0, 3))
            blocks.append((np.eye(a, a + 1), np.eye(a, a + 1, k=1)))
            m_eps += a
            n_eps += a + 1
        elif kind == 1:  # finite Jordan block
            a = int(rng.integers(1, 3))
            lam = float(rng.integers(-2, 3))
            blocks.append((np.eye(a), lam * np.eye(a) + np.diag(np.ones(a - 1), 1)))
            n_f += a
        elif kind == 2:  # nilpotent
            a = int(rng.integers(1, 3))
            blocks.append((np.diag(np.ones(a - 1), 1), np.eye(a)))
            n_sig += a
        else:  # overdetermined (a+1) x a
            a = int(rng.integers(0, 3))
            E = np.eye(a + 1, a)
            A = np.vstack([np.zeros((1, a)), np.eye(a)])
            blocks.append((E, A))
            m_eta += a + 1
            n_eta += a
    E = scipy.linalg.block_diag(*[b[0] for b in blocks])
    A = scipy.linalg.block_diag(*[b[1] for b in blocks])
    sizes = (m_eps, n_eps, n_f, n_sig, m_eta, n_eta)
    m, n = E.shape
    P, Q = random_invertible(m), random_invertible(n)
    return P @ E @ Q, P @ A @ Q, sizes


def test_qkf_recovers_planted_structure():
    for _ in range(25):
        E, A, sizes = planted_pencil()
        if E.shape[0] == 0 or E.shape[1] == 0:
            continue
        dec = qkf(E, A)
        assert dec.sizes == sizes
        assert residual(dec, E, A) < 1e-8


# --- eta compression --------------------------------------------------


def test_eta_compress_worked_example():
    sys_ = load_system("worked_example")
    E, A = sys_.stacked()
    dec = qkf(E, A)
    comp = eta_compress(dec.E_eta, dec.A_eta)
    n_eta = dec.n_eta
    # top part becomes an explicit ODE row, bottom rows are algebraic
    assert comp.A_eta1.shape == (n_eta, n_eta)
    assert comp.A_eta2.shape == (dec.m_eta - n_eta, n_eta)
    # U2 [E_eta; A_eta] recovers ([I; 0], [A_eta1; A_eta2])
    assert np.allclose(comp.U2 @ dec.E_eta, np.eye(dec.m_eta, n_eta), atol=1e-10)
    recovered = comp.U2 @ dec.A_eta
    assert np.allclose(recovered[:n_eta], comp.A_eta1, atol=1e-10)
    assert np.allclose(recovered[n_eta:], comp.A_eta2, atol=1e-10)


def test_qkf_dimension_mismatch_raises():
    with pytest.raises(ValueError):
        qkf(np.eye(2), np.eye(3))
