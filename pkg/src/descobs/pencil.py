"""Matrix pencil machinery.

Wong sequences at a point, quasi-Kronecker decomposition of an arbitrary
(possibly singular, possibly non-square) pencil, finite spectrum
extraction, and row compression of the overdetermined block.

The decomposition splits P (lambda E - A) Q into

    blkdiag(lambda E_eps - A_eps,   # underdetermined part
            lambda I - J_f,         # finite eigenvalues
            lambda J_sig - I,       # nilpotent / infinite part
            lambda E_eta - A_eta)   # overdetermined part

and is computed from the two point-independent Wong subspace limits
followed by coupled Sylvester decoupling of the off-diagonal blocks.
Any of the four blocks may be empty; 0-by-k matrices are first class
citizens throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .linalg import (
    DEFAULT_TOL,
    Tolerances,
    as_matrix,
    complement_within,
    empty_subspace,
    image,
    intersection,
    kernel_basis,
    numerical_rank,
    orth_basis,
    orthogonal_complement,
    preimage,
)


class QkfError(RuntimeError):
    """Raised when the decomposition cannot be certified at tolerance."""


@dataclass(frozen=True)
class WongSequence:
    """Wong sequence of a pencil at a point lambda.

    iterates[0] is the zero subspace; dimensions strictly increase until
    the sequence stabilizes at `terminal` after `termination_index` steps.
    """

    lam: complex
    iterates: list
    terminal: np.ndarray
    termination_index: int

    @property
    def dims(self):
        return [S.shape[1] for S in self.iterates]


def wong_sequence(
    E,
    A,
    lam: complex,
    tol: Tolerances = DEFAULT_TOL,
    sigma_floor: float = 0.0,
) -> WongSequence:
    """Iterate W0 = {0}, W_{i+1} = (A - lam E)^{-1} (E W_i) until stable.

    All rank decisions inside the iteration treat singular values below
    ``sigma_floor`` as zero.  Anchoring the floor to the pencil scale (and
    to the uncertainty of lambda when it is a computed eigenvalue) keeps
    the iteration from stalling on projections whose only content is noise
    of size comparable to the eigenvalue error.
    """
    E = as_matrix(E, dtype=complex)
    A = as_matrix(A, dtype=complex)
    if E.shape != A.shape:
        raise ValueError("wong_sequence: E and A must share dimensions")
    n = E.shape[1]
    M = A - lam * E
    W = empty_subspace(n, complex_=True)
    iterates = [W]
    for i in range(n + 1):
        W_next = preimage(M, image(E, W, tol), tol, sigma_floor=sigma_floor)
        if W_next.shape[1] == W.shape[1]:
            return WongSequence(lam, iterates, W, i)
        W = W_next
        iterates.append(W)
    # dimensions are bounded by n, so stabilization within n steps is certain
    return WongSequence(lam, iterates, W, len(iterates) - 1)


@dataclass(frozen=True)
class QkfDecomposition:
    P: np.ndarray
    Q: np.ndarray
    E_eps: np.ndarray
    A_eps: np.ndarray
    J_f: np.ndarray
    J_sig: np.ndarray
    E_eta: np.ndarray
    A_eta: np.ndarray
    cond_P: float = field(default=np.nan, compare=False)
    cond_Q: float = field(default=np.nan, compare=False)

    @property
    def sizes(self):
        """(m_eps, n_eps, n_f, n_sig, m_eta, n_eta)."""
        return (
            self.E_eps.shape[0],
            self.E_eps.shape[1],
            self.J_f.shape[0],
            self.J_sig.shape[0],
            self.E_eta.shape[0],
            self.E_eta.shape[1],
        )

    @property
    def m_eps(self):
        return self.E_eps.shape[0]

    @property
    def n_eps(self):
        return self.E_eps.shape[1]

    @property
    def n_f(self):
        return self.J_f.shape[0]

    @property
    def n_sig(self):
        return self.J_sig.shape[0]

    @property
    def m_eta(self):
        return self.E_eta.shape[0]

    @property
    def n_eta(self):
        return self.E_eta.shape[1]

    def blkdiag_E(self) -> np.ndarray:
        return scipy.linalg.block_diag(
            self.E_eps, np.eye(self.n_f), self.J_sig, self.E_eta
        )

    def blkdiag_A(self) -> np.ndarray:
        return scipy.linalg.block_diag(
            self.A_eps, self.J_f, np.eye(self.n_sig), self.A_eta
        )

    def nilpotency_index(self, tol: Tolerances = DEFAULT_TOL) -> int:
        """Smallest h with J_sig^h = 0 (h = 0 for an empty sigma block)."""
        ns = self.n_sig
        if ns == 0:
            return 0
        scale = max(1.0, np.linalg.norm(self.J_sig))
        Jn = self.J_sig / scale
        power = np.eye(ns)
        for h in range(ns + 1):
            if np.linalg.norm(power) <= tol.zero_atol:
                return h
            power = power @ Jn
        raise QkfError("sigma block is not nilpotent at tolerance")


def _coupled_sylvester(E11, A11, E22, A22, E12, A12, tol: Tolerances):
    """Solve E11 X - Y E22 = -E12 and A11 X - Y A22 = -A12.

    Returns (X, Y).  Solvability is guaranteed by the block structure of
    the quasi-Kronecker form; the residual is checked regardless.
    """
    a, b = E11.shape
    c, d = E22.shape
    if a * d == 0:
        return np.zeros((b, d)), np.zeros((a, c))
    # unknowns: vec(X) (b*d), vec(Y) (a*c); equations: 2 * a * d
    top = np.hstack([np.kron(np.eye(d), E11), -np.kron(E22.T, np.eye(a))])
    bot = np.hstack([np.kron(np.eye(d), A11), -np.kron(A22.T, np.eye(a))])
    lhs = np.vstack([top, bot])
    rhs = -np.concatenate([E12.flatten(order="F"), A12.flatten(order="F")])
    sol, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    res = np.linalg.norm(lhs @ sol - rhs)
    scale = max(1.0, np.linalg.norm(rhs))
    if res > 1e-8 * scale:
        raise QkfError(f"block decoupling failed: Sylvester residual {res:.2e}")
    X = sol[: b * d].reshape((b, d), order="F")
    Y = sol[b * d :].reshape((a, c), order="F")
    return X, Y


def _limit(start, step, n):
    """Iterate a monotone subspace map until the dimension stabilizes."""
    S = start
    for _ in range(n + 1):
        S_next = step(S)
        if S_next.shape[1] == S.shape[1]:
            return S
        S = S_next
    return S


def qkf(E, A, tol: Tolerances = DEFAULT_TOL) -> QkfDecomposition:
    """Quasi-Kronecker decomposition of the pencil lambda E - A.

    Raises QkfError when the assembled transformations cannot be
    certified nonsingular at tolerance.
    """
    E = as_matrix(E, dtype=float)
    A = as_matrix(A, dtype=float)
    if E.shape != A.shape:
        raise ValueError("qkf: E and A must share dimensions")
    m, n = E.shape

    # point-independent Wong limits:
    #   Vstar from the full space under x -> A^{-1}(E x)
    #   Wstar from {0} under x -> E^{-1}(A x)
    Vstar = _limit(np.eye(n), lambda S: preimage(A, image(E, S, tol), tol), n)
    Wstar = _limit(
        empty_subspace(n), lambda S: preimage(E, image(A, S, tol), tol), n
    )

    # column split: eps | f | sig | eta
    Q1 = intersection(Vstar, Wstar, tol)
    Q2 = complement_within(Q1, Vstar, tol)
    Q3 = complement_within(Q1, Wstar, tol)
    VplusW = orth_basis(np.hstack([Vstar, Wstar]), tol)
    Q4 = orthogonal_complement(VplusW, tol)

    # row split: the intersection of the E-image of Vstar with the
    # A-image of Wstar carries the underdetermined rows; completing it
    # within each image gives the finite and nilpotent rows, and the
    # remaining directions are the overdetermined rows
    EV = image(E, Vstar, tol)
    AW = image(A, Wstar, tol)
    T1 = intersection(EV, AW, tol)
    T2 = complement_within(T1, EV, tol)
    T3 = complement_within(T1, AW, tol)
    T123 = orth_basis(np.hstack([T1, T2, T3]), tol)
    T4 = orthogonal_complement(T123, tol)

    Qmat = np.hstack([Q1, Q2, Q3, Q4])
    Pinv = np.hstack([T1, T2, T3, T4])
    if Qmat.shape != (n, n) or Pinv.shape != (m, m):
        raise QkfError(
            f"subspace split inconsistent: Q is {Qmat.shape}, P^-1 is {Pinv.shape}"
        )
    cond_Q = np.linalg.cond(Qmat) if n else 1.0
    cond_P = np.linalg.cond(Pinv) if m else 1.0
    limit = 1.0 / (100 * tol.rank_rtol)
    if cond_Q > limit or cond_P > limit:
        raise QkfError(
            f"transformation ill-conditioned: cond(Q)={cond_Q:.2e}, cond(P)={cond_P:.2e}"
        )
    P = np.linalg.inv(Pinv) if m else Pinv

    Et = P @ E @ Qmat
    At = P @ A @ Qmat

    n_eps, n_f, n_sig, n_eta = (S.shape[1] for S in (Q1, Q2, Q3, Q4))
    m_eps, m_f, m_sig, m_eta = (S.shape[1] for S in (T1, T2, T3, T4))
    if m_f != n_f or m_sig != n_sig:
        raise QkfError(
            f"regular part not square: f {m_f}x{n_f}, sigma {m_sig}x{n_sig}"
        )

    rows = np.cumsum([0, m_eps, n_f, n_sig, m_eta])
    cols = np.cumsum([0, n_eps, n_f, n_sig, n_eta])

    def blk(M, i, j):
        return M[rows[i] : rows[i + 1], cols[j] : cols[j + 1]]

    # stage 1: decouple eps from (f, sig, eta)
    X, Y = _coupled_sylvester(
        blk(Et, 0, 0),
        blk(At, 0, 0),
        Et[rows[1] :, cols[1] :],
        At[rows[1] :, cols[1] :],
        Et[rows[0] : rows[1], cols[1] :],
        At[rows[0] : rows[1], cols[1] :],
        tol,
    )
    Tq = np.eye(n)
    Tq[: cols[1], cols[1] :] = X
    Tp = np.eye(m)
    Tp[: rows[1], rows[1] :] = -Y
    P, Qmat = Tp @ P, Qmat @ Tq
    Et, At = Tp @ Et @ Tq, Tp @ At @ Tq

    # stage 2: decouple (f, sig) from eta
    X, Y = _coupled_sylvester(
        Et[rows[1] : rows[3], cols[1] : cols[3]],
        At[rows[1] : rows[3], cols[1] : cols[3]],
        blk(Et, 3, 3),
        blk(At, 3, 3),
        Et[rows[1] : rows[3], cols[3] :],
        At[rows[1] : rows[3], cols[3] :],
        tol,
    )
    Tq = np.eye(n)
    Tq[cols[1] : cols[3], cols[3] :] = X
    Tp = np.eye(m)
    Tp[rows[1] : rows[3], rows[3] :] = -Y
    P, Qmat = Tp @ P, Qmat @ Tq
    Et, At = Tp @ Et @ Tq, Tp @ At @ Tq

    # normalize the regular part: E-side of f to identity, A-side of sigma
    # to identity
    Ef = blk(Et, 1, 1)
    if n_f:
        if numerical_rank(Ef, tol) < n_f:
            raise QkfError("finite block has singular E-side")
        Sf = np.linalg.inv(Ef)
        P[rows[1] : rows[2]] = Sf @ P[rows[1] : rows[2]]
        At[rows[1] : rows[2]] = Sf @ At[rows[1] : rows[2]]
        Et[rows[1] : rows[2]] = Sf @ Et[rows[1] : rows[2]]
    Asig = blk(At, 2, 2)
    if n_sig:
        if numerical_rank(Asig, tol) < n_sig:
            raise QkfError("sigma block has singular A-side")
        Ss = np.linalg.inv(Asig)
        P[rows[2] : rows[3]] = Ss @ P[rows[2] : rows[3]]
        At[rows[2] : rows[3]] = Ss @ At[rows[2] : rows[3]]
        Et[rows[2] : rows[3]] = Ss @ Et[rows[2] : rows[3]]

    dec = QkfDecomposition(
        P=P,
        Q=Qmat,
        E_eps=blk(Et, 0, 0),
        A_eps=blk(At, 0, 0),
        J_f=blk(At, 1, 1),
        J_sig=blk(Et, 2, 2),
        E_eta=blk(Et, 3, 3),
        A_eta=blk(At, 3, 3),
        cond_P=np.linalg.cond(P) if m else 1.0,
        cond_Q=cond_Q,
    )
    _validate(dec, E, A, tol)
    return dec


def _validate(dec: QkfDecomposition, E, A, tol: Tolerances):
    scale = max(1.0, np.linalg.norm(E), np.linalg.norm(A))
    atol = 1e-8 * scale
    res_E = np.linalg.norm(dec.P @ E @ dec.Q - dec.blkdiag_E())
    res_A = np.linalg.norm(dec.P @ A @ dec.Q - dec.blkdiag_A())
    if res_E > atol or res_A > atol:
        raise QkfError(
            f"block-diagonal residual too large: E {res_E:.2e}, A {res_A:.2e}"
        )
    m_eps, n_eps, n_f, n_sig, m_eta, n_eta = dec.sizes
    if n_eps > 0 and m_eps >= n_eps:
        raise QkfError("epsilon block is not underdetermined")
    if m_eta > 0 and m_eta <= n_eta:
        raise QkfError("eta block is not overdetermined")
    if numerical_rank(dec.E_eps, tol) != m_eps:
        raise QkfError("E_eps does not have full row rank")
    if numerical_rank(dec.E_eta, tol) != n_eta:
        raise QkfError("E_eta does not have full column rank")
    dec.nilpotency_index(tol)  # raises if J_sig is not nilpotent


def finite_spectrum(dec: QkfDecomposition) -> np.ndarray:
    """Eigenvalues of the finite block, with multiplicity."""
    if dec.n_f == 0:
        return np.zeros(0, dtype=complex)
    return np.linalg.eigvals(dec.J_f)


@dataclass(frozen=True)
class EtaCompression:
    """Row compression U2 of an overdetermined block: U2 E_eta = [I; 0]."""

    U2: np.ndarray
    A_eta1: np.ndarray
    A_eta2: np.ndarray


def eta_compress(E_eta, A_eta, tol: Tolerances = DEFAULT_TOL) -> EtaCompression:
    """Compress lambda E_eta - A_eta to [lambda I - A_eta1; -A_eta2].

    Requires E_eta of full column rank (guaranteed for a valid eta block).
    """
    E_eta = as_matrix(E_eta, dtype=float)
    A_eta = as_matrix(A_eta, dtype=float)
    m_eta, n_eta = E_eta.shape
    if A_eta.shape != (m_eta, n_eta):
        raise ValueError("eta_compress: E_eta and A_eta must share dimensions")
    if numerical_rank(E_eta, tol) != n_eta:
        raise ValueError("eta_compress: E_eta must have full column rank")
    if n_eta == 0:
        U2 = np.eye(m_eta)
        return EtaCompression(U2, np.zeros((0, 0)), np.zeros((m_eta, 0)))
    Qr, R = np.linalg.qr(E_eta, mode="complete")
    R1 = R[:n_eta, :]
    U2 = scipy.linalg.block_diag(np.linalg.inv(R1), np.eye(m_eta - n_eta)) @ Qr.T
    UA = U2 @ A_eta
    return EtaCompression(U2, UA[:n_eta], UA[n_eta:])
