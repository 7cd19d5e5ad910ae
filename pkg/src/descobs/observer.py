"""Generalized functional observer synthesis.

Pipeline: transform the stacked pencil to quasi-Kronecker coordinates,
split the finite block by half-plane, compress the overdetermined block,
choose a stabilizing gain for its ODE part, and assemble the observer

    w'(t)   = N w(t) + H (u; y)(t)
    zhat(t) = R w(t) - sum_i M_i (u; y)^(i)(t)

where M_i = K_sig J_sig^i B_sig are the feed-through coefficients of the
nilpotent block.  The observer is exact-matching (identical functional
output for matching initialization) iff rank R equals the rank of the
observability stack of (R, N); otherwise it is an asymptotic estimator
only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.signal import place_poles

from .detect import is_partially_detectable_qkf
from .linalg import DEFAULT_TOL, Tolerances, as_matrix, numerical_rank, ordered_spectral_split
from .pencil import eta_compress, qkf
from .system import DescriptorSystem


class NotPartiallyDetectable(RuntimeError):
    """Synthesis was requested for a system with no functional observer."""


class GainError(RuntimeError):
    """Pole placement failed or did not stabilize at tolerance."""


@dataclass(frozen=True)
class ReducedSystem:
    """Blocks of the reduced system in observer coordinates.

    J_sig x_sig' = x_sig + B_sig ubar          (nilpotent block)
    (x_f2; x_eta)' = blkdiag(J_f2, A_eta1) (x_f2; x_eta)
                     + (B_f2; B_eta1) ubar     (ODE block)
    0 = A_eta2 x_eta + B_eta2 ubar             (algebraic residual)
    z = K_sig x_sig + [K_f2, K_eta] (x_f2; x_eta)
    """

    J_sig: np.ndarray
    B_sig: np.ndarray
    J_f2: np.ndarray
    A_eta1: np.ndarray
    B_f2: np.ndarray
    B_eta1: np.ndarray
    A_eta2: np.ndarray
    B_eta2: np.ndarray
    K_sig: np.ndarray
    K_f2: np.ndarray
    K_eta: np.ndarray
    h: int
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def n_f2(self):
        return self.J_f2.shape[0]

    @property
    def n_eta(self):
        return self.A_eta1.shape[0]

    @property
    def n_sig(self):
        return self.J_sig.shape[0]

    @property
    def order(self):
        """Observer order l = n_f2 + n_eta."""
        return self.n_f2 + self.n_eta

    @property
    def input_width(self):
        return self.B_sig.shape[1] if self.n_sig else self.B_f2.shape[1]

    def ode_matrices(self):
        """State and input matrix of the true (x_f2; x_eta) dynamics."""
        A = scipy.linalg.block_diag(self.J_f2, self.A_eta1)
        Bm = np.vstack([self.B_f2, self.B_eta1])
        return A, Bm


@dataclass(frozen=True)
class ObserverRealization:
    """Matrices of the generalized functional observer.

    The output map is zhat = R w - sum_i M[i] ubar^(i); the stored M[i]
    equals K_sig J_sig^i B_sig.
    """

    N: np.ndarray
    H: np.ndarray
    R: np.ndarray
    M: tuple
    L: np.ndarray
    h: int
    stable: bool
    exact: bool

    @property
    def order(self):
        return self.N.shape[0]

    def to_dict(self) -> dict:
        return {
            "N": self.N.tolist(),
            "H": self.H.tolist(),
            "R": self.R.tolist(),
            "M": [Mi.tolist() for Mi in self.M],
            "L": self.L.tolist(),
            "l": self.order,
            "h": self.h,
            "shapes": {
                "H": list(self.H.shape),
                "R": list(self.R.shape),
                "L": list(self.L.shape),
                "M": list(self.M[0].shape) if self.M else None,
            },
            "stable": self.stable,
            "exact": self.exact,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ObserverRealization":
        shapes = data["shapes"]
        l = data["l"]
        return cls(
            N=np.array(data["N"], dtype=float).reshape(l, l),
            H=np.array(data["H"], dtype=float).reshape(shapes["H"]),
            R=np.array(data["R"], dtype=float).reshape(shapes["R"]),
            M=tuple(
                np.array(Mi, dtype=float).reshape(shapes["M"]) for Mi in data["M"]
            ),
            L=np.array(data["L"], dtype=float).reshape(shapes["L"]),
            h=data["h"],
            stable=data["stable"],
            exact=data["exact"],
        )


@dataclass(frozen=True)
class SynthesisReport:
    partially_detectable: bool
    sigma1: bool
    sigma3: bool
    condition8: tuple  # (rank R, rank O(R, N))
    gain_strategy: str
    condition_numbers: dict

    def to_dict(self) -> dict:
        return {
            "partially_detectable": self.partially_detectable,
            "sigma1": self.sigma1,
            "sigma3": self.sigma3,
            "rank_R": self.condition8[0],
            "rank_O": self.condition8[1],
            "gain_strategy": self.gain_strategy,
            "condition_numbers": self.condition_numbers,
        }


@dataclass(frozen=True)
class SynthConfig:
    poles: tuple | None = None
    gain_strategy: str = "zero-first"  # "zero-first" | "place"

    def __post_init__(self):
        if self.gain_strategy not in ("zero-first", "place"):
            raise ValueError(f"unknown gain strategy {self.gain_strategy!r}")


def reduce(sys: DescriptorSystem, tol: Tolerances = DEFAULT_TOL) -> ReducedSystem:
    """Transform a partially detectable system to reduced coordinates.

    Raises NotPartiallyDetectable when the K blocks over the
    underdetermined or unstable finite part do not vanish.
    """
    Ecal, Acal = sys.stacked()
    dec = qkf(Ecal, Acal, tol)
    U1, J_f1, J_f2, n_f1, n_f2 = ordered_spectral_split(dec.J_f, tol)
    comp = eta_compress(dec.E_eta, dec.A_eta, tol)

    P = (
        scipy.linalg.block_diag(
            np.eye(dec.m_eps), np.linalg.inv(U1) if dec.n_f else U1, np.eye(dec.n_sig), comp.U2
        )
        @ dec.P
    )
    Q = dec.Q @ scipy.linalg.block_diag(
        np.eye(dec.n_eps), U1, np.eye(dec.n_sig), np.eye(dec.n_eta)
    )

    KQ = sys.K @ Q
    csplit = np.cumsum([dec.n_eps, n_f1, n_f2, dec.n_sig, dec.n_eta])
    K_eps = KQ[:, : csplit[0]]
    K_f1 = KQ[:, csplit[0] : csplit[1]]
    K_f2 = KQ[:, csplit[1] : csplit[2]]
    K_sig = KQ[:, csplit[2] : csplit[3]]
    K_eta = KQ[:, csplit[3] : csplit[4]]

    Knorm = max(1.0, np.linalg.norm(sys.K))
    norm_eps = np.linalg.norm(K_eps) if K_eps.size else 0.0
    norm_f1 = np.linalg.norm(K_f1) if K_f1.size else 0.0
    if norm_eps > tol.zero_atol * Knorm or norm_f1 > tol.zero_atol * Knorm:
        raise NotPartiallyDetectable(
            f"K over the undetectable blocks is nonzero: "
            f"|K_eps| = {norm_eps:.2e}, |K_f1| = {norm_f1:.2e}"
        )

    PB = P @ sys.input_matrix()
    rsplit = np.cumsum([dec.m_eps, n_f1, n_f2, dec.n_sig, dec.n_eta])
    B_eps = PB[: rsplit[0]]
    B_f1 = PB[rsplit[0] : rsplit[1]]
    B_f2 = PB[rsplit[1] : rsplit[2]]
    B_sig = PB[rsplit[2] : rsplit[3]]
    B_eta1 = PB[rsplit[3] : rsplit[4]]
    B_eta2 = PB[rsplit[4] :]

    return ReducedSystem(
        J_sig=dec.J_sig,
        B_sig=B_sig,
        J_f2=J_f2,
        A_eta1=comp.A_eta1,
        B_f2=B_f2,
        B_eta1=B_eta1,
        A_eta2=comp.A_eta2,
        B_eta2=B_eta2,
        K_sig=K_sig,
        K_f2=K_f2,
        K_eta=K_eta,
        h=dec.nilpotency_index(tol),
        diagnostics={
            "sizes": dec.sizes,
            "n_f1": n_f1,
            "J_f1": J_f1,
            "B_f1": B_f1,
            "B_eps": B_eps,
            "K_eps": K_eps,
            "K_f1": K_f1,
            "E_eps": dec.E_eps,
            "A_eps": dec.A_eps,
            "cond_P": dec.cond_P,
            "cond_Q": dec.cond_Q,
            "cond_U1": float(np.linalg.cond(U1)) if dec.n_f else 1.0,
            "cond_U2": float(np.linalg.cond(comp.U2)) if dec.m_eta else 1.0,
        },
    )


def stabilizing_gain(A_eta1, A_eta2, poles, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Gain L with the spectrum of A_eta1 - L A_eta2 at the given poles.

    Placement runs on the transposed pair; the achieved spectrum is
    re-verified and never trusted from the placement routine.
    """
    A1 = as_matrix(A_eta1, dtype=float)
    A2 = as_matrix(A_eta2, dtype=float)
    n_eta = A1.shape[0]
    if n_eta == 0:
        return np.zeros((0, A2.shape[0]))
    poles = np.atleast_1d(np.asarray(poles, dtype=complex))
    if poles.size != n_eta:
        raise ValueError(f"need {n_eta} poles, got {poles.size}")
    if np.any(poles.real >= 0):
        raise ValueError("requested poles must lie in the open left half-plane")
    try:
        placed = place_poles(A1.T, A2.T, poles)
        L = placed.gain_matrix.T
    except ValueError as exc:
        raise GainError(f"pole placement failed: {exc}") from exc
    achieved = np.sort_complex(np.linalg.eigvals(A1 - L @ A2))
    wanted = np.sort_complex(poles)
    if np.max(np.abs(achieved - wanted)) > 1e-6 * max(1.0, np.max(np.abs(wanted))):
        raise GainError(
            f"placement inaccurate: wanted {wanted}, achieved {achieved}"
        )
    return L


def assemble(red: ReducedSystem, L) -> ObserverRealization:
    """Build the observer matrices from the reduced system and a gain."""
    L = as_matrix(L, dtype=float)
    if L.shape != (red.n_eta, red.A_eta2.shape[0]):
        raise ValueError(
            f"gain must be {red.n_eta}x{red.A_eta2.shape[0]}, got {L.shape}"
        )
    N = scipy.linalg.block_diag(red.J_f2, red.A_eta1 - L @ red.A_eta2)
    H = np.vstack([red.B_f2, red.B_eta1 - L @ red.B_eta2])
    R = np.hstack([red.K_f2, red.K_eta])
    M = []
    power = np.eye(red.n_sig)
    for _ in range(red.h):
        M.append(red.K_sig @ power @ red.B_sig)
        power = power @ red.J_sig
    eigs = np.linalg.eigvals(N) if N.size else np.zeros(0)
    stable = bool(np.all(eigs.real < 0)) if N.shape[0] else True
    exact, _, _ = check_condition8(R, N)
    return ObserverRealization(
        N=N, H=H, R=R, M=tuple(M), L=L, h=red.h, stable=stable, exact=exact
    )


def functional_observability_matrix(R, N) -> np.ndarray:
    """Vertical stack [R; RN; ...; R N^(l-1)] for N of size l."""
    R, N = as_matrix(R), as_matrix(N)
    l = N.shape[0]
    if N.shape != (l, l) or R.shape[1] != l:
        raise ValueError("functional_observability_matrix: shape mismatch")
    if l == 0:
        return R
    blocks = [R]
    for _ in range(l - 1):
        blocks.append(blocks[-1] @ N)
    return np.vstack(blocks)


def check_condition8(R, N, tol: Tolerances = DEFAULT_TOL):
    """Exactness condition: rank R equals rank of the (R, N) stack."""
    O = functional_observability_matrix(R, N)
    rR = numerical_rank(R, tol)
    rO = numerical_rank(O, tol)
    return rR == rO, rR, rO


def synthesize(
    sys: DescriptorSystem,
    cfg: SynthConfig | None = None,
    tol: Tolerances = DEFAULT_TOL,
):
    """Full pipeline: detect, reduce, gain, assemble, exactness check.

    Returns (ObserverRealization, SynthesisReport).  Raises
    NotPartiallyDetectable for systems outside Sigma_1.
    """
    cfg = cfg or SynthConfig()
    cert = is_partially_detectable_qkf(sys, tol)
    if not cert.verdict:
        norms = ", ".join(f"{float(v):.3e}" for v in cert.probes[0])
        raise NotPartiallyDetectable(
            "system is not partially detectable "
            f"(residual norms over the unobservable blocks: {norms})"
        )
    red = reduce(sys, tol)

    eigs_eta = (
        np.linalg.eigvals(red.A_eta1) if red.n_eta else np.zeros(0)
    )
    if red.n_eta == 0:
        L = np.zeros((0, red.A_eta2.shape[0]))
        strategy = "empty"
    elif cfg.gain_strategy == "zero-first" and np.all(
        eigs_eta.real < -tol.stab_margin
    ):
        L = np.zeros((red.n_eta, red.A_eta2.shape[0]))
        strategy = "zero"
    else:
        poles = cfg.poles
        if poles is None:
            poles = [-(i + 1.0) for i in range(red.n_eta)]
        L = stabilizing_gain(red.A_eta1, red.A_eta2, poles, tol)
        strategy = "place"

    obs = assemble(red, L)
    # never trust the placement routine: re-check the eta part post hoc
    part = obs.N[red.n_f2 :, red.n_f2 :]
    if part.shape[0] and np.any(np.linalg.eigvals(part).real >= 0):
        raise GainError("eta block of N is not stable after gain selection")

    ok8, rR, rO = check_condition8(obs.R, obs.N, tol)
    report = SynthesisReport(
        partially_detectable=True,
        sigma1=True,
        sigma3=obs.stable and ok8,
        condition8=(rR, rO),
        gain_strategy=strategy,
        condition_numbers={
            k: red.diagnostics[k] for k in ("cond_P", "cond_Q", "cond_U1", "cond_U2")
        },
    )
    return obs, report
