"""Partial detectability decision procedures.

Three equivalent tests for partial detectability of a descriptor system
(rank test on the block-bidiagonal tower, Wong-sequence containment in
ker K, and the quasi-Kronecker block criterion), plus the special cases
for behavioral detectability, state-space partial detectability, and the
legacy state-space criterion that is incorrect for defective closed
right-half-plane eigenvalues.

All tests probe a finite set of points: the finite eigenvalues of the
stacked pencil with nonnegative real part, plus one non-eigenvalue point
to capture the kernel contribution of the underdetermined block, which
is present at every lambda.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    DEFAULT_TOL,
    Tolerances,
    as_matrix,
    numerical_rank,
    ordered_spectral_split,
    rank_gap,
)
from .pencil import finite_spectrum, qkf, wong_sequence
from .system import DescriptorSystem

# rank decisions whose singular values fall within this factor of the
# cutoff are reported as borderline rather than silently trusted
BORDERLINE_FACTOR = 50.0


@dataclass(frozen=True)
class DetectabilityCertificate:
    """Outcome of one detectability test with reproducible probe data."""

    verdict: bool
    method: str  # "rank" | "wong" | "qkf"
    probes: tuple
    block_length_used: int
    borderline: bool = field(default=False, compare=False)

    def to_dict(self) -> dict:
        def enc(v):
            if isinstance(v, complex):
                return [v.real, v.imag]
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            return v

        return {
            "verdict": self.verdict,
            "method": self.method,
            "probes": [[enc(v) for v in p] for p in self.probes],
            "block_length_used": self.block_length_used,
            "borderline": self.borderline,
        }


def build_G(l: int, Ecal, Acal, lam: complex, with_K=None) -> np.ndarray:
    """Block lower-bidiagonal tower with l block columns.

    (lam Ecal - Acal) on the diagonal, Ecal on the subdiagonal; when
    with_K is given, an extra bottom block row [0 ... 0 K] is appended.
    """
    if l < 1:
        raise ValueError("build_G: l must be >= 1")
    Ecal = as_matrix(Ecal, dtype=complex)
    Acal = as_matrix(Acal, dtype=complex)
    mp, n = Ecal.shape
    diag = lam * Ecal - Acal
    r = 0 if with_K is None else as_matrix(with_K).shape[0]
    G = np.zeros((l * mp + r, l * n), dtype=complex)
    for j in range(l):
        G[j * mp : (j + 1) * mp, j * n : (j + 1) * n] = diag
        if j + 1 < l:
            G[(j + 1) * mp : (j + 2) * mp, j * n : (j + 1) * n] = Ecal
    if with_K is not None:
        G[l * mp :, (l - 1) * n :] = as_matrix(with_K)
    return G


@dataclass(frozen=True)
class ProbePoint:
    """A probe location together with the spread of the eigenvalue cluster
    it was derived from.

    A computed eigenvalue of a defective block is only accurate to roughly
    the cluster spread, so the spread both anchors rank decisions made at
    the probe and marks the probe as borderline when it is large.
    """

    lam: complex
    spread: float = 0.0

    @property
    def defective(self) -> bool:
        """True when the cluster spread is large enough that the mean
        itself may be unreliable (very defective block, or a false merge
        of distinct eigenvalues)."""
        return self.spread > 1e-6 * max(1.0, abs(self.lam))


def _cluster(values, atol: float = 1e-7) -> list:
    """Group numerically coincident eigenvalues; probe each group at its
    mean.

    A defective eigenvalue of multiplicity h is computed with error of
    order eps**(1/h) but the perturbations sum to zero (the trace over
    the cluster is preserved), so the cluster mean recovers the true
    eigenvalue to near machine precision.  Single-link merging with an
    O(k^2) scan; eigenvalue sets here are tiny.
    """
    vals = [complex(v) for v in values]
    k = len(vals)
    parent = list(range(k))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(k):
        for j in range(i + 1, k):
            if abs(vals[i] - vals[j]) <= atol:
                parent[find(i)] = find(j)
    groups = {}
    for i in range(k):
        groups.setdefault(find(i), []).append(vals[i])
    out = []
    for members in groups.values():
        mean = sum(members) / len(members)
        spread = max(abs(v - mean) for v in members)
        out.append(ProbePoint(mean, spread))
    out.sort(key=lambda p: (p.lam.real, p.lam.imag))
    return out


def probe_points(sys: DescriptorSystem, tol: Tolerances = DEFAULT_TOL) -> list:
    """Probe set: C+bar finite eigenvalues of the stacked pencil plus one
    non-eigenvalue point.

    Eigenvalues are clustered before the half-plane filter so that a
    defective eigenvalue on the imaginary axis whose computed copies
    straddle the axis is kept as a single probe at the cluster mean.
    """
    Ecal, Acal = sys.stacked()
    dec = qkf(Ecal, Acal, tol)
    eigs = list(finite_spectrum(dec))
    radius = max((abs(z) for z in eigs), default=0.0)
    # a defective eigenvalue of multiplicity h is computed with error of
    # order eps**(1/h); this radius merges such splits up to h = 4 while a
    # false merge of genuinely distinct eigenvalues is caught by the
    # cluster-spread borderline flag
    atol = max(1e-7, 1e-3 * max(1.0, radius))
    probes = [
        p for p in _cluster(eigs, atol) if p.lam.real >= -tol.stab_margin
    ]
    probes.append(ProbePoint(complex(1.0 + radius)))
    return probes


def is_partially_detectable_rank(
    sys: DescriptorSystem, tol: Tolerances = DEFAULT_TOL
) -> DetectabilityCertificate:
    """Rank test: rank G_l equals rank of G_l extended by K at every probe.

    The block length l is the Wong termination index at the probe,
    capped at n.
    """
    Ecal, Acal = sys.stacked()
    probes = []
    verdict = True
    borderline = False
    l_used = 0
    for probe in probe_points(sys, tol):
        lam = probe.lam
        s = wong_sequence(Ecal, Acal, lam, tol).termination_index
        l = max(1, min(s, sys.n))
        l_used = max(l_used, l)
        G = build_G(l, Ecal, Acal, lam)
        GK = build_G(l, Ecal, Acal, lam, with_K=sys.K)
        r0, r1 = numerical_rank(G, tol), numerical_rank(GK, tol)
        gap = min(rank_gap(G, tol), rank_gap(GK, tol))
        borderline = borderline or gap < BORDERLINE_FACTOR or probe.defective
        probes.append((lam, r0, r1))
        if r0 != r1:
            verdict = False
    return DetectabilityCertificate(verdict, "rank", tuple(probes), l_used, borderline)


def is_partially_detectable_wong(
    sys: DescriptorSystem, tol: Tolerances = DEFAULT_TOL
) -> DetectabilityCertificate:
    """Wong test: the terminal Wong space at every probe lies in ker K."""
    Ecal, Acal = sys.stacked()
    Knorm = max(1.0, np.linalg.norm(sys.K))
    probes = []
    verdict = True
    borderline = False
    s_used = 0
    pencil_scale = np.linalg.norm(Acal) + np.linalg.norm(Ecal)
    for probe in probe_points(sys, tol):
        lam = probe.lam
        # rank decisions at the probe cannot resolve structure smaller
        # than the probe's own uncertainty
        floor = max(
            10.0 * probe.spread,
            100.0 * np.finfo(float).eps * (1.0 + abs(lam)) * pencil_scale,
        )
        ws = wong_sequence(Ecal, Acal, lam, tol, sigma_floor=floor)
        s_used = max(s_used, ws.termination_index)
        borderline = borderline or probe.defective
        defect = (
            np.linalg.norm(sys.K @ ws.terminal) if ws.terminal.shape[1] else 0.0
        )
        contained = bool(defect <= tol.zero_atol * Knorm)
        if not contained:
            ratio = defect / (tol.zero_atol * Knorm)
            borderline = borderline or ratio < BORDERLINE_FACTOR
        elif defect > 0:
            ratio = tol.zero_atol * Knorm / max(defect, 1e-300)
            borderline = borderline or ratio < BORDERLINE_FACTOR
        probes.append((lam, ws.terminal.shape[1], contained))
        if not contained:
            verdict = False
    return DetectabilityCertificate(verdict, "wong", tuple(probes), s_used, borderline)


def is_partially_detectable_qkf(
    sys: DescriptorSystem, tol: Tolerances = DEFAULT_TOL
) -> DetectabilityCertificate:
    """QKF test: the K blocks over the underdetermined part and the
    nonnegative-real-part finite part must vanish."""
    Ecal, Acal = sys.stacked()
    dec = qkf(Ecal, Acal, tol)
    U1, _, _, n_f1, _ = ordered_spectral_split(dec.J_f, tol)
    KQ = sys.K @ dec.Q
    splits = np.cumsum([dec.n_eps, dec.n_f, dec.n_sig])
    K_eps = KQ[:, : splits[0]]
    K_f = KQ[:, splits[0] : splits[1]] @ U1
    K_f1 = K_f[:, :n_f1]
    Knorm = max(1.0, np.linalg.norm(sys.K))
    norm_eps = np.linalg.norm(K_eps) if K_eps.size else 0.0
    norm_f1 = np.linalg.norm(K_f1) if K_f1.size else 0.0
    threshold = tol.zero_atol * Knorm
    verdict = bool(norm_eps <= threshold and norm_f1 <= threshold)
    worst = max(norm_eps, norm_f1)
    borderline = bool(
        threshold / BORDERLINE_FACTOR < worst < threshold * BORDERLINE_FACTOR
    )
    probes = ((norm_eps, norm_f1),)
    return DetectabilityCertificate(verdict, "qkf", probes, sys.n, borderline)


def is_behaviorally_detectable(
    sys: DescriptorSystem, tol: Tolerances = DEFAULT_TOL
) -> bool:
    """Standard behavioral detectability: [lam E - A; C] has full column
    rank at every probe point in the closed right half-plane."""
    Ecal, Acal = sys.stacked()
    for probe in probe_points(sys, tol):
        if numerical_rank(probe.lam * Ecal - Acal, tol) < sys.n:
            return False
    return True


def _ss_probes(A: np.ndarray, tol: Tolerances) -> list:
    eigs = np.linalg.eigvals(A)
    radius = max((abs(z) for z in eigs), default=0.0)
    atol = max(1e-7, 1e-3 * max(1.0, radius))
    return [
        p.lam
        for p in _cluster(eigs, atol)
        if p.lam.real >= -tol.stab_margin
    ]


def ss_partial_detectability(A, C, K, tol: Tolerances = DEFAULT_TOL) -> bool:
    """Corrected state-space partial detectability test (E = I case).

    Compares the rank of the tower
    [(lam I - A)^n; C (lam I - A)^(n-1); ...; C; K] with and without the
    K row, at every closed-right-half-plane eigenvalue of A.
    """
    A, C, K = as_matrix(A), as_matrix(C), as_matrix(K)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("ss_partial_detectability: A must be square")
    for lam in _ss_probes(A, tol):
        M = lam * np.eye(n) - A
        rows = [np.linalg.matrix_power(M, n)]
        for i in range(n - 1, -1, -1):
            rows.append(C @ np.linalg.matrix_power(M, i))
        tower = np.vstack(rows)
        with_K = np.vstack([tower, K])
        if numerical_rank(with_K, tol) != numerical_rank(tower, tol):
            return False
    return True


def legacy_functional_detectability(A, C, K, tol: Tolerances = DEFAULT_TOL) -> bool:
    """Legacy one-block test rank [lam I - A; C; K] = rank [lam I - A; C].

    Kept for comparison only: it is wrong whenever A has a defective
    eigenvalue in the closed right half-plane, see the corrected tower
    test above.
    """
    A, C, K = as_matrix(A), as_matrix(C), as_matrix(K)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("legacy_functional_detectability: A must be square")
    for lam in _ss_probes(A, tol):
        M = lam * np.eye(n) - A
        base = np.vstack([M, C])
        if numerical_rank(np.vstack([base, K]), tol) != numerical_rank(base, tol):
            return False
    return True


def check_all(sys: DescriptorSystem, tol: Tolerances = DEFAULT_TOL) -> dict:
    """Run the three equivalent tests and report any disagreement."""
    certs = {
        "rank": is_partially_detectable_rank(sys, tol),
        "wong": is_partially_detectable_wong(sys, tol),
        "qkf": is_partially_detectable_qkf(sys, tol),
    }
    verdicts = {c.verdict for c in certs.values()}
    return {
        "certificates": certs,
        "agree": len(verdicts) == 1,
        "verdict": certs["rank"].verdict,
        "borderline": any(c.borderline for c in certs.values()),
    }
