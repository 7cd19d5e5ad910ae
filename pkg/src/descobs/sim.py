"""Closed-form-aware simulation of reduced systems and observers.

The nilpotent block is never integrated numerically (it is an
index > 1 differential-algebraic chain); its unique solution

    x_sig(t) = - sum_{i=0}^{h-1} J_sig^i B_sig ubar^(i)(t)

is evaluated in closed form instead.  The ODE blocks and the observer
run under a fixed-step classical Runge-Kutta scheme, which keeps the
whole simulation deterministic for a fixed grid.

Input signals are built from primitives (constant, polynomial, sin,
cos, exponential) that are closed under differentiation, so the exact
derivatives required by the observer feed-through are always available.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .linalg import as_matrix
from .observer import ObserverRealization, ReducedSystem


class SmoothnessError(ValueError):
    """Signal cannot supply the derivative order the observer needs."""


# --- signal primitives -------------------------------------------------


class ConstantChannel:
    def __init__(self, value: float):
        self.value = float(value)

    def eval(self, t: float, order: int = 0) -> float:
        return self.value if order == 0 else 0.0


class PolynomialChannel:
    """c0 + c1 t + c2 t^2 + ..."""

    def __init__(self, coeffs):
        self.coeffs = [float(c) for c in coeffs]

    def eval(self, t: float, order: int = 0) -> float:
        c = self.coeffs
        for _ in range(order):
            c = [i * c[i] for i in range(1, len(c))]
        return sum(ci * t**i for i, ci in enumerate(c))


class SinusoidChannel:
    """amp * sin(freq t + phase); use phase = pi/2 for a cosine."""

    def __init__(self, amp: float = 1.0, freq: float = 1.0, phase: float = 0.0):
        self.amp, self.freq, self.phase = float(amp), float(freq), float(phase)

    def eval(self, t: float, order: int = 0) -> float:
        return (
            self.amp
            * self.freq**order
            * math.sin(self.freq * t + self.phase + order * math.pi / 2)
        )


class ExponentialChannel:
    """amp * exp(rate t)."""

    def __init__(self, amp: float = 1.0, rate: float = 1.0):
        self.amp, self.rate = float(amp), float(rate)

    def eval(self, t: float, order: int = 0) -> float:
        return self.amp * self.rate**order * math.exp(self.rate * t)


class Signal:
    """Vector-valued signal with exact derivatives of every order.

    An explicit max_order caps the derivative order (used to model
    signals of limited smoothness); the primitives themselves
    differentiate indefinitely.
    """

    def __init__(self, channels, max_order=None):
        self.channel_list = list(channels)
        self.max_order = math.inf if max_order is None else int(max_order)

    @property
    def channels(self) -> int:
        return len(self.channel_list)

    def eval(self, t: float, order: int = 0) -> np.ndarray:
        if order > self.max_order:
            raise SmoothnessError(
                f"signal provides derivatives up to order {self.max_order}, "
                f"order {order} requested"
            )
        return np.array([ch.eval(t, order) for ch in self.channel_list])

    def sample(self, grid, order: int = 0) -> np.ndarray:
        return np.stack([self.eval(t, order) for t in grid])

    @classmethod
    def from_specs(cls, specs, max_order=None) -> "Signal":
        """Build from a list of per-channel dicts (the signal file format)."""
        channels = []
        for spec in specs:
            kind = spec.get("type")
            if kind == "constant":
                channels.append(ConstantChannel(spec.get("value", 0.0)))
            elif kind == "polynomial":
                channels.append(PolynomialChannel(spec.get("coeffs", [0.0])))
            elif kind == "sin":
                channels.append(
                    SinusoidChannel(
                        spec.get("amp", 1.0), spec.get("freq", 1.0), spec.get("phase", 0.0)
                    )
                )
            elif kind == "cos":
                channels.append(
                    SinusoidChannel(
                        spec.get("amp", 1.0),
                        spec.get("freq", 1.0),
                        spec.get("phase", 0.0) + math.pi / 2,
                    )
                )
            elif kind == "exp":
                channels.append(
                    ExponentialChannel(spec.get("amp", 1.0), spec.get("rate", 1.0))
                )
            else:
                raise ValueError(f"unknown signal primitive {kind!r}")
        return cls(channels, max_order=max_order)


def sincos_signal() -> Signal:
    """The (sin t, cos t) drive used in the worked example."""
    return Signal([SinusoidChannel(), SinusoidChannel(phase=math.pi / 2)])


# --- simulation -------------------------------------------------------


@dataclass(frozen=True)
class SimConfig:
    t0: float = 0.0
    horizon: float = 10.0
    dt: float = 1e-3
    x_f2_0: np.ndarray | None = None
    x_eta_0: np.ndarray | None = None
    w0: np.ndarray | None = None
    x_eps_policy: str = "zero"

    def __post_init__(self):
        if self.dt <= 0 or self.horizon <= 0:
            raise ValueError("dt and horizon must be positive")

    def grid(self) -> np.ndarray:
        steps = int(round(self.horizon / self.dt))
        return self.t0 + self.dt * np.arange(steps + 1)


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    x_sigma: np.ndarray
    x_f2: np.ndarray
    x_eta: np.ndarray
    w: np.ndarray
    z: np.ndarray
    z_hat: np.ndarray
    e: np.ndarray
    residual_alg: np.ndarray

    def write_csv(self, path):
        cols = [("t", self.t[:, None])]
        for name, data in (
            ("x_f2", self.x_f2),
            ("x_eta", self.x_eta),
            ("w", self.w),
            ("z", self.z),
            ("zhat", self.z_hat),
            ("e", self.e),
        ):
            cols.append((name, data))
        cols.append(("res_alg", self.residual_alg[:, None]))
        header = []
        for name, data in cols:
            if data.shape[1] == 1 and name in ("t", "res_alg"):
                header.append(name)
            else:
                header.extend(f"{name}_{i + 1}" for i in range(data.shape[1]))
        table = np.hstack([data for _, data in cols])
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for row in table:
                fh.write(",".join(f"{v:.12g}" for v in row) + "\n")


def sigma_solution(J_sig, B_sig, sig: Signal, t: float) -> np.ndarray:
    """Closed-form solution of the nilpotent block at time t."""
    J_sig = as_matrix(J_sig, dtype=float)
    B_sig = as_matrix(B_sig, dtype=float)
    ns = J_sig.shape[0]
    if ns == 0:
        return np.zeros(0)
    x = np.zeros(ns)
    power = np.eye(ns)
    cutoff = 1e-12 * max(1.0, np.linalg.norm(B_sig))
    for i in range(ns):
        coeff = power @ B_sig
        if np.linalg.norm(coeff) <= cutoff:
            break
        x -= coeff @ sig.eval(t, i)
        power = power @ J_sig
    return x


def integrate_lti(A, Bm, sig: Signal, x0, grid) -> np.ndarray:
    """Classical fixed-step RK4 for x' = A x + Bm * ubar(t)."""
    A = as_matrix(A, dtype=float)
    Bm = as_matrix(Bm, dtype=float)
    x = np.asarray(x0, dtype=float).reshape(A.shape[0])
    out = np.empty((len(grid), x.size))
    out[0] = x
    for idx in range(len(grid) - 1):
        t = grid[idx]
        dt = grid[idx + 1] - t
        u0 = Bm @ sig.eval(t)
        um = Bm @ sig.eval(t + dt / 2)
        u1 = Bm @ sig.eval(t + dt)
        k1 = A @ x + u0
        k2 = A @ (x + dt / 2 * k1) + um
        k3 = A @ (x + dt / 2 * k2) + um
        k4 = A @ (x + dt * k3) + u1
        x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[idx + 1] = x
    return out


def simulate(
    red: ReducedSystem,
    obs: ObserverRealization,
    sig: Signal,
    cfg: SimConfig,
    residual_tol: float = 1e-6,
) -> Trajectory:
    """Run the reduced system and the observer on a shared grid."""
    if sig.max_order < red.h - 1:
        raise SmoothnessError(
            f"observer index h = {red.h} needs input derivatives up to order "
            f"{red.h - 1}, signal stops at {sig.max_order}"
        )
    grid = cfg.grid()
    x_f2_0 = np.zeros(red.n_f2) if cfg.x_f2_0 is None else np.asarray(cfg.x_f2_0, float)
    x_eta_0 = np.zeros(red.n_eta) if cfg.x_eta_0 is None else np.asarray(cfg.x_eta_0, float)
    w0 = np.zeros(obs.order) if cfg.w0 is None else np.asarray(cfg.w0, float)
    if x_f2_0.size != red.n_f2 or x_eta_0.size != red.n_eta or w0.size != obs.order:
        raise ValueError("initial vectors do not match the block dimensions")

    A_ode, B_ode = red.ode_matrices()
    x_ode = integrate_lti(A_ode, B_ode, sig, np.concatenate([x_f2_0, x_eta_0]), grid)
    x_f2 = x_ode[:, : red.n_f2]
    x_eta = x_ode[:, red.n_f2 :]
    w = integrate_lti(obs.N, obs.H, sig, w0, grid)

    ubar = sig.sample(grid)
    x_sigma = np.stack([sigma_solution(red.J_sig, red.B_sig, sig, t) for t in grid])

    z = x_sigma @ red.K_sig.T + x_f2 @ red.K_f2.T + x_eta @ red.K_eta.T
    z_hat = w @ obs.R.T
    for i, Mi in enumerate(obs.M):
        z_hat -= sig.sample(grid, i) @ Mi.T
    e = z - z_hat

    if red.A_eta2.shape[0]:
        residual = np.linalg.norm(
            x_eta @ red.A_eta2.T + ubar @ red.B_eta2.T, axis=1
        )
    else:
        residual = np.zeros(len(grid))
    if residual.size and residual.max() > residual_tol:
        warnings.warn(
            f"algebraic constraint violated along the trajectory "
            f"(max residual {residual.max():.3e}); initialization or input "
            f"is inconsistent",
            stacklevel=2,
        )
    return Trajectory(
        t=grid,
        x_sigma=x_sigma,
        x_f2=x_f2,
        x_eta=x_eta,
        w=w,
        z=z,
        z_hat=z_hat,
        e=e,
        residual_alg=residual,
    )


def error_consistency(traj: Trajectory, N, R, e1_0) -> float:
    """Max deviation of the simulated error from R exp(N t) e1(0)."""
    N = as_matrix(N, dtype=float)
    R = as_matrix(R, dtype=float)
    e1_0 = np.asarray(e1_0, dtype=float).reshape(N.shape[0])
    worst = 0.0
    t0 = traj.t[0]
    for idx, t in enumerate(traj.t):
        closed = R @ scipy.linalg.expm(N * (t - t0)) @ e1_0 if N.size else R @ e1_0
        worst = max(worst, float(np.linalg.norm(traj.e[idx] - closed)))
    return worst


def decay_rate(traj: Trajectory) -> float:
    """Least-squares slope of log ||e|| over the second half of the run."""
    norms = np.linalg.norm(traj.e, axis=1)
    half = len(norms) // 2
    mask = norms[half:] > 1e-14
    if mask.sum() < 2:
        return -np.inf
    t = traj.t[half:][mask]
    y = np.log(norms[half:][mask])
    slope = np.polyfit(t, y, 1)[0]
    return float(slope)
