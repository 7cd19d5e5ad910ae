"""Command-line front end.

Subcommands:

  check       partial detectability verdicts and certificates
  qkf         block sizes and spectrum of the stacked pencil
  synthesize  observer design; writes the realization as JSON
  simulate    observer/error trajectories; writes plot-ready CSV

Exit codes: 0 success / detectable, 1 not detectable, 2 input or
numerical error, 3 method disagreement (check --method all),
4 asymptotic estimator only (synthesize).

A positional system path may also name a bundled fixture
(worked_example, jordan_counterexample, derivative_gap); signal paths
accept the bundled name `sincos`.
"""

from __future__ import annotations

import argparse
import json
import sys as _sys
from pathlib import Path

import numpy as np

from . import fixtures
from .detect import (
    check_all,
    is_behaviorally_detectable,
    is_partially_detectable_qkf,
    is_partially_detectable_rank,
    is_partially_detectable_wong,
    legacy_functional_detectability,
    ss_partial_detectability,
)
from .linalg import Tolerances
from .observer import (
    GainError,
    NotPartiallyDetectable,
    ObserverRealization,
    SynthConfig,
    reduce,
    synthesize,
)
from .pencil import QkfError, finite_spectrum, qkf
from .sim import Signal, SimConfig, SmoothnessError, decay_rate, simulate
from .system import DescriptorSystem

EXIT_OK = 0
EXIT_NOT_DETECTABLE = 1
EXIT_ERROR = 2
EXIT_DISAGREE = 3
EXIT_ASYMPTOTIC_ONLY = 4


class CliError(Exception):
    pass


def _resolve(path: str, kind: str = "system"):
    p = Path(path)
    if p.is_file():
        return p
    try:
        return fixtures.fixture_path(path if kind == "system" else "sincos" if path == "sincos" else path)
    except KeyError:
        raise CliError(f"no such file or bundled fixture: {path}")


def _load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot read {path}: {exc}")


def _load_system(path: str) -> DescriptorSystem:
    data = _load_json(_resolve(path))
    try:
        return DescriptorSystem.from_dict(data)
    except ValueError as exc:
        raise CliError(f"bad system file {path}: {exc}")


def _load_signal(path: str) -> Signal:
    data = _load_json(_resolve(path, kind="signal"))
    specs = data["channels"] if isinstance(data, dict) else data
    max_order = data.get("max_order") if isinstance(data, dict) else None
    try:
        return Signal.from_specs(specs, max_order=max_order)
    except ValueError as exc:
        raise CliError(f"bad signal file {path}: {exc}")


def _tol(args) -> Tolerances:
    return Tolerances(
        rank_rtol=args.rank_rtol,
        stab_margin=args.stab_margin,
        zero_atol=args.zero_atol,
    )


def _add_tol_flags(parser):
    parser.add_argument(
        "--rank-rtol", type=float, default=1e-10,
        help="relative singular value cutoff for numerical rank (default 1e-10)",
    )
    parser.add_argument(
        "--stab-margin", type=float, default=1e-9,
        help="half-plane boundary margin (default 1e-9)",
    )
    parser.add_argument(
        "--zero-atol", type=float, default=1e-8,
        help="absolute threshold for zero blocks (default 1e-8)",
    )


def _fmt_complex(z: complex) -> str:
    if abs(z.imag) < 1e-12:
        return f"{z.real:.6g}"
    return f"{z.real:.6g}{z.imag:+.6g}j"


def cmd_check(args) -> int:
    sys_ = _load_system(args.system)
    tol = _tol(args)
    out = {}
    if args.method == "all":
        result = check_all(sys_, tol)
        certs = result["certificates"]
        out["verdicts"] = {m: c.to_dict() for m, c in certs.items()}
        out["agree"] = result["agree"]
        out["borderline"] = result["borderline"]
        verdict = result["verdict"]
    else:
        fn = {
            "rank": is_partially_detectable_rank,
            "wong": is_partially_detectable_wong,
            "qkf": is_partially_detectable_qkf,
        }[args.method]
        cert = fn(sys_, tol)
        out["verdicts"] = {args.method: cert.to_dict()}
        out["agree"] = True
        verdict = cert.verdict
    out["partially_detectable"] = verdict

    # for square state-space systems, also report the legacy one-block
    # test next to the corrected tower test
    if sys_.m == sys_.n and np.allclose(sys_.E, np.eye(sys_.n)):
        out["state_space"] = {
            "corrected": ss_partial_detectability(sys_.A, sys_.C, sys_.K, tol),
            "legacy": legacy_functional_detectability(sys_.A, sys_.C, sys_.K, tol),
        }
    out["behaviorally_detectable"] = is_behaviorally_detectable(sys_, tol)

    if args.json:
        print(json.dumps(out, indent=1, sort_keys=True))
    else:
        for method, cert in out["verdicts"].items():
            print(f"{method:>5}: {'detectable' if cert['verdict'] else 'NOT detectable'}")
        if "state_space" in out:
            ss = out["state_space"]
            print(f"state-space corrected test: {ss['corrected']}")
            print(f"state-space legacy test:    {ss['legacy']}"
                  + ("   <- disagrees (legacy test is unsound)" if ss["legacy"] != ss["corrected"] else ""))
        if not out["agree"]:
            print("WARNING: methods disagree")
    if args.method == "all" and not out["agree"]:
        return EXIT_DISAGREE
    return EXIT_OK if verdict else EXIT_NOT_DETECTABLE


def cmd_qkf(args) -> int:
    sys_ = _load_system(args.system)
    tol = _tol(args)
    Ecal, Acal = sys_.stacked()
    dec = qkf(Ecal, Acal, tol)
    spec = sorted(finite_spectrum(dec), key=lambda z: (z.real, z.imag))
    h = dec.nilpotency_index(tol)
    m_eps, n_eps, n_f, n_sig, m_eta, n_eta = dec.sizes
    if args.json:
        out = {
            "sizes": {
                "m_eps": m_eps, "n_eps": n_eps, "n_f": n_f,
                "n_sig": n_sig, "m_eta": m_eta, "n_eta": n_eta,
            },
            "finite_spectrum": [[z.real, z.imag] for z in spec],
            "nilpotency_index": h,
            "cond_P": dec.cond_P,
            "cond_Q": dec.cond_Q,
            "P": dec.P.tolist(),
            "Q": dec.Q.tolist(),
            "blocks": {
                "E_eps": dec.E_eps.tolist(), "A_eps": dec.A_eps.tolist(),
                "J_f": dec.J_f.tolist(), "J_sig": dec.J_sig.tolist(),
                "E_eta": dec.E_eta.tolist(), "A_eta": dec.A_eta.tolist(),
            },
        }
        print(json.dumps(out, indent=1, sort_keys=True))
    else:
        print(f"block sizes (m_eps, n_eps, n_f, n_sig, m_eta, n_eta) = {dec.sizes}")
        print(f"finite spectrum: {{{', '.join(_fmt_complex(z) for z in spec)}}}")
        print(f"nilpotency index h = {h}")
        print(f"cond(P) = {dec.cond_P:.3e}, cond(Q) = {dec.cond_Q:.3e}")
    return EXIT_OK


def cmd_synthesize(args) -> int:
    sys_ = _load_system(args.system)
    tol = _tol(args)
    poles = None
    if args.poles:
        poles = tuple(float(p) for p in args.poles.split(","))
    cfg = SynthConfig(poles=poles, gain_strategy=args.gain_strategy)
    try:
        obs, report = synthesize(sys_, cfg, tol)
    except NotPartiallyDetectable as exc:
        print(f"not partially detectable: {exc}", file=_sys.stderr)
        return EXIT_NOT_DETECTABLE
    except GainError as exc:
        print(f"gain selection failed: {exc}", file=_sys.stderr)
        return EXIT_ERROR
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(obs.to_dict(), fh, indent=1, sort_keys=True)
    rR, rO = report.condition8
    print(f"order l = {obs.order}, index h = {obs.h}, gain strategy: {report.gain_strategy}")
    print(f"sigma1 (partially detectable): {report.sigma1}")
    print(f"sigma3 (stable + exact-match): {report.sigma3}"
          f"   [rank R = {rR}, rank O = {rO}]")
    if args.json:
        print(json.dumps({"observer": obs.to_dict(), "report": report.to_dict()},
                         indent=1, sort_keys=True))
    if not report.sigma3:
        print("observer is an asymptotic estimator only (exact match not guaranteed)")
        return EXIT_ASYMPTOTIC_ONLY
    return EXIT_OK


def cmd_simulate(args) -> int:
    sys_ = _load_system(args.system)
    tol = _tol(args)
    obs_data = _load_json(_resolve(args.observer))
    try:
        obs = ObserverRealization.from_dict(obs_data)
    except (KeyError, ValueError) as exc:
        raise CliError(f"bad observer file {args.observer}: {exc}")
    sig = _load_signal(args.signal)
    try:
        red = reduce(sys_, tol)
    except NotPartiallyDetectable as exc:
        print(f"not partially detectable: {exc}", file=_sys.stderr)
        return EXIT_NOT_DETECTABLE
    if sig.channels != sys_.k + sys_.p:
        raise CliError(
            f"signal has {sig.channels} channels, system needs k+p = {sys_.k + sys_.p}"
        )

    def vec(text, dim, name):
        if text is None:
            return None
        vals = [float(v) for v in text.split(",")] if text else []
        if len(vals) != dim:
            raise CliError(f"--{name} needs {dim} comma-separated values")
        return np.array(vals)

    cfg = SimConfig(
        t0=args.t0,
        horizon=args.horizon,
        dt=args.dt,
        x_f2_0=vec(args.init_f2, red.n_f2, "init-f2"),
        x_eta_0=vec(args.init_eta, red.n_eta, "init-eta"),
        w0=vec(args.init_w, obs.order, "init-w"),
    )
    try:
        traj = simulate(red, obs, sig, cfg)
    except SmoothnessError as exc:
        print(f"signal not smooth enough: {exc}", file=_sys.stderr)
        return EXIT_ERROR
    if args.out:
        traj.write_csv(args.out)
    final_err = float(np.linalg.norm(traj.e[-1]))
    max_res = float(traj.residual_alg.max()) if traj.residual_alg.size else 0.0
    print(f"final ||e|| = {final_err:.6e}")
    print(f"max algebraic residual = {max_res:.6e}")
    print(f"fitted decay rate = {decay_rate(traj):.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="descobs",
        description="partial detectability and functional observer design "
        "for linear descriptor systems",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="decide partial detectability")
    p.add_argument("system", help="system JSON file or bundled fixture name")
    p.add_argument("--method", choices=["rank", "wong", "qkf", "all"], default="all")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    _add_tol_flags(p)
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("qkf", help="inspect the stacked pencil decomposition")
    p.add_argument("system")
    p.add_argument("--json", action="store_true")
    _add_tol_flags(p)
    p.set_defaults(fn=cmd_qkf)

    p = sub.add_parser("synthesize", help="design a generalized functional observer")
    p.add_argument("system")
    p.add_argument("--poles", help="comma-separated observer poles for the eta part")
    p.add_argument(
        "--gain-strategy", choices=["zero-first", "place"], default="zero-first"
    )
    p.add_argument("--out", help="write the observer realization JSON here")
    p.add_argument("--json", action="store_true")
    _add_tol_flags(p)
    p.set_defaults(fn=cmd_synthesize)

    p = sub.add_parser("simulate", help="simulate observer and error trajectories")
    p.add_argument("system")
    p.add_argument("observer", help="observer JSON written by `synthesize --out`")
    p.add_argument("signal", help="signal JSON file or `sincos`")
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--horizon", type=float, default=10.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--init-f2", help="comma-separated initial x_f2")
    p.add_argument("--init-eta", help="comma-separated initial x_eta")
    p.add_argument("--init-w", help="comma-separated initial observer state")
    p.add_argument("--out", help="write the trajectory CSV here")
    _add_tol_flags(p)
    p.set_defaults(fn=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CliError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_ERROR
    except (QkfError, ValueError) as exc:
        print(f"numerical/input error: {exc}", file=_sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
