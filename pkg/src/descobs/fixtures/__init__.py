"""Bundled example systems and signals.

Three named systems are shipped as JSON files:

  worked_example     6x5 descriptor system with a nilpotent chain, an
                     overdetermined part, and a scalar functional output;
                     partially detectable, admits an exact observer
  jordan_counterexample
                     2-state system with a defective unstable eigenvalue;
                     passes the legacy one-block test but is not
                     partially detectable
  derivative_gap     system whose functional needs input/output
                     derivatives; partially detectable, but no gain makes
                     the constructive observer exact

plus `sincos` as a ready-made drive signal specification.
"""

from __future__ import annotations

import json
from importlib import resources

import numpy as np

from ..observer import ReducedSystem
from ..system import DescriptorSystem

NAMES = ("worked_example", "jordan_counterexample", "derivative_gap")


def fixture_path(name: str):
    """Filesystem path of a bundled JSON fixture."""
    path = resources.files(__package__) / f"{name}.json"
    if not path.is_file():
        raise KeyError(f"no bundled fixture named {name!r}")
    return path


def load_system(name: str) -> DescriptorSystem:
    with fixture_path(name).open() as fh:
        return DescriptorSystem.from_dict(json.load(fh))


def worked_example_reduced() -> ReducedSystem:
    """The reduced coordinates of the worked example, written out directly.

    Useful as a basis-independent reference: the synthesis pipeline is
    free to pick other block bases, but this particular representative
    yields the observer matrices quoted in the docs verbatim.
    """
    return ReducedSystem(
        J_sig=np.array([[0.0, 1.0], [0.0, 0.0]]),
        B_sig=np.array([[0.0, 0.0], [0.5, -0.5]]),
        J_f2=np.array([[-1.0]]),
        A_eta1=np.array([[-1.0]]),
        B_f2=np.array([[0.0, 0.0]]),
        B_eta1=np.array([[1.0, 0.0]]),
        A_eta2=np.array([[1.0], [0.0]]),
        B_eta2=np.array([[0.0, 0.0], [0.5, 0.5]]),
        K_sig=np.array([[1.0, 1.0]]),
        K_f2=np.array([[-1.0]]),
        K_eta=np.array([[1.0]]),
        h=2,
    )
