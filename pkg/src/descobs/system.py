"""Descriptor system container.

A linear time-invariant descriptor system

    E x'(t) = A x(t) + B u(t)
    y(t)    = C x(t) + D u(t)
    z(t)    = K x(t)

with E, A possibly singular or non-square.  No regularity assumption is
made anywhere in this package.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import as_matrix


@dataclass(frozen=True)
class DescriptorSystem:
    E: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    K: np.ndarray
    description: str = field(default="", compare=False)

    def __post_init__(self):
        for name in "EABCDK":
            object.__setattr__(self, name, as_matrix(getattr(self, name)))
        m, n = self.E.shape
        if self.A.shape != (m, n):
            raise ValueError(f"A must be {m}x{n}, got {self.A.shape}")
        if self.B.shape[0] != m:
            raise ValueError(f"B must have {m} rows, got {self.B.shape}")
        if self.C.shape[1] != n:
            raise ValueError(f"C must have {n} columns, got {self.C.shape}")
        if self.D.shape != (self.p, self.k):
            raise ValueError(f"D must be {self.p}x{self.k}, got {self.D.shape}")
        if self.K.shape[1] != n:
            raise ValueError(f"K must have {n} columns, got {self.K.shape}")

    @property
    def m(self) -> int:
        return self.E.shape[0]

    @property
    def n(self) -> int:
        return self.E.shape[1]

    @property
    def k(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @property
    def r(self) -> int:
        return self.K.shape[0]

    def stacked(self):
        """Stacked pencil ([E; 0], [A; C]) combining dynamics and measurement."""
        Ecal = np.vstack([self.E, np.zeros((self.p, self.n))])
        Acal = np.vstack([self.A, self.C])
        return Ecal, Acal

    def input_matrix(self) -> np.ndarray:
        """The matrix [B 0; D -I] multiplying the stacked signal (u; y)."""
        top = np.hstack([self.B, np.zeros((self.m, self.p))])
        bottom = np.hstack([self.D, -np.eye(self.p)])
        return np.vstack([top, bottom])

    @classmethod
    def from_matrices(cls, E, A, B=None, C=None, D=None, K=None, description=""):
        """Build a system, filling in missing blocks with empty/zero matrices."""
        E = as_matrix(E)
        m, n = E.shape
        A = as_matrix(A)
        if B is None:
            B = np.zeros((m, 0))
        B = as_matrix(B)
        if C is None:
            C = np.zeros((0, n))
        C = as_matrix(C)
        if D is None:
            D = np.zeros((C.shape[0], B.shape[1]))
        if K is None:
            K = np.eye(n)
        return cls(E, A, B, C, as_matrix(D), as_matrix(K), description)

    @classmethod
    def from_dict(cls, data: dict) -> "DescriptorSystem":
        def get(key):
            if key not in data:
                return None
            value = np.array(data[key], dtype=float)
            # an empty list round-trips as "absent": the correct
            # zero-width/zero-height shape is reconstructed from E
            if value.size == 0:
                return None
            return value

        if "E" not in data or "A" not in data:
            raise ValueError("system file must contain at least 'E' and 'A'")
        return cls.from_matrices(
            np.array(data["E"], dtype=float),
            np.array(data["A"], dtype=float),
            B=get("B"),
            C=get("C"),
            D=get("D"),
            K=get("K"),
            description=data.get("description", ""),
        )

    def to_dict(self) -> dict:
        out = {name: getattr(self, name).tolist() for name in "EABCDK"}
        if self.description:
            out["description"] = self.description
        return out
