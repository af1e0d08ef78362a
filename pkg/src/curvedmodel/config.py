"""Global numerical settings and run configuration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace


@dataclass(frozen=True)
class Tolerances:
    """Thresholds shared by every module.

    ``fit`` bounds the grid residual of a coefficient fit, ``rank`` is the
    relative singular-value cut used whenever a range or closure is truncated,
    ``span`` is the (tighter) cut used to pick an orthonormal basis of the
    ambient model space, ``loss`` is the largest truncation loss an
    operation may report before it refuses to continue, and ``check`` is the
    pass threshold of verification reports.
    """

    fit: float = 1e-10
    rank: float = 1e-8
    span: float = 1e-11
    loss: float = 1e-6
    analytic: float = 1e-8
    check: float = 1e-7

    def __post_init__(self) -> None:
        for name in ("fit", "rank", "span", "loss", "analytic", "check"):
            if not getattr(self, name) > 0:
                raise ValueError(f"tolerance {name} must be positive")


DEFAULT_TOL = Tolerances()


@dataclass(frozen=True)
class ModelOrders:
    """Truncation orders for the coefficient spaces of an n-model.

    The space attached to index k keeps basis indices in
    ``[-neg, pos + (k-1)*step]``.  Growing the analytic order with k makes
    ``pi_i^dag pi_j`` (i >= j) act exactly on polynomial data of degree at
    most ``step`` per factor.
    """

    neg: int = 6
    pos: int = 24
    step: int = 4

    @classmethod
    def for_epsilon(cls, epsilon: complex, step: int = 4) -> "ModelOrders":
        """Orders whose coanalytic range resolves ``|epsilon|^neg`` below ``1e-14``."""
        a = abs(epsilon)
        neg = 6 if a < 1e-3 else max(6, math.ceil(-14 / math.log10(a)))
        return cls(neg, max(24, 3 * neg), step)

    def upper(self, k: int) -> int:
        return self.pos + (k - 1) * self.step

    def grid_for(self, n: int) -> int:
        top = max(self.neg, self.upper(n))
        m = 4 * top + 4
        m += m % 2
        return max(m, 8)


@dataclass(frozen=True)
class RunConfig:
    """Parameters of one CLI invocation.

    ``order`` and ``grid`` size the curve of built-in inputs, ``budget``
    caps the invariant-subspace enumeration and ``grouping`` selects how a
    product of three or more systems is associated (``right``:
    ``S3.(S2.S1)``, ``left``: ``(S3.S2).S1``).
    """

    command: str = "worked-examples"
    epsilon: complex = 0.2
    order: int = 48
    grid: int = 1024
    tol: Tolerances = field(default_factory=Tolerances)
    seed: int = 0
    inputs: tuple[str, ...] = ()
    out: str | None = None
    budget: int = 32
    grouping: str = "right"

    def __post_init__(self) -> None:
        if not 0 < self.order <= 128:
            raise ValueError("order K must lie in 1..128")
        if not 8 <= self.grid <= 8192 or self.grid % 2:
            raise ValueError("grid M must be even and lie in 8..8192")
        if self.grid < 4 * self.order + 4:
            raise ValueError("grid M must be at least 4K + 4")
        if abs(self.epsilon) >= 0.5:
            raise ValueError("|epsilon| must be below 1/2")
        if self.budget < 1:
            raise ValueError("budget must be positive")
        if self.grouping not in ("right", "left"):
            raise ValueError("grouping must be 'right' or 'left'")

    def with_tol(self, value: float) -> "RunConfig":
        """Same run with the verification threshold set to ``value``."""
        return replace(self, tol=replace(self.tol, check=value))
