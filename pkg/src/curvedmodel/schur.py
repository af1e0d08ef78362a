"""Weighted Schur-class functions, their duals and n-characteristic functions.

A weighted Schur function is an analytic ``Theta+ : N+ -> N-`` on ``G+`` which
is contractive from ``(N+, Xi+)`` to ``(N-, Xi-)`` at every boundary point.
Its dual ``Theta- = Xi+^{-1} Theta+^* Xi-`` is the boundary adjoint in the
weighted geometry.  An n-characteristic function is a chain of such maps
``Theta_{k+1,k}``; the remaining ``Theta_ij`` are products along the chain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .coeffspace import Curve, FitError, FunctionField, Weight, fit_field
from .config import DEFAULT_TOL

__all__ = [
    "WeightedSchurFunction",
    "SchurCheck",
    "NCharFn",
    "RegularityReport",
    "herm_roots",
    "whiten",
    "is_weighted_schur",
    "theta_minus",
    "theta_minus_split",
    "compose_ncharfn",
    "is_regular",
    "ncharfn_to_json",
    "ncharfn_from_json",
]


def herm_roots(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched square root and inverse square root of positive Hermitian matrices."""
    A = 0.5 * (A + np.conj(np.swapaxes(A, -1, -2)))
    w, V = np.linalg.eigh(A)
    if np.any(w <= 0):
        raise ValueError("weight is not positive definite at some node")
    Vh = np.conj(np.swapaxes(V, -1, -2))
    s = (V * np.sqrt(w)[..., None, :]) @ Vh
    si = (V * (1 / np.sqrt(w))[..., None, :]) @ Vh
    return s, si


def whiten(theta: np.ndarray, xi_in: np.ndarray, xi_out: np.ndarray) -> np.ndarray:
    """``Xi_out^{1/2} Theta Xi_in^{-1/2}`` at every node: the map in orthonormal frames."""
    so, _ = herm_roots(xi_out)
    _, sii = herm_roots(xi_in)
    return so @ theta @ sii


@dataclass(frozen=True, eq=False)
class WeightedSchurFunction:
    """``Theta+`` together with its input weight ``Xi+`` and output weight ``Xi-``."""

    theta_plus: FunctionField
    xi_plus: Weight
    xi_minus: Weight

    def __post_init__(self) -> None:
        p, q = self.theta_plus.shape
        if self.xi_plus.dim != q or self.xi_minus.dim != p:
            raise ValueError(
                f"weights ({self.xi_plus.dim}, {self.xi_minus.dim}) do not match Theta shape {p}x{q}")

    @classmethod
    def unweighted(cls, theta: FunctionField) -> "WeightedSchurFunction":
        c = theta.curve
        return cls(theta, Weight.identity(c, theta.cols), Weight.identity(c, theta.rows))

    @property
    def curve(self) -> Curve:
        return self.theta_plus.curve

    @property
    def dims(self) -> tuple[int, int]:
        """``(dim N+, dim N-)``."""
        return self.theta_plus.cols, self.theta_plus.rows

    @cached_property
    def samples(self) -> np.ndarray:
        return self.theta_plus.samples

    @cached_property
    def whitened(self) -> np.ndarray:
        return whiten(self.samples, self.xi_plus.samples, self.xi_minus.samples)


@dataclass(frozen=True)
class SchurCheck:
    ok: bool
    margin: float
    analytic_defect: float

    def __bool__(self) -> bool:
        return self.ok


def is_weighted_schur(theta: WeightedSchurFunction | FunctionField,
                      tol: float | None = None) -> SchurCheck:
    """Analyticity and node-wise contractivity, with the worst margins."""
    tol = DEFAULT_TOL.analytic if tol is None else tol
    if isinstance(theta, FunctionField):
        theta = WeightedSchurFunction.unweighted(theta)
    T = theta.samples
    gap = theta.xi_plus.samples - np.conj(np.swapaxes(T, 1, 2)) @ theta.xi_minus.samples @ T
    gap = 0.5 * (gap + np.conj(np.swapaxes(gap, 1, 2)))
    margin = float(np.linalg.eigvalsh(gap).min())
    neg = theta.theta_plus.max_negative()
    return SchurCheck(margin >= -tol and neg <= tol, margin, neg)


def theta_minus(theta: WeightedSchurFunction, K: int | None = None,
                tol: float | None = None) -> FunctionField:
    """``Xi+^{-1} Theta+^* Xi-`` on the grid, refit to coefficients."""
    K = theta.theta_plus.order if K is None else K
    T = theta.samples
    vals = np.linalg.solve(theta.xi_plus.samples, np.conj(np.swapaxes(T, 1, 2)) @ theta.xi_minus.samples)
    return fit_field(theta.curve, vals, K, tol=tol)


def theta_minus_split(theta: WeightedSchurFunction, K: int | None = None,
                      tol: float | None = None) -> tuple[FunctionField, FunctionField]:
    """Riesz split ``(Theta-_+, Theta-_-)`` of the dual function."""
    tm = theta_minus(theta, K, tol)
    return tm.plus(), tm.minus()


# ---------------------------------------------------------------------------
# n-characteristic functions


def _fit_order(curve: Curve, K: int) -> int:
    return max(0, min(K, (curve.grid - 4) // 4))


@dataclass(frozen=True, eq=False)
class NCharFn:
    """Chain ``Theta_{k+1,k}`` (k = 1..n-1) with weights ``Xi_1..Xi_n``."""

    weights: tuple[Weight, ...]
    factors: tuple[FunctionField, ...]
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", tuple(self.weights))
        object.__setattr__(self, "factors", tuple(self.factors))
        if len(self.weights) < 2 or len(self.factors) != len(self.weights) - 1:
            raise ValueError("need n >= 2 weights and n-1 factors")
        eps = {w.curve.epsilon for w in self.weights} | {f.curve.epsilon for f in self.factors}
        if len(eps) != 1:
            raise ValueError("all data must live on one curve")
        for k, F in enumerate(self.factors):
            if F.shape != (self.weights[k + 1].dim, self.weights[k].dim):
                raise ValueError(f"factor {k + 2}{k + 1} has shape {F.shape}, "
                                 f"expected {(self.weights[k + 1].dim, self.weights[k].dim)}")

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def curve(self) -> Curve:
        return self.factors[0].curve

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(w.dim for w in self.weights)

    def weight(self, k: int) -> Weight:
        return self.weights[k - 1]

    def samples(self, i: int, j: int) -> np.ndarray:
        """Grid values of ``Theta_ij`` (1-based, i >= j) as exact node products."""
        if not 1 <= j <= i <= self.n:
            raise ValueError(f"invalid index pair ({i}, {j})")
        key = ("s", i, j)
        if key not in self._cache:
            M = self.curve.grid
            out = np.broadcast_to(np.eye(self.dims[j - 1], dtype=complex), (M,) + (self.dims[j - 1],) * 2)
            for k in range(j, i):
                out = self.factors[k - 1].samples @ out
            self._cache[key] = np.array(out)
        return self._cache[key]

    def theta(self, i: int, j: int) -> FunctionField:
        """``Theta_ij`` as a coefficient field (refit of the node product)."""
        key = ("f", i, j)
        if key not in self._cache:
            if i == j:
                F = FunctionField.constant(self.curve, 0, np.eye(self.dims[j - 1]))
            elif i == j + 1:
                F = self.factors[j - 1]
            else:
                K = _fit_order(self.curve, sum(f.order for f in self.factors[j - 1 : i - 1]))
                F = fit_field(self.curve, self.samples(i, j), K, tol=np.inf)
                if F.residual > DEFAULT_TOL.loss:
                    raise FitError(f"Theta_{i}{j} truncation loss {F.residual:.2e}")
            self._cache[key] = F
        return self._cache[key]

    def schur(self, i: int, j: int) -> WeightedSchurFunction:
        return WeightedSchurFunction(self.theta(i, j), self.weight(j), self.weight(i))

    def factor_schur(self) -> list[WeightedSchurFunction]:
        return [self.schur(k + 1, k) for k in range(1, self.n)]

    def cocycle_residual(self) -> float:
        """Worst ``|Theta_ik - Theta_ij Theta_jk|`` over the refit fields on the grid."""
        worst = 0.0
        for i in range(1, self.n + 1):
            for j in range(1, i + 1):
                for k in range(1, j + 1):
                    lhs = self.theta(i, k).samples
                    rhs = self.theta(i, j).samples @ self.theta(j, k).samples
                    worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        return worst


def _same_weight(a: Weight, b: Weight, tol: float) -> bool:
    if a.dim != b.dim:
        return False
    curve = a.curve if a.curve.grid >= b.curve.grid else b.curve
    return float(np.max(np.abs(a.samples_on(curve) - b.samples_on(curve)))) <= tol


def compose_ncharfn(factors, tol: float = 1e-9) -> NCharFn:
    """Chain weighted Schur factors ``theta_1, theta_2, ...`` (applied in that order)."""
    factors = list(factors)
    if not factors:
        raise ValueError("need at least one factor")
    weights = [factors[0].xi_plus]
    for k, f in enumerate(factors):
        if k and not _same_weight(factors[k - 1].xi_minus, f.xi_plus, tol):
            raise ValueError(f"weight mismatch between factor {k} and factor {k + 1}")
        weights.append(f.xi_minus)
    N = NCharFn(tuple(weights), tuple(f.theta_plus for f in factors))
    res = N.cocycle_residual()
    if res > tol:
        raise FitError(f"cocycle residual {res:.2e} exceeds {tol:.1e}")
    return N


# ---------------------------------------------------------------------------
# regularity


@dataclass(frozen=True)
class RegularityReport:
    regular: bool
    ranks: np.ndarray  # (n-2, M, 3): rank[D2|D1*], rank D2, rank D1*
    flagged: tuple[int, ...]

    def __bool__(self) -> bool:
        return self.regular

    def to_json(self) -> list:
        return self.ranks.astype(int).tolist()


def _defect_basis(H: np.ndarray, tol: float) -> tuple[np.ndarray, bool]:
    w, V = np.linalg.eigh(0.5 * (H + H.conj().T))
    keep = w > tol
    edge = bool(np.any((w > tol / 100) & (w < tol * 100)))
    return V[:, keep], edge


def is_regular(N: NCharFn, tol: float | None = None) -> RegularityReport:
    """Node-wise trivial-intersection test of the two defect ranges at each middle index.

    For ``i = n``, ``k = 1`` and each ``1 < j < n`` the ranges of
    ``(I - Theta_ij^dag Theta_ij)^{1/2}`` and ``(I - Theta_jk Theta_jk^dag)^{1/2}``
    must meet only in zero.  Both operators are Xi_j-selfadjoint; in the
    orthonormal frame of Xi_j they become Hermitian, and the common similarity
    does not change whether the ranges intersect.
    """
    tol = DEFAULT_TOL.rank if tol is None else tol
    n, M = N.n, N.curve.grid
    ranks = np.zeros((max(n - 2, 0), M, 3), dtype=int)
    flagged: set[int] = set()
    for jj, j in enumerate(range(2, n)):
        A = whiten(N.samples(n, j), N.weight(j).samples, N.weight(n).samples)
        B = whiten(N.samples(j, 1), N.weight(1).samples, N.weight(j).samples)
        dj = N.dims[j - 1]
        eye = np.eye(dj)
        for m in range(M):
            D2, e2 = _defect_basis(eye - A[m].conj().T @ A[m], tol)
            D1, e1 = _defect_basis(eye - B[m] @ B[m].conj().T, tol)
            r2, r1 = D2.shape[1], D1.shape[1]
            if r2 and r1:
                sv = np.linalg.svd(np.hstack([D2, D1]), compute_uv=False)
                # orthonormal bases: a shared direction shows up as a singular value near 0
                r = int(np.sum(sv > np.sqrt(tol)))
            else:
                r = r1 + r2
            ranks[jj, m] = (r, r2, r1)
            if e1 or e2:
                flagged.add(m)
    regular = bool(np.all(ranks[..., 0] == ranks[..., 1] + ranks[..., 2]))
    return RegularityReport(regular, ranks, tuple(sorted(flagged)))


# ---------------------------------------------------------------------------
# serialization


def ncharfn_to_json(N: NCharFn) -> dict:
    from .coeffspace import field_to_json

    return {
        "n": N.n,
        "dims": list(N.dims),
        "curve": N.curve.to_json(),
        "weights": [field_to_json(w.field) for w in N.weights],
        "factors": [field_to_json(f) for f in N.factors],
    }


def ncharfn_from_json(data: dict, curve: Curve | None = None) -> NCharFn:
    from .coeffspace import field_from_json

    try:
        curve = Curve.from_json(data["curve"]) if curve is None else curve
        weights = [Weight(field_from_json(w, curve)) for w in data["weights"]]
        factors = [field_from_json(f, curve) for f in data["factors"]]
        N = NCharFn(tuple(weights), tuple(factors))
        if "n" in data and int(data["n"]) != N.n:
            raise ValueError("declared n does not match the number of weights")
        if "dims" in data and list(data["dims"]) != list(N.dims):
            raise ValueError("declared dims do not match the weights")
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed NCharFn JSON: {exc}") from exc
    return N
