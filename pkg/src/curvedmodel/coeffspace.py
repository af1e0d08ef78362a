"""Boundary curve, coefficient fields, Riesz projections and quadrature.

The boundary is ``C = phi(T)`` with ``phi(z) = z + eps*z**2`` and ``|eps| < 1/2``.
Every function on ``C`` is stored through its coefficients in the basis

    e_k    = theta**k            (k >= 0, analytic in G+)
    e_{-j} = P_- theta**(-j)     (j >= 1, analytic in G-, zero at infinity)

where ``theta = phi^{-1}`` maps ``G+`` onto the unit disk.  In the pullback
coordinate ``z`` this reads ``e_k = z**k`` and
``e_{-j} = z**(-j) + (-eps/(1 + eps*z))**j``, while off the curve
``e_{-j}(w) = p_j(1/w)`` with ``p_0 = 2``, ``p_1 = s`` and
``p_j = s*(p_{j-1} + eps*p_{j-2})``.  The split into non-negative and negative
indices is exactly the Riesz split ``P+ / P-``; at ``eps = 0`` the basis is the
Fourier basis ``zeta**k``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable

import numpy as np

from .config import DEFAULT_TOL

__all__ = [
    "Curve",
    "FunctionField",
    "Weight",
    "FitError",
    "TruncationError",
    "make_curve",
    "basis_pullback",
    "basis_at",
    "fit_field",
    "riesz_split",
    "contour_integral",
    "contour_functional",
    "inner_product",
    "outer_factor_scalar",
    "mult",
    "field_to_json",
    "field_from_json",
    "samples_to_csv",
]


class FitError(ValueError):
    """Coefficient fit failed or exceeded its residual tolerance."""


class TruncationError(ValueError):
    """A product or composition lost more than the allowed truncation mass."""


# ---------------------------------------------------------------------------
# curve geometry


@dataclass(frozen=True)
class Curve:
    """The curve ``phi(T)`` sampled at ``grid`` equispaced pullback nodes."""

    epsilon: complex
    grid: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "epsilon", complex(self.epsilon))
        object.__setattr__(self, "grid", int(self.grid))
        if not abs(self.epsilon) < 0.5:
            raise ValueError("|epsilon| must be below 1/2 for phi to stay conformal")
        if self.grid < 8 or self.grid % 2:
            raise ValueError("grid size must be even and at least 8")

    @cached_property
    def t(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.grid) / self.grid

    @cached_property
    def z(self) -> np.ndarray:
        return np.exp(1j * self.t)

    @cached_property
    def zeta(self) -> np.ndarray:
        return self.phi(self.z)

    @cached_property
    def dphi(self) -> np.ndarray:
        return 1 + 2 * self.epsilon * self.z

    @cached_property
    def arc_weights(self) -> np.ndarray:
        """Quadrature weights of ``(1/2pi) int ... |phi'(e^{it})| dt``."""
        return np.abs(self.dphi) / self.grid

    @cached_property
    def contour_weights(self) -> np.ndarray:
        """Quadrature weights of ``(1/2pi i) \\oint ... d zeta``."""
        return self.dphi * self.z / self.grid

    def phi(self, z):
        z = np.asarray(z, dtype=complex)
        return z + self.epsilon * z * z

    def theta(self, w):
        """Inverse conformal map, principal branch (value 0 at w = 0)."""
        w = np.asarray(w, dtype=complex)
        return 2 * w / (1 + np.sqrt(1 + 4 * self.epsilon * w))

    def inside(self, w) -> np.ndarray:
        """True where ``w`` lies in the open domain G+."""
        return np.abs(self.theta(w)) < 1

    def conj(self) -> "Curve":
        return Curve(self.epsilon.conjugate(), self.grid)

    def with_grid(self, grid: int) -> "Curve":
        return Curve(self.epsilon, grid)

    def to_json(self) -> dict:
        return {"epsilon": [self.epsilon.real, self.epsilon.imag], "grid": self.grid}

    @classmethod
    def from_json(cls, data: dict) -> "Curve":
        re, im = data["epsilon"]
        return cls(complex(re, im), int(data["grid"]))


def make_curve(epsilon: complex, M: int) -> Curve:
    """Validated curve constructor."""
    return Curve(epsilon, M)


# ---------------------------------------------------------------------------
# basis evaluation


def _powers(x: np.ndarray, kmax: int) -> np.ndarray:
    """Columns ``x**0 .. x**kmax`` by repeated multiplication."""
    out = np.empty((len(x), kmax + 1), dtype=complex)
    out[:, 0] = 1.0
    if kmax:
        out[:, 1:] = np.cumprod(np.broadcast_to(x[:, None], (len(x), kmax)), axis=1)
    return out


def basis_pullback(eps: complex, z: np.ndarray, kmin: int, kmax: int) -> np.ndarray:
    """Values ``e_k(phi(z))`` for ``kmin <= k <= kmax``, shape ``(len(z), nk)``."""
    z = np.asarray(z, dtype=complex).ravel()
    nk = kmax - kmin + 1
    out = np.zeros((len(z), nk), dtype=complex)
    if kmax >= 0:
        lo = max(kmin, 0)
        out[:, lo - kmin:] = _powers(z, kmax)[:, lo:]
    if kmin < 0:
        jmax = -kmin
        top = min(kmax, -1)
        a = -eps / (1 + eps * z)
        zi = _powers(1 / z, jmax)
        ap = _powers(a, jmax)
        js = np.arange(-kmin, -top - 1, -1)
        out[:, : len(js)] = zi[:, js] + ap[:, js]
    return out


@lru_cache(maxsize=64)
def _grid_basis(eps: complex, grid: int, kmin: int, kmax: int) -> np.ndarray:
    z = np.exp(1j * (2 * np.pi * np.arange(grid) / grid))
    B = basis_pullback(eps, z, kmin, kmax)
    B.flags.writeable = False
    return B


def _faber_minus(eps: complex, s: np.ndarray, jmax: int) -> np.ndarray:
    """``p_j(s)`` for ``j = 1..jmax``; column ``j-1`` holds ``p_j``."""
    out = np.zeros((len(s), jmax), dtype=complex)
    prev2 = np.full(len(s), 2.0 + 0j)
    prev1 = s.copy()
    if jmax >= 1:
        out[:, 0] = prev1
    for j in range(2, jmax + 1):
        cur = s * (prev1 + eps * prev2)
        out[:, j - 1] = cur
        prev2, prev1 = prev1, cur
    return out


def basis_at(eps: complex, w, kmin: int, kmax: int) -> np.ndarray:
    """Basis values at arbitrary points ``w``.

    Non-negative indices use ``theta(w)**k`` (meaningful on the closure of G+),
    negative indices use ``p_j(1/w)`` (meaningful on the closure of G-).
    """
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    ks = np.arange(kmin, kmax + 1)
    out = np.zeros((len(w), len(ks)), dtype=complex)
    pos = ks >= 0
    if pos.any():
        th = 2 * w / (1 + np.sqrt(1 + 4 * eps * w))
        out[:, pos] = np.power.outer(th, ks[pos].astype(float))
    if (~pos).any():
        jmax = int(-ks.min())
        with np.errstate(divide="ignore", invalid="ignore"):
            p = _faber_minus(eps, 1.0 / w, jmax)
        for col, k in enumerate(ks):
            if k < 0:
                out[:, col] = p[:, -k - 1]
    return out


def _as_cube(samples) -> np.ndarray:
    arr = np.asarray(samples, dtype=complex)
    if arr.ndim == 1:
        return arr[:, None, None]
    if arr.ndim == 2:
        return arr[:, :, None]
    if arr.ndim == 3:
        return arr
    raise ValueError("samples must have shape (M,), (M,p) or (M,p,q)")


# ---------------------------------------------------------------------------
# coefficient fields


@dataclass(frozen=True, eq=False)
class FunctionField:
    """Matrix function ``sum_k c_k e_k`` on the curve, ``|k| <= order``."""

    curve: Curve
    coeffs: np.ndarray
    residual: float = 0.0

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 3 or c.shape[0] % 2 != 1:
            raise ValueError("coeffs must have shape (2K+1, p, q)")
        object.__setattr__(self, "coeffs", c)

    # -- shape ---------------------------------------------------------
    @property
    def order(self) -> int:
        return (self.coeffs.shape[0] - 1) // 2

    @property
    def rows(self) -> int:
        return self.coeffs.shape[1]

    @property
    def cols(self) -> int:
        return self.coeffs.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def coeff(self, k: int) -> np.ndarray:
        if abs(k) > self.order:
            return np.zeros(self.shape, dtype=complex)
        return self.coeffs[k + self.order]

    # -- construction helpers -----------------------------------------
    @classmethod
    def zeros(cls, curve: Curve, K: int, p: int = 1, q: int = 1) -> "FunctionField":
        return cls(curve, np.zeros((2 * K + 1, p, q), dtype=complex))

    @classmethod
    def constant(cls, curve: Curve, K: int, value) -> "FunctionField":
        value = np.atleast_2d(np.asarray(value, dtype=complex))
        c = np.zeros((2 * K + 1,) + value.shape, dtype=complex)
        c[K] = value
        return cls(curve, c)

    @classmethod
    def monomial(cls, curve: Curve, K: int, k: int, value=1.0) -> "FunctionField":
        value = np.atleast_2d(np.asarray(value, dtype=complex))
        c = np.zeros((2 * K + 1,) + value.shape, dtype=complex)
        c[k + K] = value
        return cls(curve, c)

    def with_order(self, K: int) -> "FunctionField":
        c = np.zeros((2 * K + 1,) + self.shape, dtype=complex)
        m = min(K, self.order)
        c[K - m : K + m + 1] = self.coeffs[self.order - m : self.order + m + 1]
        return FunctionField(self.curve, c, self.residual)

    def on_curve(self, curve: Curve) -> "FunctionField":
        if curve.epsilon != self.curve.epsilon:
            raise ValueError("fields can only be moved between grids of the same curve")
        return FunctionField(curve, self.coeffs, self.residual)

    # -- evaluation ----------------------------------------------------
    def samples_on(self, curve: Curve) -> np.ndarray:
        if curve.epsilon != self.curve.epsilon:
            raise ValueError("curve mismatch")
        K = self.order
        B = _grid_basis(curve.epsilon, curve.grid, -K, K)
        return np.einsum("mk,kpq->mpq", B, self.coeffs)

    @cached_property
    def samples(self) -> np.ndarray:
        """Values at the grid nodes, shape ``(M, p, q)``."""
        return self.samples_on(self.curve)

    def at(self, w) -> np.ndarray:
        """Values at points ``w`` on (or near) the curve."""
        K = self.order
        B = basis_at(self.curve.epsilon, w, -K, K)
        return np.einsum("mk,kpq->mpq", B, self.coeffs)

    def plus_at(self, w) -> np.ndarray:
        """Analytic part evaluated inside G+ (or on its boundary)."""
        K = self.order
        B = basis_at(self.curve.epsilon, w, 0, K)
        return np.einsum("mk,kpq->mpq", B, self.coeffs[K:])

    def minus_at(self, w) -> np.ndarray:
        """Co-analytic part evaluated inside G- (or on its boundary)."""
        K = self.order
        if K == 0:
            w = np.atleast_1d(w)
            return np.zeros((len(w),) + self.shape, dtype=complex)
        B = basis_at(self.curve.epsilon, w, -K, -1)
        return np.einsum("mk,kpq->mpq", B, self.coeffs[:K])

    # -- algebra -------------------------------------------------------
    def _check_same(self, other: "FunctionField") -> None:
        if other.curve.epsilon != self.curve.epsilon:
            raise ValueError("fields live on different curves")
        if other.shape != self.shape:
            raise ValueError(f"dimension mismatch {self.shape} vs {other.shape}")

    def __add__(self, other: "FunctionField") -> "FunctionField":
        self._check_same(other)
        K = max(self.order, other.order)
        a, b = self.with_order(K), other.with_order(K)
        return FunctionField(self.curve, a.coeffs + b.coeffs, self.residual + other.residual)

    def __sub__(self, other: "FunctionField") -> "FunctionField":
        return self + (-other)

    def __neg__(self) -> "FunctionField":
        return FunctionField(self.curve, -self.coeffs, self.residual)

    def scale(self, c: complex) -> "FunctionField":
        return FunctionField(self.curve, c * self.coeffs, abs(c) * self.residual)

    def left(self, A) -> "FunctionField":
        """Constant matrix times field."""
        A = np.atleast_2d(np.asarray(A, dtype=complex))
        return FunctionField(self.curve, np.einsum("ij,kjq->kiq", A, self.coeffs))

    def right(self, A) -> "FunctionField":
        """Field times constant matrix."""
        A = np.atleast_2d(np.asarray(A, dtype=complex))
        return FunctionField(self.curve, np.einsum("kpj,jq->kpq", self.coeffs, A))

    def plus(self) -> "FunctionField":
        c = self.coeffs.copy()
        c[: self.order] = 0
        return FunctionField(self.curve, c)

    def minus(self) -> "FunctionField":
        c = self.coeffs.copy()
        c[self.order :] = 0
        return FunctionField(self.curve, c)

    def tilde(self) -> "FunctionField":
        """``F~(zeta) = F(conj zeta)^*`` as a field on the conjugate curve."""
        return FunctionField(self.curve.conj(), np.conj(np.swapaxes(self.coeffs, 1, 2)), self.residual)

    def max_negative(self) -> float:
        """Largest negative-index coefficient norm (zero for analytic fields)."""
        if self.order == 0:
            return 0.0
        return float(np.max(np.abs(self.coeffs[: self.order])))

    def sup_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.samples, ord=2, axis=(1, 2))))

    def zeta_minus_coefficients(self) -> np.ndarray:
        """Co-analytic part re-expanded in the monomials ``zeta**(-j)``.

        Row ``j-1`` holds the coefficient of ``zeta**(-j)``; the change of basis
        from ``p_j`` is unit lower triangular, so it is exact.
        """
        K = self.order
        eps = self.curve.epsilon
        # poly[j][i] = coefficient of s**i in p_j
        poly = np.zeros((K + 1, K + 1), dtype=complex)
        poly[0, 0] = 2.0
        if K >= 1:
            poly[1, 1] = 1.0
        for j in range(2, K + 1):
            poly[j, 1:] = poly[j - 1, :-1] + eps * poly[j - 2, :-1]
        out = np.zeros((K,) + self.shape, dtype=complex)
        for j in range(1, K + 1):
            cj = self.coeff(-j)
            for i in range(1, j + 1):
                if poly[j, i] != 0:
                    out[i - 1] += poly[j, i] * cj
        return out


# ---------------------------------------------------------------------------
# weights


@dataclass(frozen=True, eq=False)
class Weight:
    """Boundedly invertible positive matrix weight ``Xi`` on the curve."""

    field: FunctionField

    def __post_init__(self) -> None:
        if self.field.rows != self.field.cols:
            raise ValueError("weight must be square")

    @classmethod
    def identity(cls, curve: Curve, d: int, K: int = 0) -> "Weight":
        return cls(FunctionField.constant(curve, K, np.eye(d)))

    @classmethod
    def from_samples(cls, curve: Curve, samples, K: int) -> "Weight":
        cube = _as_cube(samples)
        return cls(fit_field(curve, cube, K, tol=np.inf))

    @property
    def curve(self) -> Curve:
        return self.field.curve

    @property
    def dim(self) -> int:
        return self.field.rows

    def samples_on(self, curve: Curve) -> np.ndarray:
        s = self.field.samples_on(curve)
        return 0.5 * (s + np.conj(np.swapaxes(s, 1, 2)))

    @cached_property
    def samples(self) -> np.ndarray:
        """Hermitian part of the node values (the weight acts through it)."""
        return self.samples_on(self.field.curve)

    @cached_property
    def eig_bounds(self) -> tuple[float, float]:
        ev = np.linalg.eigvalsh(self.samples)
        return float(ev.min()), float(ev.max())

    @property
    def kappa(self) -> float:
        lo, hi = self.eig_bounds
        if lo <= 0:
            return np.inf
        return max(hi, 1.0 / lo)

    def is_constant_identity(self, tol: float = 1e-12) -> bool:
        eye = np.eye(self.dim)
        return bool(np.max(np.abs(self.samples - eye)) < tol)

    def tilde(self) -> "Weight":
        return Weight(self.field.tilde())

    def inverse(self, K: int | None = None) -> "Weight":
        K = self.field.order if K is None else K
        inv = np.linalg.inv(self.samples)
        return Weight.from_samples(self.curve, inv, K)

    def transform(self, psi: FunctionField, K: int | None = None) -> "Weight":
        """``psi^* Xi psi`` (weight seen through the change of variables psi)."""
        K = self.field.order if K is None else K
        ps = psi.samples_on(self.curve)
        s = np.conj(np.swapaxes(ps, 1, 2)) @ self.samples @ ps
        return Weight.from_samples(self.curve, s, K)


# ---------------------------------------------------------------------------
# fitting and the basic operations


def fit_field(curve: Curve, samples, K: int, tol: float | None = None) -> FunctionField:
    """Fit grid samples by a field of order ``K``.

    The co-analytic coefficients are the negative pullback Fourier modes; once
    their contribution is removed the remainder is analytic and its
    non-negative modes give the remaining coefficients.  ``tol`` bounds the
    reported grid residual (``inf`` disables the check).
    """
    tol = DEFAULT_TOL.fit if tol is None else tol
    cube = _as_cube(samples)
    M = curve.grid
    if cube.shape[0] != M:
        raise FitError(f"expected {M} samples, got {cube.shape[0]}")
    if K < 0 or M < 4 * K + 4:
        raise FitError(f"order K={K} too large for grid M={M} (need M >= 4K+4)")
    modes = np.fft.fft(cube, axis=0) / M
    coeffs = np.zeros((2 * K + 1,) + cube.shape[1:], dtype=complex)
    for j in range(1, K + 1):
        coeffs[K - j] = modes[M - j]
    if K > 0:
        a = -curve.epsilon / (1 + curve.epsilon * curve.z)
        apow = np.power.outer(a, np.arange(1, K + 1, dtype=float))
        tail = np.einsum("mj,jpq->mpq", apow, coeffs[K - 1 :: -1][:K])
        modes = np.fft.fft(cube - tail, axis=0) / M
    coeffs[K:] = modes[: K + 1]
    out = FunctionField(curve, coeffs)
    res = float(np.max(np.abs(out.samples - cube))) if cube.size else 0.0
    if not np.isfinite(res) or res > tol:
        raise FitError(f"fit residual {res:.3e} exceeds tolerance {tol:.1e}")
    return FunctionField(curve, coeffs, res)


def riesz_split(F: FunctionField) -> tuple[FunctionField, FunctionField]:
    """Exact split ``F = F+ + F-`` with ``F+`` in E2(G+) and ``F-`` in E2(G-)."""
    return F.plus(), F.minus()


def contour_functional(eps: complex, kmin: int, kmax: int) -> np.ndarray:
    """Row vector giving ``(1/2pi i) \\oint e_k d zeta`` for each basis index.

    Only ``e_{-1} = 1/zeta`` and ``e_{-2} = zeta**-2 + 2 eps/zeta`` contribute.
    """
    ks = np.arange(kmin, kmax + 1)
    row = np.zeros(len(ks), dtype=complex)
    row[ks == -1] = 1.0
    row[ks == -2] = 2 * eps
    return row


def contour_integral(F: FunctionField, curve: Curve | None = None) -> np.ndarray:
    """Trapezoid value of ``(1/2pi i) \\oint_C F(zeta) d zeta``."""
    curve = F.curve if curve is None else curve
    s = F.samples_on(curve)
    return np.einsum("m,mpq->pq", curve.contour_weights, s)


def inner_product(u: FunctionField, v: FunctionField, xi: Weight | None = None,
                  curve: Curve | None = None) -> complex:
    """``(1/2pi) int (Xi u, v) |phi'| dt`` (Hilbert-Schmidt pairing for matrices)."""
    curve = u.curve if curve is None else curve
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch {u.shape} vs {v.shape}")
    us, vs = u.samples_on(curve), v.samples_on(curve)
    if xi is not None:
        if xi.dim != u.rows:
            raise ValueError("weight dimension mismatch")
        us = xi.samples_on(curve) @ us
    val = np.einsum("m,mpq,mpq->", curve.arc_weights, np.conj(vs), us)
    return complex(val)


def outer_factor_scalar(xi: Weight, K: int | None = None,
                        tol: float = 1e-8) -> FunctionField:
    """Outer ``chi`` with ``|chi|**2 = Xi`` on the grid (scalar weights only).

    Takes the analytic projection of ``log(Xi)/2`` in the pullback coordinate
    and exponentiates it; since ``e_k = z**k`` for ``k >= 0`` the Taylor
    coefficients of ``chi(phi(z))`` are the field coefficients.
    """
    if xi.dim != 1:
        raise ValueError("outer factorization is implemented for scalar weights only")
    curve = xi.curve
    vals = xi.samples[:, 0, 0].real
    if vals.min() <= 0:
        raise ValueError("weight is not bounded away from zero")
    K = xi.field.order if K is None else K
    M = curve.grid
    a_hat = np.fft.fft(0.5 * np.log(vals)) / M
    h_hat = np.zeros(M, dtype=complex)
    h_hat[0] = a_hat[0]
    h_hat[1 : M // 2] = 2 * a_hat[1 : M // 2]
    h = np.fft.ifft(h_hat) * M
    chi = fit_field(curve, np.exp(h), K, tol=np.inf)
    grid_res = float(np.max(np.abs(np.abs(chi.samples[:, 0, 0]) ** 2 - vals)))
    if grid_res > tol or chi.max_negative() > tol:
        raise FitError(f"outer factor residual {grid_res:.2e} exceeds {tol:.1e}")
    return FunctionField(curve, chi.coeffs, grid_res)


def mult(F: FunctionField, G: FunctionField, K: int | None = None,
         loss_tol: float | None = None) -> FunctionField:
    """Product ``F*G`` refit at order ``K``; ``residual`` carries the truncation loss."""
    if F.curve.epsilon != G.curve.epsilon:
        raise ValueError("fields live on different curves")
    if F.cols != G.rows:
        raise ValueError(f"inner dimensions differ: {F.shape} x {G.shape}")
    loss_tol = DEFAULT_TOL.loss if loss_tol is None else loss_tol
    curve = F.curve if F.curve.grid >= G.curve.grid else G.curve
    K = max(F.order, G.order) if K is None else K
    prod = F.samples_on(curve) @ G.samples_on(curve)
    out = fit_field(curve, prod, K, tol=np.inf)
    if out.residual > loss_tol:
        raise TruncationError(f"truncation loss {out.residual:.2e} exceeds {loss_tol:.1e}")
    return out


# ---------------------------------------------------------------------------
# serialization


def field_to_json(F: FunctionField, drop_below: float = 0.0) -> dict:
    coeffs = []
    for k in range(-F.order, F.order + 1):
        c = F.coeff(k)
        if drop_below and np.max(np.abs(c)) <= drop_below:
            continue
        coeffs.append({"k": k, "re": c.real.tolist(), "im": c.imag.tolist()})
    return {"rows": F.rows, "cols": F.cols, "order": F.order, "coeffs": coeffs}


def field_from_json(data: dict, curve: Curve) -> FunctionField:
    try:
        p, q, K = int(data["rows"]), int(data["cols"]), int(data["order"])
        c = np.zeros((2 * K + 1, p, q), dtype=complex)
        for entry in data["coeffs"]:
            k = int(entry["k"])
            if abs(k) > K:
                raise ValueError(f"coefficient index {k} exceeds order {K}")
            c[k + K] = np.asarray(entry["re"], dtype=float) + 1j * np.asarray(entry["im"], dtype=float)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed field JSON: {exc}") from exc
    return FunctionField(curve, c)


def samples_to_csv(fields: Iterable[FunctionField] | FunctionField, curve: Curve | None = None) -> str:
    """CSV of boundary traces: ``t, Re zeta, Im zeta, Re F_ij, Im F_ij``."""
    if isinstance(fields, FunctionField):
        fields = [fields]
    fields = list(fields)
    curve = fields[0].curve if curve is None else curve
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["t", "Re zeta", "Im zeta"]
    cols = []
    for n, F in enumerate(fields):
        tag = "" if len(fields) == 1 else f"{n}_"
        s = F.samples_on(curve)
        for i in range(F.rows):
            for j in range(F.cols):
                header += [f"Re F{tag}{i + 1}{j + 1}", f"Im F{tag}{i + 1}{j + 1}"]
                cols.append(s[:, i, j])
    writer.writerow(header)
    for m in range(curve.grid):
        row = [curve.t[m], curve.zeta[m].real, curve.zeta[m].imag]
        for c in cols:
            row += [c[m].real, c[m].imag]
        writer.writerow([f"{x:.17g}" for x in row])
    return buf.getvalue()
