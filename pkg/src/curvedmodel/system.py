"""Conservative curved systems as finite matrices.

A system ``Sigma = (T, M, N)`` acts as ``N : N- -> H``, ``M : H -> N+`` and
has transfer function ``Upsilon(z) = M (T - z)^{-1} N``.  It is linked to a
weighted Schur function ``Theta`` by

    Upsilon = Theta-_+ - (Theta+)^{-1}   on G+ (off the spectrum),
    Upsilon = -Theta-_-                   on G-.

Systems built here carry that ``Theta`` along (``theta``) because the cascade
product needs the dual functions of its factors.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .coeffspace import (Curve, FunctionField, Weight, field_from_json, field_to_json,
                         fit_field)
from .config import DEFAULT_TOL
from .schur import WeightedSchurFunction, theta_minus

__all__ = [
    "CurvedSystem",
    "SimilarityWitness",
    "IncompatibleSystems",
    "transfer_function",
    "disk_colligation_charfn",
    "colligation_is_unitary",
    "colligation_system",
    "random_colligation",
    "ctot_check",
    "product",
    "coupling_convergence",
    "adjoint",
    "is_simple",
    "unobservable_subspace",
    "find_similarity",
    "f_sc",
    "model_product_similarity",
    "associator",
    "adjust_input",
    "system_to_json",
    "system_from_json",
]


class IncompatibleSystems(ValueError):
    """Dimensions, weights, curves or spectra do not allow the operation."""


def _mat(a, shape=None) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=complex))
    if shape is not None and a.shape != shape:
        raise ValueError(f"expected shape {shape}, got {a.shape}")
    return a


@dataclass(frozen=True, eq=False)
class CurvedSystem:
    """``(T, M, N)`` on ``curve`` with optional characteristic function and unitary tag."""

    T: np.ndarray
    M: np.ndarray
    N: np.ndarray
    curve: Curve
    theta: WeightedSchurFunction | None = None
    theta_u: np.ndarray | None = None

    def __post_init__(self) -> None:
        T = np.asarray(self.T, dtype=complex)
        if T.ndim != 2:
            T = np.atleast_2d(T) if T.size else np.zeros((0, 0), dtype=complex)
        d = T.shape[0]
        M = np.asarray(self.M, dtype=complex)
        N = np.asarray(self.N, dtype=complex)
        if M.ndim != 2 or N.ndim != 2 or T.shape != (d, d) or M.shape[1] != d or N.shape[0] != d:
            raise ValueError(f"inconsistent system shapes T{T.shape} M{M.shape} N{N.shape}")
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "N", N)
        if d and np.any(np.abs(np.abs(self.curve.theta(self.eigenvalues)) - 1) < 1e-12):
            raise ValueError("spectrum of T meets the curve")
        if self.theta is not None:
            q, p = self.theta.theta_plus.shape
            if (p, q) != (self.dim_plus, self.dim_minus):
                raise ValueError("characteristic function dimensions do not match (M, N)")
        if self.theta_u is not None:
            U = _mat(self.theta_u)
            if np.max(np.abs(U.conj().T @ U - np.eye(U.shape[1]))) > 1e-10:
                raise ValueError("theta_u is not unitary")
            object.__setattr__(self, "theta_u", U)

    @property
    def dim(self) -> int:
        return self.T.shape[0]

    @property
    def dim_plus(self) -> int:
        """``dim N+`` (range of ``M``)."""
        return self.M.shape[0]

    @property
    def dim_minus(self) -> int:
        """``dim N-`` (domain of ``N``)."""
        return self.N.shape[1]

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.T) if self.dim else np.zeros(0, dtype=complex)

    @property
    def xi_plus(self) -> Weight:
        if self.theta is not None:
            return self.theta.xi_plus
        return Weight.identity(self.curve, self.dim_plus)

    @property
    def xi_minus(self) -> Weight:
        if self.theta is not None:
            return self.theta.xi_minus
        return Weight.identity(self.curve, self.dim_minus)

    def spectrum_inside(self) -> bool:
        return bool(np.all(self.curve.inside(self.eigenvalues)))

    def with_theta(self, theta: WeightedSchurFunction | None) -> "CurvedSystem":
        return replace(self, theta=theta)

    def matrices_equal(self, other: "CurvedSystem", tol: float = 1e-10) -> bool:
        if self.T.shape != other.T.shape or self.M.shape != other.M.shape or self.N.shape != other.N.shape:
            return False
        return all(np.max(np.abs(a - b), initial=0.0) <= tol
                   for a, b in ((self.T, other.T), (self.M, other.M), (self.N, other.N)))


@dataclass(frozen=True)
class SimilarityWitness:
    """``X`` with ``X T1 = T2 X``, ``M1 = M2 X``, ``X N1 = N2``."""

    X: np.ndarray
    residuals: dict = field(default_factory=dict)
    unique: bool = True

    @property
    def residual(self) -> float:
        return max(self.residuals.values(), default=0.0)


# ---------------------------------------------------------------------------
# evaluation


def transfer_function(sigma: CurvedSystem, z: complex) -> np.ndarray:
    """``M (T - z)^{-1} N``."""
    d = sigma.dim
    if d == 0:
        return np.zeros((sigma.dim_plus, sigma.dim_minus), dtype=complex)
    A = sigma.T - z * np.eye(d)
    if np.linalg.cond(A) > 1e14:
        raise ValueError(f"z={z} lies in the spectrum of T")
    return sigma.M @ np.linalg.solve(A, sigma.N)


def colligation_is_unitary(T, M, N, L, tol: float = 1e-8) -> bool:
    U = np.block([[_mat(T), _mat(N)], [_mat(M), _mat(L)]])
    if U.shape[0] != U.shape[1]:
        return False
    return bool(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))) <= tol)


def disk_colligation_charfn(T, M, N, L, z: complex) -> np.ndarray:
    """``L* + z N* (I - z T*)^{-1} M*`` for the disk colligation ``[[T, N], [M, L]]``."""
    T, M, N, L = (_mat(a) for a in (T, M, N, L))
    if not colligation_is_unitary(T, M, N, L):
        warnings.warn("colligation is not unitary; the function need not be contractive",
                      stacklevel=2)
    d = T.shape[0]
    if d == 0:
        return L.conj().T.copy()
    Ts = T.conj().T
    return L.conj().T + z * N.conj().T @ np.linalg.solve(np.eye(d) - z * Ts, M.conj().T)


def colligation_system(T, M, N, L, curve: Curve | None = None, K: int = 96) -> CurvedSystem:
    """Disk system of a unitary colligation with its Taylor-truncated characteristic function."""
    T, M, N, L = (_mat(a) for a in (T, M, N, L))
    curve = Curve(0.0, 4 * K + 4) if curve is None else curve
    if curve.epsilon != 0:
        raise ValueError("colligation formula is a disk (epsilon = 0) construction")
    K = min(K, (curve.grid - 4) // 4)
    d = T.shape[0]
    c = np.zeros((2 * K + 1, N.shape[1], M.shape[0]), dtype=complex)
    c[K] = L.conj().T
    if d:
        Ns, Ts, Ms = N.conj().T, T.conj().T, M.conj().T
        P = Ms
        for k in range(1, K + 1):
            c[K + k] = Ns @ P
            P = Ts @ P
    theta = WeightedSchurFunction.unweighted(FunctionField(curve, c))
    return CurvedSystem(T, M, N, curve, theta)


def random_colligation(d: int, p: int, rng: np.random.Generator, rho_max: float = 0.7,
                       curve: Curve | None = None, K: int = 96) -> CurvedSystem:
    """Haar-random unitary colligation with ``spectral radius(T) <= rho_max`` (by rejection)."""
    from scipy.stats import unitary_group

    for _ in range(10_000):
        U = unitary_group.rvs(d + p, random_state=rng) if d + p > 1 else np.exp(
            2j * np.pi * rng.random()) * np.ones((1, 1))
        U = np.atleast_2d(U)
        T, N, M, L = U[:d, :d], U[:d, d:], U[d:, :d], U[d:, d:]
        if d == 0 or np.max(np.abs(np.linalg.eigvals(T))) <= rho_max:
            return colligation_system(T, M, N, L, curve, K)
    raise RuntimeError("rejection sampling for the spectral radius did not terminate")


def ctot_check(sigma: CurvedSystem, zs, theta: WeightedSchurFunction | None = None,
               K: int | None = None) -> float:
    """Largest deviation between ``Upsilon`` and the expression built from ``Theta``."""
    theta = sigma.theta if theta is None else theta
    if theta is None:
        raise ValueError("no characteristic function attached")
    curve = theta.curve
    K = (curve.grid - 4) // 4 if K is None else K
    tm = theta_minus(theta, K, tol=np.inf)
    worst = 0.0
    for z in np.atleast_1d(zs):
        ups = transfer_function(sigma, z)
        if curve.inside(z):
            th = theta.theta_plus.plus_at(z)[0]
            if th.shape[0] != th.shape[1] or np.linalg.cond(th) > 1e12:
                raise ValueError(f"Theta+ is not invertible at z={z}")
            rhs = tm.plus_at(z)[0] - np.linalg.inv(th)
        else:
            rhs = -tm.minus_at(z)[0]
        worst = max(worst, float(np.max(np.abs(ups - rhs), initial=0.0)))
    return worst


# ---------------------------------------------------------------------------
# product


def _dual_samples(theta: WeightedSchurFunction, curve: Curve) -> np.ndarray:
    T = theta.theta_plus.samples_on(curve)
    Xp = theta.xi_plus.samples_on(curve)
    Xm = theta.xi_minus.samples_on(curve)
    return np.linalg.solve(Xp, np.conj(np.swapaxes(T, 1, 2)) @ Xm)


def _coupling(theta: WeightedSchurFunction, Mout: np.ndarray, T: np.ndarray, curve: Curve) -> np.ndarray:
    """``-(1/2 pi i) \\oint Theta-(zeta) Mout (T - zeta)^{-1} d zeta`` by trapezoid rule."""
    d = T.shape[0]
    dual = _dual_samples(theta, curve)
    res = np.linalg.solve(T[None] - curve.zeta[:, None, None] * np.eye(d)[None],
                          np.broadcast_to(np.eye(d), (curve.grid, d, d)))
    vals = dual @ (Mout[None] @ res)
    return -np.einsum("m,mij->ij", curve.contour_weights, vals)


def _converged_coupling(theta, Mout, T, curve, tol=1e-9) -> np.ndarray:
    a = _coupling(theta, Mout, T, curve)
    b = _coupling(theta, Mout, T, curve.with_grid(2 * curve.grid))
    scale = max(1.0, float(np.max(np.abs(b), initial=0.0)))
    if np.max(np.abs(a - b), initial=0.0) > tol * scale:
        raise IncompatibleSystems("coupling quadrature did not converge on the doubled grid")
    return b


def _weights_match(a: Weight, b: Weight, tol: float = 1e-9) -> bool:
    if a.dim != b.dim:
        return False
    c = a.curve if a.curve.grid >= b.curve.grid else b.curve
    return float(np.max(np.abs(a.samples_on(c) - b.samples_on(c)))) <= tol


def product(sigma2: CurvedSystem, sigma1: CurvedSystem) -> CurvedSystem:
    """Cascade product ``Sigma2 . Sigma1`` (``Sigma1`` acts first on the data side)."""
    if sigma1.curve.epsilon != sigma2.curve.epsilon:
        raise IncompatibleSystems("systems live on different curves")
    if sigma1.dim_minus != sigma2.dim_plus:
        raise IncompatibleSystems("output space of the first factor differs from input of the second")
    if sigma1.theta is None or sigma2.theta is None:
        raise IncompatibleSystems("both factors need their characteristic functions")
    if not _weights_match(sigma1.xi_minus, sigma2.xi_plus):
        raise IncompatibleSystems("weights do not match between the factors")
    if not (sigma1.spectrum_inside() and sigma2.spectrum_inside()):
        raise IncompatibleSystems("spectrum outside G+: boundary values are not direct evaluations")
    curve = sigma1.curve if sigma1.curve.grid >= sigma2.curve.grid else sigma2.curve
    d1, d2 = sigma1.dim, sigma2.dim

    M2_21 = (_converged_coupling(sigma1.theta, sigma2.M, sigma2.T, curve)
             if d2 else np.zeros((sigma1.dim_plus, 0), dtype=complex))
    if d1:
        ccurve = curve.conj()
        th2 = _adjoint_theta(sigma2.theta)
        N1_21 = _converged_coupling(th2, sigma1.N.conj().T, sigma1.T.conj().T, ccurve).conj().T
    else:
        N1_21 = np.zeros((0, sigma2.dim_minus), dtype=complex)

    T = np.block([[sigma1.T, sigma1.N @ sigma2.M], [np.zeros((d2, d1)), sigma2.T]])
    M = np.hstack([sigma1.M, M2_21])
    N = np.vstack([N1_21, sigma2.N])

    t1, t2 = sigma1.theta, sigma2.theta
    K = min((curve.grid - 4) // 4, t1.theta_plus.order + t2.theta_plus.order)
    prod = fit_field(curve, t2.theta_plus.samples_on(curve) @ t1.theta_plus.samples_on(curve), K,
                     tol=np.inf)
    if prod.residual > DEFAULT_TOL.loss:
        raise IncompatibleSystems(f"characteristic function product lost {prod.residual:.2e}")
    theta = WeightedSchurFunction(prod, t1.xi_plus, t2.xi_minus)
    tu = None
    if sigma1.theta_u is not None and sigma2.theta_u is not None:
        tu = sigma2.theta_u @ sigma1.theta_u
    return CurvedSystem(T, M, N, curve, theta, tu)


def coupling_convergence(sigma2: CurvedSystem, sigma1: CurvedSystem) -> dict:
    """Relative change of both coupling blocks of ``product(sigma2, sigma1)`` when the
    quadrature grid is doubled (the product itself requires at most ``1e-9``)."""
    curve = sigma1.curve if sigma1.curve.grid >= sigma2.curve.grid else sigma2.curve
    out = {"grid": curve.grid, "M_coupling": 0.0, "N_coupling": 0.0}

    def change(theta, Mout, T, c):
        a = _coupling(theta, Mout, T, c)
        b = _coupling(theta, Mout, T, c.with_grid(2 * c.grid))
        return float(np.max(np.abs(a - b), initial=0.0)) / max(1.0, float(np.max(np.abs(b), initial=0.0)))

    if sigma2.dim:
        out["M_coupling"] = change(sigma1.theta, sigma2.M, sigma2.T, curve)
    if sigma1.dim:
        out["N_coupling"] = change(_adjoint_theta(sigma2.theta), sigma1.N.conj().T,
                                   sigma1.T.conj().T, curve.conj())
    return out


# ---------------------------------------------------------------------------
# adjoint, simplicity, similarity


def _adjoint_theta(theta: WeightedSchurFunction) -> WeightedSchurFunction:
    xp = theta.xi_minus.tilde()
    xm = theta.xi_plus.tilde()
    xp = xp if xp.is_constant_identity() else xp.inverse()
    xm = xm if xm.is_constant_identity() else xm.inverse()
    return WeightedSchurFunction(theta.theta_plus.tilde(), xp, xm)


def adjoint(sigma: CurvedSystem) -> CurvedSystem:
    """``(T*, N*, M*)`` on the conjugate curve with ``Theta~`` and inverted conjugate weights."""
    theta = None if sigma.theta is None else _adjoint_theta(sigma.theta)
    tu = None if sigma.theta_u is None else sigma.theta_u.conj().T
    return CurvedSystem(sigma.T.conj().T, sigma.N.conj().T, sigma.M.conj().T,
                        sigma.curve.conj(), theta, tu)


def _null_basis(A: np.ndarray, tol: float) -> np.ndarray:
    n = A.shape[1]
    if A.shape[0] == 0:
        return np.eye(n, dtype=complex)
    _, s, Vh = np.linalg.svd(A)
    scale = max(1.0, s[0] if len(s) else 0.0)
    r = int(np.sum(s > tol * scale))
    return Vh[r:].conj().T


def unobservable_subspace(sigma: CurvedSystem, tol: float | None = None) -> np.ndarray:
    """Orthonormal basis of the largest T-invariant subspace inside ``Ker M``."""
    tol = DEFAULT_TOL.rank if tol is None else tol
    S = _null_basis(sigma.M, tol)
    while S.shape[1]:
        R = sigma.T @ S
        R = R - S @ (S.conj().T @ R)
        Y = _null_basis(R, tol)
        if Y.shape[1] == S.shape[1]:
            break
        S, _ = np.linalg.qr(S @ Y)
    return S


def is_simple(sigma: CurvedSystem, tol: float | None = None) -> bool:
    """Observability: no nonzero T-invariant subspace is annihilated by ``M``."""
    return unobservable_subspace(sigma, tol).shape[1] == 0


def find_similarity(sigma1: CurvedSystem, sigma2: CurvedSystem, tol: float = 1e-8,
                    max_cond: float = 1e8) -> SimilarityWitness | None:
    """Least-squares ``X`` with ``X T1 = T2 X``, ``M2 X = M1``, ``X N1 = N2``."""
    d = sigma1.dim
    if (sigma2.dim != d or sigma1.dim_plus != sigma2.dim_plus
            or sigma1.dim_minus != sigma2.dim_minus):
        return None
    if sigma1.curve.epsilon != sigma2.curve.epsilon:
        return None
    if not (_weights_match(sigma1.xi_plus, sigma2.xi_plus, tol)
            and _weights_match(sigma1.xi_minus, sigma2.xi_minus, tol)):
        return None
    if (sigma1.theta_u is None) != (sigma2.theta_u is None):
        return None
    if sigma1.theta_u is not None and np.max(np.abs(sigma1.theta_u - sigma2.theta_u)) > tol:
        return None
    if d == 0:
        return SimilarityWitness(np.zeros((0, 0), dtype=complex), {"T": 0.0, "M": 0.0, "N": 0.0})
    I = np.eye(d)
    # column-major vec: vec(A X B) = (B^T kron A) vec X
    A = np.vstack([
        np.kron(sigma1.T.T, I) - np.kron(I, sigma2.T),
        np.kron(I, sigma2.M),
        np.kron(sigma1.N.T, I),
    ])
    b = np.concatenate([np.zeros(d * d), sigma1.M.flatten(order="F"), sigma2.N.flatten(order="F")])
    x, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    X = x.reshape((d, d), order="F")
    res = {
        "T": float(np.max(np.abs(X @ sigma1.T - sigma2.T @ X))),
        "M": float(np.max(np.abs(sigma2.M @ X - sigma1.M), initial=0.0)),
        "N": float(np.max(np.abs(X @ sigma1.N - sigma2.N), initial=0.0)),
    }
    scale = max(1.0, float(np.max(np.abs(X))))
    if max(res.values()) > tol * scale or np.linalg.cond(X) > max_cond:
        return None
    return SimilarityWitness(X, res, unique=rank == d * d)


# ---------------------------------------------------------------------------
# bridge to the model


def f_sc(theta: WeightedSchurFunction, orders=None) -> CurvedSystem:
    """System of the two-embedding model of ``theta``."""
    from .nmodel import build_model, model_system
    from .schur import compose_ncharfn

    Pi = build_model(compose_ncharfn([theta]), orders)
    return model_system(Pi).system


def model_product_similarity(theta1: WeightedSchurFunction, theta2: WeightedSchurFunction,
                             orders=None):
    """Witness ``product(F_sc(theta2), F_sc(theta1)) ~ F_sm(model of theta2*theta1 chain)``.

    Returns ``(witness, sigma21, sigma_hat, unitary_dim)``; when the chain is
    not regular the model system is larger by the normal remainder and the
    witness is searched on the regular part only (``witness`` is then the
    similarity of ``sigma21`` with the compression of the model system).
    """
    from .nmodel import build_model, model_system, unitary_residual
    from .schur import compose_ncharfn

    s1, s2 = f_sc(theta1, orders), f_sc(theta2, orders)
    s21 = product(s2, s1)
    Pi = build_model(compose_ncharfn([theta1, theta2]), orders)
    hat = model_system(Pi).system
    ku = unitary_residual(Pi).dim
    return find_similarity(s21, hat), s21, hat, ku


def associator(sigma1: CurvedSystem, sigma2: CurvedSystem, sigma3: CurvedSystem):
    """``(Sigma3.(Sigma2.Sigma1), (Sigma3.Sigma2).Sigma1, witness, exactly_equal)``."""
    lhs = product(sigma3, product(sigma2, sigma1))
    rhs = product(product(sigma3, sigma2), sigma1)
    return lhs, rhs, find_similarity(lhs, rhs), lhs.matrices_equal(rhs)


def adjust_input(sigma1: CurvedSystem, psi: FunctionField, tol: float | None = None) -> CurvedSystem:
    """Replace ``N1`` by ``N1''`` with ``N1''^* = -(1/2 pi i) \\oint_{conj C} psi~ N1^* (T1^* - .)^{-1}``.

    The resulting system realizes ``psi^{-1} Theta1`` with output weight ``psi^* Xi- psi``.
    """
    tol = DEFAULT_TOL.analytic if tol is None else tol
    if sigma1.theta is None:
        raise IncompatibleSystems("system needs its characteristic function")
    q = sigma1.dim_minus
    if psi.shape != (q, q):
        raise IncompatibleSystems(f"psi must be {q}x{q}")
    curve = sigma1.curve
    ps = psi.samples_on(curve)
    Kc = (curve.grid - 4) // 4
    inv = fit_field(curve, np.linalg.inv(ps), Kc, tol=np.inf)
    if psi.max_negative() > tol or inv.max_negative() > tol:
        raise ValueError("psi and its inverse must be analytic in G+")

    if sigma1.dim:
        ccurve = curve.conj()
        pt = psi.tilde().samples_on(ccurve)
        Ts, Ns = sigma1.T.conj().T, sigma1.N.conj().T
        d = sigma1.dim

        def integral(c: Curve, vals: np.ndarray) -> np.ndarray:
            res = np.linalg.solve(Ts[None] - c.zeta[:, None, None] * np.eye(d)[None],
                                  np.broadcast_to(np.eye(d), (c.grid, d, d)))
            return -np.einsum("m,mij->ij", c.contour_weights, vals @ (Ns[None] @ res))

        a = integral(ccurve, pt)
        c2 = ccurve.with_grid(2 * ccurve.grid)
        b = integral(c2, psi.tilde().samples_on(c2))
        if np.max(np.abs(a - b)) > 1e-9 * max(1.0, float(np.max(np.abs(b)))):
            raise IncompatibleSystems("adjustment quadrature did not converge")
        N2 = b.conj().T
    else:
        N2 = sigma1.N

    th = sigma1.theta
    K = min(Kc, th.theta_plus.order + inv.order)
    new_theta = fit_field(curve, inv.samples_on(curve) @ th.theta_plus.samples_on(curve), K, tol=np.inf)
    new_weight = th.xi_minus.transform(psi, K=min(Kc, max(th.xi_minus.field.order, 2 * psi.order)))
    return CurvedSystem(sigma1.T, sigma1.M, N2, curve,
                        WeightedSchurFunction(new_theta, th.xi_plus, new_weight), sigma1.theta_u)


# ---------------------------------------------------------------------------
# serialization


def _mat_to_json(A: np.ndarray) -> list:
    return [[[float(x.real), float(x.imag)] for x in row] for row in np.atleast_2d(A)]


def _mat_from_json(rows, ncols: int | None = None) -> np.ndarray:
    if not rows:
        return np.zeros((0, ncols or 0), dtype=complex)
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)


def system_to_json(sigma: CurvedSystem) -> dict:
    out = {
        "T": _mat_to_json(sigma.T) if sigma.dim else [],
        "M": _mat_to_json(sigma.M) if sigma.dim else [],
        "N": _mat_to_json(sigma.N) if sigma.dim else [],
        "dims": [sigma.dim, sigma.dim_plus, sigma.dim_minus],
        "theta_u": None if sigma.theta_u is None else _mat_to_json(sigma.theta_u),
        "xi": [field_to_json(sigma.xi_plus.field), field_to_json(sigma.xi_minus.field)],
        "curve": sigma.curve.to_json(),
    }
    if sigma.theta is not None:
        out["theta"] = field_to_json(sigma.theta.theta_plus)
    return out


def system_from_json(data: dict) -> CurvedSystem:
    try:
        curve = Curve.from_json(data["curve"])
        d, p, q = data.get("dims", [None, None, None])
        T = _mat_from_json(data["T"])
        d = T.shape[0] if d is None else int(d)
        T = T.reshape(d, d)
        M = _mat_from_json(data["M"], d)
        N = _mat_from_json(data["N"])
        if d == 0:
            M = np.zeros((int(p), 0), dtype=complex)
            N = np.zeros((0, int(q)), dtype=complex)
        theta = None
        if data.get("theta") is not None:
            xp = Weight(field_from_json(data["xi"][0], curve))
            xm = Weight(field_from_json(data["xi"][1], curve))
            theta = WeightedSchurFunction(field_from_json(data["theta"], curve), xp, xm)
        tu = data.get("theta_u")
        tu = None if tu is None else _mat_from_json(tu)
    except (KeyError, TypeError, IndexError) as exc:
        raise ValueError(f"malformed system JSON: {exc}") from exc
    return CurvedSystem(T, M, N, curve, theta, tu)
