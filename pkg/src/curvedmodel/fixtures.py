"""Pinned worked examples and random instance generators.

The worked examples live on ``phi(z) = z + eps z^2`` with
``theta(w) = 2w / (1 + sqrt(1 + 4 eps w))`` (the branch equal to 1 at
``w = 0``, i.e. ``1 + 2 eps z`` in the pullback), which is inner: ``|theta| = 1``
on the curve and ``theta(phi(z)) = z``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coeffspace import Curve, FunctionField, Weight, fit_field
from .config import ModelOrders
from .schur import NCharFn, WeightedSchurFunction
from .system import CurvedSystem

__all__ = [
    "inverse_map_theta",
    "theta_power",
    "u_qr",
    "u_qr_coefficients",
    "u_closed_form",
    "f_basis",
    "projection_formula_check",
    "ProductFixture",
    "product_fixture",
    "blaschke",
    "random_poly_ncharfn",
    "random_weight",
    "theta_chain",
    "projection_facts",
    "u_closed_coefficients",
    "u_qr_table",
    "product_fixture_report",
    "classical_degeneration",
    "product_fixture_documents",
]


def _curve(eps: complex, grid: int | None, K: int) -> Curve:
    grid = 4 * K + 4 if grid is None else grid
    return Curve(eps, grid + grid % 2)


def theta_power(curve: Curve, p: int, K: int | None = None) -> WeightedSchurFunction:
    """``theta**p`` (exactly the basis function ``e_p``) with unit weights."""
    K = max(p, 1) if K is None else K
    return WeightedSchurFunction.unweighted(FunctionField.monomial(curve, K, p))


def inverse_map_theta(eps: complex, grid: int | None = None, K: int = 8,
                tol: float = 1e-10) -> WeightedSchurFunction:
    """``theta`` sampled from its closed form and fitted; checks ``theta(phi(z)) = z``."""
    curve = _curve(eps, grid, K)
    w = curve.zeta
    vals = 2 * w / (1 + np.sqrt(1 + 4 * curve.epsilon * w))
    err = float(np.max(np.abs(vals - curve.z)))
    if err > tol:
        raise ValueError(f"pullback identity fails by {err:.2e}")
    return WeightedSchurFunction.unweighted(fit_field(curve, vals, K, tol=tol))


# ---------------------------------------------------------------------------
# u_{q,r}


def u_qr(eps: complex, q: int, r: int, grid: int = 256) -> FunctionField:
    """``2^{-r} w^{-q} P_- [w^q (1 + sqrt(1 + 4 eps w))^r]`` computed by the Riesz split.

    In the pullback ``(1 + sqrt)/2 = 1 + eps z`` and ``w = z (1 + eps z)``, so the
    bracket is ``z^q (1 + eps z)^{q + r}`` up to the factor ``2^r``.
    """
    K = (grid - 4) // 4
    curve = Curve(eps, grid)
    z = curve.z
    inner = fit_field(curve, z**q * (1 + curve.epsilon * z) ** (q + r), K, tol=np.inf)
    minus = inner.minus()
    vals = curve.zeta ** (-q) * minus.samples[:, 0, 0]
    return fit_field(curve, vals, K, tol=np.inf)


def u_qr_coefficients(eps: complex, q: int, r: int, grid: int = 256, radius: float = 0.3,
                      J: int = 32) -> np.ndarray:
    """Taylor coefficients ``a_k`` of ``u_{q,r}(w) = sum a_k w^k`` (length ``max(-q, 1)``).

    The analytic part of the fitted field is sampled on ``|w| = radius`` and
    transformed; ``u`` is a polynomial of degree ``-q - 1`` for ``q < 0``.
    """
    F = u_qr(eps, q, r, grid)
    w = radius * np.exp(2j * np.pi * np.arange(J) / J)
    vals = F.plus_at(w)[:, 0, 0]
    a = np.fft.fft(vals) / J / radius ** np.arange(J)
    return a[: max(-q, 1)]


def u_closed_form(eps: complex, q: int, r: int, w, printed: bool = True):
    """Closed forms of ``u_{q,r}`` for ``q = -1..-4`` (``printed`` selects the
    displayed ``q = -4`` expression, otherwise the corrected one)."""
    x = eps * np.asarray(w, dtype=complex)
    if q >= 0:
        return np.zeros_like(x)
    if q == -1:
        return np.ones_like(x)
    if q == -2:
        return 1 + r * x
    if q == -3:
        return 0.5 * (2 + 2 * r * x + r * (r - 3) * x**2)
    if q == -4:
        if printed:
            return (2 + 6 * r * x + 3 * r * (r - 3) * x**2 + 3 * r * (r - 4) * (r - 5) * x**3) / 6
        return 1 + r * x + r * (r - 3) / 2 * x**2 + r * (r - 4) * (r - 5) / 6 * x**3
    raise ValueError("closed forms are available for q >= -4 only")


# ---------------------------------------------------------------------------
# f_k^{ij} and the projection formula


def f_basis(curve: Curve, n: int, i: int, j: int, k: int, K: int | None = None) -> FunctionField:
    """``f_k^{ij} = theta^{n-j} w^{-k}`` fitted on ``curve``."""
    if not (1 <= j <= i <= n and 1 <= k <= max(i - j, 1)):
        raise ValueError("indices out of range")
    K = (curve.grid - 4) // 4 if K is None else K
    vals = curve.z ** (n - j) * curve.zeta ** (-k)
    return fit_field(curve, vals, K, tol=1e-9)


def _u_field(curve: Curve, q: int, r: int, K: int) -> np.ndarray:
    """Grid samples of ``u_{q,r}`` for any integer ``r``."""
    z = curve.z
    inner = fit_field(curve, z**q * (1 + curve.epsilon * z) ** (q + r), K, tol=np.inf)
    return curve.zeta ** (-q) * inner.minus().samples[:, 0, 0]


def projection_formula_check(Pi, k: int, l: int, i: int, j: int, p: int) -> float:
    """Sup residual between the model value of ``P_(kl) f_p^{ij}`` and the closed formula.

    ``Pi`` must be the n-model of the chain ``theta, ..., theta`` (unit weights).
    """
    from .nmodel import p_pair

    n = Pi.n
    curve = Pi.curve
    K = (curve.grid - 4) // 4
    f = f_basis(curve, n, i, j, p, K)
    h = p_pair(Pi, k, l).P @ Pi.embed(n, f)
    lhs = Pi.sample_vectors(h)[:, -1, 0]
    th, w = curve.z, curve.zeta
    sq = 1 + 2 * curve.epsilon * curve.z  # sqrt(1 + 4 eps w) on the principal branch
    a = l - j - p
    first = th ** (n - l) * w**a * _u_field(curve, a, j - l, K)
    g = w**a * _u_field(curve, k - j - p, j - k, K) / (1 + sq) ** (l - k)
    gm = fit_field(curve, g, K, tol=np.inf).minus().samples[:, 0, 0]
    second = 2.0 ** (l - k) * th ** (n - l) * gm
    return float(np.max(np.abs(lhs - (first - second))))


# ---------------------------------------------------------------------------
# cascade-product example


@dataclass(frozen=True, eq=False)
class ProductFixture:
    eps: complex
    sigma1: CurvedSystem
    sigma2: CurvedSystem
    sigma3: CurvedSystem
    lhs: dict      # Sigma3.(Sigma2.Sigma1)
    rhs: dict      # (Sigma3.Sigma2).Sigma1
    X: np.ndarray  # X lhs.T = rhs.T X, lhs.M = rhs.M X, X lhs.N = rhs.N


def product_fixture(eps: float, grid: int = 1024, K: int = 48) -> ProductFixture:
    """Scalar systems ``((0),(1),(1))`` over ``theta`` and ``Sigma3`` over ``theta^2``."""
    curve = Curve(eps, grid)
    th = theta_power(curve, 1, K)
    th2 = theta_power(curve, 2, K)
    one = np.ones((1, 1))
    s1 = CurvedSystem(np.zeros((1, 1)), one, one, curve, th)
    s2 = CurvedSystem(np.zeros((1, 1)), one, one, curve, th)
    s3 = CurvedSystem(np.array([[0, 1], [0, 0]]), np.array([[1, 0]]),
                      np.array([[2 * eps], [1]]), curve, th2)
    e = eps
    lhs = {
        "T": np.array([[0, 1, e, 0], [0, 0, 1, 0], [0, 0, 0, 1], [0, 0, 0, 0]], dtype=complex),
        "M": np.array([[1, e, -e**2, 2 * e**3]], dtype=complex),
        "N": np.array([[e**3], [-e**2], [2 * e], [1]], dtype=complex),
    }
    rhs = {
        "T": np.array([[0, 1, e, -e**2], [0, 0, 1, 0], [0, 0, 0, 1], [0, 0, 0, 0]], dtype=complex),
        "M": np.array([[1, e, 0, 0]], dtype=complex),
        "N": lhs["N"].copy(),
    }
    X = np.eye(4, dtype=complex)
    X[0, 2], X[0, 3] = -e**2, 2 * e**3
    return ProductFixture(complex(eps), s1, s2, s3, lhs, rhs, X)


# ---------------------------------------------------------------------------
# generators


def blaschke(curve: Curve, zeros, K: int | None = None) -> WeightedSchurFunction:
    """Disk Blaschke product ``prod (z - a)/(1 - conj(a) z)`` (``epsilon = 0``)."""
    if curve.epsilon != 0:
        raise ValueError("Blaschke products are built on the disk")
    K = (curve.grid - 4) // 4 if K is None else K
    z = curve.z
    vals = np.ones_like(z)
    for a in zeros:
        vals = vals * (z - a) / (1 - np.conj(a) * z)
    return WeightedSchurFunction.unweighted(fit_field(curve, vals, K, tol=1e-9))


def random_weight(curve: Curve, d: int, rng: np.random.Generator, degree: int = 1,
                  floor: float = 0.5, K: int | None = None) -> Weight:
    """``floor I + sum |a_j e_j|^2``-type positive weight, a trigonometric polynomial in ``z``."""
    K = (curve.grid - 4) // 4 if K is None else K
    z = curve.z
    vals = np.broadcast_to(floor * np.eye(d), (curve.grid, d, d)).astype(complex)
    P = np.zeros((curve.grid, d, d), dtype=complex)
    for j in range(degree + 1):
        C = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2 * d * (degree + 1))
        P = P + z[:, None, None] ** j * C
    vals = vals + np.conj(np.swapaxes(P, 1, 2)) @ P
    return Weight(fit_field(curve, vals, K, tol=np.inf))


def _random_poly(curve: Curve, p: int, q: int, deg: int, rng: np.random.Generator, K: int) -> FunctionField:
    c = np.zeros((2 * K + 1, p, q), dtype=complex)
    for j in range(deg + 1):
        c[K + j] = (rng.standard_normal((p, q)) + 1j * rng.standard_normal((p, q))) / np.sqrt(2)
    F = FunctionField(curve, c)
    scale = F.sup_norm()
    return FunctionField(curve, c / scale) if scale > 0 else F


def random_poly_ncharfn(rng: np.random.Generator, n: int, dims, eps: complex,
                        orders: ModelOrders | None = None, deg: int | None = None,
                        weighted: bool = True, floor: float = 0.2) -> NCharFn:
    """Random n-characteristic function with polynomial factors in ``theta``.

    Factors have degree at most ``orders.step``; weights are built downward,
    ``Xi_k = Theta^* Xi_{k+1} Theta + D_k`` with ``D_k >= floor I``, so every
    factor is contractive by construction (also with unit top weight).
    """
    orders = ModelOrders() if orders is None else orders
    deg = orders.step if deg is None else min(deg, orders.step)
    dims = list(dims)
    if len(dims) != n:
        raise ValueError("need one dimension per index")
    grid = orders.grid_for(n)
    curve = Curve(eps, grid)
    K = (grid - 4) // 4
    factors = [_random_poly(curve, dims[k + 1], dims[k], int(rng.integers(0, deg + 1)), rng, K)
               for k in range(n - 1)]
    if weighted:
        top = random_weight(curve, dims[-1], rng, degree=1, floor=0.5, K=K)
    else:
        top = Weight.identity(curve, dims[-1], K)
    weights = [top]
    for k in range(n - 2, -1, -1):
        T = factors[k].samples
        Xi = np.conj(np.swapaxes(T, 1, 2)) @ weights[0].samples @ T
        Dk = rng.standard_normal((dims[k], dims[k])) + 1j * rng.standard_normal((dims[k], dims[k]))
        Dk = Dk @ Dk.conj().T / dims[k] * 0.5 + floor * np.eye(dims[k])
        weights.insert(0, Weight(fit_field(curve, Xi + Dk, K, tol=np.inf)))
    return NCharFn(tuple(weights), tuple(factors))


# ---------------------------------------------------------------------------
# theta chains and the projection facts


def theta_chain(eps: complex, n: int, orders: ModelOrders | None = None) -> NCharFn:
    """``Theta_ij = theta^{i-j}`` with unit weights on a grid sized for ``orders``."""
    orders = ModelOrders() if orders is None else orders
    curve = Curve(eps, orders.grid_for(n))
    K = (curve.grid - 4) // 4
    th = FunctionField.monomial(curve, K, 1)
    return NCharFn(tuple(Weight.identity(curve, 1, K) for _ in range(n)), (th,) * (n - 1))


def projection_facts(eps: complex, orders: ModelOrders | None = None) -> dict:
    """Projection identities of the theta chain.

    Default orders come from :meth:`ModelOrders.for_epsilon`.
    n = 5: relative errors of ``P_(21) f_1^{53} = -eps^2 f_1^{21}`` and
    ``P_(21) f_2^{53} = 2 eps^3 f_1^{21}``.  n = 3: distance of ``K_(21)``
    from ``K_(31)`` (zero), distance of ``K_(32)`` from ``K_(31)`` (positive)
    and the gap between ``K_(32) + K_(21)`` and ``K_(31)`` (positive).
    """
    from .nmodel import build_model, k_subspace, p_pair, subspace_gap

    orders = ModelOrders.for_epsilon(eps) if orders is None else orders
    out: dict = {}
    Pi = build_model(theta_chain(eps, 5, orders), orders)
    curve = Pi.curve
    K = (curve.grid - 4) // 4
    g = Pi.embed(5, f_basis(curve, 5, 2, 1, 1, K))
    P21 = p_pair(Pi, 2, 1).P
    for p, c in ((1, -eps**2), (2, 2 * eps**3)):
        h = P21 @ Pi.embed(5, f_basis(curve, 5, 5, 3, p, K))
        # relative to the expected vector; at eps = 0 it vanishes, so use |g|
        scale = np.linalg.norm(c * g) if c != 0 else np.linalg.norm(g)
        out[f"P21_f{p}_53"] = float(np.linalg.norm(h - c * g) / scale)
    Pi3 = build_model(theta_chain(eps, 3, orders), orders)
    K21, K31, K32 = (k_subspace(Pi3, i, j) for i, j in ((2, 1), (3, 1), (3, 2)))
    out["dims"] = [K21.dim, K31.dim, K32.dim]
    out["K21_in_K31"] = K31.contains(K21)
    out["K32_from_K31"] = K31.contains(K32)
    out["sum_vs_K31"] = subspace_gap(K32.join(K21), K31)
    return out


# ---------------------------------------------------------------------------
# conformance reports


def u_closed_coefficients(eps: complex, q: int, r: int, printed: bool = True) -> np.ndarray:
    """Taylor coefficients of the closed form (a polynomial of degree ``-q - 1``)."""
    deg = max(-q, 1)
    J = 2 * deg + 2
    w = np.exp(2j * np.pi * np.arange(J) / J)
    a = np.fft.fft(u_closed_form(eps, q, r, w, printed)) / J
    return a[:deg]


def u_qr_table(eps: complex, qs=(-1, -2, -3, -4), rs=range(6), grid: int = 256) -> dict:
    """Coefficient errors of the numeric ``u_{q,r}`` against the printed and corrected forms."""
    out = {"printed": {}, "corrected": {}}
    for q in qs:
        for r in rs:
            a = u_qr_coefficients(eps, q, r, grid)
            for key, printed in (("printed", True), ("corrected", False)):
                out[key][(q, r)] = float(np.max(np.abs(a - u_closed_coefficients(eps, q, r, printed))))
    return out


def product_fixture_report(eps: float, grid: int = 1024, K: int = 48) -> dict:
    """Product fixture residuals: both associations, the witness ``X`` and its uniqueness."""
    from .system import associator, coupling_convergence, product

    fx = product_fixture(eps, grid, K)
    inner = product(fx.sigma2, fx.sigma1)
    lhs, rhs, wit, equal = associator(fx.sigma1, fx.sigma2, fx.sigma3)

    def err(S, ref):
        return max(float(np.max(np.abs(getattr(S, k) - ref[k]))) for k in ("T", "M", "N"))

    diff = max(float(np.max(np.abs(getattr(lhs, k) - getattr(rhs, k)))) for k in ("T", "M", "N"))
    conv = [coupling_convergence(fx.sigma2, fx.sigma1), coupling_convergence(fx.sigma3, inner)]
    return {
        "lhs_error": err(lhs, fx.lhs),
        "rhs_error": err(rhs, fx.rhs),
        "association_difference": diff,
        "witness_found": wit is not None,
        "witness_error": float(np.max(np.abs(wit.X - fx.X))) if wit is not None else float("inf"),
        "witness_unique": bool(wit.unique) if wit is not None else False,
        "exactly_equal": bool(equal),
        "coupling_change": max(max(c["M_coupling"], c["N_coupling"]) for c in conv),
    }


def classical_degeneration(rng: np.random.Generator, count: int = 20,
                           orders: ModelOrders | None = None) -> dict:
    """Disk (``epsilon = 0``) limit on random unitary colligation pairs.

    The product couplings must equal ``L1 M2`` and ``N1 L2`` (``L = theta(0)^*``)
    and every ``q_{k+-}`` of the model of ``theta2 theta1`` must be Hermitian.
    """
    from .nmodel import build_model, q_projection
    from .schur import compose_ncharfn
    from .system import product, random_colligation

    orders = ModelOrders(4, 16, 4) if orders is None else orders
    cerr = asym = 0.0
    for _ in range(count):
        p = int(rng.integers(1, 3))
        s1 = random_colligation(int(rng.integers(1, 4)), p, rng)
        s2 = random_colligation(int(rng.integers(1, 4)), p, rng)
        s21 = product(s2, s1)
        L1 = s1.theta.theta_plus.coeff(0).conj().T
        L2 = s2.theta.theta_plus.coeff(0).conj().T
        d1 = s1.dim
        cerr = max(cerr, float(np.max(np.abs(s21.M[:, d1:] - L1 @ s2.M))),
                   float(np.max(np.abs(s21.N[:d1] - s1.N @ L2))))
        Pi = build_model(compose_ncharfn([s1.theta, s2.theta]), orders)
        for k in range(1, Pi.n + 1):
            for sign in "+-":
                q = q_projection(Pi, k, sign).P
                asym = max(asym, float(np.max(np.abs(q - q.conj().T))))
    return {"coupling_error": cerr, "projection_asymmetry": asym}


def product_fixture_documents(eps: float, grid: int = 1024, K: int = 48) -> dict:
    """System JSON documents ``sigma1``, ``sigma2``, ``sigma3`` and the expected products."""
    from .system import system_to_json

    fx = product_fixture(eps, grid, K)

    def cm(A):
        return [[[float(x.real), float(x.imag)] for x in row] for row in np.atleast_2d(A)]

    return {
        "sigma1": system_to_json(fx.sigma1),
        "sigma2": system_to_json(fx.sigma2),
        "sigma3": system_to_json(fx.sigma3),
        "expected": {"right_grouping": {k: cm(v) for k, v in fx.lhs.items()},
                     "left_grouping": {k: cm(v) for k, v in fx.rhs.items()},
                     "X": cm(fx.X)},
    }
