"""Functional n-models on the curve, their projection algebra and model systems.

A model is stored through whitened fibre embeddings.  At a node ``zeta`` the
embedding ``Pi_k(zeta)`` maps ``N_k`` into a block space made of one block per
non-vanishing defect ``Delta_m`` (``k <= m < n``) and a final block for
``N_n``:

    block m = Delta_m Theta_mk(zeta),     block n = Theta_nk(zeta).

This realizes the downward recursion ``pi_k = pi_{k+1} Theta_{k+1,k} + nu_k Delta_k``.
Block ``m`` carries the ``Xi_m`` geometry, so after multiplying by
``sqrt(w) W^{1/2}`` every inner product becomes Euclidean.  A coefficient vector
of ``V_k`` (orders ``[-neg, pos + (k-1) step]``) is sampled, pushed through
``Pi_k`` and the joint span of all such images is the (discrete, truncated)
ambient space with an orthonormal basis, hence Gram matrix ``I``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from .coeffspace import (Curve, FunctionField, Weight, basis_pullback, contour_functional,
                         fit_field, outer_factor_scalar)
from .config import DEFAULT_TOL, ModelOrders
from .schur import NCharFn, herm_roots
from .system import CurvedSystem

__all__ = [
    "NModel",
    "ModelProjection",
    "Subspace",
    "ModelSystem",
    "build_model",
    "model_charfn",
    "q_projection",
    "span_projection",
    "p_pair",
    "p_bracket",
    "low_order_range",
    "k_subspace",
    "orthogonal_counterparts",
    "model_system",
    "unitary_residual",
    "observability_kernel",
    "fiber_unitary_dims",
    "subspace_gap",
    "check_invariants",
    "lemma_suite",
    "model_to_json",
    "model_from_json",
]


# ---------------------------------------------------------------------------
# subspaces


def _range_basis(A: np.ndarray, tol: float) -> np.ndarray:
    if A.size == 0:
        return np.zeros((A.shape[0], 0), dtype=complex)
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    return U[:, s > tol * max(1.0, s[0] if len(s) else 0.0)]


@dataclass(frozen=True, eq=False)
class Subspace:
    """Subspace of the ambient space held by an orthonormal basis (Gram = I)."""

    basis: np.ndarray

    @classmethod
    def span(cls, A: np.ndarray, tol: float | None = None) -> "Subspace":
        tol = DEFAULT_TOL.rank if tol is None else tol
        return cls(_range_basis(np.asarray(A, dtype=complex), tol))

    @classmethod
    def zero(cls, D: int) -> "Subspace":
        return cls(np.zeros((D, 0), dtype=complex))

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def ambient(self) -> int:
        return self.basis.shape[0]

    @cached_property
    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T

    def contains(self, other: "Subspace") -> float:
        """Largest distance of a unit vector of ``other`` from this subspace (0 = contained)."""
        if other.dim == 0:
            return 0.0
        R = other.basis - self.basis @ (self.basis.conj().T @ other.basis)
        return float(np.linalg.norm(R, 2))

    def join(self, other: "Subspace", tol: float | None = None) -> "Subspace":
        return Subspace.span(np.hstack([self.basis, other.basis]), tol)

    def complement(self, tol: float | None = None) -> "Subspace":
        """Orthogonal complement inside the ambient space."""
        tol = DEFAULT_TOL.rank if tol is None else tol
        D = self.ambient
        if self.dim == 0:
            return Subspace(np.eye(D, dtype=complex))
        U, s, _ = np.linalg.svd(self.basis, full_matrices=True)
        r = int(np.sum(s > tol))
        return Subspace(U[:, r:])

    def intersect(self, other: "Subspace", tol: float | None = None) -> "Subspace":
        tol = DEFAULT_TOL.rank if tol is None else tol
        if self.dim == 0 or other.dim == 0:
            return Subspace.zero(self.ambient)
        # principal vectors with cosine 1
        U, s, _ = np.linalg.svd(self.basis.conj().T @ other.basis)
        k = int(np.sum(s > 1 - tol))
        return Subspace(self.basis @ U[:, :k])


def subspace_gap(a: Subspace, b: Subspace) -> float:
    """Operator-norm distance between the two orthoprojections."""
    return float(np.linalg.norm(a.projector - b.projector, 2))


@dataclass(frozen=True, eq=False)
class ModelProjection:
    """Projection matrix on the ambient space with its kind and indices."""

    P: np.ndarray
    kind: str
    index: tuple = ()

    @cached_property
    def idempotency(self) -> float:
        return float(np.max(np.abs(self.P @ self.P - self.P), initial=0.0))

    def range(self, tol: float | None = None) -> Subspace:
        return Subspace.span(self.P, tol)

    @property
    def rank(self) -> int:
        return self.range().dim

    def __matmul__(self, other):
        if isinstance(other, ModelProjection):
            return self.P @ other.P
        return self.P @ other


# ---------------------------------------------------------------------------
# the model


@dataclass(frozen=True, eq=False)
class NModel:
    """Discrete functional n-model.

    ``fibers[k]`` are whitened fibre embeddings, shape ``(M, Dblk, d_k)``;
    ``basis`` is the orthonormal basis of the joint span of the sampled images
    and ``embeddings[k] = basis^H R_k`` are the coordinates of ``pi_k``.
    """

    curve: Curve
    orders: ModelOrders
    fibers: tuple
    basis: np.ndarray
    embeddings: tuple
    blocks: tuple = ()
    weights: tuple | None = None
    tol: float = DEFAULT_TOL.span
    _cache: dict = field(default_factory=dict, repr=False)

    # -- construction --------------------------------------------------
    @classmethod
    def from_fibers(cls, curve: Curve, fibers, orders: ModelOrders, blocks=(), weights=None,
                    span_tol: float | None = None) -> "NModel":
        span_tol = DEFAULT_TOL.span if span_tol is None else span_tol
        fibers = tuple(np.asarray(f, dtype=complex) for f in fibers)
        n = len(fibers)
        M = curve.grid
        if M < orders.grid_for(n):
            raise ValueError(f"grid {M} too small for orders {orders} (need {orders.grid_for(n)})")
        sw = np.sqrt(curve.arc_weights)
        R = []
        for k, F in enumerate(fibers, start=1):
            B = basis_pullback(curve.epsilon, curve.z, -orders.neg, orders.upper(k))
            A = sw[:, None, None] * F
            Rk = np.einsum("mal,mj->majl", A, B).reshape(M * F.shape[1], -1)
            R.append(Rk)
        allR = np.hstack(R)
        U, s, _ = np.linalg.svd(allR, full_matrices=False)
        keep = s > span_tol * s[0]
        Ub = U[:, keep]
        emb = tuple(Ub.conj().T @ Rk for Rk in R)
        return cls(curve, orders, fibers, Ub, emb, tuple(blocks), weights, span_tol)

    # -- shapes --------------------------------------------------------
    @property
    def n(self) -> int:
        return len(self.fibers)

    @property
    def D(self) -> int:
        return self.basis.shape[1]

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(F.shape[2] for F in self.fibers)

    @property
    def block_dim(self) -> int:
        return self.fibers[0].shape[1]

    def orders_of(self, k: int) -> np.ndarray:
        """Basis index of every column of ``embeddings[k-1]``."""
        ks = np.arange(-self.orders.neg, self.orders.upper(k) + 1)
        return np.repeat(ks, self.dims[k - 1])

    def pi(self, k: int) -> np.ndarray:
        return self.embeddings[k - 1]

    def gram_k(self, k: int) -> np.ndarray:
        key = ("G", k)
        if key not in self._cache:
            P = self.pi(k)
            self._cache[key] = P.conj().T @ P
        return self._cache[key]

    def pi_dag(self, k: int) -> np.ndarray:
        """Adjoint of ``pi_k`` against the weighted coefficient geometry: ``G_k^{-1} Pi_k^H``."""
        key = ("dag", k)
        if key not in self._cache:
            G = self.gram_k(k)
            self._cache[key] = sla.cho_solve(sla.cho_factor(G), self.pi(k).conj().T)
        return self._cache[key]

    def pp_dag(self, k: int) -> np.ndarray:
        """``pi_k pi_k^dag``: orthoprojection onto ``Ran pi_k``."""
        key = ("ppd", k)
        if key not in self._cache:
            self._cache[key] = self.pi(k) @ self.pi_dag(k)
        return self._cache[key]

    def coeff_vector(self, k: int, F: FunctionField) -> np.ndarray:
        """Coefficients of an ``N_k``-valued field (one column per field column) in ``V_k``."""
        if F.rows != self.dims[k - 1]:
            raise ValueError("field dimension does not match N_k")
        ks = np.arange(-self.orders.neg, self.orders.upper(k) + 1)
        c = np.stack([F.coeff(j) for j in ks])  # (nb, d, q)
        return c.reshape(-1, F.cols)

    def field_of(self, k: int, x: np.ndarray) -> FunctionField:
        """Field of ``N_k``-valued functions from ``V_k`` coefficient columns."""
        x = np.asarray(x).reshape(len(self.orders_of(k)), -1)
        d = self.dims[k - 1]
        lo, hi = self.orders.neg, self.orders.upper(k)
        K = max(lo, hi)
        c = np.zeros((2 * K + 1, d, x.shape[1]), dtype=complex)
        c[K - lo : K + hi + 1] = x.reshape(lo + hi + 1, d, x.shape[1])
        return FunctionField(self.curve, c)

    def embed(self, k: int, F: FunctionField) -> np.ndarray:
        """Ambient vector(s) of ``pi_k F``."""
        return self.pi(k) @ self.coeff_vector(k, F)

    def sample_vectors(self, h: np.ndarray) -> np.ndarray:
        """Whitened fibre samples of ambient vectors, shape ``(M, Dblk, cols)``."""
        h = np.asarray(h).reshape(self.D, -1)
        S = (self.basis @ h).reshape(self.curve.grid, self.block_dim, -1)
        return S / np.sqrt(self.curve.arc_weights)[:, None, None]

    # -- multiplication by zeta ------------------------------------------
    @cached_property
    def _zeta_full(self) -> np.ndarray:
        return np.repeat(self.curve.zeta, self.block_dim)

    @cached_property
    def U(self) -> np.ndarray:
        """Compression of multiplication by ``zeta`` to the ambient space."""
        return self.basis.conj().T @ (self._zeta_full[:, None] * self.basis)

    @cached_property
    def U_loss(self) -> np.ndarray:
        """Per basis vector: norm of the part of ``zeta h`` leaving the ambient space."""
        Z = self._zeta_full[:, None] * self.basis
        return np.linalg.norm(Z - self.basis @ (self.basis.conj().T @ Z), axis=0)

    def zeta_matrix(self, k: int) -> np.ndarray:
        """Multiplication by ``zeta`` on ``V_k`` coefficients (top two orders overflow)."""
        key = ("Z", k)
        if key not in self._cache:
            lo, hi = self.orders.neg, self.orders.upper(k)
            nb = lo + hi + 1
            K = max(lo, hi) + 2
            c = self.curve if self.curve.grid >= 4 * K + 4 else self.curve.with_grid(4 * K + 4)
            B = basis_pullback(c.epsilon, c.z, -lo, hi)
            cols = []
            for j in range(nb):
                Fz = fit_field(c, c.zeta * B[:, j], K, tol=np.inf)
                cols.append([Fz.coeff(i)[0, 0] for i in range(-lo, hi + 1)])
            Z1 = np.array(cols).T
            self._cache[key] = np.kron(Z1, np.eye(self.dims[k - 1]))
        return self._cache[key]

    def interior(self, k: int, margin: int = 2) -> np.ndarray:
        """Column mask of ``V_k`` excluding the top ``margin`` orders."""
        return self.orders_of(k) <= self.orders.upper(k) - margin


def _weight_samples(w: Weight, curve: Curve) -> np.ndarray:
    return w.samples_on(curve)


def build_model(N: NCharFn, orders: ModelOrders | None = None, tol: float | None = None,
                span_tol: float | None = None) -> NModel:
    """Model of an n-characteristic function via whitened fibre embeddings."""
    tol = DEFAULT_TOL.rank if tol is None else tol
    orders = ModelOrders() if orders is None else orders
    n = N.n
    grid = max(N.curve.grid, orders.grid_for(n))
    curve = Curve(N.curve.epsilon, grid)
    dims = N.dims
    M = grid
    Xi = [_weight_samples(w, curve) for w in N.weights]
    roots = [herm_roots(X) for X in Xi]

    # Theta_mk samples for m >= k
    fac = [F.samples_on(curve) for F in N.factors]

    def theta(m: int, k: int) -> np.ndarray:
        out = np.broadcast_to(np.eye(dims[k - 1], dtype=complex), (M, dims[k - 1], dims[k - 1]))
        for t in range(k, m):
            out = fac[t - 1] @ out
        return np.array(out)

    # defect roots H_m^{1/2} in the whitened frame of Xi_m
    defect = {}
    blocks = []
    for m in range(1, n):
        Tt = roots[m][0] @ fac[m - 1] @ roots[m - 1][1]
        H = np.eye(dims[m - 1]) - np.conj(np.swapaxes(Tt, 1, 2)) @ Tt
        H = 0.5 * (H + np.conj(np.swapaxes(H, 1, 2)))
        w, V = np.linalg.eigh(H)
        w = np.where(w > tol, w, 0.0)
        if not np.any(w > 0):
            continue
        root = (V * np.sqrt(w)[:, None, :]) @ np.conj(np.swapaxes(V, 1, 2))
        defect[m] = root
        blocks.append((m, dims[m - 1]))
    blocks.append((n, dims[n - 1]))
    Dblk = sum(b for _, b in blocks)

    fibers = []
    for k in range(1, n + 1):
        F = np.zeros((M, Dblk, dims[k - 1]), dtype=complex)
        off = 0
        for m, size in blocks:
            if m >= k:
                blk = roots[m - 1][0] @ theta(m, k)
                if m < n:
                    blk = defect[m] @ blk
                F[:, off : off + size] = blk
            off += size
        fibers.append(F)
    return NModel.from_fibers(curve, fibers, orders, tuple(blocks), tuple(N.weights), span_tol)


def model_charfn(Pi: NModel) -> NCharFn:
    """Characteristic function ``Theta_ij = pi_i^dag pi_j`` and weights ``pi_k^* pi_k``."""
    curve = Pi.curve
    factors = []
    for k in range(1, Pi.n):
        cols = Pi.orders_of(k)
        d = Pi.dims[k - 1]
        const = np.zeros((len(cols), d), dtype=complex)
        const[cols == 0] = np.eye(d)
        x = Pi.pi_dag(k + 1) @ (Pi.pi(k) @ const)
        factors.append(Pi.field_of(k + 1, x))
    weights = []
    sw = curve.arc_weights
    for k in range(1, Pi.n + 1):
        lo, hi = Pi.orders.neg, Pi.orders.upper(k)
        d = Pi.dims[k - 1]
        B = basis_pullback(curve.epsilon, curve.z, -lo, hi)
        G0 = np.kron((B.conj().T * sw) @ B, np.eye(d))
        cols = Pi.orders_of(k)
        const = np.zeros((len(cols), d), dtype=complex)
        const[cols == 0] = np.eye(d)
        x = np.linalg.solve(G0, Pi.gram_k(k) @ const)
        weights.append(Weight(Pi.field_of(k, x)))
    return NCharFn(tuple(weights), tuple(factors))


# ---------------------------------------------------------------------------
# projections


def q_projection(Pi: NModel, i: int, sign: str) -> ModelProjection:
    """``q_{i+-} = pi_i P_+- pi_i^dag``."""
    if sign not in "+-" or len(sign) != 1:
        raise ValueError("sign must be '+' or '-'")
    key = ("q", i, sign)
    if key not in Pi._cache:
        mask = Pi.orders_of(i) >= 0 if sign == "+" else Pi.orders_of(i) < 0
        P = Pi.pi(i)[:, mask] @ Pi.pi_dag(i)[mask]
        Pi._cache[key] = ModelProjection(P, "q" + sign, (i,))
    return Pi._cache[key]


def span_projection(Pi: NModel, i: int, j: int) -> ModelProjection:
    """Orthoprojection onto ``Ran pi_j v ... v Ran pi_i`` (``i >= j``)."""
    if not 1 <= j <= i <= Pi.n:
        raise ValueError(f"invalid index pair ({i}, {j})")
    key = ("span", i, j)
    if key not in Pi._cache:
        if i == j:
            P = Pi.pp_dag(i)
        else:
            Q = _range_basis(np.hstack([Pi.pi(k) for k in range(j, i + 1)]), Pi.tol)
            P = Q @ Q.conj().T
        Pi._cache[key] = ModelProjection(P, "span", (i, j))
    return Pi._cache[key]


def p_pair(Pi: NModel, i: int, j: int) -> ModelProjection:
    """``P_(ij) = P_span (I - q_{j+}) (I - q_{i-})``."""
    key = ("P", i, j)
    if key not in Pi._cache:
        I = np.eye(Pi.D)
        P = span_projection(Pi, i, j).P @ (I - q_projection(Pi, j, "+").P) @ (I - q_projection(Pi, i, "-").P)
        Pi._cache[key] = ModelProjection(P, "P()", (i, j))
    return Pi._cache[key]


def p_bracket(Pi: NModel, chain) -> ModelProjection:
    """``P_[m_N m_1]`` from the ascending chain ``m_1 <= ... <= m_N`` by the recursion."""
    chain = [int(c) for c in chain]
    if len(chain) < 2 or any(b < a for a, b in zip(chain, chain[1:])):
        raise ValueError("chain must be ascending with at least two entries")
    if chain[0] < 1 or chain[-1] > Pi.n:
        raise ValueError("chain index out of range")
    I = np.eye(Pi.D)
    P = p_pair(Pi, chain[1], chain[0]).P
    for a, b in zip(chain[1:], chain[2:]):
        Q = p_pair(Pi, b, a).P
        P = P @ (I - Q) + Q
    return ModelProjection(P, "P[]", tuple(chain))


def low_order_range(Pi: NModel, P: np.ndarray, cut: int | None = None,
                    tol: float | None = None) -> Subspace:
    """Range of ``P`` on the low-order part of the ambient space.

    The truncated ambient space has edge directions at the top orders which
    ``pi_1`` never reaches; images of vectors of order at most ``cut``
    (default ``pos - 2``) avoid them.
    """
    cut = Pi.orders.pos - 2 if cut is None else cut
    low = np.hstack([Pi.pi(k)[:, Pi.orders_of(k) <= cut] for k in range(1, Pi.n + 1)])
    return Subspace.span(P @ low, tol)


def k_subspace(Pi: NModel, i: int, j: int, cut: int | None = None) -> Subspace:
    """``K_(ij) = Ran P_(ij)`` (low-order range)."""
    return low_order_range(Pi, p_pair(Pi, i, j).P, cut)


def orthogonal_counterparts(Pi: NModel, i: int, check_outer: bool = True):
    """``(pi'_i, q'_{i+}, q'_{i-})`` with the orthogonal projections onto ``Ran q_{i+}``.

    ``pi'_i = pi_i chi^{-1}`` (``chi`` the outer factor of the scalar weight)
    is returned as an ambient matrix on the analytic-plus-coanalytic basis
    of ``V_i``; with ``check_outer`` its range is verified against ``Ran pi_i``.
    """
    if Pi.dims[i - 1] != 1:
        raise ValueError("orthogonal counterparts need a scalar weight (outer factor is scalar only)")
    qp = q_projection(Pi, i, "+")
    Qp = _range_basis(qp.P, Pi.tol)
    Pp = Qp @ Qp.conj().T
    qm = Pi.pp_dag(i) - Pp
    pi_prime = None
    if check_outer and Pi.weights is not None:
        w = Pi.weights[i - 1]
        chi = outer_factor_scalar(Weight(fit_field(Pi.curve, w.samples_on(Pi.curve), w.field.order,
                                                   tol=np.inf)))
        lo, hi = Pi.orders.neg, Pi.orders.upper(i)
        B = basis_pullback(Pi.curve.epsilon, Pi.curve.z, -lo, hi)
        vals = B / chi.samples[:, 0, 0][:, None]
        sw = np.sqrt(Pi.curve.arc_weights)
        R = np.einsum("mal,mj->majl", sw[:, None, None] * Pi.fibers[i - 1], vals).reshape(
            Pi.curve.grid * Pi.block_dim, -1)
        pi_prime = Pi.basis.conj().T @ R
    return pi_prime, ModelProjection(Pp, "q'+", (i,)), ModelProjection(qm, "q'-", (i,))


# ---------------------------------------------------------------------------
# model system and the unitary residual


@dataclass(frozen=True, eq=False)
class ModelSystem:
    system: CurvedSystem
    basis: np.ndarray          # ambient basis of K_Theta (orthonormal columns)
    P_theta: np.ndarray
    loss: float                # how far T^ K leaves K (truncation)


def model_system(Pi: NModel, cut: int | None = None) -> ModelSystem:
    """``(T^, M^, N^)`` on ``K_Theta = Ran (I - q_{1+})(I - q_{n-})``.

    ``K_Theta`` is taken as the image of the low-order part of the ambient
    space (orders up to ``cut``, default ``pos - 2``): the top orders of the
    truncated ambient space are not reached by ``pi_1`` and would otherwise
    leak into the range as spurious edge directions.
    """
    n = Pi.n
    if n < 2:
        raise ValueError("model system needs at least two embeddings")
    cut = Pi.orders.pos - 2 if cut is None else cut
    I = np.eye(Pi.D)
    q1p = q_projection(Pi, 1, "+").P
    qnm = q_projection(Pi, n, "-").P
    P = (I - q1p) @ (I - qnm)
    low = np.hstack([Pi.pi(k)[:, Pi.orders_of(k) <= cut] for k in range(1, n + 1)])
    Q = _range_basis(P @ low, np.sqrt(DEFAULT_TOL.rank) * 1e-2)

    d1, dn = Pi.dims[0], Pi.dims[-1]
    ks1 = Pi.orders_of(1)
    row = np.zeros((d1, len(ks1)), dtype=complex)
    cf = contour_functional(Pi.curve.epsilon, -Pi.orders.neg, Pi.orders.upper(1))
    for col, kk in enumerate(ks1):
        row[col % d1, col] = cf[kk + Pi.orders.neg]
    Mhat = row @ Pi.pi_dag(1) @ Q

    ksn = Pi.orders_of(n)
    const_n = np.zeros((len(ksn), dn), dtype=complex)
    const_n[ksn == 0] = np.eye(dn)
    Nhat = Q.conj().T @ P @ Pi.pi(n) @ const_n

    const_1 = np.zeros((len(ks1), d1), dtype=complex)
    const_1[ks1 == 0] = np.eye(d1)
    TQ = Pi.U @ Q - Pi.pi(1) @ const_1 @ Mhat
    That = Q.conj().T @ TQ
    loss = float(np.linalg.norm(TQ - Q @ That, 2)) if Q.shape[1] else 0.0

    curve = Pi.curve
    theta = None
    if n == 2:
        from .schur import WeightedSchurFunction

        N = model_charfn(Pi)
        if Pi.weights is not None:
            theta = WeightedSchurFunction(N.factors[0], Pi.weights[0], Pi.weights[1])
        else:
            theta = WeightedSchurFunction(N.factors[0], N.weights[0], N.weights[1])
    sys = CurvedSystem(That, Mhat, Nhat, curve, theta)
    return ModelSystem(sys, Q, P, loss)


def observability_kernel(Pi: NModel, cut: int | None = None, margin: int | None = None,
                         tol: float = 1e-6) -> Subspace:
    """``{f in K_Theta : pi_1^dag f = 0, pi_n^dag f = 0}`` on low-order vectors.

    By the resolvent formula of the model system, ``-M^(T^ - z)^{-1} f`` is
    ``Theta(z)^{-1} (pi_n^dag f)(z)`` in ``G_+`` and ``(pi_1^dag f)(z)`` in
    ``G_-``, so this is the unobservable subspace.  Intermediate embeddings
    contribute coefficient vectors of orders in ``[margin - neg, cut]``: their
    lowest orders are not reached by the truncated end embeddings and would
    show up as spurious kernel directions.
    """
    n = Pi.n
    cut = Pi.orders.pos - Pi.orders.step - 2 if cut is None else cut
    margin = Pi.orders.step if margin is None else margin
    I = np.eye(Pi.D)
    P = (I - q_projection(Pi, 1, "+").P) @ (I - q_projection(Pi, n, "-").P)
    cols = []
    for k in range(1, n + 1):
        ks = Pi.orders_of(k)
        lo = -Pi.orders.neg if k in (1, n) else margin - Pi.orders.neg
        cols.append(Pi.pi(k)[:, (ks >= lo) & (ks <= cut)])
    S = Subspace.span(P @ np.hstack(cols))
    if not S.dim:
        return S
    A = np.vstack([Pi.pi_dag(1) @ S.basis, Pi.pi_dag(n) @ S.basis])
    _, s, Vh = np.linalg.svd(A, full_matrices=True)
    r = int(np.sum(s > tol * max(1.0, s[0] if len(s) else 0.0)))
    return Subspace(S.basis @ Vh[r:].conj().T)


def unitary_residual(Pi: NModel, tol: float | None = None) -> Subspace:
    """Orthogonal complement of ``Ran pi_1 v Ran pi_n`` in the (discrete) ambient space."""
    tol = DEFAULT_TOL.rank if tol is None else tol
    S = Subspace.span(np.hstack([Pi.pi(1), Pi.pi(Pi.n)]), tol)
    return S.complement(tol)


def fiber_unitary_dims(Pi: NModel, tol: float | None = None) -> np.ndarray:
    """Per node: ``rank[all Pi_k(zeta)] - rank[Pi_1(zeta), Pi_n(zeta)]``.

    The unitary residual is a space of functions whose fibre at ``zeta`` is
    the complement of ``Ran Pi_1(zeta) v Ran Pi_n(zeta)``; it vanishes iff this
    count is zero at almost every node.
    """
    tol = DEFAULT_TOL.rank if tol is None else tol
    out = np.zeros(Pi.curve.grid, dtype=int)
    for m in range(Pi.curve.grid):
        allF = np.hstack([F[m] for F in Pi.fibers])
        ends = np.hstack([Pi.fibers[0][m], Pi.fibers[-1][m]])
        r_all = np.linalg.matrix_rank(allF, tol=np.sqrt(tol))
        r_end = np.linalg.matrix_rank(ends, tol=np.sqrt(tol))
        out[m] = r_all - r_end
    return out


# ---------------------------------------------------------------------------
# verification helpers


def check_invariants(Pi: NModel) -> dict:
    """Residuals of the model axioms on interior coefficient columns.

    ``intertwine`` and ``min_gram_eig`` cover axiom (i), ``analytic`` axiom
    (ii), ``cocycle`` axiom (iii) and ``rank_deficit`` axiom (iv).  The index
    pattern of each worst residual is stored under ``where``.
    """
    n = Pi.n
    acc: dict = {}
    min_eig, at_eig = np.inf, (1,)
    for k in range(1, n + 1):
        ev = np.linalg.eigvalsh(Pi.gram_k(k))
        if ev.min() < min_eig:
            min_eig, at_eig = float(ev.min()), (k,)
        inner = Pi.interior(k)
        Z = Pi.zeta_matrix(k)
        _worst(acc, "intertwine", Pi.U @ Pi.pi(k)[:, inner] - Pi.pi(k) @ Z[:, inner], (k,))
    for i in range(1, n + 1):
        for j in range(1, i + 1):
            Tij = Pi.pi_dag(i) @ Pi.pi(j)
            neg_i = Pi.orders_of(i) < 0
            pos_j = Pi.orders_of(j) >= 0
            _worst(acc, "analytic", Tij[np.ix_(neg_i, pos_j)], (i, j))
            for k in range(1, j + 1):
                _worst(acc, "cocycle", Pi.pi_dag(i) @ Pi.pi(k) - Tij @ (Pi.pi_dag(j) @ Pi.pi(k)),
                       (i, j, k))
    out: dict = {name: r for name, (r, _) in acc.items()}
    out["min_gram_eig"] = min_eig
    allpi = np.hstack(list(Pi.embeddings))
    out["rank_deficit"] = Pi.D - int(np.linalg.matrix_rank(allpi, tol=Pi.tol * np.linalg.norm(allpi, 2)))
    out["where"] = {name: list(w) for name, (_, w) in acc.items()}
    out["where"]["min_gram_eig"] = list(at_eig)
    return out


def _worst(acc: dict, name: str, R: np.ndarray, where) -> None:
    r = float(np.max(np.abs(R), initial=0.0))
    if name not in acc or r > acc[name][0]:
        acc[name] = (r, tuple(where))


def lemma_suite(Pi: NModel, chain=None, include_counterparts: bool | None = None) -> dict:
    """Residuals of the projection identities, each with the worst index pattern.

    Returns ``{name: (residual, indices)}``.  ``chain`` is the ascending index
    chain for the bracket projections (default ``1, ..., n``).  The identities
    for the orthogonal counterparts ``q'`` run only when every ``N_k`` is
    one-dimensional.
    """
    n, D = Pi.n, Pi.D
    I = np.eye(D)
    chain = list(range(1, n + 1)) if chain is None else [int(c) for c in chain]
    if include_counterparts is None:
        include_counterparts = all(d == 1 for d in Pi.dims)
    qp = {i: q_projection(Pi, i, "+").P for i in range(1, n + 1)}
    qm = {i: q_projection(Pi, i, "-").P for i in range(1, n + 1)}
    P = {(i, j): p_pair(Pi, i, j).P for i in range(1, n + 1) for j in range(1, i + 1)}
    S = {(i, j): span_projection(Pi, i, j).P for i in range(1, n + 1) for j in range(1, i + 1)}
    acc: dict = {}

    # q_{i-} q_{j+} = 0, q_{i+} + q_{i-} = pi_i pi_i^dag, and the span identities
    for i in range(1, n + 1):
        _worst(acc, "q_sum", qp[i] + qm[i] - Pi.pp_dag(i), (i,))
        for j in range(1, i + 1):
            _worst(acc, "q_minus_q_plus", qm[i] @ qp[j], (i, j))
    for i, j, k, l, m in itertools.combinations_with_replacement(range(n, 0, -1), 5):
        E = I - Pi.pp_dag(k)
        _worst(acc, "span_upper", S[i, j] @ E @ S[l, m], (i, j, k, l, m))
        _worst(acc, "span_lower", S[l, m] @ E @ S[i, j], (i, j, k, l, m))

    # pair projections
    for i in range(1, n + 1):
        _worst(acc, "pair_idempotent", P[i, i] - P[i, i] @ P[i, i], (i, i))
        _worst(acc, "pair_diagonal", P[i, i], (i,))
    for i, j, k, l in itertools.combinations_with_replacement(range(n, 0, -1), 4):
        w = (i, j, k, l)
        _worst(acc, "pair_q_plus", P[i, j] @ qp[k], w)
        _worst(acc, "q_minus_pair", qm[i] @ P[j, k], w)
        _worst(acc, "pair_pair", P[i, j] @ P[k, l], w)
        _worst(acc, "pair_absorb_left", P[i, k] @ P[j, k] - P[j, k], w)
        _worst(acc, "pair_absorb_right", P[i, j] @ P[i, k] - P[i, j], w)
        _worst(acc, "pair_reverse", P[j, k] @ P[i, j], w)
        _worst(acc, "pair_idempotent", P[i, j] @ P[i, j] - P[i, j], (i, j))

    # bracket projections along the chain; positions a >= b >= c >= d
    N = len(chain)

    def bracket(a: int, b: int) -> np.ndarray:
        if a == b:
            return np.zeros((D, D), dtype=complex)
        return p_bracket(Pi, chain[b : a + 1]).P

    B = {(a, b): bracket(a, b) for a in range(N) for b in range(a + 1)}
    for a, b, c, d in itertools.combinations_with_replacement(range(N - 1, -1, -1), 4):
        w = (chain[a], chain[b], chain[c], chain[d])
        _worst(acc, "bracket_q_plus", B[a, b] @ qp[chain[c]], w)
        _worst(acc, "q_minus_bracket", qm[chain[a]] @ B[b, c], w)
        _worst(acc, "bracket_bracket", B[a, b] @ B[c, d], w)
    for a, b, c in itertools.combinations_with_replacement(range(N - 1, -1, -1), 3):
        _worst(acc, "bracket_recursion", B[a, c] - (B[b, c] @ (I - B[a, b]) + B[a, b]),
               (chain[a], chain[b], chain[c]))
        _worst(acc, "bracket_idempotent", B[a, c] @ B[a, c] - B[a, c], (chain[a], chain[c]))

    # H_{ij+} meets Ker P_[ij] exactly in D_{j+}
    for a in range(N):
        for b in range(a):
            i, j = chain[a], chain[b]
            Hp = _kernel_in(Subspace(_range_basis(S[i, j], Pi.tol)), qm[i])
            K = _kernel_in(Hp, B[a, b])
            Dj = Subspace(_range_basis(qp[j], Pi.tol))
            _worst(acc, "direct_sum", np.array([subspace_gap(K, Dj)]), (i, j))

    # inverse identities for every triple i > j > k
    for i, j, k in itertools.combinations(range(n, 0, -1), 3):
        R = P[i, j] + P[j, k]
        _worst(acc, "inverse_left", R @ P[i, k] @ R - R, (i, j, k))
        _worst(acc, "inverse_right", P[i, k] @ R @ P[i, k] - P[i, k], (i, j, k))

    if include_counterparts:
        qpp = {}
        qmp = {}
        for i in range(1, n + 1):
            _, a, b = orthogonal_counterparts(Pi, i, check_outer=False)
            qpp[i], qmp[i] = a.P, b.P
        for i in range(1, n + 1):
            for j in range(1, i + 1):
                _worst(acc, "q_minus_qprime_plus", qm[i] @ qpp[j], (i, j))
                _worst(acc, "qprime_minus_q_plus", qmp[i] @ qp[j], (i, j))
    return acc


def _kernel_in(S: Subspace, A: np.ndarray, tol: float = 1e-7) -> Subspace:
    """``S`` intersected with ``Ker A``."""
    if S.dim == 0:
        return S
    _, s, Vh = np.linalg.svd(A @ S.basis)
    scale = max(1.0, float(s[0]) if s.size else 0.0)
    r = int(np.sum(s > tol * scale))
    return Subspace(S.basis @ Vh[r:].conj().T)


def model_to_json(Pi: NModel) -> dict:
    def cm(A):
        return {"re": np.real(A).tolist(), "im": np.imag(A).tolist()}

    return {
        "format": "nmodel/1",
        "n": Pi.n,
        "dims": list(Pi.dims),
        "ambient_dimension": Pi.D,
        "curve": Pi.curve.to_json(),
        "orders": {"neg": Pi.orders.neg, "pos": Pi.orders.pos, "step": Pi.orders.step},
        "gram": cm(np.eye(Pi.D)),
        "pi": [cm(P) for P in Pi.embeddings],
        "U": cm(Pi.U),
    }


def model_from_json(data: dict) -> NModel:
    """Model from :func:`model_to_json` output.

    The stored embeddings and ``U`` are used as given (nothing is rebuilt from
    fibres), so a file whose ``pi`` blocks were edited is checked as edited.
    Fibre samples are not stored; operations that need them are unavailable.
    """
    def cm(d, what):
        try:
            return np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed matrix {what}: {exc}") from exc

    try:
        if data.get("format") != "nmodel/1":
            raise ValueError("not an nmodel/1 document")
        curve = Curve.from_json(data["curve"])
        o = data["orders"]
        orders = ModelOrders(int(o["neg"]), int(o["pos"]), int(o["step"]))
        dims = [int(d) for d in data["dims"]]
        emb = tuple(cm(P, f"pi[{k}]") for k, P in enumerate(data["pi"], start=1))
        U = cm(data["U"], "U")
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed model JSON: {exc}") from exc
    n = len(dims)
    if len(emb) != n:
        raise ValueError("number of embeddings does not match dims")
    D = int(data.get("ambient_dimension", U.shape[0]))
    if U.shape != (D, D):
        raise ValueError("U must be square of the ambient dimension")
    for k, (P, d) in enumerate(zip(emb, dims), start=1):
        want = (D, (orders.neg + orders.upper(k) + 1) * d)
        if P.shape != want:
            raise ValueError(f"pi[{k}] has shape {P.shape}, expected {want}")
    fibers = tuple(np.zeros((curve.grid, 0, d), dtype=complex) for d in dims)
    Pi = NModel(curve, orders, fibers, np.zeros((0, D), dtype=complex), emb)
    Pi.__dict__["U"] = U
    return Pi
