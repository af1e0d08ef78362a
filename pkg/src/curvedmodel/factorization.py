"""Factorizations of a characteristic function and invariant subspaces of its model.

A factorization ``theta = theta2 theta1`` is sent to the subspace
``K_(21)`` of a three-embedding model, carried into the model space of a fixed
reference two-embedding model of ``theta``.  The way back goes through the
wandering subspace of multiplication by ``zeta`` on ``L + D_+`` (the
simply-connected Wold route).  Orders of factorizations are compared through
Schur-class witnesses; constant contraction triples give the finite analogue
of the regularity criterion.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .coeffspace import FunctionField, Weight, fit_field
from .config import DEFAULT_TOL, ModelOrders
from .nmodel import (NModel, Subspace, build_model, fiber_unitary_dims, k_subspace,
                     model_system, observability_kernel, subspace_gap)
from .schur import (NCharFn, WeightedSchurFunction, compose_ncharfn, is_regular,
                    is_weighted_schur)
from .system import CurvedSystem, is_simple, product

__all__ = [
    "BudgetExceeded",
    "AlignmentError",
    "FactorizationOrders",
    "FicResult",
    "InvariantChain",
    "reference_model",
    "align",
    "f_ic",
    "f_im_chain",
    "wandering_subspace",
    "chain_to_factorization",
    "precedes",
    "equivalent",
    "invariant_subspaces",
    "subspace_factorization_correspondence",
    "regular_criterion_crosscheck",
    "ContractionTriple",
    "contraction_triple",
    "contraction_triple_tests",
    "cocycle_orthogonality",
    "unitary_link",
    "correspondence_to_json",
]


class BudgetExceeded(RuntimeError):
    """Invariant-subspace lattice is infinite or larger than the enumeration budget."""


class AlignmentError(RuntimeError):
    """The model of a factorization does not match the reference pair."""


@dataclass(frozen=True)
class FactorizationOrders:
    """Truncation used for the models of a factorization.

    A chain model with ``n`` embeddings uses step ``step`` between consecutive
    analytic orders; the reference two-embedding model uses ``(n - 1) step``
    so that ``V_1`` and ``V_n`` agree in both.  ``guard`` orders at the top of
    ``D_+`` are dropped when extracting wandering vectors.
    """

    neg: int = 2
    pos: int = 40
    step: int = 40
    guard: int = 16

    @classmethod
    def for_epsilon(cls, epsilon: complex, **kw) -> "FactorizationOrders":
        """Guard wide enough that ``|epsilon|^guard`` drops below 1e-10."""
        e = abs(epsilon)
        guard = 8 if e < 1e-3 else max(8, int(np.ceil(-10 / np.log10(e))) + 2)
        pos = max(kw.pop("pos", 40), guard + 16)
        return cls(pos=pos, guard=guard, **kw)

    def chain(self) -> ModelOrders:
        return ModelOrders(self.neg, self.pos, self.step)

    def reference(self, n: int) -> ModelOrders:
        return ModelOrders(self.neg, self.pos, self.step * (n - 1))


# ---------------------------------------------------------------------------
# alignment with the reference pair


def reference_model(theta: WeightedSchurFunction, forders: FactorizationOrders,
                    n: int = 3) -> NModel:
    return build_model(compose_ncharfn([theta]), forders.reference(n))


@dataclass(frozen=True, eq=False)
class Alignment:
    """Isometry ``X`` with ``X [pi_1 pi_n] = [pi_+ pi_-]`` on ``Ran pi_1 v Ran pi_n``."""

    X: np.ndarray
    domain: Subspace
    residual: float
    isometry: float


def align(Pi: NModel, ref: NModel, tol: float = 1e-7) -> Alignment:
    A = np.hstack([Pi.pi(1), Pi.pi(Pi.n)])
    B = np.hstack([ref.pi(1), ref.pi(2)])
    if A.shape[1] != B.shape[1]:
        raise AlignmentError("coefficient spaces of the end embeddings differ")
    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    r = int(np.sum(s > Pi.tol * s[0]))
    U, s, Vh = U[:, :r], s[:r], Vh[:r]
    X = (B @ Vh.conj().T / s) @ U.conj().T
    res = float(np.linalg.norm(X @ A - B, 2) / max(1.0, np.linalg.norm(B, 2)))
    iso = float(np.linalg.norm(X.conj().T @ X - U @ U.conj().T, 2))
    if res > tol or iso > tol:
        raise AlignmentError(f"alignment residual {res:.2e}, isometry defect {iso:.2e}")
    return Alignment(X, Subspace(U), res, iso)


@dataclass(frozen=True, eq=False)
class FicResult:
    subspace: Subspace          # in the reference ambient space
    remainder: float            # part of K_(21) outside Ran pi_1 v Ran pi_n
    alignment: Alignment
    model: NModel


def _theta_of(th) -> WeightedSchurFunction:
    if isinstance(th, WeightedSchurFunction):
        return th
    if isinstance(th, FunctionField):
        return WeightedSchurFunction.unweighted(th)
    raise TypeError("expected a weighted Schur function or a field")


def f_ic(theta2, theta1, forders: FactorizationOrders | None = None,
         ref: NModel | None = None, tol: float = 1e-7) -> FicResult:
    """Invariant subspace ``K_(21)`` of the factorization, in the reference model space."""
    forders = FactorizationOrders() if forders is None else forders
    t1, t2 = _theta_of(theta1), _theta_of(theta2)
    N = compose_ncharfn([t1, t2])
    if ref is None:
        ref = reference_model(N.schur(3, 1), forders)
    Pi = build_model(N, forders.chain())
    al = align(Pi, ref, tol)
    K21 = k_subspace(Pi, 2, 1, _cut(forders))
    remainder = al.domain.contains(K21)
    L = Subspace.span(al.X @ K21.basis) if K21.dim else Subspace.zero(ref.D)
    return FicResult(L, remainder, al, Pi)


def _cut(forders: FactorizationOrders) -> int:
    return forders.pos - forders.guard


# ---------------------------------------------------------------------------
# invariant chains


@dataclass(frozen=True, eq=False)
class InvariantChain:
    """Nested subspaces ``L_1 <= ... <= L_n`` of the model space of the reference model."""

    ref: NModel
    subspaces: tuple
    normal: tuple = ()
    forders: FactorizationOrders = field(default_factory=FactorizationOrders)
    remainder: float = 0.0
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return len(self.subspaces)

    @property
    def model(self):
        if "ms" not in self._cache:
            self._cache["ms"] = model_system(self.ref, _cut(self.forders))
        return self._cache["ms"]

    def coords(self, k: int) -> np.ndarray:
        """Basis of ``L_k`` in the coordinates of the model system."""
        Q = self.model.basis
        return Q.conj().T @ self.subspaces[k - 1].basis

    def check(self) -> dict:
        """Residuals of the chain invariants (nesting, invariance, reducing ends)."""
        ms = self.model
        Q, T = ms.basis, ms.system.T
        out = {"nesting": 0.0, "inside_model": 0.0, "invariance": 0.0, "resolvent": 0.0,
               "reducing": 0.0}
        K = Subspace(Q)
        for a, b in zip(self.subspaces, self.subspaces[1:]):
            out["nesting"] = max(out["nesting"], b.contains(a))
        curve = self.ref.curve
        probes = [curve.phi(1.6), curve.phi(-2.3j)]
        for L in self.subspaces:
            out["inside_model"] = max(out["inside_model"], K.contains(L))
            if not L.dim:
                continue
            C = Q.conj().T @ L.basis
            C, _ = np.linalg.qr(C)
            R = T @ C
            out["invariance"] = max(out["invariance"], float(np.linalg.norm(R - C @ (C.conj().T @ R), 2)))
            for z in probes:
                R = np.linalg.solve(T - z * np.eye(T.shape[0]), C)
                R = R / max(1.0, np.linalg.norm(R, 2))
                out["resolvent"] = max(out["resolvent"],
                                       float(np.linalg.norm(R - C @ (C.conj().T @ R), 2)))
        U = self.ref.U
        ends = [self.subspaces[0], Subspace.span(Q - self.subspaces[-1].projector @ Q)
                if Q.shape[1] else Subspace.zero(self.ref.D)]
        for S in ends:
            if S.dim:
                P = S.projector
                for W in (U, U.conj().T):
                    out["reducing"] = max(out["reducing"], float(np.linalg.norm((W @ P - P @ W) @ S.basis, 2)))
        return out


def f_im_chain(Pi: NModel, ref: NModel | None = None,
               forders: FactorizationOrders | None = None) -> InvariantChain:
    """The nested ``K_(k1)`` of an n-model, carried into the reference model space."""
    forders = FactorizationOrders() if forders is None else forders
    n = Pi.n
    if ref is None:
        N = _charfn_of(Pi)
        ref = build_model(compose_ncharfn([N.schur(n, 1)]), forders.reference(n))
    al = align(Pi, ref)
    cut = _cut(forders)
    subs = [Subspace.zero(ref.D)]
    remainder = 0.0
    for k in range(2, n + 1):
        K = k_subspace(Pi, k, 1, cut)
        remainder = max(remainder, al.domain.contains(K))
        subs.append(Subspace.span(al.X @ K.basis) if K.dim else Subspace.zero(ref.D))
    chain = InvariantChain(ref, tuple(subs), forders=forders, remainder=remainder)
    normal = tuple(normal_part(chain, k) for k in range(1, n + 1))
    return InvariantChain(ref, tuple(subs), normal, forders, remainder)


def _charfn_of(Pi: NModel) -> NCharFn:
    from .nmodel import model_charfn

    return model_charfn(Pi)


# ---------------------------------------------------------------------------
# Wold route back to a factorization


def _plus_low(ref: NModel, top: int) -> np.ndarray:
    ks = ref.orders_of(1)
    return ref.pi(1)[:, (ks >= 0) & (ks <= top)]


def wandering_subspace(chain: InvariantChain, k: int, tol: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal wandering vectors of ``zeta`` on ``L_k + D_+`` and the singular values seen.

    ``H' = L_k + pi_+ (orders <= pos - 2)`` stays inside the truncated space
    under ``zeta``; the wandering vectors are the part of the guard-truncated
    ``L_k + pi_+ (orders <= pos - guard)`` orthogonal to ``zeta H'``.
    """
    ref, fo = chain.ref, chain.forders
    L = chain.subspaces[k - 1].basis
    Hp = Subspace.span(np.hstack([L, _plus_low(ref, fo.pos - 2)]))
    UH = Subspace.span(ref.U @ Hp.basis)
    Hg = Subspace.span(np.hstack([L, _plus_low(ref, fo.pos - fo.guard)]))
    R = Hg.basis - UH.basis @ (UH.basis.conj().T @ Hg.basis)
    Uw, s, _ = np.linalg.svd(R, full_matrices=False)
    r = int(np.sum(s > tol))
    # stability: no singular value in the ambiguous band
    if np.any((s > tol * 1e-2) & (s < tol * 1e2)):
        raise ValueError(f"wandering dimension unstable: singular values {s[:r + 3]}")
    return Uw[:, :r], s


def normal_part(chain: InvariantChain, k: int, tol: float = 1e-6) -> int:
    """Fibre dimension of the normal part of ``zeta`` on ``L_k + D_+``.

    A reducing subspace of multiplication by ``zeta`` is a field of fibres,
    orthogonal to the fibres ``Ran e(zeta)`` spanned by the wandering
    vectors; so the normal part shows up as fibre directions of the
    (low-order) ``L_k + D_+`` outside ``Ran e(zeta)``.  Returns the largest
    such count over the nodes.
    """
    ref, fo = chain.ref, chain.forders
    E, _ = wandering_subspace(chain, k)
    L = chain.subspaces[k - 1].basis
    low = Subspace.span(np.hstack([L, _plus_low(ref, fo.pos - fo.guard)])).basis
    Sb = ref.sample_vectors(low)
    Se = ref.sample_vectors(E)
    worst = 0
    for m in range(ref.curve.grid):
        Q = sla.orth(Se[m]) if Se.shape[2] else np.zeros((Sb.shape[1], 0))
        R = Sb[m] - Q @ (Q.conj().T @ Sb[m])
        scale = max(1.0, np.linalg.norm(Sb[m], 2))
        sv = np.linalg.svd(R, compute_uv=False)
        worst = max(worst, int(np.sum(sv > tol * scale)))
    return worst


def _fibre_pinv(A: np.ndarray) -> np.ndarray:
    """Pseudo-inverse of one fibre or of a stack of fibres."""
    return np.linalg.pinv(A, rcond=1e-10)


def _fit(curve, vals, tol: float, what: str) -> FunctionField:
    K = (curve.grid - 4) // 4
    F = fit_field(curve, vals, K, tol=np.inf)
    if F.residual > tol:
        raise ValueError(f"{what}: fit residual {F.residual:.2e}")
    return F


def _canonical_phase(S: np.ndarray, Pn: np.ndarray) -> np.ndarray:
    """Right unitary making ``Theta_nk`` at the base node lower-trapezoidal with positive diagonal."""
    Y = _fibre_pinv(Pn[0]) @ S[0]
    Q, R = np.linalg.qr(Y.conj().T)
    d = np.diag(R)
    ph = np.where(np.abs(d) > 1e-12, d / np.where(np.abs(d) > 0, np.abs(d), 1), 1)
    W = Q * ph.conj()[None, :] if Q.shape[1] == S.shape[2] else np.eye(S.shape[2])
    return W


def chain_to_factorization(chain: InvariantChain, tol: float = 1e-6) -> NCharFn:
    """n-characteristic function whose chain of ``K_(k1)`` is the given chain."""
    ref = chain.ref
    curve = ref.curve
    Pp, Pm = ref.fibers[0], ref.fibers[1]
    emb = [Pp]
    for k in range(2, chain.n):
        E, _ = wandering_subspace(chain, k)
        nk = normal_part(chain, k)
        if nk:
            raise ValueError(f"L_{k} has a normal part (fibre dimension {nk})")
        S = ref.sample_vectors(E)
        W = _canonical_phase(S, Pm)
        emb.append(S @ W)
    emb.append(Pm)
    weights = []
    for k, S in enumerate(emb):
        G = np.conj(np.swapaxes(S, 1, 2)) @ S
        if 0 < k < len(emb) - 1:
            weights.append(Weight(_fit(curve, G, tol, f"weight {k + 1}")))
        else:
            weights.append(ref.weights[0 if k == 0 else 1])
    factors = []
    for k in range(len(emb) - 1):
        T = _fibre_pinv(emb[k + 1]) @ emb[k]
        factors.append(_fit(curve, T, tol, f"factor {k + 2}{k + 1}"))
    return NCharFn(tuple(weights), tuple(factors))


# ---------------------------------------------------------------------------
# order and equivalence of factorizations


def _pair(F):
    """``(theta2, theta1)`` fields and the middle weights of a factorization."""
    if isinstance(F, NCharFn):
        if F.n != 3:
            raise ValueError("expected a factorization with one middle space")
        return F.theta(3, 2), F.theta(2, 1), F.weight(2)
    t2, t1 = F
    t2, t1 = _theta_of(t2), _theta_of(t1)
    return t2.theta_plus, t1.theta_plus, t1.xi_minus


def _common_curve(*fields):
    return max((f.curve for f in fields), key=lambda c: c.grid)


def _lsq_right(B: np.ndarray, A: np.ndarray) -> tuple[np.ndarray, float]:
    """Pointwise ``X`` with ``X A = B`` and its residual."""
    X = B @ _fibre_pinv(A)
    return X, float(np.max(np.abs(X @ A - B)))


def _analytic(F: FunctionField, tol: float) -> bool:
    return F.max_negative() <= tol * max(1.0, F.sup_norm())


def precedes(Fp, Fpp, tol: float = 1e-8) -> FunctionField | None:
    """Witness ``vartheta`` of ``F' < F''``: ``theta1'' = vartheta theta1'``, ``theta2' = theta2'' vartheta``."""
    t2p, t1p, xi_p = _pair(Fp)
    t2pp, t1pp, xi_pp = _pair(Fpp)
    curve = _common_curve(t2p, t1p, t2pp, t1pp)
    a1, b1 = t1p.samples_on(curve), t1pp.samples_on(curve)
    v, res = _lsq_right(b1, a1)
    if res > tol:
        return None
    try:
        V = _fit(curve, v, tol, "witness")
    except ValueError:
        return None
    if not _analytic(V, tol):
        return None
    lhs = t2p.samples_on(curve)
    rhs = t2pp.samples_on(curve) @ V.samples_on(curve)
    if float(np.max(np.abs(lhs - rhs))) > tol:
        return None
    if not is_weighted_schur(WeightedSchurFunction(V, xi_p, xi_pp), tol).ok:
        return None
    return V


def equivalent(Fp: NCharFn, Fpp: NCharFn, tol: float = 1e-8) -> list[FunctionField] | None:
    """Middle witnesses ``psi_k`` with ``Theta''_ij = psi_i^{-1} Theta'_ij psi_j`` and ``Xi'' = psi^* Xi' psi``."""
    if Fp.n != Fpp.n or Fp.dims[0] != Fpp.dims[0] or Fp.dims[-1] != Fpp.dims[-1]:
        return None
    n = Fp.n
    curve = max((Fp.curve, Fpp.curve), key=lambda c: c.grid)
    th_p = Fp.theta(n, 1).samples_on(curve)
    th_pp = Fpp.theta(n, 1).samples_on(curve)
    if float(np.max(np.abs(th_p - th_pp))) > tol:
        return None
    for k in (1, n):
        if float(np.max(np.abs(Fp.weight(k).samples_on(curve) - Fpp.weight(k).samples_on(curve)))) > tol:
            return None
    psis = []
    for k in range(2, n):
        if Fp.dims[k - 1] != Fpp.dims[k - 1]:
            return None
        A = Fpp.theta(k, 1).samples_on(curve)      # psi A = Theta'_k1
        B = Fp.theta(k, 1).samples_on(curve)
        psi, res = _lsq_right(B, A)
        if res > tol:
            return None
        try:
            P = _fit(curve, psi, tol, "psi")
            Pinv = _fit(curve, np.linalg.inv(psi), tol, "psi inverse")
        except (ValueError, np.linalg.LinAlgError):
            return None
        if not (_analytic(P, tol) and _analytic(Pinv, tol)):
            return None
        # Theta''_nk = Theta'_nk psi
        lhs = Fpp.theta(n, k).samples_on(curve)
        rhs = Fp.theta(n, k).samples_on(curve) @ psi
        if float(np.max(np.abs(lhs - rhs))) > tol:
            return None
        Xp, Xpp = Fp.weight(k).samples_on(curve), Fpp.weight(k).samples_on(curve)
        if float(np.max(np.abs(np.conj(np.swapaxes(psi, 1, 2)) @ Xp @ psi - Xpp))) > tol:
            return None
        psis.append(P)
    return psis


# ---------------------------------------------------------------------------
# invariant subspaces of a finite matrix and the correspondence table


def invariant_subspaces(T: np.ndarray, budget: int = 64, max_block: int = 3,
                        tol: float = 1e-6) -> list[np.ndarray]:
    """All invariant subspaces of ``T`` when the lattice is finite.

    The lattice is finite iff every eigenvalue has geometric multiplicity one;
    it is then the set of sums of ``Ker (T - lambda)^j``, ``0 <= j <= m_lambda``.
    """
    d = T.shape[0]
    if d == 0:
        return [np.zeros((0, 0), dtype=complex)]
    ev = np.linalg.eigvals(T)
    clusters: list[list[complex]] = []
    for lam in ev:
        for c in clusters:
            if abs(c[0] - lam) < np.sqrt(tol):
                c.append(lam)
                break
        else:
            clusters.append([lam])
    parts = []
    count = 1
    I = np.eye(d)
    for c in clusters:
        lam, m = np.mean(c), len(c)
        if m > max_block:
            raise BudgetExceeded(f"Jordan block of size {m} exceeds {max_block}")
        A = T - lam * I
        sv = np.linalg.svd(A, compute_uv=False)
        if d - int(np.sum(sv > tol * max(1.0, sv[0]))) > 1:
            raise BudgetExceeded(f"eigenvalue {lam:.4g} has geometric multiplicity > 1")
        kers = [np.zeros((d, 0), dtype=complex)]
        for j in range(1, m + 1):
            _, s, Vh = np.linalg.svd(np.linalg.matrix_power(A, j))
            r = d - j
            kers.append(Vh[r:].conj().T)
        parts.append(kers)
        count *= m + 1
        if count > budget:
            raise BudgetExceeded(f"lattice has more than {budget} elements")
    out = []
    for combo in itertools.product(*parts):
        B = np.hstack(combo)
        out.append(sla.orth(B) if B.shape[1] else B)
    return out


@dataclass(frozen=True, eq=False)
class Correspondence:
    subspaces: list            # reference-ambient Subspaces
    factorizations: list       # NCharFn (n = 3)
    gaps: list                 # round-trip gap per entry
    regular: list
    order_edges: list          # (i, j) with L_i <= L_j and F_i < F_j
    order_ok: bool
    distinct_ok: bool

    @property
    def ok(self) -> bool:
        return self.order_ok and self.distinct_ok and max(self.gaps, default=0.0) <= 1e-6


def subspace_factorization_correspondence(theta, forders: FactorizationOrders | None = None,
                             budget: int = 32, tol: float = 1e-8) -> Correspondence:
    """Enumerate invariant subspaces of the model operator and their regular factorizations."""
    forders = FactorizationOrders() if forders is None else forders
    theta = _theta_of(theta)
    ref = reference_model(theta, forders)
    base = InvariantChain(ref, (Subspace.zero(ref.D),), forders=forders)
    ms = base.model
    Q, T = ms.basis, ms.system.T
    if 2 ** T.shape[0] > budget:
        raise BudgetExceeded(f"model dimension {T.shape[0]} may carry more than {budget} subspaces")
    lattice = invariant_subspaces(T, budget)
    subs, facts, gaps, regs = [], [], [], []
    Kfull = Subspace(Q)
    for C in lattice:
        L = Subspace(Q @ C) if C.shape[1] else Subspace.zero(ref.D)
        chain = InvariantChain(ref, (Subspace.zero(ref.D), L, Kfull), forders=forders)
        N = chain_to_factorization(chain)
        back = f_ic(N.schur(3, 2), N.schur(2, 1), forders, ref)
        subs.append(L)
        facts.append(N)
        gaps.append(subspace_gap(L, back.subspace))
        regs.append(bool(is_regular(N)))
    edges, order_ok = [], True
    for i, j in itertools.product(range(len(subs)), repeat=2):
        if i == j:
            continue
        inside = subs[j].contains(subs[i]) < 1e-6
        wit = precedes(facts[i], facts[j], tol) is not None
        if inside != wit:
            order_ok = False
        if inside:
            edges.append((i, j))
    distinct_ok = all(equivalent(facts[i], facts[j], tol) is None
                      for i, j in itertools.combinations(range(len(facts)), 2))
    return Correspondence(subs, facts, gaps, regs, edges, order_ok, distinct_ok)


def correspondence_to_json(C: Correspondence) -> dict:
    from .schur import ncharfn_to_json

    def cm(A):
        return {"re": np.real(A).tolist(), "im": np.imag(A).tolist()}

    return {
        "entries": [
            {"dimension": L.dim, "subspace_basis": cm(L.basis), "factorization": ncharfn_to_json(N),
             "regular": r, "round_trip_gap": g}
            for L, N, r, g in zip(C.subspaces, C.factorizations, C.regular, C.gaps)
        ],
        "order_edges": [list(e) for e in C.order_edges],
        "order_preserving": C.order_ok,
        "pairwise_inequivalent": C.distinct_ok,
    }


# ---------------------------------------------------------------------------
# regularity cross-check


def regular_criterion_crosscheck(theta2, theta1, systems: tuple[CurvedSystem, CurvedSystem] | None = None,
                                 orders: ModelOrders | None = None, tol: float | None = None) -> dict:
    """Three verdicts on the factorization ``theta2 theta1``.

    (a) defect-range criterion on the boundary, (b) fibre count of
    ``(Ran pi_1 v Ran pi_3)^perp`` in the three-embedding model and
    (c) simplicity of the product system.  With ``systems = (sigma2, sigma1)``
    (finite state spaces) (c) is the observability test of the product;
    otherwise it is the kernel of ``f -> (pi_1^dag f, pi_3^dag f)`` on the
    model space, which the resolvent formula identifies with
    ``intersection Ker M^(T^ - z)^{-1}``.
    """
    tol = DEFAULT_TOL.rank if tol is None else tol
    t1, t2 = _theta_of(theta1), _theta_of(theta2)
    N = compose_ncharfn([t1, t2])
    a = bool(is_regular(N, tol))
    orders = ModelOrders(neg=4, pos=40, step=8) if orders is None else orders
    Pi = build_model(N, orders)
    b = int(np.max(fiber_unitary_dims(Pi, tol)))
    if systems is not None:
        c = bool(is_simple(product(*systems)))
        route, kernel = "product", None
    else:
        kernel = observability_kernel(Pi).dim
        c = kernel == 0
        route = "model"
    verdicts = (a, b == 0, c)
    return {"regular": a, "unitary_fibre_dim": b, "simple": c, "route": route,
            "kernel_dim": kernel, "agree": len(set(verdicts)) == 1}


# ---------------------------------------------------------------------------
# constant contraction triples


def _psd_sqrt(H: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (H + H.conj().T))
    return (V * np.sqrt(np.clip(w, 0, None))) @ V.conj().T


def _tau(Vi: np.ndarray, Vj: np.ndarray, tol: float) -> np.ndarray:
    """Isometry ``tau_jij`` on ``clos Ran (I - Vj^* Vi Vi^* Vj)^{1/2}`` (orthonormal coordinates)."""
    A = Vi.conj().T @ Vj
    H = np.eye(Vj.shape[1]) - A.conj().T @ A
    w, W = np.linalg.eigh(0.5 * (H + H.conj().T))
    keep = w > tol
    Pi_ = np.eye(Vi.shape[0]) - Vi @ Vi.conj().T
    return Pi_ @ Vj @ W[:, keep] / np.sqrt(w[keep])


@dataclass(frozen=True, eq=False)
class ContractionTriple:
    A21: np.ndarray
    A32: np.ndarray
    A31: np.ndarray
    V1: np.ndarray
    V2: np.ndarray
    V3: np.ndarray
    tau121: np.ndarray
    tau232: np.ndarray
    tau131: np.ndarray
    Z: np.ndarray

    def residuals(self) -> dict:
        def iso(V):
            return float(np.linalg.norm(V.conj().T @ V - np.eye(V.shape[1]), 2)) if V.size else 0.0

        return {
            "cocycle": float(np.max(np.abs(self.A31 - self.A32 @ self.A21), initial=0.0)),
            "isometries": max(iso(self.V1), iso(self.V2), iso(self.V3)),
            "taus": max(iso(self.tau121), iso(self.tau232), iso(self.tau131)),
            "Z_isometry": iso(self.Z),
        }


def contraction_triple(A21, A32, tol: float = 1e-10) -> ContractionTriple:
    """Isometries ``V_k`` into ``N_1 + N_2 + N_3`` with ``V_i^* V_j = A_ij``.

    ``V_3 = nu_3``, ``V_2 = V_3 A_32 + nu_2 D_32``, ``V_1 = V_2 A_21 + nu_1 D_21``.
    """
    A21, A32 = np.atleast_2d(np.asarray(A21, dtype=complex)), np.atleast_2d(np.asarray(A32, dtype=complex))
    d1, d2, d3 = A21.shape[1], A21.shape[0], A32.shape[0]
    if A32.shape[1] != d2:
        raise ValueError("A32 columns must match A21 rows")
    for A in (A21, A32):
        if A.size and np.linalg.norm(A, 2) > 1 + tol:
            raise ValueError("inputs must be contractions")
    D = d1 + d2 + d3
    V3 = np.zeros((D, d3), dtype=complex)
    V3[d1 + d2:] = np.eye(d3)
    V2 = np.zeros((D, d2), dtype=complex)
    V2[d1 + d2:] = A32
    V2[d1:d1 + d2] = _psd_sqrt(np.eye(d2) - A32.conj().T @ A32)
    V1 = V2 @ A21
    V1[:d1] = _psd_sqrt(np.eye(d1) - A21.conj().T @ A21)
    A31 = A32 @ A21
    rt = np.sqrt(tol)
    t121, t232, t131 = _tau(V2, V1, rt), _tau(V3, V2, rt), _tau(V3, V1, rt)
    Z = np.vstack([t121.conj().T, t232.conj().T]) @ t131
    return ContractionTriple(A21, A32, A31, V1, V2, V3, t121, t232, t131, Z)


def cocycle_orthogonality(V1: np.ndarray, V2: np.ndarray, V3: np.ndarray) -> tuple[float, float]:
    """``(|V3^* V1 - V3^* V2 V2^* V1|, |angle term|)`` for the two relative complements.

    The second number is the largest cosine between
    ``(E1 v E2) - E2`` and ``(E3 v E2) - E2``.
    """
    c = float(np.linalg.norm(V3.conj().T @ V1 - V3.conj().T @ V2 @ V2.conj().T @ V1, 2))
    P2 = np.eye(V2.shape[0]) - V2 @ V2.conj().T
    S1 = Subspace.span(P2 @ V1, 1e-7)
    S3 = Subspace.span(P2 @ V3, 1e-7)
    if not S1.dim or not S3.dim:
        return c, 0.0
    return c, float(np.linalg.norm(S1.basis.conj().T @ S3.basis, 2))


def contraction_triple_tests(A21, A32, tol: float = 1e-8) -> dict:
    """Regularity of ``A32 A21`` tested three ways, plus the cocycle/orthogonality equivalence."""
    tr = contraction_triple(A21, A32)
    rt = np.sqrt(tol)
    # 1) Ran (I - A32^* A32)^{1/2} meets Ran (I - A21 A21^*)^{1/2} only in zero
    d2 = tr.A21.shape[0]
    D2 = _range_of_psd(np.eye(d2) - tr.A32.conj().T @ tr.A32, tol)
    D1 = _range_of_psd(np.eye(d2) - tr.A21 @ tr.A21.conj().T, tol)
    if D2.shape[1] and D1.shape[1]:
        sv = np.linalg.svd(np.hstack([D2, D1]), compute_uv=False)
        by_defects = int(np.sum(sv > rt)) == D2.shape[1] + D1.shape[1]
    else:
        by_defects = True
    # 2) Z unitary (it is always an isometry)
    Z = tr.Z
    by_Z = Z.shape[0] == Z.shape[1] and (Z.size == 0 or
                                         float(np.linalg.norm(Z @ Z.conj().T - np.eye(Z.shape[0]), 2)) < rt)
    # 3) E2 inside E1 v E3
    E13 = Subspace.span(np.hstack([tr.V1, tr.V3]), tol)
    by_span = bool(E13.contains(Subspace.span(tr.V2, tol)) < rt)
    coc, cosine = cocycle_orthogonality(tr.V1, tr.V2, tr.V3)
    verdicts = (by_defects, bool(by_Z), by_span)
    return {
        "regular_defects": by_defects,
        "regular_Z": bool(by_Z),
        "regular_span": by_span,
        "agree": len(set(verdicts)) == 1,
        "cocycle": coc,
        "orthogonality": cosine,
        "residuals": tr.residuals(),
    }


def _range_of_psd(H: np.ndarray, tol: float) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (H + H.conj().T))
    return V[:, w > tol]


def unitary_link(A21, A42, A31, A43, tol: float = 1e-10) -> tuple[np.ndarray | None, dict]:
    """Unitary ``U`` with ``A31 = U A21`` and ``A43 = A42 U^{-1}`` linking two regular factorizations."""
    A21, A42, A31, A43 = (np.atleast_2d(np.asarray(a, dtype=complex)) for a in (A21, A42, A31, A43))
    diag: dict = {}
    if float(np.max(np.abs(A42 @ A21 - A43 @ A31))) > tol:
        diag["reason"] = "the two factorizations have different products"
        return None, diag
    r1 = contraction_triple_tests(A21, A42)
    r2 = contraction_triple_tests(A31, A43)
    diag["regular"] = (r1["regular_defects"], r2["regular_defects"])
    if not (r1["regular_defects"] and r2["regular_defects"]):
        diag["reason"] = "a factorization is not regular"
        return None, diag
    if A31.shape[0] != A21.shape[0]:
        diag["reason"] = "middle spaces differ in dimension"
        return None, diag
    d = A21.shape[0]
    I = np.eye(d)
    # column-major vec: U A21 = A31 and A43 U = A42 for A32 = U (the witness pair of the mutual order)
    A = np.vstack([np.kron(A21.T, I), np.kron(I, A43)])
    b = np.concatenate([A31.flatten(order="F"), A42.flatten(order="F")])
    x, *_ = np.linalg.lstsq(A, b, rcond=None)
    U = x.reshape((d, d), order="F")
    diag["witness_residual"] = float(np.max(np.abs(A @ x - b)))
    diag["unitarity"] = float(np.linalg.norm(U.conj().T @ U - I, 2))
    if diag["witness_residual"] > tol or diag["unitarity"] > np.sqrt(tol):
        diag["reason"] = "no unitary witness"
        return None, diag
    diag["A31"] = float(np.max(np.abs(A31 - U @ A21)))
    diag["A43"] = float(np.max(np.abs(A43 - A42 @ np.linalg.inv(U))))
    return U, diag
