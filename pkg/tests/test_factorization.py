import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import unitary_group

from curvedmodel.coeffspace import Curve, fit_field
from curvedmodel.commands import ncharfn_distance
from curvedmodel.config import ModelOrders
from curvedmodel.factorization import (
    AlignmentError, BudgetExceeded, FactorizationOrders, align, chain_to_factorization,
    cocycle_orthogonality, contraction_triple, contraction_triple_tests, correspondence_to_json,
    equivalent, f_ic, f_im_chain, invariant_subspaces, precedes, reference_model,
    regular_criterion_crosscheck, subspace_factorization_correspondence, unitary_link,
)
from curvedmodel.fixtures import blaschke, theta_chain, theta_power
from curvedmodel.nmodel import build_model, subspace_gap
from curvedmodel.schur import WeightedSchurFunction, compose_ncharfn
from curvedmodel.system import random_colligation

FO = FactorizationOrders()
seeds = st.integers(0, 2 ** 31 - 1)


def ref_curve(eps):
    return Curve(eps, FO.reference(3).grid_for(2))


def constant(curve, v, K=8):
    return WeightedSchurFunction.unweighted(fit_field(curve, np.full(curve.grid, v, dtype=complex), K))


@pytest.fixture(scope="module")
def disk():
    c = ref_curve(0)
    return [theta_power(c, p) for p in range(4)]


def random_contraction(rng, m, n, scale=1.0):
    A = rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n))
    return scale * A / np.linalg.norm(A, 2)


# -- f_ic --------------------------------------------------------------------------

def test_fic_disk_square_is_one_dimensional_and_invariant(disk):
    z = disk[1]
    r = f_ic(z, z, FO)
    assert r.subspace.dim == 1 and r.remainder < 1e-10
    ref = r.alignment
    assert ref.residual < 1e-10 and ref.isometry < 1e-10


@pytest.mark.parametrize("eps", [0.0, 0.2, -0.15 + 0.1j])
def test_fic_theta_theta(eps):
    c = ref_curve(eps)
    th = theta_power(c, 1)
    r = f_ic(th, th, FO)
    assert r.subspace.dim == 1 and r.remainder < 1e-10


def test_fic_identity_factors():
    c = ref_curve(0.2)
    th, one = theta_power(c, 1), theta_power(c, 0)
    assert f_ic(th, one, FO).subspace.dim == 0
    assert f_ic(one, th, FO).subspace.dim == 1


def test_align_rejects_mismatched_coefficient_spaces(disk):
    Pi = build_model(theta_chain(0, 3), FO.chain())
    other = build_model(compose_ncharfn([disk[1]]), ModelOrders(2, 20, 20))
    with pytest.raises(AlignmentError):
        align(Pi, other)


# -- chains and the Wold route back ----------------------------------------------

def test_im_chain_disk_three():
    Pi = build_model(theta_chain(0, 3), FO.chain())
    ch = f_im_chain(Pi)
    assert [s.dim for s in ch.subspaces] == [0, 1, 2]
    assert ch.remainder < 1e-10 and ch.normal == (0, 0, 0)
    assert max(ch.check().values()) < 1e-10


def test_chain_round_trip_disk():
    N0 = theta_chain(0, 3)
    ch = f_im_chain(build_model(N0, FO.chain()))
    N = chain_to_factorization(ch)
    assert N.dims == (1, 1, 1)
    assert ncharfn_distance(N, N0) < 1e-8


def test_correspondence_entries_round_trip(disk):
    C = subspace_factorization_correspondence(disk[2])
    for L, N, g in zip(C.subspaces, C.factorizations, C.gaps):
        back = f_ic(N.schur(3, 2), N.schur(2, 1), FO, reference_model(disk[2], FO))
        assert g < 1e-8 and subspace_gap(L, back.subspace) < 1e-8
        c = disk[2].curve
        assert np.abs(N.theta(3, 1).samples_on(c) - disk[2].theta_plus.samples_on(c)).max() < 1e-8


# -- order and equivalence ----------------------------------------------------------

def test_precedes_witness_on_disk(disk):
    z = disk
    w = precedes((z[2], z[1]), (z[1], z[2]))
    assert w is not None
    assert abs(w.coeff(1)[0, 0] - 1) < 1e-10 and abs(w.coeff(0)[0, 0]) < 1e-10
    assert precedes((z[1], z[2]), (z[2], z[1])) is None


def test_precedes_is_reflexive(disk):
    w = precedes((disk[1], disk[2]), (disk[1], disk[2]))
    assert w is not None and abs(w.coeff(0)[0, 0] - 1) < 1e-10


def test_equivalent_up_to_unimodular_constant(disk):
    z = disk[1]
    c = np.exp(0.7j)
    Fp = compose_ncharfn([z, z])
    cv = z.curve
    zc = WeightedSchurFunction.unweighted(fit_field(cv, c * cv.theta(cv.zeta), 4))
    zcb = WeightedSchurFunction.unweighted(fit_field(cv, np.conj(c) * cv.theta(cv.zeta), 4))
    psis = equivalent(Fp, compose_ncharfn([zc, zcb]))
    assert psis is not None and len(psis) == 1
    assert abs(abs(psis[0].coeff(0)[0, 0]) - 1) < 1e-10
    assert equivalent(compose_ncharfn([disk[2], z]), compose_ncharfn([z, disk[2]])) is None


def test_equivalent_rejects_different_products(disk):
    assert equivalent(compose_ncharfn([disk[1], disk[1]]),
                      compose_ncharfn([disk[1], disk[2]])) is None


# -- invariant subspace lattice ---------------------------------------------------

def test_lattice_of_diagonal_and_jordan():
    assert len(invariant_subspaces(np.diag([0.1, 0.2, 0.3]))) == 8
    J = np.array([[0.5, 1], [0, 0.5]])
    subs = invariant_subspaces(J)
    assert sorted(S.shape[1] for S in subs) == [0, 1, 2]
    for S in subs:
        if S.shape[1]:
            R = J @ S
            assert np.linalg.norm(R - S @ (S.conj().T @ R)) < 1e-10


def test_lattice_budget_and_infinite_lattices():
    with pytest.raises(BudgetExceeded):
        invariant_subspaces(np.eye(2))
    with pytest.raises(BudgetExceeded):
        invariant_subspaces(np.diag(np.arange(7) / 10), budget=64)
    with pytest.raises(BudgetExceeded):
        invariant_subspaces(np.diag(np.ones(4), 1) + 0.2 * np.eye(5))


@given(seeds)
@settings(max_examples=10)
def test_lattice_elements_are_invariant(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 5))
    T = np.triu(rng.normal(size=(d, d))) + np.diag(np.arange(d))
    subs = invariant_subspaces(T)
    assert len(subs) == 2 ** d
    for S in subs:
        if S.shape[1]:
            R = T @ S
            assert np.linalg.norm(R - S @ (S.conj().T @ R)) < 1e-8


# -- correspondence ----------------------------------------------------------------

def test_correspondence_square_of_z(disk):
    C = subspace_factorization_correspondence(disk[2])
    assert len(C.subspaces) == 3 and C.ok
    assert sorted(L.dim for L in C.subspaces) == [0, 1, 2]
    assert all(C.regular)
    assert len(C.order_edges) == 3


def test_correspondence_blaschke_three_zeros():
    B = blaschke(ref_curve(0), [0, 0.5, -1 / 3])
    C = subspace_factorization_correspondence(B)
    assert len(C.subspaces) == 8 and C.ok and all(C.regular)
    # strict inclusions in the Boolean lattice of a three-element set
    assert len(C.order_edges) == 27 - 8
    doc = correspondence_to_json(C)
    assert len(doc["entries"]) == 8 and doc["order_preserving"] and doc["pairwise_inequivalent"]


def test_correspondence_budget():
    B = blaschke(ref_curve(0), [0, 0.5, -1 / 3])
    with pytest.raises(BudgetExceeded):
        subspace_factorization_correspondence(B, budget=4)


# -- regularity cross-check --------------------------------------------------------

def test_crosscheck_on_colligation_pairs(rng):
    for _ in range(3):
        s1 = random_colligation(1, 1, rng)
        s2 = random_colligation(1, 1, rng)
        r = regular_criterion_crosscheck(s2.theta, s1.theta, systems=(s2, s1))
        assert r["agree"] and r["regular"] and r["route"] == "product"


def test_crosscheck_halves_is_not_regular():
    c = Curve(0.2, ModelOrders(4, 40, 8).grid_for(3))
    h = constant(c, 0.5)
    r = regular_criterion_crosscheck(h, h)
    assert r["agree"] and not r["regular"]
    assert r["unitary_fibre_dim"] == 1 and r["kernel_dim"] > 0


def test_crosscheck_inner_inner():
    c = Curve(0.2, ModelOrders(4, 40, 8).grid_for(3))
    th = theta_power(c, 1)
    r = regular_criterion_crosscheck(th, th)
    assert r["agree"] and r["regular"] and r["kernel_dim"] == 0


# -- constant contraction triples -------------------------------------------------

def test_triple_unitary_and_halves():
    r = contraction_triple_tests(np.eye(2), np.eye(2))
    assert r["agree"] and r["regular_defects"]
    r = contraction_triple_tests(0.5 * np.eye(1), 0.5 * np.eye(1))
    assert r["agree"] and not r["regular_defects"]


def test_triple_isometric_constants():
    u = np.array([[1.0], [0.0]])
    # v u = 0: defects meet only in zero iff v does not see the range of u
    assert not contraction_triple_tests(u, np.array([[1.0, 0.0]]))["regular_defects"]
    assert contraction_triple_tests(u, np.array([[0.0, 1.0]]))["regular_defects"]


@given(seeds)
@settings(max_examples=30)
def test_triple_agreement_and_residuals(seed):
    rng = np.random.default_rng(seed)
    d1, d2, d3 = (int(x) for x in rng.integers(1, 4, size=3))
    kind = rng.integers(3)
    A21 = random_contraction(rng, d2, d1, rng.uniform(0.2, 1.0))
    if kind == 0 and d2 >= d1:
        A21 = unitary_group.rvs(d2, random_state=rng)[:, :d1] if d2 > 1 else np.ones((1, 1))
    A32 = random_contraction(rng, d3, d2, rng.uniform(0.2, 1.0))
    if kind == 1 and d3 >= d2:
        A32 = unitary_group.rvs(d3, random_state=rng)[:, :d2] if d3 > 1 else np.ones((1, 1))
    r = contraction_triple_tests(A21, A32)
    assert r["agree"]
    assert max(r["residuals"].values()) < 1e-10
    tr = contraction_triple(A21, A32)
    assert np.abs(tr.V2.conj().T @ tr.V1 - A21).max() < 1e-12
    assert np.abs(tr.V3.conj().T @ tr.V2 - A32).max() < 1e-12


@given(seeds)
@settings(max_examples=20)
def test_cocycle_iff_orthogonal(seed):
    rng = np.random.default_rng(seed)
    D = 5
    V1, V2, V3 = (unitary_group.rvs(D, random_state=rng)[:, :d] for d in (1, 2, 1))
    coc, cos = cocycle_orthogonality(V1, V2, V3)
    assert (coc < 1e-10) == (cos < 1e-7)
    tr = contraction_triple(random_contraction(rng, 2, 1, 0.8), random_contraction(rng, 1, 2, 0.8))
    coc, cos = cocycle_orthogonality(tr.V1, tr.V2, tr.V3)
    assert coc < 1e-12 and cos < 1e-7


# -- unitary link -------------------------------------------------------------------

def test_unitary_link_identity():
    U, info = unitary_link(np.eye(2), np.eye(2), np.eye(2), np.eye(2))
    assert U is not None and np.abs(U - np.eye(2)).max() < 1e-12


@given(seeds)
@settings(max_examples=10)
def test_unitary_link_recovers_rotation(seed):
    rng = np.random.default_rng(seed)
    W = unitary_group.rvs(3, random_state=rng)[:2]
    A42 = random_contraction(rng, 2, 2, 0.5)
    U = unitary_group.rvs(2, random_state=rng)
    got, info = unitary_link(W, A42, U @ W, A42 @ U.conj().T)
    assert got is not None and np.abs(got - U).max() < 1e-10
    assert info["A31"] < 1e-10 and info["A43"] < 1e-10


def test_unitary_link_refuses_non_regular_and_different_products():
    h = 0.5 * np.eye(1)
    U, info = unitary_link(h, h, h, h)
    assert U is None and "regular" in info["reason"]
    U, info = unitary_link(np.eye(1), np.eye(1), np.eye(1), -np.eye(1))
    assert U is None and "product" in info["reason"]
