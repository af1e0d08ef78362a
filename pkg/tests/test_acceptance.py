"""Acceptance suite: each test prints one PASS/FAIL line and asserts at the stated tolerance."""

import time

import numpy as np
import pytest
from scipy.stats import unitary_group

from curvedmodel.coeffspace import Curve, fit_field
from curvedmodel.commands import ncharfn_distance
from curvedmodel.config import ModelOrders
from curvedmodel.factorization import (
    contraction_triple_tests, regular_criterion_crosscheck, subspace_factorization_correspondence,
)
from curvedmodel.fixtures import (
    blaschke, classical_degeneration, projection_facts, random_poly_ncharfn, product_fixture,
    product_fixture_report, theta_power, u_qr_table,
)
from curvedmodel.nmodel import build_model, lemma_suite, model_charfn
from curvedmodel.schur import WeightedSchurFunction
from curvedmodel.system import associator, ctot_check, product, random_colligation

pytestmark = pytest.mark.slow
SEED = 20240611


@pytest.fixture
def report(capsys):
    def emit(k: int, title: str, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n[{k:2d}] {'PASS' if ok else 'FAIL'}  {title}: {detail}")

    return emit


def test_product_fixture(report):
    worst, slowest, ok = 0.0, 0.0, True
    for eps in (0.1, 0.2, 0.4):
        t = time.perf_counter()
        fx = product_fixture(eps, grid=1024, K=48)
        lhs, _, _, _ = associator(fx.sigma1, fx.sigma2, fx.sigma3)
        dt = time.perf_counter() - t
        e = eps
        M = np.array([[1, e, -e ** 2, 2 * e ** 3]])
        N = np.array([[e ** 3], [-e ** 2], [2 * e], [1]])
        T = lhs.T
        upper = float(np.max(np.abs(np.tril(T))))
        coupling = sorted(np.round(np.abs(T[np.abs(T) > 1e-12]), 12))
        err = max(float(np.max(np.abs(lhs.M - M))), float(np.max(np.abs(lhs.N - N))), upper,
                  float(np.max(np.abs(T - fx.lhs["T"]))))
        ok &= err <= 1e-8 and dt <= 10 and set(coupling) <= {1.0, round(e, 12)}
        worst, slowest = max(worst, err), max(slowest, dt)
    report(1, "product fixture", ok, f"max error {worst:.2e}, slowest {slowest:.2f} s")
    assert ok


def test_associativity_witness(report):
    ok, worst, gap_margin = True, 0.0, np.inf
    for eps in (0.1, 0.2, 0.4):
        r = product_fixture_report(eps)
        fx = product_fixture(eps)
        X = fx.X
        printed = np.eye(4, dtype=complex)
        printed[0, 2], printed[0, 3] = -eps ** 2, 2 * eps ** 3
        _, _, wit, _ = associator(fx.sigma1, fx.sigma2, fx.sigma3)
        werr = float(np.max(np.abs(wit.X - printed))) if wit is not None else np.inf
        ok &= (r["association_difference"] >= eps ** 2 / 2 and werr <= 1e-8 and r["witness_unique"]
               and np.abs(X - printed).max() == 0)
        worst = max(worst, werr)
        gap_margin = min(gap_margin, r["association_difference"] / (eps ** 2 / 2))
    report(2, "associativity witness", ok,
           f"witness error {worst:.2e}, difference / (eps^2/2) >= {gap_margin:.2f}, unique")
    assert ok


def test_u_qr_conformance(report):
    worst, bad, corrected = 0.0, [], 0.0
    for eps in (0.1, 0.25, 0.4):
        full = u_qr_table(eps)
        corrected = max(corrected, max(full["corrected"].values()))
        tab = full["printed"]
        for key, v in tab.items():
            worst = max(worst, v)
            if v > 1e-9:
                bad.append((eps, *key))
    qs = sorted({b[1] for b in bad})
    ok = not bad
    report(3, "u_qr closed forms", ok,
           f"max coefficient error {worst:.2e}; {len(bad)} of 72 cases miss, all with q in {qs} "
           f"(numeric values match the Taylor-consistent form to {corrected:.1e})"
           if bad else f"max coefficient error {worst:.2e}")
    assert ok


def test_projection_fixtures(report):
    f = projection_facts(0.2)
    ok = (f["P21_f1_53"] <= 1e-7 and f["P21_f2_53"] <= 1e-7 and f["K21_in_K31"] <= 1e-7
          and f["K32_from_K31"] >= 0.01 and f["sum_vs_K31"] >= 0.01)
    report(4, "projection fixtures", ok,
           f"relative errors {f['P21_f1_53']:.1e}, {f['P21_f2_53']:.1e}; K21 in K31 {f['K21_in_K31']:.1e}; "
           f"K32 off K31 {f['K32_from_K31']:.3f}; sum gap {f['sum_vs_K31']:.3f}")
    assert ok


def test_model_round_trip(report):
    rng = np.random.default_rng(SEED)
    orders = ModelOrders(neg=16)
    t, worst = time.perf_counter(), 0.0
    for _ in range(50):
        n = int(rng.integers(2, 5))
        dims = rng.integers(1, 4, size=n)
        eps = float(rng.uniform(0, 0.4))
        N = random_poly_ncharfn(rng, n, dims, eps, orders=orders)
        worst = max(worst, ncharfn_distance(model_charfn(build_model(N, orders)), N))
    dt = time.perf_counter() - t
    ok = worst <= 1e-7 and dt <= 60
    report(5, "model round trip", ok, f"50 instances, sup error {worst:.2e}, {dt:.1f} s")
    assert ok


def test_lemma_suites(report):
    rng = np.random.default_rng(SEED + 1)
    orders = ModelOrders()
    worst, where = 0.0, None
    for _ in range(100):
        n = int(rng.integers(2, 5))
        dims = rng.integers(1, 4, size=n)
        eps = float(rng.uniform(0, 0.4))
        Pi = build_model(random_poly_ncharfn(rng, n, dims, eps, orders=orders), orders)
        for name, (r, w) in lemma_suite(Pi).items():
            if r > worst:
                worst, where = r, (name, w)
    ok = worst <= 1e-7
    report(6, "projection identity suites", ok, f"100 models, worst {worst:.2e} ({where[0]})")
    assert ok


def test_regularity_agreement(report):
    rng = np.random.default_rng(SEED + 2)
    disagree, counts = [], {True: 0, False: 0}
    for i in range(30):
        p = int(rng.integers(1, 3))
        s1 = random_colligation(int(rng.integers(1, 3)), p, rng)
        s2 = random_colligation(int(rng.integers(1, 3)), p, rng)
        r = regular_criterion_crosscheck(s2.theta, s1.theta, systems=(s2, s1))
        counts[r["regular"]] += 1
        if not r["agree"]:
            disagree.append(("pair", i))
    c = Curve(0.2, ModelOrders(4, 40, 8).grid_for(3))
    half = WeightedSchurFunction.unweighted(fit_field(c, np.full(c.grid, 0.5, dtype=complex), 8))
    th = theta_power(c, 1)
    anchors = {"halves": (half, half, False), "inner": (th, th, True)}
    for name, (a, b, expect) in anchors.items():
        r = regular_criterion_crosscheck(a, b)
        if not r["agree"] or r["regular"] != expect:
            disagree.append(name)
    triple_regular = 0
    for _ in range(100):
        d1, d2, d3 = (int(x) for x in rng.integers(1, 4, size=3))
        A21 = rng.normal(size=(d2, d1)) + 1j * rng.normal(size=(d2, d1))
        A32 = rng.normal(size=(d3, d2)) + 1j * rng.normal(size=(d3, d2))
        A21 /= np.linalg.norm(A21, 2) * rng.uniform(1, 2)
        A32 /= np.linalg.norm(A32, 2) * rng.uniform(1, 2)
        if rng.integers(2) and d2 >= d1:
            A21 = unitary_group.rvs(d2, random_state=rng)[:, :d1] if d2 > 1 else np.ones((1, 1))
        if rng.integers(2) and d3 >= d2:
            A32 = unitary_group.rvs(d3, random_state=rng)[:, :d2] if d3 > 1 else np.ones((1, 1))
        r = contraction_triple_tests(A21, A32)
        triple_regular += r["regular_defects"]
        if not r["agree"]:
            disagree.append("triple")
    ok = not disagree
    report(7, "regularity agreement", ok,
           f"30 pairs ({counts[True]} regular), 2 anchors, 100 triples ({triple_regular} regular); "
           f"{len(disagree)} disagreement(s)")
    assert ok


def test_invariant_subspace_correspondence(report):
    t = time.perf_counter()
    c = Curve(0, 4 * (40 + 2 * 40) + 4)
    cases = [[0.5], [0, -0.4], [0, 0.5, -1 / 3], [0, 0.5, -0.4, 0.3j]]
    ok, worst, sizes = True, 0.0, []
    for zeros in cases:
        C = subspace_factorization_correspondence(blaschke(c, zeros), budget=32)
        sizes.append(len(C.subspaces))
        worst = max(worst, max(C.gaps))
        ok &= C.ok and len(C.subspaces) == 2 ** len(C.subspaces[-1].basis.T) and all(C.regular)
    dt = time.perf_counter() - t
    ok &= worst <= 1e-6 and dt <= 30
    report(8, "invariant subspaces vs regular factorizations", ok,
           f"lattice sizes {sizes}, gap {worst:.1e}, {dt:.1f} s")
    assert ok


def test_classical_degeneration(report):
    r = classical_degeneration(np.random.default_rng(SEED + 3), count=20)
    ok = r["coupling_error"] <= 1e-10 and r["projection_asymmetry"] <= 1e-12
    report(9, "classical degeneration", ok,
           f"coupling error {r['coupling_error']:.1e}, projection asymmetry {r['projection_asymmetry']:.1e}")
    assert ok


def test_transfer_realization(report):
    worst = 0.0
    for eps in (0.1, 0.2, 0.4):
        fx = product_fixture(eps, grid=1024, K=48)
        s21 = product(fx.sigma2, fx.sigma1)
        curve = fx.sigma1.curve
        K = (curve.grid - 4) // 4
        t21 = fx.sigma2.theta.theta_plus.samples_on(curve) @ fx.sigma1.theta.theta_plus.samples_on(curve)
        theta21 = WeightedSchurFunction.unweighted(fit_field(curve, t21, K))
        inside = [0.3, 0.2j, -0.25, 0.1 + 0.1j]
        outside = [3, -2.5j, 2 + 2j, -4]
        assert all(curve.inside(z) for z in inside) and not any(curve.inside(z) for z in outside)
        worst = max(worst, ctot_check(s21, inside + outside, theta21))
    ok = worst <= 1e-7
    report(10, "transfer function realization", ok, f"8 probes x 3 epsilons, residual {worst:.2e}")
    assert ok
