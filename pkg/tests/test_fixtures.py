import numpy as np
import pytest
import sympy as sp

from curvedmodel.coeffspace import Curve
from curvedmodel.fixtures import (
    classical_degeneration, f_basis, inverse_map_theta, projection_facts, product_fixture,
    product_fixture_documents, theta_power, u_closed_coefficients, u_closed_form, u_qr_coefficients,
    u_qr_table,
)
from curvedmodel.system import system_from_json


def taylor_oracle(eps, q, r):
    """Leading ``-q`` Taylor coefficients of ``((1 + sqrt(1 + 4 eps w)) / 2)^r`` (sympy)."""
    w = sp.symbols("w")
    e = sp.nsimplify(eps)
    f = ((1 + sp.sqrt(1 + 4 * e * w)) / 2) ** r
    s = sp.series(f, w, 0, -q).removeO()
    return np.array([complex(s.coeff(w, k)) for k in range(-q)])


def test_inverse_map_theta_is_first_basis_function():
    for eps in (0.0, 0.3, -0.2 + 0.1j):
        th = inverse_map_theta(eps).theta_plus
        assert abs(th.coeff(1)[0, 0] - 1) < 1e-10
        assert max(abs(th.coeff(k)[0, 0]) for k in (0, 2, 3, 4)) < 1e-10
    with pytest.raises(ValueError):
        inverse_map_theta(0.6)


@pytest.mark.parametrize("eps", [0.1, 0.25, 0.4])
@pytest.mark.parametrize("q", [-1, -2, -3, -4])
def test_u_qr_matches_taylor_oracle(eps, q):
    for r in range(6):
        a = u_qr_coefficients(eps, q, r)
        assert np.abs(a - taylor_oracle(eps, q, r)).max() < 1e-9


@pytest.mark.parametrize("q", [-1, -2, -3])
def test_closed_forms_low_orders(q):
    for eps in (0.1, 0.4):
        for r in range(6):
            assert np.abs(u_closed_coefficients(eps, q, r) - taylor_oracle(eps, q, r)).max() < 1e-12


def test_closed_form_order_four_printed_and_corrected():
    for r in range(6):
        good = u_closed_coefficients(0.25, -4, r, printed=False)
        bad = u_closed_coefficients(0.25, -4, r, printed=True)
        assert np.abs(good - taylor_oracle(0.25, -4, r)).max() < 1e-12
        # the displayed expression has constant term 1/3 instead of 1
        assert abs(bad[0] - 1 / 3) < 1e-12


def test_u_qr_nonnegative_q_and_bad_index():
    assert np.all(u_closed_form(0.2, 0, 3, [0.1, 0.5]) == 0)
    for q in (0, 2):
        assert np.abs(u_qr_coefficients(0.2, q, 3)).max() < 1e-12
    with pytest.raises(ValueError):
        u_closed_form(0.2, -5, 1, 0.3)


def test_u_qr_table_shape():
    T = u_qr_table(0.1)
    assert len(T["printed"]) == len(T["corrected"]) == 24
    assert max(T["corrected"].values()) < 1e-9
    assert {k for k, v in T["printed"].items() if v > 1e-9} == {(-4, r) for r in range(6)}


def test_f_basis_values_and_ranges():
    c = Curve(0.2, 256)
    F = f_basis(c, 5, 3, 1, 2)
    assert np.abs(F.samples[:, 0, 0] - c.z ** 4 * c.zeta ** -2).max() < 1e-9
    with pytest.raises(ValueError):
        f_basis(c, 3, 1, 2, 1)
    with pytest.raises(ValueError):
        f_basis(c, 5, 5, 3, 3)


def test_theta_power_is_exact_monomial():
    c = Curve(0.3, 64)
    th = theta_power(c, 3).theta_plus
    assert np.abs(th.samples[:, 0, 0] - c.z ** 3).max() < 1e-14


@pytest.mark.parametrize("eps", [0.0, 0.2])
def test_projection_facts(eps):
    f = projection_facts(eps)
    assert f["dims"] == [1, 2, 1]
    assert f["K21_in_K31"] < 1e-10
    if eps:
        assert f["P21_f1_53"] < 1e-7 and f["P21_f2_53"] < 1e-7
        assert f["K32_from_K31"] >= 0.01 and f["sum_vs_K31"] >= 0.01
    else:
        # on the disk the theta chain ranges are nested
        assert f["K32_from_K31"] < 1e-10


def test_product_fixture_matrices():
    eps = 0.3
    fx = product_fixture(eps)
    assert np.allclose(fx.X, np.triu(fx.X))
    assert np.allclose(np.diag(fx.X), 1)
    assert np.allclose(np.sort(np.abs(fx.X[np.abs(fx.X) > 1e-12]))[:2], [2 * eps ** 3, eps ** 2])


def test_product_fixture_documents_round_trip():
    d = product_fixture_documents(0.2)
    fx = product_fixture(0.2)
    for key, s in (("sigma1", fx.sigma1), ("sigma2", fx.sigma2), ("sigma3", fx.sigma3)):
        back = system_from_json(d[key])
        assert np.abs(back.T - s.T).max() < 1e-15 and np.abs(back.M - s.M).max() < 1e-15
    X = np.array(d["expected"]["X"])
    assert np.abs(X[..., 0] + 1j * X[..., 1] - fx.X).max() < 1e-15


def test_classical_degeneration(rng):
    r = classical_degeneration(rng, count=5)
    assert r["coupling_error"] <= 1e-10 and r["projection_asymmetry"] <= 1e-12
