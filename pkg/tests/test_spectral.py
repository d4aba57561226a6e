import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose

from stla import (
    Kind,
    ZeroGradientError,
    catalog_lookup,
    classify,
    eigh,
    petrov_check,
    quad_form,
    second_order_data,
    synthesize_from_K,
    synthesize_from_S,
)
from stla.spectral import build_K_from

SQRT2 = math.sqrt(2.0)


def test_eigh_rank_one_negative():
    dec = eigh([[-1.0, -1.0], [-1.0, -1.0]])
    assert_allclose(dec.eigenvalues, [-2.0, 0.0], atol=1e-14)
    assert_allclose(dec.eigenvectors[:, 0], [1 / SQRT2, 1 / SQRT2], atol=1e-14)


def test_eigh_identity():
    dec = eigh(np.eye(4))
    assert_allclose(dec.eigenvalues, np.ones(4))
    assert_allclose(dec.eigenvectors, np.eye(4))


def test_eigh_heisenberg_K(oracle):
    cfg = catalog_lookup("heisenberg")
    data = second_order_data(cfg.system, cfg.target, oracle, [0.0, 0.0, 1.0])
    dec = eigh(data.K)
    lam = 1.0 - SQRT2
    assert dec.eigenvalues[0] == pytest.approx(lam, abs=1e-12)
    assert dec.eigenvalues[1] == pytest.approx(lam, abs=1e-12)  # multiplicity 2
    assert dec.eigenvalues[2] == pytest.approx(1.0 + SQRT2, abs=1e-12)
    resid = data.K @ dec.eigenvectors - dec.eigenvectors * dec.eigenvalues
    assert np.max(np.abs(resid)) <= 1e-10 * np.max(np.sum(np.abs(data.K), axis=1))


def test_eigh_rejects_non_symmetric():
    with pytest.raises(ValueError, match="symmetric"):
        eigh([[0.0, 1.0], [0.0, 0.0]])


def test_eigh_deterministic():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((6, 6))
    A = A + A.T
    first = eigh(A)
    second = eigh(A.copy())
    assert np.array_equal(first.eigenvalues, second.eigenvalues)
    assert np.array_equal(first.eigenvectors, second.eigenvectors)


def test_eigh_sign_convention():
    dec = eigh(np.diag([3.0, 1.0, 2.0]))
    for k in range(3):
        col = dec.eigenvectors[:, k]
        lead = col[np.nonzero(np.abs(col) > 1e-12)[0][0]]
        assert lead > 0


_sym_entries = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, (5, 5), elements=_sym_entries))
def test_eigh_matches_numpy(raw):
    A = (raw + raw.T) / 2.0
    dec = eigh(A)
    expected = np.sort(np.linalg.eigvalsh(A))
    scale = max(1.0, float(np.max(np.abs(expected))))
    assert np.max(np.abs(dec.eigenvalues - expected)) <= 1e-10 * scale
    gram = dec.eigenvectors.T @ dec.eigenvectors
    assert np.max(np.abs(gram - np.eye(5))) <= 1e-10


def test_petrov_constant_field_transversal(oracle):
    cfg = catalog_lookup("constant-field")
    result = petrov_check(cfg.system, cfg.target, oracle, [0.0, 1.0])
    assert result is not None
    a, rho = result
    assert_allclose(a, [1.0], atol=1e-14)
    assert rho == pytest.approx(1.0, abs=1e-14)


def test_petrov_constant_field_tangent_on_axis(oracle):
    cfg = catalog_lookup("constant-field")
    assert petrov_check(cfg.system, cfg.target, oracle, [1.0, 0.0]) is None


def test_petrov_heisenberg_tangent(oracle):
    cfg = catalog_lookup("heisenberg")
    assert petrov_check(cfg.system, cfg.target, oracle, [0.0, 0.0, 1.0]) is None


def test_petrov_zero_gradient_distinct_error(oracle):
    cfg = catalog_lookup("heisenberg")
    with pytest.raises(ZeroGradientError):
        petrov_check(cfg.system, cfg.target, oracle, [0.0, 0.0, 0.0])


def test_classify_rotation(oracle):
    cfg = catalog_lookup("rotation")
    cert = classify(cfg.system, cfg.target, oracle, [0.0, 1.0])
    assert cert.kind == Kind.SECOND_ORDER
    assert cert.lambda_min == pytest.approx(-2.0, abs=1e-12)
    assert cert.rho == pytest.approx(2.0, abs=1e-12)
    assert_allclose(cert.a1, [1.0], atol=1e-12)
    assert_allclose(cert.a2, [1.0], atol=1e-12)


def test_classify_dubins_non_symmetric_route(oracle):
    cfg = catalog_lookup("dubins")
    cert = classify(cfg.system, cfg.target, oracle, [0.0, 1.0, 0.0])
    assert cert.kind == Kind.SECOND_ORDER
    assert cert.symmetry_defect == pytest.approx(1.0, abs=1e-12)
    assert cert.s_route_negative and cert.k_route_negative


def test_classify_transversal_field(make_models, oracle):
    system, target = make_models(("x", "y"), [["0"], ["1"]], "y")
    cert = classify(system, target, oracle, [0.0, 0.0])
    assert cert.kind == Kind.FIRST_ORDER
    assert cert.rho == pytest.approx(1.0, abs=1e-14)
    assert_allclose(cert.a1, [-1.0])
    assert_allclose(cert.a2, cert.a1)


def test_classify_inconclusive_convex_tangent(make_models, oracle, grid_min_h):
    # constant tangent field against a convex target: S positive semidefinite
    system, target = make_models(("x", "y"), [["1"], ["0"]], "(x^2 + y^2)/2")
    cert = classify(system, target, oracle, [0.0, 1.0])
    assert cert.kind == Kind.INCONCLUSIVE
    assert not cert.s_route_negative and not cert.k_route_negative
    data = second_order_data(system, target, oracle, [0.0, 1.0])
    assert grid_min_h(data.K, system.m) >= -1e-12


def test_classify_sets_reference_level(oracle):
    cfg = catalog_lookup("heisenberg")
    classify(cfg.system, cfg.target, oracle, [0.0, 0.0, 1.0])
    assert cfg.target.reference_level == pytest.approx(0.5)


def test_synthesize_from_K_heisenberg(oracle):
    cfg = catalog_lookup("heisenberg")
    data = second_order_data(cfg.system, cfg.target, oracle, [0.0, 0.0, 1.0])
    a1, a2, lam = synthesize_from_K(data.K)
    assert lam == pytest.approx(1.0 - SQRT2, abs=1e-12)
    assert np.linalg.norm(a1) == pytest.approx(1.0, abs=1e-9)
    assert np.linalg.norm(a2) == pytest.approx(1.0, abs=1e-9)
    # membership in the eigenspace spanned by the two documented vectors
    w1 = np.array([-SQRT2 / 2, SQRT2 / 2, 1.0, 0.0])
    w2 = np.array([-SQRT2 / 2, -SQRT2 / 2, 0.0, 1.0])
    basis, _ = np.linalg.qr(np.column_stack([w1, w2]))
    v = np.concatenate([a1, a2])
    v /= np.linalg.norm(v)
    proj = basis @ (basis.T @ v)
    assert np.linalg.norm(v - proj) <= 1e-8
    assert quad_form(data.K, a1, a2).h == pytest.approx(2.0 * lam, abs=1e-12)


def test_synthesize_from_K_rotation():
    K = np.array([[-1.0, -1.0], [-1.0, -1.0]])
    a1, a2, lam = synthesize_from_K(K)
    assert lam == pytest.approx(-2.0)
    assert_allclose(a1, [1.0], atol=1e-12)
    assert_allclose(a2, [1.0], atol=1e-12)


def test_synthesize_from_K_requires_negative():
    with pytest.raises(ValueError, match="no eigenvalue"):
        synthesize_from_K(np.eye(4))


def test_synthesize_from_S_symmetric_negative():
    a1, a2 = synthesize_from_S(-np.eye(3))
    assert_allclose(a1, [1.0, 0.0, 0.0])
    assert_allclose(a2, a1)


def test_synthesize_from_S_dubins(oracle):
    S = np.array([[1.0, 0.0], [1.0, 1.0]])
    a1, a2 = synthesize_from_S(S)
    value = quad_form(build_K_from(S), a1, a2)
    lam = np.linalg.norm(S @ a1)
    assert value.h < 0.0
    assert value.h == pytest.approx(-2.0 * lam * (1.0 + a1 @ a2), rel=1e-10)


def test_synthesize_from_S_shear():
    S = np.array([[0.0, 0.0], [1.0, 1.0]])
    a1, a2 = synthesize_from_S(S)
    assert quad_form(build_K_from(S), a1, a2).h < 0.0


def test_synthesize_from_S_rejects_psd_symmetric():
    with pytest.raises(ValueError, match="semidefinite"):
        synthesize_from_S(np.eye(2))


@settings(max_examples=150, deadline=None)
@given(arrays(np.float64, (3, 3), elements=_sym_entries))
def test_eigen_halves_have_equal_norms(S):
    # every eigenpair of K with clearly nonzero eigenvalue splits into
    # equal-norm control halves
    K = build_K_from(S)
    dec = eigh(K)
    scale = max(1.0, float(np.max(np.abs(dec.eigenvalues))))
    for k, lam in enumerate(dec.eigenvalues):
        if abs(lam) <= 1e-6 * scale:
            continue
        v = dec.eigenvectors[:, k]
        assert abs(np.linalg.norm(v[:3]) - np.linalg.norm(v[3:])) <= 1e-8


def test_grid_minimum_matches_eigenvalue(oracle, grid_min_h):
    for name in ("rotation", "constant-field", "shear", "heisenberg", "dubins"):
        cfg = catalog_lookup(name)
        data = second_order_data(cfg.system, cfg.target, oracle, cfg.point)
        lam = eigh(data.K).eigenvalues[0]
        gm = grid_min_h(data.K, cfg.system.m)
        tol = 0.05 * np.max(np.sum(np.abs(data.K), axis=1))
        assert abs(gm - min(0.0, 2.0 * lam)) <= tol
        assert gm <= 1e-12  # the minimum is always nonpositive
        assert gm >= min(0.0, 2.0 * lam) - 1e-12  # no grid pair beats the eigenvalue bound


def test_classify_equivalence_sample(oracle, tangent_models):
    rng = np.random.default_rng(23)
    for _ in range(60):
        system, target, point = tangent_models(rng)
        cert = classify(system, target, oracle, point)
        assert cert.s_route_negative == cert.k_route_negative
