import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from thermolens import exact_ising as ei
from thermolens.errors import CapacityError, NotPSDError, QuadratureError
from thermolens.hamiltonians import SpinChain, build_dense, gibbs_dense, local_block_hamiltonian, thermal_reduced_state
from thermolens.qstate import check_density_matrix, pauli_expectation, trace_distance

SWAP = np.eye(4)[[0, 2, 1, 3]]


def quad_G(beta, h, r):
    """scipy QUADPACK reference for G_r, split at the near-singular point."""

    def f(phi):
        w = np.hypot(np.sin(phi), h - np.cos(phi))
        ratio = beta / 2 if w < 1e-12 else np.tanh(beta * w / 2) / w
        return (np.sin(r * phi) * np.sin(phi) - np.cos(r * phi) * (np.cos(phi) - h)) * ratio / np.pi

    pts = [min(np.pi, 10.0 / max(beta, 1e-3))] if beta > 10 else None
    val, _ = integrate.quad(f, 0, np.pi, epsabs=1e-13, epsrel=1e-13, limit=2000, points=pts)
    return val


@pytest.mark.parametrize(
    "beta,h", [(0.3, 0.5), (1.0, 1.0), (10.0, 0.5), (50.0, 0.95), (500.0, 1.0), (1000.0, 0.3), (20.0, 3.0)]
)
def test_G_against_quadpack(beta, h):
    rs = np.arange(-4, 5)
    vals, err, panels = ei.integrate_G(beta, h, rs)
    assert err <= 1e-10
    for r, v in zip(rs, vals):
        assert v == pytest.approx(quad_G(beta, h, r), abs=2e-10)


def test_G_vanishes_at_infinite_temperature():
    vals, _, _ = ei.integrate_G(0.0, 0.83, np.arange(-8, 9))
    assert np.all(vals == 0.0)


@pytest.mark.parametrize("h", [10.0, 30.0])
def test_G0_polarized_limit(h):
    # second-order perturbation theory in 1/h: <Z> = 1 - 1/(4 h^2) + O(h^-4)
    assert ei.compute_G(1e6, h, 0) == pytest.approx(1 - 1 / (4 * h * h), abs=2 / h ** 4)


def test_quadrature_budget_error():
    with pytest.raises(QuadratureError) as exc:
        ei.integrate_G(50.0, 0.5, [0, 1], quad_tol=1e-16, max_panels=20)
    assert exc.value.panels <= 40
    assert np.isfinite(exc.value.estimate).all()
    assert exc.value.error_bound > 0


def test_invalid_arguments():
    with pytest.raises(ValueError):
        ei.integrate_G(-1.0, 0.5, [0])
    with pytest.raises(ValueError):
        ei.integrate_G(1.0, 0.5, [0], quad_tol=0)


def test_table_range_and_caching():
    t = ei.correlator_table(3.0, 0.4, 2)
    assert t is ei.correlator_table(3, 0.4, 2)
    with pytest.raises(IndexError):
        t.g(3)
    with pytest.raises(IndexError):
        ei.xx_correlator(t, 3)
    with pytest.raises(ValueError):
        ei.zz_correlator(t, 0)


def test_toeplitz_structure_at_r1():
    t = ei.correlator_table(4.0, 0.7, 1)
    assert ei.xx_correlator(t, 1) == pytest.approx(t.g(-1), rel=1e-15)
    assert ei.yy_correlator(t, 1) == pytest.approx(t.g(1), rel=1e-15)


def test_toeplitz_determinants_by_hand():
    t = ei.correlator_table(6.0, 0.6, 3)
    g = t.g
    xx2 = g(-1) * g(-1) - g(-2) * g(0)
    yy2 = g(1) * g(1) - g(0) * g(2)
    assert ei.xx_correlator(t, 2) == pytest.approx(xx2, abs=1e-15)
    assert ei.yy_correlator(t, 2) == pytest.approx(yy2, abs=1e-15)


def test_infinite_temperature_correlators():
    t = ei.correlator_table(0.0, 0.5, 4)
    for r in (1, 2, 4):
        assert ei.xx_correlator(t, r) == 0.0
        assert ei.yy_correlator(t, r) == 0.0
        assert ei.zz_correlator(t, r) == 0.0
    assert ei.magnetization_z(t) == 0.0
    np.testing.assert_array_equal(ei.build_pair_rdm(0.0, 0.5).rho, np.eye(4) / 4)


def test_polarized_limit_against_ed():
    # at h = 10 the ground state is 1/(4h) away from all-up per bond, so
    # correlators sit ~2.5e-3 below 1; the 12-site chain pins them down
    t = ei.correlator_table(1e6, 10.0, 1)
    rho12 = thermal_reduced_state(SpinChain(12, 10.0), 1e6, [5, 6])
    assert ei.magnetization_z(t) == pytest.approx(pauli_expectation(rho12, "ZI"), abs=1e-9)
    assert ei.zz_correlator(t, 1) == pytest.approx(pauli_expectation(rho12, "ZZ"), abs=1e-9)
    assert 0.99 < ei.zz_correlator(t, 1) < 1.0
    assert trace_distance(ei.build_pair_rdm(1e6, 10.0).rho, rho12) < 1e-9


@pytest.mark.parametrize("h", [10.0, 40.0, 300.0])
def test_polarized_pair_state(h):
    # the |11> admixture has amplitude ~1/(4h) and enters the trace distance
    # coherently, so the pair only comes within 1e-3 of |00> for h above ~250
    up = np.zeros((4, 4))
    up[0, 0] = 1.0
    d = trace_distance(ei.build_pair_rdm(1e6, h).rho, up)
    assert d == pytest.approx(1 / (4 * h), rel=0.05)
    if h >= 250:
        assert d < 1e-3


def test_magnetization_convention_against_ed(ed_bank):
    # Pauli <Z> = G_0 and ZZ = G_0^2 - G_r G_{-r}; confirmed on a 12-site chain away from criticality
    t = ei.correlator_table(5.0, 1.5, 1)
    rho = ed_bank.center_pair(12, 1.5, 5.0)
    assert ei.magnetization_z(t) == pytest.approx(pauli_expectation(rho, "ZI"), abs=1e-3)
    assert ei.zz_correlator(t, 1) == pytest.approx(pauli_expectation(rho, "ZZ"), abs=1e-3)
    assert ei.xx_correlator(t, 1) == pytest.approx(pauli_expectation(rho, "XX"), abs=1e-3)


@pytest.mark.slow
def test_correlators_against_14_site_ed(ed_bank):
    t = ei.correlator_table(10.0, 0.5, 2)
    near = ed_bank.rdm(14, 0.5, 10.0, (6, 7))
    far = ed_bank.rdm(14, 0.5, 10.0, (6, 8))
    assert t.g(1) == pytest.approx(pauli_expectation(near, "YY"), abs=2e-2)
    assert ei.zz_correlator(t, 1) == pytest.approx(pauli_expectation(near, "ZZ"), abs=2e-2)
    assert ei.magnetization_z(t) == pytest.approx(pauli_expectation(near, "ZI"), abs=2e-2)
    assert ei.xx_correlator(t, 2) == pytest.approx(pauli_expectation(far, "XX"), abs=2e-2)
    assert ei.yy_correlator(t, 2) == pytest.approx(pauli_expectation(far, "YY"), abs=2e-2)


@pytest.mark.slow
def test_pair_state_against_14_site_ed(ed_bank):
    assert trace_distance(ei.build_pair_rdm(5.0, 0.8).rho, ed_bank.center_pair(14, 0.8, 5.0)) < 2e-2


def test_cross_correlators_vanish_in_ed(ed_bank):
    rho = ed_bank.center_pair(10, 0.7, 3.0)
    for lab in ("XY", "YX", "XZ", "ZX", "YZ", "ZY", "XI", "IX", "YI", "IY"):
        assert abs(pauli_expectation(rho, lab)) < 1e-12
    pair = ei.build_pair_rdm(3.0, 0.7).rho
    for lab in ("XY", "YX", "XZ", "ZX", "YZ", "ZY", "XI", "IX", "YI", "IY"):
        assert pauli_expectation(pair, lab) == 0.0


@given(st.floats(0, 200), st.floats(0, 3), st.integers(1, 6))
def test_pair_state_invariants(beta, h, r):
    pair = ei.build_pair_rdm(beta, h, r)
    check_density_matrix(pair.rho)
    for v in pair.correlators.values():
        assert abs(v) <= 1 + 1e-9
    assert np.abs(SWAP @ pair.rho @ SWAP - pair.rho).max() <= 1e-9
    assert not pair.rho.flags.writeable


@pytest.mark.parametrize("h", [0.3, 0.8, 1.0, 1.6])
def test_large_beta_saturation(h):
    for beta in (500.0, 1000.0, 2000.0):
        d = trace_distance(ei.build_pair_rdm(beta, h).rho, ei.build_pair_rdm(2 * beta, h).rho)
        assert d <= 1e-4


@pytest.mark.parametrize("h", [0.2, 1.0, 2.5])
def test_high_temperature_expansion(h, ed_bank):
    # The pair state agrees with the two-site Gibbs state beyond first order.
    # The gap is in fact third order (halving beta divides it by ~8), which a
    # 10-site exact chain confirms independently.
    H2 = local_block_hamiltonian(SpinChain(2, h), 2)

    def dist(rho, beta):
        return trace_distance(rho, gibbs_dense(H2, beta))

    lib = dist(ei.build_pair_rdm(0.02, h).rho, 0.02) / dist(ei.build_pair_rdm(0.01, h).rho, 0.01)
    ed = dist(ed_bank.center_pair(10, h, 0.02), 0.02) / dist(ed_bank.center_pair(10, h, 0.01), 0.01)
    assert lib >= 4.0 * 0.8
    assert lib == pytest.approx(ed, rel=1e-3)
    assert lib == pytest.approx(8.0, rel=0.2)


def test_psd_failure_names_quadrature(monkeypatch):
    def bad(table, r):
        return {"II": 1.0, "XX": 1.0, "YY": 1.0, "ZZ": 1.0}

    monkeypatch.setattr(ei, "pair_coefficients", bad)
    with pytest.raises(NotPSDError, match="quad_tol"):
        ei.build_pair_rdm(1.0, 0.5)


def test_reference_pair_nearest_neighbour_is_two_site_gibbs():
    H2 = build_dense(SpinChain(2, 0.9))
    np.testing.assert_allclose(ei.reference_distant_pair(3.0, 0.9, 1), gibbs_dense(H2, 3.0), atol=1e-14)


def test_reference_pair_limits():
    np.testing.assert_allclose(ei.reference_distant_pair(0.0, 0.4, 5), np.eye(4) / 4, atol=1e-15)
    with pytest.raises(CapacityError):
        ei.reference_distant_pair(1.0, 0.5, 14)
    with pytest.raises(ValueError):
        ei.reference_distant_pair(1.0, 0.5, 0)
