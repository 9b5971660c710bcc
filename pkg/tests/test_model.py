import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from polaronquench.model import (
    J0_HALF_PI,
    J1_HALF_PI,
    DegenerateHopping,
    DeviceParams,
    ModelParams,
    critical_tau,
    derive_model,
    lambda_from_device,
    phi_dc_for_lambda,
    preparation_time,
    vertex,
)

REFERENCE_DEVICE = DeviceParams(100.0, 3.5e-3, 0.3, 0.972 * math.pi)


def test_bessel_constants():
    # independent reference values
    assert J0_HALF_PI == pytest.approx(0.47200121576823476, abs=1e-15)
    assert J1_HALF_PI == pytest.approx(0.5668240889058739, abs=1e-15)


def test_tau_ec_example():
    p = derive_model(REFERENCE_DEVICE, 9, 10)
    assert p.tau_ec == pytest.approx(0.44, abs=0.005)
    assert critical_tau(REFERENCE_DEVICE) == pytest.approx(p.tau_ec, rel=1e-14)


def test_lambda_example():
    p = derive_model(REFERENCE_DEVICE, 9, 10)
    assert p.lambda_eff == pytest.approx(0.72, abs=0.01)


def test_g_example():
    p = derive_model(REFERENCE_DEVICE, 9, 10)
    g_ref = 2 * math.pi * 100 * J1_HALF_PI * 3.5e-3 / (2 * math.pi * 0.3)
    assert p.g == pytest.approx(g_ref, rel=1e-14)
    assert p.g == pytest.approx(0.661, abs=1e-3)


def test_lambda_identity_machine_precision():
    p = derive_model(REFERENCE_DEVICE, 9, 10)
    assert p.lambda_eff == pytest.approx(2 * p.g**2 * p.delta_omega / p.t0, rel=1e-14)
    assert p.lambda_eff == pytest.approx(lambda_from_device(REFERENCE_DEVICE, p.g), rel=1e-12)


@given(st.floats(0.05, 0.995))
def test_lambda_direct_formula(phi_over_pi):
    dev = DeviceParams(phi_dc=phi_over_pi * math.pi)
    p = derive_model(dev, 5, 2)
    assert p.lambda_eff == pytest.approx(lambda_from_device(dev, p.g), rel=1e-12)


def test_lambda_increases_towards_pi():
    phis = np.linspace(0.1, 0.99, 50) * math.pi
    lams = [derive_model(DeviceParams(phi_dc=f), 5, 2).lambda_eff for f in phis]
    assert np.all(np.diff(lams) > 0)


def test_phi_for_lambda_roundtrip():
    dev = DeviceParams()
    phi = phi_dc_for_lambda(dev, 0.9)
    p = derive_model(DeviceParams(phi_dc=phi), 5, 2)
    assert p.lambda_eff == pytest.approx(0.9, rel=1e-12)


def test_degenerate_hopping():
    with pytest.raises(DegenerateHopping):
        derive_model(DeviceParams(phi_dc=math.pi), 5, 2)


@pytest.mark.parametrize("kw", [dict(ej_scaled=0), dict(delta_theta=-1), dict(delta_omega_over_2pi=0),
                                dict(phi_dc=-0.1), dict(phi_dc=2 * math.pi)])
def test_device_validation(kw):
    with pytest.raises(ValueError):
        DeviceParams(**kw)


def test_model_params_validation():
    with pytest.raises(ValueError):
        ModelParams.from_couplings(1, 2, 1.0, 0.1, 1.0)
    with pytest.raises(ValueError):
        ModelParams.from_couplings(4, 2, 0.0, 0.1, 1.0)


def test_vertex_examples():
    p = ModelParams.from_couplings(5, 2, t0=1.0, g=0.3, delta_omega=2.0)
    for q in np.linspace(-math.pi, math.pi, 7):
        assert vertex(0.0, q, p) == pytest.approx(0.0, abs=1e-15)
        assert vertex(q, 0.0, p) == pytest.approx(0.0, abs=1e-15)
    assert vertex(math.pi / 2, math.pi / 2, p) == pytest.approx(4j * p.g * p.delta_omega, abs=1e-14)


def test_vertex_symmetry_on_grid():
    # gamma is purely imaginary and odd: gamma(-k,-q) = -gamma(k,q) = conj(gamma(k,q))
    p = ModelParams.from_couplings(9, 2, t0=1.0, g=0.4, delta_omega=1.0)
    grid = 2 * math.pi * np.arange(9) / 9
    for k in grid:
        for q in grid:
            v = vertex(k, q, p)
            assert v.real == 0.0
            assert vertex(-k, -q, p) == pytest.approx(-v, abs=1e-14)
            assert vertex(-k, -q, p) == pytest.approx(np.conj(v), abs=1e-14)


def test_preparation_time_examples():
    beta = 2 * math.pi * 0.010  # 10 MHz in rad/ns
    assert preparation_time(beta) == pytest.approx(25.0, rel=1e-12)
    assert preparation_time(beta, 0.5) == pytest.approx(50.0, rel=1e-12)
    assert preparation_time(3.0) == pytest.approx(math.pi / 6.0)
    with pytest.raises(ValueError):
        preparation_time(0.0)
    with pytest.raises(ValueError):
        preparation_time(1.0, 0.0)


def test_with_lattice_keeps_couplings():
    p = derive_model(REFERENCE_DEVICE, 9, 10)
    q = p.with_lattice(5, 3)
    assert (q.n_sites, q.max_phonons) == (5, 3)
    assert (q.t0, q.g, q.lambda_eff) == (p.t0, p.g, p.lambda_eff)
