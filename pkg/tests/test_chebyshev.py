import math

import numpy as np
import pytest
import scipy.linalg

from conftest import random_state
from polaronquench import chebyshev
from polaronquench.chebyshev import EvolutionLog, UnitarityViolation, chebyshev_coefficients, evolve, plan, step
from polaronquench.eigensolver import extremal_eigs
from polaronquench.fockspace import KSector, enumerate_basis, zero_phonon_index
from polaronquench.hamiltonian import build_sector, rescale
from polaronquench.special import bessel_j_series


def _op(params, k):
    h = build_sector(params, KSector(k, enumerate_basis(params.n_sites, params.max_phonons)))
    w = np.linalg.eigvalsh(h.to_dense())
    return h, rescale(h, w[0], w[-1])


class _Scalar:
    """1x1 'Hamiltonian' E for the scalar check."""

    def __init__(self, e):
        self.e = e
        self.dim = 1

    def apply_into(self, x, out, *, shift=0.0, scale=1.0, alpha=1.0, y=None, beta=0.0):
        yy = 0 if y is None else beta * y
        out[:] = alpha * (self.e - shift) * x / scale + yy
        return out


def test_scalar_exponential():
    from polaronquench.hamiltonian import RescaledOperator

    E = 0.7
    op = RescaledOperator(_Scalar(E), a_scale=1.3, b_shift=0.2, epsilon_pad=0.0, e_min=0, e_max=0)
    op.base.apply_into  # noqa: B018
    pl = plan(op, 0.9)
    out = step(pl, np.array([1.0 + 0j]))
    assert abs(out[0] - np.exp(-1j * E * 0.9)) < 1e-12


def test_coefficients():
    c = chebyshev_coefficients(2.3, 10)
    for p in range(11):
        assert c[p] == pytest.approx((-1j) ** p * bessel_j_series(p, 2.3), abs=1e-15)


def test_small_argument_plan(small_params):
    _, op = _op(small_params, 1)
    pl = plan(op, 1e-9)
    assert pl.n_cheb == chebyshev.MIN_ORDER
    assert abs(pl.coeffs[0] - 1) < 1e-12 and np.all(np.abs(pl.coeffs[1:]) < 1e-8)


def test_tail_decay(mid_params):
    _, op = _op(mid_params, 1)
    pl = plan(op, 2.0, tail_tol=1e-14)
    x = op.a_scale * 2.0
    assert pl.tail < 1e-14
    mags = np.abs(pl.coeffs)
    p0 = int(math.ceil(x)) + 1
    # past the turning point each ratio shrinks: superexponential decay
    ratios = mags[p0 + 1 :] / mags[p0:-1]
    assert np.all(np.diff(ratios) < 0)


def test_fixed_order_override(mid_params):
    _, op = _op(mid_params, 1)
    assert plan(op, 0.5, n_cheb=9).n_cheb == 9
    with pytest.raises(ValueError):
        plan(op, 0.5, n_cheb=0)
    with pytest.raises(ValueError):
        plan(op, 0.0)
    with pytest.raises(ValueError):
        plan(op, 0.1, tail_tol=0)


def test_one_step_matches_dense_exponential(small_params, rng):
    h, op = _op(small_params, 1)
    pl = plan(op, 0.37)
    psi = random_state(h.dim, rng)
    ref = scipy.linalg.expm(-1j * 0.37 * h.to_dense()) @ psi
    assert np.max(np.abs(step(pl, psi) - ref)) < 1e-10


def test_semigroup(mid_params, rng):
    h, op = _op(mid_params, 2)
    psi = random_state(h.dim, rng)
    full = step(plan(op, 0.8), psi)
    half = plan(op, 0.4)
    two = step(half, step(half, psi))
    assert np.max(np.abs(full - two)) < 1e-9


def test_evolve_zero_steps_and_observer(mid_params, rng):
    h, op = _op(mid_params, 1)
    psi = random_state(h.dim, rng)
    pl = plan(op, 0.1)
    assert np.array_equal(evolve(pl, psi, 0), psi)
    seen = []
    evolve(pl, psi, 3, observer=lambda i, t, s: seen.append((i, t)))
    assert seen == [(1, 0.1), (2, pytest.approx(0.2)), (3, pytest.approx(0.30000000000000004))]
    with pytest.raises(ValueError):
        evolve(pl, psi, -1)


def test_k0_state_stationary(mid_params):
    h, op = _op(mid_params, 0)
    z = zero_phonon_index(h.parts.basis)
    psi = np.zeros(h.dim, complex)
    psi[z] = 1
    pl = plan(op, 0.25)
    out = evolve(pl, psi, 200)
    assert abs(abs(out[z]) ** 2 - 1) < 1e-10
    assert out[z] == pytest.approx(np.exp(2j * mid_params.t0 * 50.0), abs=1e-9)


def test_long_run_unitarity_and_energy(mid_params, rng):
    h, op = _op(mid_params, 2)
    psi = random_state(h.dim, rng)
    e0 = h.expectation(psi)
    log = EvolutionLog()
    energies = []
    evolve(plan(op, 0.05), psi, 2000, observer=lambda i, t, s: energies.append(h.expectation(s)) if i % 100 == 0 else None,
           log=log)
    assert log.max_drift < 1e-6
    assert max(abs(e - e0) for e in energies) < 1e-8 * abs(e0)


def test_refinement(mid_params, rng):
    h, op = _op(mid_params, 1)
    psi = random_state(h.dim, rng)
    a = evolve(plan(op, 0.1), psi, 20)
    b = evolve(plan(op, 0.05), psi, 40)
    c = evolve(plan(op, 0.1, n_cheb=plan(op, 0.1).n_cheb + 4), psi, 20)
    assert np.max(np.abs(a - b)) < 1e-8
    assert np.max(np.abs(a - c)) < 1e-8


def test_unitarity_violation(mid_params, rng):
    h, op = _op(mid_params, 1)
    pl = plan(op, 0.1, n_cheb=1)  # far too short an expansion for this step
    bad = chebyshev.PropagatorPlan(op, pl.dt, pl.n_cheb, pl.coeffs * 1.01, pl.phase)
    with pytest.raises(UnitarityViolation) as err:
        evolve(bad, random_state(h.dim, rng), 5)
    assert err.value.step == 1
    with pytest.raises(ValueError):
        step(pl, np.ones(h.dim + 1))
