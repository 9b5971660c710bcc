import math

import numpy as np
import pytest

from polaronquench.fockspace import KSector, enumerate_basis
from polaronquench.hamiltonian import SectorParts, assemble_parts, build_sector
from polaronquench.model import ModelParams, vertex
from polaronquench.oracle import (
    SizeGuard,
    bloch_state,
    build_dense,
    check_table,
    exact_evolve,
    exact_partial_trace,
    vertex_matrix_element,
)
from polaronquench.observables import entanglement_entropy


def test_check_table_passes():
    rows = check_table()
    assert rows and all(r[3] for r in rows), [r for r in rows if not r[3]]


def test_dimensions(small_params):
    assert build_dense(small_params).dimension == 60
    assert build_dense(ModelParams.from_couplings(5, 2, 1.0, 0.7, 1.3)).dimension == 105
    with pytest.raises(SizeGuard):
        build_dense(ModelParams.from_couplings(9, 6, 1.0, 0.1, 1.0))


def test_dense_hermitian_and_commutes(small_params):
    sys = build_dense(small_params)
    H = sys.hamiltonian
    assert np.abs(H - H.conj().T).max() < 1e-13
    K = sys.total_momentum_operator()
    assert np.linalg.norm(H @ K - K @ H) < 1e-10


def test_projectors(small_params):
    sys = build_dense(small_params)
    P = sys.momentum_projectors
    assert np.abs(sum(P) - np.eye(sys.dimension)).max() < 1e-12
    for p in P:
        assert np.linalg.matrix_rank(p, tol=1e-8) == sys.basis.dim


def test_free_spectrum_multiset():
    p = ModelParams.from_couplings(4, 2, t0=1.0, g=0.0, delta_omega=0.9)
    sys = build_dense(p)
    w = np.linalg.eigvalsh(sys.hamiltonian)
    b = sys.basis
    ref = sorted(-2 * math.cos(2 * math.pi * j / 4) + 0.9 * m for j in range(4) for m in b.totals)
    assert np.allclose(np.sort(w), ref, atol=1e-12)


def test_exact_evolve_basics(small_params, rng):
    sys = build_dense(small_params)
    psi = rng.standard_normal(sys.dimension) + 0j
    psi /= np.linalg.norm(psi)
    assert np.allclose(exact_evolve(sys, psi, 0.0), psi, atol=1e-13)
    assert np.linalg.norm(exact_evolve(sys, psi, 3.1)) == pytest.approx(1.0, abs=1e-13)


def test_partial_trace_product_state(small_params):
    sys = build_dense(small_params)
    psi = bloch_state(sys, math.pi / 2)
    rho = exact_partial_trace(psi, 4, sys.basis)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-13)
    assert entanglement_entropy(rho) == pytest.approx(0.0, abs=1e-12)
    assert np.linalg.matrix_rank(rho, tol=1e-10) == 1


def test_vertex_from_real_space():
    p = ModelParams.from_couplings(5, 1, t0=1.0, g=0.37, delta_omega=1.4)
    sys = build_dense(p)
    for k in range(5):
        for q in range(5):
            got = vertex_matrix_element(sys, k, q)
            want = vertex(2 * math.pi * k / 5, 2 * math.pi * q / 5, p)
            assert abs(got - want) < 1e-12


def test_sign_mutation_is_caught(small_params):
    """Flipping the sign of the Peierls part of the hop must break the block spectra."""
    b = enumerate_basis(4, 2)
    good = assemble_parts(small_params, b)
    free = assemble_parts(ModelParams.from_couplings(4, 2, 1.0, 0.0, 1.0), b)
    peierls = good.hop - free.hop
    bad = SectorParts(small_params, b, good.local, free.hop - peierls)
    sys = build_dense(small_params)
    worst = 0.0
    for k in range(4):
        e = np.linalg.eigvalsh(build_sector(small_params, KSector(k, b), bad).to_dense())
        worst = max(worst, np.abs(e - sys.block_spectrum(k)).max())
    assert worst > 1e-3
