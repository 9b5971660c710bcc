import math

import numpy as np
import pytest

from conftest import random_state
from polaronquench.fockspace import KSector, enumerate_basis, zero_phonon_index
from polaronquench.hamiltonian import (
    DegenerateSpectrum,
    DimensionMismatch,
    assemble_parts,
    build_sector,
    dump_sector,
    load_sector_matrix,
    matvec,
    rescale,
)
from polaronquench.model import ModelParams
from polaronquench.oracle import build_dense


def _sector(params, k):
    return build_sector(params, KSector(k, enumerate_basis(params.n_sites, params.max_phonons)))


def test_free_spectrum():
    p = ModelParams.from_couplings(5, 2, t0=1.3, g=0.0, delta_omega=0.7)
    b = enumerate_basis(5, 2)
    parts = assemble_parts(p, b)
    for k in range(5):
        h = build_sector(p, KSector(k, b), parts)
        got = np.sort(np.linalg.eigvalsh(h.to_dense()))
        # free model: one excitation with total momentum shared with phonons
        # spectrum = union over phonon configurations (orbits) of -2 t0 cos(K - q_ph) + dw * m
        dense = build_dense(p)
        want = np.sort(dense.block_spectrum(k))
        assert np.max(np.abs(got - want)) < 1e-12
        # lowest state is the bare band state when it lies below the phonon continuum
        K = h.sector.k_value
        assert got[0] == pytest.approx(min(-2 * p.t0 * math.cos(K), got[0]), abs=1e-12)


def test_free_lowest_equals_band():
    p = ModelParams.from_couplings(9, 2, t0=1.0, g=0.0, delta_omega=5.0)
    b = enumerate_basis(9, 2)
    parts = assemble_parts(p, b)
    for k in range(9):
        h = build_sector(p, KSector(k, b), parts)
        e = np.linalg.eigvalsh(h.to_dense())[0]
        assert e == pytest.approx(-2 * math.cos(h.sector.k_value), abs=1e-12)


def test_k0_bare_state_is_eigenvector(mid_params):
    h = _sector(mid_params, 0)
    z = zero_phonon_index(h.parts.basis)
    v = np.zeros(h.dim, complex)
    v[z] = 1
    assert np.max(np.abs(h.matvec(v) + 2 * mid_params.t0 * v)) < 1e-14


def test_example_against_oracle(small_params):
    # N=4, M=2, g=0.5, dw=1, t0=1, K=pi/2
    h = _sector(small_params, 1)
    assert h.sector.k_value == pytest.approx(math.pi / 2)
    sys = build_dense(small_params)
    got = np.linalg.eigvalsh(h.to_dense())
    assert np.max(np.abs(got - sys.block_spectrum(1))) < 1e-10


def test_matvec_against_oracle(small_params, rng):
    sys = build_dense(small_params)
    b = sys.basis
    for k in range(4):
        h = build_sector(small_params, KSector(k, b))
        V = sys.sector_embedding(k)
        x = random_state(b.dim, rng)
        ref = V.conj().T @ (sys.hamiltonian @ (V @ x))
        assert np.max(np.abs(h.matvec(x) - ref)) < 1e-13


def test_hermiticity(mid_params, rng):
    b = enumerate_basis(5, 3)
    parts = assemble_parts(mid_params, b)
    for k in range(5):
        h = build_sector(mid_params, KSector(k, b), parts)
        m = h.to_csr()
        i = rng.integers(0, h.dim, 100)
        j = rng.integers(0, h.dim, 100)
        assert np.array_equal(m[i, j].A1, np.conj(m[j, i].A1))
        x = random_state(h.dim, rng)
        assert abs(np.vdot(x, h.matvec(x)).imag) < 1e-12


def test_zero_vector_and_dimension_check(small_params):
    h = _sector(small_params, 2)
    assert not np.any(h.matvec(np.zeros(h.dim)))
    with pytest.raises(DimensionMismatch):
        h.matvec(np.zeros(h.dim + 1))


def test_row_sparsity_bound(mid_params):
    b = enumerate_basis(5, 3)
    parts = assemble_parts(mid_params, b)
    for k in range(5):
        h = build_sector(mid_params, KSector(k, b), parts)
        m = h.to_csr()
        assert np.diff(m.indptr).max() <= h.nnz_bound


def test_apply_into_affine_form(mid_params, rng):
    h = _sector(mid_params, 1)
    x = random_state(h.dim, rng)
    y = random_state(h.dim, rng)
    out = np.empty(h.dim, complex)
    h.apply_into(x, out, shift=0.3, scale=2.5, alpha=2.0, y=y, beta=-1.0)
    ref = 2.0 * (h.to_dense() @ x - 0.3 * x) / 2.5 - y
    assert np.max(np.abs(out - ref)) < 1e-13


def test_time_reversal_pairs(mid_params):
    b = enumerate_basis(5, 3)
    parts = assemble_parts(mid_params, b)
    for k in range(1, 3):
        e1 = np.linalg.eigvalsh(build_sector(mid_params, KSector(k, b), parts).to_dense())
        e2 = np.linalg.eigvalsh(build_sector(mid_params, KSector(5 - k, b), parts).to_dense())
        assert np.max(np.abs(e1 - e2)) < 1e-10


def test_twisted_sector_matches_grid(mid_params):
    b = enumerate_basis(5, 3)
    parts = assemble_parts(mid_params, b)
    grid = build_sector(mid_params, KSector(2, b), parts).to_dense()
    tw = build_sector(mid_params, KSector.at_momentum(4 * math.pi / 5, b), parts).to_dense()
    assert np.max(np.abs(grid - tw)) < 1e-14
    # 2 pi periodicity in the twist
    a = build_sector(mid_params, KSector.at_momentum(0.3, b), parts).to_dense()
    c = build_sector(mid_params, KSector.at_momentum(0.3 + 2 * math.pi, b), parts).to_dense()
    assert np.max(np.abs(a - c)) < 1e-13


def test_parts_reuse_guard(small_params, mid_params):
    b = enumerate_basis(4, 2)
    parts = assemble_parts(small_params, b)
    other = ModelParams.from_couplings(4, 2, t0=1.0, g=0.6, delta_omega=1.0)
    with pytest.raises(ValueError):
        build_sector(other, KSector(0, b), parts)
    with pytest.raises(ValueError):
        assemble_parts(mid_params, b)


def test_rescale_examples(small_params, rng):
    h = _sector(small_params, 1)
    op = rescale(h, -2.0, 2.0, 1e-3)
    assert op.a_scale == pytest.approx(2.002)
    assert op.b_shift == 0.0
    w, V = np.linalg.eigh(h.to_dense())
    op = rescale(h, w[0], w[-1])
    for i in (0, len(w) // 2, len(w) - 1):
        v = V[:, i]
        assert np.max(np.abs(op.matvec(v) - (w[i] - op.b_shift) / op.a_scale * v)) < 1e-12
    scaled = (w - op.b_shift) / op.a_scale
    assert np.max(np.abs(scaled)) == pytest.approx((w[-1] - w[0]) / (w[-1] - w[0] + op.epsilon_pad))
    assert np.max(np.abs(scaled)) < 1
    assert np.allclose(matvec(op, v), op.matvec(v))
    with pytest.raises(DegenerateSpectrum):
        rescale(h, 1.0, 1.0)


def test_dump_roundtrip(tmp_path, mid_params):
    h = _sector(mid_params, 3)
    path = tmp_path / "sector.bin"
    dump_sector(h, path)
    header, m = load_sector_matrix(path)
    assert header["n_sites"] == 5 and header["max_phonons"] == 3 and header["k_index"] == 3
    assert header["dim"] == h.dim and header["nnz"] == m.nnz
    assert abs(m - h.to_csr()).max() == 0.0
    raw = path.read_bytes()
    assert raw[:4] == b"PQSH"
    bad = tmp_path / "bad.bin"
    bad.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValueError):
        load_sector_matrix(bad)
