"""Sector Hamiltonian of the Peierls + breathing-mode model.

In the momentum-sector basis |K, m> the Hamiltonian splits as

    H(K) = L + exp(-iK) R + exp(+iK) R^T

with real sparse matrices independent of K:

* L holds the phonon energy dw * sum(m) on the diagonal and the
  breathing-mode term -g dw (x_1 - x_{N-1}), which leaves the excitation in
  place (x_j = a_j + a_j^dag in the excitation frame);
* R moves the excitation one site to the right, carrying the bare hopping
  -t0 and the Peierls factor g dw (x_1 - x_0); after the hop the phonon
  configuration is re-centred on the new excitation site (m'_j = m_{j+1}),
  which is where the phase exp(-iK) comes from. The left hop is R^T.

Only L and R are stored, so one assembly serves every K sector.
"""

from dataclasses import dataclass, field
import struct

import numpy as np
import scipy.sparse as sp
from numba import njit

from .fockspace import KSector, PhononBasis, translate
from .model import ModelParams

HERMITICITY_TOL = 1e-12


class TruncationInconsistency(RuntimeError):
    """The assembled matrix failed the Hermiticity check."""


class DegenerateSpectrum(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SectorParts:
    """K-independent pieces (L, R) of the sector Hamiltonian."""

    params: ModelParams
    basis: PhononBasis = field(repr=False)
    local: sp.csr_matrix = field(repr=False)
    hop: sp.csr_matrix = field(repr=False)


def _ladder_terms(configs, site, coeff):
    """Apply coeff * (a_site + a_site^dag) to every row of ``configs``.

    Returns (target_configs, amplitudes, source_rows) for the raising and
    lowering parts; lowering from zero occupation is skipped.
    """
    rows = np.arange(configs.shape[0])
    occ = configs[:, site].astype(np.int64)

    up = configs.astype(np.int16, copy=True)
    up[:, site] += 1
    amp_up = coeff * np.sqrt(occ + 1.0)

    nz = occ > 0
    down = configs[nz].astype(np.int16, copy=True)
    down[:, site] -= 1
    amp_down = coeff * np.sqrt(occ[nz].astype(float))
    return (
        np.concatenate([up, down]),
        np.concatenate([amp_up, amp_down]),
        np.concatenate([rows, rows[nz]]),
    )


def _collect(basis, targets, amps, cols, shift):
    if shift:
        targets = translate(targets, shift)
    ranks = basis.index_of(targets)
    keep = ranks >= 0  # raising beyond M is truncated away
    return ranks[keep], cols[keep], amps[keep]


def assemble_parts(params: ModelParams, basis: PhononBasis) -> SectorParts:
    """Assemble the real matrices L and R for all sectors of ``basis``."""
    if basis.n_sites != params.n_sites or basis.max_phonons != params.max_phonons:
        raise ValueError("basis does not match params (n_sites, max_phonons)")
    N = basis.n_sites
    D = basis.dim
    gw = params.coupling
    configs = basis.configs
    cols_all = np.arange(D)

    # L: diagonal phonon energy plus breathing-mode ladder terms
    rows, cols, vals = [cols_all], [cols_all], [params.delta_omega * basis.totals]
    for site, sign in ((1, -1.0), (N - 1, +1.0)):
        t, a, c = _ladder_terms(configs, site, sign * gw)
        r, c, a = _collect(basis, t, a, c, 0)
        rows.append(r)
        cols.append(c)
        vals.append(a)
    local = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(D, D),
    )
    local.sum_duplicates()
    local.eliminate_zeros()

    # R: hop to the right, re-centre by translating the configuration by -1
    rows, cols, vals = [], [], []
    r, c, a = _collect(basis, configs, np.full(D, -params.t0), cols_all, -1)
    rows.append(r)
    cols.append(c)
    vals.append(a)
    for site, sign in ((1, +1.0), (0, -1.0)):
        t, a, c = _ladder_terms(configs, site, sign * gw)
        r, c, a = _collect(basis, t, a, c, -1)
        rows.append(r)
        cols.append(c)
        vals.append(a)
    hop = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(D, D),
    )
    hop.sum_duplicates()
    hop.eliminate_zeros()

    for m in (local, hop):
        m.indices = m.indices.astype(np.int32)
        m.indptr = m.indptr.astype(np.int64)

    scale = max(params.t0, params.delta_omega * max(params.max_phonons, 1), abs(gw), 1.0)
    asym = abs(local - local.T)
    if asym.nnz and asym.max() > HERMITICITY_TOL * scale:
        raise TruncationInconsistency(
            f"breathing/diagonal block is not symmetric: max |L - L^T| = {asym.max():.3e}"
        )
    return SectorParts(params, basis, local, hop)


@njit(cache=True)
def _sector_apply(l_ptr, l_idx, l_val, h_ptr, h_idx, h_val, phase, shift, scale, x, alpha, y, beta, out):
    # out = alpha * (H x - shift x) / scale + beta * y
    n = x.shape[0]
    cphase = np.conj(phase)
    for i in range(n):
        out[i] = 0.0
    for i in range(n):
        xi = x[i]
        acc = -shift * xi
        for p in range(l_ptr[i], l_ptr[i + 1]):
            acc += l_val[p] * x[l_idx[p]]
        hacc = 0.0j
        back = cphase * xi
        for p in range(h_ptr[i], h_ptr[i + 1]):
            j = h_idx[p]
            v = h_val[p]
            hacc += v * x[j]
            out[j] += v * back
        out[i] += acc + phase * hacc
    f = alpha / scale
    for i in range(n):
        out[i] = f * out[i] + beta * y[i]


@dataclass(frozen=True, eq=False)
class KSectorHamiltonian:
    """H_eff restricted to one K sector; apply with ``matvec``."""

    sector: KSector
    parts: SectorParts = field(repr=False)

    @property
    def params(self) -> ModelParams:
        return self.parts.params

    @property
    def dim(self) -> int:
        return self.parts.basis.dim

    @property
    def phase(self) -> complex:
        """exp(-iK), attached to the right hop."""
        return complex(np.exp(-1j * self.sector.k_value))

    @property
    def nnz_bound(self) -> int:
        return 1 + 2 + 4 * self.params.n_sites

    def to_csr(self) -> sp.csr_matrix:
        """Explicit complex CSR matrix (for small sectors, dumps and tests)."""
        hop = self.parts.hop.astype(complex)
        m = self.parts.local.astype(complex) + self.phase * hop + np.conj(self.phase) * hop.T
        m = sp.csr_matrix(m)
        m.sum_duplicates()
        m.sort_indices()
        return m

    def to_dense(self) -> np.ndarray:
        return self.to_csr().toarray()

    def apply_into(self, x, out, *, shift=0.0, scale=1.0, alpha=1.0, y=None, beta=0.0):
        """out = alpha (H - shift) x / scale + beta y, without temporaries."""
        x = np.asarray(x)
        if x.shape != (self.dim,) or out.shape != (self.dim,):
            raise DimensionMismatch(f"expected vectors of length {self.dim}, got {x.shape}")
        if x.dtype != np.complex128:
            x = x.astype(np.complex128)
        if y is None:
            y = x
            beta = 0.0
        L, R = self.parts.local, self.parts.hop
        _sector_apply(
            L.indptr, L.indices, L.data, R.indptr, R.indices, R.data,
            self.phase, float(shift), float(scale), x, complex(alpha), y, complex(beta), out,
        )
        return out

    def matvec(self, x) -> np.ndarray:
        out = np.empty(self.dim, dtype=np.complex128)
        return self.apply_into(x, out)

    __matmul__ = matvec

    def expectation(self, x) -> float:
        x = np.asarray(x, dtype=np.complex128)
        return float(np.vdot(x, self.matvec(x)).real)

    def linear_operator(self):
        from scipy.sparse.linalg import LinearOperator

        return LinearOperator((self.dim, self.dim), matvec=self.matvec, dtype=np.complex128)


def build_sector(params: ModelParams, sector: KSector, parts: SectorParts = None) -> KSectorHamiltonian:
    """Sector Hamiltonian for ``sector``; pass ``parts`` to reuse an assembly."""
    if parts is None:
        parts = assemble_parts(params, sector.basis)
    elif parts.params != params or parts.basis.dim != sector.basis.dim:
        raise ValueError("precomputed parts belong to a different model")
    return KSectorHamiltonian(sector, parts)


@dataclass(frozen=True, eq=False)
class RescaledOperator:
    """(H - b)/a with the spectrum strictly inside (-1, 1)."""

    base: KSectorHamiltonian
    a_scale: float
    b_shift: float
    epsilon_pad: float
    e_min: float
    e_max: float

    @property
    def dim(self) -> int:
        return self.base.dim

    def apply_into(self, x, out, *, alpha=1.0, y=None, beta=0.0):
        return self.base.apply_into(
            x, out, shift=self.b_shift, scale=self.a_scale, alpha=alpha, y=y, beta=beta
        )

    def matvec(self, x) -> np.ndarray:
        out = np.empty(self.dim, dtype=np.complex128)
        return self.apply_into(x, out)

    __matmul__ = matvec


def rescale(h: KSectorHamiltonian, e_min: float, e_max: float, alpha_c: float = 1e-3) -> RescaledOperator:
    width = e_max - e_min
    if width < 1e-12:
        raise DegenerateSpectrum(f"spectral width {width:.3e} too small to rescale")
    eps = alpha_c * width
    return RescaledOperator(
        base=h,
        a_scale=(width + eps) / 2.0,
        b_shift=(e_max + e_min) / 2.0,
        epsilon_pad=eps,
        e_min=float(e_min),
        e_max=float(e_max),
    )


def matvec(h, x) -> np.ndarray:
    """y = H x for a sector Hamiltonian or its rescaled form."""
    return h.matvec(x)


# Binary cache layout, little endian:
#   magic b"PQSH", version u32, N u32, M u32, k_index u32, dim u64, nnz u64,
#   indptr int64[dim + 1], indices int32[nnz], values float64[2 * nnz] (re, im interleaved)
_HEADER = struct.Struct("<4sIIIIQQ")
_MAGIC = b"PQSH"


def dump_sector(h: KSectorHamiltonian, path) -> None:
    m = h.to_csr()
    with open(path, "wb") as f:
        f.write(_HEADER.pack(_MAGIC, 1, h.params.n_sites, h.params.max_phonons,
                             h.sector.k_index, m.shape[0], m.nnz))
        f.write(m.indptr.astype("<i8").tobytes())
        f.write(m.indices.astype("<i4").tobytes())
        vals = np.empty(2 * m.nnz, dtype="<f8")
        vals[0::2] = m.data.real
        vals[1::2] = m.data.imag
        f.write(vals.tobytes())


def load_sector_matrix(path):
    """Read a dumped sector; returns (header dict, complex CSR matrix)."""
    with open(path, "rb") as f:
        magic, version, n, m_cap, k_index, dim, nnz = _HEADER.unpack(f.read(_HEADER.size))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a sector matrix file")
        indptr = np.frombuffer(f.read(8 * (dim + 1)), dtype="<i8")
        indices = np.frombuffer(f.read(4 * nnz), dtype="<i4")
        vals = np.frombuffer(f.read(16 * nnz), dtype="<f8")
    data = vals[0::2] + 1j * vals[1::2]
    header = dict(version=version, n_sites=n, max_phonons=m_cap, k_index=k_index, dim=dim, nnz=nnz)
    return header, sp.csr_matrix((data, indices, indptr), shape=(dim, dim))
