"""Observables of a sector state C_m = <K, m|psi>.

Phonon operators act in the frame of the excitation. A single-site operator
A_r has sector matrix elements (1/N) sum_n <T_n m'|A_r|T_n m>; as n runs
over the lattice, the site r visits every relative position j once, so
single-site expectation values are averages over j of the frame-local ones.
"""

from dataclasses import dataclass
import math

import numpy as np

from .fockspace import PhononBasis, translate, zero_phonon_index

TRACE_TOL = 1e-10
NEGATIVE_EIG_TOL = 1e-9
EIG_CLAMP = 1e-12


class TraceViolation(RuntimeError):
    pass


class NonPhysicalSpectrum(RuntimeError):
    pass


class NotReached:
    """Sentinel: the dressing never reached the ground-state phonon number."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NotReached"

    def __bool__(self):
        return False


NOT_REACHED = NotReached()


def phonon_number(psi, basis: PhononBasis) -> float:
    """Total phonon number sum_m (sum_n m_n) |C_m|^2."""
    w = np.abs(psi) ** 2
    return float(w @ basis.totals)


def site_phonon_distribution(psi, basis: PhononBasis) -> np.ndarray:
    """<a_j^dag a_j> at distance j to the right of the excitation."""
    w = np.abs(psi) ** 2
    return w @ basis.configs.astype(np.float64)


def survival(psi, zero_index: int) -> float:
    return float(abs(psi[zero_index]) ** 2)


def residue(psi_gs, zero_index: int) -> float:
    """Quasiparticle residue: weight of the bare (zero-phonon) component."""
    return float(abs(psi_gs[zero_index]) ** 2)


class LadderTables:
    """Index maps for a_j and a_j^2 inside one basis, built once per basis.

    For relative site j, ``lower1[j]`` holds (source, target, sqrt(m_j)) with
    a_j|source> = sqrt(m_j)|target>; ``lower2[j]`` the same for a_j^2 with
    sqrt(m_j (m_j - 1)). The raising parts follow by Hermitian conjugation.
    ``shift[d]`` is the permutation m -> index of T_d m.
    """

    def __init__(self, basis: PhononBasis):
        self.basis = basis
        configs = basis.configs
        self.shift = [None] + [
            basis.index_of(translate(configs, d)).astype(np.int32) for d in range(1, basis.n_sites)
        ]
        self.lower1 = []
        self.lower2 = []
        for j in range(basis.n_sites):
            occ = configs[:, j].astype(np.int64)
            for step, table in ((1, self.lower1), (2, self.lower2)):
                src = np.nonzero(occ >= step)[0]
                tgt_cfg = configs[src].astype(np.int16)
                tgt_cfg[:, j] -= step
                tgt = basis.index_of(tgt_cfg)
                m = occ[src].astype(float)
                amp = np.sqrt(m) if step == 1 else np.sqrt(m * (m - 1.0))
                table.append((src, tgt, amp))


_TABLE_CACHE = {}


def ladder_tables(basis: PhononBasis) -> LadderTables:
    key = id(basis)
    hit = _TABLE_CACHE.get(key)
    if hit is None or hit.basis is not basis:
        hit = LadderTables(basis)
        _TABLE_CACHE.clear()
        _TABLE_CACHE[key] = hit
    return hit


def site_moments(psi, basis: PhononBasis, site: int = 0):
    """<a_r>, <a_r^2>, <a_r^dag a_r> for lattice site r.

    Evaluated as (1/N) sum_n over translated frames: site r of frame n is
    relative position s = (r - n) mod N.
    """
    tables = ladder_tables(basis)
    N = basis.n_sites
    psi = np.asarray(psi)
    a1 = 0j
    a2 = 0j
    nn = 0.0
    w = np.abs(psi) ** 2
    for n in range(N):
        s = (site - n) % N
        src, tgt, amp = tables.lower1[s]
        a1 += np.vdot(psi[tgt], amp * psi[src])
        src, tgt, amp = tables.lower2[s]
        a2 += np.vdot(psi[tgt], amp * psi[src])
        nn += float(w @ basis.configs[:, s])
    return a1 / N, a2 / N, nn / N


def quadrature_variances(psi, basis: PhononBasis, site: int = 0):
    """(S_x, S_p) for x = (a + a^dag)/sqrt2 and p = -i (a - a^dag)/sqrt2."""
    a1, a2, nn = site_moments(psi, basis, site)
    x_mean = math.sqrt(2.0) * a1.real
    p_mean = math.sqrt(2.0) * a1.imag
    x2 = 0.5 * (2.0 * nn + 1.0 + 2.0 * a2.real)
    p2 = 0.5 * (2.0 * nn + 1.0 - 2.0 * a2.real)
    return x2 - x_mean**2, p2 - p_mean**2


def quadrature_second_moments(psi, basis: PhononBasis, site: int = 0):
    """<x_r^2>, <p_r^2> (not centred)."""
    _, a2, nn = site_moments(psi, basis, site)
    return 0.5 * (2.0 * nn + 1.0 + 2.0 * a2.real), 0.5 * (2.0 * nn + 1.0 - 2.0 * a2.real)


def translation_overlaps(psi, basis: PhononBasis) -> np.ndarray:
    """<psi|T_d|psi> = sum_m conj(C_{T_d m}) C_m for d = 0 .. N-1."""
    N = basis.n_sites
    shift = ladder_tables(basis).shift
    out = np.empty(N, dtype=np.complex128)
    out[0] = np.vdot(psi, psi)
    for d in range(1, N):
        out[d] = np.vdot(psi[shift[d]], psi)
    return out


@dataclass(frozen=True)
class ReducedDensityMatrix:
    entries: np.ndarray

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries).real)


def reduced_density(psi, k0: float, basis: PhononBasis, overlaps=None) -> ReducedDensityMatrix:
    """rho_e(n, n') = N^-1 exp(i k0 (n - n')) <psi|T_{n-n'}|psi>."""
    N = basis.n_sites
    if overlaps is None:
        overlaps = translation_overlaps(psi, basis)
    n = np.arange(N)
    d = (n[:, None] - n[None, :]) % N
    diff = n[:, None] - n[None, :]
    rho = np.exp(1j * k0 * diff) * overlaps[d] / N
    tr = np.trace(rho).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise TraceViolation(f"trace of reduced density matrix is {tr:.12f}")
    return ReducedDensityMatrix(rho)


def entanglement_entropy(rho) -> float:
    """Von Neumann entropy -sum xi ln xi of the excitation density matrix."""
    m = rho.entries if isinstance(rho, ReducedDensityMatrix) else np.asarray(rho)
    xi = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    if xi.min() < -NEGATIVE_EIG_TOL:
        raise NonPhysicalSpectrum(f"negative eigenvalue {xi.min():.3e}")
    xi = np.clip(xi, 0.0, 1.0)
    xi = xi[xi > EIG_CLAMP]
    return float(-(xi * np.log(xi)).sum()) + 0.0


@dataclass(frozen=True)
class ObservableRecord:
    t_ns: float
    t_over_tau_ec: float
    n_ph: float
    survival: float
    s_x: float
    s_p: float
    entropy: float
    norm: float
    x2_plus_p2: float = float("nan")
    site_identity_rhs: float = float("nan")

    COLUMNS = ("t_ns", "t_over_tau_ec", "n_ph", "survival", "s_x", "s_p", "entropy", "norm")

    def row(self):
        return [getattr(self, c) for c in self.COLUMNS]

    @property
    def identity_residual(self) -> float:
        """|<x^2> + <p^2> - (2 <a^dag a>_site + 1)| with the site number from n_ph / N."""
        return abs(self.x2_plus_p2 - self.site_identity_rhs)


def observe(psi, t_ns: float, tau_ec: float, k0: float, basis: PhononBasis, zero_index=None) -> ObservableRecord:
    """All observables of one snapshot."""
    if zero_index is None:
        zero_index = zero_phonon_index(basis)
    n_ph = phonon_number(psi, basis)
    s_x, s_p = quadrature_variances(psi, basis)
    x2, p2 = quadrature_second_moments(psi, basis)
    rho = reduced_density(psi / np.linalg.norm(psi), k0, basis)
    return ObservableRecord(
        t_ns=float(t_ns),
        t_over_tau_ec=float(t_ns / tau_ec),
        n_ph=n_ph,
        survival=survival(psi, zero_index),
        s_x=float(s_x),
        s_p=float(s_p),
        entropy=entanglement_entropy(rho),
        norm=float(np.linalg.norm(psi)),
        x2_plus_p2=float(x2 + p2),
        site_identity_rhs=2.0 * n_ph / basis.n_sites + 1.0,
    )


def formation_time(times, n_ph, n_bar_gs: float):
    """First upward crossing of n_ph(t) through n_bar_gs, linearly interpolated.

    ``times`` must be increasing. Returns NOT_REACHED when no crossing occurs.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(n_ph, dtype=float)
    if t.size == 0:
        return NOT_REACHED
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    if y[0] >= n_bar_gs:
        return float(t[0])
    above = np.nonzero(y >= n_bar_gs)[0]
    if above.size == 0:
        return NOT_REACHED
    i = above[0]
    t0, t1, y0, y1 = t[i - 1], t[i], y[i - 1], y[i]
    return float(t0 + (n_bar_gs - y0) * (t1 - t0) / (y1 - y0))
