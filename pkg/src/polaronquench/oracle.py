"""Brute-force reference in the full real-space basis |n>_e (x) |m>_ph.

Everything here is dense and deliberately naive: the Hamiltonian is built
term by term from the real-space operators (bond hops, Peierls and
breathing couplings), states are looked up through a dict, and dynamics use
a full eigendecomposition. It exists to check the sector machinery on small
lattices and is exposed through the ``oracle-check`` CLI verb.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .fockspace import PhononBasis, enumerate_basis, momentum_value
from .model import ModelParams

SIZE_GUARD = 20000


class SizeGuard(ValueError):
    pass


@dataclass(eq=False)
class DenseSystem:
    params: ModelParams
    basis: PhononBasis = field(repr=False)
    hamiltonian: np.ndarray = field(repr=False)
    translation: np.ndarray = field(repr=False)
    _eig: tuple = field(default=None, repr=False)

    @property
    def dimension(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def n_sites(self) -> int:
        return self.params.n_sites

    def index(self, site: int, config) -> int:
        return site * self.basis.dim + self._lookup[tuple(int(v) for v in config)]

    @property
    def _lookup(self):
        if not hasattr(self, "_lookup_cache"):
            self._lookup_cache = {tuple(int(v) for v in c): i for i, c in enumerate(self.basis.configs)}
        return self._lookup_cache

    def momentum_projector(self, k_index: int) -> np.ndarray:
        """P_K = (1/N) sum_d exp(iKd) T^d, where T moves excitation and phonons one site right."""
        N = self.n_sites
        K = momentum_value(k_index, N)
        P = np.zeros_like(self.hamiltonian)
        Td = np.eye(self.dimension, dtype=complex)
        for d in range(N):
            P += np.exp(1j * K * d) * Td
            Td = self.translation @ Td
        return P / N

    @property
    def momentum_projectors(self):
        return [self.momentum_projector(k) for k in range(self.n_sites)]

    def total_momentum_operator(self) -> np.ndarray:
        """K_tot = sum_K K P_K."""
        return sum(momentum_value(k, self.n_sites) * P for k, P in enumerate(self.momentum_projectors))

    def sector_embedding(self, k_index: int) -> np.ndarray:
        """Columns are |K, m> = N^-1/2 sum_n exp(iKn) |n> (x) |T_n m> written in real space."""
        N = self.n_sites
        D = self.basis.dim
        K = momentum_value(k_index, N)
        V = np.zeros((self.dimension, D), dtype=complex)
        for col, cfg in enumerate(self.basis.configs):
            for n in range(N):
                shifted = [int(cfg[(r - n) % N]) for r in range(N)]
                V[self.index(n, shifted), col] += np.exp(1j * K * n) / math.sqrt(N)
        return V

    def eigh(self):
        if self._eig is None:
            self._eig = np.linalg.eigh(self.hamiltonian)
        return self._eig

    def block_spectrum(self, k_index: int) -> np.ndarray:
        V = self.sector_embedding(k_index)
        return np.linalg.eigvalsh(V.conj().T @ self.hamiltonian @ V)


def _ladder(config, site, raise_):
    m = list(config)
    if raise_:
        amp = math.sqrt(m[site] + 1)
        m[site] += 1
    else:
        if m[site] == 0:
            return None, 0.0
        amp = math.sqrt(m[site])
        m[site] -= 1
    return tuple(m), amp


def _apply_x(config, site):
    """(a_site + a_site^dag) |config> as a list of (config, amplitude)."""
    out = []
    for r in (True, False):
        c, amp = _ladder(config, site, r)
        if c is not None:
            out.append((c, amp))
    return out


def build_dense(params: ModelParams) -> DenseSystem:
    N, M = params.n_sites, params.max_phonons
    basis = enumerate_basis(N, M)
    D = basis.dim
    dim = N * D
    if dim > SIZE_GUARD:
        raise SizeGuard(f"dense system of dimension {dim} exceeds guard {SIZE_GUARD}")
    lookup = {tuple(int(v) for v in c): i for i, c in enumerate(basis.configs)}
    H = np.zeros((dim, dim), dtype=complex)
    t0, gw, dw = params.t0, params.coupling, params.delta_omega

    def add(site_to, cfg_to, site_from, col_cfg_idx, amp):
        i = lookup.get(cfg_to)
        if i is None:  # truncated
            return
        H[site_to * D + i, site_from * D + col_cfg_idx] += amp

    for ci, cfg in enumerate(basis.configs):
        cfg = tuple(int(v) for v in cfg)
        for e in range(N):
            # free phonons
            add(e, cfg, e, ci, dw * sum(cfg))
            # bonds (b, b+1) touching the excitation at e: c^dag_b c_{b+1} + c^dag_{b+1} c_b
            for b in range(N):
                left, right = b, (b + 1) % N
                if e == right:
                    dest = left
                elif e == left:
                    dest = right
                else:
                    continue
                add(dest, cfg, e, ci, -t0)
                for c, amp in _apply_x(cfg, right):
                    add(dest, c, e, ci, gw * amp)
                for c, amp in _apply_x(cfg, left):
                    add(dest, c, e, ci, -gw * amp)
            # breathing mode: -g dw n_e (x_{e+1} - x_{e-1})
            for c, amp in _apply_x(cfg, (e + 1) % N):
                add(e, c, e, ci, -gw * amp)
            for c, amp in _apply_x(cfg, (e - 1) % N):
                add(e, c, e, ci, gw * amp)

    T = np.zeros((dim, dim), dtype=complex)
    for ci, cfg in enumerate(basis.configs):
        moved = tuple(int(cfg[(r - 1) % N]) for r in range(N))
        for e in range(N):
            T[((e + 1) % N) * D + lookup[moved], e * D + ci] = 1.0
    return DenseSystem(params, basis, H, T)


def exact_evolve(sys: DenseSystem, psi0, t: float) -> np.ndarray:
    """V exp(-i Lambda t) V^dag psi0."""
    w, V = sys.eigh()
    return V @ (np.exp(-1j * w * t) * (V.conj().T @ np.asarray(psi0, dtype=complex)))


def exact_partial_trace(state, n_sites: int, basis: PhononBasis) -> np.ndarray:
    """rho(n, n') = sum_m psi(n, m) conj(psi(n', m))."""
    psi = np.asarray(state).reshape(n_sites, basis.dim)
    return psi @ psi.conj().T


def bloch_state(sys: DenseSystem, k: float) -> np.ndarray:
    """Bare Bloch state N^-1/2 sum_n exp(ikn) |n> (x) |0>."""
    N = sys.n_sites
    psi = np.zeros(sys.dimension, dtype=complex)
    zero = (0,) * N
    for n in range(N):
        psi[sys.index(n, zero)] = np.exp(1j * k * n) / math.sqrt(N)
    return psi


def vertex_matrix_element(sys: DenseSystem, k_index: int, q_index: int) -> complex:
    """sqrt(N) <0| a_{-q} c_{k+q} H c_k^dag |0> with c_k^dag = N^-1/2 sum_n exp(-ikn) c_n^dag.

    With this Fourier convention the result equals the vertex function
    gamma(k, q) of the momentum-space coupling.
    """
    N = sys.n_sites
    k = 2 * math.pi * k_index / N
    q = 2 * math.pi * q_index / N
    kq = k + q
    bra = np.zeros(sys.dimension, dtype=complex)
    ket = np.zeros(sys.dimension, dtype=complex)
    zero = (0,) * N
    for n in range(N):
        ket[sys.index(n, zero)] = np.exp(-1j * k * n) / math.sqrt(N)
        for r in range(N):
            one = tuple(1 if s == r else 0 for s in range(N))
            if sys.params.max_phonons >= 1:
                # a^dag_{-q} c^dag_{k+q} |0> amplitudes
                bra[sys.index(n, one)] = np.exp(-1j * kq * n) * np.exp(1j * q * r) / N
    return math.sqrt(N) * np.vdot(bra, sys.hamiltonian @ ket)


def check_table(params_list=None, *, steps: int = 50, dt: float = 0.05, tol_spec=1e-10, tol_dyn=1e-9):
    """Run the sector-vs-dense comparisons; returns a list of (name, value, tol, passed)."""
    from .fockspace import KSector, zero_phonon_index
    from .hamiltonian import assemble_parts, build_sector, rescale
    from . import chebyshev, observables

    if params_list is None:
        params_list = [
            ModelParams.from_couplings(4, 2, t0=1.0, g=0.5, delta_omega=1.0),
            ModelParams.from_couplings(5, 2, t0=1.0, g=0.7, delta_omega=1.3),
        ]
    rows = []
    for p in params_list:
        tag = f"N={p.n_sites},M={p.max_phonons}"
        sys = build_dense(p)
        basis = enumerate_basis(p.n_sites, p.max_phonons)
        parts = assemble_parts(p, basis)
        herm = float(np.abs(sys.hamiltonian - sys.hamiltonian.conj().T).max())
        rows.append((f"{tag} dense hermiticity", herm, 1e-13, herm < 1e-13))
        Ktot = sys.total_momentum_operator()
        comm = float(np.linalg.norm(sys.hamiltonian @ Ktot - Ktot @ sys.hamiltonian))
        rows.append((f"{tag} [H, K_tot]", comm, 1e-10, comm < 1e-10))
        for k in range(p.n_sites):
            sector = KSector(k, basis)
            h = build_sector(p, sector, parts)
            e_sector = np.linalg.eigvalsh(h.to_dense())
            err = float(np.abs(e_sector - sys.block_spectrum(k)).max())
            rows.append((f"{tag} K={k} block spectrum", err, tol_spec, err < tol_spec))

            V = sys.sector_embedding(k)
            w = np.linalg.eigvalsh(h.to_dense())
            op = rescale(h, w[0], w[-1], 1e-3)
            pl = chebyshev.plan(op, dt, tail_tol=1e-14)
            psi0 = np.zeros(basis.dim, dtype=complex)
            z = zero_phonon_index(basis)
            psi0[z] = 1.0
            K = sector.k_value
            traj = {}
            chebyshev.evolve(pl, psi0, steps, observer=lambda i, t, s: traj.__setitem__(i, s.copy()))
            real0 = V @ psi0
            amp_err = 0.0
            rho_err = 0.0
            surv_err = 0.0
            for i in (1, steps // 2, steps):
                exact = exact_evolve(sys, real0, i * dt)
                amp_err = max(amp_err, float(np.abs(V @ traj[i] - exact).max()))
                rho_ref = exact_partial_trace(exact, p.n_sites, basis)
                rho = observables.reduced_density(traj[i], K, basis).entries
                rho_err = max(rho_err, float(np.abs(rho - rho_ref).max()))
                surv_ref = abs(np.vdot(real0, exact)) ** 2
                surv_err = max(surv_err, abs(observables.survival(traj[i], z) - surv_ref))
            rows.append((f"{tag} K={k} chebyshev vs exact ({steps} steps)", amp_err, tol_dyn, amp_err < tol_dyn))
            rows.append((f"{tag} K={k} reduced density vs partial trace", rho_err, tol_spec, rho_err < tol_spec))
            rows.append((f"{tag} K={k} survival vs exact", surv_err, tol_dyn, surv_err < tol_dyn))
    return rows
