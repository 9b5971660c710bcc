"""Lanczos extremal eigenpairs, ground-state scans and the (N, M) convergence sweep."""

from dataclasses import dataclass, field
import logging
import math

import numpy as np

from .fockspace import KSector, enumerate_basis, momentum_value, nearest_k_index, zero_phonon_index
from .hamiltonian import KSectorHamiltonian, assemble_parts, build_sector
from .model import DeviceParams, ModelParams, derive_model
from . import observables

logger = logging.getLogger(__name__)

DEGENERACY_RTOL = 1e-9
MEMORY_BUDGET = 1.5e9  # bytes reserved for the Krylov basis
DISTRIBUTION_FLOOR = 1e-12


class NoConvergence(RuntimeError):
    def __init__(self, max_iter, residual):
        super().__init__(f"Lanczos did not converge in {max_iter} iterations (residual {residual:.3e})")
        self.max_iter = max_iter
        self.residual = residual


class SweepExhausted(RuntimeError):
    pass


@dataclass
class LanczosResult:
    e_min: float
    e_max: float
    ground_vector: np.ndarray = field(repr=False)
    iterations: int
    residual: float
    ritz_history: list = field(default_factory=list, repr=False)


def _basis_cap(dim, max_basis):
    by_memory = int(MEMORY_BUDGET // (16 * max(dim, 1)))
    return max(2, min(max_basis, dim, max(24, by_memory)))


def extremal_eigs(
    h,
    tol: float = 1e-9,
    max_iter: int = 5000,
    *,
    which: str = "both",
    max_basis: int = 200,
    keep: int = 8,
    seed: int = 0,
    v0=None,
    track_ritz: bool = False,
) -> LanczosResult:
    """Extremal eigenvalues of a Hermitian operator by thick-restart Lanczos.

    Every new Krylov vector is orthogonalized twice against the whole basis.
    When the basis reaches ``max_basis`` vectors it is compressed to the
    ``keep`` lowest and ``keep`` highest Ritz vectors and the iteration
    continues from the current residual direction.

    ``which`` selects the pairs that must converge ("both", "min" or "max");
    ``tol`` bounds the residual norm ||H y - theta y|| of those pairs.
    Only ``h.matvec`` and ``h.dim`` are used.
    """
    if which not in ("both", "min", "max"):
        raise ValueError(f"which must be 'both', 'min' or 'max', got {which!r}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    dim = h.dim
    cap = _basis_cap(dim, max_basis)
    keep = max(1, min(keep, (cap - 1) // 2))

    if v0 is None:
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    else:
        v = np.array(v0, dtype=np.complex128)
    v /= np.linalg.norm(v)

    V = np.empty((cap, dim), dtype=np.complex128)
    T = np.zeros((cap, cap), dtype=np.complex128)
    j = 0
    history = []
    best = math.inf
    for it in range(1, max_iter + 1):
        V[j] = v
        w = h.matvec(v)
        basis = V[: j + 1]
        coeff = basis.conj() @ w
        w -= coeff @ basis
        extra = basis.conj() @ w
        w -= extra @ basis
        coeff += extra
        T[: j + 1, j] = coeff
        T[j, : j + 1] = coeff.conj()
        beta = np.linalg.norm(w)
        j += 1

        theta, Y = np.linalg.eigh(T[:j, :j])
        res = beta * np.abs(Y[j - 1, :])
        if track_ritz:
            history.append(theta.copy())
        checks = {"both": (res[0], res[-1]), "min": (res[0],), "max": (res[-1],)}[which]
        worst = max(checks)
        best = min(best, worst)
        invariant = beta < 1e-14 * max(1.0, abs(theta).max())
        if worst < tol or invariant or j == dim:
            ground = Y[:, 0] @ V[:j]
            ground /= np.linalg.norm(ground)
            return LanczosResult(
                e_min=float(theta[0]),
                e_max=float(theta[-1]),
                ground_vector=ground,
                iterations=it,
                residual=float(worst),
                ritz_history=history,
            )
        if j == cap:
            sel = np.r_[np.arange(keep), np.arange(j - keep, j)]
            V[: sel.size] = Y[:, sel].T @ V[:j]
            T[:] = 0.0
            T[np.arange(sel.size), np.arange(sel.size)] = theta[sel]
            j = sel.size
            logger.debug("lanczos restart at iteration %d, theta=[%g, %g]", it, theta[0], theta[-1])
        v = w / beta
    raise NoConvergence(max_iter, best)


@dataclass
class GroundStateSummary:
    k_gs: float
    k_index: int
    energy: float
    phonon_number: float
    residue: float
    degenerate: bool
    sector_energies: dict = field(default_factory=dict)
    ground_vector: np.ndarray = field(default=None, repr=False)
    site_phonons: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if not -1e-12 <= self.residue <= 1 + 1e-12:
            raise ValueError(f"residue {self.residue} outside [0, 1]")
        if self.phonon_number < -1e-12:
            raise ValueError("negative phonon number")


def sector_ground(h: KSectorHamiltonian, tol=1e-9, seed=0, **kw) -> LanczosResult:
    return extremal_eigs(h, tol=tol, which="min", seed=seed, **kw)


def ground_scan(
    params: ModelParams,
    basis=None,
    *,
    k_indices=None,
    use_symmetry: bool = True,
    tol: float = 1e-9,
    seed: int = 0,
    parts=None,
    momenta=None,
) -> GroundStateSummary:
    """Lowest energy over all K sectors and the observables of that state.

    With ``use_symmetry`` only 0 <= K <= pi is diagonalized and the
    energies are mirrored to -K (the model is time-reversal symmetric).

    ``momenta`` replaces the lattice grid by arbitrary quasimomenta
    (twisted sectors, see ``KSector.at_momentum``); no mirroring is done
    then, ``k_index`` is the nearest grid index and ``degenerate`` says
    whether -K_gs was also scanned at the same energy.
    """
    if basis is None:
        basis = enumerate_basis(params.n_sites, params.max_phonons)
    if parts is None:
        parts = assemble_parts(params, basis)
    N = params.n_sites
    if momenta is not None:
        return _twisted_scan(params, basis, parts, momenta, tol, seed)
    if k_indices is None:
        k_indices = range(N // 2 + 1) if use_symmetry else range(N)
    energies = {}
    vectors = {}
    for k in k_indices:
        h = build_sector(params, KSector(k, basis), parts)
        res = sector_ground(h, tol=tol, seed=seed)
        energies[k] = res.e_min
        vectors[k] = res.ground_vector
        if use_symmetry:
            energies.setdefault((-k) % N, res.e_min)
    k_best = min(vectors, key=lambda k: (energies[k], k))
    e_best = energies[k_best]
    partner = (-k_best) % N
    degenerate = partner != k_best and abs(energies[partner] - e_best) < DEGENERACY_RTOL * max(abs(e_best), 1.0)
    psi = vectors[k_best]
    return GroundStateSummary(
        k_gs=momentum_value(k_best, N),
        k_index=k_best,
        energy=e_best,
        phonon_number=observables.phonon_number(psi, basis),
        residue=observables.residue(psi, zero_phonon_index(basis)),
        degenerate=bool(degenerate),
        sector_energies={momentum_value(k, N): e for k, e in sorted(energies.items())},
        ground_vector=psi,
        site_phonons=observables.site_phonon_distribution(psi, basis),
    )


def _twisted_scan(params, basis, parts, momenta, tol, seed):
    ks = [float(k) for k in momenta]
    if not ks:
        raise ValueError("momenta must not be empty")
    energies = {}
    best = None
    for k in ks:
        res = sector_ground(build_sector(params, KSector.at_momentum(k, basis), parts), tol=tol, seed=seed)
        energies[k] = res.e_min
        if best is None or (res.e_min, abs(k)) < (best[1], abs(best[0])):
            best = (k, res.e_min, res.ground_vector)
    k_best, e_best, psi = best
    scale = max(abs(e_best), 1.0)
    degenerate = any(
        abs(k + k_best) < 1e-12 and k != k_best and abs(e - e_best) < DEGENERACY_RTOL * scale
        for k, e in energies.items()
    )
    return GroundStateSummary(
        k_gs=k_best,
        k_index=nearest_k_index(k_best, params.n_sites),
        energy=e_best,
        phonon_number=observables.phonon_number(psi, basis),
        residue=observables.residue(psi, zero_phonon_index(basis)),
        degenerate=bool(degenerate),
        sector_energies=dict(sorted(energies.items())),
        ground_vector=psi,
        site_phonons=observables.site_phonon_distribution(psi, basis),
    )


def _centered(dist):
    """Phonon distribution reordered so the excitation site sits in the middle."""
    n = dist.size
    return np.roll(dist, n // 2)


def _distribution_change(a, b):
    """Max change of the centred distributions, relative to the larger peak."""
    ca, cb = _centered(a), _centered(b)
    if ca.size != cb.size:
        small, big = (ca, cb) if ca.size < cb.size else (cb, ca)
        off = (big.size - small.size) // 2
        padded = np.zeros_like(big)
        padded[off : off + small.size] = small
        ca, cb = padded, big
    peak = max(np.abs(ca).max(), np.abs(cb).max())
    if peak < DISTRIBUTION_FLOOR:  # both clouds empty up to round-off
        return 0.0
    return float(np.abs(ca - cb).max() / peak)


def convergence_sweep(
    dev,
    target_rel_err: float = 1e-4,
    *,
    n_schedule=(5, 7, 9, 11),
    m_start: int = 2,
    m_step: int = 2,
    m_cap: int = 16,
    tol: float = 1e-10,
):
    """Smallest (N, M) whose ground state is stable under N -> next N and M -> M + step.

    Stability means the relative change of E_gs and of the site-resolved
    phonon distribution (relative to its peak) are both <= target_rel_err.
    Returns (N, M, summary, trace), where trace lists every evaluated point.
    ``dev`` is a DeviceParams or any callable (N, M) -> ModelParams.
    """
    make = dev if callable(dev) else (lambda n, m: derive_model(dev, n, m))
    if target_rel_err <= 0:
        raise ValueError("target_rel_err must be positive")
    cache = {}
    trace = []

    def summary(n, m):
        if (n, m) not in cache:
            p = make(n, m)
            cache[(n, m)] = ground_scan(p, tol=tol)
            s = cache[(n, m)]
            trace.append(dict(n_sites=n, max_phonons=m, energy=s.energy, k_gs=s.k_gs,
                              phonon_number=s.phonon_number))
            logger.info("sweep N=%d M=%d E=%.10g Nph=%.6g", n, m, s.energy, s.phonon_number)
        return cache[(n, m)]

    def close(a, b):
        de = abs(a.energy - b.energy) / max(abs(a.energy), 1e-300)
        return de <= target_rel_err and _distribution_change(a.site_phonons, b.site_phonons) <= target_rel_err

    for i, n in enumerate(n_schedule[:-1]):
        n_next = n_schedule[i + 1]
        m = m_start
        while m + m_step <= m_cap:
            here = summary(n, m)
            if close(here, summary(n, m + m_step)) and close(here, summary(n_next, m)):
                return n, m, here, trace
            m += m_step
    raise SweepExhausted(f"no convergence to {target_rel_err} within N<={n_schedule[-1]}, M<={m_cap}")


@dataclass
class TransitionPoint:
    """Location of the K_gs = 0 -> K_gs != 0 switch along a one-parameter family."""

    x: float
    lambda_eff: float
    bracket: tuple
    evaluations: list = field(default_factory=list, repr=False)


def switch_gap(params: ModelParams, basis=None, *, momenta=None, tol: float = 1e-10, seed: int = 0, parts=None) -> float:
    """min over K != 0 of E_gs(K) minus E_gs(0).

    Positive while the ground state sits at K = 0; the sign change marks the
    switch. ``momenta`` (nonzero quasimomenta) replaces the lattice sectors
    0 < K <= pi.
    """
    if basis is None:
        basis = enumerate_basis(params.n_sites, params.max_phonons)
    if parts is None:
        parts = assemble_parts(params, basis)
    N = params.n_sites
    e0 = sector_ground(build_sector(params, KSector(0, basis), parts), tol=tol, seed=seed).e_min
    if momenta is None:
        sectors = [KSector(k, basis) for k in range(1, N // 2 + 1)]
    else:
        sectors = [KSector.at_momentum(k, basis) for k in momenta if k != 0.0]
    if not sectors:
        raise ValueError("no nonzero momentum to compare with")
    others = [sector_ground(build_sector(params, s, parts), tol=tol, seed=seed).e_min for s in sectors]
    return min(others) - e0


def locate_transition(make, lo: float, hi: float, *, momenta=None, xtol: float = 1e-6, tol: float = 1e-10):
    """Root of ``switch_gap`` along x in [lo, hi]; ``make(x)`` returns ModelParams.

    The gap must change sign across the bracket (K_gs = 0 at one end only).
    Brent's method is used, so a handful of evaluations suffices.
    """
    from scipy.optimize import brentq

    evals = []
    cache = {}

    def f(x):
        p = make(x)
        key = (p.n_sites, p.max_phonons)
        if key not in cache:
            cache.clear()
            cache[key] = enumerate_basis(*key)
        gap = switch_gap(p, cache[key], momenta=momenta, tol=tol)
        evals.append((float(x), p.lambda_eff, gap))
        logger.info("transition probe x=%.8g lambda=%.6g gap=%.4e", x, p.lambda_eff, gap)
        return gap

    f_lo, f_hi = f(lo), f(hi)
    if f_lo * f_hi > 0:
        raise ValueError(f"no ground-state switch inside [{lo}, {hi}] (gaps {f_lo:.3e}, {f_hi:.3e})")
    x = brentq(f, lo, hi, xtol=xtol)
    return TransitionPoint(x=float(x), lambda_eff=make(x).lambda_eff, bracket=(lo, hi), evaluations=evals)
