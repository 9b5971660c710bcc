"""Truncated phonon Fock basis and lattice translations.

A configuration is an array of N occupation numbers with total <= M. Inside
a momentum sector the array is read in the frame of the excitation: entry j
is the occupation of the site j steps to the right of the excitation
(entry 0 sits on the excitation itself).

Configurations are ordered lexicographically, and ``PhononBasis.index_of``
ranks them exactly through the combinatorial number system, so no lookup
table is needed even for ~10^7 states.
"""

from dataclasses import dataclass, field
import math
from typing import Optional

import numpy as np

INDEX_LIMIT = 2**31 - 1


class CapacityExceeded(ValueError):
    """The basis would not fit the 32-bit index space used by the sparse kernels."""


def basis_dimension(n_sites: int, max_phonons: int) -> int:
    """Number of configurations with total <= M: (M+N)! / (M! N!)."""
    return math.comb(max_phonons + n_sites, n_sites)


def _binomial_table(nmax: int, kmax: int) -> np.ndarray:
    table = np.zeros((nmax + 1, kmax + 1), dtype=np.int64)
    for n in range(nmax + 1):
        for k in range(min(n, kmax) + 1):
            table[n, k] = math.comb(n, k)
    return table


def _enumerate(n_sites: int, max_phonons: int) -> np.ndarray:
    configs = np.zeros((1, 0), dtype=np.uint8)
    budget = np.array([max_phonons], dtype=np.int64)
    for _ in range(n_sites):
        counts = budget + 1
        parent = np.repeat(np.arange(len(budget)), counts)
        starts = np.repeat(np.cumsum(counts) - counts, counts)
        values = np.arange(parent.size, dtype=np.int64) - starts
        configs = np.concatenate(
            [configs[parent], values.astype(np.uint8)[:, None]], axis=1
        )
        budget = budget[parent] - values
    return configs


@dataclass(frozen=True, eq=False)
class PhononBasis:
    n_sites: int
    max_phonons: int
    configs: np.ndarray = field(repr=False)
    _binom: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.configs.shape[0]

    def __len__(self):
        return self.dim

    @property
    def totals(self) -> np.ndarray:
        """Total phonon number of every configuration."""
        return self.configs.sum(axis=1, dtype=np.int64)

    def index_of(self, configs) -> np.ndarray:
        """Lexicographic rank of each row of ``configs``.

        Rows whose total exceeds M (or that carry negative entries) map to -1.
        A single 1-D configuration returns a 0-d result.
        """
        arr = np.asarray(configs, dtype=np.int64)
        single = arr.ndim == 1
        arr = np.atleast_2d(arr)
        if arr.shape[1] != self.n_sites:
            raise ValueError(f"expected {self.n_sites} occupations, got {arr.shape[1]}")
        N, M = self.n_sites, self.max_phonons
        binom = self._binom
        rank = np.zeros(arr.shape[0], dtype=np.int64)
        remaining = np.full(arr.shape[0], M, dtype=np.int64)
        valid = np.all(arr >= 0, axis=1)
        for i in range(N):
            tail = N - 1 - i
            m = arr[:, i]
            valid &= m <= remaining
            r = np.where(valid, remaining, 0)
            mm = np.where(valid, m, 0)
            # number of completions with a smaller value at position i
            rank += binom[r + tail + 1, tail + 1] - binom[r - mm + tail + 1, tail + 1]
            remaining = r - mm
        rank[~valid] = -1
        return rank[0] if single else rank

    def config(self, index: int) -> np.ndarray:
        return self.configs[index]


def enumerate_basis(n_sites: int, max_phonons: int) -> PhononBasis:
    if n_sites < 2:
        raise ValueError("n_sites must be at least 2")
    if max_phonons < 0:
        raise ValueError("max_phonons must be non-negative")
    if max_phonons > 255:
        raise CapacityExceeded("occupations are stored as uint8; max_phonons must be <= 255")
    dim = basis_dimension(n_sites, max_phonons)
    if dim > INDEX_LIMIT:
        raise CapacityExceeded(f"basis dimension {dim} exceeds the index width ({INDEX_LIMIT})")
    configs = _enumerate(n_sites, max_phonons)
    binom = _binomial_table(max_phonons + n_sites + 2, n_sites + 1)
    return PhononBasis(n_sites, max_phonons, configs, binom)


def translate(config, n: int) -> np.ndarray:
    """Phonon translation: occupation r of the result is m[(r - n) mod N].

    Works on a single configuration or row-wise on a 2-D stack.
    """
    return np.roll(np.asarray(config), n, axis=-1)


def zero_phonon_index(basis: PhononBasis) -> int:
    return int(basis.index_of(np.zeros(basis.n_sites, dtype=np.int64)))


@dataclass(frozen=True)
class KSector:
    """Total-quasimomentum sector K = 2 pi k_index / N, folded into (-pi, pi].

    ``momentum`` overrides the lattice value with an arbitrary real K. The
    sector Hamiltonian is then that of a ring threaded by the twist
    exp(iKN) (twisted boundary conditions); for K on the lattice grid it is
    identical to the periodic one. ``k_index`` should hold the nearest grid
    index so that file headers stay meaningful.
    """

    k_index: int
    basis: PhononBasis = field(repr=False)
    momentum: Optional[float] = None

    def __post_init__(self):
        n = self.basis.n_sites
        if not 0 <= self.k_index < n:
            raise ValueError(f"k_index must lie in [0, {n}), got {self.k_index}")

    @property
    def n_sites(self) -> int:
        return self.basis.n_sites

    @property
    def k_value(self) -> float:
        if self.momentum is not None:
            return float(self.momentum)
        return momentum_value(self.k_index, self.basis.n_sites)

    @property
    def twisted(self) -> bool:
        return self.momentum is not None

    @classmethod
    def at_momentum(cls, k: float, basis: PhononBasis) -> "KSector":
        """Sector at an arbitrary quasimomentum k (twisted boundary)."""
        if not math.isfinite(k):
            raise ValueError("momentum must be finite")
        return cls(nearest_k_index(k, basis.n_sites), basis, momentum=float(k))

    @property
    def dim(self) -> int:
        return self.basis.dim


def momentum_value(k_index: int, n_sites: int) -> float:
    k = 2.0 * math.pi * (k_index % n_sites) / n_sites
    if k > math.pi + 1e-12:
        k -= 2.0 * math.pi
    return k


def nearest_k_index(k: float, n_sites: int) -> int:
    """Grid index whose momentum is closest to k (mod 2 pi)."""
    j = round(k * n_sites / (2.0 * math.pi))
    return int(j % n_sites)
