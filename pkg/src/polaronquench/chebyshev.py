"""Chebyshev propagator for exp(-i H dt) in one K sector.

U(dt) = exp(-i b dt) [c_0 + 2 sum_{p>=1} c_p T_p(H~)],  c_p = (-i)^p J_p(a dt),
with H~ = (H - b)/a. The vectors v_p = T_p(H~) psi follow the standard
three-term recurrence v_{p+1} = 2 H~ v_p - v_{p-1}.
"""

from dataclasses import dataclass, field
import logging

import numpy as np

from .special import bessel_j_miller

logger = logging.getLogger(__name__)

UNITARITY_HARD_LIMIT = 1e-4
MIN_ORDER = 4


class UnitarityViolation(RuntimeError):
    def __init__(self, deviation, step=None):
        where = "" if step is None else f" at step {step}"
        super().__init__(f"|norm - 1| = {deviation:.3e} exceeds {UNITARITY_HARD_LIMIT:g}{where}")
        self.deviation = deviation
        self.step = step


@dataclass(frozen=True, eq=False)
class PropagatorPlan:
    op: object = field(repr=False)  # RescaledOperator
    dt: float
    n_cheb: int
    coeffs: np.ndarray = field(repr=False)
    phase: complex

    @property
    def tail(self) -> float:
        return float(abs(self.coeffs[-1]))


def chebyshev_coefficients(x: float, order: int) -> np.ndarray:
    """c_p = (-i)^p J_p(x) for p = 0 .. order."""
    j = bessel_j_miller(order, x)
    return j * (-1j) ** np.arange(order + 1)


def plan(op, dt: float, tail_tol: float = 1e-12, n_cheb: int = None) -> PropagatorPlan:
    """Fix the expansion order and coefficients for a time step ``dt``.

    The order is the smallest N_C >= 4 with |J_{N_C}(a dt)| < tail_tol, unless
    ``n_cheb`` forces a fixed order.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not tail_tol > 0:
        raise ValueError("tail_tol must be positive")
    x = op.a_scale * dt
    if n_cheb is None:
        trial = int(x) + 20
        while True:
            j = bessel_j_miller(trial, x)
            below = np.nonzero((np.abs(j) < tail_tol) & (np.arange(trial + 1) > x))[0]
            if below.size:
                n_cheb = max(MIN_ORDER, int(below[0]))
                break
            trial *= 2
    elif n_cheb < 1:
        raise ValueError("n_cheb must be >= 1")
    coeffs = chebyshev_coefficients(x, n_cheb)
    return PropagatorPlan(op=op, dt=float(dt), n_cheb=int(n_cheb), coeffs=coeffs,
                          phase=complex(np.exp(-1j * op.b_shift * dt)))


class Workspace:
    """Three recurrence buffers plus the accumulator, reused across steps."""

    def __init__(self, dim):
        self.bufs = [np.empty(dim, dtype=np.complex128) for _ in range(3)]
        self.acc = np.empty(dim, dtype=np.complex128)


def step(plan: PropagatorPlan, psi, workspace: Workspace = None, *, check: bool = True) -> np.ndarray:
    """One propagation step psi -> U(dt) psi; returns a new array."""
    op = plan.op
    psi = np.asarray(psi, dtype=np.complex128)
    if psi.shape != (op.dim,):
        raise ValueError(f"state has shape {psi.shape}, expected ({op.dim},)")
    ws = workspace or Workspace(op.dim)
    prev, cur, nxt = ws.bufs
    c = plan.coeffs
    acc = ws.acc
    np.multiply(psi, c[0], out=acc)
    prev[:] = psi
    op.apply_into(prev, cur)
    acc += 2.0 * c[1] * cur
    for p in range(2, plan.n_cheb + 1):
        op.apply_into(cur, nxt, alpha=2.0, y=prev, beta=-1.0)
        acc += 2.0 * c[p] * nxt
        prev, cur, nxt = cur, nxt, prev
    out = plan.phase * acc
    if check:
        dev = abs(np.linalg.norm(out) - 1.0)
        if dev > UNITARITY_HARD_LIMIT:
            raise UnitarityViolation(dev)
    return out


@dataclass
class EvolutionLog:
    norm_drift: list = field(default_factory=list)

    @property
    def max_drift(self) -> float:
        return max(self.norm_drift, default=0.0)


def evolve(plan: PropagatorPlan, psi0, n_steps: int, observer=None, log: EvolutionLog = None):
    """Apply ``step`` n_steps times.

    ``observer(step_index, time, state)`` is called after every step
    (step_index starts at 1); it must not modify the state. Returns the
    final state; the per-step norm drift is appended to ``log`` if given.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be non-negative")
    psi = np.array(psi0, dtype=np.complex128)
    ws = Workspace(psi.size)
    for i in range(1, n_steps + 1):
        try:
            psi = step(plan, psi, ws)
        except UnitarityViolation as exc:
            raise UnitarityViolation(exc.deviation, step=i) from None
        if log is not None:
            log.norm_drift.append(abs(np.linalg.norm(psi) - 1.0))
        if observer is not None:
            observer(i, i * plan.dt, psi)
    return psi
