"""Model parameters of the nonlocal excitation-phonon lattice model.

Units: hbar = 1, energies in rad/ns (angular GHz), times in ns. Device
frequencies quoted as f/2pi in GHz are converted with a single factor 2pi.
"""

from dataclasses import dataclass
import math

from .special import bessel_j_series

TWO_PI = 2.0 * math.pi

# Computed once at import; see special.bessel_j_series.
J0_HALF_PI = bessel_j_series(0, math.pi / 2)
J1_HALF_PI = bessel_j_series(1, math.pi / 2)

HOPPING_DEGENERACY_TOL = 1e-9


class DegenerateHopping(ValueError):
    """Raised when 1 + cos(phi_dc) vanishes and the hopping integral with it."""


@dataclass(frozen=True)
class DeviceParams:
    """Circuit-level knobs of the qubit-resonator array.

    ej_scaled is the product (delta phi_0^2 * E_J)/(2 pi hbar) in GHz,
    delta_omega_over_2pi the rotating-frame phonon frequency in GHz and
    phi_dc the dc flux in radians.
    """

    ej_scaled: float = 100.0
    delta_theta: float = 3.5e-3
    delta_omega_over_2pi: float = 0.3
    phi_dc: float = 0.972 * math.pi

    def __post_init__(self):
        if not self.ej_scaled > 0:
            raise ValueError(f"ej_scaled must be positive, got {self.ej_scaled}")
        if not self.delta_theta > 0:
            raise ValueError(f"delta_theta must be positive, got {self.delta_theta}")
        if not self.delta_omega_over_2pi > 0:
            raise ValueError(
                f"delta_omega_over_2pi must be positive, got {self.delta_omega_over_2pi}"
            )
        if not 0.0 <= self.phi_dc < TWO_PI:
            raise ValueError(f"phi_dc must lie in [0, 2pi), got {self.phi_dc}")


@dataclass(frozen=True)
class ModelParams:
    n_sites: int
    max_phonons: int
    t0: float
    g: float
    delta_omega: float
    lambda_eff: float
    tau_ec: float

    def __post_init__(self):
        if self.n_sites < 2:
            raise ValueError("n_sites must be at least 2")
        if self.max_phonons < 0:
            raise ValueError("max_phonons must be non-negative")
        if not self.t0 > 0:
            raise ValueError("t0 must be positive")
        if not self.delta_omega > 0:
            raise ValueError("delta_omega must be positive")

    @classmethod
    def from_couplings(cls, n_sites, max_phonons, t0, g, delta_omega, tau_ec=None):
        """Build parameters directly from (t0, g, delta_omega).

        tau_ec defaults to 1/t0.
        """
        return cls(
            n_sites=int(n_sites),
            max_phonons=int(max_phonons),
            t0=float(t0),
            g=float(g),
            delta_omega=float(delta_omega),
            lambda_eff=2.0 * g * g * delta_omega / t0 if t0 > 0 else math.nan,
            tau_ec=(1.0 / t0 if t0 > 0 else math.nan) if tau_ec is None else float(tau_ec),
        )

    @property
    def coupling(self) -> float:
        """Energy scale g * delta_omega of both coupling terms."""
        return self.g * self.delta_omega

    def with_lattice(self, n_sites=None, max_phonons=None) -> "ModelParams":
        return ModelParams(
            n_sites=self.n_sites if n_sites is None else int(n_sites),
            max_phonons=self.max_phonons if max_phonons is None else int(max_phonons),
            t0=self.t0,
            g=self.g,
            delta_omega=self.delta_omega,
            lambda_eff=self.lambda_eff,
            tau_ec=self.tau_ec,
        )


def hopping_integral(dev: DeviceParams) -> float:
    """Bare hopping t0 in rad/ns: 2 * (dphi0^2 E_J) * J0(pi/2) * (1 + cos phi_dc)."""
    one_plus_cos = 1.0 + math.cos(dev.phi_dc)
    if abs(one_plus_cos) < HOPPING_DEGENERACY_TOL:
        raise DegenerateHopping(
            f"1 + cos(phi_dc) = {one_plus_cos:.3e}; hopping vanishes at phi_dc = pi"
        )
    return 2.0 * dev.ej_scaled * TWO_PI * J0_HALF_PI * one_plus_cos


def lambda_from_device(dev: DeviceParams, g: float) -> float:
    """Effective coupling written directly in terms of the flux knob."""
    one_plus_cos = 1.0 + math.cos(dev.phi_dc)
    return g * J1_HALF_PI * dev.delta_theta / (J0_HALF_PI * one_plus_cos)


def derive_model(dev: DeviceParams, n_sites: int, max_phonons: int) -> ModelParams:
    t0 = hopping_integral(dev)
    delta_omega = TWO_PI * dev.delta_omega_over_2pi
    g = dev.ej_scaled * TWO_PI * J1_HALF_PI * dev.delta_theta / delta_omega
    return ModelParams(
        n_sites=int(n_sites),
        max_phonons=int(max_phonons),
        t0=t0,
        g=g,
        delta_omega=delta_omega,
        lambda_eff=2.0 * g * g * delta_omega / t0,
        tau_ec=1.0 / t0,
    )


def critical_tau(dev: DeviceParams, phi_dc_ref: float = 0.972 * math.pi) -> float:
    """Reference time unit 1/t0 evaluated at a fixed flux (0.972 pi by default)."""
    ref = DeviceParams(dev.ej_scaled, dev.delta_theta, dev.delta_omega_over_2pi, phi_dc_ref)
    return 1.0 / hopping_integral(ref)


def phi_dc_for_lambda(dev: DeviceParams, lambda_eff: float) -> float:
    """Flux in (0, pi) at which the effective coupling equals lambda_eff."""
    g = dev.ej_scaled * TWO_PI * J1_HALF_PI * dev.delta_theta / (TWO_PI * dev.delta_omega_over_2pi)
    one_plus_cos = g * J1_HALF_PI * dev.delta_theta / (J0_HALF_PI * lambda_eff)
    if not 0.0 < one_plus_cos < 2.0:
        raise ValueError(f"lambda_eff={lambda_eff} not reachable for these device parameters")
    return math.acos(one_plus_cos - 1.0)


def vertex(k: float, q: float, params: ModelParams) -> complex:
    """Momentum-space coupling vertex 2i g dw [sin k + sin q - sin(k+q)]."""
    return 2j * params.coupling * (math.sin(k) + math.sin(q) - math.sin(k + q))


def preparation_time(beta_p: float, residue: float = 1.0) -> float:
    """Rabi preparation time pi/(2 beta_p), divided by the residue for dressed states.

    beta_p is the pumping amplitude in rad/ns.
    """
    if not beta_p > 0:
        raise ValueError("beta_p must be positive")
    if not 0.0 < residue <= 1.0:
        raise ValueError("residue must lie in (0, 1]")
    return math.pi / (2.0 * beta_p) / residue
