"""Run configuration: a flat ``key = value`` file plus ``--key value`` overrides."""

from dataclasses import asdict, dataclass, field, fields
import math
import os

WORKERS_ENV = "POLARONQUENCH_WORKERS"


class ConfigError(ValueError):
    """Bad key, unparsable value or out-of-range setting (usage error)."""


def _floats(text):
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text):
    return tuple(int(v) for v in text.split(",") if v.strip())


def _words(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text):
    return None if text.strip().lower() in ("", "none") else float(text)


def _opt_pair(text):
    if text.strip().lower() in ("", "none"):
        return None
    pair = _floats(text)
    if len(pair) != 2:
        raise ValueError("expected two comma-separated numbers")
    return pair


@dataclass
class RunConfig:
    # device
    ej_scaled: float = 100.0
    delta_theta: float = 3.5e-3
    delta_omega_over_2pi: float = 0.3
    phi_dc_over_pi: float = 0.972
    tau_reference_phi_over_pi: float = 0.972
    # lattice
    n_sites: int = 9
    max_phonons: int = 20
    ground_max_phonons: int = 10
    # quench
    k0_index: int = 2
    k0_over_pi: float = None
    t_final: float = 100.0
    dt: float = 0.05
    nbar_reference: str = "k_gs"
    # ground-state scan
    momentum_grid: str = "lattice"
    twisted_momenta_over_pi: tuple = (0.02, 0.1, 0.25, 0.5)
    phi_sweep_over_pi: tuple = ()
    phi_bracket_over_pi: tuple = None
    # formation-time sweep
    sweep_k0_indices: tuple = ()
    sweep_k0_over_pi: tuple = ()
    # solver
    tail_tol: float = 1e-12
    lanczos_tol: float = 1e-9
    observable_stride: int = 1
    rng_seed: int = 0
    # output
    output_dir: str = "."
    formats: tuple = ("csv",)
    output_name: str = None
    matrix_cache: bool = False
    workers: int = 1

    def validate(self) -> "RunConfig":
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.ej_scaled > 0, "ej_scaled must be positive")
        need(self.delta_theta >= 0, "delta_theta must be non-negative")
        need(self.delta_omega_over_2pi > 0, "delta_omega_over_2pi must be positive")
        need(0 <= self.phi_dc_over_pi < 2, "phi_dc_over_pi must lie in [0, 2)")
        need(0 <= self.tau_reference_phi_over_pi < 2, "tau_reference_phi_over_pi must lie in [0, 2)")
        need(self.n_sites >= 2, "n_sites must be >= 2")
        need(0 <= self.max_phonons <= 255, "max_phonons must lie in [0, 255]")
        need(0 <= self.ground_max_phonons <= 255, "ground_max_phonons must lie in [0, 255]")
        need(0 <= self.k0_index < self.n_sites, f"k0_index must lie in [0, {self.n_sites})")
        need(self.k0_over_pi is None or math.isfinite(self.k0_over_pi), "k0_over_pi must be finite")
        need(self.t_final >= 0, "t_final must be non-negative")
        need(self.dt > 0, "dt must be positive")
        need(self.nbar_reference in ("k_gs", "k0"), "nbar_reference must be k_gs or k0")
        need(self.momentum_grid in ("lattice", "twisted"), "momentum_grid must be lattice or twisted")
        need(all(k != 0 for k in self.twisted_momenta_over_pi), "twisted momenta must be nonzero")
        need(all(0 <= p < 2 for p in self.phi_sweep_over_pi), "phi_sweep_over_pi values must lie in [0, 2)")
        if self.phi_bracket_over_pi is not None:
            lo, hi = self.phi_bracket_over_pi
            need(0 <= lo < hi < 2, "phi_bracket_over_pi must be lo,hi with 0 <= lo < hi < 2")
        need(all(0 <= k < self.n_sites for k in self.sweep_k0_indices), "sweep_k0_indices out of range")
        need(self.tail_tol > 0, "tail_tol must be positive")
        need(self.lanczos_tol > 0, "lanczos_tol must be positive")
        need(self.observable_stride >= 1, "observable_stride must be >= 1")
        need(set(self.formats) <= {"csv", "json"} and self.formats, "formats must be a subset of csv,json")
        need(self.workers >= 1, "workers must be >= 1")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}

    def replace(self, **changes) -> "RunConfig":
        d = asdict(self)
        d.update(changes)
        return RunConfig(**d).validate()

    @property
    def phi_dc(self) -> float:
        return self.phi_dc_over_pi * math.pi

    @property
    def effective_workers(self) -> int:
        env = os.environ.get(WORKERS_ENV)
        if env:
            try:
                n = int(env)
            except ValueError:
                raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
            if n < 1:
                raise ConfigError(f"{WORKERS_ENV} must be >= 1")
            return n
        return self.workers


_TYPES = {
    float: float,
    int: int,
    str: str,
    bool: _bool,
}

PARSERS = {}
for _f in fields(RunConfig):
    if _f.name.startswith("_"):
        continue
    default = _f.default
    if _f.name in ("twisted_momenta_over_pi", "phi_sweep_over_pi", "sweep_k0_over_pi"):
        PARSERS[_f.name] = _floats
    elif _f.name == "sweep_k0_indices":
        PARSERS[_f.name] = _ints
    elif _f.name == "formats":
        PARSERS[_f.name] = _words
    elif _f.name == "phi_bracket_over_pi":
        PARSERS[_f.name] = _opt_pair
    elif _f.name == "k0_over_pi":
        PARSERS[_f.name] = _opt_float
    elif _f.name == "output_name":
        PARSERS[_f.name] = lambda t: None if t.strip().lower() in ("", "none") else t.strip()
    else:
        PARSERS[_f.name] = _TYPES[type(default)]


def parse_value(key: str, text: str):
    if key not in PARSERS:
        raise ConfigError(f"unknown config key {key!r}")
    try:
        return PARSERS[key](text)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from None


def parse_lines(lines, source="<config>") -> dict:
    """Key/value pairs from ``key = value`` lines; '#' starts a comment."""
    out = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = parse_value(key, value)
    return out


def load_config(path=None, overrides=None) -> RunConfig:
    """Defaults, then the file at ``path``, then ``overrides`` (key -> text)."""
    values = {}
    if path is not None:
        try:
            with open(path) as fh:
                values.update(parse_lines(fh, source=str(path)))
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
    for key, text in (overrides or {}).items():
        values[key] = parse_value(key, text)
    return RunConfig(**values).validate()


def dump_config(cfg: RunConfig) -> str:
    """Inverse of ``parse_lines``: one ``key = value`` line per field."""
    lines = []
    for key, value in cfg.to_dict().items():
        if isinstance(value, list):
            text = ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
        elif value is None:
            text = "none"
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value).lower() if isinstance(value, bool) else str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"
