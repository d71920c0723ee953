"""Gate configuration: physical parameters, derived quantities and the INI file format.

Frequencies in files are ordinary frequencies in MHz; internally everything
is angular (rad/us) and times are in microseconds.
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

from .hamiltonians import CouplingSet, DecayModel
from .pulses import PulseShape

CONFIG_VERSION = 1
TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def mhz_to_angular(f_mhz: float) -> float:
    return TWO_PI * f_mhz


@dataclass(frozen=True)
class GateConfig:
    """All parameters of one gate run.

    ``btau`` of ``None`` means no Rydberg decay. Coupling ratios follow the
    leakage-channel parametrisation: ``B_rr = b_rr_ratio * B`` and
    ``delta_rr = defect_rr_ratio * B_rr`` (likewise for the ab channel).
    """

    B_mhz: float = 350.0
    btau: float | None = 1e6
    alpha: float = 0.10472
    control_ratio: float = 4.0
    target_shape: str = "gaussian"
    control_shape: str = "gaussian"
    sigma_ratio: float = 0.2
    gap_fraction: float = 0.05
    b_rr_ratio: float = 0.5
    b_ab_ratio: float = 0.5
    defect_rr_ratio: float = 3.0
    defect_ab_ratio: float = 3.0
    delta_policy: str = "auto"
    delta_mhz: float = 0.0
    mw_pi_time_ratio: float = 10.0
    mw_detuning_ratio: float = 100.0
    ideal_prep: bool = True
    interaction: str = "exchange"
    b_sh_ratio: float = 1.0
    split_target: bool = False
    split_phase: float | None = None
    tol: float = 1e-10

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not self.B_mhz > 0:
            raise ConfigError("B_mhz", "must be positive")
        if self.btau is not None and not self.btau > 0:
            raise ConfigError("btau", "must be positive (omit for no decay)")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha", f"must lie in (0, 1), got {self.alpha}")
        if not self.control_ratio > 0:
            raise ConfigError("control_ratio", "must be positive")
        for name in ("target_shape", "control_shape"):
            try:
                PulseShape(getattr(self, name))
            except ValueError:
                raise ConfigError(name, f"unknown pulse shape {getattr(self, name)!r}") from None
        if not 0.0 < self.sigma_ratio <= 1.0:
            raise ConfigError("sigma_ratio", "must lie in (0, 1]")
        if self.gap_fraction < 0:
            raise ConfigError("gap_fraction", "must be non-negative")
        if self.delta_policy not in ("auto", "explicit"):
            raise ConfigError("delta_policy", "must be 'auto' or 'explicit'")
        if self.interaction not in ("exchange", "blockade"):
            raise ConfigError("interaction", "must be 'exchange' or 'blockade'")
        if not self.mw_pi_time_ratio > 0:
            raise ConfigError("mw_pi_time_ratio", "must be positive")
        if not self.mw_detuning_ratio > 0:
            raise ConfigError("mw_detuning_ratio", "must be positive")
        if not 1e-13 <= self.tol <= 1e-6:
            raise ConfigError("tol", "must lie in [1e-13, 1e-6]")

    def replace(self, **changes) -> "GateConfig":
        return dataclasses.replace(self, **changes)

    # Derived quantities, angular units.
    @property
    def B(self) -> float:
        return mhz_to_angular(self.B_mhz)

    @property
    def gamma(self) -> float:
        return 0.0 if self.btau is None else self.B / self.btau

    @property
    def omega_t0(self) -> float:
        return self.alpha * self.B

    @property
    def omega_c0(self) -> float:
        return self.control_ratio * self.omega_t0

    @property
    def target_duration(self) -> float:
        return TWO_PI / self.omega_t0

    @property
    def control_duration(self) -> float:
        return math.pi / self.omega_c0

    @property
    def gap(self) -> float:
        return self.gap_fraction * self.target_duration

    @property
    def eta(self) -> float:
        return 5.0 * math.pi / (4.0 * self.alpha)

    def couplings(self) -> CouplingSet:
        if self.interaction == "blockade":
            return CouplingSet(B_sh=self.b_sh_ratio * self.B)
        b_rr = self.b_rr_ratio * self.B
        b_ab = self.b_ab_ratio * self.B
        c = CouplingSet(
            B=self.B,
            B_rr=b_rr,
            B_ab=b_ab,
            delta_rr=self.defect_rr_ratio * b_rr,
            delta_ab=self.defect_ab_ratio * b_ab,
        )
        if self.delta_policy == "auto":
            return c.with_delta(-c.beta_ab)
        return c.with_delta(mhz_to_angular(self.delta_mhz))

    def decay(self) -> DecayModel:
        return DecayModel(self.gamma)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_SECTIONS = {
    "interaction": ("B_mhz", "btau", "interaction", "b_sh_ratio"),
    "pulses": ("alpha", "control_ratio", "target_shape", "control_shape", "sigma_ratio",
               "gap_fraction", "split_target", "split_phase"),
    "leakage": ("b_rr_ratio", "b_ab_ratio", "defect_rr_ratio", "defect_ab_ratio",
                "delta_policy", "delta_mhz"),
    "microwave": ("mw_pi_time_ratio", "mw_detuning_ratio", "ideal_prep"),
    "numerics": ("tol",),
}


def _coerce(name: str, raw: str):
    f = {f.name: f for f in dataclasses.fields(GateConfig)}[name]
    default = f.default
    raw = raw.strip()
    if raw.lower() in ("none", "") and name in ("btau", "split_phase"):
        return None
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError(raw)
        if isinstance(default, str):
            return raw
        return float(raw)
    except ValueError:
        raise ConfigError(name, f"cannot parse value {raw!r}") from None


def load_config(path: str | Path) -> GateConfig:
    """Read a GateConfig from an INI file; unknown keys are rejected."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError("path", f"config file {str(path)!r} not found")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError("path", f"malformed config: {exc}") from None
    values = {}
    for section in parser.sections():
        if section == "meta":
            version = parser[section].get("version", str(CONFIG_VERSION))
            if int(float(version)) != CONFIG_VERSION:
                raise ConfigError("meta.version", f"unsupported config version {version}")
            continue
        if section not in _SECTIONS:
            raise ConfigError(section, "unknown section")
        for key, raw in parser[section].items():
            if key not in _SECTIONS[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")
            values[key] = _coerce(key, raw)
    return GateConfig(**values)


def dump_config(cfg: GateConfig) -> str:
    lines = [f"[meta]\nversion = {CONFIG_VERSION}\n"]
    for section, keys in _SECTIONS.items():
        lines.append(f"[{section}]")
        for key in keys:
            lines.append(f"{key} = {getattr(cfg, key)}")
        lines.append("")
    return "\n".join(lines)
