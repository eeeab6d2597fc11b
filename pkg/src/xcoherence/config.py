"""Run configuration: a flat sectioned key-value format.

Example (the two-mode system with ``g = 10``, ``kappa = 6``, ``nbar = 0.1``)::

    [system]
    g = 10
    kappa = 6, 6
    nbar = 0.1, 0.1

    [detectors]
    u = 1
    phi = 1

    [scan]
    tau_max = 1
    tau_steps = 21
    mode = both

    [oracle]
    n_traj = 2000
    seed = 42

Vectors are comma separated, matrix rows are separated by ``;``, complex
numbers use Python syntax (``10j``, ``1-2j``). ``#`` starts a comment, either
at the beginning of a line or after whitespace. Keys not listed in ``KEYS`` are rejected.
"""

from __future__ import annotations

import configparser
import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Union

from .correlations import DetectionGeometry, GateOrder
from .errors import ConfigSyntaxError, ConfigValidationError, ModelError
from .model import Coupling, ModelParams, ModeSystem, build_system
from .oracle import SimParams

__all__ = [
    "Mode",
    "ExplicitSystem",
    "DetectorConfig",
    "OracleConfig",
    "RunSpec",
    "parse_config",
    "serialize_config",
    "load_config",
]

KEYS = {
    "system": {"n_optical", "n_matter", "kappa", "detuning", "nbar", "g", "couplings",
               "drift", "diffusion"},
    "detectors": {"u", "phi", "eta_m", "eta_s", "gate_order"},
    "scan": {"tau_max", "tau_steps", "mode"},
    "oracle": {"dt", "burn_in", "horizon", "n_traj", "seed"},
}
DEFAULT_TAU_STEPS = 200


class Mode(enum.Enum):
    ANALYTIC = "analytic"
    MONTE_CARLO = "mc"
    BOTH = "both"

    @property
    def analytic(self) -> bool:
        return self is not Mode.MONTE_CARLO

    @property
    def monte_carlo(self) -> bool:
        return self is not Mode.ANALYTIC


@dataclass(frozen=True)
class ExplicitSystem:
    """User-supplied drift matrix (rows of complex entries) and diffusion diagonal."""

    drift: tuple
    diffusion: tuple
    n_optical: int = 1
    n_matter: int = 1

    def build(self) -> ModeSystem:
        return ModeSystem(list(self.drift), list(self.diffusion), self.n_optical, self.n_matter)


@dataclass(frozen=True)
class DetectorConfig:
    u: tuple
    phi: tuple
    eta_m: float = 1.0
    eta_s: float = 1.0
    gate_order: GateOrder = GateOrder.SCHRODINGER_FIRST

    def geometry(self) -> DetectionGeometry:
        return DetectionGeometry(list(self.u), list(self.phi), self.eta_m, self.eta_s,
                                 self.gate_order)


@dataclass(frozen=True)
class OracleConfig:
    dt: float = 1e-3
    burn_in: float = 2.0
    horizon: float = 10.0
    n_traj: int = 1000
    seed: int = 0

    def sim_params(self, sample_interval: float) -> SimParams:
        """Integrator settings whose step divides ``sample_interval`` exactly.

        ``dt`` is reduced (never increased) to ``sample_interval / k``.
        """
        k = max(1, math.ceil(sample_interval / self.dt - 1e-9))
        return SimParams(dt=sample_interval / k, burn_in=self.burn_in, horizon=self.horizon,
                         n_traj=self.n_traj, seed=self.seed, sample_every=k)


@dataclass(frozen=True)
class RunSpec:
    system: Union[ModelParams, ExplicitSystem]
    detectors: DetectorConfig
    tau_max: float
    tau_steps: int = DEFAULT_TAU_STEPS
    mode: Mode = Mode.ANALYTIC
    sim: Optional[OracleConfig] = None
    output_dir: str = field(default="xcoherence-out", compare=False)

    def __post_init__(self):
        if self.mode.monte_carlo and self.sim is None:
            raise ConfigValidationError(f"mode={self.mode.value} requires an [oracle] section")
        if not self.tau_steps >= 2:
            raise ConfigValidationError("tau_steps must be >= 2")
        if not self.tau_max > 0:
            raise ConfigValidationError("tau_max must be > 0")
        if self.sim is not None and self.mode.monte_carlo and not self.tau_max < self.sim.horizon:
            raise ConfigValidationError("tau_max must be < oracle horizon")

    @property
    def tau_grid(self):
        import numpy as np
        return np.linspace(0.0, self.tau_max, self.tau_steps)

    @property
    def tau_spacing(self) -> float:
        return self.tau_max / (self.tau_steps - 1)

    def build_system(self) -> ModeSystem:
        if isinstance(self.system, ExplicitSystem):
            return self.system.build()
        return build_system(self.system)

    def with_overrides(self, **changes) -> "RunSpec":
        import dataclasses
        return dataclasses.replace(self, **changes)


# -- parsing -----------------------------------------------------------------

def _number(key, text, kind=float):
    try:
        value = kind(text.strip().replace(" ", ""))
    except ValueError:
        raise ConfigValidationError(f"{key}: cannot parse {text.strip()!r} as {kind.__name__}") \
            from None
    if kind is not int and not math.isfinite(abs(value)):
        raise ConfigValidationError(f"{key} must be finite")
    return value


def _vector(key, text, kind=float):
    items = [t for t in text.split(",")]
    if any(not t.strip() for t in items):
        raise ConfigValidationError(f"{key}: empty vector element")
    return tuple(_number(key, t, kind) for t in items)


def _integer(key, text):
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigValidationError(f"{key}: cannot parse {text.strip()!r} as integer") from None


def _read_sections(text: str) -> dict:
    parser = configparser.ConfigParser(interpolation=None, strict=True,
                                       comment_prefixes=("#",), inline_comment_prefixes=("#",),
                                       empty_lines_in_values=False, default_section="\0")
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigSyntaxError("content before first [section] header", exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigSyntaxError(f"duplicate section [{exc.section}]", exc.lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigSyntaxError(f"duplicate key {exc.option!r} in [{exc.section}]",
                                exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigSyntaxError(f"cannot parse {line.strip()!r}", lineno) from None

    out = {}
    for name in parser.sections():
        if name not in KEYS:
            raise ConfigValidationError(f"unknown section [{name}]")
        items = dict(parser.items(name))
        unknown = sorted(set(items) - KEYS[name])
        if unknown:
            raise ConfigValidationError(f"unknown key(s) in [{name}]: {', '.join(unknown)}")
        for key, value in items.items():
            if value is None or not value.strip():
                raise ConfigValidationError(f"[{name}] {key} has no value")
        out[name] = items
    return out


def _parse_couplings(text):
    couplings = []
    for item in text.split(","):
        parts = item.split(":")
        if len(parts) != 3:
            raise ConfigValidationError(
                f"couplings: expected optical:matter:g, got {item.strip()!r}")
        couplings.append(Coupling(_integer("couplings", parts[0]),
                                  _integer("couplings", parts[1]),
                                  _number("couplings", parts[2], complex)))
    return tuple(couplings)


def _parse_system(sec: dict):
    n_opt = _integer("n_optical", sec.get("n_optical", "1"))
    n_mat = _integer("n_matter", sec.get("n_matter", "1"))
    if "drift" in sec:
        clash = sorted(set(sec) & {"kappa", "detuning", "nbar", "g", "couplings"})
        if clash:
            raise ConfigValidationError(f"drift cannot be combined with {', '.join(clash)}")
        rows = tuple(_vector("drift", r, complex) for r in sec["drift"].split(";"))
        n = n_opt + n_mat
        diffusion = (_vector("diffusion", sec["diffusion"]) if "diffusion" in sec
                     else (0.0,) * n)
        system = ExplicitSystem(rows, diffusion, n_opt, n_mat)
        try:
            system.build()
        except ModelError as exc:
            raise ConfigValidationError(str(exc)) from None
        return system

    if "diffusion" in sec:
        raise ConfigValidationError("diffusion is only accepted together with drift")
    if "kappa" not in sec:
        raise ConfigValidationError("[system] needs kappa (or an explicit drift)")
    if "g" in sec and "couplings" in sec:
        raise ConfigValidationError("give either g or couplings, not both")
    couplings = ()
    if "g" in sec:
        couplings = (Coupling(0, 0, _number("g", sec["g"], complex)),)
    elif "couplings" in sec:
        couplings = _parse_couplings(sec["couplings"])
    kw = {k: _vector(k, sec[k]) for k in ("kappa", "detuning", "nbar") if k in sec}
    try:
        return ModelParams(n_opt, n_mat, couplings=couplings, **kw)
    except ModelError as exc:
        raise ConfigValidationError(str(exc)) from None


def _parse_detectors(sec: dict, n_opt: int, n_mat: int) -> DetectorConfig:
    u = _vector("u", sec["u"], complex) if "u" in sec else (1 + 0j,) * n_opt
    phi = _vector("phi", sec["phi"], complex) if "phi" in sec else (1 + 0j,) * n_mat
    if len(u) != n_opt:
        raise ConfigValidationError(f"u has {len(u)} entries, expected n_optical = {n_opt}")
    if len(phi) != n_mat:
        raise ConfigValidationError(f"phi has {len(phi)} entries, expected n_matter = {n_mat}")
    try:
        gate = GateOrder(sec.get("gate_order", GateOrder.SCHRODINGER_FIRST.value).strip())
    except ValueError:
        raise ConfigValidationError(
            "gate_order must be schrodinger_first or maxwell_first") from None
    det = DetectorConfig(u, phi,
                         _number("eta_m", sec.get("eta_m", "1")),
                         _number("eta_s", sec.get("eta_s", "1")), gate)
    try:
        det.geometry()
    except ValueError as exc:
        raise ConfigValidationError(str(exc)) from None
    return det


def _parse_oracle(sec: dict) -> OracleConfig:
    d = OracleConfig()
    cfg = OracleConfig(
        dt=_number("dt", sec["dt"]) if "dt" in sec else d.dt,
        burn_in=_number("burn_in", sec["burn_in"]) if "burn_in" in sec else d.burn_in,
        horizon=_number("horizon", sec["horizon"]) if "horizon" in sec else d.horizon,
        n_traj=_integer("n_traj", sec["n_traj"]) if "n_traj" in sec else d.n_traj,
        seed=_integer("seed", sec["seed"]) if "seed" in sec else d.seed,
    )
    _check_oracle(cfg)
    return cfg


def _check_oracle(cfg: OracleConfig):
    if not cfg.dt > 0:
        raise ConfigValidationError("dt must be > 0")
    if not cfg.burn_in >= 0:
        raise ConfigValidationError("burn_in must be >= 0")
    if not cfg.horizon > 0:
        raise ConfigValidationError("horizon must be > 0")
    if cfg.n_traj < 2:
        raise ConfigValidationError("n_traj must be >= 2")
    if not 0 <= cfg.seed < 2**64:
        raise ConfigValidationError("seed must be an unsigned 64-bit integer")


def parse_config(text: str) -> RunSpec:
    """Parse and validate a configuration document.

    Raises
    ------
    ConfigSyntaxError
        Malformed lines, with the offending line number.
    ConfigValidationError
        Unknown keys, bad values or violated invariants.
    """
    sections = _read_sections(text)
    if "system" not in sections:
        raise ConfigValidationError("missing [system] section")
    system = _parse_system(sections["system"])
    detectors = _parse_detectors(sections.get("detectors", {}),
                                 system.n_optical, system.n_matter)
    scan = sections.get("scan", {})
    if "tau_max" not in scan:
        raise ConfigValidationError("[scan] needs tau_max")
    try:
        mode = Mode(scan.get("mode", Mode.ANALYTIC.value).strip())
    except ValueError:
        raise ConfigValidationError("mode must be analytic, mc or both") from None
    sim = _parse_oracle(sections["oracle"]) if "oracle" in sections else None
    return RunSpec(
        system=system,
        detectors=detectors,
        tau_max=_number("tau_max", scan["tau_max"]),
        tau_steps=_integer("tau_steps", scan["tau_steps"]) if "tau_steps" in scan
        else DEFAULT_TAU_STEPS,
        mode=mode,
        sim=sim,
    )


def load_config(path) -> RunSpec:
    with open(path, encoding="utf-8") as fh:
        try:
            text = fh.read()
        except UnicodeDecodeError:
            raise ConfigValidationError(f"{path}: not a UTF-8 text file") from None
    return parse_config(text)


# -- serialization -----------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, complex):
        return repr(x).strip("()")
    return repr(x)


def _fmt_vec(values) -> str:
    return ", ".join(_fmt(v) for v in values)


def serialize_config(spec: RunSpec) -> str:
    """Render ``spec`` in the configuration format, with every default explicit."""
    lines = ["[system]"]
    s = spec.system
    lines += [f"n_optical = {s.n_optical}", f"n_matter = {s.n_matter}"]
    if isinstance(s, ExplicitSystem):
        lines.append("drift = " + "; ".join(_fmt_vec(complex(v) for v in row) for row in s.drift))
        lines.append("diffusion = " + _fmt_vec(float(v) for v in s.diffusion))
    else:
        lines += [f"kappa = {_fmt_vec(s.kappa)}",
                  f"detuning = {_fmt_vec(s.detuning)}",
                  f"nbar = {_fmt_vec(s.nbar)}"]
        if s.couplings:
            lines.append("couplings = " + ", ".join(
                f"{c.optical}:{c.matter}:{_fmt(complex(c.g))}" for c in s.couplings))
    d = spec.detectors
    lines += ["", "[detectors]",
              f"u = {_fmt_vec(complex(v) for v in d.u)}",
              f"phi = {_fmt_vec(complex(v) for v in d.phi)}",
              f"eta_m = {_fmt(float(d.eta_m))}",
              f"eta_s = {_fmt(float(d.eta_s))}",
              f"gate_order = {d.gate_order.value}"]
    lines += ["", "[scan]",
              f"tau_max = {_fmt(float(spec.tau_max))}",
              f"tau_steps = {spec.tau_steps}",
              f"mode = {spec.mode.value}"]
    if spec.sim is not None:
        o = spec.sim
        lines += ["", "[oracle]",
                  f"dt = {_fmt(float(o.dt))}",
                  f"burn_in = {_fmt(float(o.burn_in))}",
                  f"horizon = {_fmt(float(o.horizon))}",
                  f"n_traj = {o.n_traj}",
                  f"seed = {o.seed}"]
    return "\n".join(lines) + "\n"
