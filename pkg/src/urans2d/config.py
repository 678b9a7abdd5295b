"""Run configuration: dataclasses plus the flat key=value file format.

The file format uses bracketed section headers over plain key=value lines
(parsable without any dependencies); floats are written with 17 significant
digits so that parse(serialize(config)) reproduces the configuration exactly.
"""

import configparser
import hashlib
import io
from dataclasses import dataclass, field

from .closures import Closure
from .errors import ConfigurationError
from .stepper import StepperConfig

MESH_KINDS = ("unit-square", "annulus", "file")


@dataclass
class MeshSpec:
    kind: str = "annulus"
    n: int = 8                      # unit-square subdivisions
    n_r: int = 9                    # annulus radial layers
    n_t: int = 40                   # annulus angular sectors
    r1: float = 1.0
    r2: float = 0.1
    cx: float = 0.5
    cy: float = 0.0
    path: str = ""                  # mesh file path for kind="file"

    def __post_init__(self):
        if self.kind not in MESH_KINDS:
            raise ConfigurationError(f"unknown mesh kind {self.kind!r}")
        if self.kind == "file" and not self.path:
            raise ConfigurationError("mesh kind 'file' needs a path")


@dataclass
class RunConfig:
    """Everything needed to reproduce one simulation.

    t_final = 0 is a legal empty run; otherwise the TKE activation time must
    precede the final time for closures that carry TKE.
    """

    mesh: MeshSpec = field(default_factory=MeshSpec)
    closure: Closure = field(default_factory=Closure)
    stepper: StepperConfig = field(default_factory=lambda: StepperConfig(dt=0.01))
    forcing: str = "offset-circles"
    t_final: float = 15.0
    u_ref: float = 1.0
    snapshot_times: tuple = ()
    label: str = ""

    def __post_init__(self):
        if self.t_final < 0:
            raise ConfigurationError("t_final must be nonnegative")
        if self.stepper.t_star < 0:
            raise ConfigurationError("t_star must be nonnegative")
        if self.u_ref <= 0:
            raise ConfigurationError("u_ref must be positive")
        if self.closure.has_tke and 0 < self.t_final <= self.stepper.t_star:
            raise ConfigurationError(
                f"t_final={self.t_final} does not reach the TKE activation "
                f"time t_star={self.stepper.t_star}")
        if not self.label:
            self.label = self.closure.variant


def _fmt(value):
    if isinstance(value, bool):
        return "on" if value else "off"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def serialize_config(config):
    """Canonical text form; also the input of the config hash."""
    m, c, s = config.mesh, config.closure, config.stepper
    lines = ["[mesh]"]
    lines.append(f"kind = {m.kind}")
    if m.kind == "unit-square":
        lines.append(f"n = {m.n}")
    elif m.kind == "annulus":
        for key in ("n_r", "n_t"):
            lines.append(f"{key} = {getattr(m, key)}")
        for key in ("r1", "r2", "cx", "cy"):
            lines.append(f"{key} = {_fmt(getattr(m, key))}")
    else:
        lines.append(f"path = {m.path}")
    lines += ["", "[closure]", f"variant = {c.variant}"]
    for key in ("nu", "tau", "mu", "kappa", "L", "l_min"):
        lines.append(f"{key} = {_fmt(getattr(c, key))}")
    lines.append(f"wall_multiplier = {_fmt(c.wall_multiplier)}")
    lines += ["", "[stepper]"]
    for key in ("dt", "picard_tol", "t_star"):
        lines.append(f"{key} = {_fmt(getattr(s, key))}")
    lines.append(f"picard_max = {s.picard_max}")
    lines.append(f"filter = {_fmt(s.filter_on)}")
    lines += ["", "[run]"]
    lines.append(f"forcing = {config.forcing}")
    lines.append(f"t_final = {_fmt(config.t_final)}")
    lines.append(f"u_ref = {_fmt(config.u_ref)}")
    lines.append("snapshot_times = " + ",".join(_fmt(t) for t in config.snapshot_times))
    lines.append(f"label = {config.label}")
    return "\n".join(lines) + "\n"


def _flag(text):
    text = text.strip().lower()
    if text in ("on", "true", "1", "yes"):
        return True
    if text in ("off", "false", "0", "no"):
        return False
    raise ConfigurationError(f"bad boolean value {text!r}")


def parse_config(text):
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as err:
        raise ConfigurationError(f"config parse failure: {err}") from err

    def need(section):
        if not parser.has_section(section):
            raise ConfigurationError(f"missing [{section}] section")
        return parser[section]

    msec = need("mesh")
    kind = msec.get("kind", "annulus")
    mesh = MeshSpec(
        kind=kind,
        n=int(msec.get("n", 8)),
        n_r=int(msec.get("n_r", 7)),
        n_t=int(msec.get("n_t", 40)),
        r1=float(msec.get("r1", 1.0)),
        r2=float(msec.get("r2", 0.1)),
        cx=float(msec.get("cx", 0.5)),
        cy=float(msec.get("cy", 0.0)),
        path=msec.get("path", ""),
    )
    csec = need("closure")
    closure = Closure(
        variant=csec.get("variant", "nse"),
        nu=float(csec.get("nu", 1e-4)),
        tau=float(csec.get("tau", 0.1)),
        mu=float(csec.get("mu", 0.55)),
        kappa=float(csec.get("kappa", 0.41)),
        L=float(csec.get("L", 1.0)),
        l_min=float(csec["l_min"]) if "l_min" in csec else None,
        wall_multiplier=_flag(csec.get("wall_multiplier", "on")),
    )
    ssec = need("stepper")
    stepper = StepperConfig(
        dt=float(ssec.get("dt", 0.01)),
        picard_tol=float(ssec.get("picard_tol", 1e-9)),
        picard_max=int(ssec.get("picard_max", 25)),
        filter_on=_flag(ssec.get("filter", "on")),
        t_star=float(ssec.get("t_star", 0.0)),
    )
    rsec = need("run")
    snap = rsec.get("snapshot_times", "").strip()
    snapshot_times = tuple(float(s) for s in snap.split(",") if s.strip()) if snap else ()
    return RunConfig(
        mesh=mesh, closure=closure, stepper=stepper,
        forcing=rsec.get("forcing", "offset-circles"),
        t_final=float(rsec.get("t_final", 15.0)),
        u_ref=float(rsec.get("u_ref", 1.0)),
        snapshot_times=snapshot_times,
        label=rsec.get("label", ""),
    )


def config_hash(config):
    return hashlib.sha256(serialize_config(config).encode()).hexdigest()
