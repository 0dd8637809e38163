"""Run configuration: flat, sectioned ``key = value`` files.

Example::

    [domain]
    dim = 1
    lengths = pi
    n_grid = 255

    [coefficients]
    a = 0.1
    b = 0.1
    p = 3

    [profile]
    kind = first-mode

    [amplitude]
    rho_min = 8
    factor = 2
    count = 8

    [time]
    dt0 = 1e-3
    dt_min = 1e-12
    t_max = 10
    stride = 10

Unknown sections or keys are rejected. Lengths accept plain numbers and
multiples of ``pi`` (``pi``, ``2*pi``, ``pi/2``).
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .integrator import MODES, StepControl, Thresholds
from .model import AmplitudeError, Coefficients, make_profile, validate_coefficients
from .spectral import DomainSpec, SpectralBasis, build_basis


class ConfigError(ValueError):
    pass


def _number(text: str) -> float:
    s = text.strip().replace(" ", "")
    m = re.fullmatch(r"(?:([0-9.eE+-]+)\*)?pi(?:/([0-9.eE+-]+))?", s)
    if m:
        return float(m.group(1) or 1.0) * math.pi / float(m.group(2) or 1.0)
    return float(s)


def _bool(text: str) -> bool:
    s = text.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int(text: str) -> int:
    return int(text.strip())


def _floats(text: str) -> tuple[float, ...]:
    return tuple(_number(x) for x in text.split(","))


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(","))


SCHEMA = {
    "domain": {"dim": _int, "lengths": _floats, "n_grid": _int},
    "coefficients": {"a": _number, "b": _number, "p": _number},
    "profile": {
        "kind": str.strip,
        "k": _ints,
        "center": _floats,
        "width": _number,
        "amplitude": _number,
        "velocity": _number,
        "modes": _int,
        "path": str.strip,
    },
    "amplitude": {"rho": _number, "rho_min": _number, "factor": _number, "count": _int},
    "time": {
        "dt0": _number,
        "dt_min": _number,
        "t_max": _number,
        "stride": _int,
        "safety": _number,
        "mode": str.strip,
    },
    "thresholds": {"base_factor": _number, "count": _int, "factor": _number, "fit_window": _int},
    "constants": {"budget": _int, "starts": _int, "n_modes": _int},
    "run": {"seed": _int, "jobs": _int},
    "output": {"dir": str.strip, "svg": _bool, "fit_upper_half": _bool},
}

REQUIRED = {
    "domain": ("dim", "lengths", "n_grid"),
    "coefficients": ("a", "b", "p"),
    "time": ("dt0", "t_max"),
}


@dataclass
class RunConfig:
    domain: DomainSpec
    basis: SpectralBasis
    coeffs: Coefficients
    profile_kind: str
    profile_params: dict
    rho: float | None
    rho_grid: list[float] | None
    control: StepControl
    stride: int = 1
    mode: str = "full"
    thresholds: Thresholds = field(default_factory=Thresholds)
    const_budget: int = 200
    const_starts: int = 8
    const_modes: int | None = None
    seed: int = 0
    jobs: int = 1
    out_dir: Path = Path("out")
    svg: bool = False
    fit_upper_half: bool = True
    source: Path | None = None

    def make_profiles(self):
        params = dict(self.profile_params)
        if self.profile_kind == "random":
            params.setdefault("seed", self.seed)
        return make_profile(self.profile_kind, self.basis, **params)


def _parse(text: str, origin: str) -> dict[str, dict]:
    parser = configparser.ConfigParser(interpolation=None, strict=True, default_section="__none__")
    parser.optionxform = str
    try:
        parser.read_string(text, source=origin)
    except configparser.Error as exc:
        raise ConfigError(f"{origin}: {' '.join(str(exc).split())}") from exc
    out: dict[str, dict] = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{origin}: unknown section [{section}]")
        out[section] = {}
        for key, raw in parser.items(section):
            conv = SCHEMA[section].get(key)
            if conv is None:
                raise ConfigError(f"{origin}: unknown key {key!r} in [{section}]")
            try:
                out[section][key] = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"{origin}: [{section}] {key} = {raw!r}: {exc}") from exc
    for section, keys in REQUIRED.items():
        for key in keys:
            if key not in out.get(section, {}):
                raise ConfigError(f"{origin}: missing required key {key!r} in [{section}]")
    return out


def load_config(path, seed: int | None = None, jobs: int | None = None, out_dir=None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return config_from_text(text, origin=str(path), seed=seed, jobs=jobs, out_dir=out_dir, base=path.parent)


def config_from_text(text, origin="<config>", seed=None, jobs=None, out_dir=None, base=None) -> RunConfig:
    """Parse and validate; every admissibility check runs here, at load time."""
    s = _parse(text, origin)
    dom = s["domain"]
    domain = DomainSpec(dim=dom["dim"], lengths=dom["lengths"], n_grid=dom["n_grid"])
    basis = build_basis(domain)
    co = s["coefficients"]
    coeffs = validate_coefficients(co["a"], co["b"], co["p"], domain.dim, basis.lambda_1)

    prof = dict(s.get("profile", {}))
    kind = prof.pop("kind", "first-mode")
    if "k" in prof and len(prof["k"]) == 1:
        prof["k"] = prof["k"][0]
    if "path" in prof and base is not None:
        prof["path"] = str((Path(base) / prof["path"]).resolve())

    amp = s.get("amplitude", {})
    rho = amp.get("rho")
    grid = None
    if {"rho_min", "factor", "count"} & amp.keys():
        missing = {"rho_min", "factor", "count"} - amp.keys()
        if missing:
            raise ConfigError(f"{origin}: sweep grid needs {sorted(missing)} in [amplitude]")
        if amp["count"] < 1 or not amp["factor"] > 0:
            raise ConfigError(f"{origin}: sweep grid needs count >= 1 and factor > 0")
        grid = [amp["rho_min"] * amp["factor"] ** k for k in range(amp["count"])]
    for r in ([rho] if rho is not None else []) + (grid or []):
        if not (math.isfinite(r) and r > 0):
            raise AmplitudeError(f"rho must be > 0, got {r!r}")

    tm = s["time"]
    dt0 = tm["dt0"]
    control = StepControl(
        dt0=dt0,
        dt_min=tm.get("dt_min", dt0 * 2.0**-30),
        t_max=tm["t_max"],
        safety=tm.get("safety", 0.1),
    )
    mode = tm.get("mode", "full")
    if mode not in MODES:
        raise ConfigError(f"{origin}: [time] mode must be one of {MODES}")
    stride = tm.get("stride", 1)
    if stride < 1:
        raise ConfigError(f"{origin}: [time] stride must be >= 1")
    thresholds = Thresholds(**s.get("thresholds", {}))

    const = s.get("constants", {})
    run = s.get("run", {})
    out = s.get("output", {})
    cfg = RunConfig(
        domain=domain,
        basis=basis,
        coeffs=coeffs,
        profile_kind=kind,
        profile_params=prof,
        rho=rho,
        rho_grid=grid,
        control=control,
        stride=stride,
        mode=mode,
        thresholds=thresholds,
        const_budget=const.get("budget", 200),
        const_starts=const.get("starts", 8),
        const_modes=const.get("n_modes"),
        seed=run.get("seed", 0) if seed is None else int(seed),
        jobs=run.get("jobs", 1) if jobs is None else int(jobs),
        out_dir=Path(out_dir if out_dir is not None else out.get("dir", "out")),
        svg=out.get("svg", False),
        fit_upper_half=out.get("fit_upper_half", True),
        source=Path(origin) if base is not None else None,
    )
    if cfg.seed < 0 or cfg.seed >= 2**64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {cfg.seed}")
    if cfg.jobs < 1:
        raise ConfigError(f"jobs must be >= 1, got {cfg.jobs}")
    # profile admissibility is part of load-time validation
    cfg.make_profiles()
    return cfg
