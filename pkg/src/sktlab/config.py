"""Run configuration: a TOML document with one table per concern.

Required keys are ``model.a0``, ``model.a``, ``grid.extents``, ``grid.cells``,
``time.T`` and ``time.dt``; everything else has a default.  ``render`` and
``parse`` are exact inverses on valid configurations.
"""
from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import tomli
import tomli_w

from .entropy import PROFILES, CutoffSpec
from .errors import ConfigError, InputError
from .grid import Field, Grid
from .model import ModelSpec
from .reactions import ReactionSpec, Sampling
from .solver.fv import NewtonOptions
from .solver.proxy import ManufacturedProxy

REACTIONS = ("zero", "logistic", "relaxation")
PROBE_MODES = ("fine-proxy", "manufactured")
AUDIT_SOURCES = ("exact", "solver")


@dataclass
class ModelSection:
    a0: list
    a: list
    n: Optional[int] = None
    d: int = 1
    pi: Optional[list] = None
    lam: Optional[list] = None
    b: Optional[list] = None
    reaction: str = "zero"
    beta: Optional[list] = None
    gamma: Optional[list] = None


@dataclass
class GridSection:
    extents: list
    cells: list


@dataclass
class InitialSection:
    """u0 = mean + amplitude * prod_k cos(pi x_k / E_k)."""

    mean: Optional[list] = None
    amplitude: Optional[list] = None


@dataclass
class TimeSection:
    T: float
    dt: float
    newton_tol: float = 1e-10
    newton_max_iter: int = 25


@dataclass
class CutoffSection:
    K: int = 3
    L: float = 10.0
    M: float = 100.0
    eps: float = 1e-3
    profile: str = "bump"


@dataclass
class ProbeSection:
    mode: str = "fine-proxy"
    refinement: int = 2
    perturbation: float = 0.0
    tolerance: Optional[float] = None


@dataclass
class AuditSection:
    window: Optional[float] = None
    source: str = "exact"
    ladder: Optional[list] = None
    steps: Optional[list] = None


@dataclass
class OutputSection:
    dir: str = "out"
    cadence: int = 1


@dataclass
class RunConfig:
    model: ModelSection
    grid: GridSection
    time: TimeSection
    initial: InitialSection = field(default_factory=InitialSection)
    cutoff: CutoffSection = field(default_factory=CutoffSection)
    probe: ProbeSection = field(default_factory=ProbeSection)
    audit: AuditSection = field(default_factory=AuditSection)
    output: OutputSection = field(default_factory=OutputSection)
    sweep: dict = field(default_factory=dict)
    seed: int = 0

    # -- builders for the library objects ----------------------------------

    @property
    def n(self) -> int:
        return len(self.model.a0)

    def reaction_spec(self) -> ReactionSpec:
        m = self.model
        if m.reaction == "zero":
            return ReactionSpec.zero(self.n)
        if m.reaction == "logistic":
            return ReactionSpec.logistic(m.beta, m.gamma)
        return ReactionSpec.relaxation(self._lam())

    def _lam(self):
        return np.zeros(self.n) if self.model.lam is None else np.asarray(self.model.lam, dtype=float)

    def model_spec(self) -> ModelSpec:
        m = self.model
        b = None if m.b is None else np.asarray(m.b, dtype=float)
        return ModelSpec.build(m.a0, m.a, pi=m.pi, lam=self._lam(), b=b, reaction=self.reaction_spec(),
                               d=m.d)

    def grid_obj(self) -> Grid:
        return Grid(tuple(float(e) for e in self.grid.extents), tuple(int(c) for c in self.grid.cells))

    def cutoff_spec(self) -> CutoffSpec:
        c = self.cutoff
        return CutoffSpec(K=c.K, L=c.L, M=c.M, eps=c.eps, profile=c.profile)

    def newton(self) -> NewtonOptions:
        return NewtonOptions(tol=self.time.newton_tol, max_iter=self.time.newton_max_iter)

    def sampling(self) -> Sampling:
        return Sampling(seed=self.seed)

    def initial_mean(self) -> np.ndarray:
        return np.ones(self.n) if self.initial.mean is None else np.asarray(self.initial.mean, float)

    def initial_amplitude(self) -> np.ndarray:
        amp = self.initial.amplitude
        return np.zeros(self.n) if amp is None else np.asarray(amp, float)

    def initial_field(self, grid: Grid) -> Field:
        x = grid.centers
        shape = np.ones(x.shape[1])
        for k in range(grid.dim):
            shape = shape * np.cos(np.pi * x[k] / grid.extents[k])
        data = self.initial_mean()[:, None] + self.initial_amplitude()[:, None] * shape[None]
        return Field(data, grid)

    def manufactured(self, spec: ModelSpec) -> ManufacturedProxy:
        return ManufacturedProxy(spec, tuple(float(e) for e in self.grid.extents), self.initial_mean(),
                                 self.initial_amplitude())


SECTIONS = {
    "model": ModelSection,
    "grid": GridSection,
    "time": TimeSection,
    "initial": InitialSection,
    "cutoff": CutoffSection,
    "probe": ProbeSection,
    "audit": AuditSection,
    "output": OutputSection,
}
# config spelling -> dataclass field
ALIASES = {("model", "lambda"): "lam"}


def _toml_name(section, name):
    for (sec, key), attr in ALIASES.items():
        if sec == section and attr == name:
            return key
    return name


def _attr_name(section, key):
    return ALIASES.get((section, key), key)


class ConfigIssue(ConfigError):
    """ConfigError carrying the offending dotted key and, when known, its line."""

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        where = ""
        if line is not None:
            where = f"line {line}: "
        if key is not None:
            where += f"{key}: "
        super().__init__(where + message)


def _locate(text, section, key):
    """1-based line of ``key`` inside ``[section]`` (or of the section header)."""
    if text is None:
        return None
    current = None
    header_line = None
    pat = re.compile(r"^\s*\[\s*([A-Za-z0-9_.\-]+)\s*\]\s*(#.*)?$")
    for no, raw in enumerate(text.splitlines(), start=1):
        m = pat.match(raw)
        if m:
            current = m.group(1)
            if current == section:
                header_line = no
            continue
        if current == section and key is not None:
            stripped = raw.strip()
            if re.match(rf'^"?{re.escape(key)}"?\s*=', stripped):
                return no
    return header_line


def _decode_error(exc) -> ConfigIssue:
    msg = str(exc)
    m = re.search(r"line (\d+)", msg)
    return ConfigIssue(f"malformed TOML ({msg})", line=int(m.group(1)) if m else None)


def _as_float_list(value, key, text, section, name):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigIssue("expected numbers", key, _locate(text, section, name)) from None
    if not np.all(np.isfinite(arr)):
        raise ConfigIssue("values must be finite", key, _locate(text, section, name))
    return arr


def _section(data, name, text):
    cls = SECTIONS[name]
    raw = data.get(name, None)
    fields = {f.name: f for f in dataclasses.fields(cls)}
    required = [f.name for f in fields.values()
                if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING]
    if raw is None:
        if required:
            raise ConfigIssue("missing required section", f"{name}.{_toml_name(name, required[0])}")
        return cls()
    if not isinstance(raw, dict):
        raise ConfigIssue("expected a table", name, _locate(text, name, None))
    kwargs = {}
    for key, value in raw.items():
        attr = _attr_name(name, key)
        if attr not in fields:
            raise ConfigIssue("unknown key", f"{name}.{key}", _locate(text, name, key))
        kwargs[attr] = value
    for attr in required:
        if attr not in kwargs:
            raise ConfigIssue("missing required key", f"{name}.{_toml_name(name, attr)}",
                              _locate(text, name, None))
    return cls(**kwargs)


def _check_types(cfg: RunConfig, text):
    """Shape and range checks that name the key; library constructors do the rest."""

    def fail(section, key, message):
        raise ConfigIssue(message, f"{section}.{key}", _locate(text, section, key))

    m = cfg.model
    n = len(m.a0) if isinstance(m.a0, list) else None
    if not n:
        fail("model", "a0", "expected a nonempty array")
    if m.n is not None and m.n != n:
        fail("model", "n", f"n = {m.n} but a0 has {n} entries")
    _as_float_list(m.a0, "model.a0", text, "model", "a0")
    a = _as_float_list(m.a, "model.a", text, "model", "a")
    if a.shape != (n, n):
        fail("model", "a", f"expected a {n}x{n} array")
    for key in ("pi", "lambda", "beta"):
        val = getattr(m, _attr_name("model", key))
        if val is not None and _as_float_list(val, f"model.{key}", text, "model", key).shape != (n,):
            fail("model", key, f"expected {n} entries")
    if m.gamma is not None and _as_float_list(m.gamma, "model.gamma", text, "model", "gamma").shape != (n, n):
        fail("model", "gamma", f"expected a {n}x{n} array")
    if m.d not in (1, 2) or isinstance(m.d, bool):
        fail("model", "d", "expected 1 or 2")
    if m.b is not None and _as_float_list(m.b, "model.b", text, "model", "b").shape != (n, m.d):
        fail("model", "b", f"expected an {n}x{m.d} array")
    if m.reaction not in REACTIONS:
        fail("model", "reaction", f"expected one of {REACTIONS}")
    if m.reaction == "logistic" and (m.beta is None or m.gamma is None):
        fail("model", "beta" if m.beta is None else "gamma", "logistic reaction needs beta and gamma")

    g = cfg.grid
    ext = _as_float_list(g.extents, "grid.extents", text, "grid", "extents")
    if ext.shape != (m.d,):
        fail("grid", "extents", f"expected {m.d} entries (model.d)")
    if not (isinstance(g.cells, list) and len(g.cells) == m.d
            and all(isinstance(c, int) and not isinstance(c, bool) and c > 0 for c in g.cells)):
        fail("grid", "cells", f"expected {m.d} positive integers")

    for key in ("mean", "amplitude"):
        val = getattr(cfg.initial, key)
        if val is not None and _as_float_list(val, f"initial.{key}", text, "initial", key).shape != (n,):
            fail("initial", key, f"expected {n} entries")

    t = cfg.time
    for key in ("T", "dt", "newton_tol"):
        val = getattr(t, key)
        if isinstance(val, bool) or not isinstance(val, (int, float)) or not np.isfinite(val):
            fail("time", key, "expected a finite number")
    if t.T < 0:
        fail("time", "T", "must be nonnegative")
    if not t.dt > 0:
        fail("time", "dt", "must be positive")
    if not t.newton_tol > 0:
        fail("time", "newton_tol", "must be positive")
    if not (isinstance(t.newton_max_iter, int) and t.newton_max_iter > 0):
        fail("time", "newton_max_iter", "expected a positive integer")

    c = cfg.cutoff
    if c.profile not in PROFILES:
        fail("cutoff", "profile", f"expected one of {tuple(PROFILES)}")

    p = cfg.probe
    if p.mode not in PROBE_MODES:
        fail("probe", "mode", f"expected one of {PROBE_MODES}")
    if not (isinstance(p.refinement, int) and p.refinement >= 1):
        fail("probe", "refinement", "expected a positive integer")
    if p.tolerance is not None and not p.tolerance >= 0:
        fail("probe", "tolerance", "must be nonnegative")
    if not p.perturbation > -1:
        fail("probe", "perturbation", "must exceed -1")

    au = cfg.audit
    if au.source not in AUDIT_SOURCES:
        fail("audit", "source", f"expected one of {AUDIT_SOURCES}")
    if au.window is not None and not (0 <= au.window <= t.T):
        fail("audit", "window", f"window must lie in [0, time.T = {t.T}]")
    if au.ladder is not None:
        if not (isinstance(au.ladder, list) and len(au.ladder) >= 2
                and all(isinstance(x, int) and x > 0 for x in au.ladder)):
            fail("audit", "ladder", "expected at least two positive integers")
        if au.steps is not None and (len(au.steps) != len(au.ladder)
                                     or not all(isinstance(x, int) and x > 0 for x in au.steps)):
            fail("audit", "steps", "expected one positive integer per ladder level")

    o = cfg.output
    if not (isinstance(o.cadence, int) and o.cadence >= 1):
        fail("output", "cadence", "expected a positive integer")
    if not isinstance(o.dir, str) or not o.dir:
        fail("output", "dir", "expected a path")

    if not isinstance(cfg.seed, int) or cfg.seed < 0:
        raise ConfigIssue("expected a nonnegative integer", "seed", _locate(text, None, "seed"))
    for key, values in cfg.sweep.items():
        if not isinstance(values, list) or not values:
            fail("sweep", key, "expected a nonempty array of values")
        sec, _, name = key.partition(".")
        if sec not in SECTIONS or not name:
            fail("sweep", key, "sweep keys are dotted paths such as \"cutoff.K\"")


def _check_objects(cfg: RunConfig, text):
    """Run every library constructor so preconditions fail before any run starts."""
    steps = [
        ("model", cfg.model_spec),
        ("grid", cfg.grid_obj),
        ("cutoff", cfg.cutoff_spec),
        ("time", cfg.newton),
    ]
    for section, build in steps:
        try:
            build()
        except InputError as exc:
            raise ConfigIssue(str(exc), section, _locate(text, section, None)) from None
    try:
        cfg.initial_field(cfg.grid_obj())
    except InputError as exc:
        raise ConfigIssue(f"initial data invalid: {exc}", "initial", _locate(text, "initial", None)) from None


def from_dict(data: dict, text: Optional[str] = None) -> RunConfig:
    unknown = set(data) - set(SECTIONS) - {"seed", "sweep"}
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigIssue("unknown section or key", key, _locate(text, key, None))
    sweep = data.get("sweep", {})
    if not isinstance(sweep, dict):
        raise ConfigIssue("expected a table", "sweep", _locate(text, "sweep", None))
    try:
        cfg = RunConfig(
            model=_section(data, "model", text),
            grid=_section(data, "grid", text),
            time=_section(data, "time", text),
            initial=_section(data, "initial", text),
            cutoff=_section(data, "cutoff", text),
            probe=_section(data, "probe", text),
            audit=_section(data, "audit", text),
            output=_section(data, "output", text),
            sweep=dict(sweep),
            seed=data.get("seed", 0),
        )
    except TypeError as exc:
        raise ConfigIssue(f"invalid value ({exc})") from None
    _check_types(cfg, text)
    _check_objects(cfg, text)
    return cfg


def parse(text: str) -> RunConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise _decode_error(exc) from None
    return from_dict(data, text)


def load(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigIssue(f"cannot read config: {exc}") from None
    return parse(text)


def to_dict(cfg: RunConfig) -> dict:
    out = {"seed": cfg.seed}
    for name in SECTIONS:
        sec = getattr(cfg, name)
        table = {}
        for f in dataclasses.fields(sec):
            value = getattr(sec, f.name)
            if value is not None:
                table[_toml_name(name, f.name)] = value
        out[name] = table
    if cfg.sweep:
        out["sweep"] = dict(cfg.sweep)
    return out


def render(cfg: RunConfig) -> str:
    return tomli_w.dumps(to_dict(cfg))


def with_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    """A validated copy with dotted-path values replaced, e.g. {"cutoff.K": 10}."""
    data = to_dict(cfg)
    for key, value in overrides.items():
        sec, _, name = key.partition(".")
        if not name:
            data[sec] = value
        else:
            data.setdefault(sec, {})[name] = value
    data.pop("sweep", None)
    return from_dict(data)
