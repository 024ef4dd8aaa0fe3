"""Run configuration: a flat sectioned key-value file parsed with configparser.

Every section maps onto a dataclass; keys not declared there are rejected.
The ``[metric]`` and ``[weight]`` sections take a ``name`` plus the keyword
parameters of the selected factory.
"""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import inspect
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import geometry, weight
from .errors import ConfigError


def _floats(text) -> tuple:
    if isinstance(text, (tuple, list)):
        return tuple(float(x) for x in text)
    text = str(text).strip()
    return tuple(float(x) for x in text.split(",") if x.strip()) if text else ()


@dataclass
class MeshSpec:
    r0: float = 1.0
    R: float = 2.0
    n_r: int = 33
    n_theta: int = 64


@dataclass
class TimeSpec:
    T: float = 2.0
    n_t: int = 100
    tau: float = 0.25


@dataclass
class CarlemanSpec:
    gamma_rule: str = "midpoint"
    s_min: float = 0.1
    s_max: float = 100.0
    s_count: int = 25
    corpus_size: int = 20
    corpus_solutions: int = 4
    ibp_s: tuple = (0.5, 2.0, 10.0)
    ledger_s: float = 1.0
    ibp_base_n: int = 16
    ibp_levels: int = 3


@dataclass
class FamilySpec:
    size: int = 8
    modes: int = 2
    b_profile: str = "t2_smoothstep"
    energy_corpus: int = 10
    probe_members: int = 6
    probe_width: float = 0.2
    probe_delay: float = 0.2


@dataclass
class InverseSpec:
    a_c0: float = 2.0
    a_cos: tuple = (1.0,)
    a_sin: tuple = ()
    reg_lambda: float = 1e-6
    max_iter: int = 200
    noise_levels: tuple = (0.001, 0.005, 0.01, 0.02, 0.05)
    refine: int = 2
    grad_checks: int = 10


@dataclass
class RunConfig:
    metric: str = "identity"
    metric_params: dict = field(default_factory=dict)
    weight: str = "quadratic"
    weight_params: dict = field(default_factory=lambda: {"r0": 1.0})
    mesh: MeshSpec = field(default_factory=MeshSpec)
    time: TimeSpec = field(default_factory=TimeSpec)
    carleman: CarlemanSpec = field(default_factory=CarlemanSpec)
    family: FamilySpec = field(default_factory=FamilySpec)
    inverse: InverseSpec = field(default_factory=InverseSpec)
    seed: int = 0
    out: str = "report"

    # -- serialization ------------------------------------------------------
    def to_ini(self) -> str:
        lines = ["[run]", f"seed = {self.seed}", f"out = {self.out}", "",
                 "[metric]", f"name = {self.metric}"]
        lines += [f"{k} = {_fmt(v)}" for k, v in sorted(self.metric_params.items())]
        lines += ["", "[weight]", f"name = {self.weight}"]
        lines += [f"{k} = {_fmt(v)}" for k, v in sorted(self.weight_params.items())]
        for sec in ("mesh", "time", "carleman", "family", "inverse"):
            lines += ["", f"[{sec}]"]
            obj = getattr(self, sec)
            lines += [f"{f.name} = {_fmt(getattr(obj, f.name))}" for f in dataclasses.fields(obj)]
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        """sha256 of the canonical echo; the output directory does not enter it."""
        text = self.to_ini().replace(f"out = {self.out}\n", "")
        return hashlib.sha256(text.encode()).hexdigest()

    def a_true(self):
        from .stability import BoundaryProfile
        return BoundaryProfile(self.inverse.a_c0, tuple(self.inverse.a_cos), tuple(self.inverse.a_sin))


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _coerce(value: str, kind, where: str):
    try:
        if kind is int or kind == "int":
            return int(value)
        if kind is float or kind == "float":
            return float(value)
        if kind is tuple or kind == "tuple":
            return _floats(value)
        return str(value).strip()
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {value!r} ({exc})") from None


def _factory_params(factory, section: str, name: str, items: dict) -> dict:
    sig = inspect.signature(factory)
    allowed = {p for p in sig.parameters if p not in ("n",)}
    out = {}
    for key, val in items.items():
        if key not in allowed:
            raise ConfigError(f"[{section}] unknown key {key!r} for {name!r}; allowed: {sorted(allowed)}")
        out[key] = _coerce(val, float, f"[{section}] {key}")
    return out


SECTIONS = ("run", "metric", "weight", "mesh", "time", "carleman", "family", "inverse")


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, strict=True)
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    unknown = [s for s in cp.sections() if s not in SECTIONS]
    if unknown:
        raise ConfigError(f"{source}: unknown section(s) {unknown}; allowed: {list(SECTIONS)}")
    cfg = RunConfig()
    if cp.has_section("run"):
        run = dict(cp["run"])
        for key, val in run.items():
            if key == "seed":
                cfg.seed = _seed(val)
            elif key == "out":
                cfg.out = val.strip()
            else:
                raise ConfigError(f"[run] unknown key {key!r}; allowed: ['out', 'seed']")
    for sec, registry in (("metric", geometry.METRICS), ("weight", weight.WEIGHTS)):
        if not cp.has_section(sec):
            continue
        items = dict(cp[sec])
        name = items.pop("name", getattr(cfg, sec)).strip()
        if name not in registry:
            raise ConfigError(f"[{sec}] unknown name {name!r}; choose from {sorted(registry)}")
        setattr(cfg, sec, name)
        setattr(cfg, f"{sec}_params", _factory_params(registry[name], sec, name, items))
    for sec in ("mesh", "time", "carleman", "family", "inverse"):
        if not cp.has_section(sec):
            continue
        obj = getattr(cfg, sec)
        types = {f.name: f.type for f in dataclasses.fields(obj)}
        for key, val in cp[sec].items():
            if key not in types:
                raise ConfigError(f"[{sec}] unknown key {key!r}; allowed: {sorted(types)}")
            setattr(obj, key, _coerce(val, types[key], f"[{sec}] {key}"))
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))


def _seed(value) -> int:
    try:
        s = int(str(value).strip())
    except ValueError:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {value!r}") from None
    if not 0 <= s < 2 ** 64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {value!r}")
    return s


def stream(seed: int, name: str) -> np.random.Generator:
    """Named random stream: the seed and crc32(name) feed one SeedSequence."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]))
