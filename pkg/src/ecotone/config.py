"""INI run configuration with a closed schema.

Every section and key is declared below with its type and admissible range;
anything else is rejected with the offending ``section.key`` in the message.
Lists are comma separated.  Initial fields use a tiny token language::

    zero | constant C | random A | tanh CENTER WIDTH AMPLITUDE [OFFSET]
    | cosine K AMPLITUDE [OFFSET] | equilibrated        (w only)
"""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError

COMMANDS = (
    "simulate", "equilibrium", "partition-eq", "near-homog-eq", "stabilize",
    "lipschitz-contrast", "perturb-lab", "forest", "convergence",
)


def _num(lo=-math.inf, hi=math.inf, strict_lo=False, integer=False):
    def parse(key, raw):
        try:
            x = int(raw) if integer else float(raw)
        except ValueError:
            raise ConfigError(f"{key}: expected {'an integer' if integer else 'a number'}, got {raw!r}")
        if not math.isfinite(x):
            raise ConfigError(f"{key}: must be finite")
        if x < lo or (strict_lo and x <= lo) or x > hi:
            bound = f"> {lo}" if strict_lo else f">= {lo}"
            raise ConfigError(f"{key}: {x} out of range ({bound}, <= {hi})")
        return x
    return parse


def _list(item, min_len=1):
    def parse(key, raw):
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        if len(parts) < min_len:
            raise ConfigError(f"{key}: expected at least {min_len} comma-separated values")
        return [item(key, p) for p in parts]
    return parse


def _text(choices=None):
    def parse(key, raw):
        raw = raw.strip()
        if choices is not None and raw not in choices:
            raise ConfigError(f"{key}: {raw!r} is not one of {', '.join(choices)}")
        return raw
    return parse


def _bool(key, raw):
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {raw!r}")


def _field(key, raw):
    tokens = raw.split()
    if not tokens:
        raise ConfigError(f"{key}: empty field specification")
    kind, args = tokens[0], tokens[1:]
    arity = {"zero": (0, 0), "constant": (1, 1), "random": (1, 1), "tanh": (3, 4),
             "cosine": (2, 3), "equilibrated": (0, 0)}
    if kind not in arity:
        raise ConfigError(f"{key}: unknown field kind {kind!r}")
    lo, hi = arity[kind]
    if not lo <= len(args) <= hi:
        raise ConfigError(f"{key}: {kind} takes {lo}..{hi} numbers")
    try:
        nums = [float(a) for a in args]
    except ValueError:
        raise ConfigError(f"{key}: non-numeric argument in {raw!r}")
    if kind == "tanh" and not nums[1] > 0:
        raise ConfigError(f"{key}: tanh width must be positive")
    if kind == "equilibrated" and not key.endswith(".w"):
        raise ConfigError(f"{key}: 'equilibrated' is only valid for w")
    return (kind, nums)


def _box(key, raw):
    """``lo:hi`` per axis, axes separated by ``x``: ``0:0.5`` or ``0:0.5 x 0:1``."""
    axes = []
    for part in raw.split("x"):
        try:
            lo, hi = (float(s) for s in part.split(":"))
        except ValueError:
            raise ConfigError(f"{key}: malformed box {raw!r}")
        if not hi >= lo:
            raise ConfigError(f"{key}: empty box {raw!r}")
        axes.append((lo, hi))
    return axes


def _partition(key, raw):
    """``VALUE @ BOX; VALUE @ BOX; ...`` assigning root values to boxes."""
    parts = []
    for chunk in raw.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "@" not in chunk:
            raise ConfigError(f"{key}: expected 'value @ box' in {chunk!r}")
        val, box = chunk.split("@", 1)
        parts.append((_num()(key, val.strip()), _box(key, box.strip())))
    if not parts:
        raise ConfigError(f"{key}: empty partition")
    return parts


def _path(key, raw):
    return raw.strip()


POS = _num(0.0, strict_lo=True)
NONNEG = _num(0.0)
ANY = _num()

SCHEMA = {
    "run": {"command": _text(COMMANDS), "seed": _num(0, 2**64 - 1, integer=True),
            "output": _path},
    "model": {
        "nonlinearity": _text(("monotone_cubic", "bistable_cubic", "polynomial")),
        "f_coeffs": _list(ANY), "phi_coeffs": _list(ANY),
        "beta0": POS, "K": NONNEG, "gamma0": POS, "delta": POS, "C": NONNEG,
        "alpha": NONNEG, "dim": _num(1, 2, integer=True),
        "extent": _list(POS), "nodes": _list(_num(3, integer=True)),
    },
    "initial": {"v": _field, "vt": _field, "w": _field},
    "stepper": {"dt": POS, "T": POS, "stride": _num(1, integer=True),
                "tol": _num(0.0, 1e-6, strict_lo=True), "snapshots": _bool},
    "experiment": {
        "h_list": _list(POS), "probes": _list(_num(0, integer=True)), "horizons": _list(POS),
        "alpha_max": POS, "delta0": POS, "partition": _partition, "partition_file": _path,
        "label_T": POS, "label_dt": POS, "root_range": _list(ANY, 2), "guess": ANY,
        "vbar": ANY, "vtilde": ANY, "omega2": _box, "tolerance": POS,
        "lipschitz": _list(POS, 2), "offset": ANY, "amplitude": POS, "h_smooth": POS,
    },
    "perturb": {
        "problem": _text(("double_well", "oscillator")), "eps": NONNEG, "omega": POS,
        "u0": _list(ANY), "dt": POS, "horizons": _list(POS, 3), "eps0": POS, "C2_max": POS,
        "delta": POS, "slack": NONNEG,
    },
    "forest": {
        "alpha": POS, "beta": POS, "delta": POS, "d": POS, "f": POS, "h": POS,
        "gamma": _list(ANY), "u0": _field, "v0": _field, "w0": _field,
        "dt": POS, "T": POS, "every": _num(1, integer=True), "imex": _bool,
    },
    "convergence": {
        "space_nodes": _list(_num(3, integer=True)), "dts": _list(POS), "T": POS,
        "cfl": POS, "fine_nodes": _num(3, integer=True), "alpha": NONNEG,
    },
}


@dataclass
class RunConfig:
    values: dict  # section -> key -> parsed value
    path: Path | None
    digest: str

    def get(self, section: str, key: str, default=None):
        return self.values.get(section, {}).get(key, default)

    def require(self, section: str, key: str):
        if key not in self.values.get(section, {}):
            raise ConfigError(f"missing required key {section}.{key}")
        return self.values[section][key]

    @property
    def command(self):
        return self.get("run", "command")


def parse_config(text: str, path: Path | None = None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config is not parseable: {exc}")
    values = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        values[section] = {}
        for key, raw in cp.items(section):
            name = f"{section}.{key}"
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {name}")
            values[section][key] = SCHEMA[section][key](name, raw)
    base = path.parent if path is not None else Path(".")
    pf = values.get("experiment", {}).get("partition_file")
    if pf is not None:
        full = (base / pf) if not Path(pf).is_absolute() else Path(pf)
        if not full.is_file():
            raise ConfigError(f"experiment.partition_file: {full} does not exist")
        values["experiment"]["partition_file"] = str(full)
    model = values.get("model", {})
    if model.get("nonlinearity") == "polynomial":
        for k in ("f_coeffs", "beta0", "K", "gamma0", "delta", "C"):
            if k not in model:
                raise ConfigError(f"missing required key model.{k} for a polynomial nonlinearity")
    return RunConfig(values, path, hashlib.sha256(text.encode()).hexdigest())


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    return parse_config(text, path)


# ---------------------------------------------------------------- builders

def build_field(spec, grid, rng, name="field"):
    kind, a = spec
    x = grid.coords[:, 0]
    L = grid.extents[0]
    if kind == "zero":
        return np.zeros(grid.node_count)
    if kind == "constant":
        return np.full(grid.node_count, a[0])
    if kind == "random":
        return rng.uniform(-a[0], a[0], grid.node_count)
    if kind == "tanh":
        off = a[3] if len(a) > 3 else 0.0
        return off + a[2] * np.tanh((x - a[0]) / a[1])
    if kind == "cosine":
        off = a[2] if len(a) > 2 else 0.0
        return off + a[1] * np.cos(a[0] * np.pi * x / L)
    raise ConfigError(f"{name}: field kind {kind!r} needs context")
