"""Flat ``key = value`` experiment configuration with typed, validated keys."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__


class ConfigError(ValueError):
    """Unknown key, unparsable value, or a value outside its valid range."""


def _bool(s: str) -> bool:
    t = s.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _angle(s: str) -> float:
    """Float, or a multiple/fraction of ``pi`` such as ``pi/4`` or ``0.3*pi``."""
    t = s.strip().replace(" ", "")
    if "pi" not in t:
        return float(t)
    num, _, den = t.partition("/")
    num = num.replace("*pi", "").replace("pi*", "").replace("pi", "")
    val = (float(num) if num not in ("", "+", "-") else float(num + "1")) * math.pi
    return val / float(den) if den else val


def _floats(s: str) -> tuple:
    return tuple(_angle(x) for x in s.split(",") if x.strip())


def _ints(s: str) -> tuple:
    return tuple(int(x) for x in s.split(",") if x.strip())


# key: (parser, default, help)
SCHEMA = {
    "model": (str, "ac", "reaction: ac (Allen-Cahn) or fhn (FitzHugh-Nagumo)"),
    "a": (float, 0.9, "conductivity anisotropy a"),
    "b": (float, 0.0, "conductivity anisotropy b"),
    "theta": (_angle, math.pi / 4, "propagation direction (radians, 'pi/4' accepted)"),
    "alpha": (float, 0.4, "cubic threshold"),
    "epsilon": (float, 1e-3, "FHN recovery rate"),
    "gamma": (float, 3.0, "FHN recovery coupling"),
    "d": (float, 20.0, "strip width"),
    "n_eta": (int, 16, "eta samples (even)"),
    "n_xi": (int, 399, "interior xi nodes"),
    "kmap": (float, 10.0, "tan-map scale K"),
    "dt": (float, 0.05, "time step"),
    "t_end": (float, 20.0, "final time"),
    "probe_every": (int, 10, "steps between probes"),
    "snapshot_times": (_floats, (), "comma-separated snapshot times"),
    "perturb": (float, 1e-3, "mode-wise noise amplitude on the initial front"),
    "displace": (float, 0.0, "eta-dependent xi-shift of an initial pulse"),
    "init": (str, "planar", "strip initial datum: planar or pulse"),
    "prominence": (float, 0.5, "peak prominence for level-set peak counts"),
    "seed": (int, 0, "RNG seed"),
    "resolution": (int, 2 ** 14, "Frank-plot samples"),
    "tol": (float, 1e-8, "fixed-point tolerance"),
    "max_iters": (int, 5000, "fixed-point sweep budget"),
    "anderson": (int, 5, "Anderson mixing depth for the fixed-point solver (0: off)"),
    "front_seed": (str, "zigzag", "front-shape seed: planar or zigzag"),
    "l_max": (float, 0.05, "largest transverse wavenumber of an eigen branch"),
    "dl": (float, 0.0025, "wavenumber step of an eigen branch"),
    "fit_min": (float, 0.01, "small-l fit window start"),
    "fit_max": (float, 0.05, "small-l fit window end"),
    "l_values": (_floats, (), "transverse wavenumbers to report"),
    "d1": (float, 400.0, "torus period in x"),
    "d2": (float, 400.0, "torus period in y"),
    "n1": (int, 512, "torus samples in x"),
    "n2": (int, 512, "torus samples in y"),
    "radius": (float, 100.0, "initial disc radius on the torus"),
    "levels": (_ints, (99, 199, 399, 799), "n_xi levels of a convergence study"),
    "alphas": (_floats, (0.3, 0.4), "threshold values of a sweep"),
    "thetas": (_floats, (), "angles of a sweep"),
    "a_values": (_floats, (), "anisotropy values of a sweep"),
    "d_values": (_floats, (), "strip widths of a sweep"),
    "hysteresis_a": (_floats, (0.6, 0.9), "anisotropies whose zigzag existence boundary is traced"),
    "seeds": (_ints, (0, 1, 2), "RNG seeds of a statistics run"),
    "input": (str, "", "input file (measure)"),
    "out": (str, "out", "output directory"),
}


@dataclass
class ExperimentConfig:
    """Validated parameter set; ``source`` keeps the raw ``key = value`` lines for the echo."""

    values: dict
    source: list = field(default_factory=list)
    recipe: str = ""

    def __getattr__(self, key):
        try:
            return self.__dict__["values"][key]
        except KeyError:
            raise AttributeError(key) from None

    def replace(self, **kw) -> "ExperimentConfig":
        vals = dict(self.values)
        vals.update(kw)
        cfg = ExperimentConfig(vals, list(self.source) + [f"{k} = {v}" for k, v in kw.items()], self.recipe)
        validate(cfg)
        return cfg

    def echo(self) -> str:
        lines = [f"# bidomain {__version__}"]
        if self.recipe:
            lines.append(f"# recipe {self.recipe}")
        lines += ["# as given"] + [f"#   {s}" for s in self.source]
        lines += [f"{k} = {_fmt(self.values[k])}" for k in SCHEMA]
        return "\n".join(lines) + "\n"

    @property
    def outdir(self) -> Path:
        return Path(self.values["out"])


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_lines(lines) -> list:
    """``(key, raw_value)`` pairs from ``key = value`` text; ``#`` starts a comment."""
    pairs = []
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value, got {line!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        pairs.append((k, v))
    return pairs


def build_config(pairs, defaults: dict | None = None, recipe: str = "") -> ExperimentConfig:
    """Parse and validate ``(key, raw)`` pairs; later pairs win."""
    vals = {k: spec[1] for k, spec in SCHEMA.items()}
    vals.update(defaults or {})
    source = []
    for k, raw in pairs:
        if k not in SCHEMA:
            raise ConfigError(f"unknown key {k!r}")
        try:
            vals[k] = SCHEMA[k][0](raw)
        except ValueError as exc:
            raise ConfigError(f"{k}: {exc}") from None
        source.append(f"{k} = {raw}")
    cfg = ExperimentConfig(vals, source, recipe)
    validate(cfg)
    return cfg


def load(path=None, overrides=(), defaults: dict | None = None, recipe: str = "") -> ExperimentConfig:
    """File keys first, then ``overrides`` (``key=value`` strings)."""
    pairs = []
    if path:
        pairs += parse_lines(Path(path).read_text(encoding="utf-8").splitlines())
    pairs += parse_lines(overrides)
    return build_config(pairs, defaults, recipe)


def validate(cfg: ExperimentConfig) -> None:
    v = cfg.values

    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    need(v["model"] in ("ac", "fhn"), "model must be 'ac' or 'fhn'")
    need(abs(v["a"] + v["b"]) < 1 and abs(v["a"] - v["b"]) < 1, "need |a+b| < 1 and |a-b| < 1")
    need(0 < v["alpha"] < 0.5, "alpha must lie in (0, 1/2)")
    need(v["epsilon"] > 0 and v["gamma"] > 0, "epsilon and gamma must be positive")
    need(v["d"] > 0 and v["kmap"] > 0, "d and kmap must be positive")
    need(v["n_eta"] >= 2 and v["n_eta"] % 2 == 0, "n_eta must be even and at least 2")
    need(v["n_xi"] >= 3, "n_xi must be at least 3")
    need(v["dt"] > 0 and v["t_end"] >= 0, "dt must be positive and t_end non-negative")
    need(v["probe_every"] >= 1, "probe_every must be at least 1")
    need(v["init"] in ("planar", "pulse"), "init must be 'planar' or 'pulse'")
    need(v["front_seed"] in ("planar", "zigzag"), "front_seed must be 'planar' or 'zigzag'")
    need(v["perturb"] >= 0 and v["displace"] >= 0, "perturb and displace must be non-negative")
    need(v["prominence"] > 0, "prominence must be positive")
    need(v["resolution"] >= 64, "resolution must be at least 64")
    need(v["tol"] > 0 and v["max_iters"] >= 1 and v["anderson"] >= 0, "bad fixed-point settings")
    need(0 < v["dl"] <= v["l_max"], "need 0 < dl <= l_max")
    need(0 <= v["fit_min"] < v["fit_max"], "need fit_min < fit_max")
    need(min(v["d1"], v["d2"]) > 0 and v["radius"] > 0, "torus sizes and radius must be positive")
    need(min(v["n1"], v["n2"]) >= 4 and v["n1"] % 2 == 0 and v["n2"] % 2 == 0,
         "n1, n2 must be even and at least 4")
    need(all(n >= 3 for n in v["levels"]), "convergence levels need n_xi >= 3")
    need(all(0 < x < 0.5 for x in v["alphas"]), "alphas must lie in (0, 1/2)")
    need(all(0 <= x < 1 for x in v["a_values"]), "a_values must lie in [0, 1)")
    need(all(x > 0 for x in v["d_values"]), "d_values must be positive")
    need(all(0 <= x < 1 for x in v["hysteresis_a"]), "hysteresis_a must lie in [0, 1)")


def worker_count() -> int:
    """Worker-pool size from ``BIDOMAIN_THREADS`` (default 1)."""
    raw = os.environ.get("BIDOMAIN_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"BIDOMAIN_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)
