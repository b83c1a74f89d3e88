"""Experiment configuration: one JSON document per experiment.

Top-level sections (all optional except where a subcommand needs them)::

    problem     {"name": "quadratic" | "linear" | "small_divisor", ...instance options}
    lattice     {"d": 1, "nmax": 64}
    params      IterationParams fields
    tame        TameConstants fields
    smoothing   {"shape": "sharp", "velocity": "dyadic", ...velocity parameters}
    data        right-hand side g, see :func:`build_data`
    run         {"max_steps", "residual_tol", "seed", "delta", "strict_ball"}
    output      {"directory": "...", "formats": ["csv", "json"]}
    verify      smoothing measurements and assertions (verify-smoothing)
    velocity    velocity fit window and assertions (velocity-bench)
    counterexample  family, exponents and assertions (counterexample)
"""

from __future__ import annotations

import json
import math
import operator
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .hypotheses import IterationParams, TameConstants
from .problems.instances import (
    GOLDEN_MEAN,
    TameProblem,
    linear_multiplier_problem,
    quadratic_problem,
    small_divisor_problem,
    smooth_random,
)
from .scale import SpectralFunction, sobolev_norm
from .smoothing import DoublyExponential, Dyadic, Geometric, Polynomial, SmoothingFamily

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "resolve_config_path",
    "family_from_dict",
    "build_problem",
    "build_data",
    "check_assertions",
    "flatten",
]


class ConfigError(ValueError):
    """Malformed or inconsistent configuration (exit code 2)."""


SECTIONS = {
    "problem", "lattice", "params", "tame", "smoothing", "data", "run", "output",
    "verify", "velocity", "counterexample", "description",
}
RUN_DEFAULTS = {"max_steps": 40, "residual_tol": 1e-10, "seed": 0, "delta": None, "strict_ball": False}


@dataclass
class ExperimentConfig:
    raw: dict
    source: str = "<dict>"
    run: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict, source: str = "<dict>") -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError(f"{source}: top level must be a JSON object")
        unknown = set(raw) - SECTIONS
        if unknown:
            raise ConfigError(f"{source}: unknown section(s) {sorted(unknown)}")
        run = {**RUN_DEFAULTS, **raw.get("run", {})}
        out = {"directory": ".", "formats": ["csv", "json"], **raw.get("output", {})}
        bad = set(out["formats"]) - {"csv", "json"}
        if bad:
            raise ConfigError(f"{source}: unsupported output format(s) {sorted(bad)}")
        return cls(raw, source, run, out)

    def section(self, name: str, required: bool = True) -> dict:
        if name not in self.raw:
            if required:
                raise ConfigError(f"{self.source}: missing section '{name}'")
            return {}
        return self.raw[name]

    @property
    def lattice(self) -> tuple[int, int]:
        lat = self.section("lattice", required=False)
        return int(lat.get("d", 1)), int(lat.get("nmax", 64))

    def params(self, fallback: IterationParams | None = None) -> IterationParams:
        if "params" not in self.raw:
            if fallback is None:
                raise ConfigError(f"{self.source}: missing section 'params'")
            return fallback
        try:
            return IterationParams.from_dict(self.raw["params"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{self.source}: params: {exc}") from exc

    def tame(self, fallback: TameConstants | None = None) -> TameConstants:
        if "tame" not in self.raw:
            return fallback or TameConstants()
        try:
            return TameConstants.from_dict(self.raw["tame"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{self.source}: tame: {exc}") from exc

    def family(self) -> SmoothingFamily:
        return family_from_dict(self.section("smoothing", required=False))


def resolve_config_path(name: str) -> Path:
    """A filesystem path, or the stem of a configuration shipped with the package."""
    p = Path(name)
    if p.exists():
        return p
    shipped = resources.files("nashmoser") / "configs" / f"{Path(name).stem}.json"
    if shipped.is_file():
        return Path(str(shipped))
    raise ConfigError(f"config file not found: {name}")


def load_config(name: str) -> ExperimentConfig:
    path = resolve_config_path(name)
    text = path.read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return ExperimentConfig.from_dict(raw, str(path))


_VELOCITIES = {
    "dyadic": (Dyadic, ()),
    "geometric": (Geometric, ("c",)),
    "polynomial": (Polynomial, ("a", "eps")),
    "doubly_exponential": (DoublyExponential, ("theta0", "chi")),
}


def family_from_dict(d: dict) -> SmoothingFamily:
    d = dict(d)
    shape = d.pop("shape", "sharp")
    vname = d.pop("velocity", "dyadic")
    if vname not in _VELOCITIES:
        raise ConfigError(f"unknown velocity {vname!r}; choose from {sorted(_VELOCITIES)}")
    cls, keys = _VELOCITIES[vname]
    extra = set(d) - set(keys)
    if extra:
        raise ConfigError(f"velocity {vname!r} does not take {sorted(extra)}")
    try:
        return SmoothingFamily(shape=shape, velocity=cls(**{k: float(d[k]) for k in keys}))
    except KeyError as exc:
        raise ConfigError(f"velocity {vname!r} needs parameter {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_problem(cfg: ExperimentConfig) -> TameProblem:
    opts = dict(cfg.section("problem"))
    name = opts.pop("name", None)
    dim, nmax = cfg.lattice
    try:
        if name == "quadratic":
            prob = quadratic_problem(dim, nmax)
        elif name == "linear":
            order = float(opts.pop("order", 3.0))
            prob = linear_multiplier_problem(dim, nmax, lambda br: br**order)
        elif name == "small_divisor":
            if dim != 2:
                raise ConfigError("small_divisor lives on T^2; set lattice.d = 2")
            omega = opts.pop("omega", [1.0, GOLDEN_MEAN])
            prob = small_divisor_problem(
                nmax,
                omega=tuple(float(w) for w in omega),
                tau=float(opts.pop("tau", 1.0)),
                gamma0=opts.pop("gamma0", None),
                d0=float(opts.pop("d0", 1.0)),
                delta1=float(opts.pop("delta1", 0.05)),
            )
        elif name is None:
            raise ConfigError(f"{cfg.source}: problem.name is missing")
        else:
            raise ConfigError(f"{cfg.source}: unknown problem {name!r}")
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{cfg.source}: problem: {exc}") from exc
    if opts:
        raise ConfigError(f"{cfg.source}: problem {name!r} does not take {sorted(opts)}")
    return prob


def build_data(cfg: ExperimentConfig, problem: TameProblem, params: IterationParams, seed: int) -> SpectralFunction:
    """Right-hand side ``g`` from the ``data`` section.

    ``kind`` is ``constant`` (``value``), ``modes`` (list of ``[k, re, im]``)
    or ``random`` (``decay``, ``kmax``).  An optional ``norm`` rescales ``g``
    so that ``||g||_{norm_exponent}`` (default ``beta``) equals it.
    """
    opts = cfg.section("data")
    dim, nmax = problem.dim, problem.nmax
    kind = opts.get("kind")
    if kind == "constant":
        g = SpectralFunction.constant(dim, nmax, float(opts.get("value", 0.0)))
    elif kind == "modes":
        modes = []
        for entry in opts.get("modes", []):
            k, re, im = entry
            modes.append((k, complex(re, im)))
        try:
            g = SpectralFunction.from_modes(dim, nmax, modes, real_valued=bool(opts.get("real", True)))
        except ValueError as exc:
            raise ConfigError(f"{cfg.source}: data.modes: {exc}") from exc
    elif kind == "random":
        rng = np.random.default_rng(seed)
        g = smooth_random(dim, nmax, rng, decay=float(opts.get("decay", 2.0)), kmax=opts.get("kmax"))
    else:
        raise ConfigError(f"{cfg.source}: data.kind must be constant, modes or random (got {kind!r})")
    if "norm" in opts:
        expo = opts.get("norm_exponent", "beta")
        a = params.beta if expo == "beta" else float(expo)
        current = sobolev_norm(g, a)
        if current == 0:
            raise ConfigError(f"{cfg.source}: cannot rescale zero data")
        g = g * (float(opts["norm"]) / current)
    return g


# -- assertions ----------------------------------------------------------------

_OPS = {"<=": operator.le, "<": operator.lt, ">=": operator.ge, ">": operator.gt}


def flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


def check_assertions(assertions: list[dict], measured: dict) -> list[dict]:
    """Evaluate ``{"quantity", "op", "value" | "target" + "rel_tol"/"abs_tol"}`` entries.

    Returns one record per assertion with the measured value and a ``passed`` flag.
    """
    flat = flatten(measured)
    results = []
    for opts in assertions:
        q = opts.get("quantity")
        if q not in flat:
            raise ConfigError(f"assertion refers to unknown quantity {q!r}; known: {sorted(flat)}")
        x = float(flat[q])
        op = opts.get("op", "within")
        if op == "within":
            target = float(opts["target"])
            tol = float(opts.get("abs_tol", 0.0)) + float(opts.get("rel_tol", 0.0)) * abs(target)
            ok = math.isfinite(x) and abs(x - target) <= tol
            bound = target
        elif op in _OPS:
            bound = float(opts["value"])
            ok = math.isfinite(x) and _OPS[op](x, bound)
        else:
            raise ConfigError(f"unknown assertion operator {op!r}")
        results.append({"quantity": q, "op": op, "bound": bound, "measured": x, "passed": bool(ok)})
    return results
