"""Shared helpers: run a shipped configuration through the library API."""

from dataclasses import dataclass

from nashmoser.config import build_data, build_problem, load_config
from nashmoser.iterator import run


@dataclass
class ShippedRun:
    problem: object
    params: object
    fam: object
    g: object
    u: object
    report: object
    state: object


def run_shipped(name, nmax=None, **run_overrides):
    cfg = load_config(name)
    if nmax is not None:
        cfg.raw["lattice"]["nmax"] = nmax
    problem = build_problem(cfg)
    params = cfg.params(problem.params)
    fam = cfg.family()
    g = build_data(cfg, problem, params, int(cfg.run["seed"]))
    opts = dict(max_steps=int(cfg.run["max_steps"]), residual_tol=float(cfg.run["residual_tol"]), delta=cfg.run["delta"])
    opts.update(run_overrides)
    u, report, state = run(problem, g, params, fam, return_state=True, **opts)
    return ShippedRun(problem, params, fam, g, u, report, state)
