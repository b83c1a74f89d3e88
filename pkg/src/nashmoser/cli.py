"""Command-line experiment runner.

Exit codes: 0 success, 1 assertion or convergence failure, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from .config import (
    ConfigError,
    ExperimentConfig,
    build_data,
    build_problem,
    check_assertions,
    load_config,
)
from .hypotheses import NoAdmissibleGamma, derive_constants, validate
from .iterator import ConvergenceError, SmallnessWarning, run
from .problems.counterexamples import a11_counterexample, weak_space_example
from .problems.instances import smooth_random
from .smoothing import (
    ModeSet,
    measure_axiom_constants,
    measure_orthogonality,
    rows_to_csv,
    velocity_loss_exponent,
)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _dump(obj) -> str:
    from .iterator import _jsonable

    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


class _Output:
    def __init__(self, cfg: ExperimentConfig, args):
        self.dir = Path(args.out or cfg.output["directory"])
        self.formats = [args.format] if args.format else list(cfg.output["formats"])

    def write(self, stem: str, csv_text: str | None = None, summary: dict | None = None) -> None:
        try:
            self.dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"output directory {self.dir} is not writable: {exc}") from exc
        if csv_text is not None and "csv" in self.formats:
            (self.dir / f"{stem}.csv").write_text(csv_text)
        if summary is not None and "json" in self.formats:
            (self.dir / f"{stem}.json").write_text(_dump(summary))


def _report_assertions(results: list[dict]) -> bool:
    for r in results:
        flag = "ok  " if r["passed"] else "FAIL"
        print(f"  [{flag}] {r['quantity']} {r['op']} {r['bound']:g}: measured {r['measured']:.6g}")
    return all(r["passed"] for r in results)


# -- subcommands ---------------------------------------------------------------


def cmd_params_check(cfg: ExperimentConfig, args) -> int:
    p = cfg.params()
    bad = validate(p)
    if bad:
        print("parameter set violates:")
        for v in bad:
            print(f"  {v}")
        return EXIT_FAIL
    t = cfg.tame()
    try:
        dc = derive_constants(p, t, float(cfg.section("run", required=False).get("Cprime", 1.0)))
    except NoAdmissibleGamma as exc:
        print(f"no admissible gamma: {exc}")
        return EXIT_FAIL
    print("all exponent inequalities hold")
    print(f"gamma = {dc.gamma:g}")
    for key, val in dc.to_dict().items():
        if val is not None and key != "gamma":
            print(f"  {key:12s} {val:.6g}")
    if args.out:
        _Output(cfg, args).write("params_check", summary={"params": p.to_dict(), "constants": dc.to_dict()})
    return EXIT_OK


def _testset(opts: dict, seed: int):
    kind = opts.get("kind", "modes")
    dim, nmax = int(opts.get("d", 1)), int(opts.get("nmax", 256))
    if kind == "modes":
        return ModeSet(dim, nmax, float(opts.get("kmin", 0.0)))
    if kind == "random":
        rng = np.random.default_rng(seed)
        count = int(opts.get("count", 100))
        return [smooth_random(dim, nmax, rng, decay=float(opts.get("decay", 1.0))) for _ in range(count)]
    raise ConfigError(f"testset kind must be modes or random, got {kind!r}")


def cmd_verify_smoothing(cfg: ExperimentConfig, args) -> int:
    fam = cfg.family()
    opts = cfg.section("verify")
    seed = args.seed if args.seed is not None else int(cfg.run["seed"])
    testset = _testset(opts.get("testset", {}), seed)
    measured: dict = {"family": fam.describe(), "seed": seed}
    rows: list[tuple] = []
    try:
        if "a" in opts and "b" in opts:
            ax = measure_axiom_constants(fam, testset, float(opts["a"]), float(opts["b"]), opts.get("jmax"))
            measured.update(ax.as_dict())
            rows += ax.rows
        if "orthogonality_a" in opts:
            otest = _testset(opts["orthogonality_testset"], seed) if "orthogonality_testset" in opts else testset
            measured["orthogonality"] = measure_orthogonality(fam, otest, float(opts["orthogonality_a"]))
            rows.append(("orthogonality", opts["orthogonality_a"], opts["orthogonality_a"], -1, measured["orthogonality"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if "velocity" in opts:
        measured["velocity"] = _velocity(fam, opts["velocity"], rows)
    results = check_assertions(opts.get("assertions", []), measured)
    measured["assertions"] = results
    for key in ("C_S1", "C_S2", "C_S3", "C_S4", "orthogonality"):
        if key in measured:
            print(f"{key:14s} {measured[key]:.12g}")
    ok = _report_assertions(results)
    _Output(cfg, args).write("smoothing", rows_to_csv(fam, rows), measured)
    return EXIT_OK if ok else EXIT_FAIL


def _velocity(fam, opts: dict, rows: list) -> dict:
    a, b = float(opts.get("a", 0.0)), float(opts.get("b", 3.0))
    try:
        fit = velocity_loss_exponent(fam, a, b, opts["js"], opts.get("nmax"))
    except KeyError as exc:
        raise ConfigError("velocity section needs 'js'") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rows += fit.rows(fam, a, b)
    return {"sigma": fit.sigma, "slope": fit.slope, "expected_slope": fit.expected_slope}


def cmd_velocity_bench(cfg: ExperimentConfig, args) -> int:
    fam = cfg.family()
    opts = cfg.section("velocity")
    rows: list[tuple] = []
    measured = {"family": fam.describe(), "velocity": _velocity(fam, opts, rows)}
    v = measured["velocity"]
    print(f"sigma = {v['sigma']:.6g} (slope {v['slope']:.6g}, expected {v['expected_slope']:g})")
    results = check_assertions(opts.get("assertions", []), measured)
    measured["assertions"] = results
    ok = _report_assertions(results)
    _Output(cfg, args).write("velocity", rows_to_csv(fam, rows), measured)
    return EXIT_OK if ok else EXIT_FAIL


def _echo_warnings(caught) -> None:
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)


def cmd_run(cfg: ExperimentConfig, args) -> int:
    problem = build_problem(cfg)
    params = cfg.params(problem.params)
    fam = cfg.family()
    seed = args.seed if args.seed is not None else int(cfg.run["seed"])
    g = build_data(cfg, problem, params, seed)
    out = _Output(cfg, args)
    r = cfg.run
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", SmallnessWarning)
            u, report = run(
                problem, g, params, fam,
                max_steps=int(r["max_steps"]),
                residual_tol=float(r["residual_tol"]),
                delta=r["delta"],
                strict_ball=bool(r["strict_ball"]),
            )
        _echo_warnings(caught)
    except ConvergenceError as exc:
        _echo_warnings(caught)
        rep = exc.report
        if rep is not None:
            rep.summary["seed"] = seed
            rep.summary["error"] = str(exc)
            out.write("run", rep.to_csv(), rep.summary)
        print(f"iteration failed ({type(exc).__name__}): {exc}")
        return EXIT_FAIL
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    report.summary["seed"] = seed
    out.write("run", report.to_csv(), report.summary)
    s = report.summary
    print(f"converged = {s['converged']} after {s['steps']} steps, residual {s['final_residual']:.3e}")
    for key in ("K1_hat", "K2_hat", "K3_hat", "K4_hat"):
        if key in s:
            print(f"  {key} = {s[key]:.6g}")
    return EXIT_OK if s["converged"] else EXIT_FAIL


def cmd_counterexample(cfg: ExperimentConfig, args) -> int:
    opts = dict(cfg.section("counterexample"))
    family = opts.pop("family", None)
    assertions = opts.pop("assertions", [])
    builders = {"a11": a11_counterexample, "weak_space": weak_space_example}
    if family not in builders:
        raise ConfigError(f"counterexample.family must be one of {sorted(builders)}")
    for key in ("N_range", "theta_range", "j_range"):
        if key in opts:
            opts[key] = tuple(opts[key])
    try:
        cf = builders[family](**opts)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"counterexample: {exc}") from exc
    summary = cf.summary()
    for name, fit in cf.fits.items():
        print(f"{name:20s} fitted {fit['fitted']:.6g}  predicted {fit['predicted']:.6g}")
    results = check_assertions(assertions, {"fits": cf.fits})
    summary["assertions"] = results
    ok = _report_assertions(results)
    _Output(cfg, args).write("counterexample", cf.to_csv(), summary)
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {
    "params-check": cmd_params_check,
    "verify-smoothing": cmd_verify_smoothing,
    "run": cmd_run,
    "counterexample": cmd_counterexample,
    "velocity-bench": cmd_velocity_bench,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nashmoser", description="Nash-Moser iteration experiments on spectral lattices.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON config path or name of a shipped config")
        sp.add_argument("--out", help="output directory (overrides output.directory)")
        sp.add_argument("--seed", type=int, help="random seed (overrides run.seed)")
        sp.add_argument("--format", choices=("csv", "json"), help="write only this report format")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
