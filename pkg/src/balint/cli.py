"""Command-line front end: solve | verify | simulate.

Configs are YAML documents validated strictly: an unrecognized key anywhere is
a hard error naming the key, so typos never silently fall back to defaults.
Command-line flags override file values. All randomness flows from the
config's master_seed (or its --seed override); nothing is wall-clock seeded.

Exit codes: 0 success; 1 usage or config error; 2 mathematical infeasibility
(divergent moment, missing MGF, no root); 3 verification gap too large.
"""

from __future__ import annotations

import argparse
import csv
import sys
from typing import NamedTuple, Optional, Sequence

import yaml

from .distributions import (
    Bernoulli,
    Categorical,
    Cauchy,
    CovariateSpec,
    Gamma,
    Normal,
    RngStream,
    UniformContinuous,
)
from .coding import coding_by_name
from .errors import ConfigError, Error
from .harness import GridConfig, run_grid, summarize, write_csv
from .intercept import (
    BernoulliOutcome,
    DEFAULT_TOL_EXACT,
    DEFAULT_TOL_MC,
    DgpSpec,
    Engine,
    ExactEnumeration,
    MonteCarlo,
    NormalOutcome,
    OutcomeFamily,
    SOLVER_NAMES,
    Term,
    clamp_by_name,
    expectation_of_mean,
    solve,
)
from .links import link_by_name

__all__ = [
    "load_config",
    "parse_grid_config",
    "parse_dgp_config",
    "grid_config_to_dict",
    "dgp_config_to_dict",
    "DgpDocument",
    "main",
    "entry",
]

VERIFY_GAP_EXIT = 3


# ---------------------------------------------------------------- validation

def _check_keys(mapping: dict, allowed: set[str], required: set[str], where: str) -> None:
    if not isinstance(mapping, dict):
        raise ConfigError(f"{where} must be a mapping")
    for key in mapping:
        if key not in allowed:
            raise ConfigError(f"unknown key '{key}' in {where}")
    for key in required:
        if key not in mapping:
            raise ConfigError(f"missing key '{key}' in {where}")


def _num(value, key: str, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"key '{key}' in {where} must be a number, got {value!r}")
    return float(value)


def _int(value, key: str, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"key '{key}' in {where} must be an integer, got {value!r}")
    return value


def _str(value, key: str, where: str) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"key '{key}' in {where} must be a string, got {value!r}")
    return value


def _num_list(value, key: str, where: str) -> list[float]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"key '{key}' in {where} must be a nonempty list of numbers")
    return [_num(v, key, where) for v in value]


def load_config(path: str) -> dict:
    try:
        with open(path) as f:
            doc = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path} must contain a mapping at the top level")
    return doc


# ------------------------------------------------------------- distributions

_DIST_PARAMS = {
    "bernoulli": {"p"},
    "uniform": {"a", "b"},
    "normal": {"mu", "sigma"},
    "gamma": {"shape", "rate"},
    "cauchy": {"location", "scale"},
    "categorical": {"probs", "coding"},
}


def _parse_dist(entry: dict, where: str, extra_keys: set[str]) -> CovariateSpec:
    if not isinstance(entry, dict):
        raise ConfigError(f"{where} must be a mapping")
    kind = _str(entry.get("dist"), "dist", where) if "dist" in entry else None
    if kind is None:
        raise ConfigError(f"missing key 'dist' in {where}")
    if kind not in _DIST_PARAMS:
        raise ConfigError(
            f"unknown distribution '{kind}' in {where} (expected one of {sorted(_DIST_PARAMS)})"
        )
    params = _DIST_PARAMS[kind]
    _check_keys(entry, {"dist"} | params | extra_keys, {"dist"} | (params - {"coding"}), where)
    if kind == "bernoulli":
        return Bernoulli(p=_num(entry["p"], "p", where))
    if kind == "uniform":
        return UniformContinuous(a=_num(entry["a"], "a", where), b=_num(entry["b"], "b", where))
    if kind == "normal":
        return Normal(mu=_num(entry["mu"], "mu", where), sigma=_num(entry["sigma"], "sigma", where))
    if kind == "gamma":
        return Gamma(shape=_num(entry["shape"], "shape", where), rate=_num(entry["rate"], "rate", where))
    if kind == "cauchy":
        return Cauchy(
            location=_num(entry["location"], "location", where),
            scale=_num(entry["scale"], "scale", where),
        )
    probs = tuple(_num_list(entry["probs"], "probs", where))
    coding = coding_by_name(_str(entry.get("coding", "reference_cell"), "coding", where))
    return Categorical(probs=probs, coding=coding)


def _dist_to_dict(spec: CovariateSpec) -> dict:
    if isinstance(spec, Bernoulli):
        return {"dist": "bernoulli", "p": spec.p}
    if isinstance(spec, UniformContinuous):
        return {"dist": "uniform", "a": spec.a, "b": spec.b}
    if isinstance(spec, Normal):
        return {"dist": "normal", "mu": spec.mu, "sigma": spec.sigma}
    if isinstance(spec, Gamma):
        return {"dist": "gamma", "shape": spec.shape, "rate": spec.rate}
    if isinstance(spec, Cauchy):
        return {"dist": "cauchy", "location": spec.location, "scale": spec.scale}
    return {"dist": "categorical", "probs": list(spec.probs), "coding": spec.coding.name}


def _parse_outcome(entry, where: str) -> OutcomeFamily:
    _check_keys(entry, {"family", "sd", "clamp"}, {"family"}, where)
    family = _str(entry["family"], "family", where)
    if family == "normal":
        _check_keys(entry, {"family", "sd"}, {"family", "sd"}, where)
        return NormalOutcome(sd=_num(entry["sd"], "sd", where))
    if family == "bernoulli":
        _check_keys(entry, {"family", "clamp"}, {"family"}, where)
        return BernoulliOutcome(
            clamp=clamp_by_name(_str(entry.get("clamp", "clamp_to_unit"), "clamp", where))
        )
    raise ConfigError(f"unknown outcome family '{family}' in {where} (expected normal or bernoulli)")


def _outcome_to_dict(outcome: OutcomeFamily) -> dict:
    if isinstance(outcome, NormalOutcome):
        return {"family": "normal", "sd": outcome.sd}
    return {"family": "bernoulli", "clamp": outcome.clamp.name}


def _parse_engine(doc: dict, where: str) -> Engine:
    name = _str(doc.get("engine", "exact"), "engine", where)
    if name == "exact":
        return ExactEnumeration()
    if name == "mc":
        return MonteCarlo(n_mc=_int(doc.get("n_mc", 100_000), "n_mc", where))
    raise ConfigError(f"key 'engine' in {where} must be 'exact' or 'mc', got '{name}'")


def _parse_solver(doc: dict, where: str) -> str:
    solver = _str(doc.get("solver"), "solver", where) if "solver" in doc else None
    if solver is None:
        raise ConfigError(f"missing key 'solver' in {where}")
    if solver not in SOLVER_NAMES:
        raise ConfigError(f"unknown solver '{solver}' in {where} (expected one of {SOLVER_NAMES})")
    return solver


def _parse_tol(doc: dict, where: str) -> Optional[float]:
    if "tol" not in doc:
        return None
    tol = _num(doc["tol"], "tol", where)
    if not tol > 0.0:
        raise ConfigError(f"key 'tol' in {where} must be positive, got {tol}")
    return tol


# -------------------------------------------------------------- grid configs

_GRID_KEYS = {
    "name",
    "link",
    "outcome",
    "exposure",
    "covariate_axis",
    "beta2_axis",
    "target_axis",
    "n",
    "replicates",
    "master_seed",
    "solver",
    "engine",
    "n_mc",
    "tol",
    "workers",
}

_GRID_REQUIRED = {
    "name",
    "link",
    "outcome",
    "exposure",
    "covariate_axis",
    "beta2_axis",
    "target_axis",
    "n",
    "replicates",
    "master_seed",
    "solver",
}


def parse_grid_config(doc: dict) -> GridConfig:
    where = "grid config"
    _check_keys(doc, _GRID_KEYS, _GRID_REQUIRED, where)
    exp = doc["exposure"]
    _check_keys(exp, {"name", "probs", "betas", "coding"}, {"name", "probs", "betas"}, "exposure")
    exposure_spec = Categorical(
        probs=tuple(_num_list(exp["probs"], "probs", "exposure")),
        coding=coding_by_name(_str(exp.get("coding", "reference_cell"), "coding", "exposure")),
    )
    exposure = Term(
        name=_str(exp["name"], "name", "exposure"),
        spec=exposure_spec,
        beta=tuple(_num_list(exp["betas"], "betas", "exposure")),
    )
    axis_doc = doc["covariate_axis"]
    if not isinstance(axis_doc, list) or not axis_doc:
        raise ConfigError("key 'covariate_axis' in grid config must be a nonempty list")
    z_axis = []
    for i, entry in enumerate(axis_doc):
        where_i = f"covariate_axis[{i}]"
        spec = _parse_dist(entry, where_i, extra_keys={"name"})
        z_axis.append((_str(entry.get("name", "z"), "name", where_i), spec))
    return GridConfig(
        name=_str(doc["name"], "name", where),
        link=link_by_name(_str(doc["link"], "link", where)),
        outcome=_parse_outcome(doc["outcome"], "outcome"),
        exposure=exposure,
        z_axis=tuple(z_axis),
        beta2_axis=tuple(_num_list(doc["beta2_axis"], "beta2_axis", where)),
        target_axis=tuple(_num_list(doc["target_axis"], "target_axis", where)),
        n=_int(doc["n"], "n", where),
        replicates=_int(doc["replicates"], "replicates", where),
        master_seed=_int(doc["master_seed"], "master_seed", where),
        solver=_parse_solver(doc, where),
        engine=_parse_engine(doc, where),
        tol=_parse_tol(doc, where),
        workers=_int(doc.get("workers", 1), "workers", where),
    )


def grid_config_to_dict(cfg: GridConfig) -> dict:
    doc = {
        "name": cfg.name,
        "link": cfg.link.name,
        "outcome": _outcome_to_dict(cfg.outcome),
        "exposure": {
            "name": cfg.exposure.name,
            "probs": list(cfg.exposure.spec.probs),
            "betas": list(cfg.exposure.beta),
            "coding": cfg.exposure.spec.coding.name,
        },
        "covariate_axis": [
            {"name": name, **_dist_to_dict(spec)} for name, spec in cfg.z_axis
        ],
        "beta2_axis": list(cfg.beta2_axis),
        "target_axis": list(cfg.target_axis),
        "n": cfg.n,
        "replicates": cfg.replicates,
        "master_seed": cfg.master_seed,
        "solver": cfg.solver,
        "engine": cfg.engine.name,
        "workers": cfg.workers,
    }
    if isinstance(cfg.engine, MonteCarlo):
        doc["n_mc"] = cfg.engine.n_mc
    if cfg.tol is not None:
        doc["tol"] = cfg.tol
    return doc


# --------------------------------------------------------- single-DGP configs

_DGP_KEYS = {
    "link",
    "target_mean",
    "outcome",
    "covariates",
    "solver",
    "engine",
    "n_mc",
    "tol",
    "master_seed",
}

_DGP_REQUIRED = {"link", "target_mean", "outcome", "covariates", "solver"}


class DgpDocument(NamedTuple):
    dgp: DgpSpec
    solver: str
    engine: Engine
    tol: Optional[float]
    master_seed: int


def parse_dgp_config(doc: dict) -> DgpDocument:
    where = "dgp config"
    _check_keys(doc, _DGP_KEYS, _DGP_REQUIRED, where)
    cov_doc = doc["covariates"]
    if not isinstance(cov_doc, list):
        raise ConfigError("key 'covariates' in dgp config must be a list")
    terms = []
    for i, entry in enumerate(cov_doc):
        where_i = f"covariates[{i}]"
        spec = _parse_dist(entry, where_i, extra_keys={"name", "beta", "betas"})
        name = _str(entry.get("name", f"x{i + 1}"), "name", where_i)
        if isinstance(spec, Categorical):
            if "betas" not in entry:
                raise ConfigError(f"missing key 'betas' in {where_i} (categorical coefficients)")
            if "beta" in entry:
                raise ConfigError(f"{where_i}: a categorical takes 'betas', not 'beta'")
            beta = tuple(_num_list(entry["betas"], "betas", where_i))
        else:
            if "beta" not in entry:
                raise ConfigError(f"missing key 'beta' in {where_i}")
            if "betas" in entry:
                raise ConfigError(f"{where_i}: a continuous covariate takes 'beta', not 'betas'")
            beta = _num(entry["beta"], "beta", where_i)
        terms.append(Term(name=name, spec=spec, beta=beta))
    dgp = DgpSpec(
        terms=tuple(terms),
        link=link_by_name(_str(doc["link"], "link", where)),
        outcome=_parse_outcome(doc["outcome"], "outcome"),
        target_mean=_num(doc["target_mean"], "target_mean", where),
    )
    return DgpDocument(
        dgp=dgp,
        solver=_parse_solver(doc, where),
        engine=_parse_engine(doc, where),
        tol=_parse_tol(doc, where),
        master_seed=_int(doc.get("master_seed", 0), "master_seed", where),
    )


def dgp_config_to_dict(parsed: DgpDocument) -> dict:
    covariates = []
    for term in parsed.dgp.terms:
        entry = {"name": term.name, **_dist_to_dict(term.spec)}
        if isinstance(term.spec, Categorical):
            entry["betas"] = list(term.beta)
        else:
            entry["beta"] = term.beta
        covariates.append(entry)
    doc = {
        "link": parsed.dgp.link.name,
        "target_mean": parsed.dgp.target_mean,
        "outcome": _outcome_to_dict(parsed.dgp.outcome),
        "covariates": covariates,
        "solver": parsed.solver,
        "engine": parsed.engine.name,
        "master_seed": parsed.master_seed,
    }
    if isinstance(parsed.engine, MonteCarlo):
        doc["n_mc"] = parsed.engine.n_mc
    if parsed.tol is not None:
        doc["tol"] = parsed.tol
    return doc


# ------------------------------------------------------------------ commands

_OVERRIDE_KEYS = (
    ("seed", "master_seed"),
    ("replicates", "replicates"),
    ("workers", "workers"),
    ("engine", "engine"),
    ("n_mc", "n_mc"),
    ("tol", "tol"),
)


def _apply_overrides(doc: dict, args: argparse.Namespace) -> dict:
    for attr, key in _OVERRIDE_KEYS:
        value = getattr(args, attr, None)
        if value is not None:
            doc[key] = value
    return doc


def _default_tol(tol: Optional[float], engine: Engine) -> float:
    if tol is not None:
        return tol
    return DEFAULT_TOL_MC if isinstance(engine, MonteCarlo) else DEFAULT_TOL_EXACT


def cmd_solve(args: argparse.Namespace) -> int:
    parsed = parse_dgp_config(_apply_overrides(load_config(args.config), args))
    rng = RngStream(parsed.master_seed).child(0)
    sol = solve(parsed.dgp, parsed.solver, engine=parsed.engine, tol=parsed.tol, rng=rng)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["beta0", "method", "residual", "mc_se", "warnings"])
    w.writerow(
        [
            repr(sol.beta0),
            sol.method,
            format(sol.residual, ".9g"),
            format(sol.mc_se, ".9g"),
            ";".join(sorted(sol.warnings)),
        ]
    )
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    parsed = parse_dgp_config(_apply_overrides(load_config(args.config), args))
    rng = RngStream(parsed.master_seed).child(1)
    value, se = expectation_of_mean(args.beta0, parsed.dgp, engine=parsed.engine, rng=rng)
    gap = abs(value - parsed.dgp.target_mean)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["achieved_mean", "se", "gap"])
    w.writerow([repr(value), format(se, ".9g"), format(gap, ".9g")])
    tol = _default_tol(parsed.tol, parsed.engine)
    if gap <= max(tol, 4.0 * se):
        return 0
    print(
        f"verification failed: gap {gap:.6g} exceeds max(tol {tol:g}, 4*se {4 * se:.6g})",
        file=sys.stderr,
    )
    return VERIFY_GAP_EXIT


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = parse_grid_config(_apply_overrides(load_config(args.config), args))
    rows = run_grid(cfg)
    write_csv(rows, args.out)
    s = summarize(rows)
    note = f", {s['error']} failed" if s["error"] else ""
    print(
        f"{s['ok']} cells run, {s['skipped']} skipped{note}, "
        f"max |bias|/bias_se = {s['max_bias_ratio']:.3g}",
        file=sys.stderr,
    )
    return 0


class _Parser(argparse.ArgumentParser):
    # usage mistakes are exit code 1; argparse's default is 2, which this
    # package reserves for mathematical infeasibility
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="balint",
        description="Balancing intercepts: solve them, verify them, and run replication grids.",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="YAML config path")
        p.add_argument("--seed", type=int, default=None, help="override master_seed")
        p.add_argument("--engine", choices=("exact", "mc"), default=None, help="override engine")
        p.add_argument("--n-mc", dest="n_mc", type=int, default=None, help="override MC draw count")
        p.add_argument("--tol", type=float, default=None, help="override solver tolerance")

    p_solve = sub.add_parser("solve", help="solve the balancing intercept for one DGP")
    common(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_verify = sub.add_parser("verify", help="check a beta0 against its target mean")
    common(p_verify)
    p_verify.add_argument("--beta0", type=float, required=True, help="intercept to verify")
    p_verify.set_defaults(func=cmd_verify)

    p_sim = sub.add_parser("simulate", help="run a scenario grid and write the result CSV")
    common(p_sim)
    p_sim.add_argument("--out", required=True, help="output CSV path")
    p_sim.add_argument("--replicates", type=int, default=None, help="override replicate count")
    p_sim.add_argument("--workers", type=int, default=None, help="override worker count (0 = auto)")
    p_sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Error as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())
