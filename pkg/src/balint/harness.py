"""Monte Carlo replication harness.

Runs scenario grids, measures the bias of the achieved marginal outcome mean
against its target, and writes one CSV row per grid cell. Determinism is the
central contract: every random stream is keyed to (master_seed, sha256 of the
scenario id, replicate index), results aggregate in scenario-id order, and the
output bytes are therefore identical whatever the worker count. Python's
builtin hash() is never used for keying (it is salted per process).
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np

from .datagen import generate
from .distributions import CovariateSpec, RngStream
from .errors import ConfigError, Error, MgfDomainError, SpecError
from .intercept import (
    DgpSpec,
    Engine,
    ExactEnumeration,
    OutcomeFamily,
    SOLVER_NAMES,
    Term,
    solve,
)
from .links import Link

__all__ = [
    "Scenario",
    "ScenarioResult",
    "GridConfig",
    "GridRow",
    "CSV_COLUMNS",
    "scenario_stream",
    "run_scenario",
    "expand_grid",
    "run_grid",
    "write_csv",
    "summarize",
]


def scenario_stream(master_seed: int, scenario_id: str) -> RngStream:
    digest = hashlib.sha256(scenario_id.encode("utf-8")).digest()
    return RngStream(master_seed, (int.from_bytes(digest[:8], "big"),))


@dataclass(frozen=True)
class Scenario:
    id: str
    dgp: DgpSpec
    solver: str
    n: int
    replicates: int
    master_seed: int
    engine: Engine = ExactEnumeration()
    tol: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.id:
            raise SpecError("scenario id must be nonempty")
        if int(self.n) < 1:
            raise SpecError(f"scenario {self.id}: n must be at least 1")
        if int(self.replicates) < 2:
            raise SpecError(f"scenario {self.id}: a standard error needs at least 2 replicates")
        if self.solver not in SOLVER_NAMES:
            raise SpecError(
                f"scenario {self.id}: unknown solver '{self.solver}' "
                f"(expected one of {SOLVER_NAMES})"
            )


@dataclass(frozen=True)
class ScenarioResult:
    scenario_id: str
    beta0: float
    achieved_mean: float
    bias: float
    bias_se: float
    clamp_rate: float
    replicates: int
    warnings: frozenset[str]
    replicate_means: tuple[float, ...]


def run_scenario(s: Scenario) -> ScenarioResult:
    """Solve beta0 once, then generate and average over the replicates.

    Replicate k draws from substream (master_seed, id hash, 1, k); the solver
    owns substream (master_seed, id hash, 0).
    """
    ss = scenario_stream(s.master_seed, s.id)
    try:
        sol = solve(s.dgp, s.solver, engine=s.engine, tol=s.tol, rng=ss.child(0))
    except Error as e:
        raise type(e)(f"scenario {s.id}: {e}") from None
    rep_base = ss.child(1)
    means = np.empty(s.replicates)
    clamped = 0
    for k in range(s.replicates):
        ds = generate(s.dgp, sol.beta0, s.n, rep_base.child(k))
        means[k] = ds.outcome.mean()
        clamped += ds.clamp_count
    achieved = float(means.mean())
    return ScenarioResult(
        scenario_id=s.id,
        beta0=float(sol.beta0),
        achieved_mean=achieved,
        bias=achieved - s.dgp.target_mean,
        bias_se=float(means.std(ddof=1) / math.sqrt(s.replicates)),
        clamp_rate=clamped / (s.replicates * s.n),
        replicates=s.replicates,
        warnings=sol.warnings,
        replicate_means=tuple(float(m) for m in means),
    )


@dataclass(frozen=True)
class GridConfig:
    """Cartesian grid: (covariate axis) x (beta2 axis) x (target axis).

    Every cell shares the link, outcome family, exposure term, solver, and
    sample sizes; the axis covariate's coefficient is beta2.
    """

    name: str
    link: Link
    outcome: OutcomeFamily
    exposure: Term
    z_axis: tuple[tuple[str, CovariateSpec], ...]
    beta2_axis: tuple[float, ...]
    target_axis: tuple[float, ...]
    n: int
    replicates: int
    master_seed: int
    solver: str
    engine: Engine = ExactEnumeration()
    tol: Optional[float] = None
    workers: int = 1

    def __post_init__(self) -> None:
        if not self.name:
            raise ConfigError("grid name must be nonempty")
        if not (self.z_axis and self.beta2_axis and self.target_axis):
            raise ConfigError("every grid axis needs at least one entry")
        kinds = [spec.kind for _, spec in self.z_axis]
        if len(set(kinds)) != len(kinds):
            raise ConfigError(f"covariate axis entries must have distinct distributions, got {kinds}")
        if self.workers < 0:
            raise ConfigError(f"workers must be nonnegative (0 = auto), got {self.workers}")


class GridCell(NamedTuple):
    scenario: Scenario
    z_dist: str
    beta2: float
    target_mean: float


@dataclass(frozen=True)
class GridRow:
    scenario_id: str
    link: str
    outcome_family: str
    solver: str
    z_dist: str
    beta2: float
    target_mean: float
    beta0: Optional[float]
    achieved_mean: Optional[float]
    bias: Optional[float]
    bias_se: Optional[float]
    clamp_rate: Optional[float]
    n: int
    replicates: int
    master_seed: int
    status: str
    warnings: tuple[str, ...]


CSV_COLUMNS = (
    "scenario_id",
    "link",
    "outcome_family",
    "solver",
    "z_dist",
    "beta2",
    "target_mean",
    "beta0",
    "achieved_mean",
    "bias",
    "bias_se",
    "clamp_rate",
    "n",
    "replicates",
    "master_seed",
    "status",
    "warnings",
)


def expand_grid(cfg: GridConfig) -> list[GridCell]:
    """All cells of the grid, ordered by scenario id."""
    cells = []
    for zname, zspec in cfg.z_axis:
        for beta2 in cfg.beta2_axis:
            for target in cfg.target_axis:
                sid = f"{cfg.name}/{zspec.kind}/{float(beta2)}/{float(target)}"
                dgp = DgpSpec(
                    terms=(cfg.exposure, Term(zname, zspec, float(beta2))),
                    link=cfg.link,
                    outcome=cfg.outcome,
                    target_mean=float(target),
                )
                scenario = Scenario(
                    id=sid,
                    dgp=dgp,
                    solver=cfg.solver,
                    n=cfg.n,
                    replicates=cfg.replicates,
                    master_seed=cfg.master_seed,
                    engine=cfg.engine,
                    tol=cfg.tol,
                )
                cells.append(GridCell(scenario, zspec.kind, float(beta2), float(target)))
    cells.sort(key=lambda c: c.scenario.id)
    return cells


def _run_cell(cell: GridCell) -> GridRow:
    s = cell.scenario
    common = dict(
        scenario_id=s.id,
        link=s.dgp.link.name,
        outcome_family=s.dgp.outcome.family,
        solver=s.solver,
        z_dist=cell.z_dist,
        beta2=cell.beta2,
        target_mean=cell.target_mean,
        n=s.n,
        replicates=s.replicates,
        master_seed=s.master_seed,
    )
    try:
        r = run_scenario(s)
    except MgfDomainError:
        # the cell's exponential moment is infinite; recorded, not dropped
        return GridRow(
            **common,
            beta0=None,
            achieved_mean=None,
            bias=None,
            bias_se=None,
            clamp_rate=None,
            status="skipped",
            warnings=("divergent_exp_moment",),
        )
    except Error as e:
        return GridRow(
            **common,
            beta0=None,
            achieved_mean=None,
            bias=None,
            bias_se=None,
            clamp_rate=None,
            status="error",
            warnings=(f"{type(e).__name__}: {e}",),
        )
    return GridRow(
        **common,
        beta0=r.beta0,
        achieved_mean=r.achieved_mean,
        bias=r.bias,
        bias_se=r.bias_se,
        clamp_rate=r.clamp_rate,
        status="ok",
        warnings=tuple(sorted(r.warnings)),
    )


def run_grid(cfg: GridConfig, workers: Optional[int] = None) -> list[GridRow]:
    """Run every cell; rows come back in scenario-id order.

    workers > 1 fans cells out over processes; the output is identical to the
    sequential run because each cell's streams depend only on (master_seed,
    scenario id) and aggregation follows the presorted cell order.
    """
    cells = expand_grid(cfg)
    w = cfg.workers if workers is None else workers
    if w == 0:
        w = os.cpu_count() or 1
    if w <= 1:
        return [_run_cell(c) for c in cells]
    chunk = max(1, len(cells) // (4 * w))
    with ProcessPoolExecutor(max_workers=w) as ex:
        return list(ex.map(_run_cell, cells, chunksize=chunk))


def _cell_text(value: Optional[float]) -> str:
    return "" if value is None else format(value, ".9g")


def write_csv(rows: list[GridRow], destination: Union[str, io.TextIOBase]) -> None:
    """Result CSV: pinned column order, floats at 9 significant digits, LF."""
    if isinstance(destination, (str, bytes)):
        with open(destination, "w", newline="") as f:
            write_csv(rows, f)
        return
    w = csv.writer(destination, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow(
            [
                r.scenario_id,
                r.link,
                r.outcome_family,
                r.solver,
                r.z_dist,
                format(r.beta2, ".9g"),
                format(r.target_mean, ".9g"),
                _cell_text(r.beta0),
                _cell_text(r.achieved_mean),
                _cell_text(r.bias),
                _cell_text(r.bias_se),
                _cell_text(r.clamp_rate),
                str(r.n),
                str(r.replicates),
                str(r.master_seed),
                r.status,
                ";".join(r.warnings),
            ]
        )


def summarize(rows: list[GridRow]) -> dict:
    """Counts and the worst |bias| / bias_se ratio over the ok rows."""
    ok = [r for r in rows if r.status == "ok"]
    ratios = [abs(r.bias) / r.bias_se for r in ok if r.bias_se and r.bias_se > 0.0]
    return {
        "ok": len(ok),
        "skipped": sum(1 for r in rows if r.status == "skipped"),
        "error": sum(1 for r in rows if r.status == "error"),
        "max_bias_ratio": max(ratios) if ratios else 0.0,
    }
