"""Monte Carlo runner for tomography strategies.

Trial ``r`` of strategy ``k`` at grid point ``i`` draws from
``numpy.random.Generator(PCG64(SeedSequence(master_seed, spawn_key=(i, k, r))))``,
so every number in a report depends only on the plan, never on scheduling.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bounds import gm_bound_mse, gm_scheme_metric, metric_weighting, standard_mse_theory
from .qubit import BlochState, bures_distance_sq, rotation_to_z
from .strategies import StrategyConfig, run_trial

log = logging.getLogger(__name__)

BOUNDARY_BIAS_RADIUS = 0.98
CSV_HEADER = ("s", "strategy", "fom", "N", "N1", "scaled_error", "sem", "reps")


class PlanError(ValueError):
    """Invalid experiment plan; the message names the offending field."""


@dataclass(frozen=True)
class FigureOfMerit:
    kind: str = "mse"  # mse | bures | wmse
    n: int | None = None

    def __post_init__(self):
        if self.kind not in ("mse", "bures", "wmse"):
            raise ValueError(f"unknown figure of merit {self.kind!r}")
        if self.kind == "wmse" and (self.n is None or int(self.n) != self.n or self.n < 1):
            raise ValueError("wmse needs a positive integer n")

    @property
    def label(self) -> str:
        return f"wmse:{self.n}" if self.kind == "wmse" else self.kind

    @classmethod
    def parse(cls, value) -> FigureOfMerit:
        if isinstance(value, FigureOfMerit):
            return value
        if isinstance(value, dict):
            extra = set(value) - {"kind", "n"}
            if extra:
                raise ValueError(f"unknown figure_of_merit key: {sorted(extra)[0]}")
            return cls(value.get("kind", "mse"), value.get("n"))
        text = str(value).strip().lower()
        if text.startswith("wmse"):
            _, _, n = text.partition(":")
            try:
                return cls("wmse", int(n))
            except ValueError:
                raise ValueError(f"cannot parse figure of merit {value!r}; use 'wmse:<n>'") from None
        return cls(text)

    def to_json(self):
        return self.label


def figure_of_merit(estimate, true_state, fom: FigureOfMerit) -> float:
    """Per-trial error: squared Euclidean, squared Bures, or local metric quadratic form."""
    est = np.asarray(estimate, dtype=float)
    tru = np.asarray(true_state, dtype=float)
    if fom.kind == "mse":
        d = est - tru
        return float(d @ d)
    if fom.kind == "bures":
        return bures_distance_sq(est, tru)
    radius = float(np.linalg.norm(tru))
    if radius >= 1.0:
        raise ValueError("WMSE weighting diverges for a pure true state")
    w = np.array(metric_weighting(radius, fom.n))
    d = rotation_to_z(tru) @ (est - tru)
    return float(np.sum(w * d * d))


def reference_values(fom: FigureOfMerit, s: float) -> tuple[float | None, float | None]:
    """(GM bound, standard-tomography theory) for a cell, where closed forms exist."""
    if fom.kind == "mse":
        return gm_bound_mse(s), standard_mse_theory(s)
    if fom.kind == "bures":
        return 2.25, None
    if s >= 1.0:
        return None, None
    return gm_scheme_metric(s, fom.n).bound, None


@dataclass(frozen=True)
class StrategyEntry:
    name: str
    config: StrategyConfig
    figure_of_merit: FigureOfMerit | None = None

    def to_dict(self) -> dict:
        d = {"name": self.name, **self.config.to_dict()}
        if self.figure_of_merit is not None:
            d["figure_of_merit"] = self.figure_of_merit.to_json()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> StrategyEntry:
        d = dict(d)
        name = d.pop("name", None) or d.get("kind", "standard")
        fom = d.pop("figure_of_merit", None)
        return cls(str(name), StrategyConfig.from_dict(d),
                   FigureOfMerit.parse(fom) if fom is not None else None)


PLAN_KEYS = ("true_direction", "s_grid", "strategies", "repetitions", "master_seed", "figure_of_merit")


@dataclass(frozen=True)
class ExperimentPlan:
    true_direction: tuple[float, float, float]
    s_grid: tuple[float, ...]
    strategies: tuple[StrategyEntry, ...]
    repetitions: int
    master_seed: int = 0
    figure_of_merit: FigureOfMerit = field(default_factory=FigureOfMerit)

    def __post_init__(self):
        try:
            direction = tuple(float(x) for x in self.true_direction)
        except (TypeError, ValueError):
            raise PlanError("true_direction: expected three numbers") from None
        if len(direction) != 3:
            raise PlanError("true_direction: expected three numbers")
        norm = math.sqrt(sum(x * x for x in direction))
        if abs(norm - 1.0) > 1e-2:
            raise PlanError(f"true_direction: must be (close to) unit norm, got {norm!r}")
        object.__setattr__(self, "true_direction", direction)
        grid = tuple(float(s) for s in self.s_grid)
        if not grid or any(not 0.0 <= s <= 1.0 for s in grid):
            raise PlanError("s_grid: values must lie in [0, 1]")
        object.__setattr__(self, "s_grid", grid)
        if not self.strategies:
            raise PlanError("strategies: at least one strategy required")
        names = [e.name for e in self.strategies]
        if len(set(names)) != len(names):
            raise PlanError("strategies: names must be unique")
        if isinstance(self.repetitions, bool) or int(self.repetitions) != self.repetitions or self.repetitions < 1:
            raise PlanError(f"repetitions: must be a positive integer, got {self.repetitions!r}")
        if int(self.master_seed) != self.master_seed or not 0 <= self.master_seed < 2**64:
            raise PlanError("master_seed: must be an integer in [0, 2**64)")
        object.__setattr__(self, "master_seed", int(self.master_seed))
        object.__setattr__(self, "repetitions", int(self.repetitions))

    def unit_direction(self) -> np.ndarray:
        d = np.array(self.true_direction)
        return d / np.linalg.norm(d)

    def true_state(self, s: float) -> BlochState:
        v = s * self.unit_direction()
        n = np.linalg.norm(v)
        if n > 1.0:
            v = v / n
        return BlochState(v)

    def fom_for(self, entry: StrategyEntry) -> FigureOfMerit:
        return entry.figure_of_merit or self.figure_of_merit

    def to_dict(self) -> dict:
        return {
            "true_direction": list(self.true_direction),
            "s_grid": list(self.s_grid),
            "strategies": [e.to_dict() for e in self.strategies],
            "repetitions": self.repetitions,
            "master_seed": self.master_seed,
            "figure_of_merit": self.figure_of_merit.to_json(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentPlan:
        extra = [k for k in d if k not in PLAN_KEYS]
        if extra:
            raise PlanError(f"unknown plan key: {extra[0]}")
        missing = [k for k in ("true_direction", "s_grid", "strategies", "repetitions") if k not in d]
        if missing:
            raise PlanError(f"{missing[0]}: required")
        entries = []
        for i, raw in enumerate(d["strategies"]):
            try:
                entries.append(StrategyEntry.from_dict(raw))
            except (TypeError, ValueError) as exc:
                raise PlanError(f"strategies[{i}]: {exc}") from None
        try:
            fom = FigureOfMerit.parse(d.get("figure_of_merit", "mse"))
        except ValueError as exc:
            raise PlanError(f"figure_of_merit: {exc}") from None
        reps = d["repetitions"]
        if isinstance(reps, bool) or not isinstance(reps, (int, float)):
            raise PlanError(f"repetitions: must be a positive integer, got {reps!r}")
        return cls(
            true_direction=d["true_direction"],
            s_grid=d["s_grid"],
            strategies=tuple(entries),
            repetitions=reps,
            master_seed=d.get("master_seed", 0),
            figure_of_merit=fom,
        )


def trial_rng(master_seed: int, s_index: int, strategy_index: int, rep: int) -> np.random.Generator:
    ss = np.random.SeedSequence(master_seed, spawn_key=(s_index, strategy_index, rep))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass
class Cell:
    s: float
    strategy: str
    fom: str
    N: int
    N1: int | None
    scaled_error: float
    sem: float
    reps: int
    gm_bound: float | None = None
    standard_theory: float | None = None
    flags: list[str] = field(default_factory=list)
    error: str | None = None

    def to_dict(self) -> dict:
        def num(x):
            return None if x is None or not math.isfinite(x) else x
        return {
            "s": self.s, "strategy": self.strategy, "fom": self.fom, "N": self.N, "N1": self.N1,
            "scaled_error": num(self.scaled_error), "sem": num(self.sem), "n_reps": self.reps,
            "gm_bound": num(self.gm_bound), "standard_theory": num(self.standard_theory),
            "flags": list(self.flags), "error": self.error,
        }


@dataclass
class SimulationReport:
    plan: ExperimentPlan
    cells: list[Cell]

    def cell(self, strategy: str, s: float) -> Cell:
        for c in self.cells:
            if c.strategy == strategy and c.s == s:
                return c
        raise KeyError((strategy, s))

    def to_json(self) -> str:
        doc = {"plan": self.plan.to_dict(), "cells": [c.to_dict() for c in self.cells]}
        return json.dumps(doc, indent=2, allow_nan=False) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for c in self.cells:
            writer.writerow([repr(c.s), c.strategy, c.fom, c.N, "" if c.N1 is None else c.N1,
                             repr(c.scaled_error), repr(c.sem), c.reps])
        return buf.getvalue()

    def write(self, json_path, csv_path) -> None:
        with open(json_path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
        with open(csv_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())


def _run_chunk(plan_dict: dict, s_index: int, strategy_index: int, start: int, stop: int) -> list[float]:
    plan = ExperimentPlan.from_dict(plan_dict)
    return _trial_values(plan, s_index, strategy_index, range(start, stop))


def _trial_values(plan: ExperimentPlan, s_index: int, strategy_index: int, reps) -> list[float]:
    s = plan.s_grid[s_index]
    entry = plan.strategies[strategy_index]
    fom = plan.fom_for(entry)
    truth = plan.true_state(s)
    out = []
    for r in reps:
        rng = trial_rng(plan.master_seed, s_index, strategy_index, r)
        result = run_trial(truth, entry.config, rng)
        out.append(figure_of_merit(result.estimate, truth, fom))
    return out


def _summarize(values: Sequence[float], N: int) -> tuple[float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return N * mean, math.nan
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return N * mean, N * math.sqrt(var / n)


def run_plan(plan: ExperimentPlan, workers: int = 1, chunk_size: int = 250) -> SimulationReport:
    """Run every (s, strategy) cell of ``plan``; results do not depend on ``workers``."""
    tasks = [(i, k, start, min(start + chunk_size, plan.repetitions))
             for i in range(len(plan.s_grid))
             for k in range(len(plan.strategies))
             for start in range(0, plan.repetitions, chunk_size)]
    values: dict[tuple[int, int], list] = {}
    errors: dict[tuple[int, int], str] = {}

    def collect(task, outcome):
        i, k, start, _ = task
        if isinstance(outcome, Exception):
            errors.setdefault((i, k), f"{type(outcome).__name__}: {outcome}")
        else:
            values.setdefault((i, k), []).append((start, outcome))

    if workers <= 1:
        for task in tasks:
            try:
                outcome = _trial_values(plan, task[0], task[1], range(task[2], task[3]))
            except Exception as exc:  # noqa: BLE001 - reported per cell
                outcome = exc
            collect(task, outcome)
    else:
        plan_dict = plan.to_dict()
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [(t, pool.submit(_run_chunk, plan_dict, *t)) for t in tasks]
            for task, fut in futures:
                try:
                    outcome = fut.result()
                except Exception as exc:  # noqa: BLE001
                    outcome = exc
                collect(task, outcome)

    cells = []
    for i, s in enumerate(plan.s_grid):
        for k, entry in enumerate(plan.strategies):
            fom = plan.fom_for(entry)
            cfg = entry.config
            gm, std = reference_values(fom, s)
            cell = Cell(s=s, strategy=entry.name, fom=fom.label, N=cfg.N,
                        N1=cfg.N1 if cfg.kind == "adaptive" else None,
                        scaled_error=math.nan, sem=math.nan, reps=plan.repetitions,
                        gm_bound=gm, standard_theory=std)
            if s >= BOUNDARY_BIAS_RADIUS:
                cell.flags.append("boundary-bias regime")
            if (i, k) in errors:
                cell.error = errors[(i, k)]
                log.error("cell s=%s strategy=%s aborted: %s", s, entry.name, cell.error)
            else:
                chunks = sorted(values[(i, k)], key=lambda c: c[0])
                flat = [v for _, vs in chunks for v in vs]
                cell.scaled_error, cell.sem = _summarize(flat, cfg.N)
            cells.append(cell)
    return SimulationReport(plan=plan, cells=cells)
