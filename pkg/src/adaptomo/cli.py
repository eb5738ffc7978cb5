"""Command-line front end.

Exit codes: 0 success, 1 runtime or plan failure, 2 bad arguments.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import re
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import bounds, error_budget, estimation
from .harness import ExperimentPlan, PlanError, run_plan

log = logging.getLogger("adaptomo")

_ANGLE_RE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(deg|rad)?\s*$")
_NAMED_AXES = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}


def parse_angle(text) -> float:
    """Angle in radians from ``'0.3deg'``, ``'0.01rad'`` or a bare number (radians)."""
    if isinstance(text, (int, float)):
        return float(text)
    match = _ANGLE_RE.match(str(text))
    if not match:
        raise ValueError(f"cannot parse angle {text!r}; use e.g. 0.3deg or 0.005rad")
    value = float(match.group(1))
    return math.radians(value) if match.group(2) == "deg" else value


def _angle_arg(text):
    try:
        return parse_angle(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _vector_arg(text):
    try:
        v = [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if len(v) != 3:
        raise argparse.ArgumentTypeError(f"expected three components, got {text!r}")
    return np.array(v)


def _axis_arg(text):
    """``x``, ``0,0,1`` or either followed by ``:weight``."""
    spec, _, weight = text.partition(":")
    spec = spec.strip().lower()
    try:
        vec = np.array(_NAMED_AXES[spec]) if spec in _NAMED_AXES else _vector_arg(spec)
        w = float(weight) if weight else None
    except (argparse.ArgumentTypeError, ValueError):
        raise argparse.ArgumentTypeError(f"invalid axis {text!r}") from None
    if abs(np.linalg.norm(vec) - 1.0) > 1e-6:
        raise argparse.ArgumentTypeError(f"axis {text!r} is not a unit vector")
    if w is not None and (w < 0 or not math.isfinite(w)):
        raise argparse.ArgumentTypeError(f"axis weight must be non-negative in {text!r}")
    return vec / np.linalg.norm(vec), w


def _s_values(args, parser) -> list[float]:
    values: list[float] = []
    for item in args.s or []:
        for part in item.split(","):
            try:
                values.append(float(part))
            except ValueError:
                parser.error(f"--s expects numbers, got {part!r}")
    if args.s_grid:
        try:
            start, stop, step = (float(x) for x in args.s_grid.split(":"))
        except ValueError:
            parser.error("--s-grid expects start:stop:step")
        if step <= 0:
            parser.error("--s-grid step must be positive")
        k = int(math.floor((stop - start) / step + 1e-9))
        values.extend(round(start + i * step, 12) for i in range(k + 1))
    if not values:
        parser.error("give at least one Bloch radius with --s or --s-grid")
    open_top = args.fom == "wmse"
    for s in values:
        if not (0.0 <= s <= 1.0) or (open_top and s >= 1.0):
            rng = "[0, 1)" if open_top else "[0, 1]"
            parser.error(f"Bloch radius s must lie in {rng}, got {s!r}")
    return values


# ---------------------------------------------------------------------------
# plan files


@dataclass(frozen=True)
class PlanFile:
    plan: ExperimentPlan
    output: str | None = None
    threads: int | None = None

    def to_dict(self) -> dict:
        d = self.plan.to_dict()
        if self.output is not None:
            d["output"] = self.output
        if self.threads is not None:
            d["threads"] = self.threads
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> PlanFile:
        if not isinstance(d, dict):
            raise PlanError("plan file must hold a JSON object")
        d = dict(d)
        output = d.pop("output", None)
        threads = d.pop("threads", None)
        if threads is not None and (isinstance(threads, bool) or not isinstance(threads, int) or threads < 1):
            raise PlanError("threads: must be a positive integer")
        if output is not None and not isinstance(output, str):
            raise PlanError("output: must be a path prefix string")
        return cls(ExperimentPlan.from_dict(d), output, threads)

    @classmethod
    def loads(cls, text: str) -> PlanFile:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise PlanError(f"plan is not valid JSON: {exc}") from None
        return cls.from_dict(doc)


def bundled_plans() -> dict[str, str]:
    root = resources.files("adaptomo") / "plans"
    return {p.name: p.read_text(encoding="utf-8") for p in root.iterdir() if p.name.endswith(".plan")}


def load_plan_file(path: str) -> PlanFile:
    p = Path(path)
    if p.exists():
        return PlanFile.loads(p.read_text(encoding="utf-8"))
    plans = bundled_plans()
    name = p.name if p.name.endswith(".plan") else p.name + ".plan"
    if name in plans:
        return PlanFile.loads(plans[name])
    raise PlanError(f"plan file {path!r} not found (bundled plans: {', '.join(sorted(plans))})")


# ---------------------------------------------------------------------------
# commands


def cmd_bound(args, parser) -> int:
    values = _s_values(args, parser)
    if args.fom == "wmse" and args.n is None:
        parser.error("--fom wmse needs --n")
    if args.n is not None and args.n < 1:
        parser.error("--n must be a positive integer")
    header = f"{'s':>8} {'gm_bound':>12} {'p1':>10} {'p2':>10} {'p3':>10}"
    if args.fom == "mse":
        header += f" {'standard':>10}"
    print(f"# figure of merit: {args.fom}" + (f" (n={args.n})" if args.fom == "wmse" else ""))
    print(header)
    for s in values:
        if args.fom == "mse":
            bound = bounds.gm_bound_mse(s)
            probs = bounds.scheme_probabilities(bounds.WeightingSpec.mse(), s)
        else:
            n = 1 if args.fom == "bures" else args.n
            scheme = bounds.gm_scheme_metric(min(s, bounds.RADIAL_CLIP), n)
            bound, probs = scheme.bound, scheme.probabilities
        line = f"{s:>8.4f} {bound:>12.6f} {probs[0]:>10.6f} {probs[1]:>10.6f} {probs[2]:>10.6f}"
        if args.fom == "mse":
            line += f" {bounds.standard_mse_theory(s):>10.6f}"
        print(line)
    return 0


def cmd_simulate(args, parser) -> int:
    try:
        plan_file = load_plan_file(args.plan)
    except PlanError as exc:
        print(f"error: plan validation failed: {exc}", file=sys.stderr)
        return 1
    prefix = args.out or plan_file.output
    if not prefix:
        print("error: no output prefix (use --out or the plan's 'output' key)", file=sys.stderr)
        return 1
    threads = args.threads or plan_file.threads or 1
    json_path, csv_path = Path(prefix + ".json"), Path(prefix + ".csv")
    for path in (json_path, csv_path):
        if not path.parent.is_dir():
            print(f"error: cannot write {path}: directory does not exist", file=sys.stderr)
            return 1
    report = run_plan(plan_file.plan, workers=threads)
    try:
        report.write(json_path, csv_path)
    except OSError as exc:
        print(f"error: cannot write report: {exc}", file=sys.stderr)
        return 1
    failed = 0
    for c in report.cells:
        if c.error:
            failed += 1
            print(f"s={c.s:<6g} {c.strategy:<14} {c.fom:<8} ERROR {c.error}")
            continue
        gm = "" if c.gm_bound is None else f"  gm={c.gm_bound:.5f}"
        flag = f"  [{'; '.join(c.flags)}]" if c.flags else ""
        print(f"s={c.s:<6g} {c.strategy:<14} {c.fom:<8} N={c.N:<6d} "
              f"scaled={c.scaled_error:.5f} +- {c.sem:.5f} (reps={c.reps}){gm}{flag}")
    print(f"wrote {json_path} and {csv_path}")
    return 1 if failed else 0


def cmd_fisher(args, parser) -> int:
    s = args.s
    if np.linalg.norm(s) > 1.0 + 1e-12:
        parser.error("--s must lie in the Bloch ball")
    if not args.axis:
        parser.error("give at least one --axis")
    weights = [w for _, w in args.axis]
    free = sum(w is None for w in weights)
    fixed = sum(w for w in weights if w is not None)
    fill = (1.0 - fixed) / free if free else 0.0
    try:
        ensemble = estimation.MeasurementEnsemble([a for a, _ in args.axis],
                                                  [fill if w is None else w for w in weights])
    except ValueError as exc:
        parser.error(str(exc))
    try:
        info = estimation.fisher_information(s, ensemble)
        qfi = estimation.quantum_fisher(s)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    trace = estimation.gm_trace(s, ensemble)
    np.set_printoptions(precision=6, suppress=True)
    print("Fisher information I:")
    print(info)
    print("quantum Fisher information J:")
    print(qfi)
    verdict = "PASS" if trace <= 1.0 + 1e-9 else "FAIL"
    print(f"tr(J^-1 I) = {trace:.12g}  (bound d-1 = 1)  {verdict}")
    return 0


def cmd_error_budget(args, parser) -> int:
    base = error_budget.OpticsParams.reference_defaults() if args.reference_defaults else error_budget.OpticsParams()
    overrides = {}
    if args.beta_unc is not None:
        overrides["beta_unc"] = args.beta_unc
    if args.eta_unc is not None:
        overrides["eta_unc"] = args.eta_unc
    if args.delta_unc is not None:
        overrides["delta1_unc"] = overrides["delta2_unc"] = args.delta_unc
    if args.theta_unc is not None:
        overrides["theta1_unc"] = overrides["theta2_unc"] = args.theta_unc
    if any(v < 0 for v in overrides.values()):
        parser.error("uncertainties must be non-negative")
    if not 0.0 <= args.s_len <= 1.0:
        parser.error("--s-len must lie in [0, 1]")
    params = error_budget.OpticsParams(**{**base.__dict__, **overrides})
    report = error_budget.systematic_budget(params, args.s_len)
    print(f"{'source':<8} {'contribution':>14}  assumption")
    for name, value in report.contributions.items():
        print(f"{name:<8} {value:>14.4e}  {report.assumptions[name]}")
    print(f"{'total':<8} {report.total:>14.4e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adaptomo", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound", help="GM bounds and optimal measurement probabilities")
    p.add_argument("--fom", choices=("mse", "bures", "wmse"), default="mse")
    p.add_argument("--n", type=int, help="metric index for --fom wmse (1 = Bures, 2 = Chernoff)")
    p.add_argument("--s", action="append", help="Bloch radius (repeatable or comma-separated)")
    p.add_argument("--s-grid", help="start:stop:step")
    p.set_defaults(func=cmd_bound, subparser=p)

    p = sub.add_parser("simulate", help="run a Monte Carlo plan file")
    p.add_argument("plan", help="plan file path or bundled plan name (fig3, fig4-upper, fig4-lower)")
    p.add_argument("--out", help="output prefix; writes PREFIX.json and PREFIX.csv")
    p.add_argument("--threads", type=int, help="worker processes")
    p.set_defaults(func=cmd_simulate, subparser=p)

    p = sub.add_parser("fisher", help="Fisher matrices and the GM inequality for an ensemble")
    p.add_argument("--s", type=_vector_arg, default=np.zeros(3), help="Bloch vector x,y,z")
    p.add_argument("--axis", type=_axis_arg, action="append",
                   help="axis as x|y|z or x,y,z, optionally :weight (unweighted axes share the rest)")
    p.set_defaults(func=cmd_fisher, subparser=p)

    p = sub.add_parser("error-budget", help="first-order systematic error budget")
    p.add_argument("--reference-defaults", "--paper-defaults", dest="reference_defaults", action="store_true",
                   help="calibrated parameters of the reference setup")
    p.add_argument("--s-len", type=float, default=1.0)
    p.add_argument("--beta-unc", type=float)
    p.add_argument("--eta-unc", type=float)
    p.add_argument("--delta-unc", type=_angle_arg, help="phase uncertainty, e.g. 0.3deg")
    p.add_argument("--theta-unc", type=_angle_arg, help="axis-angle uncertainty, e.g. 0.1deg")
    p.set_defaults(func=cmd_error_budget, subparser=p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", None) is not None and args.threads < 1:
        parser.error("--threads must be a positive integer")
    return args.func(args, args.subparser)


if __name__ == "__main__":
    sys.exit(main())
