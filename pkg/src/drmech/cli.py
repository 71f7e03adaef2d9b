"""Command-line entry point.

    python -m drmech.cli equilibria --out results/
    python -m drmech.cli simulate --dynamics smith,bnn --incentive-window 2,4 --t-end 6 --out results/

Exit codes: 0 success, 2 bad arguments or unreadable scenario, 3 scenario
fails validation, 4 a solver or integrator did not converge.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path


from . import analysis, dynamics, equilibrium, incentives
from .market import aggregate_surplus, validate_scenario
from .scenario_io import ScenarioFormatError, default_scenario, load_scenario

COMMANDS = ("equilibria", "incentives", "simulate", "sweep", "par")
DEFAULT_SWEEP = (1, 2, 5, 10, 20, 50, 100)

EXIT_OK, EXIT_PARSE, EXIT_INVALID, EXIT_SOLVER = 0, 2, 3, 4


@dataclass
class RunSpec:
    command: str
    out: Path
    scenario: Path | None = None
    seed: int = 0
    dynamics: tuple = dynamics.KINDS
    eta: float = 0.1
    dt: float = 1e-3
    t_end: float = 6.0
    incentive_window: tuple | None = None
    record_every: int = 10
    sweep_n: tuple = DEFAULT_SWEEP
    lower_bound: float | None = None
    svg: bool = False
    files: dict = field(default_factory=dict)

    def config(self, kind: str) -> dynamics.DynamicsConfig:
        return dynamics.DynamicsConfig(
            kind=kind,
            eta=self.eta,
            dt=self.dt,
            t_end=self.t_end,
            incentive_window=self.incentive_window,
            record_every=self.record_every,
        )


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("DRMECH_THREADS", "1")))
    except ValueError:
        return 1


def _csv_list(cast):
    def parse(text):
        try:
            return tuple(cast(v) for v in text.split(",") if v.strip())
        except ValueError:
            raise argparse.ArgumentTypeError(f"cannot parse {text!r}") from None

    return parse


def _seed(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="drmech", description="Demand-response market game simulator.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--scenario", type=Path, help="TOML scenario file (default: bundled five-consumer day)")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--dynamics", type=_csv_list(str), default=dynamics.KINDS)
    p.add_argument("--eta", type=float, default=0.1, help="logit noise level")
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--t-end", type=float, default=6.0)
    p.add_argument("--record-every", type=int, default=10)
    p.add_argument("--incentive-window", type=_csv_list(float), help="t_on,t_off; incentives always on when omitted")
    p.add_argument("--sweep-n", type=_csv_list(int), default=DEFAULT_SWEEP)
    p.add_argument("--lower-bound", type=float, help="uniform lower bound m_i on every consumer and period")
    p.add_argument("--svg", action="store_true", help="also write SVG charts (needs matplotlib)")
    return p


def spec_from_args(args) -> RunSpec:
    window = args.incentive_window
    if window is not None and len(window) != 2:
        raise ValueError("--incentive-window takes two numbers t_on,t_off")
    spec = RunSpec(
        command=args.command,
        out=args.out,
        scenario=args.scenario,
        seed=args.seed,
        dynamics=tuple(args.dynamics),
        eta=args.eta,
        dt=args.dt,
        t_end=args.t_end,
        incentive_window=window,
        record_every=args.record_every,
        sweep_n=tuple(args.sweep_n),
        lower_bound=args.lower_bound,
        svg=args.svg,
    )
    if not spec.dynamics:
        raise ValueError("--dynamics needs at least one name")
    for kind in spec.dynamics:
        spec.config(kind)  # raises ValueError on bad settings
    return spec


class _Invalid(Exception):
    pass


def _load(spec: RunSpec):
    sc = default_scenario() if spec.scenario is None else load_scenario(spec.scenario)
    if spec.lower_bound is not None:
        sc = sc.with_bounds(lower=spec.lower_bound, upper=sc.upper_bounds)
    problems = validate_scenario(sc)
    if problems:
        raise _Invalid("; ".join(problems))
    return sc


def _equilibria(spec, sc):
    results = [equilibrium.social_optimum(sc), equilibrium.nash_equilibrium(sc)]
    if sc.n_consumers >= 2:
        results.append(equilibrium.nash_equilibrium(sc, with_incentives=True))
    spec.files["equilibria.csv"] = equilibrium.write_csv(spec.out / "equilibria.csv", sc, results)
    with open(spec.out / "equilibria_summary.csv", "w", newline="") as fh:
        fh.write("kind,total,surplus,residual,iterations\n")
        for r in results:
            fh.write(
                f"{r.kind},{r.q.sum():.15g},{aggregate_surplus(sc, r.profile):.15g},"
                f"{r.residual:.6e},{r.iterations}\n"
            )
    spec.files["equilibria_summary.csv"] = len(results)


def _incentives(spec, sc):
    if sc.n_consumers < 2:
        raise _Invalid("the incentive mechanism needs at least two consumers")
    mu = equilibrium.social_optimum(sc)
    rep = incentives.incentive_report(sc, mu.profile)
    spec.files["incentives.csv"] = incentives.write_csv(spec.out / "incentives.csv", sc, rep)
    with open(spec.out / "incentives_summary.csv", "w", newline="") as fh:
        fh.write("period,total_incentive,equal_treatment,zero_when_uniform,monotone\n")
        for k in range(sc.n_periods):
            f = rep.fairness_ok[k]
            fh.write(f"{k + 1},{rep.incentives[:, k].sum():.15g},{int(f[0])},{int(f[1])},{int(f[2])}\n")
        f = rep.fairness_ok.all(axis=0)
        fh.write(f"all,{rep.total:.15g},{int(f[0])},{int(f[1])},{int(f[2])}\n")
    spec.files["incentives_summary.csv"] = sc.n_periods + 1


def _simulate(spec, sc):
    x0 = dynamics.initial_state(sc, seed=spec.seed)

    def one(kind):
        return kind, dynamics.integrate(sc, spec.config(kind), x0)

    with ThreadPoolExecutor(max_workers=min(_threads(), len(spec.dynamics))) as pool:
        trajs = dict(pool.map(one, spec.dynamics))
    for kind, tr in trajs.items():
        name = f"trajectory_{kind}.csv"
        spec.files[name] = dynamics.write_trajectory_csv(spec.out / name, tr)
        name = f"metrics_{kind}.csv"
        spec.files[name] = dynamics.write_metrics_csv(spec.out / name, tr)
    acc = analysis.accumulate_incentives(trajs)
    spec.files["cumulative_incentives.csv"] = analysis.write_accumulation_csv(spec.out / "cumulative_incentives.csv", acc)
    spec.files["incentive_shares.csv"] = analysis.write_shares_csv(spec.out / "incentive_shares.csv", acc)
    if spec.svg:
        from . import plots

        plots.simulation_svg(spec.out, trajs, acc)
        spec.files.update({"demand.svg": None, "cumulative_incentives.svg": None})


def _sweep(spec, sc):
    rows = analysis.ratio_sweep(sc, spec.sweep_n)
    spec.files["sweep.csv"] = analysis.write_sweep_csv(spec.out / "sweep.csv", rows)
    if spec.svg:
        from . import plots

        plots.sweep_svg(spec.out / "sweep.svg", rows)
        spec.files["sweep.svg"] = None


def _par(spec, sc):
    reports = []
    if spec.lower_bound is not None:
        reports.append((None, analysis.par_ratio(sc.with_bounds(upper=sc.upper_bounds))))
    reports.append((spec.lower_bound, analysis.par_ratio(sc)))
    spec.files["par.csv"] = analysis.write_par_csv(spec.out / "par.csv", reports)


HANDLERS = {"equilibria": _equilibria, "incentives": _incentives, "simulate": _simulate, "sweep": _sweep, "par": _par}


def run(spec: RunSpec) -> tuple[int, dict]:
    """Execute one command; returns the exit status and the manifest written next to the outputs."""
    try:
        sc = _load(spec)
    except ScenarioFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE, {}
    except (_Invalid, ValueError) as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID, {}
    spec.out.mkdir(parents=True, exist_ok=True)
    spec.files.clear()
    try:
        HANDLERS[spec.command](spec, sc)
    except _Invalid as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID, {}
    except (equilibrium.SolverError, dynamics.IntegrationError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER, {}
    manifest = {
        "command": spec.command,
        "seed": spec.seed,
        "files": [{"name": k, "rows": v} for k, v in sorted(spec.files.items())],
    }
    (spec.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return EXIT_OK, manifest


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on bad flags
    try:
        spec = spec_from_args(args)
    except ValueError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    status, manifest = run(spec)
    if status == EXIT_OK:
        for f in manifest["files"]:
            print(f"{spec.out / f['name']}  rows={f['rows']}")
    return status


if __name__ == "__main__":
    sys.exit(main())
