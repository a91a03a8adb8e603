"""Command-line surface: scenario files in, CSV/JSON artifacts out.

Scenario files are JSON documents (conventionally ``*.scenario``) holding
the mission, targets, agents with their initial switching-point and dwell
vectors, the information mode, numerics, and optimizer settings. All
emitted files are byte-deterministic for fixed inputs; wall-clock timings
go to stdout only.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from .descent import OptimizerConfig, optimize
from .fdcheck import grad_check
from .model import (AgentSpec, InfoMode, Numerics, Scenario, ScenarioError,
                    Target)
from .policy import AgentParams
from .sim import SimRecord, simulate
from .visibility import mode_gradients, visible_events

SCHEMA_VERSION = 1


def _fnum(v: float) -> str:
    """Shortest round-trip decimal; negative zero normalized away."""
    return repr(float(v) + 0.0)


# -- scenario & params files -------------------------------------------------

def _need(doc: dict, key: str, path: str):
    if key not in doc:
        raise ScenarioError(f"{path}.{key}", "missing required field")
    return doc[key]


def load_scenario(path: str | Path) -> tuple[Scenario, list[AgentParams], OptimizerConfig]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioError(str(path), f"line {exc.lineno}, column {exc.colno}: {exc.msg}")
    except OSError as exc:
        raise ScenarioError(str(path), str(exc))

    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ScenarioError("schema_version", f"expected {SCHEMA_VERSION}, got {version}")
    mission = _need(doc, "mission", "")
    L = float(_need(mission, "L", "mission"))
    T = float(_need(mission, "T", "mission"))

    targets = []
    for i, td in enumerate(_need(doc, "targets", "")):
        targets.append(Target(index=i, x=float(_need(td, "x", f"targets[{i}]")),
                              growth=float(_need(td, "A", f"targets[{i}]")),
                              decay=float(_need(td, "B", f"targets[{i}]")),
                              r0=float(_need(td, "R0", f"targets[{i}]"))))
    r_comm = float(doc.get("r_c", 0.0))
    agents, params = [], []
    for j, ad in enumerate(_need(doc, "agents", "")):
        agents.append(AgentSpec(index=j, s0=float(_need(ad, "s0", f"agents[{j}]")),
                                u0=int(ad.get("u0", 1)),
                                r=float(_need(ad, "r", f"agents[{j}]")),
                                r_comm=float(ad.get("r_c", r_comm))))
        theta = np.asarray(ad.get("theta0", []), dtype=float)
        w = np.asarray(ad.get("w0", []), dtype=float)
        if theta.size != w.size:
            raise ScenarioError(f"agents[{j}]",
                                f"theta0 has {theta.size} entries but w0 has {w.size}")
        params.append(AgentParams(theta, w))

    mode_name = doc.get("mode", "CENTRALIZED")
    try:
        mode = InfoMode[mode_name]
    except KeyError:
        raise ScenarioError("mode", f"unknown information mode {mode_name!r}")
    nd = doc.get("numerics", {})
    numerics = Numerics(h=float(nd.get("h", 1e-3)),
                        eps_event=float(nd.get("eps_event", 1e-9)),
                        sample_dt=float(nd.get("sample_dt", 0.1)))
    scenario = Scenario(L=L, T=T, targets=tuple(targets), agents=tuple(agents),
                        mode=mode, numerics=numerics,
                        local_reentry_reset=bool(doc.get("local_reentry_reset", True)))
    scenario.validate()
    for j, p in enumerate(params):
        try:
            p.validate(L, path=f"agents[{j}]")
        except ValueError as exc:
            raise ScenarioError(f"agents[{j}]", str(exc))

    od = doc.get("optimizer", {})
    opt = OptimizerConfig(a_theta=float(od.get("a_theta", 0.2)),
                          a_w=float(od.get("a_w", 0.2)),
                          eta=float(od.get("eta", 0.6)),
                          epsilon=float(od.get("epsilon", 1e-4)),
                          max_iters=int(od.get("max_iters", 200)))
    return scenario, params, opt


def load_params(path: str | Path, scenario: Scenario) -> list[AgentParams]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioError(str(path), f"line {exc.lineno}, column {exc.colno}: {exc.msg}")
    rows = _need(doc, "agents", "params")
    if len(rows) != scenario.n_agents:
        raise ScenarioError("params.agents",
                            f"{len(rows)} entries for {scenario.n_agents} agents")
    out = []
    for j, row in enumerate(rows):
        p = AgentParams(np.asarray(row["theta"], dtype=float),
                        np.asarray(row["w"], dtype=float))
        p.validate(scenario.L, path=f"params.agents[{j}]")
        out.append(p)
    return out


def dump_params(params, path: str | Path) -> None:
    doc = {"schema_version": SCHEMA_VERSION,
           "agents": [{"theta": [float(v) + 0.0 for v in p.theta],
                       "w": [float(v) + 0.0 for v in p.w]} for p in params]}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- artifact writers ----------------------------------------------------------

def write_trajectory_csv(record: SimRecord, path: Path) -> None:
    sc = record.scenario
    head = (["t"]
            + [f"s_{j + 1}" for j in range(sc.n_agents)]
            + [f"u_{j + 1}" for j in range(sc.n_agents)]
            + [f"R_{i + 1}" for i in range(sc.n_targets)]
            + [f"P_{i + 1}" for i in range(sc.n_targets)])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(head)
        for k in range(record.sample_t.size):
            row = ([_fnum(record.sample_t[k])]
                   + [_fnum(v) for v in record.sample_s[k]]
                   + [_fnum(v) for v in record.sample_u[k]]
                   + [_fnum(v) for v in record.sample_R[k]]
                   + [_fnum(v) for v in record.sample_P[k]])
            wr.writerow(row)


def _event_row(ev) -> list[str]:
    return [_fnum(ev.time), ev.kind.value,
            "" if ev.agent is None else str(ev.agent),
            "" if ev.target is None else str(ev.target),
            ev.payload_str()]


def write_events_csv(record: SimRecord, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["time", "kind", "agent", "target", "payload"])
        for ev in record.events:
            wr.writerow(_event_row(ev))


def write_audit_csv(record: SimRecord, agent: int, mode: InfoMode, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["time", "kind", "agent", "target", "payload", "visibility"])
        for ev, reason in visible_events(record, agent, mode):
            wr.writerow(_event_row(ev) + [reason])


def _gradient_block(record: SimRecord, mode: InfoMode) -> list[dict]:
    grads = mode_gradients(record, mode)
    return [{"theta_grad": [float(v) + 0.0 for v in g.theta],
             "w_grad": [float(v) + 0.0 for v in g.w]} for g in grads]


def write_summary(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- commands ------------------------------------------------------------------

def cmd_simulate(args) -> int:
    scenario, params, _ = load_scenario(args.scenario)
    if args.mode:
        scenario = _with_mode(scenario, InfoMode[args.mode])
    if args.params:
        params = load_params(args.params, scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    record = simulate(scenario, params)
    wall = time.perf_counter() - t0
    write_trajectory_csv(record, out / "trajectory.csv")
    write_events_csv(record, out / "events.csv")
    if args.audit_events:
        for j in range(scenario.n_agents):
            write_audit_csv(record, j, scenario.mode, out / f"audit_events_agent{j}.csv")
    summary = {
        "command": "simulate",
        "schema_version": SCHEMA_VERSION,
        "J": float(record.J) + 0.0,
        "mode": scenario.mode.value,
        "n_intervals": len(record.intervals),
        "event_counts": record.event_counts(),
        "gradient": _gradient_block(record, scenario.mode),
    }
    write_summary(out / "summary.json", summary)
    print(f"J = {record.J:.6f}  ({len(record.events)} events, "
          f"{len(record.intervals)} intervals, {wall:.2f}s)")
    return 0


def _with_mode(scenario: Scenario, mode: InfoMode) -> Scenario:
    return Scenario(L=scenario.L, T=scenario.T, targets=scenario.targets,
                    agents=scenario.agents, mode=mode, numerics=scenario.numerics,
                    local_reentry_reset=scenario.local_reentry_reset)


def cmd_optimize(args) -> int:
    scenario, params, opt = load_scenario(args.scenario)
    if args.mode:
        scenario = _with_mode(scenario, InfoMode[args.mode])
    if args.iters is not None:
        opt = OptimizerConfig(a_theta=opt.a_theta, a_w=opt.a_w, eta=opt.eta,
                              epsilon=opt.epsilon, max_iters=args.iters)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ckpt_dir = out / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)
    t0 = time.perf_counter()
    run = optimize(scenario, params, opt)
    wall = time.perf_counter() - t0

    n_agents = scenario.n_agents
    with open(out / "cost_history.csv", "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["iteration", "J"] + [f"grad_norm_{j + 1}" for j in range(n_agents)])
        for l, (J, norms) in enumerate(zip(run.costs, run.grad_norms)):
            wr.writerow([str(l), _fnum(J)] + [_fnum(v) for v in norms])
    every = max(1, args.checkpoint_every)
    for l, ps in enumerate(run.params_history):
        if l % every == 0 or l == len(run.params_history) - 1:
            dump_params(ps, ckpt_dir / f"params_iter{l:04d}.json")
    dump_params(run.final_params, out / "params_final.json")
    if args.audit_events and run.final_record is not None:
        for j in range(n_agents):
            write_audit_csv(run.final_record, j, scenario.mode,
                            out / f"audit_events_agent{j}.csv")
    summary = {
        "command": "optimize",
        "schema_version": SCHEMA_VERSION,
        "mode": scenario.mode.value,
        "termination": run.termination,
        "iterations": run.iterations,
        "J_initial": float(run.costs[0]) + 0.0,
        "J_final": float(run.costs[-1]) + 0.0,
        "cost_recorded_before_update": True,
        "step_schedule": {"a_theta": opt.a_theta, "a_w": opt.a_w, "eta": opt.eta},
    }
    write_summary(out / "summary.json", summary)
    print(f"{run.termination} after {run.iterations} iterations: "
          f"J {run.costs[0]:.4f} -> {run.costs[-1]:.4f}  ({wall:.1f}s)")
    return 0


def cmd_gradcheck(args) -> int:
    scenario, params, _ = load_scenario(args.scenario)
    if args.params:
        params = load_params(args.params, scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    report = grad_check(scenario, params, tol=args.tol)
    wall = time.perf_counter() - t0
    report.save(out / "fd_report.json")
    print(report.table())
    print(f"({wall:.1f}s)")
    return 0 if report.pass_rate() >= args.threshold else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="persimon",
        description="1D multi-agent persistent monitoring: simulate, optimize, "
                    "and validate event-driven gradients.")
    sub = ap.add_subparsers(dest="command", required=True)
    modes = [m.name for m in InfoMode]

    sim = sub.add_parser("simulate", help="integrate one trajectory and emit logs")
    sim.add_argument("--scenario", required=True)
    sim.add_argument("--params", help="params JSON overriding the scenario's initial vectors")
    sim.add_argument("--out", required=True)
    sim.add_argument("--mode", choices=modes)
    sim.add_argument("--audit-events", action="store_true")
    sim.add_argument("--seed", type=int, help="reserved")
    sim.set_defaults(fn=cmd_simulate)

    opt = sub.add_parser("optimize", help="gradient descent over trajectory parameters")
    opt.add_argument("--scenario", required=True)
    opt.add_argument("--out", required=True)
    opt.add_argument("--mode", choices=modes)
    opt.add_argument("--iters", type=int)
    opt.add_argument("--checkpoint-every", type=int, default=50)
    opt.add_argument("--audit-events", action="store_true")
    opt.add_argument("--seed", type=int, help="reserved")
    opt.set_defaults(fn=cmd_optimize)

    gc = sub.add_parser("gradcheck", help="validate gradients against finite differences")
    gc.add_argument("--scenario", required=True)
    gc.add_argument("--params")
    gc.add_argument("--out", required=True)
    gc.add_argument("--tol", type=float, default=1e-2)
    gc.add_argument("--threshold", type=float, default=0.95,
                    help="required pass rate on smooth coordinates")
    gc.add_argument("--seed", type=int, help="reserved")
    gc.set_defaults(fn=cmd_gradcheck)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ScenarioError as exc:
        print(f"invalid scenario: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
