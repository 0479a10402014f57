"""Command-line scenario runner and JSON report emitter.

Exit codes: 0 all checks passed, 1 a violation was found (the report
embeds a replayable counterexample schedule), 2 usage error, 3 only
inconclusive outcomes (budgets exhausted without completing a single
execution).  Identical configurations produce byte-identical reports
when ``--no-meta`` strips the timestamp.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from typing import Optional

from .scheduler import explore, run_random, run_replay

SCENARIO_NAMES = [
    "pair-snapshot",
    "treiber",
    "producer-consumer",
    "flat-combiner",
    "seq-recovery",
    "laws",
    "concurroid-check",
    "action-check",
]

REPORT_VERSION = 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="histrio",
        description="Explore interleavings of fine-grained concurrent "
        "structures and check their history-based specifications.",
    )
    p.add_argument("--scenario", choices=SCENARIO_NAMES)
    p.add_argument("--mode", choices=["exhaustive", "random", "native"],
                   default="exhaustive")
    p.add_argument("--threads", type=int, default=3)
    p.add_argument("--ops-per-thread", type=int, default=3)
    p.add_argument("--step-bound", type=int, default=None)
    p.add_argument("--loop-bound", type=int, default=3)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--samples", type=int, default=500,
                   help="sample count for law/obligation checks")
    p.add_argument("--output", type=str, default=None)
    p.add_argument("--emit-trace", action="store_true")
    p.add_argument("--no-meta", action="store_true",
                   help="omit timing metadata for byte-identical reports")
    p.add_argument("--replay", type=str, default=None,
                   help="re-run the counterexample schedule from a report")
    return p


def _usage_error(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    print(build_parser().format_usage(), file=sys.stderr, end="")
    return 2


def _default_step_bound(name: str) -> int:
    return {
        "pair-snapshot": 40,
        "treiber": 60,
        "producer-consumer": 60,
        "flat-combiner": 120,
        "seq-recovery": 30,
    }.get(name, 60)


def _build_scenario(name: str, args):
    from . import scenarios as S

    if name == "pair-snapshot":
        return S.pair_snapshot_scenario(writers=max(1, args.threads - 1))
    if name == "treiber":
        elems = tuple("abcdef"[: max(1, args.threads - 1)])
        return S.treiber_scenario(pushers=len(elems), elems=elems)
    if name == "producer-consumer":
        return S.producer_consumer_scenario(n=args.ops_per_thread)
    if name == "flat-combiner":
        return S.flat_combiner_scenario(threads=args.threads)
    if name == "seq-recovery":
        return S.seq_recovery_scenario()
    raise ValueError(name)


def _all_action_families():
    from .structures import flatcombiner, private_heap, snapshot, spinlock, treiber

    return (
        snapshot.action_families()
        + private_heap.action_families()
        + treiber.action_families()
        + spinlock.action_families()
        + flatcombiner.action_families()
    )


def _all_concurroids():
    from .structures import flatcombiner, private_heap, snapshot, spinlock, treiber

    return [
        snapshot.concurroid(),
        private_heap.concurroid(),
        treiber.concurroid(),
        spinlock.concurroid(),
        flatcombiner.concurroid(flatcombiner.stack_shape(3)),
    ]


def _run_laws(args) -> dict:
    import random

    from .pcm import SHIPPED_INSTANCES, check_pcm_laws

    rng = random.Random(args.seed if args.seed is not None else 0)
    suites = []
    ok = True
    for inst in SHIPPED_INSTANCES:
        rep = check_pcm_laws(inst, max(1, args.samples), rng)
        suites.append(rep.as_dict())
        ok = ok and rep.ok
    return {
        "verdict": "pass" if ok else "violation",
        "interleavings": 0,
        "violations": [s for s in suites if not s["ok"]],
        "stats": {"suites": suites},
    }


def _run_concurroid_check(args) -> dict:
    import random

    from .concurroid import check_concurroid

    rng = random.Random(args.seed if args.seed is not None else 0)
    rows = []
    ok = True
    for conc in _all_concurroids():
        for rep in check_concurroid(conc, max(1, args.samples), rng):
            row = rep.as_dict()
            row["concurroid"] = conc.name
            rows.append(row)
            ok = ok and rep.ok
    return {
        "verdict": "pass" if ok else "violation",
        "interleavings": 0,
        "violations": [r for r in rows if not r["ok"]],
        "stats": {"checks": len(rows)},
    }


def _run_action_check(args) -> dict:
    import random

    from .actions import check_action_properties

    rows = []
    ok = True
    for fam in _all_action_families():
        rng = random.Random(args.seed if args.seed is not None else 0)
        for rep in check_action_properties(fam, max(1, args.samples), rng):
            row = rep.as_dict()
            rows.append(row)
            ok = ok and rep.ok
    return {
        "verdict": "pass" if ok else "violation",
        "interleavings": 0,
        "violations": [r for r in rows if not r["ok"]],
        "stats": {"checks": len(rows)},
    }


def _emit(report: dict, args) -> None:
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    print(text)


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)

    if args.replay:
        return _do_replay(args)

    if args.scenario is None:
        return _usage_error("--scenario is required")
    if args.mode in ("random", "native") and args.seed is None:
        env_seed = os.environ.get("HISTRIO_SEED")
        if env_seed is None:
            return _usage_error(f"mode {args.mode!r} requires --seed "
                                "(or HISTRIO_SEED)")
        args.seed = int(env_seed)

    config = {
        "scenario": args.scenario,
        "mode": args.mode,
        "threads": args.threads,
        "ops_per_thread": args.ops_per_thread,
        "step_bound": args.step_bound,
        "loop_bound": args.loop_bound,
        "seed": args.seed,
        "samples": args.samples,
    }
    started = time.time()

    if args.scenario == "laws":
        body = _run_laws(args)
    elif args.scenario == "concurroid-check":
        body = _run_concurroid_check(args)
    elif args.scenario == "action-check":
        body = _run_action_check(args)
    elif args.mode == "native":
        if args.scenario != "treiber":
            return _usage_error("native mode supports only the treiber scenario")
        from .native import stress

        rep = stress(threads=args.threads, ops=args.ops_per_thread, seed=args.seed)
        body = {
            "verdict": rep.verdict,
            "interleavings": 0,
            "violations": rep.violations,
            "stats": rep.as_dict(),
        }
    else:
        scenario = _build_scenario(args.scenario, args)
        step_bound = args.step_bound or _default_step_bound(args.scenario)
        config["step_bound"] = step_bound  # exhaustive mode always runs bounded
        if args.mode == "exhaustive":
            rep = explore(scenario, step_bound, args.loop_bound)
            body = rep.as_dict()
            body["interleavings"] = rep.interleavings
        else:
            trace = run_random(scenario, args.seed, step_bound, args.loop_bound)
            body = {
                "verdict": trace.verdict,
                "interleavings": 1 if trace.verdict == "pass" else 0,
                "violations": [v.as_dict() for v in trace.violations],
                "stats": {"steps": len(trace.events)},
                "schedule": list(trace.schedule),
            }
            if args.emit_trace and args.output:
                with open(args.output + ".trace.json", "w") as fh:
                    json.dump(trace.as_dict(), fh, indent=2, sort_keys=True)

    report = {
        "version": REPORT_VERSION,
        "config": config,
        **body,
    }
    if not args.no_meta:
        report["meta"] = {"elapsed_s": round(time.time() - started, 3)}
    _emit(report, args)

    if report["verdict"] == "violation":
        return 1
    if report["verdict"] == "inconclusive":
        return 3
    return 0


def _do_replay(args) -> int:
    try:
        with open(args.replay) as fh:
            old = json.load(fh)
    except OSError as exc:
        return _usage_error(f"cannot read replay file: {exc}")
    cfg = old.get("config", {})
    name = cfg.get("scenario")
    if name not in SCENARIO_NAMES or name in ("laws", "concurroid-check", "action-check"):
        return _usage_error("replay file does not name a runnable scenario")
    schedule = None
    for v in old.get("violations", []):
        if isinstance(v, dict) and v.get("schedule"):
            schedule = v["schedule"]
            break
    if schedule is None:
        schedule = old.get("schedule")
    if not schedule:
        return _usage_error("replay file carries no schedule")

    ns = argparse.Namespace(**{**vars(args), **{
        "threads": cfg.get("threads", 3),
        "ops_per_thread": cfg.get("ops_per_thread", 3),
    }})
    scenario = _build_scenario(name, ns)
    trace = run_replay(scenario, schedule, cfg.get("loop_bound", 3))
    report = {
        "version": REPORT_VERSION,
        "config": {**cfg, "mode": "replay"},
        "verdict": trace.verdict,
        "interleavings": 0,
        "violations": [v.as_dict() for v in trace.violations],
        "stats": {"steps": len(trace.events)},
    }
    if not args.no_meta:
        report["meta"] = {"elapsed_s": 0.0}
    _emit(report, args)
    return 1 if trace.verdict == "violation" else (0 if trace.verdict == "pass" else 3)


if __name__ == "__main__":
    sys.exit(main())
