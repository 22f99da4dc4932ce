"""Operator-facing command line.

Subcommands: search, baselines, enumerate, pareto, cost, scale, reward-eval.
Configuration is a single JSON document (--config) with CLI flags taking
precedence. Runs emit ledger.jsonl, checkpoint.json, pareto.csv and
summary.json into the output directory; plots are not rendered, everything
is CSV/JSON for downstream tooling.

Exit codes: 0 ok, 2 config error, 3 evaluator error, 4 guard violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from . import codec
from .arch import load_arch, propagate_shapes, skeleton_problems
from .controller import (
    SearchConfig,
    ledger_record,
    load_checkpoint,
    run_search,
    write_ledger_lines,
)
from .cost import apply_depth_multiplier, apply_input_size, estimate_latency
from .errors import (
    ExternalEvaluatorFailure,
    LatnasError,
    ProtocolViolation,
    ShapeUnderflow,
    SpaceTooLarge,
)
from .evaluators import (
    ExternalEvaluator,
    ProfileLatency,
    SurrogateAccuracy,
    SurrogateConfig,
    arch_identifier,
    evaluate,
    surrogate_accuracy,
)
from .pareto import Point, extract_front
from .reward import Measurement, RewardConfig, reward
from .skeletons import get_profile, get_skeleton, mobile_baseline_arch

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_EVALUATOR = 3
EXIT_GUARD = 4

DEFAULT_ENUM_LIMIT = 1_000_000
DEFAULT_TOP_K = 15


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# run configuration


def _reward_config(doc: dict) -> RewardConfig:
    target = float(doc.get("target_latency_ms", 80.0))
    mode = doc.get("mode", "soft")
    if mode == "hard":
        return RewardConfig.hard(target)
    if mode == "soft":
        return RewardConfig.soft(target, float(doc.get("alpha", -0.07)))
    return RewardConfig.custom(target, float(doc["alpha"]), float(doc["beta"]))


def load_run_config(args) -> dict:
    doc: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None

    cfg = {
        "skeleton": doc.get("skeleton", "builtin:tiny"),
        "device_profile": doc.get("device_profile", "builtin:default"),
        "reward": doc.get("reward", {}),
        "search": dict(doc.get("search", {})),
        "evaluator": doc.get("evaluator", {"kind": "surrogate"}),
        "output_dir": doc.get("output_dir", "latnas-run"),
        "top_k": int(doc.get("top_k", DEFAULT_TOP_K)),
    }
    # flags win over the config document
    for flag, key in (("skeleton", "skeleton"), ("profile", "device_profile"),
                      ("output_dir", "output_dir")):
        value = getattr(args, flag, None)
        if value is not None:
            cfg[key] = value
    search = cfg["search"]
    if getattr(args, "budget", None) is not None:
        search["total_samples"] = args.budget
    if getattr(args, "batch", None) is not None:
        search["batch_size"] = args.batch
    if getattr(args, "update_rule", None) is not None:
        search["update_rule"] = args.update_rule
    if getattr(args, "seed", None) is not None:
        search["seed"] = args.seed
    if getattr(args, "evaluator_cmd", None) is not None:
        cfg["evaluator"] = {"kind": "external", "cmd": args.evaluator_cmd,
                            "timeout_s": args.evaluator_timeout_s}
    return cfg


def _build_sources(cfg: dict, profile):
    lat_source = ProfileLatency(profile)
    ev = cfg["evaluator"]
    kind = ev.get("kind", "surrogate")
    if kind == "surrogate":
        sur = ev.get("surrogate", {})
        acc_source = SurrogateAccuracy(SurrogateConfig(**sur))
    elif kind == "external":
        acc_source = ExternalEvaluator(ev["cmd"],
                                       timeout_s=float(ev.get("timeout_s", 3600.0)))
    else:
        raise ConfigError(f"unknown evaluator kind {kind!r}")
    return acc_source, lat_source


def _load_skeleton_checked(ref: str):
    skeleton = get_skeleton(ref)
    problems = skeleton_problems(skeleton)
    if problems:
        raise ConfigError(f"skeleton {skeleton.name!r}: " + "; ".join(problems))
    return skeleton


def _write_reports(out_dir: str, ledger: list[dict], top_k: int,
                   wall_time_s: float) -> None:
    best: dict[str, dict] = {}
    for rec in ledger:
        cur = best.get(rec["arch_id"])
        if cur is None or rec["reward"] > cur["reward"]:
            best[rec["arch_id"]] = rec
    front = extract_front(
        Point(r["arch_id"], r["accuracy"], r["latency_ms"]) for r in best.values())
    by_id = {r["arch_id"]: r for r in best.values()}

    with open(os.path.join(out_dir, "pareto.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["arch_id", "accuracy", "latency_ms", "tokens"])
        for p in front.points:
            toks = " ".join(str(t) for t in by_id[p.arch_id]["tokens"])
            w.writerow([p.arch_id, p.accuracy, p.latency_ms, toks])

    ranked = sorted(best.values(), key=lambda r: (-r["reward"], r["arch_id"]))
    best_rec = ranked[0] if ranked else None
    summary = {
        "summary_version": 1,
        "samples": len(ledger),
        "best_reward": best_rec["reward"] if best_rec else None,
        "best_arch_id": best_rec["arch_id"] if best_rec else None,
        "front_size": len(front.points),
        "wall_time_s": wall_time_s,
        "top_k": [
            {k: r[k] for k in ("arch_id", "reward", "accuracy", "latency_ms", "tokens")}
            for r in ranked[:top_k]
        ],
    }
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_search(args) -> int:
    cfg = load_run_config(args)
    skeleton = _load_skeleton_checked(cfg["skeleton"])
    profile = get_profile(cfg["device_profile"])
    reward_cfg = _reward_config(cfg["reward"])
    search_cfg = SearchConfig(**cfg["search"])
    acc_source, lat_source = _build_sources(cfg, profile)

    out_dir = cfg["output_dir"]
    os.makedirs(out_dir, exist_ok=True)
    resume = load_checkpoint(args.resume) if args.resume else None
    ledger_path = os.path.join(out_dir, "ledger.jsonl")
    mode = "a" if resume else "w"
    start = time.perf_counter()
    with open(ledger_path, mode) as ledger_fh:
        state = run_search(
            skeleton, reward_cfg, search_cfg, acc_source, lat_source,
            parallelism=args.parallelism, resume=resume, ledger_fh=ledger_fh,
            checkpoint_path=os.path.join(out_dir, "checkpoint.json"))
    wall = time.perf_counter() - start

    with open(ledger_path) as fh:
        full_ledger = [json.loads(line) for line in fh]
    _write_reports(out_dir, full_ledger, cfg["top_k"], wall)
    print(f"search done: {state.samples} samples, ledger {ledger_path}")
    return EXIT_OK


def _uniform_tokens(arities, rng) -> tuple[int, ...]:
    return tuple(int(rng.integers(a)) for a in arities)


def _baseline_eval(tokens, skeleton, reward_cfg, acc_source, lat_source,
                   step, index):
    arch = codec.decode(tokens, skeleton)
    arch_id = arch_identifier(arch)
    ev = evaluate(arch, acc_source, lat_source, arch_id=arch_id, tokens=tokens)
    r = reward(Measurement(ev.accuracy, ev.latency_ms), reward_cfg)
    return ledger_record(step, index, arch_id, tokens, ev, r)


def cmd_baselines(args) -> int:
    cfg = load_run_config(args)
    skeleton = _load_skeleton_checked(cfg["skeleton"])
    profile = get_profile(cfg["device_profile"])
    reward_cfg = _reward_config(cfg["reward"])
    search_cfg = SearchConfig(**cfg["search"])
    acc_source, lat_source = _build_sources(cfg, profile)
    arities = codec.slot_arities(skeleton)
    budget = search_cfg.total_samples
    rng = np.random.default_rng(search_cfg.seed)

    out_dir = cfg["output_dir"]
    os.makedirs(out_dir, exist_ok=True)
    ledger: list[dict] = []
    start = time.perf_counter()
    with open(os.path.join(out_dir, "ledger.jsonl"), "w") as fh:
        if args.strategy == "random":
            for i in range(budget):
                rec = _baseline_eval(_uniform_tokens(arities, rng), skeleton,
                                     reward_cfg, acc_source, lat_source,
                                     i // search_cfg.batch_size, i)
                ledger.append(rec)
                write_ledger_lines(fh, [rec])
        else:  # evolution
            pop_size = min(args.population, budget)
            population: list[tuple[tuple[int, ...], float]] = []
            for i in range(pop_size):
                rec = _baseline_eval(_uniform_tokens(arities, rng), skeleton,
                                     reward_cfg, acc_source, lat_source, 0, i)
                ledger.append(rec)
                write_ledger_lines(fh, [rec])
                population.append((tuple(rec["tokens"]), rec["reward"]))
            for i in range(pop_size, budget):
                contenders = rng.choice(len(population),
                                        size=min(args.tournament, len(population)),
                                        replace=False)
                parent = max((population[int(c)] for c in contenders),
                             key=lambda pr: pr[1])[0]
                child = list(parent)
                if rng.random() < args.mutation_rate:
                    slot = int(rng.integers(len(arities)))
                    child[slot] = int(rng.integers(arities[slot]))
                rec = _baseline_eval(tuple(child), skeleton, reward_cfg,
                                     acc_source, lat_source, i, i)
                ledger.append(rec)
                write_ledger_lines(fh, [rec])
                worst = min(range(len(population)), key=lambda j: population[j][1])
                if rec["reward"] >= population[worst][1]:
                    population[worst] = (tuple(rec["tokens"]), rec["reward"])
    wall = time.perf_counter() - start
    _write_reports(out_dir, ledger, cfg["top_k"], wall)
    print(f"{args.strategy} baseline done: {budget} samples in {out_dir}")
    return EXIT_OK


def cmd_enumerate(args) -> int:
    skeleton = _load_skeleton_checked(args.skeleton)
    profile = get_profile(args.profile)
    n = codec.cardinality(skeleton)
    if n > args.limit:
        raise SpaceTooLarge(f"cardinality {n} exceeds limit {args.limit}")
    out = open(args.out, "w") if args.out else sys.stdout
    try:
        for tokens, arch in codec.enumerate_space(skeleton):
            cost = estimate_latency(arch, profile)
            out.write(json.dumps({
                "tokens": list(tokens),
                "arch_id": arch_identifier(arch),
                "macs": cost.total_macs,
                "params": cost.total_params,
                "latency_ms": cost.total_latency_ms,
            }) + "\n")
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def cmd_pareto(args) -> int:
    with open(args.ledger) as fh:
        records = [json.loads(line) for line in fh]
    best: dict[str, dict] = {}
    for rec in records:
        cur = best.get(rec["arch_id"])
        if cur is None or rec["reward"] > cur["reward"]:
            best[rec["arch_id"]] = rec
    front = extract_front(
        Point(r["arch_id"], r["accuracy"], r["latency_ms"]) for r in best.values())
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(["arch_id", "accuracy", "latency_ms", "tokens"])
        for p in front.points:
            toks = " ".join(str(t) for t in best[p.arch_id]["tokens"])
            w.writerow([p.arch_id, p.accuracy, p.latency_ms, toks])
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def _load_arch_ref(ref: str):
    if ref == "builtin:mobile-baseline":
        return mobile_baseline_arch()
    return load_arch(ref)


def cmd_cost(args) -> int:
    arch = _load_arch_ref(args.arch)
    profile = get_profile(args.profile)
    breakdown = estimate_latency(arch, profile)
    if args.format == "json":
        doc = {
            "arch_id": arch_identifier(arch),
            "total_macs": breakdown.total_macs,
            "total_params": breakdown.total_params,
            "total_latency_ms": breakdown.total_latency_ms,
            "per_layer": [
                {"label": e.label, "conv_op": e.conv_op, "macs": e.macs,
                 "params": e.params, "latency_ms": e.latency_ms}
                for e in breakdown.per_layer
            ],
        }
        print(json.dumps(doc, indent=2))
    else:
        print(f"{'layer':<12}{'op':<10}{'macs':>14}{'params':>12}{'latency_ms':>12}")
        for e in breakdown.per_layer:
            print(f"{e.label:<12}{e.conv_op:<10}{e.macs:>14}{e.params:>12}"
                  f"{e.latency_ms:>12.4f}")
        print(f"{'total':<22}{breakdown.total_macs:>14}{breakdown.total_params:>12}"
              f"{breakdown.total_latency_ms:>12.4f}")
    return EXIT_OK


def cmd_scale(args) -> int:
    arch = _load_arch_ref(args.arch)
    profile = get_profile(args.profile)
    multipliers = [float(x) for x in args.multipliers.split(",")]
    sizes = [int(x) for x in args.input_sizes.split(",")] if args.input_sizes \
        else [arch.input_resolution]
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out)
        header = ["depth_multiplier", "input_size", "macs", "params", "latency_ms"]
        if args.with_surrogate:
            header.append("surrogate_accuracy")
        w.writerow(header)
        for d in multipliers:
            scaled_d = apply_depth_multiplier(arch, d)
            for r in sizes:
                try:
                    scaled = apply_input_size(scaled_d, r)
                except ShapeUnderflow:
                    w.writerow([d, r, "underflow", "underflow", "underflow"]
                               + (["underflow"] if args.with_surrogate else []))
                    continue
                cost = estimate_latency(scaled, profile)
                row = [d, r, cost.total_macs, cost.total_params,
                       cost.total_latency_ms]
                if args.with_surrogate:
                    row.append(surrogate_accuracy(scaled, SurrogateConfig()))
                w.writerow(row)
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def cmd_reward_eval(args) -> int:
    cfg = _reward_config({
        "target_latency_ms": args.target, "mode": args.mode,
        "alpha": args.alpha, "beta": args.beta,
    })
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out)
        if args.sweep:
            # objective-shape grid at fixed accuracy, for plotting
            lats = [args.sweep_min + i * (args.sweep_max - args.sweep_min) / 199
                    for i in range(200)]
            w.writerow(["latency_ms", "reward"])
            for lat in lats:
                w.writerow([lat, reward(Measurement(args.accuracy, lat), cfg)])
        else:
            with open(args.pairs) as fh:
                reader = csv.DictReader(fh)
                w.writerow(["accuracy", "latency_ms", "reward"])
                for row in reader:
                    acc = float(row["accuracy"])
                    lat = float(row["latency_ms"])
                    w.writerow([acc, lat, reward(Measurement(acc, lat), cfg)])
    finally:
        if args.out:
            out.close()
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latnas",
        description="Latency-aware architecture search over factorized block spaces")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_flags(p):
        p.add_argument("--config", help="run-config JSON; flags override it")
        p.add_argument("--skeleton", help="skeleton JSON path or builtin:<name>")
        p.add_argument("--profile", help="device profile path or builtin:<name>")
        p.add_argument("--output-dir", dest="output_dir")
        p.add_argument("--budget", type=int, help="total samples to draw")
        p.add_argument("--batch", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--parallelism", type=int, default=1)
        p.add_argument("--evaluator-cmd", dest="evaluator_cmd",
                       help="external evaluator command")
        p.add_argument("--evaluator-timeout-s", dest="evaluator_timeout_s",
                       type=float, default=3600.0)

    p = sub.add_parser("search", help="run the policy-gradient search")
    add_run_flags(p)
    p.add_argument("--update-rule", choices=["reinforce", "ppo"], dest="update_rule")
    p.add_argument("--resume", help="checkpoint.json to continue from")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("baselines", help="random or evolutionary baseline search")
    add_run_flags(p)
    p.add_argument("--strategy", choices=["random", "evolution"], default="random")
    p.add_argument("--population", type=int, default=32)
    p.add_argument("--mutation-rate", dest="mutation_rate", type=float, default=1.0)
    p.add_argument("--tournament", type=int, default=3)
    p.set_defaults(func=cmd_baselines)

    p = sub.add_parser("enumerate", help="exhaustively list a small space")
    p.add_argument("--skeleton", required=True)
    p.add_argument("--profile", default="builtin:default")
    p.add_argument("--limit", type=int, default=DEFAULT_ENUM_LIMIT)
    p.add_argument("--out")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("pareto", help="extract the Pareto front from a ledger")
    p.add_argument("--ledger", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("cost", help="MACs/params/latency breakdown of an arch")
    p.add_argument("--arch", required=True,
                   help="arch JSON path or builtin:mobile-baseline")
    p.add_argument("--profile", default="builtin:default")
    p.add_argument("--format", choices=["json", "table"], default="table")
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("scale", help="depth-multiplier / input-size scaling grid")
    p.add_argument("--arch", required=True)
    p.add_argument("--profile", default="builtin:default")
    p.add_argument("--multipliers", default="0.35,0.5,0.75,1.0,1.3,1.4")
    p.add_argument("--input-sizes", dest="input_sizes", default="")
    p.add_argument("--with-surrogate", dest="with_surrogate", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_scale)

    p = sub.add_parser("reward-eval", help="reward for (accuracy, latency) pairs")
    p.add_argument("--pairs", help="CSV with accuracy,latency_ms columns")
    p.add_argument("--target", type=float, default=80.0)
    p.add_argument("--mode", choices=["hard", "soft", "custom"], default="soft")
    p.add_argument("--alpha", type=float, default=-0.07)
    p.add_argument("--beta", type=float, default=-0.07)
    p.add_argument("--sweep", action="store_true",
                   help="emit a latency->reward sweep instead of reading pairs")
    p.add_argument("--accuracy", type=float, default=0.5)
    p.add_argument("--sweep-min", dest="sweep_min", type=float, default=10.0)
    p.add_argument("--sweep-max", dest="sweep_max", type=float, default=300.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_reward_eval)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpaceTooLarge as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (ExternalEvaluatorFailure, ProtocolViolation) as exc:
        print(f"evaluator error: {exc}", file=sys.stderr)
        return EXIT_EVALUATOR
    except (ConfigError, LatnasError, ValueError, OSError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
