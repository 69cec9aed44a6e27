"""Command-line front end.

Subcommands: simulate, label, grad, sample, bench, gen. Each writes a CSV;
failures print a one-line JSON error record to stderr and exit nonzero
(2 for config/schema problems, 1 for runtime failures).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import replace

from . import config as config_mod
from .criteria import critical_times, label_dataset
from .dynamics import GainVector
from .engine import integrate
from .errors import ConfigError, FreqwalkError, SchemaError
from .sampler import augment, generate_initial
from .sensitivity import compare_methods, extract_gradients, finite_diff_gradients
from . import serialize


def _config_from_args(args) -> config_mod.RunConfig:
    if getattr(args, "config", None):
        cfg = config_mod.load_config(args.config)
    else:
        cfg = config_mod.RunConfig()
    p = cfg.params
    if getattr(args, "dt", None) is not None:
        p = replace(p, dt=args.dt)
    if getattr(args, "horizon", None) is not None:
        p = replace(p, horizon_t=args.horizon)
    cfg.params = p

    s = cfg.sampler
    if getattr(args, "alpha", None) is not None:
        s = replace(s, alpha=args.alpha)
    if getattr(args, "max_iter", None) is not None:
        s = replace(s, max_iter=args.max_iter)
    if getattr(args, "batch_size", None) is not None:
        s = replace(s, batch_size=args.batch_size)
    if getattr(args, "rule", None) is not None:
        rule = args.rule
        if rule.startswith("margin:"):
            try:
                s = replace(s, rule="margin", margin_delta=float(rule.split(":", 1)[1]))
            except ValueError as exc:
                raise ConfigError(f"bad margin delta in --rule {rule!r}") from exc
        elif rule in ("flip", "margin"):
            s = replace(s, rule=rule)
        else:
            raise ConfigError(f"--rule must be flip or margin:DELTA, got {rule!r}")
    if getattr(args, "direction", None) is not None:
        s = replace(s, direction_policy=args.direction)
    if getattr(args, "seed", None) is not None:
        s = replace(s, seed=args.seed)
        cfg.bench = replace(cfg.bench, seed=args.seed)
    cfg.sampler = s
    cfg.sampler.validate()

    if getattr(args, "no_timestamp", False):
        cfg.timestamp = False
    return cfg


def _meta(cfg: config_mod.RunConfig, **extra) -> dict:
    blob = json.dumps(config_mod.to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return {"params_hash": hashlib.sha256(blob.encode()).hexdigest()[:16], **extra}


def _single_theta(args) -> GainVector:
    if getattr(args, "input", None):
        thetas, _meta_in = serialize.read_theta_csv(args.input)
        if not thetas:
            raise SchemaError(f"{args.input} contains no gain rows")
        return thetas[0]
    return GainVector()


def cmd_simulate(args) -> int:
    cfg = _config_from_args(args)
    theta = _single_theta(args)
    traj = integrate(theta, cfg.params, with_tangents=args.tangents,
                     storage="full", method=cfg.solver_method)
    serialize.write_trajectory_csv(
        traj, args.output, include_tangents=args.tangents,
        meta=_meta(cfg), timestamp=cfg.timestamp,
    )
    return 0


def cmd_label(args) -> int:
    cfg = _config_from_args(args)
    thetas, _meta_in = serialize.read_theta_csv(args.input)
    outcomes = label_dataset(thetas, cfg.params, enabled=cfg.sampler.enabled,
                             method=cfg.solver_method)
    serialize.write_labeled_csv(thetas, outcomes, args.output,
                                meta=_meta(cfg), timestamp=cfg.timestamp)
    return 0


def cmd_grad(args) -> int:
    cfg = _config_from_args(args)
    theta = _single_theta(args)
    direction = args.direction or "destabilize"
    if direction == "auto":
        raise ConfigError("grad needs an explicit --direction (stabilize or destabilize)")
    run = integrate(theta, cfg.params, with_tangents=True, storage="streaming",
                    method=cfg.solver_method)
    g_fmad = extract_gradients(run, critical_times(run), direction)
    scheme = args.scheme or "central"
    eps = args.epsilon if args.epsilon is not None else 1e-6
    g_fd, failures = finite_diff_gradients(
        theta, cfg.params, eps=eps, scheme=scheme, relative=True,
        direction=direction, method=cfg.solver_method,
    )
    for f in failures:
        print(json.dumps({"warning": f.kind, "component": f.index, "message": f.message}),
              file=sys.stderr)
    serialize.write_gradients_csv(
        {"fmad": g_fmad, f"fd-{scheme}": g_fd}, args.output,
        meta=_meta(cfg, direction=direction, scheme=scheme, eps=eps),
        timestamp=cfg.timestamp,
    )
    return 0


def cmd_sample(args) -> int:
    cfg = _config_from_args(args)
    s = cfg.sampler
    if getattr(args, "input", None):
        seeds, _meta_in = serialize.read_theta_csv(args.input)
    else:
        seeds, redraws = generate_initial(s.n_seeds, cfg.params, mean=s.mean, std=s.std,
                                          seed=s.seed)
        print(f"generated {len(seeds)} seeds ({redraws} redraws)", file=sys.stderr)
    dataset = augment(seeds, cfg.params, s)
    n_conv = sum(1 for r in dataset.records if r.converged)
    print(f"converged {n_conv}/{len(dataset.records)}", file=sys.stderr)
    serialize.write_dataset_csv(dataset, args.output, timestamp=cfg.timestamp)
    return 0


def cmd_bench(args) -> int:
    cfg = _config_from_args(args)
    b = cfg.bench
    thetas, _redraws = generate_initial(b.n_thetas, cfg.params, mean=0.0, std=50.0, seed=b.seed)
    report = compare_methods(
        thetas, cfg.params, methods=b.methods, reference=b.reference, runs=b.runs,
        eps_central=b.eps_central, eps_forward=b.eps_forward, method=cfg.solver_method,
    )
    serialize.write_bench_csv(report, args.output,
                              meta=_meta(cfg, gss_ratio=report.gss_ratio,
                                         ss_exact_spread=report.ss_exact_spread),
                              timestamp=cfg.timestamp)
    return 0


def cmd_gen(args) -> int:
    cfg = _config_from_args(args)
    s = cfg.sampler
    thetas, redraws = generate_initial(s.n_seeds, cfg.params, mean=s.mean, std=s.std, seed=s.seed)
    serialize.write_theta_csv(
        thetas, args.output,
        meta=_meta(cfg, seed=s.seed, n=s.n_seeds, mean=s.mean, std=s.std, redraws=redraws),
        timestamp=cfg.timestamp,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="override the configured RNG seed")
    common.add_argument("--no-timestamp", action="store_true",
                        help="omit the timestamp header line for reproducible bytes")

    parser = argparse.ArgumentParser(prog="freqwalk",
                                     description="frequency-stability dataset tools")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[common],
                         help="integrate one gain vector and write the trajectory")
    sim.add_argument("--input", help="gain CSV; first row is used (default: all-zero gains)")
    sim.add_argument("--output", default="trajectory.csv")
    sim.add_argument("--tangents", action="store_true", help="include sensitivity columns")
    sim.add_argument("--dt", type=float)
    sim.add_argument("--horizon", type=float)
    sim.set_defaults(func=cmd_simulate)

    lab = sub.add_parser("label", parents=[common], help="label a CSV of gain vectors")
    lab.add_argument("--input", required=True)
    lab.add_argument("--output", default="labeled.csv")
    lab.set_defaults(func=cmd_label)

    grd = sub.add_parser("grad", parents=[common],
                         help="search gradients for one gain vector, tangent vs finite difference")
    grd.add_argument("--input", help="gain CSV; first row is used (default: all-zero gains)")
    grd.add_argument("--output", default="gradients.csv")
    grd.add_argument("--scheme", choices=["forward", "central"])
    grd.add_argument("--epsilon", type=float, help="relative perturbation size")
    grd.add_argument("--direction", choices=["stabilize", "destabilize"])
    grd.set_defaults(func=cmd_grad)

    smp = sub.add_parser("sample", parents=[common],
                         help="walk seeds toward the stability boundary")
    smp.add_argument("--input", help="seed CSV (default: draw n_seeds from the config)")
    smp.add_argument("--output", default="dataset.csv")
    smp.add_argument("--alpha", type=float)
    smp.add_argument("--max-iter", type=int)
    smp.add_argument("--batch-size", type=int)
    smp.add_argument("--rule", help="flip or margin:DELTA")
    smp.add_argument("--direction", choices=["auto", "stabilize", "destabilize"])
    smp.set_defaults(func=cmd_sample)

    ben = sub.add_parser("bench", parents=[common],
                         help="accuracy/time/memory comparison of gradient methods")
    ben.add_argument("--output", default="bench.csv")
    ben.set_defaults(func=cmd_bench)

    gen = sub.add_parser("gen", parents=[common], help="draw Normal seed gain vectors")
    gen.add_argument("--output", default="seeds.csv")
    gen.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, SchemaError) as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        if getattr(exc, "row", None) is not None:
            record["row"] = exc.row
        if getattr(exc, "column", None) is not None:
            record["column"] = exc.column
        print(json.dumps(record), file=sys.stderr)
        return 2
    except FreqwalkError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
