"""Command line front end.

    zdjscc check    --config model.json
    zdjscc simulate --config model.json --out results/ --seed 42
    zdjscc sweep    --lambda-min 0.05 --lambda-max 4 --steps 200 --snr 0,9,99
    zdjscc serve    --host 127.0.0.1 --port 8000

Exit codes: 0 on success (a diverged simulation is still a result), 2 when
the model is infeasible, 1 on invalid configs, models, or sweep ranges.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import coder, design as design_mod, pipeline
from .config import MAX_SEED
from .errors import ZdjsccError
from .pipeline import EXIT_INFEASIBLE, EXIT_INVALID, EXIT_OK


def _seed(text):
    value = int(text)
    if not (0 <= value <= MAX_SEED):
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _snr_list(text):
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma-separated list of numbers")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one SNR value")
    return values


def build_parser():
    parser = argparse.ArgumentParser(
        prog="zdjscc",
        description="Zero-delay coding of Gauss-Markov sources over AWGN channels with feedback.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("--config", metavar="PATH", required=True, help="model/run config (JSON)")

    def add_out(p):
        p.add_argument("--out", metavar="DIR", default=None, help="output directory")

    p_check = sub.add_parser("check", help="validate a model and report capacity/feasibility")
    add_config(p_check)

    p_design = sub.add_parser("design", help="construct an encoder and write its certificate")
    add_config(p_design)
    add_out(p_design)

    p_sim = sub.add_parser("simulate", help="run the closed loop and write trace files")
    add_config(p_sim)
    add_out(p_sim)
    p_sim.add_argument("--seed", metavar="U64", type=_seed, default=None, help="RNG seed override")
    p_sim.add_argument("--replicas", metavar="N", type=_positive_int, default=None)
    p_sim.add_argument("--horizon", metavar="T", type=_positive_int, default=None)
    p_sim.add_argument("--mode", choices=["strict", "normalized"], default=None,
                       help="power accounting mode override")

    p_sweep = sub.add_parser("sweep", help="achievability over a (lambda1, lambda2) grid")
    add_out(p_sweep)
    p_sweep.add_argument("--lambda-min", metavar="F", type=float, default=0.05)
    p_sweep.add_argument("--lambda-max", metavar="F", type=float, default=4.0)
    p_sweep.add_argument("--steps", metavar="N", type=_positive_int, default=200)
    p_sweep.add_argument("--snr", metavar="CSV-list", type=_snr_list, default=[0.0, 9.0, 99.0])
    p_sweep.add_argument("--verify", action="store_true",
                         help="re-check a subsample of grid cells with the certificate and the recursion")

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)

    return parser


def _out_dir(args, cfg):
    if getattr(args, "out", None):
        return args.out
    return cfg.output.directory if cfg is not None else "."


def cmd_check(args):
    cfg = pipeline.load_config(args.config)
    out = pipeline.run_check(cfg)
    for line in out.report.lines():
        print(line)
    print(f"effective snr s = {out.s:.12g}")
    print(f"capacity C = {out.c_nats:.12g} nats = {out.c_bits:.12g} bits")
    print(f"log-instability = {out.log_instability:.12g} nats")
    print(f"capacity margin (1+s) - (det A_u)^2 = {out.feasibility.margin:.12g}")
    print(f"verdict: {out.feasibility.status if out.report.valid else 'Invalid'}")
    return out.exit_code


def cmd_design(args):
    cfg = pipeline.load_config(args.config)
    out = pipeline.run_design(cfg)
    if not out.report.valid:
        for line in out.report.lines():
            print(line)
        print("model validation failed; no certificate written", file=sys.stderr)
        return EXIT_INVALID
    payload = pipeline.certificate_payload(out.certificate, out.cert_report)
    path = os.path.join(_out_dir(args, cfg), "certificate.json")
    pipeline.atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    for line in out.cert_report.lines():
        print(line)
    if out.certificate.feasible:
        print(f"alpha = {out.certificate.alpha:.12g}")
        print(f"schur margin = {out.certificate.schur_margin:.12g}")
    else:
        print(f"violated: {out.certificate.violated}")
    print(f"verdict: {design_mod.FEASIBLE if out.certificate.feasible else design_mod.INFEASIBLE}")
    print(f"wrote {path}")
    return out.exit_code


def cmd_simulate(args):
    cfg = pipeline.load_config(args.config)
    out = pipeline.run_simulate(
        cfg, seed=args.seed, horizon=args.horizon, replicas=args.replicas,
        mode=None if args.mode is None else (
            coder.STRICT if args.mode == "strict" else coder.POWER_NORMALIZED
        ),
    )
    if not out.report.valid:
        for line in out.report.lines():
            print(line)
        print("model validation failed; nothing simulated", file=sys.stderr)
        return EXIT_INVALID
    if out.infeasible:
        print(f"violated: {out.certificate.violated}", file=sys.stderr)
        print("model is infeasible; set design.gamma in the config to simulate anyway",
              file=sys.stderr)
        return EXIT_INFEASIBLE

    mode = args.mode or cfg.design.mode
    summary = pipeline.simulate_summary(out, mode)
    directory = _out_dir(args, cfg)
    if cfg.output.format == "json":
        path = os.path.join(directory, "trace.json")
        pipeline.atomic_write(path, pipeline.trace_json_text(out.sim, summary))
        paths = [path]
    else:
        trace_path = os.path.join(directory, "trace.csv")
        summary_path = os.path.join(directory, "summary.json")
        pipeline.atomic_write(trace_path, pipeline.trace_csv_text(out.sim))
        pipeline.atomic_write(summary_path, json.dumps(summary, indent=2, sort_keys=True) + "\n")
        paths = [trace_path, summary_path]

    sim = out.sim
    print(f"replicas = {sim.replicas}, horizon = {sim.horizon}, seed = {out.seed}")
    if sim.diverged:
        print(f"DIVERGED at t = {sim.divergence_step}")
    else:
        print(f"tail distortion estimate D = {sim.d_estimate:.12g}")
        print(f"tail power estimate       P = {sim.power_estimate:.12g}")
        print(f"analytic trace P_T        = {sim.trace_P[-1]:.12g}")
    for path in paths:
        print(f"wrote {path}")
    return out.exit_code


def cmd_sweep(args):
    out = pipeline.run_sweep(
        args.lambda_min, args.lambda_max, args.steps, args.snr, verify=args.verify
    )
    directory = args.out or "."
    path = os.path.join(directory, "sweep.csv")
    pipeline.atomic_write(path, pipeline.sweep_csv_text(out.rows))
    print(f"{len(out.rows)} cells ({args.steps}x{args.steps} grid, {len(args.snr)} SNR values)")
    if args.verify:
        print(f"verified {out.verified} cells against certificate + recursion")
        for m in out.mismatches:
            print(f"MISMATCH at lambda=({m['lambda1']:.6g},{m['lambda2']:.6g}) "
                  f"snr={m['snr']:.6g}: table says {m['achievable']}, "
                  f"certificate {m['certificate']}, recursion {m['dare']}", file=sys.stderr)
    print(f"wrote {path}")
    return out.exit_code


def cmd_serve(args):
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "check": cmd_check,
        "design": cmd_design,
        "simulate": cmd_simulate,
        "sweep": cmd_sweep,
        "serve": cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except ZdjsccError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
