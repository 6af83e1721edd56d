"""Command line front end: serve the HTTP API, run benchmarks and searches, replay transcripts."""

from __future__ import annotations

import argparse
import json
import sys

from .applications import REGRESSIONS, SigmoidEncoder, kw_search, root_search
from .benchmark import BenchmarkConfig, emit_csv, run_benchmark
from .driver import SSchedule
from .service import ReplayMismatch, default_data_dir, replay_transcript

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bsaq", description="sequential quantile search toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP/JSON session service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument(
        "--data-dir",
        default=None,
        help="session directory (default: $BSAQ_DATA_DIR or ./bsaq-sessions)",
    )

    bench = sub.add_parser("bench", help="RMSE benchmark over a response model")
    bench.add_argument("--model", default="M2")
    bench.add_argument("--alphas", default="0.3,0.5,0.7")
    bench.add_argument(
        "--methods", default="bsa-bayes,bsa-map,rm,rmj,rpj",
        help="comma-separated method names",
    )
    bench.add_argument("--steps", type=int, default=20)
    bench.add_argument("--reps", type=int, default=1000)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--s", type=int, default=17, help="fixed subinterval count")
    bench.add_argument("--csv", default=None, help="write the table to this path")

    for name, default_curve in (("root-search", "cubic"), ("kw-search", "quadratic")):
        p = sub.add_parser(name, help=f"demo {name.replace('-', ' ')} run")
        p.add_argument("--steps", type=int, default=30)
        p.add_argument("--seed", type=int, default=1)
        p.add_argument("--b", type=float, default=1.0, help="sigmoid scale")
        p.add_argument("--q", type=int, default=2, help="binaries per response")
        p.add_argument("--start", type=float, default=0.5)
        p.add_argument("--curve", default=default_curve, choices=sorted(REGRESSIONS))
        if name == "kw-search":
            p.add_argument(
                "--unbounded",
                action="store_true",
                help="probe outside the unit interval instead of clipping",
            )

    replay = sub.add_parser("replay", help="verify an exported session transcript")
    replay.add_argument("transcript", help="path to an export JSON file")
    return parser


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    data_dir = args.data_dir if args.data_dir is not None else default_data_dir()
    app = create_app(data_dir)
    print(f"serving on http://{args.host}:{args.port} (sessions in {data_dir})")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _cmd_bench(args: argparse.Namespace) -> int:
    config = BenchmarkConfig(
        model=args.model,
        alphas=tuple(float(a) for a in args.alphas.split(",")),
        methods=tuple(m.strip() for m in args.methods.split(",")),
        horizon=args.steps,
        replications=args.reps,
        master_seed=args.seed,
        schedule=SSchedule(args.s, args.s, switch_step=1),
    )
    result = run_benchmark(config)
    print(f"model {args.model}, n={args.steps}, {args.reps} replications, seed {args.seed}")
    header = "alpha   " + "".join(f"{m:>12}" for m in config.methods)
    print(header)
    for alpha in config.alphas:
        row = f"{alpha:<8.3g}"
        for m in config.methods:
            row += f"{result.rmse(m, alpha):12.4f}"
        print(row)
    if args.csv:
        emit_csv(result, args.csv)
        print(f"wrote {args.csv}")
    return 0


def _print_trajectory(xs, target_hint: str) -> None:
    for i in range(0, len(xs), 5):
        chunk = "  ".join(f"{x:8.5f}" for x in xs[i : i + 5])
        print(f"  x[{i:>3}..] {chunk}")
    print(f"final point {xs[-1]:.6f} ({target_hint})")


def _cmd_root_search(args: argparse.Namespace) -> int:
    encoder = SigmoidEncoder(b=args.b, q=args.q)
    res = root_search(
        REGRESSIONS[args.curve], encoder, args.steps, args.seed, start=args.start
    )
    print(f"root search on {args.curve}, {args.steps} steps, seed {args.seed}")
    _print_trajectory(res.xs, "true root 0.3")
    return 0


def _cmd_kw_search(args: argparse.Namespace) -> int:
    encoder = SigmoidEncoder(b=args.b, q=args.q)
    res = kw_search(
        REGRESSIONS[args.curve],
        encoder,
        args.steps,
        args.seed,
        start=args.start,
        domain=None if args.unbounded else (0.0, 1.0),
    )
    print(f"minimum search on {args.curve}, {args.steps} steps, seed {args.seed}")
    _print_trajectory(res.xs, "true minimizer 0.3")
    print(f"clipped probes at {int(res.clipped.sum())} of {args.steps} steps")
    return 0


def _cmd_replay(args: argparse.Namespace) -> int:
    with open(args.transcript) as fh:
        record = json.load(fh)
    try:
        final = replay_transcript(record)
    except ReplayMismatch as exc:
        print(f"replay FAILED: {exc}", file=sys.stderr)
        return 1
    steps = len(record["transcript"])
    print(
        f"replay verified: session {record['id']}, {steps} steps, "
        f"final recommendation x={final['x']}"
    )
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "serve": _cmd_serve,
        "bench": _cmd_bench,
        "root-search": _cmd_root_search,
        "kw-search": _cmd_kw_search,
        "replay": _cmd_replay,
    }
    return handlers[args.command](args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
