"""Command-line front end.

Subcommands: model, simulate, bench, fit, replay.  Every emitter writes
one shared CSV schema so the fitter and plots work on any of them:

    kind,n,threads,mean_delay_cycles,service_cycles,throughput,queue_length,ci95,seed,flags

Unused cells stay empty.  `throughput` is completions per cycle for
model/sim/fit rows and operations per second for bench rows (convert
with the `calibration=` flag echoed in bench rows).  Each output file
is accompanied by `<file>.manifest.json` recording the exact invocation;
`lockscale replay manifest.json` re-runs it, and the deterministic
subcommands (model, simulate, fit) reproduce their output byte for
byte.

Exit codes: 0 success, 2 invalid arguments, 3 runtime failure
(calibration or fit convergence).
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import os
import sys

from . import __version__, bench, fit, model, sim, svg

CSV_COLUMNS = [
    "kind", "n", "threads", "mean_delay_cycles", "service_cycles",
    "throughput", "queue_length", "ci95", "seed", "flags",
]

SEED_ENV_VAR = "LOCKSCALE_SEED"


def _default_seed() -> int:
    return int(os.environ.get(SEED_ENV_VAR, "0"))


def _fmt(value) -> str:
    if value is None or value == "":
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_rows(path: str, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row.get(col)) for col in CSV_COLUMNS])


def _write_manifest(out_path: str, subcommand: str, config: dict, seed, argv, extra_host=None) -> None:
    host = {"cpu_count": os.cpu_count()}
    if extra_host:
        host.update(extra_host)
    manifest = {
        "subcommand": subcommand,
        "argv": list(argv),
        "config": config,
        "seed": seed,
        "version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "host": host,
    }
    with open(out_path + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _int_list(text: str) -> list[int]:
    """Parse '1,2,4' and '1:28' (inclusive range) forms."""
    out: list[int] = []
    for part in text.split(","):
        if ":" in part:
            lo, hi = part.split(":")
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def _float_list(text: str) -> list[float]:
    return [float(p) for p in text.split(",")]


# ---------------------------------------------------------------------------
# subcommands


def cmd_model(args) -> int:
    curves: list[tuple[str, float]] = []
    if args.envelope:
        s_lo, s_hi = sorted(args.envelope)
        curves = [(f"s={s_lo:g} (upper)", s_lo), (f"s={s_hi:g} (lower)", s_hi)]
    else:
        curves = [(f"s={args.service:g}", args.service)]
    rows = []
    plot_series = []
    for label, s in curves:
        points = model.predict_curve(s, args.think, args.n_max)
        flag = ""
        if args.envelope:
            flag = "envelope-upper" if s == min(c[1] for c in curves) else "envelope-lower"
        for p in points:
            rows.append({
                "kind": "model", "n": p.cores,
                "mean_delay_cycles": args.think, "service_cycles": s,
                "throughput": p.throughput, "queue_length": p.queue_length,
                "flags": flag,
            })
        plot_series.append((label, [p.cores for p in points], [p.throughput for p in points]))
    _write_rows(args.out, rows)
    _write_manifest(args.out, "model", {
        "service": args.service, "think": args.think,
        "n_max": args.n_max, "envelope": args.envelope,
    }, seed=None, argv=args._argv)
    if args.svg:
        svg.line_plot(plot_series, args.svg, title="Predicted lock throughput",
                      xlabel="cores", ylabel="completions / cycle")
    return 0


def cmd_simulate(args) -> int:
    base = sim.SimConfig(
        n=1, a=args.think, s=args.service,
        service_dist=args.service_dist, think_dist=args.think_dist,
        mode=args.mode, warmup=args.warmup, sample=args.sample, seed=args.seed,
    )
    results = sim.sweep(base, _int_list(args.n_values))
    rows = []
    for n, res in results:
        rows.append({
            "kind": "sim", "n": n,
            "mean_delay_cycles": args.think, "service_cycles": args.service,
            "throughput": res.throughput, "queue_length": res.mean_queue_length,
            "ci95": res.ci95_throughput, "seed": args.seed,
            "flags": f"{args.mode};{args.think_dist}/{args.service_dist}",
        })
    _write_rows(args.out, rows)
    _write_manifest(args.out, "simulate", {
        "service": args.service, "think": args.think, "n_values": args.n_values,
        "service_dist": args.service_dist, "think_dist": args.think_dist,
        "mode": args.mode, "warmup": args.warmup, "sample": args.sample,
    }, seed=args.seed, argv=args._argv)
    if args.svg:
        svg.line_plot(
            [(f"sim s={args.service:g} a={args.think:g}",
              [n for n, _ in results], [r.throughput for _, r in results])],
            args.svg, title="Simulated lock throughput",
            xlabel="cores", ylabel="completions / cycle")
    return 0


def cmd_bench(args) -> int:
    config = bench.BenchConfig(
        lock_kind=args.lock, threads=1,
        section_work_cycles=args.section_work,
        warmup_seconds=args.warmup_seconds, sample_seconds=args.sample_seconds,
        seed=args.seed, elision_backend=args.elision_backend,
        pin_threads=not args.no_pin,
    )
    cells = bench.sweep_bench(config, _int_list(args.threads), _float_list(args.delays))
    rows = []
    for threads, delay, res in cells:
        flags = list(res.flags) + [f"calibration={res.calibration!r}"]
        rows.append({
            "kind": "bench", "threads": threads,
            "mean_delay_cycles": delay, "service_cycles": args.section_work,
            "throughput": res.total_ops_per_second,
            "seed": args.seed, "flags": ";".join(flags),
        })
    _write_rows(args.out, rows)
    _write_manifest(args.out, "bench", {
        "lock": args.lock, "threads": args.threads, "delays": args.delays,
        "section_work": args.section_work,
        "warmup_seconds": args.warmup_seconds, "sample_seconds": args.sample_seconds,
        "elision_backend": args.elision_backend, "no_pin": args.no_pin,
    }, seed=args.seed, argv=args._argv,
        extra_host={"calibration": cells[0][2].calibration if cells else None})
    return 0


def cmd_fit(args) -> int:
    points = []
    with open(args.csv) as fh:
        for row in csv.DictReader(fh):
            thr = row.get("throughput")
            if not thr:
                continue
            thr = float(thr)
            if row.get("n"):
                n = int(row["n"])
            elif row.get("threads"):
                n = int(row["threads"])
                if args.cycles_per_ns is None:
                    raise ValueError(
                        "bench rows carry ops/second; pass --cycles-per-ns to convert"
                    )
                thr = thr / (args.cycles_per_ns * 1e9)
            else:
                continue
            points.append((n, thr))
    result = fit.fit_model(fit.FitInput(
        points=tuple(points),
        fit_a=not args.fixed_think,
        fixed_a=args.fixed_think,
        n_limit=args.n_limit,
    ), relative_weights=args.relative_weights)
    payload = {
        "s_hat": result.s_hat, "a_hat": result.a_hat,
        "rss": result.rss, "r_squared": result.r_squared,
    }
    text = json.dumps(payload, indent=2) + "\n"
    if args.json:
        with open(args.json, "w") as fh:
            fh.write(text)
        _write_manifest(args.json, "fit", {
            "csv": args.csv, "n_limit": args.n_limit,
            "fixed_think": args.fixed_think, "relative_weights": args.relative_weights,
            "cycles_per_ns": args.cycles_per_ns,
        }, seed=None, argv=args._argv)
    sys.stdout.write(text)
    return 0


def cmd_replay(args) -> int:
    with open(args.manifest) as fh:
        manifest = json.load(fh)
    argv = manifest["argv"]
    if argv and argv[0] == "replay":
        raise ValueError("refusing to replay a replay manifest")
    return _dispatch(argv)


# ---------------------------------------------------------------------------
# argument wiring


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lockscale",
        description="Lock-scalability toolkit: model, simulate, bench, fit.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("model", help="closed-form throughput curve")
    p.add_argument("--service", type=float, required=True, help="mean lock service time (cycles)")
    p.add_argument("--think", type=float, required=True, help="mean per-core think time (cycles)")
    p.add_argument("--n-max", type=int, default=28)
    p.add_argument("--envelope", type=float, nargs=2, metavar=("S_LO", "S_HI"),
                   help="emit two curves bounding the service-time range")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--svg", help="optional SVG plot path")
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("simulate", help="discrete-event simulation sweep")
    p.add_argument("--service", type=float, required=True)
    p.add_argument("--think", type=float, required=True)
    p.add_argument("--n-values", default="1:28", help="core counts, e.g. 1:28 or 1,2,4,8")
    p.add_argument("--service-dist", choices=["exponential", "deterministic"], default="exponential")
    p.add_argument("--think-dist", choices=["exponential", "deterministic"], default="exponential")
    p.add_argument("--mode", choices=["single-server", "infinite-server"], default="single-server")
    p.add_argument("--warmup", type=int, default=None, help="warm-up cycles (default 10%% of sample)")
    p.add_argument("--sample", type=int, default=50_000_000, help="sample window in cycles")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--out", required=True)
    p.add_argument("--svg")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="real-thread contention microbenchmark")
    p.add_argument("--lock", choices=list(bench.LOCK_KINDS), default="clh")
    p.add_argument("--threads", default="1", help="thread counts, e.g. 1:8 or 1,2,4")
    p.add_argument("--delays", default="0", help="mean think delays in cycles, e.g. 500,1000")
    p.add_argument("--section-work", type=int, default=360, help="critical-section busy work (cycles)")
    p.add_argument("--warmup-seconds", type=float, default=2.0)
    p.add_argument("--sample-seconds", type=float, default=1.0)
    p.add_argument("--elision-backend", choices=["always-succeed", "always-abort", "randomized"],
                   default="always-succeed")
    p.add_argument("--no-pin", action="store_true", help="skip thread pinning")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("fit", help="fit the contention model to a CSV curve")
    p.add_argument("csv", help="input CSV in the shared schema")
    p.add_argument("--n-limit", type=int, default=None)
    p.add_argument("--fixed-think", type=float, default=None,
                   help="hold the think time fixed instead of fitting it")
    p.add_argument("--relative-weights", action="store_true")
    p.add_argument("--cycles-per-ns", type=float, default=None,
                   help="convert bench ops/second rows to ops/cycle")
    p.add_argument("--json", help="write the fit result to this JSON file")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("replay", help="re-run a recorded manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)

    return parser


def _dispatch(argv) -> int:
    args = build_parser().parse_args(argv)
    args._argv = list(argv)
    return args.func(args)


def main(argv=None) -> int:
    try:
        return _dispatch(argv if argv is not None else sys.argv[1:])
    except (model.InvalidParameterError, sim.InvalidConfigError,
            bench.InvalidBenchConfigError, fit.DegenerateInputError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (bench.CalibrationError, fit.NonConvergenceError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
