"""commflow command line.

    commflow solve-lp   --input lp.json
    commflow mincost    --input net.min [--format dimacs|json]
    commflow maxflow    --input net.max
    commflow experiment --sizes 8,16,32,64 [--family complete]
    commflow verify     --input net.min --solution out/solution.json

Every run writes ``solution.json``, ``transcript.csv`` and ``summary.json``
(``experiment.csv`` for experiments) into ``--out-dir``.  Exit status is 0
on success, 2 when the instance is infeasible and 1 on any error.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from commflow import flow, ipm, numerics, oracle
from commflow import io as cio
from commflow.commsim import Channel, Party

log = logging.getLogger("commflow")

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2


def _sizes(text):
    try:
        sizes = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from None
    if not sizes or min(sizes) < 2:
        raise argparse.ArgumentTypeError("sizes must be integers >= 2")
    return sizes


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--bits", type=_positive_int, default=48, help="fractional bits L on the wire (default 48)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--delta", type=_positive_float, default=1e-3, help="primal feasibility target for solve-lp")
    common.add_argument("--mode", choices=["sequential", "two_party"], default="two_party")
    common.add_argument("--sampling", choices=["identity", "bernoulli"], default="identity")
    common.add_argument("--charge-mode", choices=["formula", "actual"], default="formula")
    common.add_argument("--mu-exponent", type=_positive_float, default=2.0, help="flow runs stop at mu = (mW)^-k")
    common.add_argument("--alice-coordinator", action="store_true", help="Alice plays the coordinator")
    common.add_argument("--out-dir", type=Path, default=Path("commflow-out"))

    parser = argparse.ArgumentParser(prog="commflow", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve-lp", "mincost", "maxflow", "verify"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--input", type=Path, required=True)
        p.add_argument("--format", choices=["dimacs", "json"], default=None)
        if name == "maxflow":
            p.add_argument("--source", type=int, default=None, help="0-based source (overrides the file)")
            p.add_argument("--sink", type=int, default=None)
        if name == "verify":
            p.add_argument("--solution", type=Path, required=True)
    p = sub.add_parser("experiment", parents=[common])
    p.add_argument("--sizes", type=_sizes, default=[8, 16, 32, 64])
    p.add_argument("--family", choices=["complete", "bipartite", "grid", "random"], default="complete")
    p.add_argument("--capacity", type=_positive_int, default=16, help="largest arc capacity")
    p.add_argument("--density", type=_positive_float, default=0.3, help="arc probability for the random family")
    return parser


def _configure_logging():
    level = os.environ.get("COMMFLOW_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _channel(args) -> Channel:
    return Channel(args.bits, args.seed, alice_is_coordinator=args.alice_coordinator, charge_mode=args.charge_mode)


def _fmt(args, path: Path) -> str:
    if args.format:
        return args.format
    return "json" if path.suffix.lower() == ".json" else "dimacs"


def _write(out_dir: Path, solution: dict, channel: Channel | None):
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "solution.json").write_text(cio.dumps(solution))
    if channel is not None:
        (out_dir / "transcript.csv").write_text(channel.transcript.to_csv())
        (out_dir / "summary.json").write_text(channel.transcript.summary_json())


# ---------------------------------------------------------------------------
# commands


def cmd_solve_lp(args) -> int:
    lp = cio.read_lp(args.input)
    channel = _channel(args)
    sol = ipm.solve_lp(lp, args.delta, mode=args.mode, channel=channel, sampling=args.sampling)
    _write(args.out_dir, sol.to_dict(), channel)
    print(f"objective {sol.objective:.9g}  residual {sol.primal_residual_inf:.3e}  iterations {sol.iterations}")
    return EXIT_OK


def _flow_kwargs(args):
    return {"mode": args.mode, "seed": args.seed, "mu_exponent": args.mu_exponent}


def cmd_mincost(args) -> int:
    inp = cio.read_network(args.input, _fmt(args, args.input))
    channel = _channel(args)
    sol = flow.mincost_flow(inp.network, channel, **_flow_kwargs(args))
    doc = sol.to_dict()
    doc["transcript_summary"] = channel.transcript.summary()
    _write(args.out_dir, doc, channel)
    if not sol.feasible:
        print("infeasible")
        return EXIT_INFEASIBLE
    print(f"cost {sol.cost:.0f}  attempts {sol.attempts}  bits {channel.transcript.total_bits}")
    return EXIT_OK


def cmd_maxflow(args) -> int:
    inp = cio.read_network(args.input, _fmt(args, args.input))
    s = args.source if args.source is not None else inp.source
    t = args.sink if args.sink is not None else inp.sink
    if s is None or t is None:
        raise ValueError("maxflow needs a source and a sink")
    channel = _channel(args)
    sol = flow.maxflow_scaling(inp.network, s, t, channel, **_flow_kwargs(args))
    doc = sol.to_dict()
    doc["rounds"] = sol.info["rounds"]
    doc["transcript_summary"] = channel.transcript.summary()
    _write(args.out_dir, doc, channel)
    print(f"max flow {sol.flow_value}  rounds {sol.info['rounds']}  bits {channel.transcript.total_bits}")
    return EXIT_OK


def cmd_verify(args) -> int:
    import json

    sol = json.loads(args.solution.read_text())
    if args.input.suffix.lower() == ".json" and args.format is None:
        doc = json.loads(args.input.read_text())
        if "rows" in doc:
            lp = cio.lp_from_dict(doc)
            ref = oracle.oracle_lp(lp)
            x = np.asarray(sol["x"], dtype=float)
            resid = float(np.max(np.abs(lp.A.T @ x - lp.b), initial=0.0))
            ok = resid <= args.delta and float(lp.c @ x) <= float(ref.optimum) + args.delta and np.all(x >= lp.l) and np.all(x <= lp.u)
            print(f"oracle {float(ref.optimum):.9g}  solution {float(lp.c @ x):.9g}  {'match' if ok else 'MISMATCH'}")
            return EXIT_OK if ok else EXIT_ERROR
    inp = cio.read_network(args.input, _fmt(args, args.input))
    net = inp.network
    f = sol.get("flow")
    if inp.kind == "max":
        ref = oracle.oracle_maxflow(net, inp.source, inp.sink)
        fv = np.asarray(f, dtype=np.int64)
        ex = net.excess(fv)
        inner = np.delete(ex, [inp.source, inp.sink])
        ok = f is not None and np.all(fv >= 0) and np.all(fv <= net.caps) and not inner.any() and int(-ex[inp.sink]) == ref.optimum == sol.get("flow_value")
        print(f"oracle {ref.optimum}  solution {sol.get('flow_value')}  {'match' if ok else 'MISMATCH'}")
    else:
        ref = oracle.oracle_mincost(net)
        if not ref.feasible:
            ok = not sol.get("feasible")
        else:
            ok = f is not None and net.is_feasible(np.asarray(f, dtype=np.int64)) and net.cost_of(f) == ref.optimum
        print(f"oracle {ref.optimum if ref.feasible else 'infeasible'}  solution {sol.get('cost')}  {'match' if ok else 'MISMATCH'}")
    return EXIT_OK if ok else EXIT_ERROR


# ---------------------------------------------------------------------------
# experiments


def family_graph(family: str, n: int, capacity: int, rng: np.random.Generator, density: float = 0.3):
    """Seeded max-flow instance; returns (network, s, t).

    Capacities are uniform in 1..capacity with one arc pinned at
    ``capacity`` so that ||u||_inf is fixed.
    """
    if family == "complete":
        pairs = [(a, b) for a in range(n) for b in range(n) if a != b]
        s, t = 0, n - 1
    elif family == "bipartite":
        half = n // 2
        left, right = range(1, half), range(half, n - 1)
        s, t = 0, n - 1
        pairs = [(s, a) for a in left] + [(a, b) for a in left for b in right] + [(b, t) for b in right]
    elif family == "grid":
        side = max(2, int(round(n**0.5)))
        pairs = []
        for r in range(side):
            for c in range(side):
                v = r * side + c
                if c + 1 < side:
                    pairs += [(v, v + 1), (v + 1, v)]
                if r + 1 < side:
                    pairs += [(v, v + side), (v + side, v)]
        n = side * side
        s, t = 0, n - 1
    elif family == "random":
        pairs = [(a, b) for a in range(n) for b in range(n) if a != b and rng.random() < density]
        pairs += [(v, v + 1) for v in range(n - 1)]
        s, t = 0, n - 1
    else:
        raise ValueError(f"unknown family {family!r}")
    m = len(pairs)
    caps = rng.integers(1, capacity + 1, size=m)
    caps[int(rng.integers(m))] = capacity
    owners = [Party.ALICE if i % 2 == 0 else Party.BOB for i in range(m)]
    tails = [a for a, _ in pairs]
    heads = [b for _, b in pairs]
    return flow.FlowNetwork(n, tails, heads, caps, np.zeros(m, dtype=np.int64), owners), s, t


def run_experiment(sizes, family="complete", capacity=16, seed=0, bits=48, mode="two_party", charge_mode="formula", mu_exponent=2.0, density=0.3, alice_coordinator=False):
    rows = []
    for n in sizes:
        rng = np.random.default_rng([seed, n])
        net, s, t = family_graph(family, n, capacity, rng, density)
        channel = Channel(bits, seed, alice_is_coordinator=alice_coordinator, charge_mode=charge_mode)
        start = time.perf_counter()
        sol = flow.maxflow_scaling(net, s, t, channel, mode=mode, seed=seed, mu_exponent=mu_exponent)
        wall = time.perf_counter() - start
        rows.append({"n": net.n, "m": net.m, "total_bits": channel.transcript.total_bits, "iterations": sol.iterations, "wall_time": wall, "flow_value": sol.flow_value})
        log.info("n=%d m=%d bits=%d iterations=%d %.1fs", net.n, net.m, channel.transcript.total_bits, sol.iterations, wall)
    return rows


def experiment_csv(rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "m", "total_bits", "iterations", "wall_time"])
    for r in rows:
        w.writerow([r["n"], r["m"], r["total_bits"], r["iterations"], f"{r['wall_time']:.3f}"])
    return buf.getvalue()


def cmd_experiment(args) -> int:
    rows = run_experiment(args.sizes, args.family, args.capacity, args.seed, args.bits, args.mode, args.charge_mode, args.mu_exponent, args.density, args.alice_coordinator)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    text = experiment_csv(rows)
    (args.out_dir / "experiment.csv").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {
    "solve-lp": cmd_solve_lp,
    "mincost": cmd_mincost,
    "maxflow": cmd_maxflow,
    "verify": cmd_verify,
    "experiment": cmd_experiment,
}


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (cio.ParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ipm.IPMError, numerics.NumericsError, flow.FlowError, ValueError) as exc:
        print(f"error during {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
