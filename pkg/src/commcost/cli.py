"""Command-line interface.

Subcommands: ``fit`` (sample CSV to parameter document), ``predict`` (model
plus trace or matrix to a cost breakdown), ``simulate-queue`` (two-queue
matching replay), ``pattern`` (build or summarize communication patterns),
``synth`` (synthetic calibration CSV), and ``emit-plot-data`` (per-level
breakdown CSV for stacked decomposition plots). Input errors exit with
status 2.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pattern as pattern_mod
from .cost import CostBreakdown, predict_pattern
from .errors import CommCostError
from .fit import fit_machine_model, samples_from_csv, samples_to_csv
from .params import default_model, load_model, save_model
from .queue_sim import in_order_trace, random_trace, reversed_trace, simulate_queue
from .topology import CubeTopology, RankLayout

__all__ = ["main", "build_parser"]


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _load_model_arg(path: str | None):
    if path is None:
        return default_model()
    return load_model(Path(path).read_text())


def _layout_from_args(args, nprocs: int) -> RankLayout:
    if args.layout:
        return RankLayout.from_file(Path(args.layout).read_text())
    return RankLayout.block(nprocs, args.ppn, args.sockets)


def _topo_from_args(args, layout: RankLayout) -> CubeTopology:
    if args.geminis:
        return CubeTopology.from_geminis(args.geminis)
    return CubeTopology.from_layout(layout)


def _matrices_from_args(args) -> list[pattern_mod.SparseMatrixPartition]:
    return [
        pattern_mod.load_matrix(Path(p).read_text(), args.nprocs)
        for p in args.matrix
    ]


def _pattern_for_op(op: str, matrices) -> pattern_mod.CommPattern:
    if op == "spmv":
        return pattern_mod.spmv_pattern(matrices[0])
    b = matrices[1] if len(matrices) > 1 else matrices[0]
    return pattern_mod.spgemm_pattern(matrices[0], b)


def _breakdown_doc(bd: CostBreakdown) -> dict:
    return {
        "transport": bd.transport,
        "queue": bd.queue,
        "contention": bd.contention,
        "total": bd.total,
    }


def _cmd_fit(args) -> int:
    samples = samples_from_csv(Path(args.samples).read_text())
    base = _load_model_arg(args.model) if args.model else None
    thresholds = base.thresholds if base else None
    topo = CubeTopology.from_geminis(args.geminis) if args.geminis else None
    result = fit_machine_model(
        samples, thresholds=thresholds, topo=topo, relative=args.relative
    )
    model = result.to_model(base)
    for cell, count in sorted(result.counts.items(), key=lambda kv: str(kv[0])):
        rms = result.rms.get(cell)
        rms_text = f" rms {rms:.3e}" if rms is not None else ""
        print(
            f"{cell[0].value}.{cell[1].value}: {count} samples{rms_text}",
            file=sys.stderr,
        )
    for note in result.notes:
        print(f"note: {note}", file=sys.stderr)
    _write(save_model(model), args.out)
    return 0


def _cmd_predict(args) -> int:
    model = _load_model_arg(args.model)
    if args.trace:
        pat = pattern_mod.load_pattern(Path(args.trace).read_text())
        patterns = [pat]
        nprocs = args.nprocs or pat.nprocs
    else:
        if not args.nprocs:
            raise CommCostError("--nprocs is required with --matrix")
        matrices = _matrices_from_args(args)
        if args.levels:
            patterns = [_pattern_for_op(args.op, [m]) for m in matrices]
        else:
            patterns = [_pattern_for_op(args.op, matrices)]
        nprocs = args.nprocs
    layout = _layout_from_args(args, nprocs)
    topo = _topo_from_args(args, layout)
    breakdowns = [predict_pattern(p, layout, topo, model) for p in patterns]
    if len(breakdowns) == 1:
        doc = _breakdown_doc(breakdowns[0])
    else:
        doc = {"levels": [_breakdown_doc(bd) for bd in breakdowns]}
    _write(json.dumps(doc, indent=2) + "\n", args.out)
    return 0


def _levels_csv(breakdowns) -> str:
    lines = ["level,transport,queue,contention,total"]
    for level, bd in enumerate(breakdowns):
        lines.append(
            f"{level},{bd.transport!r},{bd.queue!r},{bd.contention!r},{bd.total!r}"
        )
    return "\n".join(lines) + "\n"


def _cmd_emit_plot_data(args) -> int:
    model = _load_model_arg(args.model)
    if not args.nprocs:
        raise CommCostError("--nprocs is required with --matrix")
    matrices = _matrices_from_args(args)
    layout = _layout_from_args(args, args.nprocs)
    topo = _topo_from_args(args, layout)
    breakdowns = [
        predict_pattern(_pattern_for_op(args.op, [m]), layout, topo, model)
        for m in matrices
    ]
    _write(_levels_csv(breakdowns), args.out)
    return 0


def _cmd_simulate_queue(args) -> int:
    if args.order == "in":
        trace = in_order_trace(args.n)
    elif args.order == "reversed":
        trace = reversed_trace(args.n)
    else:
        trace = random_trace(args.n, args.seed)
    stats = simulate_queue(trace)
    print(f"total_steps={stats.total_steps}")
    print(f"max_posted_depth={stats.max_posted_depth}")
    print(f"max_unexpected_depth={stats.max_unexpected_depth}")
    return 0


def _cmd_pattern(args) -> int:
    if args.mode == "summary":
        if not args.trace:
            raise CommCostError("pattern summary requires --trace")
        pat = pattern_mod.load_pattern(Path(args.trace).read_text())
        layout = _layout_from_args(args, args.nprocs or pat.nprocs)
        _write(pat.summary(layout), args.out)
        return 0
    if not args.matrix:
        raise CommCostError(f"pattern {args.mode} requires --matrix")
    if not args.nprocs:
        raise CommCostError("--nprocs is required with --matrix")
    matrices = _matrices_from_args(args)
    pat = _pattern_for_op(args.mode, matrices)
    _write(pat.to_trace(), args.out)
    return 0


def _cmd_synth(args) -> int:
    model = _load_model_arg(args.model)
    samples = pattern_mod.calibration_campaign(
        model,
        ppn=args.ppn,
        sockets_per_node=args.sockets,
        geminis=args.geminis or 4,
        repeats=args.repeats,
        noise=args.noise,
        seed=args.seed,
    )
    _write(samples_to_csv(samples), args.out)
    return 0


def _add_common(parser: argparse.ArgumentParser, *, model: bool = True) -> None:
    if model:
        parser.add_argument("--model", help="parameter document (default: built-in)")
    parser.add_argument("--nprocs", type=int, help="number of ranks")
    parser.add_argument("--ppn", type=int, default=16, help="processes per node")
    parser.add_argument("--sockets", type=int, default=2, help="sockets per node")
    parser.add_argument("--geminis", type=int, help="routers in the partition")
    parser.add_argument("--layout", help="rank layout file (rank node socket lines)")
    parser.add_argument("--out", help="output path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="commcost",
        description="Node-aware point-to-point communication cost models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit model parameters from a timing sample CSV")
    p.add_argument("samples", help="CSV of locality,ppn,size,n,ordering,seconds")
    p.add_argument("--model", help="base model for unfitted values")
    p.add_argument("--geminis", type=int, default=4,
                   help="routers of the contention scenario (default 4)")
    p.add_argument("--relative", action="store_true",
                   help="weight the regressions by 1/measured")
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("predict", help="predict the cost breakdown of a pattern")
    _add_common(p)
    p.add_argument("--trace", help="trace document (nprocs header, src dst size lines)")
    p.add_argument("--matrix", action="append", default=[],
                   help="Matrix Market file (repeatable)")
    p.add_argument("--op", choices=("spmv", "spgemm"), default="spmv")
    p.add_argument("--levels", action="store_true",
                   help="treat each --matrix as one level and emit a breakdown per level")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("emit-plot-data",
                       help="per-level breakdown CSV (level,transport,queue,contention,total)")
    _add_common(p)
    p.add_argument("--matrix", action="append", default=[], required=True,
                   help="Matrix Market file, one per level (repeatable)")
    p.add_argument("--op", choices=("spmv", "spgemm"), default="spmv")
    p.set_defaults(func=_cmd_emit_plot_data)

    p = sub.add_parser("simulate-queue", help="replay the two-queue matching discipline")
    p.add_argument("--n", type=int, required=True, help="message count")
    p.add_argument("--order", choices=("in", "reversed", "random"), default="in")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_simulate_queue)

    p = sub.add_parser("pattern", help="build or summarize a communication pattern")
    p.add_argument("mode", choices=("spmv", "spgemm", "summary"))
    _add_common(p, model=False)
    p.add_argument("--trace", help="trace document (for summary)")
    p.add_argument("--matrix", action="append", default=[],
                   help="Matrix Market file (repeatable)")
    p.set_defaults(func=_cmd_pattern)

    p = sub.add_parser("synth", help="write a synthetic calibration sample CSV")
    p.add_argument("--model", help="parameter document (default: built-in)")
    p.add_argument("--noise", type=float, default=0.0, help="relative noise level")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ppn", type=int, default=16)
    p.add_argument("--sockets", type=int, default=2)
    p.add_argument("--geminis", type=int, help="routers of the contention sweep (default 4)")
    p.add_argument("--repeats", type=int, default=1, help="sweep repetitions")
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CommCostError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
