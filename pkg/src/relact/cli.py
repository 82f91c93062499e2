"""``relact`` command-line tool.

Exit codes: 0 success, 1 validation findings (or a failed ``--verify``),
2 any operational error, reported on stderr by its class name.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from relact import dataset, kinematics as kin, replay as rp
from relact.actions import ALL_KINDS, DEFAULT_CHUNK_SIZE, RepresentationKind
from relact.errors import RelactError

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_ERROR = 2
VERIFY_TOL = 1e-9


def _chain(path: str | None) -> kin.Chain:
    return kin.default_chain() if path is None else kin.load_chain(path)


def _kinds(value: str) -> tuple[RepresentationKind, ...]:
    return ALL_KINDS if value == "all" else (RepresentationKind.parse(value),)


def cmd_gen_ref(args) -> int:
    chain = _chain(args.chain)
    traj = rp.generate_lemniscate(args.scale, args.num_points, dt=args.dt)
    config = kin.configure(chain, args.seed)
    reference = rp.record_reference(config, traj, rng=rp.reference_rng(args.seed))
    meta = {
        "generator": "lemniscate",
        "seed": args.seed,
        "scale_mm": args.scale,
        "num_points": args.num_points,
        "chain": "default" if args.chain is None else Path(args.chain).name,
    }
    record = dataset.record_from_reference(reference, "lemniscate", meta)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    dataset.save_demo(record, out)
    print(f"wrote {len(record)} steps to {out}")
    return EXIT_OK


def cmd_replay(args) -> int:
    chain = _chain(args.chain)
    trajectory = None
    if args.ref is not None:
        record = dataset.load_demo(args.ref)
        trajectory = rp.ReferenceTrajectory(record.commands, record.dt)
    report = rp.reproduce_table(
        chain,
        args.seed,
        kinds=_kinds(args.kind),
        scale_mm=args.scale,
        num_points=args.num_points,
        chunk_size=args.chunk_size,
        shift_rad=args.shift,
        trajectory=trajectory,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    (out / "rmse_table.csv").write_text(report.table_csv())
    print(report.format_table())
    return EXIT_OK


def cmd_convert(args) -> int:
    record = dataset.load_demo(args.input)
    kind = RepresentationKind.parse(args.kind)
    chunks = dataset.export_chunks(record, kind, args.chunk_size)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    dataset.save_chunks(chunks, kind, out, task_name=record.task_name)
    print(f"wrote {len(chunks)} chunks of {args.chunk_size} steps to {out}")
    if args.verify:
        err = dataset.max_roundtrip_error(record, chunks, kind)
        print(f"max round-trip error: {err:.3e}")
        if not err < VERIFY_TOL:
            return EXIT_FINDINGS
    return EXIT_OK


def cmd_validate(args) -> int:
    record = dataset.load_demo(args.input)
    jaw_limits = _chain(args.chain).jaw_limits
    findings = dataset.validate(record, jaw_limits)
    for f in findings:
        print(f)
    if findings:
        print(f"{len(findings)} finding(s)")
        return EXIT_FINDINGS
    print(f"{len(record)} steps, no findings")
    return EXIT_OK


def cmd_stats(args) -> int:
    kind, chunks = dataset.load_chunks(args.input)
    stats = dataset.compute_stats(chunks, kind)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    dataset.save_stats(stats, out)
    print(f"wrote statistics over {stats.num_samples} action vectors to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relact", description="Action-representation replay experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    def lemniscate_flags(p):
        p.add_argument("--scale", type=float, default=rp.DEFAULT_SCALE_MM, help="figure-eight half width (mm)")
        p.add_argument("--num-points", type=int, default=rp.DEFAULT_NUM_POINTS)

    p = sub.add_parser("gen-ref", help="record a reference figure-eight demonstration")
    p.add_argument("--chain", help="robot description file (default: built-in chain)")
    p.add_argument("--seed", type=int, required=True)
    lemniscate_flags(p)
    p.add_argument("--dt", type=float, default=rp.DEFAULT_DT, help="seconds between steps")
    p.add_argument("--out", required=True, help="output demonstration file")
    p.set_defaults(func=cmd_gen_ref)

    p = sub.add_parser("replay", help="replay a reference in every representation and setup")
    p.add_argument("--chain")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--kind", choices=["camera", "tool", "hybrid", "all"], default="all")
    p.add_argument("--chunk-size", type=int, default=DEFAULT_CHUNK_SIZE)
    p.add_argument("--ref", help="demonstration file whose commands replace the default figure-eight")
    lemniscate_flags(p)
    p.add_argument("--shift", type=float, default=rp.DEFAULT_SHIFT_RAD, help="eval setup-joint shift (rad)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("convert", help="export training chunks from a demonstration")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--kind", choices=["camera", "tool", "hybrid"], required=True)
    p.add_argument("--chunk-size", type=int, default=DEFAULT_CHUNK_SIZE)
    p.add_argument("--out", required=True)
    p.add_argument("--verify", action="store_true", help="decode every chunk and compare with the source")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("validate", help="list problems in a demonstration file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--chain", help="robot description supplying jaw limits")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("stats", help="normalization statistics of a chunk file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (RelactError, OSError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
