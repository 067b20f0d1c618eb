"""``lamassu`` command line.

Exit codes: 0 ok, 1 usage, 2 not found, 3 metadata integrity,
4 data integrity, 5 crash detected.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from ..crypto import SecretKeyPair
from ..engine import IntegrityMode, LamassuFile
from ..errors import DataIntegrityError, LamassuError
from ..keystore import KeyStore
from ..layout import LayoutParams
from ..store import DirectoryStore, MemoryStore
from . import bench as benchmod
from .experiments import crash_matrix, dedup_experiment

EXIT_OK, EXIT_USAGE, EXIT_NOT_FOUND, EXIT_META, EXIT_DATA, EXIT_CRASH = range(6)


class UsageError(LamassuError):
    exit_code = EXIT_USAGE


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def _size(text: str) -> int:
    units = {"k": 1 << 10, "m": 1 << 20, "g": 1 << 30}
    t = text.strip().lower().rstrip("b")
    if t and t[-1] in units:
        return int(float(t[:-1]) * units[t[-1]])
    return int(t)


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--keystore", default=d(None), help="keystore file")
    p.add_argument("--zone", type=int, default=d(0), help="isolation zone id")
    p.add_argument("--store", default=d("mem"), help="mem or dir:PATH")
    p.add_argument("--block-size", type=int, default=d(4096))
    p.add_argument("--reserved", "-R", type=int, default=d(8), help="reserved key slots R")
    p.add_argument("--integrity", choices=[m.value for m in IntegrityMode], default=d("full"))
    p.add_argument("--csv", action="store_true", default=d(False), help="emit CSV instead of a table")
    p.add_argument("-v", "--verbose", action="store_true", default=d(False))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lamassu", description="Convergent block encryption that keeps dedup working.")
    _global_flags(parser, suppress=False)
    common = _Parser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("keygen", parents=[common], help="create keys for --zone in --keystore")

    p = sub.add_parser("put", parents=[common], help="encrypt a file into the store")
    p.add_argument("source")
    p.add_argument("object")
    p = sub.add_parser("get", parents=[common], help="decrypt an object")
    p.add_argument("object")
    p.add_argument("-o", "--output", help="destination file (default stdout)")
    for name, text in [("size", "print the logical size"), ("verify", "check every block"),
                       ("recover", "resolve interrupted commits")]:
        sub.add_parser(name, parents=[common], help=text).add_argument("object")

    p = sub.add_parser("bench", parents=[common], help="FIO-style workloads over R values")
    p.add_argument("--workload", action="append", choices=[w.value for w in benchmod.Workload])
    p.add_argument("--file-size", type=_size, default=4 << 20)
    p.add_argument("--io-size", type=_size, default=4096)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--r-values", type=_ints, default=[1, 2, 8, 32, 48, 52, 56, 60])

    p = sub.add_parser("dedup-exp", parents=[common], help="storage efficiency vs redundancy")
    p.add_argument("--alphas", type=_floats, default=[0.1, 0.2, 0.3, 0.4, 0.5])
    p.add_argument("--file-size", type=_size, default=64 << 20)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("crash-matrix", parents=[common], help="inject a crash at every write index")
    p.add_argument("--file-size", type=_size, default=None)
    p.add_argument("--r-values", type=_ints, default=None, help="defaults to --reserved")
    p.add_argument("--seed", type=int, default=0)
    return parser


def _emit(rows: list[dict], as_csv: bool, out=None) -> None:
    out = out or sys.stdout
    if not rows:
        return
    cols = list(rows[0])
    if as_csv:
        w = csv.DictWriter(out, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        return
    cells = [[str(r[c]) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
    print("  ".join(c.rjust(w) for c, w in zip(cols, widths)), file=out)
    for row in cells:
        print("  ".join(v.rjust(w) for v, w in zip(row, widths)), file=out)


def _open_store(spec: str):
    if spec == "mem":
        return MemoryStore()
    if spec.startswith("dir:") and len(spec) > 4:
        return DirectoryStore(spec[4:])
    raise UsageError(f"bad --store {spec!r}; expected mem or dir:PATH")


def _keys(args) -> SecretKeyPair:
    if not args.keystore:
        raise UsageError("--keystore is required for this command")
    return KeyStore(args.keystore).fetch_zone(args.zone)


def _layout(args) -> LayoutParams:
    try:
        return LayoutParams(args.block_size, args.reserved)
    except LamassuError as e:
        raise UsageError(str(e)) from None


def cmd_keygen(args) -> int:
    if not args.keystore:
        raise UsageError("--keystore is required")
    KeyStore(args.keystore).create_zone(args.zone)
    print(f"created keys for zone {args.zone} in {args.keystore}")
    return EXIT_OK


def cmd_put(args) -> int:
    store, keys = _open_store(args.store), _keys(args)
    data = Path(args.source).read_bytes()
    with LamassuFile.create(store, args.object, keys, _layout(args)) as f:
        f.write(0, data)
    print(f"{args.object}: {len(data)} bytes, {store.num_blocks(args.object)} blocks, {store.writes} writes")
    return EXIT_OK


def cmd_get(args) -> int:
    store, keys = _open_store(args.store), _keys(args)
    f = LamassuFile.open(store, args.object, keys, integrity=args.integrity)
    data = f.read(0, f.logical_size)
    if args.output:
        Path(args.output).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    return EXIT_OK


def cmd_size(args) -> int:
    f = LamassuFile.open(_open_store(args.store), args.object, _keys(args))
    print(f.logical_size)
    return EXIT_OK


def cmd_verify(args) -> int:
    f = LamassuFile.open(_open_store(args.store), args.object, _keys(args))
    report = f.verify()
    rows = [{"physical": x.physical_index, "kind": x.kind.value, "segment": x.segment,
             "logical": "-" if x.logical_block is None else x.logical_block, "reason": x.reason}
            for x in report.failures]
    _emit(rows, args.csv)
    print(f"{report.segments_checked} segments, {report.blocks_checked} data blocks, "
          f"{len(report.failures)} failures", file=sys.stderr)
    if any(x.reason == "midupdate" for x in report.failures):
        return EXIT_CRASH
    if any(x.kind.value == "metadata" for x in report.failures):
        return EXIT_META
    return EXIT_DATA if report.failures else EXIT_OK


def cmd_recover(args) -> int:
    f = LamassuFile.open(_open_store(args.store), args.object, _keys(args))
    r = f.recover()
    _emit([{"segments_scanned": r.segments_scanned, "segments_midupdate": r.segments_midupdate,
            "resolved_new": r.blocks_resolved_to_new, "resolved_old": r.blocks_resolved_to_old,
            "unrecoverable": r.blocks_unrecoverable}], args.csv)
    return EXIT_DATA if r.blocks_unrecoverable else EXIT_OK


def cmd_bench(args) -> int:
    kinds = args.workload or [w.value for w in benchmod.Workload]
    rows = []
    for kind in kinds:
        spec = benchmod.WorkloadSpec(benchmod.Workload(kind), args.file_size, args.io_size,
                                     runs=args.runs, seed=args.seed, integrity=IntegrityMode(args.integrity))
        rows += [r.row() for r in benchmod.bench(spec, args.r_values, args.block_size)]
    _emit(rows, args.csv)
    return EXIT_OK


def cmd_dedup_exp(args) -> int:
    rows = dedup_experiment(args.alphas, args.reserved, args.file_size, args.seed, args.block_size)
    _emit([{"alpha": r.alpha, "R": r.reserved_slots, "blocks": r.blocks,
            "plain_usage%": round(100 * r.plain_relative_usage, 2),
            "lamassu_usage%": round(100 * r.lamassu_relative_usage, 2),
            "overhead%": round(100 * r.relative_overhead, 3)} for r in rows], args.csv)
    return EXIT_OK


def cmd_crash_matrix(args) -> int:
    rows, failed = [], 0
    for r in args.r_values or [args.reserved]:
        rep = crash_matrix(args.file_size, r, args.block_size, args.seed)
        failed += len(rep.failures)
        rows.append({"R": r, "file_size": rep.file_size, "commits": rep.commits,
                     "injection_points": len(rep.cases), "crashed": rep.resolved,
                     "failures": len(rep.failures)})
    _emit(rows, args.csv)
    return EXIT_CRASH if failed else EXIT_OK


COMMANDS = {
    "keygen": cmd_keygen, "put": cmd_put, "get": cmd_get, "size": cmd_size, "verify": cmd_verify,
    "recover": cmd_recover, "bench": cmd_bench, "dedup-exp": cmd_dedup_exp, "crash-matrix": cmd_crash_matrix,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except DataIntegrityError as e:
        print(f"lamassu: data integrity error: {e}", file=sys.stderr)
        return EXIT_DATA
    except LamassuError as e:
        print(f"lamassu: {e}", file=sys.stderr)
        return e.exit_code
    except FileNotFoundError as e:
        print(f"lamassu: {e}", file=sys.stderr)
        return EXIT_NOT_FOUND


if __name__ == "__main__":
    sys.exit(main())
