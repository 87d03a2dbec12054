"""Command-line interface: ``rsshash <command> [options]``.

Exit status is 0 on success, 1 for usage errors and 2 for data or
validation errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .evaluation import (
    CSV_COLUMNS,
    TASKS,
    HashBackend,
    LinearBackend,
    openset_identification,
    reports_to_csv,
    run_task,
    sweep,
)
from .index import HashIndex, LinearIndex
from .projections import METHODS, generate, load_projections, save_projections
from .store import (
    FORMATS,
    SplitSpec,
    StoreError,
    ingest,
    length_normalize,
    serialize,
    speaker_centroid,
    speaker_split,
    synthesize,
)

log = logging.getLogger("rsshash")

# every domain error derives from ValueError
DATA_ERRORS = (ValueError, OSError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {v}")
    return v


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from None


def _str_list(choices):
    def parse(text: str) -> list[str]:
        vals = [x.strip() for x in text.split(",") if x.strip()]
        bad = [v for v in vals if v not in choices]
        if bad or not vals:
            raise argparse.ArgumentTypeError(f"choose from {', '.join(choices)}; got {text!r}")
        return vals
    return parse


def _write(text: str, output) -> None:
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(output).write_text(text, encoding="utf-8")


def _load_data(args):
    store = ingest(args.data, args.format)
    split = None
    if getattr(args, "split", None):
        split = SplitSpec.load(args.split)
        split.validate(store)
    return store, split


# -- commands -------------------------------------------------------------


def cmd_synth(args) -> int:
    if args.output is None:
        raise UsageError("synth needs -o/--output")
    store = synthesize(args.speakers, args.utts, args.dim, args.between_var, args.within_var,
                       args.seed, args.anisotropy)
    if not args.raw:
        store = length_normalize(store)
    serialize(store, args.output, args.format or "csv")
    print(f"wrote {len(store)} records from {len(store.speaker_index)} speakers (d={store.dimension}) "
          f"to {args.output}")
    if args.split_out:
        split = speaker_split(store, args.train_speakers, args.target_speakers, args.nontarget_speakers,
                              args.query_utts, args.seed)
        split.save(args.split_out)
        print(f"wrote split to {args.split_out}: train={len(split.train)} "
              f"search_space={len(split.search_space)} queries={len(split.queries)}")
    return 0


def cmd_ingest_check(args) -> int:
    store, split = _load_data(args)
    print(f"records={len(store)} dimension={store.dimension} speakers={len(store.speaker_index)}")
    if split is not None:
        print(f"split ok: train={len(split.train)} search_space={len(split.search_space)} "
              f"queries={len(split.queries)}")
    return 0


def cmd_build(args) -> int:
    if args.output is None:
        raise UsageError("build needs -o/--output")
    store, split = _load_data(args)
    train = store.subset(split.train) if split and split.train else store
    tables = generate(args.method, train, args.k, args.L, args.seed, n_speakers=args.ns,
                      m_eigen=args.m_eigen, ridge=args.ridge)
    save_projections(tables, args.output, args.seed, args.method)
    manifest = {
        "command": "build",
        "version": __version__,
        "data": str(args.data),
        "split": str(args.split) if args.split else None,
        "method": args.method,
        "d": store.dimension,
        "k": args.k,
        "L": args.L,
        "ns": args.ns,
        "m_eigen": args.m_eigen,
        "ridge": args.ridge,
        "seed": args.seed,
        "train_records": len(train),
        "train_speakers": len(train.speaker_index),
        "projections": str(args.output),
    }
    manifest_path = args.manifest or f"{args.output}.manifest.json"
    Path(manifest_path).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {len(tables)} {args.method} tables (k={args.k}) to {args.output}; manifest {manifest_path}")
    return 0


def _index_for(args, store, split):
    subset = split.search_space if split and split.search_space else None
    if args.linear:
        return LinearIndex(store, subset)
    if not args.projections:
        raise UsageError("give --projections or --linear")
    tables, _ = load_projections(args.projections)
    return HashIndex(store, tables, subset)


def cmd_query(args) -> int:
    store, split = _load_data(args)
    if (args.id is None) == (args.speaker is None):
        raise UsageError("give exactly one of --id or --speaker")
    if args.id is not None:
        if args.id not in store.position:
            raise StoreError(f"unknown id {args.id!r}")
        q = store.vectors[store.position[args.id]]
    else:
        q = speaker_centroid(store, args.speaker)
    index = _index_for(args, store, split)
    res = index.query(q, args.top)
    lines = [f"{rank}\t{uid}\t{score!r}" for rank, (uid, score) in enumerate(res.ranked, start=1)]
    lines.append(f"# candidates={res.candidates_examined} tables={res.tables_probed}")
    _write("\n".join(lines) + "\n", args.output)
    return 0


def cmd_eval(args) -> int:
    store, split = _load_data(args)
    if split is None:
        raise UsageError("eval needs --split")
    if args.linear:
        backend = LinearBackend()
    elif args.projections:
        tables, doc = load_projections(args.projections)
        backend = HashBackend(tables, name=doc.get("method"))
    else:
        raise UsageError("give --projections or --linear")

    if args.task == "openset":
        rows = openset_identification(backend, store, split, args.thresholds)
        # one row per rate, threshold folded into the metric name
        lines = [",".join(CSV_COLUMNS)]
        for t, miss, fa in rows:
            for name, value in (("miss_rate", miss), ("fa_rate", fa)):
                lines.append(f"{backend.name},openset,{backend.k},{backend.L},{args.seed},{name}@{t!r},{value!r},,")
        _write("\n".join(lines) + "\n", args.output)
        return 0

    report = run_task(args.task, backend, store, split, seed=args.seed)
    if not args.linear:
        base = run_task(args.task, LinearBackend(), store, split)
        report.relative_speed = base.mean_query_seconds / max(report.mean_query_seconds, 1e-12)
    _write(reports_to_csv([report], timing=not args.no_timing), args.output)
    return 0


def cmd_sweep(args) -> int:
    store, split = _load_data(args)
    if split is None:
        raise UsageError("sweep needs --split")
    seeds = args.seeds or [args.seed]
    reports = sweep(store, split, args.methods, args.k, args.L, seeds, tasks=args.tasks,
                    n_speakers=args.ns, m_eigen=args.m_eigen, ridge=args.ridge, baseline=True)
    _write(reports_to_csv(reports, timing=not args.no_timing), args.output)
    return 0


# -- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("-o", "--output", help="output path ('-' or omitted: stdout where allowed)")
    common.add_argument("--format", choices=FORMATS, help="embedding file format (default: from suffix)")
    common.add_argument("-v", "--verbose", action="store_true")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", required=True, help="embedding file")
    data.add_argument("--split", help="SplitSpec JSON file")

    p = _Parser(prog="rsshash", description="Speaker search with multi-table LSH and RSS projections.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", parents=[common], help="write a synthetic speaker corpus")
    s.add_argument("--speakers", type=_positive_int, required=True)
    s.add_argument("--utts", type=_positive_int, required=True, help="utterances per speaker")
    s.add_argument("--dim", type=_positive_int, required=True)
    s.add_argument("--between-var", type=_positive_float, default=1.0)
    s.add_argument("--within-var", type=_positive_float, default=0.05)
    s.add_argument("--anisotropy", type=float, default=1.0,
                   help="ratio of largest to smallest between-speaker axis variance (1 = isotropic)")
    s.add_argument("--raw", action="store_true", help="skip length normalisation")
    s.add_argument("--split-out", help="also write a speaker-disjoint split here")
    s.add_argument("--train-speakers", type=int, default=0)
    s.add_argument("--target-speakers", type=int, default=0)
    s.add_argument("--nontarget-speakers", type=int, default=0)
    s.add_argument("--query-utts", type=int, default=3)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("ingest-check", parents=[common, data], help="validate an embedding file and split")
    s.set_defaults(func=cmd_ingest_check)

    s = sub.add_parser("build", parents=[common, data], help="generate projection tables")
    s.add_argument("--method", choices=METHODS, default="lsh")
    s.add_argument("--k", type=_positive_int, required=True, help="hyperplanes per table")
    s.add_argument("--L", type=_positive_int, required=True, help="number of tables")
    s.add_argument("--ns", type=_positive_int, help="RSS speakers per table (default d)")
    s.add_argument("--m-eigen", type=_positive_int, help="rs-lda PCA axes per table (default 2d/3)")
    s.add_argument("--ridge", type=float, help="within-class scatter ridge (default 1e-6 trace/d)")
    s.add_argument("--manifest", help="manifest path (default <output>.manifest.json)")
    s.set_defaults(func=cmd_build)

    s = sub.add_parser("query", parents=[common, data], help="rank the search space for one query")
    s.add_argument("--projections")
    s.add_argument("--linear", action="store_true", help="exact linear search")
    s.add_argument("--id", help="query with a stored utterance")
    s.add_argument("--speaker", help="query with a speaker centroid")
    s.add_argument("--top", type=_positive_int, default=10)
    s.set_defaults(func=cmd_query)

    s = sub.add_parser("eval", parents=[common, data], help="evaluate one backend")
    s.add_argument("--projections")
    s.add_argument("--linear", action="store_true")
    s.add_argument("--task", choices=TASKS + ("openset",), default="retrieval")
    s.add_argument("--thresholds", type=_float_list, default=[0.0, 0.25, 0.5, 0.75, 0.9])
    s.add_argument("--no-timing", action="store_true", help="leave relative_speed blank")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", parents=[common, data], help="grid over methods, k, L and seeds")
    s.add_argument("--methods", type=_str_list(METHODS), default=["lsh", "rss"])
    s.add_argument("--k", type=_int_list, default=[2, 4, 6, 8, 10, 12])
    s.add_argument("--L", type=_int_list, default=[8, 16, 32])
    s.add_argument("--seeds", type=_int_list)
    s.add_argument("--tasks", type=_str_list(TASKS), default=list(TASKS))
    s.add_argument("--ns", type=_positive_int)
    s.add_argument("--m-eigen", type=_positive_int)
    s.add_argument("--ridge", type=float)
    s.add_argument("--no-timing", action="store_true")
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"rsshash: error: {exc}", file=sys.stderr)
        return 1
    except DATA_ERRORS as exc:
        print(f"rsshash: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
