"""Command-line entry point: ``ringtrace {generate,run,evaluate,compare,report}``.

Exit status is 0 on success, 1 on usage errors and 2 on data errors.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

from . import heuristics as H
from .chain import BURN_KEYS
from .errors import ContradictionDetected, RingTraceError
from .ingest import atomic_write, parse_chain_file, parse_ground_truth, parse_payouts, _open_text
from .labels import HeuristicId, LabelSet, labels_to_text, read_labels
from .metrics import (
    BUCKETS,
    coinbase_output_series,
    decoy_share_series,
    effective_ring_size_series,
    fmt_rate,
    labelset_as_truth,
    pairwise_matrix,
    precision_report,
    self_collision_rate,
    table_text,
)
from .reaction import chain_reaction, combined_chain_reaction
from .synth import describe, generate, load_config

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2

RUNNABLE = (
    HeuristicId.ZERO_MIXIN,
    HeuristicId.CHAIN_REACTION,
    HeuristicId.TEN_BLOCK,
    HeuristicId.DIFFER_BY_ONE,
    HeuristicId.MORDINAL,
    HeuristicId.COINBASE,
    HeuristicId.P2POOL,
)
LABELS_SUFFIX = ".labels.csv"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(args, columns, rows, text_out=None) -> str:
    """Render rows as CSV or JSON, write to ``--out`` if given, and return the text."""
    rows = [tuple(r) for r in rows]
    if getattr(args, "json", False):
        text = json.dumps([dict(zip(columns, r)) for r in rows], indent=2) + "\n"
    else:
        text = table_text(columns, rows)
    if text_out is not None:
        atomic_write(text_out, text)
    return text


def _label_name(path) -> str:
    name = Path(path).name
    return name[: -len(LABELS_SUFFIX)] if name.endswith(LABELS_SUFFIX) else Path(path).stem


def _load_labels(path) -> LabelSet:
    with _open_text(path) as fh:
        return read_labels(fh, str(path))


# -- generate ----------------------------------------------------------------

def cmd_generate(args) -> int:
    config = load_config(args.config)
    ledger = generate(config)
    paths = ledger.write(args.out_dir)
    summary = {"expected": describe(config), "realized": dict(sorted(ledger.stats.items())),
               "files": {k: str(v) for k, v in sorted(paths.items())}}
    if args.json:
        print(json.dumps(summary, indent=2, sort_keys=True))
    else:
        for section in ("expected", "realized"):
            for k, v in sorted(summary[section].items()):
                print(f"{section}.{k}: {v}")
        for name, path in summary["files"].items():
            print(f"wrote {path}")
    return EXIT_OK


# -- run -----------------------------------------------------------------------

def _parse_heuristics(text, have_payouts) -> list:
    if text is None:
        return [h for h in RUNNABLE if h is not HeuristicId.P2POOL or have_payouts]
    out = []
    for name in text.split(","):
        name = name.strip()
        if not name:
            continue
        try:
            h = HeuristicId.parse(name)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        if h not in RUNNABLE:
            raise UsageError(f"{h.value} is produced automatically and cannot be requested")
        if h not in out:
            out.append(h)
    if not out:
        raise UsageError("no heuristics requested")
    if HeuristicId.P2POOL in out and not have_payouts:
        raise UsageError("P2PoolMerge requires --payouts")
    return out


def _burn_keys(args):
    return tuple(args.burn_key) if args.burn_key else BURN_KEYS


def _run_one(h, chain, args, payouts, zero) -> LabelSet:
    if h is HeuristicId.ZERO_MIXIN:
        return zero
    if h is HeuristicId.CHAIN_REACTION:
        return chain_reaction(chain, zero)
    if h is HeuristicId.TEN_BLOCK:
        return H.ten_block_decoy_bug(chain, (args.window_start, args.window_end), args.age)
    if h is HeuristicId.DIFFER_BY_ONE:
        return H.differ_by_one(chain)
    if h is HeuristicId.MORDINAL:
        return H.mordinal_decoys(chain, _burn_keys(args))
    if h is HeuristicId.COINBASE:
        return H.coinbase_decoys(chain, args.max_inputs, None if args.no_since else args.since)
    if h is HeuristicId.P2POOL:
        return H.p2pool_output_merging(chain, payouts)
    raise UsageError(f"unsupported heuristic {h.value}")


def run_heuristics(chain, requested, args, payouts=None) -> tuple:
    """``({name: LabelSet}, new_true_spends, new_decoys)``; every set is propagated."""
    zero = H.zero_mixin(chain)
    results = {}
    for h in requested:
        labels = _run_one(h, chain, args, payouts, zero)
        results[h.value] = H.propagate_consequences(labels, chain)
    seeds = [results[h.value] for h in requested]
    if HeuristicId.ZERO_MIXIN not in requested:
        seeds.insert(0, H.propagate_consequences(zero, chain))
    combined, new_ts, new_decoys = combined_chain_reaction(chain, seeds)
    results[HeuristicId.COMBINED.value] = combined
    return results, new_ts, new_decoys


def cmd_run(args) -> int:
    requested = _parse_heuristics(args.heuristics, args.payouts is not None)
    chain = parse_chain_file(args.chain, _burn_keys(args))
    payouts = parse_payouts(args.payouts) if args.payouts else None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ContradictionDetected)
        results, new_ts, new_decoys = run_heuristics(chain, requested, args, payouts)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for name, labels in results.items():
        atomic_write(out / f"{name}{LABELS_SUFFIX}", labels_to_text(labels))
        c = labels.counts()
        conflicting, labeled, scr = self_collision_rate(labels)
        rows.append((name, c["labels"], c["true_spend"], c["decoy"], c["derived"], conflicting,
                     labeled, fmt_rate(scr), len(labels.contradictions)))
    columns = ("heuristic", "labels", "true_spend", "decoy", "derived", "conflicting",
               "labeled_members", "scr", "contradictions")
    summary = out / ("summary.json" if args.json else "summary.csv")
    sys.stdout.write(_emit(args, columns, rows, summary))
    if not args.json:
        print(f"combined: {new_ts} new true spends, {new_decoys} new decoys")
    return EXIT_OK


# -- evaluate ------------------------------------------------------------------

def cmd_evaluate(args) -> int:
    if (args.truth is None) == (not args.reference):
        raise UsageError("give exactly one of --truth or --reference")
    chain = parse_chain_file(args.chain) if args.chain else None
    if args.truth is not None:
        truth = parse_ground_truth(args.truth, chain)
    else:
        truth = labelset_as_truth([_load_labels(p) for p in args.reference])
    rows = []
    for path in args.labels:
        labels = _load_labels(path)
        rep = precision_report(labels, truth, chain)
        conflicting, labeled, scr = self_collision_rate(labels)
        pct = "" if rep.precision is None else f"{100 * rep.precision:.2f}%"
        rows.append((_label_name(path), rep.tp, rep.fp, fmt_rate(rep.precision), pct,
                     rep.true_spend_overlap, rep.true_spend_errors, conflicting, labeled, fmt_rate(scr)))
    columns = ("labels", "tp", "fp", "precision", "precision_pct", "true_spend_tp",
               "true_spend_fp", "conflicting", "labeled_members", "scr")
    sys.stdout.write(_emit(args, columns, rows, args.out))
    return EXIT_OK


# -- compare -------------------------------------------------------------------

def cmd_compare(args) -> int:
    if len(args.labels) < 2:
        raise UsageError("compare needs at least two label files")
    sets = [_load_labels(p) for p in args.labels]
    names = [_label_name(p) for p in args.labels]
    matrix = pairwise_matrix(sets, names)
    rows = []
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            cell = matrix[i][j]
            rows.append((cell.h1, cell.h2, cell.agreements, cell.collisions, cell.size1, cell.size2,
                         fmt_rate(cell.collision_rate), fmt_rate(cell.agreement_rate)))
    columns = ("h1", "h2", "agreements", "collisions", "size1", "size2", "collision_rate",
               "agreement_rate")
    sys.stdout.write(_emit(args, columns, rows, args.out))
    return EXIT_OK


# -- report --------------------------------------------------------------------

def split_by_heuristic(labels: LabelSet) -> list:
    groups = {}
    for label in labels:
        groups.setdefault(label.heuristic, LabelSet(label.heuristic)).add(label)
    return [groups[h] for h in sorted(groups, key=lambda h: h.value)]


def cmd_report(args) -> int:
    chain = parse_chain_file(args.chain)
    combined = _load_labels(args.labels)
    payouts = parse_payouts(args.payouts) if args.payouts else None
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ext = ".json" if args.json else ".csv"

    series = effective_ring_size_series(chain, combined, args.bucket)
    _emit(args, ("period", "mean_effective_ring_size", "mean_nominal_ring_size", "rings"),
          [(b.period, fmt_rate(b.mean_effective_ring_size), fmt_rate(b.mean_nominal_ring_size),
            b.ring_count) for b in series], out / f"effective_ring_size{ext}")

    sets = split_by_heuristic(combined) + [combined.copy(HeuristicId.COMBINED)]
    names = [ls.heuristic.value for ls in sets[:-1]] + ["All"]
    _emit(args, ("period", "heuristic", "decoys", "ring_members", "share"),
          [(r.period, r.heuristic, r.decoys, r.ring_members, fmt_rate(r.share))
           for r in decoy_share_series(chain, sets, args.bucket, names)], out / f"decoy_share{ext}")

    cb_rows = coinbase_output_series(chain, payouts, args.bucket)
    if payouts is None:
        _emit(args, ("period", "coinbase_outputs"),
              [(r.period, r.coinbase_outputs) for r in cb_rows], out / f"coinbase_outputs{ext}")
    else:
        _emit(args, ("period", "coinbase_outputs", "p2pool_outputs", "p2pool_share"),
              [(r.period, r.coinbase_outputs, r.p2pool_outputs, fmt_rate(r.p2pool_share))
               for r in cb_rows], out / f"coinbase_outputs{ext}")
    for name in ("effective_ring_size", "decoy_share", "coinbase_outputs"):
        print(f"wrote {out / (name + ext)}")
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ringtrace", description="Ring-signature ledger traceability analysis.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a synthetic chain, payouts and ground truth")
    g.add_argument("config", help="JSON generator config")
    g.add_argument("out_dir")
    g.add_argument("--json", action="store_true", help="machine-readable summary")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="run heuristics and write one label file per heuristic")
    r.add_argument("chain")
    r.add_argument("out_dir")
    r.add_argument("--heuristics", help="comma-separated names (default: all applicable); valid: "
                   + ", ".join(h.value for h in RUNNABLE))
    r.add_argument("--payouts", help="payouts CSV (required for P2PoolMerge)")
    start, end = H.DEFAULT_WINDOW
    r.add_argument("--window-start", default=start.isoformat(), type=_iso_date)
    r.add_argument("--window-end", default=end.isoformat(), type=_iso_date)
    r.add_argument("--age", type=int, default=H.UNLOCK_AGE, help="decoy-bug age in blocks")
    r.add_argument("--max-inputs", type=_positive_int, default=90)
    r.add_argument("--since", default=H.P2POOL_LAUNCH.isoformat(), type=_iso_date,
                   help="coinbase heuristic start date")
    r.add_argument("--no-since", action="store_true", help="disable the coinbase date gate")
    r.add_argument("--burn-key", action="append", help="burn key (repeatable; replaces defaults)")
    r.add_argument("--json", action="store_true")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("evaluate", help="precision and self-collision rate of label files")
    e.add_argument("labels", nargs="+")
    e.add_argument("--truth", help="ground-truth CSV")
    e.add_argument("--reference", nargs="+", help="reference label files used as truth")
    e.add_argument("--chain", help="chain file used to validate the truth")
    e.add_argument("--out")
    e.add_argument("--json", action="store_true")
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("compare", help="pairwise collision and agreement rates")
    c.add_argument("labels", nargs="+")
    c.add_argument("--out")
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=cmd_compare)

    rp = sub.add_parser("report", help="time-bucketed series tables")
    rp.add_argument("chain")
    rp.add_argument("labels", help="combined label file")
    rp.add_argument("out_dir")
    rp.add_argument("--payouts")
    rp.add_argument("--bucket", choices=BUCKETS, default="month")
    rp.add_argument("--json", action="store_true")
    rp.set_defaults(func=cmd_report)
    return p


def _iso_date(text):
    from datetime import date

    try:
        return date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected YYYY-MM-DD, got {text!r}") from None


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        v = 0
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ringtrace {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RingTraceError, OSError, ValueError) as exc:
        print(f"ringtrace {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
