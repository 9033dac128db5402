"""Readers and writers for the chain, payout and ground-truth text formats.

chain file
    One JSON object per line: ``tx_id``, ``height``, ``timestamp``, ``coinbase``,
    ``extra_tags``, ``inputs`` (lists of absolute global indices) and
    ``outputs`` (``{"g": int, "pk": str}`` objects).
payouts file
    CSV with header ``tx_id,output_global_index,miner_id``.
ground truth file
    CSV with header ``tx_id,input_position,true_spend_global_index``.
"""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .chain import BURN_KEYS, ChainStore, build_chain, make_tx
from .errors import (
    DuplicatePayout,
    IoFailure,
    MalformedLine,
    NonMonotonicHeight,
    TrueSpendNotInRing,
    UnknownRing,
)

PAYOUT_COLUMNS = ("tx_id", "output_global_index", "miner_id")
TRUTH_COLUMNS = ("tx_id", "input_position", "true_spend_global_index")
CHAIN_FIELDS = ("tx_id", "height", "timestamp", "coinbase", "extra_tags", "inputs", "outputs")


@dataclass(frozen=True)
class PayoutRecord:
    tx_id: str
    output_global_index: int
    miner_id: str


@dataclass
class GroundTruth:
    """``ring_id -> true spend`` mapping.

    ``excluded_conflicts`` counts rings dropped while merging label sets
    because they carried more than one TrueSpend.
    """

    entries: dict = field(default_factory=dict)
    excluded_conflicts: int = 0

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, ring_id) -> bool:
        return tuple(ring_id) in self.entries

    def get(self, ring_id, default=None):
        return self.entries.get(tuple(ring_id), default)

    def validate(self, chain: ChainStore) -> None:
        for ring_id, g in self.entries.items():
            try:
                ring = chain.ring(ring_id)
            except UnknownRing:
                raise TrueSpendNotInRing(ring_id, g) from None
            if g not in ring.members:
                raise TrueSpendNotInRing(ring_id, g)


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and rename."""
    path = Path(path)
    try:
        fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _open_text(path):
    try:
        return open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


# -- chain ------------------------------------------------------------------

def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _tx_from_obj(obj, line_no, path):
    if not isinstance(obj, dict):
        raise MalformedLine(line_no, "record is not an object", path)
    missing = [k for k in CHAIN_FIELDS if k not in obj]
    if missing:
        raise MalformedLine(line_no, f"missing field(s) {', '.join(missing)}", path)
    tx_id, height, ts = obj["tx_id"], obj["height"], obj["timestamp"]
    if not isinstance(tx_id, str) or not tx_id:
        raise MalformedLine(line_no, "tx_id must be a non-empty string", path)
    if not _is_int(height) or height < 0:
        raise MalformedLine(line_no, "height must be a non-negative integer", path)
    if not _is_int(ts):
        raise MalformedLine(line_no, "timestamp must be an integer", path)
    if not isinstance(obj["coinbase"], bool):
        raise MalformedLine(line_no, "coinbase must be a boolean", path)
    tags = obj["extra_tags"]
    if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
        raise MalformedLine(line_no, "extra_tags must be an array of strings", path)
    inputs = obj["inputs"]
    if not isinstance(inputs, list) or not all(
            isinstance(ring, list) and all(_is_int(m) and m >= 0 for m in ring) for ring in inputs):
        raise MalformedLine(line_no, "inputs must be an array of arrays of non-negative integers", path)
    outputs = obj["outputs"]
    if not isinstance(outputs, list):
        raise MalformedLine(line_no, "outputs must be an array", path)
    pairs = []
    for out in outputs:
        if not isinstance(out, dict) or not _is_int(out.get("g")) or not isinstance(out.get("pk"), str):
            raise MalformedLine(line_no, "each output needs integer g and string pk", path)
        pairs.append((out["g"], out["pk"]))
    return tx_id, height, ts, obj["coinbase"], tags, inputs, pairs


def read_transactions(stream, path=None, burn_keys=BURN_KEYS) -> list:
    txs = []
    prev = None
    for line_no, line in enumerate(stream, start=1):
        text = line.rstrip("\n")
        if not text.strip():
            raise MalformedLine(line_no, "blank line", path)
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedLine(line_no, f"invalid JSON: {exc.msg}", path) from None
        tx_id, height, ts, coinbase, tags, inputs, outputs = _tx_from_obj(obj, line_no, path)
        if prev is not None and height < prev:
            raise NonMonotonicHeight(len(txs), height, prev, line_no=line_no)
        prev = height
        txs.append(make_tx(tx_id, height, ts, coinbase=coinbase, extra_tags=tags,
                           inputs=inputs, outputs=outputs, burn_keys=burn_keys))
    return txs


def parse_chain_file(path, burn_keys=BURN_KEYS) -> ChainStore:
    with _open_text(path) as fh:
        txs = read_transactions(fh, str(path), burn_keys)
    return build_chain(txs, burn_keys)


def chain_line(tx) -> str:
    obj = {
        "tx_id": tx.tx_id,
        "height": tx.block_height,
        "timestamp": tx.timestamp,
        "coinbase": tx.is_coinbase,
        "extra_tags": list(tx.extra_tags),
        "inputs": [list(ring.members) for ring in tx.inputs],
        "outputs": [{"g": o.global_index, "pk": o.pk} for o in tx.outputs],
    }
    return json.dumps(obj, separators=(",", ":"))


def chain_to_text(chain_or_txs) -> str:
    txs = chain_or_txs.transactions if isinstance(chain_or_txs, ChainStore) else chain_or_txs
    return "".join(chain_line(tx) + "\n" for tx in txs)


def write_chain_file(chain_or_txs, path) -> None:
    atomic_write(path, chain_to_text(chain_or_txs))


# -- delimited tables -------------------------------------------------------

def _rows(stream, columns, path):
    reader = csv.reader(stream)
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != columns:
        raise MalformedLine(1, f"expected header {','.join(columns)}", path)
    for line_no, row in enumerate(reader, start=2):
        if len(row) != len(columns):
            raise MalformedLine(line_no, f"expected {len(columns)} columns, got {len(row)}", path)
        yield line_no, row


def _int_field(text, name, line_no, path) -> int:
    try:
        v = int(text)
    except ValueError:
        raise MalformedLine(line_no, f"{name} is not an integer: {text!r}", path) from None
    if v < 0:
        raise MalformedLine(line_no, f"{name} must be non-negative", path)
    return v


def read_payouts(stream, path=None) -> list:
    records = []
    seen = set()
    for line_no, (tx_id, g, miner) in _rows(stream, PAYOUT_COLUMNS, path):
        g = _int_field(g, "output_global_index", line_no, path)
        if not tx_id or not miner:
            raise MalformedLine(line_no, "tx_id and miner_id must be non-empty", path)
        if (tx_id, g) in seen:
            raise DuplicatePayout(tx_id, g, line_no)
        seen.add((tx_id, g))
        records.append(PayoutRecord(tx_id, g, miner))
    return records


def parse_payouts(path) -> list:
    with _open_text(path) as fh:
        return read_payouts(fh, str(path))


def payouts_to_text(records: Iterable[PayoutRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PAYOUT_COLUMNS)
    for p in records:
        w.writerow((p.tx_id, p.output_global_index, p.miner_id))
    return buf.getvalue()


def write_payouts(records, path) -> None:
    atomic_write(path, payouts_to_text(records))


def read_ground_truth(stream, path=None, chain: Optional[ChainStore] = None) -> GroundTruth:
    entries = {}
    for line_no, (tx_id, pos, g) in _rows(stream, TRUTH_COLUMNS, path):
        ring_id = (tx_id, _int_field(pos, "input_position", line_no, path))
        g = _int_field(g, "true_spend_global_index", line_no, path)
        if ring_id in entries:
            raise MalformedLine(line_no, f"ring {ring_id} listed twice", path)
        if chain is not None:
            try:
                members = chain.ring(ring_id).members
            except UnknownRing:
                raise MalformedLine(line_no, f"ring {ring_id} not in chain", path) from None
            if g not in members:
                raise TrueSpendNotInRing(ring_id, g, line_no)
        entries[ring_id] = g
    return GroundTruth(entries)


def parse_ground_truth(path, chain: Optional[ChainStore] = None) -> GroundTruth:
    with _open_text(path) as fh:
        return read_ground_truth(fh, str(path), chain)


def truth_to_text(truth: GroundTruth) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRUTH_COLUMNS)
    for (tx_id, pos), g in truth.entries.items():
        w.writerow((tx_id, pos, g))
    return buf.getvalue()


def write_ground_truth(truth: GroundTruth, path) -> None:
    atomic_write(path, truth_to_text(truth))
