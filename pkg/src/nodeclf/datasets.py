"""Dataset files and the bundled synthetic corpus generator.

Two ingestion formats: delimited text (comma by default, tab for .tsv)
with a header row, and JSON lines.  Every record must carry non-null text
and label fields; labels are arbitrary strings forming a finite set.

The synthetic generator stands in for private clinical corpora so the
end-to-end tests are self-contained.  Recipe: each class owns one
"planted" token that never appears in any other class plus a small pool
of supporting tokens, and all classes share a common filler pool.  Every
document draws 8-16 tokens i.i.d.: the planted token with probability
0.25, a supporting token with probability 0.25, filler otherwise.  Labels
cycle deterministically so classes are exactly balanced, and the whole
corpus is a pure function of (task, n, seed).
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass
from typing import Optional

from .errors import ConfigError, DataFormatError
from .model import LabeledDataset


@dataclass(frozen=True)
class DatasetFile:
    """Where a dataset lives and which fields to read."""

    path: str
    fmt: str = "auto"          # auto | csv | tsv | jsonl
    text_field: str = "text"
    label_field: str = "label"


def _resolve_format(spec: DatasetFile) -> str:
    if spec.fmt != "auto":
        if spec.fmt not in ("csv", "tsv", "jsonl"):
            raise ConfigError(f"unknown dataset format {spec.fmt!r}")
        return spec.fmt
    lower = spec.path.lower()
    if lower.endswith((".jsonl", ".ndjson")):
        return "jsonl"
    if lower.endswith(".tsv"):
        return "tsv"
    return "csv"


def read_records(spec: DatasetFile) -> list[tuple[str, str]]:
    """(text, label-string) pairs from a dataset file.

    Raises :class:`DataFormatError` with a 1-based line number for
    malformed records and missing fields.
    """
    fmt = _resolve_format(spec)
    try:
        fp = open(spec.path, "r", encoding="utf-8", newline="")
    except OSError as e:
        raise DataFormatError(f"cannot open dataset {spec.path!r}: {e}") from e
    with fp:
        if fmt == "jsonl":
            rows = _read_jsonl(fp, spec)
        else:
            rows = _read_delimited(fp, spec, "\t" if fmt == "tsv" else ",")
    if not rows:
        raise DataFormatError(f"{spec.path}: no records found")
    return rows


def _read_jsonl(fp, spec: DatasetFile) -> list[tuple[str, str]]:
    rows = []
    for lineno, raw in enumerate(fp, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except ValueError as e:
            raise DataFormatError(
                f"{spec.path}:{lineno}: invalid JSON: {e}", line=lineno
            ) from e
        if not isinstance(obj, dict):
            raise DataFormatError(
                f"{spec.path}:{lineno}: expected a JSON object", line=lineno
            )
        rows.append(_pick_fields(obj, spec, lineno))
    return rows


def _read_delimited(fp, spec: DatasetFile, delimiter: str) -> list[tuple[str, str]]:
    reader = csv.DictReader(fp, delimiter=delimiter)
    if reader.fieldnames is None:
        raise DataFormatError(f"{spec.path}: missing header row", line=1)
    for field in (spec.text_field, spec.label_field):
        if field not in reader.fieldnames:
            raise DataFormatError(
                f"{spec.path}:1: header has no {field!r} column "
                f"(columns: {', '.join(reader.fieldnames)})",
                line=1,
            )
    rows = []
    for record in reader:
        lineno = reader.line_num
        rows.append(_pick_fields(record, spec, lineno))
    return rows


def _pick_fields(record: dict, spec: DatasetFile, lineno: int) -> tuple[str, str]:
    for field in (spec.text_field, spec.label_field):
        if field not in record or record[field] is None:
            raise DataFormatError(
                f"{spec.path}:{lineno}: record has no {field!r} field",
                line=lineno,
            )
    return str(record[spec.text_field]), str(record[spec.label_field])


def to_dataset(rows: list[tuple[str, str]],
               label_names: Optional[list[str]] = None
               ) -> tuple[LabeledDataset, list[str]]:
    """Map label strings to class indices.

    Without ``label_names`` the classes are the sorted distinct labels.
    With it (e.g. a loaded model's classes), unknown labels raise
    :class:`DataFormatError`.
    """
    if label_names is None:
        label_names = sorted({label for _, label in rows})
    index = {name: i for i, name in enumerate(label_names)}
    examples = []
    for i, (text, label) in enumerate(rows, start=1):
        if label not in index:
            raise DataFormatError(
                f"record {i}: label {label!r} is not one of {label_names}",
                line=i,
            )
        examples.append((text, index[label]))
    return LabeledDataset(examples), list(label_names)


# ---------------------------------------------------------------------------
# synthetic corpora

_COMMON = (
    "patient seen today arrived triage nurse notes chart exam vitals history "
    "review plan clinic report visit care team room time status check desk "
    "window form record staff board shift"
).split()

# class -> (planted token, supporting pool); the planted token is what the
# saliency tests expect to surface for its class
TASKS: dict[str, dict[str, tuple[str, tuple[str, ...]]]] = {
    "admit": {
        "admit": ("ambulance", ("monitor", "acute", "oxygen", "transfer", "severe")),
        "home": ("walkin", ("routine", "mild", "rest", "followup", "improved")),
    },
    "sentiment": {
        "negative": ("terrible", ("poor", "bad", "worse", "unhappy", "awful")),
        "neutral": ("ordinary", ("average", "typical", "plain", "usual", "fine")),
        "positive": ("excellent", ("great", "good", "better", "happy", "superb")),
    },
}


def planted_token(task: str, label: str) -> str:
    """The discriminative token planted for ``label`` in ``task``."""
    return TASKS[task][label][0]


def generate_synthetic(task: str, n: int, seed: int) -> list[tuple[str, str]]:
    """Seeded synthetic corpus; see the module docstring for the recipe."""
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}, expected one of {sorted(TASKS)}")
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    classes = sorted(TASKS[task])
    rng = random.Random(seed)
    rows = []
    for i in range(n):
        label = classes[i % len(classes)]
        planted, support = TASKS[task][label]
        length = rng.randint(8, 16)
        words = []
        for _ in range(length):
            r = rng.random()
            if r < 0.25:
                words.append(planted)
            elif r < 0.5:
                words.append(rng.choice(support))
            else:
                words.append(rng.choice(_COMMON))
        rows.append((" ".join(words), label))
    return rows


def write_dataset_csv(rows: list[tuple[str, str]], path: str) -> None:
    """CSV with a text,label header; byte-stable for identical rows."""
    with open(path, "w", encoding="utf-8", newline="") as fp:
        writer = csv.writer(fp, lineterminator="\n")
        writer.writerow(["text", "label"])
        writer.writerows(rows)
