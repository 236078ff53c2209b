"""Product records, tokenization, distant-supervision BIOE labeling and splits."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

TAGS = ("B", "I", "O", "E")
TAG_INDEX = {t: i for i, t in enumerate(TAGS)}
B, I, O, E = range(4)

# Marks the seam between title and description when both fields are tagged.
DESC_TOKEN = "<DESC>"


@dataclass
class ProductRecord:
    id: str
    title: str
    category_id: str
    description: str = ""
    gold_values: dict[str, list[str]] = field(default_factory=dict)

    def values(self, attribute: str) -> list[str]:
        return list(self.gold_values.get(attribute, []))


@dataclass(frozen=True)
class TokenizedText:
    tokens: tuple[str, ...]
    normalized: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    def __add__(self, other: "TokenizedText") -> "TokenizedText":
        return TokenizedText(self.tokens + other.tokens, self.normalized + other.normalized)


def tokenize(text: str) -> TokenizedText:
    """Split on whitespace runs; punctuation stays attached to its word."""
    tokens = tuple(text.split())
    return TokenizedText(tokens, tuple(t.lower() for t in tokens))


def normalize_value(value: str) -> str:
    return " ".join(value.lower().split())


def product_text(record: ProductRecord, fields: str = "title") -> TokenizedText:
    """Token sequence for a product; ``fields`` is ``title`` or ``title+description``."""
    text = tokenize(record.title)
    if fields == "title+description" and record.description.strip():
        text = text + TokenizedText((DESC_TOKEN,), (DESC_TOKEN,)) + tokenize(record.description)
    elif fields not in ("title", "title+description"):
        raise ValueError(f"unknown fields setting {fields!r}")
    return text


def is_valid_tags(tags: Sequence[str]) -> bool:
    """Check the BIOE grammar: I/E only after B or I, and never B directly after B or I."""
    prev = "O"
    for tag in tags:
        if tag not in TAG_INDEX:
            return False
        if tag in ("I", "E") and prev not in ("B", "I"):
            return False
        if tag in ("B", "O") and prev == "I":
            return False
        if tag == "B" and prev == "B":
            return False
        prev = tag
    return prev != "I"


def label_distant(text: TokenizedText, values: Iterable[str]) -> list[str]:
    """Tag known attribute values in ``text`` with BIOE labels.

    Matching is exact and case-insensitive at token level. Candidate spans are
    taken longest first, then leftmost, skipping any span that overlaps an
    accepted one. A single-token match is tagged ``B``. A match that would
    put ``B`` directly after a lone ``B`` is skipped to keep the grammar.
    """
    patterns = set()
    for value in values:
        toks = tokenize(value).normalized
        if not toks:
            raise ValueError("attribute values must be non-empty strings")
        patterns.add(toks)

    n = len(text)
    norm = text.normalized
    candidates = []
    for pat in patterns:
        size = len(pat)
        for start in range(n - size + 1):
            if norm[start:start + size] == pat:
                candidates.append((start, size))
    candidates.sort(key=lambda c: (-c[1], c[0]))

    tags = ["O"] * n
    starts: set[int] = set()
    lone_starts: set[int] = set()
    for start, size in candidates:
        if any(tags[k] != "O" for k in range(start, start + size)):
            continue
        if start - 1 in lone_starts or (size == 1 and start + 1 in starts):
            continue
        starts.add(start)
        if size == 1:
            lone_starts.add(start)
            tags[start] = "B"
        else:
            tags[start] = "B"
            for k in range(start + 1, start + size - 1):
                tags[k] = "I"
            tags[start + size - 1] = "E"
    return tags


def _parse_record(obj: dict) -> ProductRecord:
    if not isinstance(obj, dict):
        raise ValueError("record is not a JSON object")
    pid = obj["id"]
    title = obj["title"]
    category = obj["category_id"]
    if not isinstance(pid, str) or not pid:
        raise ValueError("id must be a non-empty string")
    if not isinstance(title, str) or not isinstance(category, str):
        raise ValueError("title and category_id must be strings")
    description = obj.get("description") or ""
    attrs = obj.get("attributes") or {}
    if not isinstance(attrs, dict):
        raise ValueError("attributes must be an object")
    gold = {}
    for name, vals in attrs.items():
        if not isinstance(vals, list) or not all(isinstance(v, str) for v in vals):
            raise ValueError(f"attribute {name!r} must map to an array of strings")
        gold[name] = [v for v in vals if v.strip()]
    return ProductRecord(pid, title, category, description, gold)


def load_products(path, taxonomy=None) -> tuple[list[ProductRecord], int]:
    """Read a JSON-lines product file.

    Malformed lines, duplicate ids and (when ``taxonomy`` is given) unknown
    categories are logged with their line number and skipped.

    Returns
    -------
    records : list of ProductRecord
        Valid records in file order.
    skipped : int
        Number of lines that were rejected.
    """
    records = []
    seen = set()
    skipped = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = _parse_record(json.loads(line))
                if rec.id in seen:
                    raise ValueError(f"duplicate id {rec.id!r}")
                if taxonomy is not None and rec.category_id not in taxonomy:
                    raise ValueError(f"unknown category {rec.category_id!r}")
            except (ValueError, KeyError, TypeError) as exc:
                logger.warning("%s:%d: skipping malformed record (%s)", path, lineno, exc)
                skipped += 1
                continue
            seen.add(rec.id)
            records.append(rec)
    return records, skipped


def record_to_json(record: ProductRecord) -> dict:
    return {
        "id": record.id,
        "title": record.title,
        "description": record.description,
        "category_id": record.category_id,
        "attributes": record.gold_values,
    }


def write_products(records: Iterable[ProductRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_json(rec), ensure_ascii=False) + "\n")


def split_sizes(n: int, ratios: Sequence[float]) -> list[int]:
    """Largest-remainder apportionment; ties go to the earlier split."""
    fracs = [Fraction(r).limit_denominator(10**6) for r in ratios]
    if sum(fracs) != 1 or any(f < 0 for f in fracs):
        raise ValueError(f"ratios must be non-negative and sum to 1, got {ratios}")
    exact = [f * n for f in fracs]
    sizes = [int(x) for x in exact]
    order = sorted(range(len(exact)), key=lambda i: (-(exact[i] - sizes[i]), i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    return sizes


def split_dataset(records: Sequence, ratios: Sequence[float] = (0.6, 0.2, 0.2), seed: int = 0):
    """Seeded shuffle followed by a train/validation/test partition."""
    sizes = split_sizes(len(records), ratios)
    perm = np.random.default_rng(seed).permutation(len(records))
    parts = []
    start = 0
    for size in sizes:
        parts.append([records[i] for i in perm[start:start + size]])
        start += size
    return tuple(parts)


def dump_jsonl(rows: Iterable[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")


def read_jsonl(path) -> list[dict]:
    text = Path(path).read_text(encoding="utf-8")
    return [json.loads(line) for line in text.splitlines() if line.strip()]
