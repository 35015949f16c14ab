"""Record loading and narrative tokenization into word-level n-gram terms."""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import DuplicateIdError, ParseError

_APOSTROPHES = re.compile(r"['’]")
_WORD = re.compile(r"[^\W_]+")


@dataclass(frozen=True)
class Record:
    id: str
    narrative: str
    category: str = ""
    series: str | None = None

    def to_dict(self) -> dict:
        return {"id": self.id, "narrative": self.narrative,
                "category": self.category, "series": self.series}


class RecordSet(Sequence[Record]):
    """Ordered collection of records with unique ids."""

    def __init__(self, records: Iterable[Record] = ()):
        self._records: list[Record] = []
        self._index: dict[str, int] = {}
        for rec in records:
            self.append(rec)

    def append(self, rec: Record) -> None:
        if not rec.id:
            raise ParseError("record id must be non-empty")
        if rec.id in self._index:
            raise DuplicateIdError(rec.id)
        self._index[rec.id] = len(self._records)
        self._records.append(rec)

    def __getitem__(self, i):
        return self._records[i]

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[Record]:
        return iter(self._records)

    def by_id(self, record_id: str) -> Record:
        return self._records[self._index[record_id]]

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self._records]

    @property
    def series_labels(self) -> list[str | None]:
        return [r.series for r in self._records]


@dataclass(frozen=True)
class TokenizedDoc:
    record_id: str
    terms: tuple[str, ...] = field(default_factory=tuple)


def _record_from_mapping(row: dict, line: int) -> Record:
    for key in ("id", "narrative"):
        if key not in row or row[key] is None:
            raise ParseError(f"missing required field {key!r}", line)
    series = row.get("series")
    if series == "":
        series = None
    return Record(
        id=str(row["id"]),
        narrative=str(row["narrative"]),
        category=str(row.get("category") or ""),
        series=None if series is None else str(series),
    )


def load_records(path: str | Path, format: str | None = None) -> RecordSet:
    """Read records from a JSONL or CSV file, preserving file order.

    ``format`` defaults to the file suffix. Raises ``FileNotFoundError`` for a
    missing file, :class:`ParseError` (with line number) for malformed rows and
    :class:`DuplicateIdError` when two rows share an id.
    """
    path = Path(path)
    if format is None:
        format = path.suffix.lstrip(".").lower()
    if format not in ("jsonl", "csv"):
        raise ValueError(f"unsupported record format {format!r}")
    records = RecordSet()
    with path.open("r", encoding="utf-8", newline="") as fh:
        if format == "jsonl":
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"invalid JSON ({exc.msg})", lineno) from None
                if not isinstance(row, dict):
                    raise ParseError("expected a JSON object", lineno)
                records.append(_record_from_mapping(row, lineno))
        else:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                return records
            missing = {"id", "narrative"} - set(reader.fieldnames)
            if missing:
                raise ParseError(f"header lacks columns {sorted(missing)}", 1)
            for row in reader:
                if None in row:
                    raise ParseError("too many fields", reader.line_num)
                records.append(_record_from_mapping(row, reader.line_num))
    return records


def save_records(records: Iterable[Record], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """One term per line; blank lines and ``#`` comments ignored. ``None`` loads the bundled English list."""
    if path is None:
        text = resources.files("crimeseries.data").joinpath("stopwords_en.txt").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    words = (ln.strip().casefold() for ln in text.splitlines())
    return frozenset(w for w in words if w and not w.startswith("#"))


def clean_text(raw: str, stopwords: Iterable[str] = frozenset()) -> list[str]:
    # casefold rather than lower so that upper() -> clean is stable for e.g. "ß"
    text = _APOSTROPHES.sub("", raw.casefold())
    stop = stopwords if isinstance(stopwords, (set, frozenset)) else frozenset(stopwords)
    return [tok for tok in _WORD.findall(text) if tok not in stop]


def trigrams(tokens: Sequence[str], width: int = 3) -> list[str]:
    """Sliding windows of ``width`` tokens joined by single spaces."""
    if width < 1:
        raise ValueError("width must be >= 1")
    return [" ".join(tokens[i:i + width]) for i in range(len(tokens) - width + 1)]


def tokenize_corpus(records: Iterable[Record], stopwords: Iterable[str] = frozenset(),
                    width: int = 3) -> list[TokenizedDoc]:
    stop = frozenset(stopwords)
    return [TokenizedDoc(rec.id, tuple(trigrams(clean_text(rec.narrative, stop), width)))
            for rec in records]
