"""Panel data ingestion, temporal tagging of columns and balanced column sampling.

Column naming convention used by :func:`tag_column`:

* ``delta_<anything>_<Y1>_<Y2>`` with ``Y1 < Y2``  ->  ``Delta(Y1, Y2)``, effective at ``Y2``
* ``<anything><Y1>_<Y2>`` (year range, no delta prefix)  ->  ``Static(Y2)``
  (the configured outcome column uses ``Static(Y1)`` instead, so that every
  regressor observed before the event window precedes it)
* a name containing exactly one 4-digit year token  ->  ``Static(year)``
* anything else  ->  ``Atemporal`` (precedes every year)

Any column can be retagged through ``IngestConfig.tag_overrides``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

_DELTA_RE = re.compile(r"^delta_.*?(?<!\d)((?:19|20)\d{2})_((?:19|20)\d{2})$", re.IGNORECASE)
_RANGE_RE = re.compile(r"(?<!\d)((?:19|20)\d{2})_((?:19|20)\d{2})(?!\d)")
_YEAR_RE = re.compile(r"(?<!\d)((?:19|20)\d{2})(?!\d)")
_MISSING_TOKENS = {"", "na", "nan", "null", "none"}


class DataError(ValueError):
    """Raised when a dataset cannot be loaded or sampled."""


@dataclass(frozen=True)
class TemporalTag:
    kind: str  # "delta" | "static" | "atemporal"
    start: int | None = None
    end: int | None = None

    def __post_init__(self):
        if self.kind == "delta":
            if self.start is None or self.end is None or not self.start < self.end:
                raise ValueError(f"Delta tag needs from_year < to_year, got {self.start}, {self.end}")
        elif self.kind == "static":
            if self.end is None:
                raise ValueError("Static tag needs a year")
        elif self.kind != "atemporal":
            raise ValueError(f"unknown tag kind {self.kind!r}")

    @classmethod
    def delta(cls, from_year: int, to_year: int) -> "TemporalTag":
        return cls("delta", from_year, to_year)

    @classmethod
    def static(cls, year: int) -> "TemporalTag":
        return cls("static", None, year)

    @classmethod
    def atemporal(cls) -> "TemporalTag":
        return cls("atemporal")

    @property
    def effective_time(self) -> float:
        """Year used for precedence checks; deltas are anchored to their later year."""
        if self.kind == "atemporal":
            return -math.inf
        return self.end

    def __str__(self) -> str:
        if self.kind == "delta":
            return f"Delta({self.start},{self.end})"
        if self.kind == "static":
            return f"Static({self.end})"
        return "Atemporal"

    @classmethod
    def parse(cls, text: str) -> "TemporalTag":
        """Parse ``delta:2015:2016``, ``static:2016`` or ``atemporal``."""
        parts = text.strip().lower().split(":")
        try:
            if parts[0] == "delta" and len(parts) == 3:
                return cls.delta(int(parts[1]), int(parts[2]))
            if parts[0] == "static" and len(parts) == 2:
                return cls.static(int(parts[1]))
            if parts == ["atemporal"]:
                return cls.atemporal()
        except ValueError as exc:
            raise DataError(f"bad tag override {text!r}: {exc}") from None
        raise DataError(f"bad tag override {text!r}")


def tag_column(name: str, outcome: bool = False) -> TemporalTag:
    """Temporal tag implied by a column name (total, pure function)."""
    m = _DELTA_RE.match(name)
    if m:
        y1, y2 = int(m.group(1)), int(m.group(2))
        if y1 < y2:
            return TemporalTag.delta(y1, y2)
    ranges = _RANGE_RE.findall(name)
    if len(ranges) == 1:
        y1, y2 = (int(y) for y in ranges[0])
        return TemporalTag.static(min(y1, y2) if outcome else max(y1, y2))
    years = _YEAR_RE.findall(name)
    if len(years) == 1:
        return TemporalTag.static(int(years[0]))
    return TemporalTag.atemporal()


@dataclass(frozen=True)
class ColumnMeta:
    name: str
    kind: str  # "continuous" | "binary"
    tag: TemporalTag


@dataclass
class IngestConfig:
    treatment: str
    outcome: str
    tag_overrides: dict[str, str] = field(default_factory=dict)
    binary_columns: list[str] = field(default_factory=list)
    missing: str = "drop"  # "drop" | "error"

    @classmethod
    def from_json(cls, path: str | Path, **overrides) -> "IngestConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        raw.update({k: v for k, v in overrides.items() if v is not None})
        unknown = set(raw) - {"treatment", "outcome", "tag_overrides", "binary_columns", "missing"}
        if unknown:
            raise DataError(f"unknown ingest config keys: {sorted(unknown)}")
        if "treatment" not in raw or "outcome" not in raw:
            raise DataError("ingest config must name treatment and outcome")
        return cls(**raw)


@dataclass
class PanelDataset:
    columns: list[ColumnMeta]
    values: np.ndarray
    treatment: str
    outcome: str
    rows_dropped: int = 0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise DataError("duplicate column names")
        if self.values.ndim != 2 or self.values.shape[1] != len(names):
            raise DataError(f"values shape {self.values.shape} does not match {len(names)} columns")
        for role, name in (("treatment", self.treatment), ("outcome", self.outcome)):
            if name not in names:
                raise DataError(f"{role} column {name!r} not found")
        self._index = {n: i for i, n in enumerate(names)}

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def meta(self, name: str) -> ColumnMeta:
        return self.columns[self._index[name]]

    def is_binary(self, name: str) -> bool:
        return self.meta(name).kind == "binary"

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self._index[name]]

    def matrix(self, names: Sequence[str]) -> np.ndarray:
        return self.values[:, [self._index[n] for n in names]]

    def tags(self) -> dict[str, TemporalTag]:
        return {c.name: c.tag for c in self.columns}

    def subset(self, names: Iterable[str]) -> "PanelDataset":
        names = list(names)
        return PanelDataset(
            columns=[self.meta(n) for n in names],
            values=self.matrix(names),
            treatment=self.treatment,
            outcome=self.outcome,
            rows_dropped=self.rows_dropped,
        )

    @classmethod
    def from_array(
        cls,
        names: Sequence[str],
        values: np.ndarray,
        treatment: str,
        outcome: str,
        tag_overrides: dict[str, str] | None = None,
        binary_columns: Iterable[str] = (),
    ) -> "PanelDataset":
        values = np.asarray(values, dtype=float)
        overrides = tag_overrides or {}
        binary_columns = set(binary_columns)
        cols = []
        for j, name in enumerate(names):
            if name in overrides:
                tag = TemporalTag.parse(overrides[name])
            else:
                tag = tag_column(name, outcome=(name == outcome))
            kind = "binary" if name in binary_columns or _looks_binary(values[:, j]) else "continuous"
            cols.append(ColumnMeta(name, kind, tag))
        return cls(cols, values, treatment, outcome)


def _looks_binary(col: np.ndarray) -> bool:
    uniq = np.unique(col)
    return uniq.size == 2 and uniq[0] == 0.0 and uniq[1] == 1.0


def load_csv(path: str | Path, config: IngestConfig) -> PanelDataset:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        for role, name in (("treatment", config.treatment), ("outcome", config.outcome)):
            if name not in header:
                raise DataError(f"{path}: {role} column {name!r} not in header")
        rows: list[list[float]] = []
        dropped = 0
        for lineno, raw in enumerate(reader, start=2):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(raw)}")
            row, missing = [], False
            for col, cell in zip(header, raw):
                cell = cell.strip()
                if cell.lower() in _MISSING_TOKENS:
                    if config.missing == "error":
                        raise DataError(f"{path}:{lineno}: missing value in column {col!r}")
                    missing = True
                    row.append(math.nan)
                    continue
                try:
                    row.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}:{lineno}: non-numeric cell {cell!r} in column {col!r}"
                    ) from None
            if missing:
                dropped += 1
            else:
                rows.append(row)
    if not rows:
        raise DataError(f"{path}: no complete data rows")
    if dropped:
        log.info("dropped %d rows with missing values from %s", dropped, path)
    ds = PanelDataset.from_array(
        header,
        np.array(rows),
        config.treatment,
        config.outcome,
        tag_overrides=config.tag_overrides,
        binary_columns=config.binary_columns,
    )
    ds.rows_dropped = dropped
    return ds


DEFAULT_BUCKETS = (
    TemporalTag.delta(2015, 2016),
    TemporalTag.delta(2016, 2017),
    TemporalTag.static(2015),
    TemporalTag.static(2016),
    TemporalTag.static(2017),
)


def bucket_allocation(
    supply: Sequence[int], n_draw: int, remainder_bucket: int = -1
) -> list[int]:
    """How many columns to draw per bucket.

    Each bucket gets ``n_draw // len(supply)``, the remainder goes to
    ``remainder_bucket``.  Shortfalls are pushed to the remainder bucket first,
    then to the other buckets in order.
    """
    k = len(supply)
    rb = remainder_bucket % k
    if sum(supply) < n_draw:
        raise DataError(f"only {sum(supply)} eligible columns for {n_draw} draws")
    quota = [n_draw // k] * k
    quota[rb] += n_draw - sum(quota)
    take = [min(q, s) for q, s in zip(quota, supply)]
    deficit = n_draw - sum(take)
    for b in [rb] + [i for i in range(k) if i != rb]:
        if deficit == 0:
            break
        extra = min(deficit, supply[b] - take[b])
        take[b] += extra
        deficit -= extra
    return take


def sample_balanced_subset(
    ds: PanelDataset,
    m: int,
    rng_seed: int,
    buckets: Sequence[TemporalTag] = DEFAULT_BUCKETS,
) -> list[str]:
    """Treatment, outcome and ``m - 2`` columns drawn evenly across temporal buckets."""
    if m < 2:
        raise DataError(f"M must be at least 2, got {m}")
    mandatory = [ds.treatment, ds.outcome]
    pools = [
        sorted(c.name for c in ds.columns if c.tag == b and c.name not in mandatory)
        for b in buckets
    ]
    take = bucket_allocation([len(p) for p in pools], m - 2)
    rng = np.random.default_rng(rng_seed)
    chosen = list(mandatory)
    for pool, n in zip(pools, take):
        if n:
            idx = rng.choice(len(pool), size=n, replace=False)
            chosen.extend(pool[i] for i in idx)
    return chosen
