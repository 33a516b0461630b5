"""Data model and CSV ingestion for typicality tables, metaphors, and human responses.

A dataset lives in one directory holding three UTF-8 CSV files:

* ``typicality.csv`` — header ``category,feature,value``; one row per
  (category, feature) cell.  ``value`` is a normalized typicality in [0, 1],
  or a mean Likert rating in [1, 7] when loading with ``raw_ratings=True``.
  The grid must be dense: every category needs a value for every feature.
  The feature vocabulary is the set of features in this file, in order of
  first appearance; that order is the canonical feature index everywhere.
* ``metaphors.csv`` — header ``id,topic,vehicle,class,familiarity``;
  ``class`` is ``inherent`` or ``non_inherent``; ``familiarity`` may be empty.
* ``human.csv`` — header ``metaphor_id,feature,count``; counts are
  non-negative reals (raw selection counts or pre-normalized weights) and are
  normalized per metaphor at load.  Features without a row get weight 0.

Floats are written with 12 significant digits, which makes
``load -> save -> load`` exact: a 12-digit decimal survives the
decimal/binary round trip unchanged.

All loaded types are frozen and their arrays read-only, so a dataset can be
shared freely across parallel workers; loading itself is single-threaded.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterator, Mapping

import numpy as np

from .errors import DatasetError, UnknownCategoryError

ROW_SUM_TOL = 1e-9

INHERENT = "inherent"
NON_INHERENT = "non_inherent"
_CLASSES = (INHERENT, NON_INHERENT)

_FLOAT_FMT = ".12g"


def _fmt(value: float) -> str:
    return format(float(value), _FLOAT_FMT)


@dataclass(frozen=True)
class FeatureVocab:
    """Ordered feature identifiers; position in ``features`` is the feature index."""

    features: tuple[str, ...]

    def __post_init__(self):
        if len(self.features) < 2:
            raise DatasetError("feature vocabulary needs at least 2 features")
        seen = set()
        for name in self.features:
            if not name:
                raise DatasetError("empty feature identifier")
            if name in seen:
                raise DatasetError(f"duplicate feature identifier {name!r}")
            seen.add(name)

    @cached_property
    def _index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.features)}

    def index(self, feature: str) -> int:
        try:
            return self._index[feature]
        except KeyError:
            raise DatasetError(f"unknown feature {feature!r}") from None

    def __len__(self) -> int:
        return len(self.features)

    def __iter__(self) -> Iterator[str]:
        return iter(self.features)

    def __contains__(self, feature: str) -> bool:
        return feature in self._index


@dataclass(frozen=True)
class TypicalityTable:
    """Normalized typicality of each feature for each category noun.

    ``values[c, i]`` is the typicality of feature i for category c; valid
    rows are non-negative and sum to 1 (checked by :func:`validate`, not by
    the constructor, so that a report can be produced for dirty data).
    """

    categories: tuple[str, ...]
    vocab: FeatureVocab
    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.shape != (len(self.categories), len(self.vocab)):
            raise DatasetError(
                f"typicality matrix shape {arr.shape} does not match "
                f"{len(self.categories)} categories x {len(self.vocab)} features"
            )
        seen = set()
        for name in self.categories:
            if not name:
                raise DatasetError("empty category identifier")
            if name in seen:
                raise DatasetError(f"duplicate category identifier {name!r}")
            seen.add(name)
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @cached_property
    def _index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.categories)}

    @property
    def n(self) -> int:
        """Feature count."""
        return len(self.vocab)

    def category_index(self, category: str) -> int:
        try:
            return self._index[category]
        except KeyError:
            raise UnknownCategoryError(category) from None

    def __contains__(self, category: str) -> bool:
        return category in self._index

    def row(self, category: str) -> np.ndarray:
        return self.values[self.category_index(category)]


@dataclass(frozen=True)
class RawRatingsTable:
    """Mean Likert ratings, one row per (category, feature) cell."""

    rows: tuple[tuple[str, str, float], ...]


@dataclass(frozen=True)
class MetaphorItem:
    """A topic-vehicle pair, as in "Workers are ants" (topic=workers, vehicle=ants).

    ``inherence`` records whether the intended meaning is among the vehicle's
    salient semantic norms ("inherent") or not ("non_inherent"); it is an
    input label, not recomputed.  ``None`` marks an ad-hoc pair built outside
    a dataset (e.g. from the command line).
    """

    id: str
    topic: str
    vehicle: str
    inherence: str | None = None
    familiarity: float | None = None

    def __post_init__(self):
        if self.topic == self.vehicle:
            raise DatasetError(f"metaphor {self.id!r}: topic and vehicle are both {self.topic!r}")
        if self.inherence is not None and self.inherence not in _CLASSES:
            raise DatasetError(
                f"metaphor {self.id!r}: class must be one of {_CLASSES}, got {self.inherence!r}"
            )


@dataclass(frozen=True)
class HumanResponseTable:
    """Normalized human interpretation distribution per metaphor id."""

    vocab: FeatureVocab
    responses: Mapping[str, np.ndarray]

    def distribution(self, metaphor_id: str) -> np.ndarray:
        try:
            return self.responses[metaphor_id]
        except KeyError:
            raise DatasetError(f"no human responses for metaphor {metaphor_id!r}") from None

    def __contains__(self, metaphor_id: str) -> bool:
        return metaphor_id in self.responses

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(self.responses)


@dataclass(frozen=True)
class ValidationReport:
    """List of invariant violations; empty iff the dataset is usable."""

    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        return "ok" if self.ok else "\n".join(self.violations)


def normalize_ratings(raw: RawRatingsTable) -> TypicalityTable:
    """Turn mean ratings into a typicality table by row-sum normalization.

    Every (category, feature) cell must be present; missing cells are an
    error rather than imputed zeros, since a zero typicality would make the
    speaker utility undefined.  Ratings only need to be positive here; the
    Likert [1, 7] range is enforced at CSV ingestion.  Row-sum division
    makes the operation scale-invariant per category and idempotent on
    already-normalized rows.
    """
    categories: list[str] = []
    features: list[str] = []
    cat_seen: set[str] = set()
    feat_seen: set[str] = set()
    cells: dict[tuple[str, str], float] = {}
    for category, feature, rating in raw.rows:
        key = (category, feature)
        if key in cells:
            raise DatasetError(f"duplicate rating for ({category!r}, {feature!r})")
        if not (rating > 0 and math.isfinite(rating)):
            raise DatasetError(
                f"rating for ({category!r}, {feature!r}) is {rating!r}, not a positive number"
            )
        if category not in cat_seen:
            cat_seen.add(category)
            categories.append(category)
        if feature not in feat_seen:
            feat_seen.add(feature)
            features.append(feature)
        cells[key] = rating

    vocab = FeatureVocab(tuple(features))
    missing = [
        (c, f) for c in categories for f in features if (c, f) not in cells
    ]
    if missing:
        shown = ", ".join(f"({c!r}, {f!r})" for c, f in missing[:5])
        raise DatasetError(f"{len(missing)} missing rating cell(s): {shown}")

    matrix = np.array(
        [[cells[(c, f)] for f in features] for c in categories], dtype=float
    )
    sums = matrix.sum(axis=1)
    if np.any(sums <= 0):  # unreachable with ratings >= 1, guarded anyway
        bad = categories[int(np.argmin(sums))]
        raise DatasetError(f"ratings for category {bad!r} sum to zero")
    return TypicalityTable(tuple(categories), vocab, matrix / sums[:, None])


def _read_rows(path: Path, expected_header: list[str]) -> list[tuple[int, list[str]]]:
    """Read CSV rows as (line number, fields), enforcing the exact header."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path.name}: empty file") from None
        if header != expected_header:
            raise DatasetError(
                f"{path.name} line 1: expected header {','.join(expected_header)!r}, "
                f"got {','.join(header)!r}"
            )
        rows = []
        for lineno, fields in enumerate(reader, start=2):
            if not fields:
                continue
            if len(fields) != len(expected_header):
                raise DatasetError(
                    f"{path.name} line {lineno}: expected {len(expected_header)} fields, "
                    f"got {len(fields)}"
                )
            rows.append((lineno, fields))
        return rows


def _parse_float(text: str, where: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise DatasetError(f"{where}: not a number: {text!r}") from None


def read_dataset(
    data_dir, raw_ratings: bool = False
) -> tuple[TypicalityTable, tuple[MetaphorItem, ...], HumanResponseTable]:
    """Parse the three dataset CSVs without semantic validation.

    Structural problems (missing files, malformed rows, duplicate keys,
    unknown references) raise; invariant checks such as row sums are left to
    :func:`validate` so that dirty data can still be reported on.
    """
    data_dir = Path(data_dir)
    typ_rows = _read_rows(data_dir / "typicality.csv", ["category", "feature", "value"])

    categories: list[str] = []
    features: list[str] = []
    cat_seen: set[str] = set()
    feat_seen: set[str] = set()
    cells: dict[tuple[str, str], float] = {}
    for lineno, (category, feature, value) in typ_rows:
        where = f"typicality.csv line {lineno}"
        if not category or not feature:
            raise DatasetError(f"{where}: empty category or feature identifier")
        key = (category, feature)
        if key in cells:
            raise DatasetError(f"{where}: duplicate cell ({category!r}, {feature!r})")
        cells[key] = _parse_float(value, where)
        if category not in cat_seen:
            cat_seen.add(category)
            categories.append(category)
        if feature not in feat_seen:
            feat_seen.add(feature)
            features.append(feature)

    if raw_ratings:
        for (category, feature), value in cells.items():
            if not 1.0 <= value <= 7.0:
                raise DatasetError(
                    f"typicality.csv: rating for ({category!r}, {feature!r}) is "
                    f"{value!r}, outside the Likert range [1, 7]"
                )
        table = normalize_ratings(
            RawRatingsTable(tuple((c, f, v) for (c, f), v in cells.items()))
        )
    else:
        vocab = FeatureVocab(tuple(features))
        missing = [(c, f) for c in categories for f in features if (c, f) not in cells]
        if missing:
            shown = ", ".join(f"({c!r}, {f!r})" for c, f in missing[:5])
            raise DatasetError(f"typicality.csv: {len(missing)} missing cell(s): {shown}")
        matrix = np.array(
            [[cells[(c, f)] for f in features] for c in categories], dtype=float
        )
        table = TypicalityTable(tuple(categories), vocab, matrix)

    met_rows = _read_rows(
        data_dir / "metaphors.csv", ["id", "topic", "vehicle", "class", "familiarity"]
    )
    items: list[MetaphorItem] = []
    item_ids: set[str] = set()
    for lineno, (item_id, topic, vehicle, klass, familiarity) in met_rows:
        where = f"metaphors.csv line {lineno}"
        if not item_id:
            raise DatasetError(f"{where}: empty metaphor id")
        if item_id in item_ids:
            raise DatasetError(f"{where}: duplicate metaphor id {item_id!r}")
        item_ids.add(item_id)
        if klass not in _CLASSES:
            raise DatasetError(f"{where}: class must be one of {_CLASSES}, got {klass!r}")
        for noun, role in ((topic, "topic"), (vehicle, "vehicle")):
            if noun not in table:
                raise DatasetError(f"{where}: {role} {noun!r} not in typicality.csv")
        if topic == vehicle:
            raise DatasetError(f"{where}: topic and vehicle are both {topic!r}")
        fam = None if familiarity == "" else _parse_float(familiarity, where)
        items.append(MetaphorItem(item_id, topic, vehicle, klass, fam))

    hum_rows = _read_rows(data_dir / "human.csv", ["metaphor_id", "feature", "count"])
    counts: dict[str, np.ndarray] = {}
    seen_pairs: set[tuple[str, str]] = set()
    for lineno, (metaphor_id, feature, count) in hum_rows:
        where = f"human.csv line {lineno}"
        if metaphor_id not in item_ids:
            raise DatasetError(f"{where}: unknown metaphor id {metaphor_id!r}")
        if feature not in table.vocab:
            raise DatasetError(f"{where}: unknown feature {feature!r}")
        pair = (metaphor_id, feature)
        if pair in seen_pairs:
            raise DatasetError(f"{where}: duplicate ({metaphor_id!r}, {feature!r})")
        seen_pairs.add(pair)
        weight = _parse_float(count, where)
        if weight < 0:
            raise DatasetError(f"{where}: negative count {weight!r}")
        counts.setdefault(metaphor_id, np.zeros(table.n))[table.vocab.index(feature)] = weight

    responses: dict[str, np.ndarray] = {}
    for metaphor_id, vec in counts.items():
        total = vec.sum()
        if total <= 0:
            raise DatasetError(f"human.csv: responses for {metaphor_id!r} sum to zero")
        # pre-normalized weights pass through untouched so save/load round-trips exactly
        dist = vec if abs(total - 1.0) <= ROW_SUM_TOL else vec / total
        dist.setflags(write=False)
        responses[metaphor_id] = dist

    return table, tuple(items), HumanResponseTable(table.vocab, responses)


def validate(
    table: TypicalityTable,
    items: tuple[MetaphorItem, ...],
    human: HumanResponseTable,
) -> ValidationReport:
    """Check every dataset invariant and list all violations (report-only)."""
    violations: list[str] = []

    if not np.all(np.isfinite(table.values)):
        violations.append("typicality: non-finite values")
    if np.any(table.values < 0):
        for c in np.flatnonzero((table.values < 0).any(axis=1)):
            violations.append(f"typicality: negative value(s) in category {table.categories[c]!r}")
    sums = table.values.sum(axis=1)
    for c in np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL):
        violations.append(
            f"typicality: row for {table.categories[c]!r} sums to {sums[c]:.12g}, not 1"
        )

    for item in items:
        for noun, role in ((item.topic, "topic"), (item.vehicle, "vehicle")):
            if noun not in table:
                violations.append(f"metaphor {item.id!r}: {role} {noun!r} not in typicality table")
        if item.inherence is None:
            violations.append(f"metaphor {item.id!r}: missing class label")
        if item.id not in human:
            violations.append(f"human responses: no distribution for metaphor {item.id!r}")

    known_ids = {item.id for item in items}
    for metaphor_id in human.ids:
        if metaphor_id not in known_ids:
            violations.append(f"human responses: unknown metaphor id {metaphor_id!r}")
        dist = human.responses[metaphor_id]
        if np.any(dist < 0):
            violations.append(f"human responses for {metaphor_id!r}: negative entries")
        if abs(dist.sum() - 1.0) > ROW_SUM_TOL:
            violations.append(
                f"human responses for {metaphor_id!r}: sum {dist.sum():.12g}, not 1"
            )

    return ValidationReport(tuple(violations))


def load_dataset(
    data_dir, raw_ratings: bool = False
) -> tuple[TypicalityTable, tuple[MetaphorItem, ...], HumanResponseTable]:
    """Read and fully validate a dataset directory; raise on any violation."""
    table, items, human = read_dataset(data_dir, raw_ratings=raw_ratings)
    report = validate(table, items, human)
    if not report.ok:
        raise DatasetError(str(report))
    return table, items, human


def save_dataset(
    table: TypicalityTable,
    items: tuple[MetaphorItem, ...],
    human: HumanResponseTable,
    data_dir,
) -> None:
    """Write the dataset back out in the documented CSV formats."""
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)

    with open(data_dir / "typicality.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["category", "feature", "value"])
        for c, category in enumerate(table.categories):
            for i, feature in enumerate(table.vocab):
                writer.writerow([category, feature, _fmt(table.values[c, i])])

    with open(data_dir / "metaphors.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "topic", "vehicle", "class", "familiarity"])
        for item in items:
            fam = "" if item.familiarity is None else _fmt(item.familiarity)
            writer.writerow([item.id, item.topic, item.vehicle, item.inherence, fam])

    with open(data_dir / "human.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["metaphor_id", "feature", "count"])
        for metaphor_id in human.ids:
            dist = human.responses[metaphor_id]
            for i, feature in enumerate(table.vocab):
                if dist[i] > 0:
                    writer.writerow([metaphor_id, feature, _fmt(dist[i])])
