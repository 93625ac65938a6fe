"""Domain types and the dataset container for two-session sequential experiments."""

from __future__ import annotations

import csv
import hashlib
import io
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Any, Iterable, Iterator, Mapping, NamedTuple, Union

import numpy as np

CSV_COLUMNS = ("unit_id", "a0", "l1", "a1", "y")


class CarryoverError(Exception):
    """Base class for errors raised by this package."""


class DataError(CarryoverError, ValueError):
    """Malformed or out-of-support input data."""


class ConfigError(CarryoverError, ValueError):
    """Invalid configuration value. ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class PositivityError(CarryoverError):
    """A required covariate stratum has no training observations.

    Raised wherever an empty stratum would have to be extrapolated, which is
    the empirical face of a positivity failure.
    """

    def __init__(self, stratum: Mapping[str, Any], context: str = ""):
        desc = ", ".join(f"{k}={v}" for k, v in stratum.items())
        msg = f"no training observations in stratum ({desc})"
        if context:
            msg = f"{context}: {msg}"
        super().__init__(msg)
        self.stratum = dict(stratum)


@dataclass(frozen=True)
class Support:
    """Declared support of an outcome variable.

    Categorical variables take integer level codes ``0..levels-1``.
    """

    kind: str
    levels: int | None = None

    def __post_init__(self):
        if self.kind not in ("categorical", "continuous"):
            raise ValueError(f"unknown support kind {self.kind!r}")
        if self.kind == "categorical":
            if self.levels is None or int(self.levels) < 1:
                raise ValueError("categorical support needs levels >= 1")
        elif self.levels is not None:
            raise ValueError("continuous support takes no levels")

    @classmethod
    def categorical(cls, levels: int) -> Support:
        return cls("categorical", int(levels))

    @classmethod
    def continuous(cls) -> Support:
        return cls("continuous")

    @property
    def is_categorical(self) -> bool:
        return self.kind == "categorical"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "levels": self.levels}


@dataclass(frozen=True)
class TreatmentPath:
    """A treatment sequence ``(a0, a1)`` over the two sessions."""

    a0: int
    a1: int

    def __post_init__(self):
        for name in ("a0", "a1"):
            v = getattr(self, name)
            if v not in (0, 1) or isinstance(v, bool):
                raise ValueError(f"{name} must be 0 or 1, got {v!r}")

    @classmethod
    def parse(cls, text: str | Iterable[int]) -> TreatmentPath:
        """Build a path from ``"1,0"`` or a two-element sequence."""
        if isinstance(text, str):
            parts = [p.strip() for p in text.split(",")]
        else:
            parts = list(text)
        if len(parts) != 2:
            raise ValueError(f"treatment path needs two entries, got {text!r}")
        try:
            a0, a1 = (int(p) for p in parts)
        except (TypeError, ValueError):
            raise ValueError(f"treatment path entries must be 0 or 1, got {text!r}") from None
        return cls(a0, a1)

    def as_list(self) -> list[int]:
        return [self.a0, self.a1]

    def __str__(self) -> str:
        return f"({self.a0},{self.a1})"


@dataclass(frozen=True)
class EstimandSpec:
    """The contrast E[Y(path_a)] - E[Y(path_a_prime)]."""

    path_a: TreatmentPath
    path_a_prime: TreatmentPath

    @classmethod
    def default(cls) -> EstimandSpec:
        return cls(TreatmentPath(1, 1), TreatmentPath(0, 0))

    def to_dict(self) -> dict:
        return {"a": self.path_a.as_list(), "a_prime": self.path_a_prime.as_list()}


class Unit(NamedTuple):
    a0: int
    l1: int | float
    a1: int
    y: int | float
    unit_id: str


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


class Dataset:
    """Immutable column store of ``n >= 1`` units.

    Categorical columns hold ``int64`` level codes, continuous columns
    ``float64``. Treatments are ``int64`` in {0, 1}.
    """

    __slots__ = ("_a0", "_l1", "_a1", "_y", "_ids", "l_support", "y_support")

    def __init__(
        self,
        a0,
        l1,
        a1,
        y,
        l_support: Support,
        y_support: Support,
        unit_ids: Iterable[str] | None = None,
    ):
        a0 = np.asarray(a0)
        a1 = np.asarray(a1)
        n = a0.shape[0] if a0.ndim == 1 else -1
        cols = {"a0": a0, "l1": np.asarray(l1), "a1": a1, "y": np.asarray(y)}
        for name, col in cols.items():
            if col.ndim != 1 or col.shape[0] != n:
                raise DataError(f"column {name} must be one-dimensional with matching length")
        if n == 0:
            raise DataError("dataset must contain at least one unit")
        for name in ("a0", "a1"):
            col = cols[name]
            if not np.all((col == 0) | (col == 1)):
                bad = int(np.flatnonzero((col != 0) & (col != 1))[0])
                raise DataError(f"treatment must be 0 or 1 (row {bad + 1}, field {name})")
            cols[name] = col.astype(np.int64)
        for name, support in (("l1", l_support), ("y", y_support)):
            cols[name] = _coerce_outcome(cols[name], support, name)
        if unit_ids is None:
            ids = None
        else:
            ids = tuple(str(u) for u in unit_ids)
            if len(ids) != n:
                raise DataError("unit_ids length does not match the data")
        object.__setattr__(self, "_a0", _freeze(cols["a0"]))
        object.__setattr__(self, "_l1", _freeze(cols["l1"]))
        object.__setattr__(self, "_a1", _freeze(cols["a1"]))
        object.__setattr__(self, "_y", _freeze(cols["y"]))
        object.__setattr__(self, "_ids", ids)
        object.__setattr__(self, "l_support", l_support)
        object.__setattr__(self, "y_support", y_support)

    def __setattr__(self, name, value):
        raise AttributeError("Dataset is immutable")

    def __reduce__(self):
        return (
            Dataset,
            (np.array(self._a0), np.array(self._l1), np.array(self._a1), np.array(self._y),
             self.l_support, self.y_support, self._ids),
        )

    @property
    def a0(self) -> np.ndarray:
        return self._a0

    @property
    def l1(self) -> np.ndarray:
        return self._l1

    @property
    def a1(self) -> np.ndarray:
        return self._a1

    @property
    def y(self) -> np.ndarray:
        return self._y

    @property
    def unit_ids(self) -> tuple[str, ...]:
        if self._ids is None:
            # default ids are row indices, materialized on demand
            return tuple(map(str, range(self.n)))
        return self._ids

    @property
    def n(self) -> int:
        return self._a0.shape[0]

    def __len__(self) -> int:
        return self.n

    def column(self, name: str) -> np.ndarray:
        if name not in ("a0", "l1", "a1", "y"):
            raise KeyError(name)
        return getattr(self, name)

    def support(self, name: str) -> Support:
        return {"l1": self.l_support, "y": self.y_support}[name]

    def __iter__(self) -> Iterator[Unit]:
        for i in range(self.n):
            yield self.unit(i)

    def unit(self, i: int) -> Unit:
        return Unit(
            int(self._a0[i]),
            self._l1[i].item(),
            int(self._a1[i]),
            self._y[i].item(),
            self.unit_ids[i] if self._ids is not None else str(i),
        )

    @property
    def units(self) -> list[Unit]:
        return list(self)

    def select(self, mask) -> Dataset:
        """Return the sub-dataset of rows where ``mask`` is true."""
        mask = np.asarray(mask, dtype=bool)
        if not mask.any():
            raise DataError("selection leaves an empty dataset")
        ids = [u for u, keep in zip(self.unit_ids, mask) if keep]
        return Dataset(
            self._a0[mask], self._l1[mask], self._a1[mask], self._y[mask],
            self.l_support, self.y_support, ids,
        )

    def permute(self, order) -> Dataset:
        order = np.asarray(order)
        return Dataset(
            self._a0[order], self._l1[order], self._a1[order], self._y[order],
            self.l_support, self.y_support, [self.unit_ids[i] for i in order],
        )

    def fingerprint(self) -> str:
        """Short content hash, used to confirm paired designs share data."""
        h = hashlib.sha256()
        for arr in (self._a0, self._l1, self._a1, self._y):
            h.update(arr.tobytes())
        return h.hexdigest()[:16]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.l_support == other.l_support
            and self.y_support == other.y_support
            and self.unit_ids == other.unit_ids
            and all(
                np.array_equal(getattr(self, c), getattr(other, c))
                and getattr(self, c).dtype == getattr(other, c).dtype
                for c in ("a0", "l1", "a1", "y")
            )
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"Dataset(n={self.n}, l_support={self.l_support}, y_support={self.y_support})"


def _coerce_outcome(col: np.ndarray, support: Support, name: str) -> np.ndarray:
    if support.is_categorical:
        if col.dtype.kind == "f":
            if not np.all(np.isfinite(col)) or not np.all(col == np.round(col)):
                raise DataError(f"categorical column {name} must hold integer level codes")
        elif col.dtype.kind not in "iub":
            raise DataError(f"categorical column {name} must hold integer level codes")
        codes = col.astype(np.int64)
        bad = (codes < 0) | (codes >= support.levels)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise DataError(
                f"level {codes[i]} outside declared support of {support.levels} levels "
                f"(row {i + 1}, field {name})"
            )
        return codes
    if col.dtype.kind not in "iuf":
        raise DataError(f"continuous column {name} must be numeric")
    vals = col.astype(np.float64)
    if not np.all(np.isfinite(vals)):
        i = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise DataError(f"non-finite value (row {i + 1}, field {name})")
    return vals


def _parse_field(raw: Any, row: int, field: str, support: Support | None):
    text = raw.strip() if isinstance(raw, str) else raw
    if text is None or text == "":
        raise DataError(f"missing value (row {row}, field {field})")
    if support is None:
        try:
            v = int(text)
        except (TypeError, ValueError):
            raise DataError(f"treatment must be 0 or 1 (row {row}, field {field})") from None
        if v not in (0, 1):
            raise DataError(f"treatment must be 0 or 1 (row {row}, field {field})")
        return v
    if support.is_categorical:
        try:
            v = int(text)
        except (TypeError, ValueError):
            raise DataError(f"expected an integer level code (row {row}, field {field})") from None
        if not 0 <= v < support.levels:
            raise DataError(
                f"level {v} outside declared support of {support.levels} levels "
                f"(row {row}, field {field})"
            )
        return v
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise DataError(f"expected a real number (row {row}, field {field})") from None
    if not math.isfinite(v):
        raise DataError(f"non-finite value (row {row}, field {field})")
    return v


PathLike = Union[str, os.PathLike]


def load_dataset(
    source: PathLike | IO[str] | Iterable[Mapping[str, Any]],
    l_support: Support,
    y_support: Support,
) -> Dataset:
    """Parse and validate tabular records into a :class:`Dataset`.

    ``source`` is a CSV path, an open text stream, or an iterable of row
    mappings with keys ``a0, l1, a1, y`` and optionally ``unit_id``. Row
    numbers in error messages count data records from 1.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="", encoding="utf-8") as fh:
            return load_dataset(fh, l_support, y_support)
    if isinstance(source, io.IOBase) or hasattr(source, "read"):
        reader = csv.DictReader(source)
        missing = [c for c in CSV_COLUMNS[1:] if c not in (reader.fieldnames or [])]
        if missing:
            raise DataError(f"CSV header lacks column(s): {', '.join(missing)}")
        rows: Iterable[Mapping[str, Any]] = reader
    else:
        rows = source

    a0, l1, a1, y, ids = [], [], [], [], []
    for i, rec in enumerate(rows, start=1):
        for field in ("a0", "l1", "a1", "y"):
            if field not in rec or rec[field] is None:
                raise DataError(f"missing value (row {i}, field {field})")
        a0.append(_parse_field(rec["a0"], i, "a0", None))
        l1.append(_parse_field(rec["l1"], i, "l1", l_support))
        a1.append(_parse_field(rec["a1"], i, "a1", None))
        y.append(_parse_field(rec["y"], i, "y", y_support))
        uid = rec.get("unit_id")
        ids.append(str(i - 1) if uid is None else str(uid))
    if not a0:
        raise DataError("input contains no records")
    l_dtype = np.int64 if l_support.is_categorical else np.float64
    y_dtype = np.int64 if y_support.is_categorical else np.float64
    return Dataset(
        np.array(a0, dtype=np.int64),
        np.array(l1, dtype=l_dtype),
        np.array(a1, dtype=np.int64),
        np.array(y, dtype=y_dtype),
        l_support,
        y_support,
        ids,
    )


def _format_value(v, support: Support) -> str:
    if support.is_categorical:
        return str(int(v))
    return format(float(v), ".17g")


def save_dataset(dataset: Dataset, destination: PathLike | IO[str]) -> None:
    """Write ``dataset`` as CSV in the exact format :func:`load_dataset` reads."""
    if len(dataset) == 0:
        raise DataError("refusing to write an empty dataset")
    if isinstance(destination, (str, os.PathLike)):
        with open(Path(destination), "w", newline="", encoding="utf-8") as fh:
            save_dataset(dataset, fh)
        return
    writer = csv.writer(destination, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    ls, ys = dataset.l_support, dataset.y_support
    for uid, a0, l1, a1, y in zip(dataset.unit_ids, dataset.a0, dataset.l1, dataset.a1, dataset.y):
        writer.writerow((uid, int(a0), _format_value(l1, ls), int(a1), _format_value(y, ys)))
