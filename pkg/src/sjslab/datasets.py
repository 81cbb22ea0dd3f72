"""CSV ingestion and empirical distribution estimation."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .distribution import FiniteJointDistribution
from .errors import EmptyDataset, SchemaViolation
from .space import FeatureSpace


@dataclass(frozen=True)
class DatasetSchema:
    """Declared layout of a CSV dataset.

    ``feature_domains`` maps each feature column to the ordered list of
    admissible categorical values (strings compare after str() so integer
    and string spellings of the same code agree).  ``label_domain`` is
    the ordered list of label values, or None for unlabelled data.
    Missing values are empty fields; ``missing_policy`` decides between
    rejecting the file and dropping the row.
    """

    feature_columns: tuple
    feature_domains: dict
    label_column: str | None = None
    label_domain: tuple | None = None
    missing_policy: str = "error"

    def __init__(self, feature_domains: dict, label_column: str | None = None,
                 label_domain=None, missing_policy: str = "error"):
        if missing_policy not in ("error", "drop_row"):
            raise SchemaViolation(f"unknown missing_policy {missing_policy!r}")
        if label_column is not None and label_domain is None:
            raise SchemaViolation("label_domain required when label_column is set")
        domains = {str(col): tuple(str(v) for v in values)
                   for col, values in feature_domains.items()}
        for col, values in domains.items():
            if len(set(values)) != len(values) or not values:
                raise SchemaViolation(f"domain of {col!r} must be non-empty and duplicate-free")
        object.__setattr__(self, "feature_columns", tuple(domains))
        object.__setattr__(self, "feature_domains", domains)
        object.__setattr__(self, "label_column", label_column)
        object.__setattr__(self, "label_domain",
                           tuple(str(v) for v in label_domain) if label_domain else None)
        object.__setattr__(self, "missing_policy", missing_policy)

    def space(self) -> FeatureSpace:
        return FeatureSpace(self.feature_columns,
                            [len(self.feature_domains[c]) for c in self.feature_columns])

    @property
    def num_labels(self) -> int | None:
        return len(self.label_domain) if self.label_domain else None


@dataclass(frozen=True, eq=False)
class RowTable:
    """Validated, code-encoded rows in file order."""

    schema: DatasetSchema
    feature_codes: np.ndarray = field(repr=False)
    label_codes: np.ndarray | None = field(repr=False, default=None)

    @property
    def num_rows(self) -> int:
        return self.feature_codes.shape[0]


def load_dataset(path, schema: DatasetSchema) -> RowTable:
    """Read and validate a CSV file against a schema.

    The header must contain every declared column; unseen categorical
    values raise :class:`SchemaViolation` with the offending row and
    column, and missing (empty) values follow the schema's policy.
    Row order is preserved.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in schema.feature_columns:
            if col not in header:
                raise SchemaViolation(f"missing feature column {col!r} in header")
        if schema.label_column is not None and schema.label_column not in header:
            raise SchemaViolation(f"missing label column {schema.label_column!r} in header")

        codes = {col: {v: k for k, v in enumerate(schema.feature_domains[col])}
                 for col in schema.feature_columns}
        label_codes = ({v: k for k, v in enumerate(schema.label_domain)}
                       if schema.label_domain else None)
        feat_rows: list = []
        lab_rows: list = []
        for rownum, row in enumerate(reader):
            values = [row.get(col, "") for col in schema.feature_columns]
            label_value = row.get(schema.label_column, "") if schema.label_column else None
            cells = values + ([label_value] if schema.label_column else [])
            if any(v is None or v == "" for v in cells):
                if schema.missing_policy == "drop_row":
                    continue
                col = schema.feature_columns[[v in (None, "") for v in values].index(True)] \
                    if any(v in (None, "") for v in values) else schema.label_column
                raise SchemaViolation("missing value", row=rownum, column=col)
            encoded = []
            for col, v in zip(schema.feature_columns, values):
                code = codes[col].get(str(v))
                if code is None:
                    raise SchemaViolation(f"value {v!r} not in declared domain",
                                          row=rownum, column=col)
                encoded.append(code)
            feat_rows.append(encoded)
            if schema.label_column:
                code = label_codes.get(str(label_value))
                if code is None:
                    raise SchemaViolation(f"label {label_value!r} not in declared domain",
                                          row=rownum, column=schema.label_column)
                lab_rows.append(code)
    feats = np.asarray(feat_rows, dtype=np.int64).reshape(len(feat_rows),
                                                          len(schema.feature_columns))
    labs = np.asarray(lab_rows, dtype=np.int64) if schema.label_column else None
    return RowTable(schema, feats, labs)


def empirical_distribution(rows: RowTable, smoothing_alpha: float = 0.0):
    """Cell frequencies with optional additive smoothing.

    Returns a :class:`FiniteJointDistribution` when the rows carry
    labels, otherwise the feature-marginal table.  ``smoothing_alpha``
    adds a pseudo-count to every cell before normalising; recommended
    when a target dataset hits cells unseen in the source (which would
    otherwise violate absolute continuity).
    """
    if rows.num_rows == 0:
        raise EmptyDataset("no rows to estimate from")
    if smoothing_alpha < 0:
        raise SchemaViolation("smoothing_alpha must be non-negative")
    space = rows.schema.space()
    cells = np.ravel_multi_index(rows.feature_codes.T, space.cardinalities)
    if rows.label_codes is None:
        counts = np.bincount(cells, minlength=space.num_cells).astype(np.float64)
        counts += smoothing_alpha
        return counts / counts.sum()
    ell = rows.schema.num_labels
    counts = np.zeros((space.num_cells, ell))
    np.add.at(counts, (cells, rows.label_codes), 1.0)
    counts += smoothing_alpha
    return FiniteJointDistribution(space, ell, counts / counts.sum())


def write_rows_csv(path, schema: DatasetSchema, feature_codes: np.ndarray,
                   label_codes: np.ndarray | None = None) -> None:
    """Write code-encoded rows back to CSV using the schema's value spellings."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        header = list(schema.feature_columns)
        if label_codes is not None:
            header.append(schema.label_column or "label")
        writer.writerow(header)
        domains = [schema.feature_domains[c] for c in schema.feature_columns]
        for k in range(feature_codes.shape[0]):
            row = [domains[j][feature_codes[k, j]] for j in range(len(domains))]
            if label_codes is not None:
                row.append(schema.label_domain[label_codes[k]]
                           if schema.label_domain else str(int(label_codes[k])))
            writer.writerow(row)


def schema_for_distribution(dist: FiniteJointDistribution,
                            labelled: bool = True) -> DatasetSchema:
    """Integer-coded schema matching a distribution's space."""
    domains = {name: [str(v) for v in range(card)]
               for name, card in zip(dist.space.feature_names, dist.space.cardinalities)}
    if labelled:
        return DatasetSchema(domains, label_column="label",
                             label_domain=[str(v) for v in range(dist.num_labels)])
    return DatasetSchema(domains)


def sample_rows(dist: FiniteJointDistribution, n: int, seed,
                labelled: bool = True) -> tuple:
    """Draw i.i.d. rows from an exact table; returns (feature_codes, label_codes)."""
    rng = np.random.default_rng(seed)
    flat = dist.mass.ravel()
    draws = rng.choice(flat.size, size=n, p=flat / flat.sum())
    cells, labels = np.divmod(draws, dist.num_labels)
    coords = dist.space.coords_of(cells)
    return coords, (labels if labelled else None)
