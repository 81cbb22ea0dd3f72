"""End-to-end experiment orchestration and reporting.

A run loads the source and target data, estimates the target under the
configured shift hypothesis, and writes four artefacts into the output
directory: the fit, the corrected posterior, the identifiability report
and a manifest (hashed inputs, seed, versions) that pins the run down
for bit-exact reproduction.
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .datasets import empirical_distribution, load_dataset
from .datasets import DatasetSchema
from .distribution import FiniteJointDistribution
from .errors import InvalidDistribution, SchemaViolation
from .estimators import (
    OptimizerOptions,
    sees_c_fit,
    sees_d_fit,
    sees_d_fit_with_classifier,
    train_argmax_classifier,
)
from .shifts import posterior_statistics, rank_matrix
from .space import FeaturePartition

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 3
EXIT_UNDERDETERMINED = 4

METHODS = ("sees-c", "sees-d", "confusion")


@dataclass(frozen=True)
class ExperimentConfig:
    """Inputs and knobs of one estimation run."""

    source_path: str
    target_path: str
    shift_features: tuple
    method: str = "sees-d"
    smoothing_alpha: float = 0.0
    seed: int = 0
    output_dir: str = "run"
    check_tol: float = 1e-9
    optimizer_tol: float = 1e-10
    max_iter: int = 10000

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidDistribution(f"method must be one of {METHODS}")
        for path in (self.source_path, self.target_path):
            if not Path(path).exists():
                raise InvalidDistribution(f"input file does not exist: {path}")
        object.__setattr__(self, "shift_features", tuple(self.shift_features))

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        data = json.loads(Path(path).read_text())
        return cls(**data)

    def to_json_dict(self) -> dict:
        return {
            "source_path": self.source_path,
            "target_path": self.target_path,
            "shift_features": list(self.shift_features),
            "method": self.method,
            "smoothing_alpha": self.smoothing_alpha,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "check_tol": self.check_tol,
            "optimizer_tol": self.optimizer_tol,
            "max_iter": self.max_iter,
        }


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    fit: object
    rank_report: object
    exit_code: int
    status: str
    outputs: dict = field(default_factory=dict)


def infer_schema(path, labelled: bool) -> DatasetSchema:
    """Schema from a CSV's observed values (sorted for determinism)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = list(reader.fieldnames or [])
        if not header:
            raise SchemaViolation(f"{path} has no header")
        label_col = "label" if labelled and "label" in header else None
        if labelled and label_col is None:
            raise SchemaViolation("labelled CSV must have a 'label' column")
        feature_cols = [c for c in header if c != label_col]
        seen: dict = {c: set() for c in header}
        for row in reader:
            for c in header:
                v = row.get(c)
                if v not in (None, ""):
                    seen[c].add(str(v))
    domains = {c: sorted(seen[c], key=lambda s: (len(s), s)) for c in feature_cols}
    if label_col:
        return DatasetSchema(domains, label_column=label_col,
                             label_domain=sorted(seen[label_col], key=lambda s: (len(s), s)))
    return DatasetSchema(domains)


def load_source(path, smoothing_alpha: float = 0.0) -> FiniteJointDistribution:
    """Source joint from exact JSON or a labelled CSV sample."""
    path = Path(path)
    if path.suffix == ".json":
        return FiniteJointDistribution.load(path)
    schema = infer_schema(path, labelled=True)
    return empirical_distribution(load_dataset(path, schema), smoothing_alpha)


def load_target_marginal(path, source: FiniteJointDistribution,
                         smoothing_alpha: float = 0.0) -> np.ndarray:
    """Target feature marginal from exact JSON or a feature-only CSV sample.

    CSV columns map onto the source's feature domains; values outside
    them are schema violations.
    """
    path = Path(path)
    if path.suffix == ".json":
        return FiniteJointDistribution.load(path).feature_marginal()
    domains = {name: [str(v) for v in range(card)]
               for name, card in zip(source.space.feature_names, source.space.cardinalities)}
    schema = DatasetSchema(domains)
    rows = load_dataset(path, schema)
    return empirical_distribution(rows, smoothing_alpha)


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_posterior_csv(path, source: FiniteJointDistribution, table) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(source.space.feature_names)
                        + [f"posterior_{i}" for i in range(table.num_labels)]
                        + ["defined"])
        coords = source.space.all_coords()
        for x in range(source.space.num_cells):
            writer.writerow([int(v) for v in coords[x]]
                            + [repr(float(v)) for v in table.values[x]]
                            + [int(table.defined[x])])


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Execute one configured run and write its report files.

    Exit code 0 on success, 3 when the iterative fit stopped before its
    tolerance, 4 when some cell system was underdetermined.  Errors from
    the inner modules (absolute continuity, schema, degenerate labels)
    propagate to the caller with their context intact.
    """
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    source = load_source(config.source_path, config.smoothing_alpha)
    q_marginal = load_target_marginal(config.target_path, source, config.smoothing_alpha)
    f = FeaturePartition.from_features(source.space, config.shift_features)

    if config.method == "sees-c":
        fit = sees_c_fit(source, q_marginal, f,
                         OptimizerOptions(tol=config.optimizer_tol,
                                          max_iter=config.max_iter))
    elif config.method == "sees-d":
        fit = sees_d_fit(source, q_marginal, f)
    else:
        clf = train_argmax_classifier(source)
        fit = sees_d_fit_with_classifier(source, q_marginal, f, f, clf)

    report = rank_matrix(source, f, posterior_statistics(source))

    outputs = {
        "fit": out / "fit.json",
        "posterior": out / "corrected_posterior.csv",
        "rank_report": out / "rank_report.json",
        "manifest": out / "manifest.json",
    }
    outputs["fit"].write_text(json.dumps(fit.to_json_dict(), sort_keys=True, indent=2) + "\n")
    write_posterior_csv(outputs["posterior"], source, fit.corrected_posterior)
    outputs["rank_report"].write_text(
        json.dumps(report.to_json_dict(), sort_keys=True, indent=2) + "\n")

    status = "ok"
    exit_code = EXIT_OK
    if not fit.diagnostics.get("converged", True):
        status, exit_code = "not_converged", EXIT_NOT_CONVERGED
    elif fit.underdetermined:
        status, exit_code = "underdetermined", EXIT_UNDERDETERMINED

    manifest = {
        "config": config.to_json_dict(),
        "inputs": {
            "source": {"path": config.source_path, "sha256": _sha256(config.source_path)},
            "target": {"path": config.target_path, "sha256": _sha256(config.target_path)},
        },
        "seed": config.seed,
        "status": status,
        "exit_code": exit_code,
        "outputs": sorted(p.name for p in outputs.values()),
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "sjslab": __version__,
        },
    }
    outputs["manifest"].write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return ExperimentResult(fit, report, exit_code, status,
                            {k: str(v) for k, v in outputs.items()})
