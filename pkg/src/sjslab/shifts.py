"""Shift-hypothesis checks, the conditional rank matrix, and identifiability.

Every check compares exact probability tables, so a hypothesis "holds"
when its defining equalities are satisfied on all positive-mass cells up
to an absolute tolerance (default ``1e-9``, appropriate for ratios of
float64 sums).  Zero-probability cells are excluded: the hypotheses are
almost-sure statements and conditional probabilities are only pinned
down on positive-mass events.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .distribution import (
    ConditionalTable,
    FiniteJointDistribution,
    check_absolute_continuity,
    marginal_density,
    posterior,
)
from .errors import InvalidDistribution
from .space import FeaturePartition, aggregate

DEFAULT_TOL = 1e-9
RANK_RTOL = 1e-10


@dataclass(frozen=True)
class ShiftVerdict:
    """Boolean-with-evidence outcome of a shift-hypothesis check.

    For equality-style checks (``kind`` in sjs/prior_shift/covariate_shift/
    cdi/sufficiency) ``holds`` is True iff ``max_violation <= tol``.  For
    the variance criterion the reading flips: ``max_violation`` is the
    largest within-cell posterior deviation and the criterion holds iff
    it exceeds the tolerance.

    ``witness`` is ``(partition_cell, feature_cell, label)`` for the
    entry achieving ``max_violation`` (entries may be None).
    """

    kind: str
    holds: bool
    max_violation: float
    tol: float
    witness: tuple | None = None
    details: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "hypothesis": self.kind,
            "holds": bool(self.holds),
            "max_violation": float(self.max_violation),
            "tolerance": float(self.tol),
            "witness": list(self.witness) if self.witness is not None else None,
            "details": {k: (float(v) if isinstance(v, (int, float, np.floating)) else v)
                        for k, v in self.details.items()},
        }


@dataclass(frozen=True)
class RankReport:
    """Conditional class matrix, its numerical rank, and the verdict.

    One matrix per partition cell; ``identifiable`` is True iff every
    positive-source-mass cell reaches full rank.
    """

    partition: FeaturePartition
    num_labels: int
    per_cell_matrices: list
    per_cell_rank: list
    singular_values: list
    cell_masses: np.ndarray
    identifiable: bool
    rank_rtol: float = RANK_RTOL

    def to_json_dict(self) -> dict:
        return {
            "partition": self.partition.describe(),
            "num_labels": self.num_labels,
            "identifiable": bool(self.identifiable),
            "rank_rtol": self.rank_rtol,
            "cells": [
                {
                    "cell": n,
                    "mass": float(self.cell_masses[n]),
                    "rank": int(self.per_cell_rank[n]),
                    "singular_values": [float(s) for s in self.singular_values[n]],
                    "matrix": [[float(v) for v in row] for row in self.per_cell_matrices[n]],
                }
                for n in range(self.partition.num_cells)
            ],
        }


def _pair_tables(p: FiniteJointDistribution, q: FiniteJointDistribution,
                 f: FeaturePartition):
    check_absolute_continuity(q, p)
    p.require_positive_labels("source")
    q.require_positive_labels("target")
    return p.project(f), q.project(f)


def check_sjs(p: FiniteJointDistribution, q: FiniteJointDistribution,
              f: FeaturePartition, tol: float = DEFAULT_TOL) -> ShiftVerdict:
    """Does the target relate to the source through sparse joint shift on ``f``?

    For every label ``i``, every f-cell with positive class mass under
    both measures, and every feature cell inside it, the within-cell
    class-conditional probabilities of source and target must agree.
    Checking the finest feature cells suffices for all feature-measurable
    events.
    """
    p_f, q_f = _pair_tables(p, q, f)
    cells = f.cell_of
    max_violation = 0.0
    witness = None
    for i in range(p.num_labels):
        p_cell = p_f[:, i][cells]
        q_cell = q_f[:, i][cells]
        active = (p_cell > 0.0) & (q_cell > 0.0)
        if not active.any():
            continue
        diff = np.zeros(p.space.num_cells)
        diff[active] = np.abs(q.mass[active, i] / q_cell[active]
                              - p.mass[active, i] / p_cell[active])
        x = int(np.argmax(diff))
        if diff[x] > max_violation:
            max_violation = float(diff[x])
            witness = (int(cells[x]), x, i)
    return ShiftVerdict("sjs", max_violation <= tol, max_violation, tol, witness)


def check_prior_shift(p: FiniteJointDistribution, q: FiniteJointDistribution,
                      tol: float = DEFAULT_TOL) -> ShiftVerdict:
    """Prior probability shift: class-conditional feature laws unchanged.

    Equivalent to the sparse-joint-shift check on the trivial partition.
    """
    verdict = check_sjs(p, q, FeaturePartition.trivial(p.space), tol)
    return ShiftVerdict("prior_shift", verdict.holds, verdict.max_violation, tol,
                        verdict.witness)


def check_covariate_shift(p: FiniteJointDistribution, q: FiniteJointDistribution,
                          f: FeaturePartition, tol: float = DEFAULT_TOL) -> ShiftVerdict:
    """Label posteriors conditional on ``f`` agree between source and target."""
    check_absolute_continuity(q, p)
    post_p = posterior(p, f)
    post_q = posterior(q, f)
    active = post_p.defined & post_q.defined
    max_violation = 0.0
    witness = None
    if active.any():
        diff = np.abs(post_q.values - post_p.values)
        diff[~active] = 0.0
        n, i = np.unravel_index(int(np.argmax(diff)), diff.shape)
        max_violation = float(diff[n, i])
        witness = (int(n), None, int(i))
    return ShiftVerdict("covariate_shift", max_violation <= tol, max_violation, tol, witness)


def check_cdi(p: FiniteJointDistribution, q: FiniteJointDistribution,
              f: FeaturePartition, tol: float = DEFAULT_TOL) -> ShiftVerdict:
    """Conditional distribution invariance of the features given ``f``.

    Primary form: within every f-cell of positive mass under both
    measures, the conditional probability of each feature cell agrees.
    The equivalent density form (the target feature marginal has an
    f-measurable density w.r.t. the source) is evaluated as a
    cross-check and reported in ``details``.
    """
    check_absolute_continuity(q, p)
    p_h = p.feature_marginal()
    q_h = q.feature_marginal()
    p_f = aggregate(p_h, f)
    q_f = aggregate(q_h, f)
    cells = f.cell_of
    active = (p_f[cells] > 0.0) & (q_f[cells] > 0.0)
    diff = np.zeros(p.space.num_cells)
    diff[active] = np.abs(q_h[active] / q_f[cells][active] - p_h[active] / p_f[cells][active])
    x = int(np.argmax(diff)) if diff.size else 0
    max_violation = float(diff[x]) if diff.size else 0.0
    witness = (int(cells[x]), x, None) if diff.size else None

    # Density form: the per-feature-cell density must be constant on f-cells.
    density = marginal_density(q, p, FeaturePartition.full(p.space))
    cell_density = np.zeros(f.num_cells)
    pos = p_f > 0.0
    cell_density[pos] = q_f[pos] / p_f[pos]
    dens_dev = np.abs(density - cell_density[cells])
    dens_dev[p_h == 0.0] = 0.0
    return ShiftVerdict("cdi", max_violation <= tol, max_violation, tol, witness,
                        details={"density_form_max_deviation": float(dens_dev.max(initial=0.0))})


def check_sufficiency(p: FiniteJointDistribution, f: FeaturePartition,
                      tol: float = DEFAULT_TOL) -> ShiftVerdict:
    """Is ``f`` sufficient for the full features w.r.t. the labels?

    Holds iff the label posterior given all features is constant inside
    every f-cell, i.e. conditioning on ``f`` already captures all label
    information.
    """
    post_h = posterior(p, FeaturePartition.full(p.space))
    post_f = posterior(p, f)
    cells = f.cell_of
    active = post_h.defined  # feature cells with positive mass
    diff = np.abs(post_h.values - post_f.values[cells])
    diff[~active] = 0.0
    x, i = np.unravel_index(int(np.argmax(diff)), diff.shape)
    max_violation = float(diff[x, i])
    return ShiftVerdict("sufficiency", max_violation <= tol, max_violation, tol,
                        (int(cells[x]), int(x), int(i)))


# -- conditional class matrix -------------------------------------------------


def posterior_statistics(p: FiniteJointDistribution) -> list:
    """The label posteriors given all features, as rank statistics."""
    post = posterior(p, FeaturePartition.full(p.space))
    return [post.values[:, i].copy() for i in range(p.num_labels)]


def classifier_statistics(assignment: np.ndarray, num_labels: int) -> list:
    """Indicator statistics of a hard classifier's decision regions."""
    assignment = np.asarray(assignment)
    return [(assignment == i).astype(np.float64) for i in range(num_labels)]


def _conditional_class_matrix(p: FiniteJointDistribution, g: FeaturePartition,
                              statistics: list) -> tuple:
    """Per-cell matrices M[i, j] = E[stat_i | cell, label j], with 0/0 = 0."""
    stats = [np.asarray(s, dtype=np.float64) for s in statistics]
    for k, s in enumerate(stats):
        if s.shape != (p.space.num_cells,):
            raise InvalidDistribution(f"statistic {k} must be a table over feature cells")
        if np.any(s < 0):
            raise InvalidDistribution(f"statistic {k} must be non-negative")
    class_cell = p.project(g)  # (cells, labels)
    num = np.stack([aggregate(p.mass * s[:, None], g) for s in stats])  # (n_stats, cells, labels)
    matrices = []
    for n in range(g.num_cells):
        denom = class_cell[n]
        m = np.zeros((len(stats), p.num_labels))
        pos = denom > 0.0
        m[:, pos] = num[:, n, pos] / denom[pos]
        matrices.append(m)
    return matrices, class_cell


def rank_matrix(p: FiniteJointDistribution, g: FeaturePartition, statistics: list,
                rank_rtol: float = RANK_RTOL) -> RankReport:
    """Conditional class matrix per cell of ``g`` and its identifiability verdict.

    ``statistics`` must be one non-negative feature-cell table per label.
    Entry ``(i, j)`` of the cell-``n`` matrix is the expectation of
    statistic ``i`` under the class-``j`` conditional distribution,
    conditioned on the cell.  A singular value counts towards the rank
    when it exceeds ``sigma_max * num_labels * rank_rtol``; the shift
    model is identifiable from the feature marginal when every
    positive-mass cell reaches full rank.
    """
    p.require_positive_labels("source")
    if len(statistics) != p.num_labels:
        raise InvalidDistribution(
            f"need {p.num_labels} statistics (one per label), got {len(statistics)}")
    matrices, class_cell = _conditional_class_matrix(p, g, statistics)
    cell_masses = class_cell.sum(axis=1)
    ranks, svals = [], []
    identifiable = True
    for n in range(g.num_cells):
        s = np.linalg.svd(matrices[n], compute_uv=False)
        thresh = (s[0] * p.num_labels * rank_rtol) if s.size and s[0] > 0 else 0.0
        r = int(np.sum(s > thresh))
        ranks.append(r)
        svals.append(s)
        if cell_masses[n] > 0.0 and r < p.num_labels:
            identifiable = False
    return RankReport(g, p.num_labels, matrices, ranks, svals, cell_masses,
                      identifiable, rank_rtol)


def verify_total_expectation(p: FiniteJointDistribution, g: FeaturePartition,
                             statistics: list) -> float:
    """Max deviation in the total-expectation identity, per cell of ``g``.

    For each positive-mass cell the unconditional expectations of the
    statistics must equal the conditional class matrix applied to the
    label probabilities given the cell.  Returns the largest absolute
    deviation; used as a numerical self-test.
    """
    stats = [np.asarray(s, dtype=np.float64) for s in statistics]
    matrices, class_cell = _conditional_class_matrix(p, g, stats)
    cell_mass = class_cell.sum(axis=1)
    p_h = p.feature_marginal()
    worst = 0.0
    for n in range(g.num_cells):
        if cell_mass[n] <= 0.0:
            continue
        members = g.cell_of == n
        lhs = np.array([float(np.dot(p_h[members], s[members])) for s in stats]) / cell_mass[n]
        label_given_cell = class_cell[n] / cell_mass[n]
        rhs = matrices[n] @ label_given_cell
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def binary_variance_criterion(p: FiniteJointDistribution, g: FeaturePartition,
                              tol: float = DEFAULT_TOL) -> ShiftVerdict:
    """Two-label identifiability criterion via within-cell posterior variance.

    Holds iff the full-feature label posterior is non-constant inside at
    least one positive-mass cell of ``g`` (deviation from the cell
    average exceeding ``tol`` on a positive-mass feature cell).  With
    posterior statistics this is equivalent to the full-rank condition
    of :func:`rank_matrix`.
    """
    if p.num_labels != 2:
        raise InvalidDistribution("the variance criterion is defined for 2 labels")
    p.require_positive_labels("source")
    post = posterior(p, FeaturePartition.full(p.space)).values[:, 0]
    p_h = p.feature_marginal()
    cell_mass = aggregate(p_h, g)
    cell_avg = np.zeros(g.num_cells)
    pos = cell_mass > 0.0
    cell_avg[pos] = aggregate(p_h * post, g)[pos] / cell_mass[pos]
    dev = np.abs(post - cell_avg[g.cell_of])
    dev[p_h == 0.0] = 0.0
    x = int(np.argmax(dev))
    max_dev = float(dev[x])
    return ShiftVerdict("binary_variance_criterion", max_dev > tol, max_dev, tol,
                        (int(g.cell_of[x]), x, 0))


# -- triangle of shift hypotheses ---------------------------------------------


@dataclass(frozen=True)
class TriangleReport:
    """Joint verdicts for sjs / cdi / full covariate shift plus implication audit.

    The three hypotheses are tied together: cdi and covariate shift
    imply sjs; sjs and cdi imply covariate shift when the conditional
    class matrix has full rank; and sjs with covariate shift implies cdi
    when the full posterior is positive everywhere.  Violations of these
    implications indicate an internal inconsistency (e.g. tolerance
    interplay) and are listed in ``implication_violations``.
    """

    sjs: ShiftVerdict
    cdi: ShiftVerdict
    csh: ShiftVerdict
    posterior_positive: bool
    rank_full: bool | None
    implication_violations: tuple

    def to_json_dict(self) -> dict:
        return {
            "sjs": self.sjs.to_json_dict(),
            "cdi": self.cdi.to_json_dict(),
            "covariate_shift_full": self.csh.to_json_dict(),
            "posterior_positive": self.posterior_positive,
            "rank_full": self.rank_full,
            "implication_violations": list(self.implication_violations),
        }


def check_triangle(p: FiniteJointDistribution, q: FiniteJointDistribution,
                   f: FeaturePartition, statistics: list | None = None,
                   tol: float = DEFAULT_TOL) -> TriangleReport:
    """Run the sjs / cdi / full-covariate-shift checks and audit their implications.

    ``statistics`` (optional, one table per label) enables the rank-based
    audit of "sjs and cdi imply covariate shift".
    """
    sjs = check_sjs(p, q, f, tol)
    cdi = check_cdi(p, q, f, tol)
    csh = check_covariate_shift(p, q, FeaturePartition.full(p.space), tol)

    post = posterior(p, FeaturePartition.full(p.space))
    positive = bool(np.all(post.values[post.defined] > 0.0)) if post.defined.any() else True

    rank_full = None
    if statistics is not None:
        rank_full = rank_matrix(p, f, statistics).identifiable

    violations = []
    if rank_full and sjs.holds and cdi.holds and not csh.holds:
        violations.append("sjs and cdi hold with full rank but covariate shift fails")
    if cdi.holds and csh.holds and not sjs.holds:
        violations.append("cdi and covariate shift hold but sjs fails")
    if positive and sjs.holds and csh.holds and not cdi.holds:
        violations.append("sjs and covariate shift hold with positive posterior but cdi fails")
    return TriangleReport(sjs, cdi, csh, positive, rank_full, tuple(violations))
