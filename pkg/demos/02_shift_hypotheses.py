"""Verifying shift hypotheses between a source and a target table.

The checks answer: in what way does the target differ from the source?
Five hypotheses are supported (sparse joint shift on a feature subset,
prior shift, covariate shift, conditional distribution invariance,
sufficiency), each returning a verdict with the largest violation found.
The triangle report ties three of them together and audits the
implications that must hold between them.
"""

from sjslab import (
    FeaturePartition,
    check_cdi,
    check_covariate_shift,
    check_prior_shift,
    check_sjs,
    check_sufficiency,
    check_triangle,
    posterior_statistics,
)
from sjslab.synthetic import cdi_not_sjs_tables, paper_example_tables


def show(name, verdict):
    print(f"  {name:<28} holds={str(verdict.holds):<5} "
          f"max_violation={verdict.max_violation:.2e}")


source, target = paper_example_tables()
x1 = FeaturePartition.from_features(source.space, ["X1"])
full = FeaturePartition.full(source.space)

print("Coexisting-shift example (target = source reweighted on X1):")
show("shift on X1", check_sjs(source, target, x1))
show("prior shift", check_prior_shift(source, target))
show("covariate shift on X1", check_covariate_shift(source, target, x1))
show("covariate shift (full)", check_covariate_shift(source, target, full))
show("invariance given X1", check_cdi(source, target, x1))
show("X1 sufficient for labels", check_sufficiency(source, x1))

# The triangle: invariance + covariate shift imply sparse shift, and with a
# full-rank conditional class matrix, sparse shift + invariance imply
# covariate shift.  Any violation would flag an internal inconsistency.
tri = check_triangle(source, target, x1, posterior_statistics(source))
print("\ntriangle verdicts: sjs", tri.sjs.holds, "| cdi", tri.cdi.holds,
      "| covariate", tri.csh.holds)
print("implication violations:", tri.implication_violations or "none")

print("\nSquared-posterior example (invariance without shift):")
p, q = cdi_not_sjs_tables()
show("invariance given X1", check_cdi(p, q, x1))
show("covariate shift (full)", check_covariate_shift(p, q, full))
show("shift on X1", check_sjs(p, q, x1))
