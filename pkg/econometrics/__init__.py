from econometrics.design import Design, RegressionSpec, build_design
from econometrics.ols import OLSFit, cluster_vcov, ols
from econometrics.estimators import (
    RegressionResult,
    collapse_to_cells,
    estimate_ddd,
    estimate_did,
    estimate_event_study,
    leave_one_out,
)
from econometrics.replication import PlaceboReport, placebo_suite, run_replications, summarize_replications
