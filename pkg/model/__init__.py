from model.distributions import DistributionSpec, partial_expectation
from model.params import Equilibrium, ModelParams, WorkerOutcome
from model.equilibrium import default_leisure, reservation_rhs, segregation_share, solve_equilibrium
from model.wages import (
    acceptance_threshold,
    employment_value,
    mean_accepted_wage,
    nonparticipation_value,
    unemployment_value,
    wage,
)
from model.statics import SweepResult, comparative_statics_sweep
