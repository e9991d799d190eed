"""Low-rank environmental field models and Fisher-information sampling plans."""

__version__ = "0.1.0"

from .baselines import TransectDirection, random_walk, transect
from .cost import Tour, candidate_costs, nn_cost, nn_order
from .errors import DataError, FisherPlanError, FormatError, InvalidCellError, NumericalError
from .glrm import (FitConfig, LowRankModel, ObservationSet, UnderdeterminedWarning, complete,
                   estimate_latent, fit, load_model, objective, save_model)
from .grid import (DataMatrix, Region, Snapshot, cell_coords, euclidean, load_region, load_snapshot,
                   load_stack, neighbors, stack_to_matrix, store_region, store_snapshot)
from .harness import (Dataset, SynthConfig, TrialReport, aggregate, reconstruction_error, run_trials,
                      simulate_observations, synth_generate)
from .planner import (FisherState, PlannerConfig, SamplePlan, fisher_info, plan, state_init,
                      state_with_cell)
