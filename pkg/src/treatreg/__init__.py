"""Regularized Bayesian treatment-effect regression."""

from .data import (DataError, DataTable, DesignSpec, DummySpec, InteractionRule, RegressionData,
                   StandardizationInfo, build_design, load_table, prepare, standardize)
from .diagnostics import (moment_identity_gap, reparam_alpha_bias, residual_treatment_cov,
                          ridge_alpha_bias)
from .estimators import (FitSummary, GPriorSelectionRegression, NaiveShrinkageRegression,
                         OlsFit, OLSTreatmentRegression, ReparamShrinkageRegression, fit_ols,
                         fit_oracle_ols, summarize)
from .priors import (ModelIndicator, ShrinkagePrior, local_eb_g, log_half_cauchy,
                     log_marginal_gprior, log_shrinkage_density)
from .samplers import (MCMCConfig, PosteriorDraws, PreconditionError, RankDeficientError,
                       SliceCollapse, fit_naive, fit_reparam)
from .selection import fit_selection_gprior
from .simbench import (ScenarioError, VardecScenario, Wang1Scenario, Wang2Scenario, run_study)

__version__ = "0.1.0"
