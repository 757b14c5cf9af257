"""Fast identification of harmful training instances with thresholding data Shapley."""

from .baselines import BaselineConfig, ValuationVector, exact_shapley, loo_grouped, random_order, tmc_shapley
from .dataset import Dataset, Split, inject_label_noise, load_csv, split
from .engine import BanditState, StopRule, TdshapConfig, ValuationResult, run
from .learners import LearnerSpec, fit, predict
from .metrics import MetricKind, Utility, evaluate, marginal_contribution

__version__ = "0.1.0"
