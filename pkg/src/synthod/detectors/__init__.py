"""Reference outlier scorers."""

from .ensemble import EnsembleConfig, ensemble_score, rank_normalize
from .iforest import IForestConfig, IsolationForest, iforest_fit, iforest_score
from .knn import KnnConfig, knn_score, knn_score_avg
from .learner import LearnerConfig, ReferenceLearner, TrainingDiverged

SCORERS = ("knn", "iforest")
