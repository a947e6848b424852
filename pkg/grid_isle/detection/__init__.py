"""Event classification from measurement windows."""
from .ensemble import BundleConfig, EnsembleDetector, evaluate, train_ensemble
from .features import FeatureLayout, Standardizer, extract_features
from .svm import CUBIC, FINE_GAUSSIAN, KernelSpec, SvmModel, train_svm
from .trees import BaggedTreesModel, DecisionTree, fit_tree, train_bagged_trees
from .voting import ISLANDING, NO_ISLANDING, Decision, decide
