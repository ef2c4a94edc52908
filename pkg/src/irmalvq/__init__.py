"""Prototype classifiers with adaptive relevance matrices (GLVQ / GMLVQ) and
iterated relevance matrix analysis (IRMA) for class-discriminative subspaces."""

__version__ = "0.1.0"

from .data import Dataset, SplitSpec, gen_two_gaussians, load_csv, load_segmentation, load_wdbc, standardize, stratified_split
from .errors import DataError, IoError, IrmaError, NumericalError
from .evaluation import EvalReport, compare_pipelines, repeated_validation
from .irma import IrmaConfig, IrmaResult, project, run_irma
from .linalg import sym_eig
from .lvq import GmlvqModel, TrainConfig, train
from .metrics import balanced_accuracy, confusion_matrix
