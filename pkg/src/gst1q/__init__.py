"""Single-qubit gate set tomography: channels, simulation, LGST, MLE and a QPT baseline."""
from .channels import ChannelSpec, make_channel
from .gateset import GateSet, default_gateset, example1_gateset
from .lgst import gauge_optimize, project_physical, run_lgst
from .mle import Objective, fit
from .qpt import qpt_linear_inversion, qpt_mle
from .simulator import Dataset, ErrorModel, build_true_gateset, run_protocol

__all__ = [
    "ChannelSpec", "make_channel", "GateSet", "default_gateset", "example1_gateset",
    "gauge_optimize", "project_physical", "run_lgst", "Objective", "fit",
    "qpt_linear_inversion", "qpt_mle", "Dataset", "ErrorModel", "build_true_gateset",
    "run_protocol",
]

__version__ = "0.1.0"
