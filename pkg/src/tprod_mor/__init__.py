"""Model order reduction for T-product dynamical systems.

T-BT, T-BPOD and T-ERA reduce a TPDS blockwise in the Fourier domain and
return a smaller TPDS; BT, BPOD and ERA on the block-circulant unfolding
are provided as baselines.
"""

from .errors import NumericalError, TprodMorError, ValidationError
from .mor import (
    Reduction,
    ReductionConfig,
    bpod_unfolded,
    bt_unfolded,
    era_unfolded,
    error_bound,
    parameter_count,
    relative_error,
    t_bpod,
    t_bt,
    t_era,
)
from .spectral import FourierBlocks, from_fourier, to_fourier
from .system import LinearSystem, MarkovSequence, Tpds, hinf_norm, markov, simulate
from .tensor3 import Tensor3, bcirc, fold, tprod, ttranspose, unfold
from .tsvd import t_evd, t_svd

__version__ = "0.1.0"

__all__ = [
    "FourierBlocks", "LinearSystem", "MarkovSequence", "NumericalError", "Reduction",
    "ReductionConfig", "Tensor3", "Tpds", "TprodMorError", "ValidationError",
    "bcirc", "bpod_unfolded", "bt_unfolded", "era_unfolded", "error_bound", "fold",
    "from_fourier", "hinf_norm", "markov", "parameter_count", "relative_error",
    "simulate", "t_bpod", "t_bt", "t_era", "t_evd", "t_svd", "to_fourier", "tprod",
    "ttranspose", "unfold",
]
