"""
GWNTF: Graph-regularized Wasserstein Nonnegative Tensor Factorization

Factorizes nonnegative tensors under an entropic optimal-transport loss with
a graph smoothness penalty on the sample factor, and benchmarks the result by
clustering against KL baselines (NMF, GNMF, NCP, GNCP).
"""

from .factorize import GwntfConfig, gwntf_fit
from .models import FitReport
from .tensor import DataTensor, KruskalFactors
from .transport import TransportHyperParams

__version__ = "0.1.0"
__all__ = ["DataTensor", "KruskalFactors", "TransportHyperParams", "GwntfConfig", "gwntf_fit", "FitReport"]
