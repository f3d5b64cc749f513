"""seqcast: recurrent-network forecasting of daily epidemic case counts.

Library + CLI covering the full pipeline: CSV ingestion, smoothing and
max-normalization, delay embedding, three LSTM variants trained from
scratch with Adam, seeded multi-run evaluation with per-horizon RMSE and
confidence intervals, and recursive multi-week forecasting.
"""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
