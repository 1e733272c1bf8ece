"""Operating-state recognition for multichannel sensor series.

A multilayer LSTM auto-encoder compresses fixed-length windows of a P-channel
series into fixed-size context vectors while reconstructing only K selected
channels.  The resulting vectors travel smoothly in time and settle into
clusters that track the underlying operating state, so the package also
ships the downstream tooling: PCA projection, k-means clustering, an
SMO-trained RBF-SVM for stable labeling, and a streaming monitor that emits
state-change events.
"""

__version__ = "0.1.0"

from . import dataset, embedding, neuralcore, synthplant
from .errors import (
    ConfigurationError,
    DataError,
    FormatError,
    NumericalError,
    StatecoderError,
    TrainingError,
    UsageError,
)

__all__ = [
    "dataset",
    "embedding",
    "neuralcore",
    "synthplant",
    "ConfigurationError",
    "DataError",
    "FormatError",
    "NumericalError",
    "StatecoderError",
    "TrainingError",
    "UsageError",
    "__version__",
]
