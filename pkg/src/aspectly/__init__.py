"""
aspectly

=========================
Aspect and polarity classification of Hausa and Engausa movie-review comments,
with a convolutional-recurrent-attention network trained by a small numpy autodiff
engine and four classical baselines to compare it against.

:license: MIT, see [LICENSE](MIT LICENSE) for more details.
"""

__version__ = "0.1.0"


from .corpus import load_dataset, load_manifest, split, synth_generate
from .errors import AspectlyError
from .metrics import evaluate
from .model import DcnnModel, build, predict, train
from .types import *

__all__ = (
    "AspectlyError",
    "DcnnModel",
    "build",
    "evaluate",
    "load_dataset",
    "load_manifest",
    "predict",
    "split",
    "synth_generate",
    "train",
)
