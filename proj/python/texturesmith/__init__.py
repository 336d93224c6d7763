"""Gram-matrix texture synthesis with CRF segmentation and feathered compositing.

Images are float32 arrays shaped (channels, height, width) with values in [0, 1].
"""

import json as _json

from ._texturesmith import (
    ConfigError,
    Error,
    FormatError,
    GramSet,
    IoError,
    Network,
    NumericalError,
    ShapeError,
    color_model_unary,
    composite,
    feather_mask,
    load_gram_set,
    load_image,
    load_weights,
    run_crf,
    save_image,
    seeded_test_network,
    style_descriptor,
    synthesize,
    texture_loss,
    vgg19_network,
)
from ._texturesmith import run_pipeline as _run_pipeline

__version__ = "0.1.0"


def run_pipeline(config, out_dir=None, seed=None, cache_dir=None, segment_only=False):
    """Run a pipeline config file and return the run report as a dict."""
    return _json.loads(_run_pipeline(config, out_dir, seed, cache_dir, segment_only))
