"""Reconstruction of word-embedding time series from multichannel neural
recordings, and open-vocabulary text generation from the reconstructions.

Subpackages/modules:

* ``kernels``    — temporal-convolution kernels (compiled core + numpy twin)
* ``tensor``     — minimal reverse-mode autodiff over the ops the model needs
* ``optim``      — Adam
* ``sigproc``    — zero-phase filtering, resampling, alignment, segmentation
* ``textcorpus`` — vocabulary, Kneser-Ney LM, embedding providers, rasterizer
* ``model``      — the convolutional reconstruction network and its training
* ``ridge``      — lagged ridge-regression baseline
* ``beam``       — correlation-guided beam search and null-sequence generation
* ``evaluate``   — retrieval metrics, windowed similarity, permutation tests
* ``synth``      — synthetic forward-model dataset generator
* ``cli``        — command-line pipeline (synth/train/decode/eval)
"""

__version__ = "0.1.0"
