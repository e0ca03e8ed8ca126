"""gaitswap package: transfer the gait of one person onto another.

Here's a quick overview of how this package can be used:

1) Write a synthetic dataset of walking figures (or preprocess your own):
`from gaitswap.gaitdata import synth_dataset`
`synth_dataset('data/toy', n_subjects=4)`
2) Train a model towards a target subject:
`gaitswap train --dataset data/toy --target s01 --out runs/toy`
3) Load the trained model and translate a source sequence:
`from gaitswap import GaitTransfer`
`transfer = GaitTransfer.from_checkpoint('runs/toy/checkpoints/final.pt')`
`generated, records = transfer.translate(source_seq)`

Frames are IUVA maps (body part index, U/V surface coordinates, alpha) on
a square canvas. The generator attends over a small set of key poses of
the target, selected once per subject by clustering frame features.

For more in-depth information see the docstrings of the individual
modules (`gaitdata`, `keys`, `model`, `training`, `renderer`,
`evaluation`, `detector`).
"""

from .gaitdata import GaitSequence, IUVAFrame
from .keys import KeySet
from .pipeline import GaitTransfer

__all__ = ["GaitTransfer", "GaitSequence", "IUVAFrame", "KeySet"]
