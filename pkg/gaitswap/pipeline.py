"""GaitTransfer class module.

This module contains the `GaitTransfer` class, the simplest way to use a
trained model: it loads a checkpoint, translates source sequences into the
target's gait, renders them and exposes the attention traces. It also holds
the helpers the command line uses to chain the modules together.
"""

import logging
import os

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402

from gaitswap.device import resolve_device  # noqa: E402
from gaitswap.gaitdata import DatasetManifest, SequenceEntry, \
    save_manifest, save_sequence  # noqa: E402
from gaitswap.model import attention_trace, translate_sequence  # noqa: E402
from gaitswap.renderer import get_renderer, render_sequence  # noqa: E402
from gaitswap.training import load_checkpoint  # noqa: E402

logger = logging.getLogger(__name__)


class GaitTransfer:
    """GaitTransfer class.

    Wraps a trained checkpoint and offers the three steps of gait transfer:
        - `translate`: source pose sequence -> target gait pose sequence
        - `render`: pose sequence -> RGB frames of the target
        - `attention_trace`: cross-attention given to one key over time

    Example usage:
    >>> transfer = GaitTransfer.from_checkpoint(
    ...     'runs/run-<hash>/checkpoints/final.pt')
    >>> generated, records = transfer.translate(source_seq)
    >>> rendered = transfer.render(generated, 'nn', footage=target_seq)
    >>> trace = transfer.attention_trace(records, key_index=0)
    """
    def __init__(self, checkpoint, device=None):
        """Initialize the class from a loaded checkpoint.

        Args:
            checkpoint (Checkpoint): the trained networks and keys
            device (torch.device): where the networks live
        """
        self.checkpoint = checkpoint
        self.device = device
        self.target_id = checkpoint.target_id
        self.keyset = checkpoint.keysets[checkpoint.target_id]
        self.generator = checkpoint.networks.g_st
        self.generator.eval()

    @classmethod
    def from_checkpoint(cls, path, device='cpu'):
        """Load a checkpoint file.

        Args:
            path (str): checkpoint written by `training.save_checkpoint`
            device (str): 'cpu', 'cuda', 'mps' or 'auto'

        Returns:
            GaitTransfer: the facade
        """
        device = resolve_device(device)
        return cls(load_checkpoint(path, device), device)

    def translate(self, seq):
        """Translate a source sequence into the target's gait.

        Args:
            seq (GaitSequence): the source's pose frames

        Returns:
            tuple: generated GaitSequence and its AttentionRecords
        """
        return translate_sequence(self.keyset, seq, self.generator)

    def render(self, seq, renderer='identity', footage=None,
               renderer_path=None):
        """Render a pose sequence.

        Args:
            seq (GaitSequence): pose frames
            renderer (str or Renderer): 'conv', 'nn', 'identity' or an
                instance
            footage (GaitSequence): target footage for 'nn' and for
                training 'conv'
            renderer_path (str): saved conv renderer

        Returns:
            GaitSequence: the frames with rgb_frames filled in
        """
        if isinstance(renderer, str):
            renderer = get_renderer(renderer, footage, renderer_path,
                                    self.device)
        return render_sequence(renderer, seq)

    @staticmethod
    def attention_trace(records, key_index):
        return attention_trace(records, key_index)


def write_generated(sequences, root, bit_depth=8):
    """Store generated sequences as a dataset (all with the test role).

    Args:
        sequences (list): GaitSequences
        root (str): dataset root
        bit_depth (int): quantization of U/V/A

    Returns:
        DatasetManifest: the written manifest
    """
    entries = []
    for seq in sequences:
        save_sequence(seq, os.path.join(root, seq.subject_id, seq.view),
                      bit_depth=bit_depth)
        entries.append(SequenceEntry(seq.subject_id, seq.view, len(seq),
                                     'test'))
    manifest = DatasetManifest(root, entries, bit_depth)
    save_manifest(manifest)
    return manifest


def plot_attention_traces(records, key_indices, prefix):
    """Save one plot per key of its cross-attention trace over time.

    Args:
        records (list): AttentionRecords of a translated sequence
        key_indices (list): keys to plot
        prefix (str): path prefix; files are `<prefix>_key<k>.png`

    Returns:
        list: written file paths
    """
    paths = []
    for key_index in key_indices:
        trace = attention_trace(records, key_index)
        figure, axis = plt.subplots(figsize=(6, 2))
        axis.plot(trace)
        axis.set_xlabel("frame")
        axis.set_ylabel("attention")
        axis.set_title("key " + str(key_index))
        path = prefix + "_key" + str(key_index) + ".png"
        figure.savefig(path, dpi=100, bbox_inches='tight')
        plt.close(figure)
        paths.append(path)
    return paths


def plot_distance_matrix(matrix, path):
    """Save a distance matrix (clips x references) as an image."""
    figure, axis = plt.subplots(figsize=(max(4, len(matrix.col_labels)),
                                         max(3, len(matrix.row_labels) / 2)))
    image = axis.imshow(matrix.values, aspect='auto', cmap='viridis')
    axis.set_xticks(range(len(matrix.col_labels)))
    axis.set_xticklabels(matrix.col_labels, rotation=90)
    axis.set_yticks(range(len(matrix.row_labels)))
    axis.set_yticklabels(matrix.row_labels)
    figure.colorbar(image, ax=axis)
    figure.savefig(path, dpi=100, bbox_inches='tight')
    plt.close(figure)
    return path
