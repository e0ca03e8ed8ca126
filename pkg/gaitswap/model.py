"""Networks of the gait transfer model.

A generator translates a sliding window of pose frames of one walker into a
pose frame that carries another subject's gait. It is built from

- a frame feature encoder (5 conv layers, 4 max-pooling steps),
- a token projection: one token per frame, no positional encoding,
- a Transformer encoder running self-attention over the subject's key frames,
- a Transformer decoder running self-attention over the window frames and
  cross-attention from the window to the encoded keys,
- a frame decoder mirroring the encoder.

The generated frame is aligned with the last frame of the window. Patch
discriminators (5 conv layers) judge single frames.

Example usage:
>>> config = ModelConfig(canvas=64)
>>> networks = CycleNetworks(config, target_id='s01')
>>> frame, record = generator_forward(keyset, window, networks.g_st)
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from gaitswap.errors import KeySetError
from gaitswap.gaitdata import GaitSequence, IUVAFrame
from gaitswap.validation import validate_canvas, validate_choice, \
    validate_positive_int

logger = logging.getLogger(__name__)

ABLATIONS = ('cycle_only', 'attention', 'time_attention')
SCALES = {'desk': {'downsample': 16, 'pool_strides': (2, 2, 2, 2),
                   'feature_channels': 64, 'base_channels': 32},
          'full': {'downsample': 64, 'pool_strides': (2, 2, 4, 4),
                    'feature_channels': 256, 'base_channels': 64}}
DIRECTIONS = ('to_target', 'to_source')


@dataclass
class ModelConfig:
    """Architecture of the generators and discriminators.

    Attributes:
        canvas (int): side of the square frames
        scale (str): 'desk' (/16 downsampling) or 'full' (/64)
        token_dim (int): width of the frame tokens
        n_heads (int): attention heads
        n_blocks_encoder (int): Transformer encoder blocks (keys)
        n_blocks_decoder (int): Transformer decoder blocks (window)
        window (int): frames per sliding window (l_w)
        ablation (str): 'cycle_only', 'attention' or 'time_attention'
        base_channels (int): width of the first conv layer (scale default)
        feature_channels (int): channels of the feature tensor
        ff_dim (int): hidden width of the feed-forward layers (2 x token_dim)
        disc_channels (int): width of the first discriminator layer
    """
    canvas: int = 64
    scale: str = 'desk'
    token_dim: int = 256
    n_heads: int = 4
    n_blocks_encoder: int = 2
    n_blocks_decoder: int = 2
    window: int = 3
    ablation: str = 'time_attention'
    base_channels: int = None
    feature_channels: int = None
    ff_dim: int = None
    disc_channels: int = 32

    def __post_init__(self):
        validate_choice(self.scale, "scale", tuple(SCALES))
        validate_choice(self.ablation, "ablation", ABLATIONS)
        validate_canvas(self.canvas, SCALES[self.scale]['downsample'])
        if self.base_channels is None:
            self.base_channels = SCALES[self.scale]['base_channels']
        if self.feature_channels is None:
            self.feature_channels = SCALES[self.scale]['feature_channels']
        if self.ff_dim is None:
            self.ff_dim = 2 * self.token_dim
        for name in ('token_dim', 'n_heads', 'n_blocks_encoder',
                     'n_blocks_decoder', 'window', 'base_channels',
                     'feature_channels', 'ff_dim', 'disc_channels'):
            validate_positive_int(getattr(self, name), name)
        if self.token_dim % self.n_heads:
            raise ValueError("token_dim (" + str(self.token_dim) + ") must " +
                             "be divisible by n_heads (" +
                             str(self.n_heads) + ")")

    @property
    def downsample(self):
        return SCALES[self.scale]['downsample']

    @property
    def pool_strides(self):
        return SCALES[self.scale]['pool_strides']

    @property
    def grid(self):
        return self.canvas // self.downsample

    @property
    def feature_shape(self):
        """Shape of the per-frame feature tensor (channels, h', w')."""
        return self.feature_channels, self.grid, self.grid


@dataclass
class AttentionRecord:
    """Attention weights of one generator call.

    Every entry is a heads x queries x keys array; one entry per block.

    Attributes:
        encoder_self (list): key self-attention, heads x m x m
        decoder_self (list): window self-attention, heads x l_w x l_w
        decoder_cross (list): window-to-key attention, heads x l_w x m
    """
    encoder_self: list = field(default_factory=list)
    decoder_self: list = field(default_factory=list)
    decoder_cross: list = field(default_factory=list)

    def matrices(self):
        return self.encoder_self + self.decoder_self + self.decoder_cross


def _conv_widths(config):
    c = config.base_channels
    return [4, c, 2 * c, 4 * c, 4 * c, config.feature_channels]


class FrameEncoder(nn.Module):
    """Frame feature encoder F: 4 x H x W -> C x H/s x W/s."""

    def __init__(self, config):
        super().__init__()
        widths = _conv_widths(config)
        layers = []
        for index in range(5):
            layers += [nn.Conv2d(widths[index], widths[index + 1], 3,
                                 padding=1),
                       nn.LeakyReLU(0.2)]
            if index < 4:
                stride = config.pool_strides[index]
                layers.append(nn.MaxPool2d(stride, stride))
        self.layers = nn.Sequential(*layers)

    def forward(self, frames):
        return self.layers(frames)


class FrameDecoder(nn.Module):
    """Frame decoder H, the encoder run in the other direction."""

    def __init__(self, config):
        super().__init__()
        widths = _conv_widths(config)[::-1]
        strides = config.pool_strides[::-1]
        layers = []
        for index in range(5):
            if index > 0:
                layers.append(nn.Upsample(scale_factor=strides[index - 1],
                                          mode='nearest'))
            layers.append(nn.Conv2d(widths[index], widths[index + 1], 3,
                                    padding=1))
            layers.append(nn.LeakyReLU(0.2) if index < 4 else nn.Sigmoid())
        self.layers = nn.Sequential(*layers)

    def forward(self, features):
        return self.layers(features)


class Tokenizer(nn.Module):
    """Flatten a frame feature tensor and project it to one token."""

    def __init__(self, config):
        super().__init__()
        self.projection = nn.Linear(int(np.prod(config.feature_shape)),
                                    config.token_dim)

    def forward(self, features):
        return self.projection(features.flatten(1))


class Detokenizer(nn.Module):
    def __init__(self, config):
        super().__init__()
        self.feature_shape = config.feature_shape
        self.projection = nn.Linear(config.token_dim,
                                    int(np.prod(config.feature_shape)))

    def forward(self, tokens):
        return self.projection(tokens).view(-1, *self.feature_shape)


def _feed_forward(config):
    return nn.Sequential(nn.Linear(config.token_dim, config.ff_dim),
                         nn.GELU(),
                         nn.Linear(config.ff_dim, config.token_dim))


class EncoderBlock(nn.Module):
    """Self-attention over the key tokens plus a feed-forward layer."""

    def __init__(self, config):
        super().__init__()
        self.self_attention = nn.MultiheadAttention(
            config.token_dim, config.n_heads, batch_first=True)
        self.feed_forward = _feed_forward(config)
        self.norm1 = nn.LayerNorm(config.token_dim)
        self.norm2 = nn.LayerNorm(config.token_dim)

    def forward(self, tokens):
        attended, weights = self.self_attention(
            tokens, tokens, tokens, need_weights=True,
            average_attn_weights=False)
        tokens = self.norm1(tokens + attended)
        tokens = self.norm2(tokens + self.feed_forward(tokens))
        return tokens, weights


class DecoderBlock(nn.Module):
    """Optional self-attention over the window, cross-attention to the keys,
    feed-forward layer."""

    def __init__(self, config, self_attention=True):
        super().__init__()
        self.self_attention = None
        if self_attention:
            self.self_attention = nn.MultiheadAttention(
                config.token_dim, config.n_heads, batch_first=True)
            self.norm0 = nn.LayerNorm(config.token_dim)
        self.cross_attention = nn.MultiheadAttention(
            config.token_dim, config.n_heads, batch_first=True)
        self.feed_forward = _feed_forward(config)
        self.norm1 = nn.LayerNorm(config.token_dim)
        self.norm2 = nn.LayerNorm(config.token_dim)

    def forward(self, queries, memory):
        self_weights = None
        if self.self_attention is not None:
            attended, self_weights = self.self_attention(
                queries, queries, queries, need_weights=True,
                average_attn_weights=False)
            queries = self.norm0(queries + attended)
        attended, cross_weights = self.cross_attention(
            queries, memory, memory, need_weights=True,
            average_attn_weights=False)
        queries = self.norm1(queries + attended)
        queries = self.norm2(queries + self.feed_forward(queries))
        return queries, self_weights, cross_weights


class TransformerGenerator(nn.Module):
    """Generator mapping (keys of one subject, window of l_w frames) to a
    frame.

    With the 'cycle_only' ablation the Transformer is bypassed and the
    features of the last window frame go straight to the frame decoder; with
    'attention' the decoder self-attention is switched off.

    Args:
        config (ModelConfig): architecture
        target_id (str): subject whose keys drive the 'to_target' direction
        direction (str): 'to_target' (keys must be the target's) or
            'to_source' (keys must belong to a source subject)
    """

    def __init__(self, config, target_id=None, direction='to_target'):
        super().__init__()
        validate_choice(direction, "direction", DIRECTIONS)
        self.config = config
        self.target_id = target_id
        self.direction = direction
        self.encoder = FrameEncoder(config)
        self.decoder = FrameDecoder(config)
        self.uses_attention = config.ablation != 'cycle_only'
        self.tokenizer = Tokenizer(config)
        self.detokenizer = Detokenizer(config)
        self.key_blocks = nn.ModuleList()
        self.query_blocks = nn.ModuleList()
        if self.uses_attention:
            self.key_blocks.extend(EncoderBlock(config) for _ in
                                   range(config.n_blocks_encoder))
            self.query_blocks.extend(
                DecoderBlock(config,
                             self_attention=config.ablation ==
                             'time_attention')
                for _ in range(config.n_blocks_decoder))

    def check_keys(self, keyset):
        """Raise a KeySetError if the keys do not fit the direction."""
        if self.target_id is None:
            return
        if self.direction == 'to_target' and \
                keyset.subject_id != self.target_id:
            raise KeySetError("Generator towards " + str(self.target_id) +
                              " got the keys of " + str(keyset.subject_id))
        if self.direction == 'to_source' and \
                keyset.subject_id == self.target_id:
            raise KeySetError("Generator towards the sources got the keys " +
                              "of the target " + str(self.target_id))

    def encode_keys(self, keys):
        """Encode key frames (B x m x 4 x H x W) into memory tokens.

        Returns:
            tuple: B x m x token_dim memory and the per-block self-attention
                weights (B x heads x m x m each)
        """
        batch, m = keys.shape[:2]
        tokens = self.tokenizer(self.encoder(keys.flatten(0, 1)))
        tokens = tokens.view(batch, m, -1)
        weights = []
        for block in self.key_blocks:
            tokens, block_weights = block(tokens)
            weights.append(block_weights)
        return tokens, weights

    def attend(self, queries, memory):
        """Run the decoder blocks on window tokens (B x l_w x token_dim).

        Returns:
            tuple: the output token of the last window position
                (B x token_dim), self-attention and cross-attention weights
        """
        self_weights, cross_weights = [], []
        for block in self.query_blocks:
            queries, block_self, block_cross = block(queries, memory)
            if block_self is not None:
                self_weights.append(block_self)
            cross_weights.append(block_cross)
        return queries[:, -1], self_weights, cross_weights

    def forward(self, keys, window, record=False):
        """Generate one frame per window.

        Args:
            keys (torch.Tensor): B x m x 4 x H x W key frames
            window (torch.Tensor): B x l_w x 4 x H x W window frames
            record (bool): also return the attention weights

        Returns:
            tuple: B x 4 x H x W frames and a list of B AttentionRecords
                (None unless `record`)
        """
        batch, length = window.shape[:2]
        if length != self.config.window:
            raise ValueError("Window has " + str(length) + " frames, " +
                             "expected " + str(self.config.window))
        check_frame_size(window, self.config)
        features = self.encoder(window.flatten(0, 1))
        features = features.view(batch, length, *features.shape[1:])

        if not self.uses_attention:
            frames = self.decoder(features[:, -1])
            records = [AttentionRecord() for _ in range(batch)] \
                if record else None
            return frames, records

        memory, key_weights = self.encode_keys(keys)
        queries = self.tokenizer(features.flatten(0, 1)).view(batch, length,
                                                              -1)
        token, self_weights, cross_weights = self.attend(queries, memory)
        frames = self.decoder(self.detokenizer(token))
        records = None
        if record:
            records = _records(key_weights, self_weights, cross_weights,
                               batch)
        return frames, records


def _records(key_weights, self_weights, cross_weights, batch):
    def pick(weights, index):
        return [w[min(index, len(w) - 1)].detach().cpu().numpy()
                for w in weights]

    return [AttentionRecord(encoder_self=pick(key_weights, index),
                            decoder_self=pick(self_weights, index),
                            decoder_cross=pick(cross_weights, index))
            for index in range(batch)]


class PatchDiscriminator(nn.Module):
    """5-layer conv discriminator returning a map of patch scores."""

    def __init__(self, config):
        super().__init__()
        c = config.disc_channels
        widths = [4, c, 2 * c, 4 * c, 8 * c, 1]
        strides = [2, 2, 2, 1, 1]
        layers = []
        for index in range(5):
            layers.append(nn.Conv2d(widths[index], widths[index + 1], 4,
                                    stride=strides[index], padding=1))
            if index < 4:
                layers.append(nn.LeakyReLU(0.2))
        self.layers = nn.Sequential(*layers)

    def forward(self, frames):
        return self.layers(frames)


def discriminator_output_size(canvas):
    """Side of the discriminator score map for a canvas.

    Args:
        canvas (int): frame side in pixels

    Returns:
        int: score map side
    """
    size = canvas
    for stride in (2, 2, 2, 1, 1):
        size = (size + 2 - 4) // stride + 1
    return size


class CycleNetworks(nn.Module):
    """All networks of one gait transfer model.

    Attributes:
        g_st (TransformerGenerator): sources -> target, driven by target keys
        g_ts (TransformerGenerator): target -> sources, driven by source keys
        d_t (PatchDiscriminator): judges target-domain frames
        d_s (PatchDiscriminator): judges source-domain frames
    """

    def __init__(self, config, target_id=None):
        super().__init__()
        self.config = config
        self.target_id = target_id
        self.g_st = TransformerGenerator(config, target_id, 'to_target')
        self.g_ts = TransformerGenerator(config, target_id, 'to_source')
        self.d_t = PatchDiscriminator(config)
        self.d_s = PatchDiscriminator(config)

    def generator_parameters(self):
        return list(self.g_st.parameters()) + list(self.g_ts.parameters())

    def discriminator_parameters(self):
        return list(self.d_t.parameters()) + list(self.d_s.parameters())


def check_frame_size(frames, config):
    """Raise a ValueError unless frames are canvas x canvas."""
    if tuple(frames.shape[-2:]) != (config.canvas, config.canvas):
        raise ValueError("Frames of size " + str(tuple(frames.shape[-2:])) +
                         " do not match the " + str(config.canvas) + "x" +
                         str(config.canvas) + " canvas")


def _placement(module):
    parameter = next(module.parameters())
    return {'dtype': parameter.dtype, 'device': parameter.device}


def frames_to_tensor(frames, module=None):
    """Stack IUVA frames into an N x 4 x H x W tensor.

    Args:
        frames (list): IUVAFrame list
        module (nn.Module): match this module's dtype and device

    Returns:
        torch.Tensor: the stacked frames
    """
    tensor = torch.from_numpy(np.stack([frame.to_array()
                                        for frame in frames]))
    if module is not None:
        tensor = tensor.to(**_placement(module))
    return tensor


def tensor_to_frame(tensor):
    """Turn a 4 x H x W network output into an IUVAFrame."""
    return IUVAFrame.from_array(tensor.detach().float().cpu().numpy())


def encode_frame(frame, generator):
    """Feature tensor of one frame.

    Args:
        frame (IUVAFrame): canvas-sized frame
        generator (TransformerGenerator): owner of the encoder F

    Returns:
        torch.Tensor: C x h' x w' features (differentiable)
    """
    batch = frames_to_tensor([frame], generator.encoder)
    check_frame_size(batch, generator.config)
    return generator.encoder(batch)[0]


def decode_frame(features, generator):
    """Decode a feature tensor into an IUVA frame.

    Args:
        features (torch.Tensor): C x h' x w' features
        generator (TransformerGenerator): owner of the decoder H

    Returns:
        IUVAFrame: the decoded frame
    """
    expected = generator.config.feature_shape
    if tuple(features.shape) != tuple(expected):
        raise ValueError("Feature tensor of shape " +
                         str(tuple(features.shape)) + ", expected " +
                         str(tuple(expected)))
    with torch.no_grad():
        return tensor_to_frame(generator.decoder(features[None])[0])


def tokenize(tensors, tokenizer):
    """Project frame feature tensors to tokens, one per frame.

    Args:
        tensors (list): C x h' x w' feature tensors
        tokenizer (Tokenizer): the projection

    Returns:
        torch.Tensor: n x token_dim tokens
    """
    return tokenizer(torch.stack(list(tensors)))


def generator_forward(keyset, window, generator):
    """Generate the frame aligned with the last frame of a window.

    Args:
        keyset (KeySet): keys of the subject whose gait is produced
        window (list): l_w consecutive IUVAFrames
        generator (TransformerGenerator): the generator

    Returns:
        tuple: (IUVAFrame, AttentionRecord)
    """
    generator.check_keys(keyset)
    if len(window) != generator.config.window:
        raise ValueError("Window has " + str(len(window)) + " frames, " +
                         "expected " + str(generator.config.window))
    keys = frames_to_tensor(keyset.keys, generator)[None]
    frames = frames_to_tensor(window, generator)[None]
    with torch.no_grad():
        output, records = generator(keys, frames, record=True)
    return tensor_to_frame(output[0]), records[0]


def translate_sequence(keyset, seq, generator, batch_size=32):
    """Translate a whole sequence with a sliding window.

    The window advances one frame per step, so the output has
    len(seq) - l_w + 1 frames; output frame j belongs to input frame
    j + l_w - 1.

    Args:
        keyset (KeySet): keys of the subject whose gait is produced
        seq (GaitSequence): the driving sequence
        generator (TransformerGenerator): the generator
        batch_size (int): windows per forward pass

    Returns:
        tuple: (GaitSequence, list of AttentionRecord)
    """
    generator.check_keys(keyset)
    length = generator.config.window
    if len(seq) < length:
        raise ValueError("Sequence " + seq.name + " is shorter than the " +
                         str(length) + "-frame window")

    generator.eval()
    frames = frames_to_tensor(seq.frames, generator)
    check_frame_size(frames, generator.config)
    outputs, records = [], []
    with torch.no_grad():
        features = torch.cat([generator.encoder(frames[start:start + 64])
                              for start in range(0, len(frames), 64)])
        if generator.uses_attention:
            keys = frames_to_tensor(keyset.keys, generator)[None]
            memory, key_weights = generator.encode_keys(keys)
            tokens = generator.tokenizer(features)
            windows = tokens.unfold(0, length, 1).permute(0, 2, 1)
            for start in range(0, len(windows), batch_size):
                queries = windows[start:start + batch_size]
                batch = len(queries)
                token, self_weights, cross_weights = generator.attend(
                    queries, memory.expand(batch, -1, -1))
                outputs.append(generator.decoder(
                    generator.detokenizer(token)))
                records += _records(key_weights, self_weights,
                                    cross_weights, batch)
        else:
            last = features[length - 1:]
            for start in range(0, len(last), batch_size):
                outputs.append(generator.decoder(last[start:start +
                                                      batch_size]))
            records = [AttentionRecord() for _ in range(len(last))]

    translated = [tensor_to_frame(frame) for frame in torch.cat(outputs)]
    result = GaitSequence(subject_id=str(seq.subject_id) + "_to_" +
                          str(keyset.subject_id),
                          view=seq.view, frames=translated, fps=seq.fps)
    return result, records


def discriminator_forward(frame, discriminator):
    """Patch score map of one frame.

    Args:
        frame (IUVAFrame): canvas-sized frame
        discriminator (PatchDiscriminator): the discriminator

    Returns:
        np.ndarray: score map
    """
    batch = frames_to_tensor([frame], discriminator)
    with torch.no_grad():
        return discriminator(batch)[0, 0].cpu().numpy()


def attention_trace(records, key_index):
    """Cross-attention mass given to one key over time.

    Uses the last decoder block, averaged over heads and window positions.

    Args:
        records (list): AttentionRecord per output frame
        key_index (int): the key

    Returns:
        np.ndarray: one value per record
    """
    trace = []
    for record in records:
        if not record.decoder_cross:
            raise ValueError("No cross-attention recorded (the cycle_only " +
                             "ablation has none)")
        weights = np.asarray(record.decoder_cross[-1])
        if not 0 <= key_index < weights.shape[-1]:
            raise ValueError("key_index " + str(key_index) + " out of " +
                             "range for " + str(weights.shape[-1]) + " keys")
        trace.append(float(weights[..., key_index].mean()))
    return np.asarray(trace)
