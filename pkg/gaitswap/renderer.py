"""Pose-to-appearance renderers.

A renderer turns an IUVA pose frame into an RGB image of the target subject.
Three implementations share the `Renderer` interface:

- ConvRenderer: small conv encoder-decoder trained with per-pixel L1 on the
  target's own paired pose/RGB frames (`train_renderer`)
- NearestFrameRenderer: returns the target's real RGB frame whose pose is
  closest in feature space
- IdentityRenderer: shows I/24, U and V as the red, green and blue channels
"""

import logging

import numpy as np
import torch
import torch.nn.functional as F
from scipy.spatial.distance import cdist
from torch import nn
from tqdm import tqdm

from gaitswap.errors import DataError
from gaitswap.keys import MomentsExtractor
from gaitswap.model import frames_to_tensor
from gaitswap.validation import validate_choice, validate_positive_int

logger = logging.getLogger(__name__)

RENDERERS = ('conv', 'nn', 'identity')


class Renderer:
    """Interface: `render(frame)` returns an H x W x 3 image in [0, 1]."""
    name = 'base'

    def render(self, frame):
        raise NotImplementedError

    def render_frames(self, frames):
        return [self.render(frame) for frame in frames]


class IdentityRenderer(Renderer):
    name = 'identity'

    def render(self, frame):
        return frame.to_array()[:3].transpose(1, 2, 0).copy()


class NearestFrameRenderer(Renderer):
    """Look up the real frame of the target whose pose features are closest.

    Args:
        footage (GaitSequence): the target's sequence, with rgb_frames
        extractor (FeatureExtractor): pose features (moments by default)
    """
    name = 'nn'

    def __init__(self, footage, extractor=None):
        if footage.rgb_frames is None:
            raise DataError("Sequence " + footage.name + " has no RGB " +
                            "frames to look up")
        self.footage = footage
        self.extractor = extractor or MomentsExtractor()
        self.features = self.extractor.extract(footage)

    def nearest_index(self, frame):
        """Index of the footage frame closest to `frame`."""
        batch = frames_to_tensor([frame])
        with torch.no_grad():
            feature = self.extractor(batch).double().numpy()
        return int(np.argmin(cdist(feature, self.features)[0]))

    def render(self, frame):
        return self.footage.rgb_frames[self.nearest_index(frame)].copy()


class _RendererNetwork(nn.Module):
    def __init__(self, channels):
        super().__init__()
        c = channels
        self.enc1 = nn.Sequential(nn.Conv2d(4, c, 3, padding=1),
                                  nn.LeakyReLU(0.2))
        self.enc2 = nn.Sequential(nn.Conv2d(c, 2 * c, 4, 2, 1),
                                  nn.LeakyReLU(0.2))
        self.enc3 = nn.Sequential(nn.Conv2d(2 * c, 4 * c, 4, 2, 1),
                                  nn.LeakyReLU(0.2))
        self.dec3 = nn.Sequential(nn.Upsample(scale_factor=2),
                                  nn.Conv2d(4 * c, 2 * c, 3, padding=1),
                                  nn.LeakyReLU(0.2))
        self.dec2 = nn.Sequential(nn.Upsample(scale_factor=2),
                                  nn.Conv2d(4 * c, c, 3, padding=1),
                                  nn.LeakyReLU(0.2))
        self.out = nn.Sequential(nn.Conv2d(2 * c, 3, 3, padding=1),
                                 nn.Sigmoid())

    def forward(self, frames):
        skip1 = self.enc1(frames)
        skip2 = self.enc2(skip1)
        hidden = self.dec3(self.enc3(skip2))
        hidden = self.dec2(torch.cat([hidden, skip2], dim=1))
        return self.out(torch.cat([hidden, skip1], dim=1))


class ConvRenderer(Renderer):
    """Trained pose-to-RGB encoder-decoder with skip connections.

    Args:
        channels (int): width of the first layer
        device (torch.device): compute device
    """
    name = 'conv'

    def __init__(self, channels=16, device=None):
        validate_positive_int(channels, "channels")
        self.channels = channels
        self.device = device or torch.device('cpu')
        self.network = _RendererNetwork(channels).to(self.device)
        self.report = {}

    def forward(self, frames):
        return self.network(frames)

    def render_frames(self, frames, batch_size=32):
        self.network.eval()
        images = []
        with torch.no_grad():
            for start in range(0, len(frames), batch_size):
                batch = frames_to_tensor(frames[start:start + batch_size],
                                         self.network)
                _check_sides(batch.shape[-2], batch.shape[-1])
                output = self.network(batch).permute(0, 2, 3, 1)
                images += list(output.float().cpu().numpy())
        return images

    def render(self, frame):
        return self.render_frames([frame])[0]

    def save(self, path):
        torch.save({'kind': 'conv', 'channels': self.channels,
                    'state_dict': self.network.state_dict(),
                    'report': self.report}, path)

    @classmethod
    def load(cls, path, device=None):
        content = torch.load(path, map_location='cpu', weights_only=False)
        if content.get('kind') != 'conv':
            raise DataError(str(path) + " is not a conv renderer file")
        renderer = cls(content['channels'], device)
        renderer.network.load_state_dict(content['state_dict'])
        renderer.report = content.get('report', {})
        return renderer


def _check_sides(height, width):
    if height % 4 or width % 4:
        raise ValueError("The conv renderer needs frame sides divisible by " +
                         "4, got " + str(height) + "x" + str(width))


def _paired_tensors(seq):
    if seq.rgb_frames is None:
        raise DataError("Sequence " + seq.name + " has no RGB frames to " +
                        "train the renderer on")
    _check_sides(seq.height, seq.width)
    poses = frames_to_tensor(seq.frames)
    images = torch.from_numpy(np.stack(seq.rgb_frames)).permute(0, 3, 1, 2)
    return poses, images.float()


def train_renderer(target_seq, steps=500, lr=2e-3, batch_size=8,
                   holdout_every=5, seed=0, channels=16, device=None,
                   progress=False):
    """Train a ConvRenderer on the target's paired pose and RGB frames.

    Every `holdout_every`-th frame is held out and only used to report the
    reconstruction error (`renderer.report['holdout_l1']`).

    Args:
        target_seq (GaitSequence): target frames with rgb_frames
        steps (int): Adam steps
        lr (float): learning rate
        batch_size (int): frames per step
        holdout_every (int): hold out every n-th frame (0: none)
        seed (int): seed of the weights and the batch sampling
        channels (int): renderer width
        device (torch.device): compute device
        progress (bool): show a progress bar

    Returns:
        ConvRenderer: the trained renderer
    """
    validate_positive_int(steps, "steps")
    poses, images = _paired_tensors(target_seq)
    indices = np.arange(len(poses))
    if holdout_every and len(poses) >= 2 * holdout_every:
        held = indices % holdout_every == holdout_every - 1
    else:
        held = np.zeros(len(poses), dtype=bool)
    train_idx, held_idx = indices[~held], indices[held]

    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    renderer = ConvRenderer(channels, device)
    device = renderer.device
    poses, images = poses.to(device), images.to(device)
    optimizer = torch.optim.Adam(renderer.network.parameters(), lr=lr)

    renderer.network.train()
    for _ in tqdm(range(steps), desc="renderer", disable=not progress):
        size = min(batch_size, len(train_idx))
        batch = rng.choice(train_idx, size, replace=False)
        optimizer.zero_grad()
        loss = F.l1_loss(renderer.forward(poses[batch]), images[batch])
        loss.backward()
        optimizer.step()

    renderer.network.eval()
    with torch.no_grad():
        renderer.report['train_l1'] = float(F.l1_loss(
            renderer.forward(poses[train_idx]), images[train_idx]))
        if len(held_idx):
            renderer.report['holdout_l1'] = float(F.l1_loss(
                renderer.forward(poses[held_idx]), images[held_idx]))
    logger.info("Renderer for %s: %s", target_seq.subject_id,
                renderer.report)
    return renderer


def render_sequence(renderer, seq):
    """Render every pose frame of a sequence.

    Args:
        renderer (Renderer): the renderer
        seq (GaitSequence): pose frames

    Returns:
        GaitSequence: the same pose frames with rgb_frames filled in
    """
    images = renderer.render_frames(seq.frames)
    return seq.with_frames(seq.frames, rgb_frames=images)


def get_renderer(name, footage=None, path=None, device=None):
    """Build a renderer by name.

    Args:
        name (str): 'conv', 'nn' or 'identity'
        footage (GaitSequence): target footage ('nn'; 'conv' trains on it
            when no `path` is given)
        path (str): saved ConvRenderer file
        device (torch.device): compute device

    Returns:
        Renderer: the renderer
    """
    validate_choice(name, "renderer", RENDERERS)
    if name == 'identity':
        return IdentityRenderer()
    if name == 'nn':
        if footage is None:
            raise DataError("The nn renderer needs the target's footage")
        return NearestFrameRenderer(footage)
    if path is not None:
        return ConvRenderer.load(path, device)
    if footage is None:
        raise DataError("The conv renderer needs a renderer file or the " +
                        "target's footage to train on")
    return train_renderer(footage, device=device)
