"""Cycle training of the gait transfer networks.

Generators map windows of l_w frames to single frames. To translate a whole
window (needed for the cycle, identity and perceptual terms) the generator is
applied causally at every window position, repeating the first frame of the
window as padding (`translate_window`).

Losses (all reduced with a mean):
- identity: L1(G_st(P_t), P_t) + L1(G_ts(P_s), P_s)
- adversarial (least squares): discriminators push generated frames to 0 and
  real frames to 1; the generator step uses 1-targets for generated frames
- cycle: L2(G_ts(G_st(P_s)), P_s) + L2(G_st(G_ts(P_t)), P_t)
- perceptual: L1 between embedder features of cycled and real frames, IUV and
  alpha channels embedded separately

The learning rate is constant for `warmup_epochs` and then decays linearly to
zero at `epochs`.
"""

import json
import logging
import os
import tempfile
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from tqdm import tqdm

from gaitswap.errors import DataError, KeySetError, NumericalFailure
from gaitswap.keys import KeySet
from gaitswap.gaitdata import IUVAFrame
from gaitswap.model import CycleNetworks, ModelConfig, frames_to_tensor
from gaitswap.validation import validate_non_negative_int, \
    validate_non_negative_number, validate_positive_int, \
    validate_positive_number

logger = logging.getLogger(__name__)

CHECKPOINT_SCHEMA_VERSION = 1
LOSS_NAMES = ('identity', 'adversarial', 'cycle', 'perceptual')


@dataclass
class LossWeights:
    """Weights of the four loss terms."""
    lambda_idt: float = 5.0
    lambda_adv: float = 1.0
    lambda_cyc: float = 10.0
    lambda_per: float = 1.0

    def __post_init__(self):
        for name in ('lambda_idt', 'lambda_adv', 'lambda_cyc', 'lambda_per'):
            validate_non_negative_number(getattr(self, name), name)
        if not any(self.as_tuple()):
            raise ValueError("At least one loss weight must be positive")

    def as_tuple(self):
        return self.lambda_idt, self.lambda_adv, self.lambda_cyc, \
            self.lambda_per


@dataclass
class TrainConfig:
    """Optimisation settings.

    Attributes:
        epochs (int): number of epochs
        warmup_epochs (int): epochs at the initial learning rate
        lr (float): initial learning rate
        adam_beta1 (float): Adam beta1
        adam_beta2 (float): Adam beta2
        steps_per_epoch (int): windows sampled per epoch
        augment (bool): random magnification and crop
        resize (int): magnified canvas side (default canvas * 272 / 256)
        seed (int): seed of weights, sampling and augmentation
        checkpoint_every (int): epochs between checkpoints (0: final only)
        pretrain_steps (int): autoencoder warm-start steps per generator
        perceptual_extractor (str): embedder of the perceptual loss
    """
    epochs: int = 20
    warmup_epochs: int = 5
    lr: float = 2e-4
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    steps_per_epoch: int = 100
    augment: bool = True
    resize: int = None
    seed: int = 0
    checkpoint_every: int = 5
    pretrain_steps: int = 0
    perceptual_extractor: str = 'moments'

    def __post_init__(self):
        validate_positive_int(self.epochs, "epochs")
        validate_non_negative_int(self.warmup_epochs, "warmup_epochs")
        if self.warmup_epochs > self.epochs:
            raise ValueError("warmup_epochs (" + str(self.warmup_epochs) +
                             ") must not exceed epochs (" +
                             str(self.epochs) + ")")
        validate_positive_number(self.lr, "lr")
        for name in ('adam_beta1', 'adam_beta2'):
            value = getattr(self, name)
            validate_non_negative_number(value, name)
            if value >= 1:
                raise ValueError(name + " must be below 1")
        validate_positive_int(self.steps_per_epoch, "steps_per_epoch")
        if self.resize is not None:
            validate_positive_int(self.resize, "resize")
        validate_non_negative_int(self.seed, "seed")
        validate_non_negative_int(self.checkpoint_every, "checkpoint_every")
        validate_non_negative_int(self.pretrain_steps, "pretrain_steps")

    def resize_for(self, canvas):
        """Magnified canvas side used by the augmentation."""
        if self.resize is not None:
            if self.resize < canvas:
                raise ValueError("resize must not be smaller than the canvas")
            return self.resize
        return int(round(canvas * 272 / 256.0))


def lr_at_epoch(epoch, config):
    """Learning rate in effect during an epoch.

    Args:
        epoch (float): epoch index, 0-based
        config (TrainConfig): the schedule

    Returns:
        float: the learning rate
    """
    if epoch <= config.warmup_epochs:
        return config.lr
    decay_epochs = config.epochs - config.warmup_epochs
    return config.lr * max(0.0, (config.epochs - epoch) / decay_epochs)


def _generate(generator, keys, window):
    output = generator(keys, window)
    if isinstance(output, tuple):
        output = output[0]
    return output


def translate_window(generator, keys, window):
    """Translate every frame of a window.

    Frame j of the result is generated from frames j - l_w + 1 .. j of the
    input, with indices below 0 replaced by frame 0.

    Args:
        generator (callable): maps (B x m x 4 x H x W keys,
            B x l_w x 4 x H x W windows) to B x 4 x H x W frames
        keys (torch.Tensor): B x m x 4 x H x W
        window (torch.Tensor): B x l_w x 4 x H x W

    Returns:
        torch.Tensor: B x l_w x 4 x H x W
    """
    batch, length = window.shape[:2]
    positions = torch.arange(length)
    index = (positions[:, None] - length + 1 + positions[None, :]).clamp(
        min=0)
    windows = window[:, index].flatten(0, 1)
    repeated_keys = keys.repeat_interleave(length, dim=0)
    frames = _generate(generator, repeated_keys, windows)
    return frames.view(batch, length, *frames.shape[1:])


def loss_identity(g_st, g_ts, real_t, real_s, keys_t, keys_s):
    """Identity loss: each generator should leave its own domain unchanged.

    Args:
        g_st (callable): sources -> target generator
        g_ts (callable): target -> sources generator
        real_t (torch.Tensor): target window
        real_s (torch.Tensor): source window
        keys_t (torch.Tensor): target keys
        keys_s (torch.Tensor): source keys

    Returns:
        torch.Tensor: the loss (scalar)
    """
    return F.l1_loss(translate_window(g_st, keys_t, real_t), real_t) + \
        F.l1_loss(translate_window(g_ts, keys_s, real_s), real_s)


def _frames(tensor):
    # windows -> single frames
    return tensor.reshape(-1, *tensor.shape[-3:])


def _least_squares(scores, target):
    return F.mse_loss(scores, torch.full_like(scores, target))


def loss_adversarial(d_t, d_s, fakes, reals):
    """Least-squares discriminator objective over both directions.

    Args:
        d_t (callable): discriminator of the target domain
        d_s (callable): discriminator of the source domain
        fakes (tuple): generated (target-domain, source-domain) frames
        reals (tuple): real (target, source) frames

    Returns:
        torch.Tensor: the loss (scalar)
    """
    fake_t, fake_s = fakes
    real_t, real_s = reals
    return _least_squares(d_t(_frames(fake_t)), 0.0) + \
        _least_squares(d_t(_frames(real_t)), 1.0) + \
        _least_squares(d_s(_frames(fake_s)), 0.0) + \
        _least_squares(d_s(_frames(real_s)), 1.0)


def loss_adversarial_generator(d_t, d_s, fakes):
    """Least-squares generator objective (1-targets for generated frames).

    Args:
        d_t (callable): discriminator of the target domain
        d_s (callable): discriminator of the source domain
        fakes (tuple): generated (target-domain, source-domain) frames

    Returns:
        torch.Tensor: the loss (scalar)
    """
    fake_t, fake_s = fakes
    return _least_squares(d_t(_frames(fake_t)), 1.0) + \
        _least_squares(d_s(_frames(fake_s)), 1.0)


def cycle_reconstructions(g_st, g_ts, real_s, real_t, keys_t, keys_s,
                          fakes=None):
    """Translate both windows to the other domain and back.

    Args:
        fakes (tuple): already computed (G_st(P_s), G_ts(P_t))

    Returns:
        tuple: (fake_t, fake_s, cycled_s, cycled_t)
    """
    if fakes is None:
        fakes = (translate_window(g_st, keys_t, real_s),
                 translate_window(g_ts, keys_s, real_t))
    fake_t, fake_s = fakes
    cycled_s = translate_window(g_ts, keys_s, fake_t)
    cycled_t = translate_window(g_st, keys_t, fake_s)
    return fake_t, fake_s, cycled_s, cycled_t


def loss_cycle(g_st, g_ts, real_s, real_t, keys_t, keys_s):
    """Cycle loss: L2 between each window and its round trip.

    Returns:
        torch.Tensor: the loss (scalar)
    """
    _, _, cycled_s, cycled_t = cycle_reconstructions(g_st, g_ts, real_s,
                                                     real_t, keys_t, keys_s)
    return F.mse_loss(cycled_s, real_s) + F.mse_loss(cycled_t, real_t)


def _perceptual_term(embedder, produced, real):
    produced, real = _frames(produced), _frames(real)
    iuv = F.l1_loss(embedder(produced[:, :3]), embedder(real[:, :3]))
    alpha = F.l1_loss(embedder(produced[:, 3:].expand(-1, 3, -1, -1)),
                      embedder(real[:, 3:].expand(-1, 3, -1, -1)))
    return iuv + alpha


def loss_perceptual(embedder, cycled_s, real_s, cycled_t, real_t):
    """Perceptual loss between cycled and real frames.

    The IUV channels and the alpha channel (repeated to 3 channels) are
    embedded separately and the two L1 distances are summed.

    Args:
        embedder (callable): maps N x 3 x H x W images to N x k features
        cycled_s (torch.Tensor): source frames after the round trip
        real_s (torch.Tensor): source frames
        cycled_t (torch.Tensor): target frames after the round trip
        real_t (torch.Tensor): target frames

    Returns:
        torch.Tensor: the loss (scalar)
    """
    return _perceptual_term(embedder, cycled_s, real_s) + \
        _perceptual_term(embedder, cycled_t, real_t)


def total_loss(parts, weights):
    """Weighted sum of the loss terms.

    Args:
        parts (dict): 'identity', 'adversarial', 'cycle' and 'perceptual'
        weights (LossWeights): the weights

    Returns:
        the weighted sum (same type as the parts)
    """
    return weights.lambda_idt * parts['identity'] + \
        weights.lambda_adv * parts['adversarial'] + \
        weights.lambda_cyc * parts['cycle'] + \
        weights.lambda_per * parts['perceptual']


def augment_window(window, resize, canvas, rng):
    """Magnify a window and crop it back to the canvas.

    The part-index channel is resized with nearest neighbour, U/V/A
    bilinearly. One crop offset is drawn per window, so all frames of the
    window get the same crop.

    Args:
        window (torch.Tensor): l_w x 4 x canvas x canvas
        resize (int): magnified side
        canvas (int): output side
        rng (np.random.Generator): random source

    Returns:
        tuple: the cropped window and the (row, col) offset
    """
    if resize == canvas:
        return window, (0, 0)
    size = (resize, resize)
    part_index = F.interpolate(window[:, :1], size=size, mode='nearest')
    surface = F.interpolate(window[:, 1:], size=size, mode='bilinear',
                            align_corners=False).clamp(0.0, 1.0)
    magnified = torch.cat([part_index, surface], dim=1)
    row, col = (int(offset) for offset in
                rng.integers(0, resize - canvas + 1, size=2))
    return magnified[:, :, row:row + canvas, col:col + canvas], (row, col)


def set_requires_grad(modules, flag):
    for module in modules:
        for parameter in module.parameters():
            parameter.requires_grad = flag


def pretrain_autoencoder(generator, frames, steps, lr=1e-3, seed=0,
                         batch_size=8):
    """Train a generator's frame encoder and decoder as an autoencoder.

    Args:
        generator (TransformerGenerator): owner of F and H
        frames (torch.Tensor): N x 4 x H x W frames
        steps (int): optimisation steps
        lr (float): Adam learning rate
        seed (int): seed of the batch sampling
        batch_size (int): frames per step

    Returns:
        list: per-pixel L1 after every step
    """
    validate_non_negative_int(steps, "steps")
    parameters = list(generator.encoder.parameters()) + \
        list(generator.decoder.parameters())
    optimizer = torch.optim.Adam(parameters, lr=lr)
    rng = np.random.default_rng(seed)
    losses = []
    for _ in range(steps):
        if len(frames) > batch_size:
            batch = frames[rng.choice(len(frames), batch_size,
                                      replace=False)]
        else:
            batch = frames
        optimizer.zero_grad()
        loss = F.l1_loss(generator.decoder(generator.encoder(batch)), batch)
        loss.backward()
        optimizer.step()
        losses.append(float(loss))
    return losses


@dataclass
class TrainingBatch:
    """One training sample: a source window and a target window."""
    source_id: str
    real_s: torch.Tensor
    real_t: torch.Tensor
    keys_s: torch.Tensor
    keys_t: torch.Tensor


def _check_finite(parts):
    values = {name: float(value) for name, value in parts.items()}
    bad = [name for name, value in values.items() if not np.isfinite(value)]
    if bad:
        raise NumericalFailure("Non-finite loss (" + ", ".join(bad) +
                               "), aborting training", components=values)
    return values


class Trainer:
    """Owns the networks, optimizers and sampling state of one run.

    Args:
        sequences (list): training GaitSequences of the target and sources
        target_id (str): the target subject
        keysets (dict): subject id -> KeySet for the target and every source
        config (TrainConfig): optimisation settings
        model_config (ModelConfig): architecture
        weights (LossWeights): loss weights
        embedder (FeatureExtractor): perceptual embedder (None disables it)
        device (torch.device): compute device
    """

    def __init__(self, sequences, target_id, keysets, config=None,
                 model_config=None, weights=None, embedder=None,
                 device=None):
        self.config = config or TrainConfig()
        self.model_config = model_config or ModelConfig()
        self.weights = weights or LossWeights()
        self.device = device or torch.device('cpu')
        self.target_id = target_id

        by_subject = {}
        for seq in sequences:
            by_subject.setdefault(seq.subject_id, []).append(seq)
        if target_id not in by_subject:
            raise DataError("Target " + str(target_id) + " has no " +
                            "training sequence")
        if len(by_subject) < 2:
            raise DataError("Training needs the target and at least one " +
                            "source subject")
        missing = sorted(set(by_subject) - set(keysets or {}))
        if missing:
            raise KeySetError("Missing KeySet for " + ", ".join(missing))
        self.source_ids = sorted(s for s in by_subject if s != target_id)
        self.keysets = {s: keysets[s] for s in by_subject}

        window = self.model_config.window
        self.clips = {}
        for subject_id, subject_sequences in by_subject.items():
            usable = [seq for seq in subject_sequences if len(seq) >= window]
            if not usable:
                raise DataError("No sequence of " + subject_id + " has " +
                                str(window) + " frames")
            self.clips[subject_id] = [frames_to_tensor(seq.frames)
                                      for seq in usable]

        if embedder is not None and not embedder.differentiable:
            logger.warning("Perceptual embedder %s is not differentiable, "
                           "disabling the perceptual loss", embedder.name)
            embedder = None
        if embedder is None and self.weights.lambda_per > 0:
            logger.info("No perceptual embedder, lambda_per set to 0")
            self.weights = LossWeights(self.weights.lambda_idt,
                                       self.weights.lambda_adv,
                                       self.weights.lambda_cyc, 0.0)
        self.embedder = embedder

        torch.manual_seed(self.config.seed)
        self.rng = np.random.default_rng(self.config.seed)
        self.networks = CycleNetworks(self.model_config,
                                      target_id).to(self.device)
        self.key_tensors = {s: frames_to_tensor(k.keys)[None].to(self.device)
                            for s, k in self.keysets.items()}

        config = self.config
        betas = (config.adam_beta1, config.adam_beta2)
        self.optimizer_g = torch.optim.Adam(
            self.networks.generator_parameters(), lr=config.lr, betas=betas)
        self.optimizer_d = torch.optim.Adam(
            self.networks.discriminator_parameters(), lr=config.lr,
            betas=betas)
        schedule = lambda epoch: lr_at_epoch(epoch, config) / config.lr
        self.scheduler_g = torch.optim.lr_scheduler.LambdaLR(
            self.optimizer_g, schedule)
        self.scheduler_d = torch.optim.lr_scheduler.LambdaLR(
            self.optimizer_d, schedule)
        self.history = []
        self.resize = config.resize_for(self.model_config.canvas)

    @property
    def lr(self):
        return self.optimizer_g.param_groups[0]['lr']

    def _window(self, subject_id):
        clips = self.clips[subject_id]
        clip = clips[int(self.rng.integers(len(clips)))]
        length = self.model_config.window
        start = int(self.rng.integers(len(clip) - length + 1))
        window = clip[start:start + length]
        if self.config.augment:
            window, _ = augment_window(window, self.resize,
                                       self.model_config.canvas, self.rng)
        return window[None].to(self.device)

    def sample_batch(self):
        """Draw a random source and one random window of each subject."""
        source_id = self.source_ids[int(self.rng.integers(
            len(self.source_ids)))]
        real_s = self._window(source_id)
        real_t = self._window(self.target_id)
        return TrainingBatch(source_id, real_s, real_t,
                             self.key_tensors[source_id],
                             self.key_tensors[self.target_id])

    def generator_step(self, batch):
        """One Adam step on both generators.

        Returns:
            tuple: loss components (floats) and the detached generated
                (target-domain, source-domain) windows
        """
        networks, weights = self.networks, self.weights
        set_requires_grad([networks.d_t, networks.d_s], False)
        self.optimizer_g.zero_grad()

        fake_t, fake_s, cycled_s, cycled_t = cycle_reconstructions(
            networks.g_st, networks.g_ts, batch.real_s, batch.real_t,
            batch.keys_t, batch.keys_s)
        zero = torch.zeros((), device=self.device)
        parts = {
            'identity': loss_identity(
                networks.g_st, networks.g_ts, batch.real_t, batch.real_s,
                batch.keys_t, batch.keys_s)
            if weights.lambda_idt > 0 else zero,
            'adversarial': loss_adversarial_generator(
                networks.d_t, networks.d_s, (fake_t, fake_s))
            if weights.lambda_adv > 0 else zero,
            'cycle': F.mse_loss(cycled_s, batch.real_s) +
            F.mse_loss(cycled_t, batch.real_t),
            'perceptual': loss_perceptual(
                self.embedder, cycled_s, batch.real_s, cycled_t,
                batch.real_t)
            if weights.lambda_per > 0 else zero,
        }
        loss = total_loss(parts, weights)
        values = _check_finite(dict(parts, total=loss))
        loss.backward()
        self.optimizer_g.step()
        set_requires_grad([networks.d_t, networks.d_s], True)
        return values, (fake_t.detach(), fake_s.detach())

    def discriminator_step(self, batch, fakes):
        """One Adam step on both discriminators.

        Returns:
            float: the discriminator loss
        """
        if self.weights.lambda_adv == 0:
            return 0.0
        self.optimizer_d.zero_grad()
        loss = loss_adversarial(self.networks.d_t, self.networks.d_s, fakes,
                                (batch.real_t, batch.real_s))
        value = _check_finite({'discriminator': loss})['discriminator']
        loss.backward()
        self.optimizer_d.step()
        return value

    def pretrain(self):
        """Warm-start the frame encoders and decoders of both generators."""
        frames = torch.cat([clip for clips in self.clips.values()
                            for clip in clips]).to(self.device)
        for generator in (self.networks.g_st, self.networks.g_ts):
            losses = pretrain_autoencoder(generator, frames,
                                          self.config.pretrain_steps,
                                          seed=self.config.seed)
            if losses:
                logger.info("Autoencoder warm start: L1 %.4f", losses[-1])

    def train_epoch(self, epoch, progress=False):
        """Run one epoch and step the learning-rate schedules.

        Returns:
            dict: mean of every loss component over the epoch
        """
        self.networks.train()
        records = []
        steps = tqdm(range(self.config.steps_per_epoch),
                     desc="epoch " + str(epoch), disable=not progress)
        for step in steps:
            batch = self.sample_batch()
            values, fakes = self.generator_step(batch)
            values['discriminator'] = self.discriminator_step(batch, fakes)
            values.update(epoch=epoch, step=step, lr=self.lr,
                          source_id=batch.source_id)
            records.append(values)
            steps.set_postfix(total="%.4f" % values['total'])
        self.history += records
        self.scheduler_g.step()
        self.scheduler_d.step()
        return {name: float(np.mean([r[name] for r in records]))
                for name in LOSS_NAMES + ('total', 'discriminator')}


@dataclass
class Checkpoint:
    """Everything needed to resume training or run inference."""
    networks: CycleNetworks
    model_config: ModelConfig
    train_config: TrainConfig
    weights: LossWeights
    target_id: str
    keysets: dict
    history: list = field(default_factory=list)
    epoch: int = 0


def _keyset_state(keyset):
    return {'subject_id': keyset.subject_id,
            'key_indices': keyset.key_indices,
            'centroids': keyset.centroids,
            'keys': keyset.to_array()}


def _keyset_from_state(state):
    keys = [IUVAFrame.from_array(array) for array in state['keys']]
    return KeySet(subject_id=state['subject_id'], keys=keys,
                  key_indices=state['key_indices'],
                  centroids=state['centroids'])


def save_checkpoint(checkpoint, path):
    """Write a checkpoint atomically (temporary file, then rename).

    Args:
        checkpoint (Checkpoint): the checkpoint
        path (str): destination file

    Returns:
        None
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    content = {
        'schema_version': CHECKPOINT_SCHEMA_VERSION,
        'model_config': asdict(checkpoint.model_config),
        'train_config': asdict(checkpoint.train_config),
        'loss_weights': asdict(checkpoint.weights),
        'target_id': checkpoint.target_id,
        'keysets': {subject_id: _keyset_state(keyset)
                    for subject_id, keyset in checkpoint.keysets.items()},
        'state_dict': checkpoint.networks.state_dict(),
        'history': checkpoint.history,
        'epoch': checkpoint.epoch,
    }
    handle, temporary = tempfile.mkstemp(dir=directory, suffix='.tmp')
    os.close(handle)
    try:
        torch.save(content, temporary)
        os.replace(temporary, path)
    finally:
        if os.path.exists(temporary):
            os.remove(temporary)


def load_checkpoint(path, device=None):
    """Read a checkpoint written by `save_checkpoint`.

    Args:
        path (str): checkpoint file
        device (torch.device): where to put the networks

    Returns:
        Checkpoint: the checkpoint
    """
    if not os.path.isfile(path):
        raise DataError("Missing checkpoint " + str(path))
    content = torch.load(path, map_location='cpu', weights_only=False)
    version = content.get('schema_version')
    if version != CHECKPOINT_SCHEMA_VERSION:
        raise DataError("Checkpoint " + str(path) + " has schema version " +
                        str(version) + ", expected " +
                        str(CHECKPOINT_SCHEMA_VERSION))

    model_config = ModelConfig(**content['model_config'])
    networks = CycleNetworks(model_config, content['target_id'])
    networks.load_state_dict(content['state_dict'])
    networks.to(device or torch.device('cpu')).eval()
    return Checkpoint(
        networks=networks,
        model_config=model_config,
        train_config=TrainConfig(**content['train_config']),
        weights=LossWeights(**content['loss_weights']),
        target_id=content['target_id'],
        keysets={subject_id: _keyset_from_state(state)
                 for subject_id, state in content['keysets'].items()},
        history=content['history'],
        epoch=content['epoch'])


def _write_jsonl(path, records):
    with open(path, 'a') as handle:
        for record in records:
            handle.write(json.dumps(record, sort_keys=True) + "\n")


def train(sequences, target_id, keysets, config=None, model_config=None,
          weights=None, embedder=None, out_dir=None, device=None,
          progress=False):
    """Train a gait transfer model towards one target subject.

    Every step draws a random source subject and one random window of l_w
    consecutive frames from the source and from the target, takes an Adam
    step on the generators and then one on the discriminators.

    Args:
        sequences (list): training GaitSequences (target and sources)
        target_id (str): the target subject
        keysets (dict): subject id -> KeySet, for every subject in
            `sequences`; they stay fixed for the whole run
        config (TrainConfig): optimisation settings
        model_config (ModelConfig): architecture
        weights (LossWeights): loss weights
        embedder (FeatureExtractor): perceptual embedder
        out_dir (str): run directory for `logs/losses.jsonl` and
            `checkpoints/`; nothing is written if None
        device (torch.device): compute device
        progress (bool): show a progress bar

    Returns:
        Checkpoint: the final state, with the per-step loss history
    """
    trainer = Trainer(sequences, target_id, keysets, config, model_config,
                      weights, embedder, device)
    config = trainer.config
    if config.pretrain_steps:
        trainer.pretrain()

    log_path = None
    if out_dir is not None:
        os.makedirs(os.path.join(out_dir, 'logs'), exist_ok=True)
        log_path = os.path.join(out_dir, 'logs', 'losses.jsonl')
        if os.path.exists(log_path):
            os.remove(log_path)

    def checkpoint(epoch):
        return Checkpoint(trainer.networks, trainer.model_config, config,
                          trainer.weights, target_id, trainer.keysets,
                          trainer.history, epoch)

    for epoch in range(config.epochs):
        start = len(trainer.history)
        means = trainer.train_epoch(epoch, progress=progress)
        logger.info("epoch %d: total %.4f (identity %.4f, adversarial "
                    "%.4f, cycle %.4f, perceptual %.4f), lr %.2e", epoch,
                    means['total'], means['identity'], means['adversarial'],
                    means['cycle'], means['perceptual'], trainer.lr)
        if log_path is not None:
            _write_jsonl(log_path, trainer.history[start:])
            if config.checkpoint_every and \
                    (epoch + 1) % config.checkpoint_every == 0:
                save_checkpoint(checkpoint(epoch + 1), os.path.join(
                    out_dir, 'checkpoints', 'epoch_%03d.pt' % (epoch + 1)))

    final = checkpoint(config.epochs)
    if out_dir is not None:
        save_checkpoint(final, os.path.join(out_dir, 'checkpoints',
                                            'final.pt'))
    trainer.networks.eval()
    return final


def epoch_curves(history):
    """Mean of every loss component per epoch.

    Args:
        history (list): per-step records from `train`

    Returns:
        dict: component name -> list of per-epoch means
    """
    epochs = sorted({record['epoch'] for record in history})
    names = LOSS_NAMES + ('total', 'discriminator')
    return {name: [float(np.mean([r[name] for r in history
                                  if r['epoch'] == epoch]))
                   for epoch in epochs]
            for name in names}
