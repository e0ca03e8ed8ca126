"""Real-vs-generated gait video detector.

Frames of real and generated walking videos are labelled (real = 1,
generated = 0) and split by subject: a quarter of the subjects (rounded
down, at least one) are held out for testing. A frame classifier is trained
with binary cross-entropy and early stopping; a video is labelled by the
majority of its frame decisions.
"""

import logging
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from gaitswap.errors import DataError, ExtractorUnavailable
from gaitswap.gaitdata import load_dataset
from gaitswap.validation import validate_choice, validate_non_negative_int, \
    validate_positive_int, validate_positive_number

logger = logging.getLogger(__name__)

REAL = 1
GENERATED = 0
LABELS = {REAL: 'real', GENERATED: 'generated'}
BACKBONES = ('small', 'resnet')


@dataclass
class DetectorConfig:
    """Settings of the detector.

    Attributes:
        epochs (int): maximum number of epochs
        lr (float): Adam learning rate
        batch_size (int): frames per step
        patience (int): epochs without validation improvement before stop
        threshold (float): P(real) above which a frame counts as real
        backbone (str): 'small' (trained from scratch) or 'resnet'
        pretrained_backbone (str): ResNet-152 state dict file
        freeze_backbone (bool): only train the classification head
        min_video_frames (int): shorter videos get no video-level verdict
        validation_fraction (float): training frames kept for validation
        seed (int): seed of weights, validation split and batches
    """
    epochs: int = 20
    lr: float = 1e-3
    batch_size: int = 32
    patience: int = 3
    threshold: float = 0.5
    backbone: str = 'small'
    pretrained_backbone: str = None
    freeze_backbone: bool = False
    min_video_frames: int = 8
    validation_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        validate_positive_int(self.epochs, "epochs")
        validate_positive_number(self.lr, "lr")
        validate_positive_int(self.batch_size, "batch_size")
        validate_positive_int(self.patience, "patience")
        validate_positive_number(self.threshold, "threshold")
        if self.threshold >= 1:
            raise ValueError("threshold must lie within (0, 1)")
        validate_choice(self.backbone, "backbone", BACKBONES)
        validate_positive_int(self.min_video_frames, "min_video_frames")
        if not 0 <= self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie within [0, 1)")
        validate_non_negative_int(self.seed, "seed")


@dataclass
class DetectorSample:
    image: np.ndarray
    label: int
    subject_id: str
    video_id: str


@dataclass
class DetectorDataset:
    """Labelled frames with a subject-disjoint train/test split."""
    samples: list
    train_subjects: list
    test_subjects: list

    def __post_init__(self):
        overlap = set(self.train_subjects) & set(self.test_subjects)
        if overlap:
            raise DataError("Subjects in both splits: " +
                            ", ".join(sorted(overlap)))

    def split(self, name):
        """Samples of the 'train' or 'test' split."""
        validate_choice(name, "split", ('train', 'test'))
        subjects = set(self.train_subjects if name == 'train'
                       else self.test_subjects)
        return [sample for sample in self.samples
                if sample.subject_id in subjects]


def depicted_subject(subject_id):
    """The subject shown in a video ('s00_to_s01' shows s01)."""
    return str(subject_id).split('_to_')[-1]


def split_subjects(subjects, split_seed=0):
    """Assign subjects to train (75%) and test (25%, rounded down).

    At least one subject is held out when there are two or more.

    Args:
        subjects (iterable): subject ids
        split_seed (int): seed of the assignment

    Returns:
        tuple: (train subjects, test subjects), both sorted
    """
    subjects = sorted(set(subjects))
    n_test = len(subjects) // 4
    if n_test == 0 and len(subjects) >= 2:
        n_test = 1
    order = np.random.default_rng(split_seed).permutation(len(subjects))
    test = sorted(subjects[index] for index in order[:n_test])
    train = sorted(subjects[index] for index in order[n_test:])
    return train, test


def _balance(samples, rng):
    by_label = {REAL: [], GENERATED: []}
    for sample in samples:
        by_label[sample.label].append(sample)
    size = min(len(group) for group in by_label.values())
    balanced = []
    for group in by_label.values():
        if len(group) > size:
            picks = np.sort(rng.choice(len(group), size, replace=False))
            group = [group[index] for index in picks]
        balanced += group
    return balanced


def build_detector_dataset_from_sequences(real, generated, split_seed=0):
    """Label and split real and generated RGB sequences.

    Generated videos count for the subject they depict. Subjects lacking
    either class are dropped with a warning; the classes are balanced per
    subject by subsampling the larger one.

    Args:
        real (list): real GaitSequences with rgb_frames
        generated (list): generated GaitSequences with rgb_frames
        split_seed (int): seed of the subject split and the balancing

    Returns:
        DetectorDataset: the dataset
    """
    per_subject = {}
    for label, sequences in ((REAL, real), (GENERATED, generated)):
        for seq in sequences:
            if seq.rgb_frames is None:
                warnings.warn("Sequence " + seq.name + " has no RGB " +
                              "frames, skipped")
                continue
            subject_id = depicted_subject(seq.subject_id)
            video_id = LABELS[label] + ':' + seq.name
            per_subject.setdefault(subject_id, []).extend(
                DetectorSample(image, label, subject_id, video_id)
                for image in seq.rgb_frames)

    rng = np.random.default_rng(split_seed)
    samples = []
    for subject_id in sorted(per_subject):
        labels = {sample.label for sample in per_subject[subject_id]}
        if labels != {REAL, GENERATED}:
            message = "Subject " + subject_id + " lacks " + \
                ("generated" if REAL in labels else "real") + \
                " footage, excluded"
            warnings.warn(message)
            logger.warning(message)
            continue
        samples += _balance(per_subject[subject_id], rng)

    if not samples:
        raise DataError("No subject has both real and generated footage")
    train, test = split_subjects({s.subject_id for s in samples},
                                 split_seed)
    logger.info("Detector split: %d train subjects, %d test subjects",
                len(train), len(test))
    return DetectorDataset(samples, train, test)


def build_detector_dataset(real_root, generated_root, split_seed=0):
    """Build the detector dataset from two dataset roots.

    Args:
        real_root (str): dataset of real footage
        generated_root (str): dataset of rendered generated sequences
        split_seed (int): seed of the subject split

    Returns:
        DetectorDataset: the dataset
    """
    return build_detector_dataset_from_sequences(
        load_dataset(real_root), load_dataset(generated_root), split_seed)


class SmallDetectorNet(nn.Module):
    """Four conv blocks and a linear head producing one logit (real)."""

    def __init__(self, channels=16):
        super().__init__()
        widths = [3, channels, 2 * channels, 4 * channels, 4 * channels]
        blocks = []
        for index in range(4):
            blocks += [nn.Conv2d(widths[index], widths[index + 1], 3,
                                 padding=1),
                       nn.BatchNorm2d(widths[index + 1]),
                       nn.ReLU(),
                       nn.MaxPool2d(2)]
        blocks += [nn.AdaptiveAvgPool2d(1), nn.Flatten()]
        self.backbone = nn.Sequential(*blocks)
        self.head = nn.Linear(widths[-1], 1)

    def forward(self, images):
        return self.head(self.backbone(images))[:, 0]


class ResNetDetectorNet(nn.Module):
    """ResNet-152 with its classifier replaced by a one-logit head."""

    def __init__(self, state_dict_path=None):
        super().__init__()
        try:
            from torchvision.models import resnet152
        except ImportError as error:
            raise ExtractorUnavailable("The ResNet backbone needs " +
                                       "torchvision: " + str(error))
        network = resnet152(weights=None)
        if state_dict_path is not None:
            network.load_state_dict(torch.load(state_dict_path,
                                               map_location='cpu'))
        in_features = network.fc.in_features
        network.fc = nn.Identity()
        self.backbone = network
        self.head = nn.Linear(in_features, 1)

    def forward(self, images):
        return self.head(self.backbone(images))[:, 0]


def build_detector_network(config):
    if config.backbone == 'resnet':
        return ResNetDetectorNet(config.pretrained_backbone)
    return SmallDetectorNet()


@dataclass
class DetectorParams:
    """A trained detector."""
    network: nn.Module
    config: DetectorConfig
    history: list = field(default_factory=list)

    @property
    def threshold(self):
        return self.config.threshold


def _images_tensor(images):
    return torch.from_numpy(np.stack(images).astype(np.float32)).permute(
        0, 3, 1, 2)


def predict_frames(params, images, batch_size=64):
    """P(real) of every image.

    Args:
        params (DetectorParams): the detector
        images (list): H x W x 3 images in [0, 1]

    Returns:
        np.ndarray: one probability per image
    """
    params.network.eval()
    probabilities = []
    with torch.no_grad():
        for start in range(0, len(images), batch_size):
            logits = params.network(_images_tensor(
                images[start:start + batch_size]))
            probabilities.append(torch.sigmoid(logits).numpy())
    return np.concatenate(probabilities) if probabilities else np.zeros(0)


def _accuracy(params, samples):
    if not samples:
        return 0.0
    probabilities = predict_frames(params, [s.image for s in samples])
    labels = np.array([s.label for s in samples])
    return float(np.mean((probabilities >= params.threshold) == labels))


def train_detector(ds, config=None):
    """Train the frame classifier on the training subjects.

    A `validation_fraction` of the training frames is kept aside; training
    stops after `patience` epochs without a better validation accuracy and
    the best weights are restored.

    Args:
        ds (DetectorDataset): the dataset
        config (DetectorConfig): settings

    Returns:
        DetectorParams: the trained detector
    """
    config = config or DetectorConfig()
    samples = ds.split('train')
    if not samples:
        raise DataError("The detector dataset has no training frames")

    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(samples))
    n_validation = int(len(samples) * config.validation_fraction)
    validation = [samples[index] for index in order[:n_validation]]
    training = [samples[index] for index in order[n_validation:]]

    network = build_detector_network(config)
    if config.freeze_backbone:
        for parameter in network.backbone.parameters():
            parameter.requires_grad = False
    params = DetectorParams(network, config)
    optimizer = torch.optim.Adam(
        [p for p in network.parameters() if p.requires_grad], lr=config.lr)

    images = _images_tensor([s.image for s in training])
    labels = torch.tensor([float(s.label) for s in training])
    best_accuracy, best_state, waited = -1.0, None, 0
    for epoch in range(config.epochs):
        network.train()
        if config.freeze_backbone:
            network.backbone.eval()
        permutation = rng.permutation(len(training))
        losses = []
        for start in range(0, len(training), config.batch_size):
            batch = torch.from_numpy(permutation[start:start +
                                                 config.batch_size])
            optimizer.zero_grad()
            loss = F.binary_cross_entropy_with_logits(
                network(images[batch]), labels[batch])
            loss.backward()
            optimizer.step()
            losses.append(float(loss))

        accuracy = _accuracy(params, validation or training)
        params.history.append({'epoch': epoch,
                               'loss': float(np.mean(losses)),
                               'validation_accuracy': accuracy})
        logger.info("detector epoch %d: loss %.4f, validation accuracy "
                    "%.3f", epoch, np.mean(losses), accuracy)
        if accuracy > best_accuracy:
            best_accuracy, waited = accuracy, 0
            best_state = {name: value.clone() for name, value in
                          network.state_dict().items()}
        else:
            waited += 1
            if waited >= config.patience:
                logger.info("detector: early stop after epoch %d", epoch)
                break

    network.load_state_dict(best_state)
    network.eval()
    return params


def vote(probabilities, threshold=0.5):
    """Video verdict from per-frame P(real).

    Majority of frame decisions; a tie is labelled 'generated'. The
    confidence is the mean probability of the winning class.

    Args:
        probabilities (np.ndarray): P(real) per frame
        threshold (float): decision threshold

    Returns:
        tuple: ('real' or 'generated', confidence)
    """
    probabilities = np.asarray(probabilities, dtype=np.float64)
    if probabilities.size == 0:
        raise ValueError("Cannot vote on a video without frames")
    n_real = int(np.sum(probabilities >= threshold))
    if n_real > len(probabilities) - n_real:
        return LABELS[REAL], float(probabilities.mean())
    return LABELS[GENERATED], float((1.0 - probabilities).mean())


def detect(params, seq):
    """Classify a rendered video as real or generated.

    Args:
        params (DetectorParams): the detector
        seq (GaitSequence): sequence with rgb_frames

    Returns:
        tuple: ('real' or 'generated', confidence)
    """
    if seq.rgb_frames is None:
        raise DataError("Sequence " + seq.name + " has no RGB frames")
    return vote(predict_frames(params, seq.rgb_frames), params.threshold)


@dataclass
class DetectorScores:
    """Frame- and video-level accuracy (percentages)."""
    frame_accuracy: float
    video_accuracy: float
    n_frames: int
    n_videos: int
    per_subject: dict = field(default_factory=dict)


def evaluate_detector(params, ds, split='test'):
    """Accuracy of the detector on one split.

    Video accuracy is averaged per subject first, then over subjects;
    videos shorter than `min_video_frames` only count at frame level.

    Args:
        params (DetectorParams): the detector
        ds (DetectorDataset): the dataset
        split (str): 'test' or 'train'

    Returns:
        DetectorScores: the scores
    """
    samples = ds.split(split)
    if not samples:
        raise DataError("The " + split + " split is empty")
    probabilities = predict_frames(params, [s.image for s in samples])
    labels = np.array([s.label for s in samples])
    frame_accuracy = 100.0 * float(np.mean(
        (probabilities >= params.threshold) == labels))

    videos = {}
    for sample, probability in zip(samples, probabilities):
        videos.setdefault(sample.video_id, (sample, []))[1].append(
            probability)
    per_subject = {}
    for first, video_probabilities in videos.values():
        if len(video_probabilities) < params.config.min_video_frames:
            continue
        label, _ = vote(video_probabilities, params.threshold)
        per_subject.setdefault(first.subject_id, []).append(
            label == LABELS[first.label])
    subject_accuracy = {subject: 100.0 * float(np.mean(hits))
                        for subject, hits in per_subject.items()}
    video_accuracy = float(np.mean(list(subject_accuracy.values()))) \
        if subject_accuracy else float('nan')
    return DetectorScores(frame_accuracy, video_accuracy, len(samples),
                          sum(len(hits) for hits in per_subject.values()),
                          subject_accuracy)


def save_detector(params, path):
    torch.save({'config': asdict(params.config),
                'state_dict': params.network.state_dict(),
                'history': params.history}, path)


def load_detector(path):
    content = torch.load(path, map_location='cpu', weights_only=False)
    config = DetectorConfig(**content['config'])
    network = build_detector_network(
        DetectorConfig(**dict(content['config'], pretrained_backbone=None)))
    network.load_state_dict(content['state_dict'])
    network.eval()
    return DetectorParams(network, config, content.get('history', []))
