"""Key frame selection.

Every subject is summarised by m key frames: per-frame features are extracted,
reduced with a principal component analysis fit on the subject's own frames,
clustered with k-means, and for every cluster centre the closest frame is
taken as a key.

The following functions and classes are present in this module:
- FeatureExtractor: interface of a frame feature extractor
- MomentsExtractor: silhouette moments and occupancy profiles (torch)
- VGGFeatureExtractor: classifier output of a pretrained VGG16
- get_extractor(name)
- fit_reduction(raw, d)
- extract_features(seq, extractor, d)
- refine_centroids(features, centroids, max_iter, tol)
- cluster_features(features, m, seed)
- select_keys(seq, features, centroids)
- build_keyset(seq, config)
- save_keyset(keyset, path) / load_keyset(path)
"""

import json
import logging
import os
import warnings
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from scipy.spatial.distance import cdist
from sklearn.cluster import KMeans, kmeans_plusplus
from sklearn.decomposition import PCA

from gaitswap.codec import read_frame_file, write_frame_file
from gaitswap.errors import ExtractorUnavailable, KeySetError
from gaitswap.gaitdata import GaitSequence, IUVAFrame
from gaitswap.validation import validate_choice, validate_non_negative_int, \
    validate_positive_int

logger = logging.getLogger(__name__)

EXTRACTORS = ('moments', 'deep')
KEYSET_INDEX_NAME = 'keys.json'


@dataclass
class KeyConfig:
    """Settings of the key selection.

    Attributes:
        m (int): number of keys per subject
        d (int): dimension after the principal component reduction
        extractor (str): 'moments' or 'deep'
        seed (int): k-means seed
    """
    m: int = 18
    d: int = 100
    extractor: str = 'moments'
    seed: int = 0

    def __post_init__(self):
        validate_positive_int(self.m, "m")
        validate_positive_int(self.d, "d")
        validate_choice(self.extractor, "extractor", EXTRACTORS)
        validate_non_negative_int(self.seed, "seed")


@dataclass(eq=False)
class KeySet:
    """The key frames of one subject.

    Attributes:
        subject_id (str): the subject the keys belong to
        keys (list): IUVAFrame list
        key_indices (list): index of every key in the source sequence
        centroids (np.ndarray): m x d cluster centres
    """
    subject_id: str
    keys: list
    key_indices: list
    centroids: np.ndarray

    def __post_init__(self):
        self.keys = list(self.keys)
        self.key_indices = [int(index) for index in self.key_indices]
        self.centroids = np.atleast_2d(np.asarray(self.centroids,
                                                  dtype=np.float64))
        if not self.keys:
            raise KeySetError("KeySet of " + str(self.subject_id) +
                              " has no keys")
        if len(self.keys) != len(self.key_indices) or \
                len(self.keys) != len(self.centroids):
            raise KeySetError("KeySet of " + str(self.subject_id) +
                              " has " + str(len(self.keys)) + " keys, " +
                              str(len(self.key_indices)) + " indices and " +
                              str(len(self.centroids)) + " centroids")

    def __len__(self):
        return len(self.keys)

    def to_array(self):
        """Stack the keys in the network input layout (m x 4 x H x W)."""
        return np.stack([key.to_array() for key in self.keys])


class FeatureExtractor:
    """Interface of a per-frame feature extractor.

    Subclasses implement `forward` on a torch batch (N x C x H x W, C = 3 or
    4, values in [0, 1]) and return N x `output_dim` features. Extractors are
    deterministic.
    """
    name = 'base'
    output_dim = 0
    differentiable = False

    def forward(self, batch):
        raise NotImplementedError

    def __call__(self, batch):
        return self.forward(batch)

    def extract(self, seq, batch_size=64):
        """Raw features of every frame of a sequence.

        Args:
            seq (GaitSequence): the sequence
            batch_size (int): frames per forward pass

        Returns:
            np.ndarray: N x output_dim float64 array
        """
        frames = torch.from_numpy(seq.to_array())
        chunks = []
        with torch.no_grad():
            for start in range(0, len(frames), batch_size):
                chunks.append(self.forward(frames[start:start + batch_size]))
        return torch.cat(chunks).double().numpy()


def _mass_map(batch):
    # 4 channels: alpha; 3 channels: mean intensity
    if batch.shape[1] == 4:
        return batch[:, 3]
    return batch.mean(dim=1)


def _hu_moments(mass):
    _, height, width = mass.shape
    ys = torch.linspace(0.0, 1.0, height, dtype=mass.dtype,
                        device=mass.device)[:, None]
    xs = torch.linspace(0.0, 1.0, width, dtype=mass.dtype,
                        device=mass.device)[None, :]
    m00 = mass.sum(dim=(1, 2)) + 1e-8
    cx = (mass * xs).sum(dim=(1, 2)) / m00
    cy = (mass * ys).sum(dim=(1, 2)) / m00
    dx = xs[None] - cx[:, None, None]
    dy = ys[None] - cy[:, None, None]

    def eta(p, q):
        mu = (mass * dx ** p * dy ** q).sum(dim=(1, 2))
        return mu / m00 ** (1.0 + (p + q) / 2.0)

    n20, n02, n11 = eta(2, 0), eta(0, 2), eta(1, 1)
    n30, n03, n21, n12 = eta(3, 0), eta(0, 3), eta(2, 1), eta(1, 2)
    a, b = n30 + n12, n21 + n03
    hu = torch.stack([
        n20 + n02,
        (n20 - n02) ** 2 + 4 * n11 ** 2,
        (n30 - 3 * n12) ** 2 + (3 * n21 - n03) ** 2,
        a ** 2 + b ** 2,
        (n30 - 3 * n12) * a * (a ** 2 - 3 * b ** 2) +
        (3 * n21 - n03) * b * (3 * a ** 2 - b ** 2),
        (n20 - n02) * (a ** 2 - b ** 2) + 4 * n11 * a * b,
        (3 * n21 - n03) * a * (a ** 2 - 3 * b ** 2) -
        (n30 - 3 * n12) * b * (3 * a ** 2 - b ** 2),
    ], dim=1)
    return torch.sign(hu) * torch.log1p(torch.abs(hu) * 1e3)


class MomentsExtractor(FeatureExtractor):
    """64-bin silhouette descriptor.

    Seven Hu moments (signed log scale), the silhouette area, and row and
    column occupancy profiles resampled to 28 bins each. Written with torch
    operations only, so it can also serve as the embedder of the perceptual
    loss.
    """
    name = 'moments'
    output_dim = 64
    differentiable = True
    profile_bins = 28

    def forward(self, batch):
        mass = _mass_map(batch)
        rows = F.adaptive_avg_pool1d(mass.mean(dim=2)[:, None],
                                     self.profile_bins)[:, 0]
        cols = F.adaptive_avg_pool1d(mass.mean(dim=1)[:, None],
                                     self.profile_bins)[:, 0]
        area = mass.mean(dim=(1, 2))[:, None]
        return torch.cat([_hu_moments(mass), area, rows, cols], dim=1)


class VGGFeatureExtractor(FeatureExtractor):
    """Classifier output (1000 values) of an ImageNet VGG16.

    IUVA frames are fed as their IUV channels; 3-channel images as they are.
    Needs torchvision and its pretrained weights.
    """
    name = 'deep'
    output_dim = 1000
    differentiable = True

    def __init__(self, device=None):
        try:
            from torchvision.models import VGG16_Weights, vgg16
            self.network = vgg16(weights=VGG16_Weights.DEFAULT)
        except Exception as error:
            raise ExtractorUnavailable(
                "The deep feature extractor needs torchvision and the " +
                "VGG16 ImageNet weights (pip install gaitswap[deep]): " +
                str(error))
        self.device = device or torch.device('cpu')
        self.network.eval().to(self.device)
        for parameter in self.network.parameters():
            parameter.requires_grad = False
        self.mean = torch.tensor([0.485, 0.456, 0.406])[None, :, None, None]
        self.std = torch.tensor([0.229, 0.224, 0.225])[None, :, None, None]

    def forward(self, batch):
        images = batch[:, :3].float().to(self.device)
        images = F.interpolate(images, size=(224, 224), mode='bilinear',
                               align_corners=False)
        images = (images - self.mean.to(self.device)) / \
            self.std.to(self.device)
        return self.network(images).cpu()


def get_extractor(name):
    """Instantiate a feature extractor by name.

    Args:
        name (str): 'moments' or 'deep'

    Returns:
        FeatureExtractor: the extractor
    """
    validate_choice(name, "extractor", EXTRACTORS)
    if name == 'deep':
        return VGGFeatureExtractor()
    return MomentsExtractor()


def fit_reduction(raw, d):
    """Fit the principal component reduction of one subject's features.

    Keeps min(d, N - 1, d_raw) components. The sign of every component is
    fixed so that its largest-magnitude entry is positive.

    Args:
        raw (np.ndarray): N x d_raw raw features
        d (int): requested dimension

    Returns:
        sklearn.decomposition.PCA: the fitted reduction
    """
    validate_positive_int(d, "d")
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2 or raw.shape[0] < 2:
        raise ValueError("At least 2 frames are needed to fit the " +
                         "reduction, got " + str(raw.shape[0]))
    if not np.all(np.isfinite(raw)):
        raise ValueError("Raw features contain non-finite values")

    n_components = min(d, raw.shape[0] - 1, raw.shape[1])
    pca = PCA(n_components=n_components, svd_solver='full')
    with warnings.catch_warnings(), np.errstate(divide='ignore',
                                                invalid='ignore'):
        warnings.simplefilter("ignore", RuntimeWarning)
        pca.fit(raw)

    pivots = np.argmax(np.abs(pca.components_), axis=1)
    signs = np.sign(pca.components_[np.arange(n_components), pivots])
    signs[signs == 0] = 1.0
    pca.components_ *= signs[:, None]
    return pca


def extract_features(seq, extractor, d):
    """Reduced per-frame features of a sequence.

    Args:
        seq (GaitSequence): the subject's frames (at least 2)
        extractor (FeatureExtractor): raw feature extractor
        d (int): requested dimension

    Returns:
        np.ndarray: N x min(d, N - 1, d_raw) features
    """
    validate_positive_int(d, "d")
    if len(seq) < 2:
        raise ValueError("At least 2 frames are needed to extract reduced " +
                         "features, " + seq.name + " has " + str(len(seq)))
    raw = extractor.extract(seq)
    pca = fit_reduction(raw, d)
    return (raw - pca.mean_) @ pca.components_.T


def refine_centroids(features, centroids, max_iter=300, tol=1e-6):
    """Lloyd iterations from given centres.

    Stops when the inertia improves by at most `tol` times its previous
    value, or after `max_iter` iterations.

    Args:
        features (np.ndarray): N x d features
        centroids (np.ndarray): m x d initial centres
        max_iter (int): iteration limit
        tol (float): relative inertia tolerance

    Returns:
        tuple: (m x d centres, inertia, iterations run)
    """
    inertia = None
    for iteration in range(1, max_iter + 1):
        step = KMeans(n_clusters=len(centroids), init=centroids, n_init=1,
                      max_iter=1, tol=0.0).fit(features)
        centroids = step.cluster_centers_
        previous, inertia = inertia, float(step.inertia_)
        if previous is not None and previous - inertia <= tol * previous:
            break
    return centroids, inertia, iteration


def cluster_features(features, m, seed=0, n_init=10, max_iter=300,
                     tol=1e-6):
    """k-means cluster centres of the reduced features.

    Each of the `n_init` restarts draws k-means++ centres and refines them
    with `refine_centroids`; the restart with the lowest inertia wins. The
    centres are returned in lexicographic order so that the result does not
    depend on the order of the frames.

    Args:
        features (np.ndarray): N x d features
        m (int): number of clusters
        seed (int): random state of the initialisation
        n_init (int): k-means++ restarts
        max_iter (int): Lloyd iterations per restart
        tol (float): relative inertia tolerance

    Returns:
        np.ndarray: m x d centres
    """
    validate_positive_int(m, "m")
    validate_positive_int(n_init, "n_init")
    validate_positive_int(max_iter, "max_iter")
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if features.shape[0] < m:
        raise ValueError("Cannot form " + str(m) + " clusters from " +
                         str(features.shape[0]) + " feature vectors")

    random_state = np.random.RandomState(seed)
    best, best_inertia = None, np.inf
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for _ in range(n_init):
            initial, _ = kmeans_plusplus(features, m,
                                         random_state=random_state)
            centroids, inertia, _ = refine_centroids(features, initial,
                                                     max_iter, tol)
            if inertia < best_inertia:
                best, best_inertia = centroids, inertia
    order = np.lexsort(best.T[::-1])
    return best[order]


def select_keys(seq, features, centroids):
    """Pick the frame closest to every cluster centre.

    Ties are broken by the lowest frame index.

    Args:
        seq (GaitSequence): the subject's frames
        features (np.ndarray): N x d features aligned with the frames
        centroids (np.ndarray): m x d cluster centres

    Returns:
        KeySet: the keys
    """
    features = np.atleast_2d(np.asarray(features, dtype=np.float64))
    centroids = np.atleast_2d(np.asarray(centroids, dtype=np.float64))
    if features.shape[0] != len(seq):
        raise ValueError("Got " + str(features.shape[0]) + " feature " +
                         "vectors for " + str(len(seq)) + " frames")

    distances = cdist(centroids, features)
    key_indices = []
    for row in distances:
        best = row.min()
        ties = np.flatnonzero(row <= best + 1e-12 * (1.0 + best))
        key_indices.append(int(ties[0]))

    if len(set(key_indices)) < len(key_indices):
        logger.info("Two centroids of %s share a nearest frame", seq.name)
    return KeySet(subject_id=seq.subject_id,
                  keys=[seq.frames[index] for index in key_indices],
                  key_indices=key_indices,
                  centroids=centroids)


def build_keyset(seq, config=None, extractor=None):
    """Run the full key selection on one subject.

    Args:
        seq (GaitSequence): the subject's frames
        config (KeyConfig): key settings (defaults if None)
        extractor (FeatureExtractor): overrides `config.extractor`

    Returns:
        KeySet: the keys
    """
    config = config or KeyConfig()
    extractor = extractor or get_extractor(config.extractor)
    features = extract_features(seq, extractor, config.d)
    centroids = cluster_features(features, config.m, config.seed)
    keyset = select_keys(seq, features, centroids)
    logger.info("Selected %d keys for %s", len(keyset), seq.subject_id)
    return keyset


def build_keysets(sequences, config=None, extractor=None):
    """Key sets of every subject in a list of sequences.

    Sequences of the same subject are concatenated in list order.

    Args:
        sequences (list): GaitSequence list
        config (KeyConfig): key settings
        extractor (FeatureExtractor): overrides `config.extractor`

    Returns:
        dict: subject id -> KeySet
    """
    config = config or KeyConfig()
    extractor = extractor or get_extractor(config.extractor)
    grouped = {}
    for seq in sequences:
        grouped.setdefault(seq.subject_id, []).append(seq)

    keysets = {}
    for subject_id, subject_sequences in grouped.items():
        frames = [frame for seq in subject_sequences for frame in seq.frames]
        merged = GaitSequence(subject_id=subject_id,
                              view=subject_sequences[0].view,
                              frames=frames, fps=subject_sequences[0].fps)
        keysets[subject_id] = build_keyset(merged, config, extractor)
    return keysets


def save_keyset(keyset, path):
    """Write a KeySet as 16-bit key frames plus `keys.json`.

    Args:
        keyset (KeySet): the keys
        path (str): target directory

    Returns:
        None
    """
    os.makedirs(path, exist_ok=True)
    for number, key in enumerate(keyset.keys):
        write_frame_file(os.path.join(path, 'key_%03d.png' % number),
                         key.part_index, key.u, key.v, key.alpha, 16)
    index = {'subject_id': keyset.subject_id,
             'key_indices': keyset.key_indices,
             'centroids': keyset.centroids.tolist(),
             'bit_depth': 16}
    with open(os.path.join(path, KEYSET_INDEX_NAME), 'w') as handle:
        json.dump(index, handle, indent=2)


def load_keyset(path):
    """Read a KeySet written by `save_keyset`.

    Args:
        path (str): KeySet directory

    Returns:
        KeySet: the keys
    """
    index_path = os.path.join(path, KEYSET_INDEX_NAME)
    if not os.path.isfile(index_path):
        raise KeySetError("Missing KeySet index " + index_path)
    with open(index_path) as handle:
        index = json.load(handle)

    keys = [IUVAFrame(*read_frame_file(
        os.path.join(path, 'key_%03d.png' % number), index['bit_depth']))
        for number in range(len(index['key_indices']))]
    return KeySet(subject_id=index['subject_id'], keys=keys,
                  key_indices=index['key_indices'],
                  centroids=np.asarray(index['centroids']))
