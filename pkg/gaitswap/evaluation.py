"""Metrics for generated gait sequences.

- gait identification: embed clips of a generated sequence and the real
  reference sequences, vote with the three closest references per clip
  (`identify_subject`, `target_accuracy`)
- appearance: Chamfer-matched frame quality (`chamfer_quality`) with SSIM or
  a feature distance, FID and Inception Score over pluggable embeddings
- motion: mean pairwise silhouette IoU between two sequences
  (`retargeting_iou`)

The built-in gait embedder (`BaselineGaitEmbedder`) concatenates the gait
energy image (mean silhouette) and the spectrum of the silhouette width; an
`ExternalGaitEmbedder` loads any TorchScript model instead.
"""

import csv
import logging
import warnings
from dataclasses import asdict, dataclass, field

import cv2
import numpy as np
import torch
from scipy.linalg import eigh
from scipy.spatial.distance import cdist
from skimage.metrics import structural_similarity
from sklearn.cluster import KMeans

from gaitswap.errors import DataError, ExtractorUnavailable
from gaitswap.gaitdata import silhouette_from_alpha
from gaitswap.keys import MomentsExtractor
from gaitswap.validation import validate_choice, validate_positive_int

logger = logging.getLogger(__name__)

ORIENTATIONS = ('similarity', 'distance')


@dataclass
class EvalConfig:
    """Settings of the generation metrics.

    Attributes:
        clip_len (int): frames per identification clip
        top_k (int): closest references that earn a vote per clip
        embedder (str): 'baseline' or 'external:PATH'
        gei_size (int): side of the resized gait energy image
        n_fft_bins (int): spectrum bins of the width signal
        fft_length (int): frames per spectrum segment
        max_chamfer_frames (int): frames sampled per side for Chamfer
        is_classes (int): pose classes of the Inception Score classifier
        seed (int): seed of the pose classifier
    """
    clip_len: int = 40
    top_k: int = 3
    embedder: str = 'baseline'
    gei_size: int = 16
    n_fft_bins: int = 8
    fft_length: int = 64
    max_chamfer_frames: int = 32
    is_classes: int = 10
    seed: int = 0

    def __post_init__(self):
        for name in ('clip_len', 'top_k', 'gei_size', 'n_fft_bins',
                     'fft_length', 'max_chamfer_frames', 'is_classes'):
            validate_positive_int(getattr(self, name), name)
        if self.embedder != 'baseline' and \
                not self.embedder.startswith('external:'):
            raise ValueError("embedder must be 'baseline' or " +
                             "'external:PATH', got " + repr(self.embedder))
        if self.n_fft_bins > self.fft_length // 2:
            raise ValueError("n_fft_bins must not exceed fft_length / 2")


def sequence_masks(seq):
    """Silhouettes of every frame, N x H x W uint8."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return np.stack([silhouette_from_alpha(frame).mask
                         for frame in seq.frames])


class GaitEmbedder:
    """Interface: `embed(seq)` returns a fixed-length vector."""
    name = 'base'

    def embed(self, seq):
        raise NotImplementedError


class BaselineGaitEmbedder(GaitEmbedder):
    """Gait energy image plus width spectrum.

    The mean silhouette is resized to gei_size x gei_size. The width signal
    (occupied columns per frame) has its mean removed and is cut into
    fft_length segments (zero-padded); the mean magnitude of spectrum bins
    1..n_fft_bins forms the second block. Each block is scaled to unit norm
    and the concatenation is L2-normalised, so a blank sequence has a
    zero spectrum block.

    Args:
        gei_size (int): side of the resized gait energy image
        n_fft_bins (int): number of spectrum bins kept
        fft_length (int): segment length of the spectrum
    """
    name = 'baseline'

    def __init__(self, gei_size=16, n_fft_bins=8, fft_length=64):
        validate_positive_int(gei_size, "gei_size")
        validate_positive_int(n_fft_bins, "n_fft_bins")
        validate_positive_int(fft_length, "fft_length")
        self.gei_size = gei_size
        self.n_fft_bins = n_fft_bins
        self.fft_length = fft_length

    @property
    def output_dim(self):
        return self.gei_size ** 2 + self.n_fft_bins

    def width_spectrum(self, widths):
        widths = np.asarray(widths, dtype=np.float64)
        widths = widths - widths.mean()
        n_segments = max(1, len(widths) // self.fft_length)
        spectra = [np.abs(np.fft.rfft(
            widths[index * self.fft_length:(index + 1) * self.fft_length],
            n=self.fft_length)) for index in range(n_segments)]
        return np.mean(spectra, axis=0)[1:self.n_fft_bins + 1]

    def embed(self, seq):
        masks = sequence_masks(seq)
        gei = cv2.resize(masks.mean(axis=0).astype(np.float32),
                         (self.gei_size, self.gei_size),
                         interpolation=cv2.INTER_AREA).ravel()
        spectrum = self.width_spectrum(masks.any(axis=1).sum(axis=1))

        blocks = []
        for block in (gei.astype(np.float64), spectrum):
            norm = np.linalg.norm(block)
            blocks.append(block / norm if norm > 0 else block)
        embedding = np.concatenate(blocks)
        norm = np.linalg.norm(embedding)
        return embedding / norm if norm > 0 else embedding


class ExternalGaitEmbedder(GaitEmbedder):
    """TorchScript gait model taking a 1 x N x H x W silhouette tensor.

    Args:
        path (str): TorchScript file
    """
    name = 'external'

    def __init__(self, path):
        try:
            self.model = torch.jit.load(path, map_location='cpu')
        except (RuntimeError, ValueError, OSError) as error:
            raise ExtractorUnavailable("Cannot load the gait model " +
                                       str(path) + ": " + str(error))
        self.model.eval()
        self.name = 'external:' + str(path)

    def embed(self, seq):
        masks = torch.from_numpy(sequence_masks(seq).astype(np.float32))
        with torch.no_grad():
            output = self.model(masks[None])
        return output.reshape(-1).double().numpy()


def get_gait_embedder(name, config=None):
    """Build a gait embedder from 'baseline' or 'external:PATH'."""
    config = config or EvalConfig()
    if name == 'baseline':
        return BaselineGaitEmbedder(config.gei_size, config.n_fft_bins,
                                    config.fft_length)
    if name.startswith('external:'):
        return ExternalGaitEmbedder(name[len('external:'):])
    raise ValueError("Unknown gait embedder: " + repr(name))


def gait_distance(embedder, ref, gen):
    """Euclidean distance between the embeddings of two sequences.

    Args:
        embedder (GaitEmbedder): the gait model
        ref (GaitSequence): reference sequence
        gen (GaitSequence): generated sequence

    Returns:
        float: the distance
    """
    return float(np.linalg.norm(embedder.embed(ref) - embedder.embed(gen)))


def split_clips(seq, clip_len):
    """Overlapping clips with stride floor(clip_len / 2).

    Args:
        seq (GaitSequence): the sequence
        clip_len (int): frames per clip

    Returns:
        list: GaitSequence clips
    """
    validate_positive_int(clip_len, "clip_len")
    if len(seq) < clip_len:
        raise ValueError("Sequence " + seq.name + " has " + str(len(seq)) +
                         " frames, fewer than clip_len " + str(clip_len))
    stride = max(1, clip_len // 2)
    return [seq.with_frames(seq.frames[start:start + clip_len])
            for start in range(0, len(seq) - clip_len + 1, stride)]


@dataclass
class DistanceMatrix:
    """Distances between generated clips (rows) and references (columns)."""
    values: np.ndarray
    row_labels: list
    col_labels: list

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values,
                                               dtype=np.float64))
        if self.values.shape != (len(self.row_labels),
                                 len(self.col_labels)):
            raise ValueError("Distance matrix shape " +
                             str(self.values.shape) + " does not match " +
                             "its labels")
        if np.any(self.values < 0):
            raise ValueError("Distances must be non-negative")


def _sorted_refs(refs):
    if not refs:
        raise ValueError("At least one reference sequence is needed")
    return sorted(refs, key=lambda seq: (str(seq.subject_id), str(seq.view)))


def clip_distance_matrix(embedder, refs, gen, clip_len,
                         ref_embeddings=None):
    """Distance of every clip of `gen` to every reference.

    Args:
        embedder (GaitEmbedder): the gait model
        refs (list): reference GaitSequences
        gen (GaitSequence): generated sequence
        clip_len (int): frames per clip
        ref_embeddings (np.ndarray): precomputed embeddings of `refs`

    Returns:
        DistanceMatrix: clips x references
    """
    clips = split_clips(gen, clip_len)
    if ref_embeddings is None:
        ref_embeddings = np.stack([embedder.embed(ref) for ref in refs])
    clip_embeddings = np.stack([embedder.embed(clip) for clip in clips])
    values = cdist(clip_embeddings, ref_embeddings)
    row_labels = ['clip%03d' % index for index in range(len(clips))]
    col_labels = [str(ref.subject_id) + '/' + str(ref.view) for ref in refs]
    return DistanceMatrix(values, row_labels, col_labels)


def rank_by_votes(distances, top_k=3):
    """Vote with the `top_k` closest columns of every row.

    The winner has the most votes; ties go to the smaller mean distance,
    then to the lower column index.

    Args:
        distances (np.ndarray): rows x columns distances
        top_k (int): votes per row

    Returns:
        tuple: (winning column, vote counts per column)
    """
    distances = np.atleast_2d(np.asarray(distances, dtype=np.float64))
    n_cols = distances.shape[1]
    counts = np.zeros(n_cols, dtype=int)
    for row in distances:
        counts[np.argsort(row, kind='stable')[:min(top_k, n_cols)]] += 1
    means = distances.mean(axis=0)
    order = sorted(range(n_cols), key=lambda col: (-counts[col], means[col],
                                                   col))
    return order[0], counts


def _identify(embedder, refs, ref_embeddings, gen, clip_len, top_k):
    matrix = clip_distance_matrix(embedder, refs, gen, clip_len,
                                  ref_embeddings)
    winner, _ = rank_by_votes(matrix.values, top_k)
    return refs[winner].subject_id, float(matrix.values[:, winner].mean())


def identify_subject(embedder, refs, gen, clip_len, top_k=3):
    """Identify the walker of a generated sequence.

    The sequence is cut into overlapping clips; per clip the references are
    ranked by gait distance and the `top_k` closest earn one vote each.
    References are ordered by (subject id, view) first, so the result does
    not depend on the order of `refs`.

    Args:
        embedder (GaitEmbedder): the gait model
        refs (list): reference GaitSequences
        gen (GaitSequence): generated sequence
        clip_len (int): frames per clip
        top_k (int): votes per clip

    Returns:
        tuple: (subject id, mean distance of the winner over the clips)
    """
    refs = _sorted_refs(refs)
    ref_embeddings = np.stack([embedder.embed(ref) for ref in refs])
    return _identify(embedder, refs, ref_embeddings, gen, clip_len, top_k)


def target_accuracy(embedder, refs, generated_set, target_id, clip_len,
                    top_k=3):
    """Percentage of generated sequences identified as the target.

    Args:
        embedder (GaitEmbedder): the gait model
        refs (list): reference GaitSequences of all subjects
        generated_set (list): generated GaitSequences
        target_id (str): the target subject
        clip_len (int): frames per clip
        top_k (int): votes per clip

    Returns:
        float: percentage in [0, 100]
    """
    if not generated_set:
        raise ValueError("No generated sequence to evaluate")
    refs = _sorted_refs(refs)
    ref_embeddings = np.stack([embedder.embed(ref) for ref in refs])
    hits = 0
    for gen in generated_set:
        subject_id, distance = _identify(embedder, refs, ref_embeddings, gen,
                                         clip_len, top_k)
        logger.debug("%s identified as %s (%.4f)", gen.name, subject_id,
                     distance)
        hits += subject_id == target_id
    return 100.0 * hits / len(generated_set)


def ssim(a, b):
    """Structural similarity of two images in [0, 1].

    Gaussian 11 x 11 window with sigma 1.5 and the standard constants;
    colour images are averaged over channels.

    Args:
        a (np.ndarray): H x W or H x W x C image
        b (np.ndarray): image of the same shape

    Returns:
        float: SSIM in [-1, 1]
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("Images of shape " + str(a.shape) + " and " +
                         str(b.shape) + " cannot be compared")
    channel_axis = -1 if a.ndim == 3 else None
    return float(structural_similarity(
        a, b, data_range=1.0, gaussian_weights=True, sigma=1.5,
        use_sample_covariance=False, channel_axis=channel_axis))


def l2_distance(a, b):
    """Root mean squared difference of two images."""
    return float(np.sqrt(np.mean((np.asarray(a, dtype=np.float64) -
                                  np.asarray(b, dtype=np.float64)) ** 2)))


def image_features(images, extractor=None):
    """Features of RGB images (H x W x 3 in [0, 1]) from an extractor.

    Args:
        images (list): images
        extractor (FeatureExtractor): moments extractor by default

    Returns:
        np.ndarray: N x k features
    """
    extractor = extractor or MomentsExtractor()
    batch = torch.from_numpy(np.stack(images).astype(np.float32))
    with torch.no_grad():
        return extractor(batch.permute(0, 3, 1, 2)).double().numpy()


def perceptual_distance(a, b, extractor=None):
    """Mean absolute difference of the features of two images."""
    features = image_features([a, b], extractor)
    return float(np.abs(features[0] - features[1]).mean())


def chamfer_quality(metric, generated, reference, orientation='distance'):
    """Average best-match quality of generated frames against references.

    For every generated frame the best reference frame is picked (smallest
    value for distances, largest for similarities) and the picked values are
    averaged.

    Args:
        metric (callable): metric(generated_frame, reference_frame)
        generated (list): generated frames
        reference (list): reference frames
        orientation (str): 'distance' or 'similarity'

    Returns:
        float: the mean best-match value
    """
    validate_choice(orientation, "orientation", ORIENTATIONS)
    if not generated or not reference:
        raise ValueError("Chamfer quality needs generated and reference " +
                         "frames")
    best = max if orientation == 'similarity' else min
    return float(np.mean([best(metric(frame, ref) for ref in reference)
                          for frame in generated]))


def _moments(embeddings):
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.ndim == 1:
        embeddings = embeddings[:, None]
    if len(embeddings) < 2:
        raise ValueError("At least 2 samples are needed for a covariance, " +
                         "got " + str(len(embeddings)))
    return embeddings.mean(axis=0), \
        np.atleast_2d(np.cov(embeddings, rowvar=False))


def _sqrt_psd(matrix):
    values, vectors = eigh((matrix + matrix.T) / 2.0)
    return (vectors * np.sqrt(np.clip(values, 0.0, None))) @ vectors.T


def frechet_distance(embeddings_a, embeddings_b):
    """Frechet distance between Gaussians fitted to two embedding sets.

    The trace of (S_a S_b)^(1/2) is taken from the eigenvalues of the
    symmetric matrix S_a^(1/2) S_b S_a^(1/2); negative eigenvalues are
    clipped to 0 (with a warning when the clipped mass exceeds 1e-6).

    Args:
        embeddings_a (np.ndarray): N x k embeddings
        embeddings_b (np.ndarray): M x k embeddings

    Returns:
        float: the distance (>= 0)
    """
    mu_a, sigma_a = _moments(embeddings_a)
    mu_b, sigma_b = _moments(embeddings_b)
    root_a = _sqrt_psd(sigma_a)
    product = root_a @ sigma_b @ root_a
    values = eigh((product + product.T) / 2.0, eigvals_only=True)
    clipped = float(-values[values < 0].sum())
    if clipped > 1e-6:
        warnings.warn("FID: clipped negative eigenvalues of total " +
                      "magnitude " + str(clipped))
        logger.warning("FID: clipped negative eigenvalues (%.3g)", clipped)
    trace_root = np.sqrt(np.clip(values, 0.0, None)).sum()
    delta = mu_a - mu_b
    distance = delta @ delta + np.trace(sigma_a) + np.trace(sigma_b) - \
        2.0 * trace_root
    return float(max(distance, 0.0))


def fid(embedder, set_a, set_b):
    """Frechet distance of two image sets under an embedder.

    Args:
        embedder (callable): maps a list of images to N x k embeddings
        set_a (list): images
        set_b (list): images

    Returns:
        float: the distance
    """
    if len(set_a) < 2 or len(set_b) < 2:
        raise ValueError("FID needs at least 2 images per set")
    return frechet_distance(embedder(set_a), embedder(set_b))


def inception_score(classifier, images):
    """Exponential of the mean KL divergence between the class posterior of
    each image and the marginal class distribution.

    Args:
        classifier (callable): maps a list of images to N x K probabilities
        images (list): images

    Returns:
        float: the score (>= 1)
    """
    if len(images) < 2:
        raise ValueError("The Inception Score needs at least 2 images")
    probabilities = np.asarray(classifier(images), dtype=np.float64)
    marginal = probabilities.mean(axis=0, keepdims=True)
    with np.errstate(divide='ignore', invalid='ignore'):
        terms = np.where(probabilities > 0, probabilities *
                         (np.log(probabilities) - np.log(marginal)), 0.0)
    return float(np.exp(terms.sum(axis=1).mean()))


class CentroidClassifier:
    """Soft nearest-centroid classifier over image features.

    Stands in for the Inception network of the Inception Score: classes are
    k-means clusters of real frames (pose phases), and the posterior is a
    softmax of negative squared distances scaled by the mean spread.

    Args:
        centroids (np.ndarray): K x k class centres
        temperature (float): softmax temperature
        extractor (FeatureExtractor): image features
    """

    def __init__(self, centroids, temperature, extractor=None):
        self.centroids = np.atleast_2d(centroids)
        self.temperature = float(temperature) or 1.0
        self.extractor = extractor or MomentsExtractor()

    @classmethod
    def fit(cls, images, n_classes=10, seed=0, extractor=None):
        extractor = extractor or MomentsExtractor()
        features = image_features(images, extractor)
        n_classes = min(n_classes, len(features))
        kmeans = KMeans(n_clusters=n_classes, n_init=10, random_state=seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            kmeans.fit(features)
        temperature = kmeans.inertia_ / len(features)
        return cls(kmeans.cluster_centers_, temperature, extractor)

    def __call__(self, images):
        features = image_features(images, self.extractor)
        logits = -cdist(features, self.centroids, 'sqeuclidean') / \
            self.temperature
        logits -= logits.max(axis=1, keepdims=True)
        weights = np.exp(logits)
        return weights / weights.sum(axis=1, keepdims=True)


def mask_iou_matrix(masks_a, masks_b):
    """IoU of every pair of binary masks (0 where both are empty).

    Args:
        masks_a (np.ndarray): M x H x W
        masks_b (np.ndarray): N x H x W

    Returns:
        np.ndarray: M x N IoU values
    """
    flat_a = np.asarray(masks_a).reshape(len(masks_a), -1).astype(np.float64)
    flat_b = np.asarray(masks_b).reshape(len(masks_b), -1).astype(np.float64)
    if flat_a.shape[1] != flat_b.shape[1]:
        raise ValueError("Masks of different sizes cannot be compared")
    intersection = flat_a @ flat_b.T
    union = flat_a.sum(axis=1)[:, None] + flat_b.sum(axis=1)[None, :] - \
        intersection
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.where(union > 0, intersection / union, 0.0)


def retargeting_iou(seq_a, seq_b):
    """Mean silhouette IoU over all frame pairs of two sequences.

    Args:
        seq_a (GaitSequence): first sequence
        seq_b (GaitSequence): second sequence

    Returns:
        float: value in [0, 1]
    """
    return float(mask_iou_matrix(sequence_masks(seq_a),
                                 sequence_masks(seq_b)).mean())


def write_distance_matrix(matrix, path):
    """Export a distance matrix as CSV with a header row.

    Args:
        matrix (DistanceMatrix): the matrix
        path (str): destination file

    Returns:
        None
    """
    with open(path, 'w', newline='') as handle:
        writer = csv.writer(handle)
        writer.writerow(['clip'] + list(matrix.col_labels))
        for label, row in zip(matrix.row_labels, matrix.values):
            writer.writerow([label] + ['%.10g' % value for value in row])


def read_distance_matrix(path):
    """Read a CSV written by `write_distance_matrix`."""
    with open(path, newline='') as handle:
        rows = list(csv.reader(handle))
    if not rows:
        raise DataError("Empty distance matrix file " + str(path))
    return DistanceMatrix([[float(value) for value in row[1:]]
                           for row in rows[1:]],
                          [row[0] for row in rows[1:]], rows[0][1:])


@dataclass
class MetricsReport:
    """All metrics of one generation run.

    Attributes:
        target_accuracy (dict): embedder name -> percentage
        chamfer (dict): label -> value ('SSIM [CD]' is maximised,
            'Perceptual [CD]' minimised)
        fid (float): FID between generated and target RGB frames
        inception_score (float): IS of the generated RGB frames
        iou_source (float): R(generated, source)
        iou_target (float): R(generated, target original), averaged over
            every reference view of the target
        provenance (dict): config hash, checkpoint and dataset ids
        distance_matrices (dict): name -> DistanceMatrix
    """
    target_accuracy: dict = field(default_factory=dict)
    chamfer: dict = field(default_factory=dict)
    fid: float = None
    inception_score: float = None
    iou_source: float = None
    iou_target: float = None
    provenance: dict = field(default_factory=dict)
    distance_matrices: dict = field(default_factory=dict)

    def to_dict(self):
        content = asdict(self)
        content['distance_matrices'] = {
            name: {'row_labels': matrix.row_labels,
                   'col_labels': matrix.col_labels,
                   'values': matrix.values.tolist()}
            for name, matrix in self.distance_matrices.items()}
        return content


def _spread(frames, limit):
    if len(frames) <= limit:
        return list(frames)
    picks = np.linspace(0, len(frames) - 1, limit).round().astype(int)
    return [frames[index] for index in picks]


def evaluate_generation(generated, refs, target_id, config=None,
                        embedder=None, sources=None, provenance=None):
    """Compute every metric of a set of generated sequences.

    Appearance metrics need rgb_frames on the generated sequences and on
    the target's reference sequences; they are skipped otherwise.

    Args:
        generated (list): generated GaitSequences
        refs (list): real reference GaitSequences of all subjects
        target_id (str): the target subject
        config (EvalConfig): metric settings
        embedder (GaitEmbedder): gait model (from `config` if None)
        sources (list): driving source sequence of every generated one
        provenance (dict): copied into the report

    Returns:
        MetricsReport: the report
    """
    config = config or EvalConfig()
    embedder = embedder or get_gait_embedder(config.embedder, config)
    target_refs = [seq for seq in refs if seq.subject_id == target_id]
    if not target_refs:
        raise DataError("No reference sequence of target " + str(target_id))

    report = MetricsReport(provenance=dict(provenance or {}))
    report.target_accuracy[embedder.name] = target_accuracy(
        embedder, refs, generated, target_id, config.clip_len, config.top_k)
    sorted_refs = _sorted_refs(refs)
    report.distance_matrices[generated[0].name] = clip_distance_matrix(
        embedder, sorted_refs, generated[0], config.clip_len)

    report.iou_target = float(np.mean([
        np.mean([retargeting_iou(gen, ref) for ref in target_refs])
        for gen in generated]))
    if sources is not None:
        report.iou_source = float(np.mean([
            retargeting_iou(gen, source)
            for gen, source in zip(generated, sources)]))

    generated_rgb = [image for seq in generated if seq.rgb_frames
                     for image in seq.rgb_frames]
    target_rgb = [image for seq in target_refs if seq.rgb_frames
                  for image in seq.rgb_frames]
    if generated_rgb and target_rgb:
        gen_sample = _spread(generated_rgb, config.max_chamfer_frames)
        ref_sample = _spread(target_rgb, config.max_chamfer_frames)
        report.chamfer['SSIM [CD]'] = chamfer_quality(
            ssim, gen_sample, ref_sample, 'similarity')
        extractor = MomentsExtractor()
        gen_features = image_features(gen_sample, extractor)
        ref_features = image_features(ref_sample, extractor)
        report.chamfer['Perceptual [CD]'] = float(
            cdist(gen_features, ref_features, 'cityblock').min(axis=1).mean()
            / gen_features.shape[1])
        if len(generated_rgb) >= 2 and len(target_rgb) >= 2:
            report.fid = fid(lambda images: image_features(images, extractor),
                             generated_rgb, target_rgb)
            classifier = CentroidClassifier.fit(target_rgb,
                                                config.is_classes,
                                                config.seed, extractor)
            report.inception_score = inception_score(classifier,
                                                     generated_rgb)
    else:
        logger.info("No RGB frames, appearance metrics skipped")
    return report
