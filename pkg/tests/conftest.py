import numpy as np
import pytest

from fenec import (
    CentroidSet,
    ClassCovariance,
    ClassState,
    FeatureBatch,
    FeNeC,
    FeNeCLog,
    HyperParams,
)


def make_blobs(centers, n_per, scale, rng, offset=0.0):
    """Gaussian blobs around the given centers; labels follow center order."""
    centers = np.asarray(centers, dtype=np.float64)
    feats, labels = [], []
    for c, mu in enumerate(centers):
        feats.append(rng.normal(mu, scale, size=(n_per, centers.shape[1])) + offset)
        labels.append(np.full(n_per, c, dtype=np.int64))
    return FeatureBatch(np.vstack(feats), np.concatenate(labels))


def inject_model(hyper: HyperParams, entries, n_features, seed=0, log=False):
    """Build a model directly from (precision, centroids) pairs per class."""
    model = FeNeCLog(hyper, seed=seed) if log else FeNeC(hyper, seed=seed)
    model.n_features = n_features
    for class_id, (precision, centroids) in entries.items():
        model._classes[class_id] = ClassState(
            ClassCovariance(class_id, np.asarray(precision, dtype=np.float64), hyper.metric),
            CentroidSet(class_id, np.asarray(centroids, dtype=np.float64)),
        )
    return model


def random_spd(rng, n, jitter=0.5):
    b = rng.normal(size=(n, n))
    return b @ b.T + jitter * np.eye(n)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
