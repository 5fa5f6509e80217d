import numpy as np
import pytest

from strataml.data import Dataset
from strataml.operators import DEFAULT_REGISTRY
from strataml.pipeline import Individual, PipelineTree, default_node
from strataml.rng import RngStream


@pytest.fixture
def registry():
    return DEFAULT_REGISTRY


@pytest.fixture
def fig_tree(registry):
    """Scaler feeding a Bernoulli NB, both at registry defaults."""
    return PipelineTree(
        classifier=default_node(registry.get("BernoulliNB")),
        preprocessors=(default_node(registry.get("StandardScaler")),),
    )


def make_individuals(pairs):
    """Evaluated individuals carrying the given (score, length) fitnesses; the
    trees are irrelevant for selection math."""
    from strataml.pipeline import Status

    tree = PipelineTree(classifier=default_node(DEFAULT_REGISTRY.get("GaussianNB")))
    return [
        Individual(tree, (float(score), int(length)), status=Status.EVALUATED)
        for score, length in pairs
    ]


@pytest.fixture
def two_blob_dataset():
    """Two well-separated Gaussian blobs on one informative feature."""
    gen = RngStream(424, "blobs").generator()
    n = 60
    x = np.concatenate([gen.normal(-5.0, 0.5, n // 2), gen.normal(5.0, 0.5, n // 2)])
    extra = gen.normal(0.0, 1.0, n)
    y = np.array([0] * (n // 2) + [1] * (n // 2))
    order = gen.permutation(n)
    return Dataset(np.column_stack([x, extra])[order], y[order], name="two-blobs")
