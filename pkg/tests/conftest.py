import numpy as np
import pytest

from dbr.corpus import default_corpus

CORPUS = default_corpus()


def random_halfplane(rng, n, rmin=0.2, rmax=6.0):
    """Points in C+ with moduli log-uniform in [rmin, rmax] and arguments in (-1.3, 1.3)."""
    r = np.exp(rng.uniform(np.log(rmin), np.log(rmax), n))
    t = rng.uniform(-1.3, 1.3, n)
    return r * np.exp(1j * t)


def random_disk(rng, n, rmax=0.95):
    return rmax * np.sqrt(rng.uniform(size=n)) * np.exp(2j * np.pi * rng.uniform(size=n))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=sorted(CORPUS))
def corpus_item(request):
    return request.param, CORPUS[request.param]
