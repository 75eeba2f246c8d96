import numpy as np
import pytest

from gazecontrol import features, oracle, scene


@pytest.fixture(scope="session")
def specs_2d():
    return scene.enumerate_situations_2d()


@pytest.fixture(scope="session")
def specs_3d():
    return scene.enumerate_situations_3d()


@pytest.fixture(scope="session")
def timeline_2d(specs_2d):
    return scene.compile_timeline(specs_2d)


@pytest.fixture(scope="session")
def timeline_3d(specs_3d):
    return scene.compile_timeline(specs_3d)


@pytest.fixture(scope="session")
def corpus_2d_small(timeline_2d):
    """Small deterministic product-oracle corpus shared across tests."""
    personas = oracle.make_default_personas(3, seed=11, deterministic=True)
    return oracle.synth_corpus(timeline_2d, personas, m=24, step=24)


@pytest.fixture(scope="session")
def tiny_dataset(timeline_2d):
    """A few hundred examples; fast to train against."""
    personas = oracle.make_default_personas(1, seed=3, deterministic=True)
    return oracle.synth_corpus(timeline_2d, personas, m=6, step=40)
