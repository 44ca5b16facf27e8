import numpy as np
import pytest

from gammaspeech import SynthConfig, synth_corpus


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """Small deterministic corpus shared by IO and task tests."""
    root = tmp_path_factory.mktemp("tiny_corpus")
    config = SynthConfig(out_dir=root, words=5, speakers=4, reps=2,
                         severities=[0.0, 0.2, 0.5, 0.8])
    manifest = synth_corpus(config, seed=11)
    return root, manifest


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
