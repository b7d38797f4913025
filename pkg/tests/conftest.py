import numpy as np
import pytest

from sepkit.audio_io import build_synth_corpus

SPEAKER_SPECS = [
    {"id": "harm220", "kind": "harmonic", "f0": 220.0},
    {"id": "noise3k5k", "kind": "filtered_noise", "band": [3000.0, 5000.0]},
]


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    """Small deterministic 2-speaker corpus shared across test modules."""
    root = tmp_path_factory.mktemp("corpus")
    manifest = build_synth_corpus(root, SPEAKER_SPECS,
                                  utterances_per_speaker=3, duration=1.2,
                                  seed=17)
    return root, manifest


@pytest.fixture
def rng():
    return np.random.default_rng(0)
