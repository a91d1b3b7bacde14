"""Shared fixtures: synthetic corpora and a generated stimulus batch.

Everything is seeded, so fixture contents are identical across runs.
"""

from __future__ import annotations

import json
import warnings

import pytest

from effortlab import fit_normalizer, make_ssn, utterance_tilt, write_wav
from effortlab.stimuli import gen_stimuli
from effortlab.testsignals import make_corpus

REFERENCE_TEXTS = [
    "the birch canoe slid on the smooth planks",
    "glue the sheet to the dark blue background",
    "it is easy to tell the depth of a well",
    "these days a chicken leg is a rare dish",
    "rice is often served in round bowls",
    "the juice of lemons makes fine punch",
    "the box was thrown beside the parked truck",
    "the hogs were fed chopped corn and garbage",
    "four hours of steady work faced us",
    "a large size in stockings is hard to sell",
    "the boy was there when the sun rose",
    "a rod is used to catch pink salmon",
    "the source of the huge river is the clear spring",
    "kick the ball straight and follow through",
    "help the woman get back to her feet",
    "a pot of tea helps to pass the evening",
    "smoky fires lack flame and heat",
    "the soft cushion broke the man's fall",
    "the salt breeze came across from the sea",
    "the girl at the booth sold fifty bonds",
]


@pytest.fixture(scope="session")
def corpus20():
    return make_corpus(20)


@pytest.fixture(scope="session")
def corpus30():
    return make_corpus(30)


@pytest.fixture(scope="session")
def corpus_tilts(corpus20):
    return [utterance_tilt(w) for w in corpus20]


@pytest.fixture(scope="session")
def stats(corpus_tilts):
    return fit_normalizer(corpus_tilts)


@pytest.fixture(scope="session")
def enhanced20(corpus20):
    """SS and SSDRC outputs for the 20-utterance corpus, computed once."""
    from effortlab.enhance import spectral_shaping, ssdrc

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return {
            "ss": [spectral_shaping(w) for w in corpus20],
            "ssdrc": [ssdrc(w) for w in corpus20],
        }


@pytest.fixture(scope="session")
def ssn(corpus30):
    return make_ssn(corpus30, duration_s=10.0, seed=7)


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory, corpus20):
    """Directory of WAV files for CLI and batch-generation tests."""
    d = tmp_path_factory.mktemp("corpus")
    for i, w in enumerate(corpus20):
        write_wav(d / f"utt{i:02d}.wav", w)
    return d


@pytest.fixture(scope="session")
def batch_manifest(corpus_dir):
    return {
        "utterances": [
            {
                "id": f"utt{i:02d}",
                "path": f"utt{i:02d}.wav",
                "text": REFERENCE_TEXTS[i],
                "voice": "v1" if i % 2 == 0 else "v2",
            }
            for i in range(20)
        ],
        "systems": ["baseline", "ssdrc"],
        "maskers": [
            {
                "label": "ssn",
                "kind": "speech_shaped_noise",
                "snrs_db": [-4],
                "duration_s": 12.0,
            }
        ],
    }


@pytest.fixture(scope="session")
def batch_dir(tmp_path_factory, corpus_dir, batch_manifest):
    """A generated stimulus batch shared by service and scoring tests."""
    out = tmp_path_factory.mktemp("batch")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        gen_stimuli(batch_manifest, out, seed=5, base_dir=corpus_dir)
    return out


@pytest.fixture(scope="session")
def batch_manifest_path(batch_dir):
    path = batch_dir / "stimuli.json"
    assert path.exists()
    return path


@pytest.fixture()
def trial_texts(batch_manifest_path):
    data = json.loads(batch_manifest_path.read_text())
    return {t["trial_id"]: t["reference_text"] for t in data["trials"]}
