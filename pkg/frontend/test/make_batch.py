"""Generate a small stimulus batch for the browser-flow integration test.

Usage: python3 make_batch.py OUT_DIR

Writes OUT_DIR/corpus/utt00..utt19.wav and a generated batch under
OUT_DIR/batch/ (stimuli.json plus trial audio).
"""

import sys
import warnings
from pathlib import Path

from effortlab import write_wav
from effortlab.stimuli import gen_stimuli
from effortlab.testsignals import make_corpus

TEXTS = [
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


def main(out_dir: str) -> None:
    out = Path(out_dir)
    corpus_dir = out / "corpus"
    corpus_dir.mkdir(parents=True, exist_ok=True)
    for i, w in enumerate(make_corpus(20)):
        write_wav(corpus_dir / f"utt{i:02d}.wav", w)
    manifest = {
        "utterances": [
            {
                "id": f"utt{i:02d}",
                "path": f"utt{i:02d}.wav",
                "text": TEXTS[i],
                "voice": "v1" if i % 2 == 0 else "v2",
            }
            for i in range(20)
        ],
        "systems": ["baseline"],
        "maskers": [
            {
                "label": "ssn",
                "kind": "speech_shaped_noise",
                "snrs_db": [-4],
                "duration_s": 12.0,
            }
        ],
    }
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        gen_stimuli(manifest, out / "batch", seed=5, base_dir=corpus_dir)


if __name__ == "__main__":
    main(sys.argv[1])
