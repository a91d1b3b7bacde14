"""Transcript scoring: word recognition rate, listener qualification, and
bootstrap-aggregated condition reports."""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ScoringError

# Function words excluded from WRR scoring.
STOP_WORDS = frozenset(
    """
    a an the and or but nor so yet for of to in on at by with from as into onto
    upon about above below under over between among through during before after
    behind beside besides against along across around near off out up down
    i me my mine you your yours he him his she her hers it its we us our ours
    they them their theirs this that these those who whom whose which what
    is am are was were be been being do does did done have has had having
    will would shall should can could may might must ought
    not no nor never none
    there here when where why how then than too very just also only even still
    if because while although though unless until since whether once
    each every either neither both all any some few many much more most other
    another such own same s t don now
    """.split()
)

NUMBER_WORDS = {
    "0": "zero", "1": "one", "2": "two", "3": "three", "4": "four",
    "5": "five", "6": "six", "7": "seven", "8": "eight", "9": "nine",
    "10": "ten", "11": "eleven", "12": "twelve", "13": "thirteen",
    "14": "fourteen", "15": "fifteen", "16": "sixteen", "17": "seventeen",
    "18": "eighteen", "19": "nineteen", "20": "twenty", "30": "thirty",
    "40": "forty", "50": "fifty", "60": "sixty", "70": "seventy",
    "80": "eighty", "90": "ninety", "100": "hundred", "1000": "thousand",
}

QUALIFY_REFERENCE_MIN = 0.80  # inclusive
QUALIFY_TEST_MIN = 0.10  # exclusive
BOOTSTRAP_RESAMPLES = 1000


class QualificationStatus(Enum):
    QUALIFIED = "qualified"
    NOT_QUALIFIED = "not_qualified"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class Trial:
    trial_id: str
    reference_text: str
    system: str = ""
    voice: str = ""
    masker: str = ""
    snr_db: float = 0.0
    is_reference_trial: bool = False
    utterance_id: str = ""

    def __post_init__(self):
        if not self.reference_text:
            raise ScoringError(f"trial {self.trial_id!r} has empty reference text")


@dataclass(frozen=True)
class TrialResponse:
    trial_id: str
    listener_id: str
    transcript: str
    audio_device: str = "headphones"
    timestamp: float = 0.0


@dataclass(frozen=True)
class Qualification:
    status: QualificationStatus
    reference_wrr: Optional[float]
    test_wrr: Optional[float]


@dataclass(frozen=True)
class ScoreReport:
    group: tuple
    n: int
    mean_wrr: float
    ci95_half_width: float


def normalize_transcript(text: str) -> list[str]:
    """Lowercase, strip punctuation, tokenize, expand digit tokens."""
    cleaned = re.sub(r"[^a-z0-9\s']+", " ", text.lower())
    tokens = []
    for tok in cleaned.split():
        tok = tok.strip("'")
        if not tok:
            continue
        if tok.isdigit():
            if tok in NUMBER_WORDS:
                tokens.append(NUMBER_WORDS[tok])
            else:
                tokens.extend(NUMBER_WORDS[d] for d in tok)
        else:
            tokens.append(tok)
    return tokens


def content_words(tokens: Iterable[str]) -> list[str]:
    return [t for t in tokens if t not in STOP_WORDS]


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, 1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def wrr(reference_text: str, transcript: str) -> float:
    """Fraction of reference content words recognized correctly and in order."""
    ref = content_words(normalize_transcript(reference_text))
    if not ref:
        raise ScoringError("reference has no content words")
    hyp = content_words(normalize_transcript(transcript))
    return _lcs_length(ref, hyp) / len(ref)


def qualify(
    responses: Iterable[TrialResponse], trials: dict[str, Trial]
) -> Qualification:
    """Listener passes with mean reference WRR >= 0.80 and test WRR > 0.10."""
    ref_scores, test_scores = [], []
    for resp in responses:
        trial = trials.get(resp.trial_id)
        if trial is None:
            continue
        score = wrr(trial.reference_text, resp.transcript)
        (ref_scores if trial.is_reference_trial else test_scores).append(score)
    if not ref_scores or not test_scores:
        return Qualification(
            QualificationStatus.INDETERMINATE,
            float(np.mean(ref_scores)) if ref_scores else None,
            float(np.mean(test_scores)) if test_scores else None,
        )
    ref_wrr = float(np.mean(ref_scores))
    test_wrr = float(np.mean(test_scores))
    ok = ref_wrr >= QUALIFY_REFERENCE_MIN and test_wrr > QUALIFY_TEST_MIN
    return Qualification(
        QualificationStatus.QUALIFIED if ok else QualificationStatus.NOT_QUALIFIED,
        ref_wrr,
        test_wrr,
    )


def aggregate(
    responses: Iterable[TrialResponse],
    trials: dict[str, Trial],
    grouping: Sequence[str] = ("system", "voice", "masker", "snr_db"),
    seed: int = 0,
    n_resamples: int = BOOTSTRAP_RESAMPLES,
) -> list[ScoreReport]:
    """Mean WRR per condition with bootstrap 95% confidence half-widths.

    Callers are responsible for passing only qualified listeners' responses;
    reference trials are always excluded.
    """
    groups: dict[tuple, list[float]] = {}
    for resp in responses:
        trial = trials.get(resp.trial_id)
        if trial is None or trial.is_reference_trial:
            continue
        key = tuple(getattr(trial, g) for g in grouping)
        groups.setdefault(key, []).append(wrr(trial.reference_text, resp.transcript))
    rng = np.random.default_rng(seed)
    reports = []
    for key in sorted(groups, key=str):
        scores = np.array(groups[key])
        means = rng.choice(scores, size=(n_resamples, len(scores)), replace=True).mean(axis=1)
        lo, hi = np.percentile(means, [2.5, 97.5])
        reports.append(
            ScoreReport(
                group=key,
                n=len(scores),
                mean_wrr=float(np.mean(scores)),
                ci95_half_width=float((hi - lo) / 2.0),
            )
        )
    return reports


def reports_to_csv(reports: Sequence[ScoreReport], grouping: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([*grouping, "n", "mean_wrr", "ci95"])
    for r in reports:
        writer.writerow([*r.group, r.n, f"{r.mean_wrr:.4f}", f"{r.ci95_half_width:.4f}"])
    return buf.getvalue()


def read_responses_jsonl(path) -> list[TrialResponse]:
    responses = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            # Service logs mix session and response events; only the latter
            # carry transcripts to score.
            if obj.get("event", "response") != "response":
                continue
            responses.append(
                TrialResponse(
                    trial_id=obj["trial_id"],
                    listener_id=obj["listener_id"],
                    transcript=obj.get("transcript", ""),
                    audio_device=obj.get("audio_device", "headphones"),
                    timestamp=obj.get("timestamp", 0.0),
                )
            )
    return responses
