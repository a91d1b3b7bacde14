"""Stimulus batch generation: enumerate the system x masker x SNR cross
product over a set of utterances and write masked WAVs plus a trial manifest."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import enhance, tilt
from .effort import EffortTarget, apply_effort
from .errors import EffortLabError
from .noisemix import MixRecipe, make_ssn, mix_at_snr
from .signal import Waveform, read_wav, write_wav

DEFAULT_SSN_DURATION_S = 30.0


@dataclass
class GenerationResult:
    manifest_path: Path
    n_trials: int
    n_errors: int


def _atomic_write_wav(path: Path, w: Waveform) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    os.close(fd)
    try:
        write_wav(tmp, w)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _masker_offset(trial_id: str, seed: int, span: int) -> int:
    """Deterministic masker start offset derived from the trial id."""
    if span <= 0:
        return 0
    digest = hashlib.sha256(f"{seed}:{trial_id}".encode()).digest()
    return int.from_bytes(digest[:8], "big") % span


def _apply_system(system: str, w: Waveform, stats: Optional[tilt.TiltStats]) -> Waveform:
    if system == "baseline":
        return w
    if system == "ss":
        return enhance.spectral_shaping(w)
    if system == "ssdrc":
        return enhance.ssdrc(w)
    if system.startswith("effort:"):
        if stats is None:
            raise EffortLabError("effort system needs corpus tilt stats")
        bias = float(system.split(":", 1)[1])
        return apply_effort(w, EffortTarget(bias, stats))
    raise EffortLabError(f"unknown system {system!r}")


def load_manifest(path) -> dict:
    with open(path, encoding="utf-8") as f:
        manifest = json.load(f)
    for key in ("utterances", "systems", "maskers"):
        if key not in manifest:
            raise EffortLabError(f"manifest missing required key {key!r}")
    for utt in manifest["utterances"]:
        for key in ("id", "path", "text"):
            if key not in utt:
                raise EffortLabError(f"utterance entry missing {key!r}")
    for masker in manifest["maskers"]:
        for key in ("label", "kind", "snrs_db"):
            if key not in masker:
                raise EffortLabError(f"masker entry missing {key!r}")
    return manifest


def gen_stimuli(manifest: dict, out_dir, seed: int = 0, base_dir=None) -> GenerationResult:
    """Generate one WAV per (utterance, system, masker, SNR) plus clean
    reference trials; rows that fail are reported and skipped."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = Path(base_dir) if base_dir else Path(".")

    utterances = {}
    errors = []
    for utt in manifest["utterances"]:
        try:
            utterances[utt["id"]] = read_wav(base / utt["path"])
        except (OSError, EffortLabError) as exc:
            errors.append({"utterance_id": utt["id"], "stage": "load", "error": str(exc)})

    stats = None
    if any(s.startswith("effort:") for s in manifest["systems"]):
        tilts = []
        for w in utterances.values():
            try:
                tilts.append(tilt.utterance_tilt(w))
            except EffortLabError:
                pass
        stats = tilt.fit_normalizer(tilts)

    maskers = {}
    for spec in manifest["maskers"]:
        label = spec["label"]
        if "path" in spec and spec["path"]:
            maskers[label] = read_wav(base / spec["path"])
        elif spec["kind"] == "speech_shaped_noise":
            reference = list(utterances.values())
            if spec.get("reference_paths"):
                reference = [read_wav(base / p) for p in spec["reference_paths"]]
            if not reference:
                raise EffortLabError(
                    f"masker {label!r} needs at least one readable reference utterance"
                )
            rate = reference[0].sample_rate
            maskers[label] = make_ssn(
                reference,
                lp_order=int(spec.get("lp_order", 20)),
                seed=seed,
                duration_s=float(spec.get("duration_s", DEFAULT_SSN_DURATION_S)),
                sample_rate=rate,
            )
        else:
            raise EffortLabError(f"masker {label!r} has no path and is not SSN")

    trials = []
    processed_cache: dict[tuple, Waveform] = {}
    meta = {u["id"]: u for u in manifest["utterances"]}
    for utt_id, w in utterances.items():
        for system in manifest["systems"]:
            key = (utt_id, system)
            try:
                processed_cache[key] = _apply_system(system, w, stats)
            except EffortLabError as exc:
                errors.append(
                    {"utterance_id": utt_id, "system": system, "stage": "enhance",
                     "error": str(exc)}
                )

    for utt_id in utterances:
        for system in manifest["systems"]:
            processed = processed_cache.get((utt_id, system))
            if processed is None:
                continue
            for masker_spec in manifest["maskers"]:
                label = masker_spec["label"]
                masker = maskers[label]
                for snr in masker_spec["snrs_db"]:
                    trial_id = f"{utt_id}_{system.replace(':', '')}_{label}_{snr:g}"
                    try:
                        recipe = MixRecipe(snr_db=float(snr))
                        need = len(processed) + int(round(1.0 * processed.sample_rate))
                        span = len(masker) - need
                        offset = _masker_offset(trial_id, seed, span)
                        segment = Waveform(
                            masker.samples[offset : offset + need], masker.sample_rate
                        )
                        result = mix_at_snr(processed, segment, recipe)
                        path = out_dir / f"{trial_id}.wav"
                        _atomic_write_wav(path, result.mixed)
                        trials.append(
                            {
                                "trial_id": trial_id,
                                "utterance_id": utt_id,
                                "system": system,
                                "voice": meta[utt_id].get("voice", ""),
                                "masker": label,
                                "snr_db": float(snr),
                                "seed": seed,
                                "reference_text": meta[utt_id]["text"],
                                "audio_path": path.name,
                                "is_reference_trial": False,
                            }
                        )
                    except (EffortLabError, OSError) as exc:
                        errors.append(
                            {"utterance_id": utt_id, "system": system, "masker": label,
                             "snr_db": snr, "stage": "mix", "error": str(exc)}
                        )

    for utt_id, w in utterances.items():
        trial_id = f"{utt_id}_ref"
        path = out_dir / f"{trial_id}.wav"
        _atomic_write_wav(path, w)
        trials.append(
            {
                "trial_id": trial_id,
                "utterance_id": utt_id,
                "system": "reference",
                "voice": meta[utt_id].get("voice", ""),
                "masker": "none",
                "snr_db": 0.0,
                "seed": seed,
                "reference_text": meta[utt_id]["text"],
                "audio_path": path.name,
                "is_reference_trial": True,
            }
        )

    batch = {"seed": seed, "trials": trials, "errors": errors}
    manifest_path = out_dir / "stimuli.json"
    with open(manifest_path, "w", encoding="utf-8") as f:
        json.dump(batch, f, indent=2, sort_keys=True)
    return GenerationResult(manifest_path, len(trials), len(errors))
