"""Acceptance gate: one check per release criterion, each printing PASS/FAIL.

The PASS/FAIL lines are written outside pytest's capture so they always show
in the run output.
"""

from __future__ import annotations

import json
import time
import warnings

import numpy as np
import pytest

from effortlab.cli import main as cli_main
from effortlab.effort import response_curve
from effortlab.enhance import (
    DEFAULT_IOEC_KNOTS,
    IoecCurve,
    ShaperConfig,
    drc,
    envelope_db,
    spectral_shaping,
)
from effortlab.noisemix import MixRecipe, active_speech_level, mix_at_snr
from effortlab.scoring import (
    QualificationStatus,
    Trial,
    TrialResponse,
    qualify,
    wrr,
)
from effortlab.signal import Waveform
from effortlab.testsignals import make_utterance
from effortlab.tilt import TiltStats, ltas, normalize_tilt, utterance_tilt

FS = 16000


_capsys = None


@pytest.fixture(autouse=True)
def _terminal(capsys):
    global _capsys
    _capsys = capsys
    yield
    _capsys = None


def check(name: str, ok: bool, detail: str = "") -> None:
    tag = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    line = f"[{tag}] {name}{suffix}"
    if _capsys is not None:
        with _capsys.disabled():
            print(line)
    else:
        print(line)
    assert ok, f"{name}{suffix}"


def _rms_db(x):
    return 20.0 * np.log10(np.sqrt(np.mean(np.square(x))) + 1e-12)


def _ar1(pole: float, seed: int, duration_s: float = 2.0) -> Waveform:
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(int(duration_s * FS))
    x = np.empty_like(e)
    x[0] = e[0]
    for n in range(1, len(e)):
        x[n] = pole * x[n - 1] + e[n]
    return Waveform(0.01 * x, FS)


def test_tilt_estimator_accuracy_on_ar1():
    worst_err, worst_time = 0.0, 0.0
    for pole in (0.5, 0.7, 0.9, 0.95, 0.99):
        w = _ar1(pole, seed=int(pole * 100))
        t0 = time.perf_counter()
        measured = utterance_tilt(w, assume_voiced=True)
        elapsed = time.perf_counter() - t0
        worst_err = max(worst_err, abs(measured + pole))
        worst_time = max(worst_time, elapsed)
    check(
        "tilt estimator: |utterance_tilt + pole| <= 0.02 on AR(1), < 1 s/signal",
        worst_err <= 0.02 and worst_time < 1.0,
        f"max err {worst_err:.4f}, max time {worst_time:.3f} s",
    )


def test_normalization_anchors_exact():
    # Published anchor pair [-0.984, -0.926] -> M = -0.955, 3σ = 0.029.
    stats = TiltStats(median=-0.955, sigma=0.029 / 3.0)
    ok = (
        normalize_tilt(stats.median, stats) == 0.0
        and normalize_tilt(stats.lo, stats) == -1.0
        and normalize_tilt(stats.hi, stats) == 1.0
        and normalize_tilt(-0.984, stats) == -1.0
        and normalize_tilt(stats.lo - 0.1, stats) == -1.0
        and normalize_tilt(stats.hi + 0.1, stats) == 1.0
    )
    check("normalization anchors exact at M, M±3σ, clipped beyond", ok)


def test_effort_response_curve(stats):
    w = make_utterance(seed=3)
    in_norm = normalize_tilt(utterance_tilt(w), stats, clip=False)
    biases = list(range(-3, 4))
    t0 = time.perf_counter()
    curve = response_curve(w, biases, stats)
    elapsed = time.perf_counter() - t0
    measured = curve.measured()
    increasing = bool(np.all(np.diff(measured) > 0))
    converged = [
        abs(p.measured_tilt - (in_norm + p.target_bias))
        for p in curve.points
        if p.error is None
    ]
    ok = (
        increasing
        and len(converged) >= 5
        and max(converged) <= 0.25
        and elapsed < 30.0
    )
    check(
        "effort control: 7-point bias sweep strictly increasing, ±0.25 of target, < 30 s",
        ok,
        f"max err {max(converged):.3f}, {len(converged)}/7 converged, {elapsed:.1f} s",
    )


def test_spectral_shaping_fixed_stage_tone_sweep():
    cfg = ShaperConfig(sharpen_strength=0.0, hf_boost_max_db=0.0)

    def rel_gain(freq):
        t = np.arange(2 * FS) / FS
        w = Waveform(0.1 * np.sin(2 * np.pi * freq * t), FS)
        out = spectral_shaping(w, cfg=cfg, normalize=False)
        steady = slice(int(0.3 * FS), int(1.7 * FS))
        return _rms_db(out.samples[steady]) - _rms_db(w.samples[steady])

    g700 = rel_gain(700.0)
    plateau = [float(rel_gain(f) - g700) for f in (1000.0, 2000.0, 4000.0)]
    plateau_ok = all(abs(g - 12.0) <= 0.5 for g in plateau)
    slope = (rel_gain(250.0) - rel_gain(125.0))  # one octave below 500 Hz
    slope_ok = abs(slope - 6.0) <= 0.5
    check(
        "SS fixed stage: +12 dB ±0.5 in 1–4 kHz re 700 Hz; −6 dB/oct ±0.5 below 500 Hz",
        plateau_ok and slope_ok,
        f"plateau {[round(g, 2) for g in plateau]} dB, low slope {slope:.2f} dB/oct",
    )


def test_ltas_shift_on_speech(corpus20, enhanced20):
    base = ltas(corpus20)
    centers = np.asarray(base.frequencies_hz)
    mid = (centers >= 1000.0) & (centers <= 4000.0)
    low = centers < 500.0
    deltas = {}
    ok = True
    for label in ("ss", "ssdrc"):
        curve = ltas(enhanced20[label])
        d = np.asarray(curve.levels_db) - np.asarray(base.levels_db)
        deltas[label] = (float(np.mean(d[mid])), float(np.mean(d[low])))
        ok = ok and deltas[label][0] > 0.0 and deltas[label][1] < 0.0
    check(
        "LTAS on 20 utterances: mean gain > 0 dB in 1–4 kHz and < 0 dB below 500 Hz for SS and SSDRC",
        ok,
        f"ss {deltas['ss'][0]:+.1f}/{deltas['ss'][1]:+.1f} dB, "
        f"ssdrc {deltas['ssdrc'][0]:+.1f}/{deltas['ssdrc'][1]:+.1f} dB",
    )


def test_drc_behavior(corpus20):
    curve = IoecCurve.default()
    steady = slice(FS // 2, -FS // 4)

    # 1. Constant-sine steady-state gain follows the envelope map ±0.1 dB.
    gain_errs = []
    for amp_db in (-45.0, -30.0, -20.0, -8.0):
        t = np.arange(2 * FS) / FS
        w = Waveform(10.0 ** (amp_db / 20.0) * np.sin(2 * np.pi * 500.0 * t), FS)
        env = float(np.median(envelope_db(w)[steady]))
        expected = curve(env) - env
        out = drc(w, curve)
        measured = _rms_db(out.samples[steady]) - _rms_db(w.samples[steady])
        gain_errs.append(abs(measured - expected))
    gains_ok = max(gain_errs) <= 0.1

    # 2. Envelope-dB std on speech reduced by >= 30% (same frames before/after).
    frame, hop = int(0.025 * FS), int(0.010 * FS)

    def frame_levels(x):
        n = 1 + (len(x) - frame) // hop
        return np.array([_rms_db(x[i * hop : i * hop + frame]) for i in range(n)])

    reductions = []
    for w in corpus20:
        levels_in = frame_levels(w.samples)
        active = levels_in > np.max(levels_in) - 30.0
        levels_out = frame_levels(drc(w).samples)
        reductions.append(1.0 - np.std(levels_out[active]) / np.std(levels_in[active]))
    reduction_ok = min(reductions) >= 0.30

    # 3. Identity map through an identity curve.
    w = corpus20[0]
    identity_err = float(np.max(np.abs(drc(w, IoecCurve.identity()).samples - w.samples)))
    identity_ok = identity_err <= 1e-6

    check(
        "DRC: sine gain matches envelope map ±0.1 dB; speech envelope std −30%; identity curve ≤ 1e−6",
        gains_ok and reduction_ok and identity_ok,
        f"max gain err {max(gain_errs):.3f} dB, min reduction {min(reductions):.2f}, "
        f"identity err {identity_err:.1e}",
    )


def test_mixing_snr_and_duration(corpus20, ssn):
    target = corpus20[0]
    errs = []
    duration_ok = True
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for snr in (1.0, -4.0, -9.0, -7.0, -14.0, -21.0):
            result = mix_at_snr(target, ssn, MixRecipe(snr_db=snr))
            measured = active_speech_level(result.padded_target) - _rms_db(
                result.scaled_masker.samples
            )
            errs.append(abs(measured - snr))
            duration_ok = duration_ok and len(result.mixed) == len(target) + FS
    check(
        "mixing: re-measured SNR ±0.1 dB at {+1,−4,−9,−7,−14,−21} dB; duration = target + 1.000 s",
        max(errs) <= 0.1 and duration_ok,
        f"max SNR err {max(errs):.4f} dB",
    )


def test_ssn_fidelity_and_stationarity(corpus30, ssn):
    ref = ltas(corpus30)
    got = ltas([ssn])
    centers = np.asarray(ref.frequencies_hz)
    band = (centers >= 100.0) & (centers <= 7000.0)
    err = np.abs(np.asarray(got.levels_db) - np.asarray(ref.levels_db))[band]
    win = FS // 2
    levels = [
        _rms_db(ssn.samples[i : i + win]) for i in range(0, len(ssn) - win + 1, win)
    ]
    spread = max(levels) - min(levels)
    check(
        "SSN: third-octave LTAS within ±3 dB of corpus over 100–7000 Hz; 0.5 s RMS spread < 1.5 dB",
        float(np.max(err)) <= 3.0 and spread < 1.5,
        f"max LTAS err {np.max(err):.2f} dB, spread {spread:.2f} dB",
    )


def test_wrr_oracle_equivalence():
    def brute_force_lcs(a, b):
        m, n = len(a), len(b)
        table = [[0] * (n + 1) for _ in range(m + 1)]
        for i in range(m):
            for j in range(n):
                if a[i] == b[j]:
                    table[i + 1][j + 1] = table[i][j] + 1
                else:
                    table[i + 1][j + 1] = max(table[i][j + 1], table[i + 1][j])
        return table[m][n]

    rng = np.random.default_rng(7)
    vocab = np.array(
        ["birch", "canoe", "slid", "smooth", "planks", "glue", "sheet", "dark",
         "blue", "rice", "round", "bowls", "salt", "breeze", "sea", "truck"]
    )
    mismatches = 0
    for _ in range(1000):
        ref = list(rng.choice(vocab, size=rng.integers(1, 10)))
        hyp = list(rng.choice(vocab, size=rng.integers(0, 12)))
        expected = brute_force_lcs(ref, hyp) / len(ref)
        if wrr(" ".join(ref), " ".join(hyp)) != expected:
            mismatches += 1
    example = wrr(
        "the birch canoe slid on the smooth planks", "the canoe slid on planks"
    )
    check(
        "WRR: equals brute-force LCS ratio on 1000 random pairs; worked example = 0.6",
        mismatches == 0 and example == 0.6,
        f"{mismatches} mismatches, example {example}",
    )


def test_qualification_boundaries():
    trials = {
        "r": Trial("r", "the birch canoe slid on the smooth planks",
                   is_reference_trial=True),
        "t1": Trial("t1", "rice is often served in round bowls"),
        "t2": Trial("t2", "kick the ball straight and follow through"),
    }

    def q(ref_hyp, t1_hyp, t2_hyp):
        return qualify(
            [
                TrialResponse("r", "l", ref_hyp),
                TrialResponse("t1", "l", t1_hyp),
                TrialResponse("t2", "l", t2_hyp),
            ],
            trials,
        )

    # Reference 0.80 exactly (4/5 content words) is inclusive.
    at_ref = q("birch canoe slid smooth", "rice served bowls", "kick ball")
    below_ref = q("birch canoe slid", "rice served bowls", "kick ball")
    # Test mean exactly 0.10 (1/5 + 0/5 over two trials) is exclusive.
    at_test = q("the birch canoe slid on the smooth planks", "rice", "")
    above_test = q("the birch canoe slid on the smooth planks", "rice round", "")
    ok = (
        at_ref.reference_wrr == 0.80
        and at_ref.status is QualificationStatus.QUALIFIED
        and below_ref.status is QualificationStatus.NOT_QUALIFIED
        and at_test.test_wrr == pytest.approx(0.10)
        and at_test.status is QualificationStatus.NOT_QUALIFIED
        and above_test.status is QualificationStatus.QUALIFIED
    )
    check("qualification: reference 0.80 inclusive, test 0.10 exclusive", ok)


def test_end_to_end_reproducibility(tmp_path, corpus_dir, batch_manifest):
    manifest = dict(batch_manifest)
    manifest["utterances"] = manifest["utterances"][:4]
    manifest_path = tmp_path / "manifest.json"
    manifest_path.write_text(
        json.dumps(
            {
                **manifest,
                "utterances": [
                    {**u, "path": str(corpus_dir / u["path"])}
                    for u in manifest["utterances"]
                ],
            }
        )
    )

    def pipeline(out_dir):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            code = cli_main(
                ["--seed", "5", "gen-stimuli", "--manifest", str(manifest_path),
                 "--out", str(out_dir)]
            )
        assert code == 0
        batch = json.loads((out_dir / "stimuli.json").read_text())
        # Scripted listener: drops every third content word.
        rows = []
        for i, t in enumerate(sorted(batch["trials"], key=lambda t: t["trial_id"])):
            words = t["reference_text"].split()
            transcript = " ".join(w for j, w in enumerate(words) if j % 3 != 2)
            rows.append(
                {"event": "response", "trial_id": t["trial_id"], "listener_id": "l1",
                 "transcript": transcript, "timestamp": float(i)}
            )
        log = out_dir / "responses.jsonl"
        log.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        report = out_dir / "report.csv"
        assert cli_main(
            ["--seed", "5", "score", "--manifest", str(out_dir / "stimuli.json"),
             "--responses", str(log), "--out", str(report)]
        ) == 0
        return out_dir

    a = pipeline(tmp_path / "a")
    b = pipeline(tmp_path / "b")
    names = sorted(p.name for p in a.iterdir())
    identical = names == sorted(p.name for p in b.iterdir()) and all(
        (a / n).read_bytes() == (b / n).read_bytes() for n in names
    )
    check(
        "end to end: enhance → mix → score is byte-reproducible given a seed",
        identical,
        f"{len(names)} artifacts compared",
    )
