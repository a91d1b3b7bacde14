"""Command-line pipeline: exit codes, file outputs, seeding, determinism."""

from __future__ import annotations

import json
import warnings

import numpy as np
import pytest

from effortlab.cli import (
    EXIT_BAD_MANIFEST,
    EXIT_FAILURE,
    EXIT_MISSING_INPUT,
    EXIT_OK,
    main,
)
from effortlab.signal import Waveform, read_wav, write_wav
from effortlab.tilt import read_stats

FS = 16000


def run(*argv):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return main(list(argv))


class TestExitCodes:
    def test_unknown_command_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            run("frobnicate")
        assert exc.value.code == 2

    def test_missing_required_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            run("enhance", "--in", "x.wav", "--out", "y.wav")  # no --method
        assert exc.value.code == 2

    def test_missing_input_file(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run("analyze-tilt", "--in", str(tmp_path / "nope.wav"))
        assert exc.value.code == EXIT_MISSING_INPUT

    def test_empty_input_directory(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            run("analyze-tilt", "--in", str(tmp_path))
        assert exc.value.code == EXIT_MISSING_INPUT

    def test_bad_manifest(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"systems": []}))
        code = run("gen-stimuli", "--manifest", str(path), "--out", str(tmp_path / "o"))
        assert code == EXIT_BAD_MANIFEST

    def test_domain_error_is_failure(self, tmp_path):
        rng = np.random.default_rng(0)
        noise = tmp_path / "noise.wav"
        write_wav(noise, Waveform(0.1 * rng.standard_normal(FS), FS))
        # Unvoiced audio has no measurable tilt.
        code = run("analyze-tilt", "--in", str(noise))
        assert code == EXIT_FAILURE


class TestAnalysisCommands:
    def test_analyze_tilt_prints_per_file(self, corpus_dir, capsys):
        assert run("analyze-tilt", "--in", str(corpus_dir)) == EXIT_OK
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 20
        name, value = lines[0].split()
        assert name == "utt00.wav"
        assert -2.0 < float(value) < 0.0

    def test_analyze_tilt_writes_stats(self, corpus_dir, tmp_path):
        stats_path = tmp_path / "stats.txt"
        assert run("analyze-tilt", "--in", str(corpus_dir), "--stats", str(stats_path)) == EXIT_OK
        stats = read_stats(stats_path)
        assert stats.n_utterances == 20
        assert stats.sigma > 0

    def test_fit_stats_from_tilt_list(self, tmp_path):
        tilts = tmp_path / "tilts.txt"
        tilts.write_text("a.wav -0.95\nb.wav -0.93\nc.wav -0.91\n")
        out = tmp_path / "stats.txt"
        assert run("fit-stats", "--in", str(tilts), "--out", str(out)) == EXIT_OK
        stats = read_stats(out)
        assert stats.median == pytest.approx(-0.93)

    def test_ltas_csv(self, corpus_dir, tmp_path):
        out = tmp_path / "ltas.csv"
        assert run("ltas", "--in", str(corpus_dir), "--out", str(out)) == EXIT_OK
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "freq_hz,level_db"
        freqs = [float(l.split(",")[0]) for l in lines[1:]]
        assert freqs == sorted(freqs)


class TestProcessingCommands:
    def test_apply_effort_pipeline(self, corpus_dir, tmp_path):
        stats_path = tmp_path / "stats.txt"
        run("analyze-tilt", "--in", str(corpus_dir), "--stats", str(stats_path))
        out = tmp_path / "shaped.wav"
        code = run(
            "apply-effort", "--in", str(corpus_dir / "utt00.wav"),
            "--stats", str(stats_path), "--bias", "1.0", "--out", str(out),
        )
        assert code == EXIT_OK
        assert len(read_wav(out)) == len(read_wav(corpus_dir / "utt00.wav"))

    @pytest.mark.parametrize("method", ["ss", "drc", "ssdrc"])
    def test_enhance_methods(self, corpus_dir, tmp_path, method):
        out = tmp_path / f"{method}.wav"
        code = run(
            "enhance", "--method", method,
            "--in", str(corpus_dir / "utt00.wav"), "--out", str(out),
        )
        assert code == EXIT_OK
        assert len(read_wav(out)) == len(read_wav(corpus_dir / "utt00.wav"))

    def test_make_ssn_seed_flag_and_env(self, corpus_dir, tmp_path, monkeypatch):
        a, b, c = (tmp_path / n for n in ("a.wav", "b.wav", "c.wav"))
        run("--seed", "9", "make-ssn", "--reference", str(corpus_dir),
            "--duration", "2.0", "--out", str(a))
        monkeypatch.setenv("EFFORTLAB_SEED", "9")
        run("make-ssn", "--reference", str(corpus_dir), "--duration", "2.0",
            "--out", str(b))
        monkeypatch.setenv("EFFORTLAB_SEED", "10")
        run("make-ssn", "--reference", str(corpus_dir), "--duration", "2.0",
            "--out", str(c))
        assert a.read_bytes() == b.read_bytes()
        assert a.read_bytes() != c.read_bytes()

    def test_mix_command(self, corpus_dir, tmp_path):
        ssn = tmp_path / "ssn.wav"
        run("make-ssn", "--reference", str(corpus_dir), "--duration", "5.0",
            "--out", str(ssn))
        out = tmp_path / "mix.wav"
        code = run("mix", "--snr", "-4", "--in", str(corpus_dir / "utt00.wav"),
                   "--masker", str(ssn), "--out", str(out))
        assert code == EXIT_OK
        mixed = read_wav(out)
        assert len(mixed) == len(read_wav(corpus_dir / "utt00.wav")) + mixed.sample_rate


class TestBatchCommands:
    def test_gen_stimuli_summary(self, corpus_dir, batch_manifest, tmp_path, capsys):
        # Utterance paths resolve relative to the manifest's directory.
        manifest = dict(batch_manifest)
        manifest["utterances"] = [
            {**u, "path": str(corpus_dir / u["path"])}
            for u in batch_manifest["utterances"]
        ]
        manifest_path = tmp_path / "manifest.json"
        manifest_path.write_text(json.dumps(manifest))
        code = run("--seed", "5", "gen-stimuli", "--manifest", str(manifest_path),
                   "--out", str(tmp_path / "out"))
        assert code == EXIT_OK
        assert "wrote 60 trials, 0 errors" in capsys.readouterr().out
        assert (tmp_path / "out" / "stimuli.json").exists()

    def test_score_end_to_end(self, batch_manifest_path, trial_texts, tmp_path, capsys):
        # A perfect listener: correct transcripts for every trial.
        log = tmp_path / "responses.jsonl"
        rows = [
            {"event": "response", "trial_id": tid, "listener_id": "l1",
             "transcript": text, "audio_device": "headphones", "timestamp": float(i)}
            for i, (tid, text) in enumerate(sorted(trial_texts.items()))
        ]
        log.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        out = tmp_path / "report.csv"
        code = run("score", "--manifest", str(batch_manifest_path),
                   "--responses", str(log), "--out", str(out))
        assert code == EXIT_OK
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "system,voice,masker,snr_db,n,mean_wrr,ci95"
        # 2 systems x 2 voices x 1 masker x 1 SNR = 4 groups, all perfect.
        assert len(lines) == 5
        for line in lines[1:]:
            assert line.endswith(",1.0000,0.0000")

    def test_score_excludes_unqualified_listener(self, batch_manifest_path, trial_texts, tmp_path):
        rows = []
        for i, (tid, text) in enumerate(sorted(trial_texts.items())):
            rows.append({"event": "response", "trial_id": tid, "listener_id": "good",
                         "transcript": text, "timestamp": float(i)})
            # The bad listener types nothing and fails qualification.
            rows.append({"event": "response", "trial_id": tid, "listener_id": "bad",
                         "transcript": "", "timestamp": float(i)})
        log = tmp_path / "responses.jsonl"
        log.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        out = tmp_path / "report.csv"
        assert run("score", "--manifest", str(batch_manifest_path),
                   "--responses", str(log), "--out", str(out)) == EXIT_OK
        for line in out.read_text().strip().splitlines()[1:]:
            # Only the good listener's perfect scores remain.
            assert line.endswith(",1.0000,0.0000")

    def test_score_bad_manifest(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"not_trials": []}))
        log = tmp_path / "log.jsonl"
        log.write_text("")
        code = run("score", "--manifest", str(bad), "--responses", str(log))
        assert code == EXIT_BAD_MANIFEST
