"""Command-line surface wiring the toolkit into reproducible batch pipelines."""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from . import effort, enhance, noisemix, scoring, stimuli, tilt
from .errors import EffortLabError
from .signal import read_wav, write_wav

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING_INPUT = 3
EXIT_BAD_MANIFEST = 4
EXIT_FAILURE = 1


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    return int(os.environ.get("EFFORTLAB_SEED", "0"))


def _require(path) -> Path:
    p = Path(path)
    if not p.exists():
        print(f"error: input not found: {p}", file=sys.stderr)
        raise SystemExit(EXIT_MISSING_INPUT)
    return p


def _atomic_text(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8") as f:
        f.write(text)
    os.replace(tmp, path)


def _wav_inputs(path: Path) -> list[Path]:
    if path.is_dir():
        files = sorted(path.glob("*.wav"))
        if not files:
            print(f"error: no WAV files in {path}", file=sys.stderr)
            raise SystemExit(EXIT_MISSING_INPUT)
        return files
    return [path]


def cmd_analyze_tilt(args) -> int:
    files = _wav_inputs(_require(args.input))
    tilts = {}
    for f in files:
        tilts[f.name] = tilt.utterance_tilt(read_wav(f))
    for name, value in tilts.items():
        print(f"{name} {value:.4f}")
    if args.stats:
        stats = tilt.fit_normalizer(list(tilts.values()))
        tilt.write_stats(args.stats, stats)
    return EXIT_OK


def cmd_fit_stats(args) -> int:
    path = _require(args.input)
    values = [float(line.split()[-1]) for line in path.read_text().splitlines() if line.strip()]
    stats = tilt.fit_normalizer(values)
    tilt.write_stats(args.out, stats)
    return EXIT_OK


def cmd_apply_effort(args) -> int:
    w = read_wav(_require(args.input))
    stats = tilt.read_stats(_require(args.stats))
    out = effort.apply_effort(w, effort.EffortTarget(args.bias, stats))
    write_wav(args.out, out)
    return EXIT_OK


def cmd_enhance(args) -> int:
    w = read_wav(_require(args.input))
    if args.method == "ss":
        out = enhance.spectral_shaping(w)
    elif args.method == "ssdrc":
        out = enhance.ssdrc(w)
    elif args.method == "drc":
        out = enhance.drc(w)
    else:
        print(f"error: unknown method {args.method!r}", file=sys.stderr)
        return EXIT_USAGE
    write_wav(args.out, out)
    return EXIT_OK


def cmd_ltas(args) -> int:
    files = _wav_inputs(_require(args.input))
    curve = tilt.ltas([read_wav(f) for f in files])
    lines = ["freq_hz,level_db"]
    lines += [f"{f:g},{l:.4f}" for f, l in zip(curve.frequencies_hz, curve.levels_db)]
    _atomic_text(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_make_ssn(args) -> int:
    files = _wav_inputs(_require(args.reference))
    corpus = [read_wav(f) for f in files]
    ssn = noisemix.make_ssn(
        corpus, lp_order=args.lp_order, seed=_seed(args), duration_s=args.duration,
        sample_rate=corpus[0].sample_rate,
    )
    write_wav(args.out, ssn)
    return EXIT_OK


def cmd_mix(args) -> int:
    target = read_wav(_require(args.input))
    masker = read_wav(_require(args.masker))
    result = noisemix.mix_at_snr(target, masker, noisemix.MixRecipe(snr_db=args.snr))
    write_wav(args.out, result.mixed)
    return EXIT_OK


def cmd_gen_stimuli(args) -> int:
    path = _require(args.manifest)
    try:
        manifest = stimuli.load_manifest(path)
    except (EffortLabError, json.JSONDecodeError) as exc:
        print(f"error: malformed manifest: {exc}", file=sys.stderr)
        return EXIT_BAD_MANIFEST
    result = stimuli.gen_stimuli(manifest, args.out, seed=_seed(args), base_dir=path.parent)
    print(f"wrote {result.n_trials} trials, {result.n_errors} errors -> {result.manifest_path}")
    return EXIT_OK


def cmd_score(args) -> int:
    from .service import trials_from_batch_manifest

    try:
        trials, _ = trials_from_batch_manifest(_require(args.manifest))
    except (KeyError, json.JSONDecodeError) as exc:
        print(f"error: malformed manifest: {exc}", file=sys.stderr)
        return EXIT_BAD_MANIFEST
    responses = scoring.read_responses_jsonl(_require(args.responses))
    by_listener: dict[str, list] = {}
    for r in responses:
        by_listener.setdefault(r.listener_id, []).append(r)
    qualified = [
        r for r in responses
        if scoring.qualify(by_listener[r.listener_id], trials).status
        is scoring.QualificationStatus.QUALIFIED
    ]
    grouping = ("system", "voice", "masker", "snr_db")
    reports = scoring.aggregate(qualified, trials, grouping, seed=_seed(args))
    csv_text = scoring.reports_to_csv(reports, grouping)
    if args.out:
        _atomic_text(args.out, csv_text)
    else:
        print(csv_text, end="")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(_require(args.manifest), args.log, seed=_seed(args),
                     n_reference=args.n_reference, max_test_trials=args.max_test_trials)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="effortlab")
    parser.add_argument("--seed", type=int, default=None,
                        help="run seed (default: $EFFORTLAB_SEED or 0)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze-tilt", help="per-file utterance tilt, optional stats fit")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--stats")
    p.set_defaults(func=cmd_analyze_tilt)

    p = sub.add_parser("fit-stats", help="fit normalizer stats from a list of tilts")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_stats)

    p = sub.add_parser("apply-effort", help="shape a WAV to a tilt bias")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--stats", required=True)
    p.add_argument("--bias", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_apply_effort)

    p = sub.add_parser("enhance", help="SS / DRC / SSDRC post-processing")
    p.add_argument("--method", choices=("ss", "drc", "ssdrc"), required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("ltas", help="third-octave long-term average spectrum")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ltas)

    p = sub.add_parser("make-ssn", help="speech-shaped noise from a reference corpus")
    p.add_argument("--reference", required=True)
    p.add_argument("--lp-order", type=int, default=noisemix.DEFAULT_SSN_LP_ORDER)
    p.add_argument("--duration", type=float, default=30.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_ssn)

    p = sub.add_parser("mix", help="embed a target in a masker at an SNR")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--masker", required=True)
    p.add_argument("--snr", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("gen-stimuli", help="full stimulus cross-product from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_stimuli)

    p = sub.add_parser("score", help="score a response log against a stimulus manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--responses", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("serve", help="run the listening-test HTTP service")
    p.add_argument("--manifest", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--n-reference", type=int, default=10)
    p.add_argument("--max-test-trials", type=int, default=720)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EffortLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
