"""Command-line front end: enhance / evaluate / synth / make-reference.

Exit code 0 on success; on failure a single machine-readable JSON error
line goes to stderr and the exit code is nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from maskbeam.audio import StftConfig, Waveform, load_wav, save_wav
from maskbeam.nnet import load_weights
from maskbeam.pipeline import (
    METHODS,
    EnhanceOptions,
    aggregate_records,
    enhance,
    evaluate,
    write_mask,
    write_report,
)
from maskbeam.reference import build_reference
from maskbeam.simulate import NOISE_KINDS, measured_snr_db, synth_scene


def _add_stft_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--fft", type=int, default=1024, help="FFT size in samples")
    p.add_argument("--hop", type=int, default=512, help="hop size in samples")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="maskbeam",
        description="Multichannel speech enhancement: mask fusion, spatial EM, MVDR.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enhance", help="enhance a multichannel WAV file")
    p.add_argument("--in", dest="input", required=True, help="noisy multichannel WAV")
    p.add_argument("--method", required=True,
                   help=f"one of: {', '.join(METHODS)}")
    p.add_argument("--out", required=True, help="enhanced WAV path")
    p.add_argument("--weights", help="MNW1 weight container (lstm paths)")
    p.add_argument("--clean", help="clean image WAV (oracle-iam only)")
    p.add_argument("--mask-out", help="write the driving mask (MSK1)")
    p.add_argument("--report", help="write a JSON-lines report")
    p.add_argument("--ref", help="reference WAV for report metrics")
    p.add_argument("--ref-channel", type=int, default=0)
    p.add_argument("--iters", type=int, default=16, help="EM iterations")
    p.add_argument("--hold", type=int, default=11, help="held EM iterations")
    p.add_argument("--post-floor-db", type=float, default=0.0,
                   help="max postfilter suppression in dB; 0 = raw mask")
    _add_stft_flags(p)

    p = sub.add_parser("evaluate", help="score enhanced audio against a reference")
    p.add_argument("--est", required=True, help="estimate WAV or directory")
    p.add_argument("--ref", required=True, help="reference WAV or directory")
    p.add_argument("--noisy", help="noisy WAV or directory (for deltas)")
    p.add_argument("--out", help="JSON-lines report path (default stdout)")

    p = sub.add_parser("synth", help="generate a synthetic array scene")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--channels", type=int, default=6)
    p.add_argument("--snr", type=float, default=0.0)
    p.add_argument("--duration", type=float, default=3.0, help="seconds")
    p.add_argument("--noise", choices=NOISE_KINDS, default="diffuse")
    p.add_argument("--delays", help="comma-separated per-channel sample delays")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("make-reference", help="build a supervised reference signal")
    p.add_argument("--array", required=True, help="multichannel array WAV")
    p.add_argument("--close", required=True, help="close-talk mic WAV")
    p.add_argument("--out", required=True, help="reference WAV path")
    _add_stft_flags(p)

    return parser


def _cmd_enhance(args) -> int:
    cfg = StftConfig(fft_size=args.fft, hop=args.hop)
    noisy = load_wav(args.input)
    opts = EnhanceOptions(
        ref_channel=args.ref_channel,
        iters=args.iters,
        hold_iters=args.hold,
        post_floor_db=args.post_floor_db,
        weights=load_weights(args.weights) if args.weights else None,
        clean=load_wav(args.clean) if args.clean else None,
    )
    result = enhance(noisy, args.method, opts, cfg)
    save_wav(result.audio, args.out)
    if args.mask_out:
        write_mask(result.mask, args.mask_out)
    if args.report:
        records = []
        if args.ref:
            ref = load_wav(args.ref)
            n = result.audio.num_samples
            ref_trim = Waveform(ref.samples[args.ref_channel:args.ref_channel + 1, :n],
                                ref.sample_rate)
            noisy_trim = Waveform(noisy.samples[args.ref_channel:args.ref_channel + 1, :n],
                                  noisy.sample_rate)
            records.append(evaluate(result.audio, ref_trim, noisy_trim,
                                    utt=Path(args.input).stem, method=args.method,
                                    config=result.config))
        else:
            records.append({"utt": Path(args.input).stem, "method": args.method,
                            "config": result.config})
        write_report(records, args.report)
    return 0


def _pair_files(est, ref, noisy):
    est, ref = Path(est), Path(ref)
    if est.is_dir() != ref.is_dir():
        raise ValueError("--est and --ref must both be files or both directories")
    if not est.is_dir():
        return [(est, ref, Path(noisy) if noisy else None)]
    triples = []
    for est_file in sorted(est.glob("*.wav")):
        ref_file = ref / est_file.name
        if not ref_file.exists():
            raise ValueError(f"no reference for '{est_file.name}' in {ref}")
        noisy_file = Path(noisy) / est_file.name if noisy else None
        if noisy_file is not None and not noisy_file.exists():
            raise ValueError(f"no noisy file for '{est_file.name}' in {noisy}")
        triples.append((est_file, ref_file, noisy_file))
    if not triples:
        raise ValueError(f"no WAV files found in {est}")
    return triples


def _trim_to(w, n):
    return Waveform(w.samples[:1, :n], w.sample_rate)


def _cmd_evaluate(args) -> int:
    records = []
    for est_file, ref_file, noisy_file in _pair_files(args.est, args.ref, args.noisy):
        est = load_wav(est_file)
        ref = load_wav(ref_file)
        noisy = load_wav(noisy_file) if noisy_file else None
        n = min(est.num_samples, ref.num_samples)
        record = evaluate(_trim_to(est, n), _trim_to(ref, n),
                          _trim_to(noisy, n) if noisy else None,
                          utt=est_file.stem)
        records.append(record)
    if len(records) > 1:
        records.append(aggregate_records(records))
    if args.out:
        write_report(records, args.out)
    else:
        for record in records:
            print(json.dumps(record, sort_keys=True))
    return 0


def _cmd_synth(args) -> int:
    delays = None
    if args.delays:
        delays = np.array([float(v) for v in args.delays.split(",")])
    scene = synth_scene(seed=args.seed, channels=args.channels, delays=delays,
                        snr_db=args.snr, duration_s=args.duration,
                        noise_kind=args.noise)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_wav(scene.noisy, out / "noisy.wav")
    save_wav(scene.clean_image, out / "clean.wav")
    meta = {
        "seed": scene.seed,
        "channels": scene.noisy.channels,
        "delays": scene.delays.tolist(),
        "snr_db": scene.snr_db,
        "measured_snr_db": measured_snr_db(scene),
        "noise_kind": scene.noise_kind,
        "sample_rate": scene.noisy.sample_rate,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return 0


def _cmd_make_reference(args) -> int:
    cfg = StftConfig(fft_size=args.fft, hop=args.hop)
    array = load_wav(args.array)
    close = load_wav(args.close)
    ref = build_reference(array, close, cfg)
    save_wav(ref, args.out)
    return 0


_COMMANDS = {
    "enhance": _cmd_enhance,
    "evaluate": _cmd_evaluate,
    "synth": _cmd_synth,
    "make-reference": _cmd_make_reference,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except Exception as err:  # noqa: BLE001 - single reporting point for the CLI
        print(json.dumps({"error": str(err), "command": args.command}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
