"""Command-line entry point exposing every pipeline stage and experiment recipe.

Exit codes: 0 success, 1 user error (bad flags, unreadable input), 2 internal
error. All outputs are deterministic under a fixed --seed; nothing written
contains timestamps.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import audio_io, nn, render, tasks, vad
from .dsp import spectrogram
from .gammatone import gammatone_weights, gammatonegram

_TASK_NAMES = {"asr": "asr", "sid": "speaker_id", "intel": "intelligibility"}
_MODE_CHOICES = ["SD", "SI", "TD", "TI", "2c", "3c"]


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 (user error) instead of 2 on bad usage."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _severities(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def build_parser() -> _Parser:
    p = _Parser(prog="gammaspeech",
                description="Gammatonegram speech classification toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", parents=[], help="generate the synthetic corpus")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--words", type=int, default=10)
    sp.add_argument("--speakers", type=int, default=8)
    sp.add_argument("--reps", type=int, default=3)
    sp.add_argument("--snr", type=float, default=30.0, help="noise SNR in dB")
    sp.add_argument("--severities", type=_severities, default=None,
                    help="comma-separated per-speaker severities in [0,1]")
    sp.add_argument("--seed", type=int, required=True)
    sp.set_defaults(func=_cmd_synth)

    rp = sub.add_parser("render", help="render one WAV as a PPM image")
    rp.add_argument("--in", dest="in_path", required=True)
    rp.add_argument("--out", required=True)
    rp.add_argument("--spectrogram", action="store_true",
                    help="render the raw spectrogram instead")
    rp.add_argument("--size", type=int, default=render.DEFAULT_EXPORT_SIZE)
    rp.add_argument("--floor-db", type=float, default=render.DEFAULT_FLOOR_DB)
    rp.add_argument("--vad", action="store_true",
                    help="trim silence before rendering")
    rp.set_defaults(func=_cmd_render)

    vp = sub.add_parser("vad", help="print the 0/1 speech mask for a WAV")
    vp.add_argument("--in", dest="in_path", required=True)
    vp.set_defaults(func=_cmd_vad)

    xp = sub.add_parser("extract",
                        help="render every manifest utterance to PPM")
    xp.add_argument("--manifest", required=True)
    xp.add_argument("--out", required=True, help="output directory")
    xp.add_argument("--spectrogram", action="store_true")
    xp.add_argument("--no-vad", action="store_true")
    xp.add_argument("--size", type=int, default=render.DEFAULT_EXPORT_SIZE)
    xp.add_argument("--jobs", type=int, default=1,
                    help="parallel workers; outputs are independent files")
    xp.add_argument("--filterbank-out", default=None,
                    help="also dump the filterbank weights as a text matrix")
    xp.set_defaults(func=_cmd_extract)

    tp = sub.add_parser("train", help="train one model for a task and fold")
    tp.add_argument("--manifest", required=True)
    tp.add_argument("--task", choices=sorted(_TASK_NAMES), required=True)
    tp.add_argument("--mode", choices=_MODE_CHOICES, required=True)
    tp.add_argument("--fold", choices=list(audio_io.SESSIONS), default="B1",
                    help="training session (the other two are the test set)")
    tp.add_argument("--holdout", default=None,
                    help="held-out speaker id (required for --mode SI)")
    tp.add_argument("--pretrain", default=None,
                    help="checkpoint whose feature stack is transferred")
    tp.add_argument("--no-freeze", action="store_true",
                    help="fine-tune transferred conv layers too")
    tp.add_argument("--spectrogram", action="store_true")
    tp.add_argument("--no-vad", action="store_true")
    tp.add_argument("--train-size", type=int, default=64)
    tp.add_argument("--epochs", type=int, default=20)
    tp.add_argument("--lr", type=float, default=0.01)
    tp.add_argument("--momentum", type=float, default=0.9)
    tp.add_argument("--batch", type=int, default=32)
    tp.add_argument("--seed", type=int, required=True)
    tp.add_argument("--out", required=True, help="checkpoint path")
    tp.set_defaults(func=_cmd_train)

    ep = sub.add_parser("eval", help="evaluate a checkpoint on its test split")
    ep.add_argument("--ckpt", required=True)
    ep.add_argument("--manifest", required=True)
    ep.add_argument("--report", default=None, help="also write the text table")
    ep.add_argument("--json", dest="json_path", default=None,
                    help="also write the JSON-lines twin")
    ep.set_defaults(func=_cmd_eval)

    cp = sub.add_parser("cascade",
                        help="evaluate gate + per-class word recognizers")
    cp.add_argument("--gate", required=True, help="intelligibility checkpoint")
    cp.add_argument("--sub", action="append", default=[], metavar="CLASS=CKPT",
                    help="subnet for a gate class; keys low/high (2-class) "
                         "or high/mid/low (3-class severity)")
    cp.add_argument("--manifest", required=True)
    cp.add_argument("--report", default=None)
    cp.add_argument("--json", dest="json_path", default=None)
    cp.set_defaults(func=_cmd_cascade)

    gp = sub.add_parser("gradcheck",
                        help="finite-difference check of the backward pass")
    gp.add_argument("--seed", type=int, default=1)
    gp.add_argument("--eps", type=float, default=1e-4)
    gp.set_defaults(func=_cmd_gradcheck)
    return p


def _cmd_synth(args) -> int:
    cfg = audio_io.SynthConfig(out_dir=args.out, words=args.words,
                               speakers=args.speakers, reps=args.reps,
                               snr_db=args.snr, severities=args.severities)
    manifest = audio_io.synth_corpus(cfg, args.seed)
    print(f"wrote {len(manifest.records)} utterances and manifest.jsonl "
          f"to {args.out}")
    return 0


def _matrix_for(clip, use_spectrogram: bool, pipeline: tasks.PipelineConfig,
                fb=None):
    if use_spectrogram:
        return spectrogram(clip, pipeline.stft).mags
    if fb is None:
        fb = gammatone_weights(pipeline.stft.nfft, clip.sample_rate_hz,
                               pipeline.channels, pipeline.fmin_hz,
                               pipeline.fmax_hz)
    return gammatonegram(spectrogram(clip, pipeline.stft), fb).energies


def _cmd_render(args) -> int:
    pipeline = tasks.PipelineConfig()
    clip = audio_io.load_wav(args.in_path)
    if args.vad:
        mask = vad.vad_mask(clip, pipeline.vad)
        clip = vad.trim_silence(clip, mask, pipeline.vad)
    m = _matrix_for(clip, args.spectrogram, pipeline)
    img = render.render_image(m, args.size, args.size, args.floor_db)
    render.write_ppm(img, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_vad(args) -> int:
    clip = audio_io.load_wav(args.in_path)
    mask = vad.vad_mask(clip, tasks.PipelineConfig().vad)
    print(vad.mask_string(mask))
    return 0


def _cmd_extract(args) -> int:
    manifest = audio_io.load_manifest(args.manifest)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    pipeline = tasks.PipelineConfig()
    fb = gammatone_weights(pipeline.stft.nfft, 16000, pipeline.channels,
                           pipeline.fmin_hz, pipeline.fmax_hz)
    if args.filterbank_out:
        from .gammatone import dump_filterbank
        Path(args.filterbank_out).write_text(dump_filterbank(fb),
                                             encoding="ascii")

    def one(record):
        clip = audio_io.load_wav(record.path)
        if not args.no_vad:
            mask = vad.vad_mask(clip, pipeline.vad)
            clip = vad.trim_silence(clip, mask, pipeline.vad)
        m = _matrix_for(clip, args.spectrogram, pipeline, fb)
        img = render.render_image(m, args.size, args.size, pipeline.floor_db)
        name = Path(record.path).stem + ".ppm"
        render.write_ppm(img, out_dir / name)
        return record.path, name

    records = manifest.records
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(one, records))
    else:
        results = [one(r) for r in records]
    with open(out_dir / "index.jsonl", "w", encoding="utf-8") as fh:
        for path, name in results:
            fh.write(json.dumps({"source": path, "image": name}) + "\n")
    print(f"wrote {len(results)} images to {out_dir}")
    return 0


def _task_config(args) -> tasks.TaskConfig:
    task = _TASK_NAMES[args.task]
    hyper = nn.Hyper(lr=args.lr, momentum=args.momentum, batch=args.batch,
                     epochs=args.epochs, seed=args.seed)
    pretrain = nn.load_checkpoint(args.pretrain) if args.pretrain else None
    use_vad = None
    if task != "intelligibility":
        use_vad = not args.no_vad
    return tasks.TaskConfig(task=task, mode=args.mode, use_vad=use_vad,
                            hyper=hyper, pretrain=pretrain,
                            freeze_features=not args.no_freeze)


def _cmd_train(args) -> int:
    manifest = audio_io.load_manifest(args.manifest)
    cfg = _task_config(args)
    representation = "spectrogram" if args.spectrogram else "gammatonegram"
    pipeline = replace(tasks.PipelineConfig(), train_size=args.train_size)
    cache = tasks.RepresentationCache(pipeline)
    plan = tasks.make_folds(manifest)
    fold = next(f for f in plan.folds if f.train_session == args.fold)
    splits = tasks.split_task(manifest, cfg, fold)
    if cfg.mode == "SI":
        if not args.holdout:
            raise ValueError("--holdout SPEAKER is required for --mode SI")
        wanted = f"holdout={args.holdout}"
        matches = [s for s in splits if s.name == wanted]
        if not matches:
            raise ValueError(f"no speaker {args.holdout!r} in the manifest")
        split = matches[0]
    else:
        split = splits[0]
    fold_index = list(audio_io.SESSIONS).index(args.fold)
    split_index = splits.index(split)
    ckpt = tasks.train_split(cfg, fold, split, representation, cache,
                             derived_seed=[args.seed, fold_index, split_index])
    nn.save_checkpoint(ckpt, args.out)
    print(f"trained {cfg.task}/{cfg.mode} fold {args.fold} "
          f"({len(split.train)} train utterances); saved {args.out}")
    return 0


def _rebuild_split(ckpt: nn.Checkpoint, manifest) -> tuple:
    meta = ckpt.train_meta
    for key in ("task", "mode", "fold", "split", "label_names"):
        if key not in meta:
            raise ValueError(f"checkpoint lacks {key!r} metadata; "
                             f"it was not trained by this toolkit's train")
    cfg = tasks.TaskConfig(task=meta["task"], mode=meta["mode"],
                           use_vad=None if meta["task"] == "intelligibility"
                           else meta["use_vad"],
                           label_override=list(meta["label_names"])
                           if meta["task"] != "intelligibility" else None)
    plan = tasks.make_folds(manifest)
    fold = next(f for f in plan.folds if f.train_session == meta["fold"])
    splits = tasks.split_task(manifest, cfg, fold)
    matches = [s for s in splits if s.name == meta["split"]]
    if not matches:
        raise ValueError(f"manifest has no split {meta['split']!r}")
    return cfg, fold, matches[0], meta


def _emit_report(report: tasks.EvalReport, args) -> None:
    text = tasks.report_text(report)
    sys.stdout.write(text)
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    if args.json_path:
        Path(args.json_path).write_text(tasks.report_jsonl(report),
                                        encoding="utf-8")


def _cmd_eval(args) -> int:
    ckpt = nn.load_checkpoint(args.ckpt)
    manifest = audio_io.load_manifest(args.manifest)
    cfg, fold, split, meta = _rebuild_split(ckpt, manifest)
    size = ckpt.spec.input_shape[0]
    pipeline = replace(tasks.PipelineConfig(), train_size=size)
    cache = tasks.RepresentationCache(pipeline)
    ds = cache.dataset(split.test, split.y_test, split.label_names,
                       cfg.use_vad, meta["representation"])
    report = tasks.evaluate_wrr(ckpt, ds)
    _emit_report(report, args)
    return 0


_SUBNET_KEYS_2 = {"low": "LowIntelligibility", "high": "HighIntelligibility"}
_SUBNET_KEYS_3 = {"high": "HighSeverity", "mid": "MidSeverity",
                  "low": "LowSeverity"}


def _cmd_cascade(args) -> int:
    gate = nn.load_checkpoint(args.gate)
    manifest = audio_io.load_manifest(args.manifest)
    keymap = _SUBNET_KEYS_2 if gate.spec.class_count == 2 else _SUBNET_KEYS_3
    subnets: dict[str, nn.Checkpoint] = {}
    for item in args.sub:
        if "=" not in item:
            raise ValueError(f"--sub expects CLASS=CKPT, got {item!r}")
        key, _, path = item.partition("=")
        if key not in keymap:
            raise ValueError(f"unknown subnet class {key!r}; valid keys: "
                             f"{sorted(keymap)}")
        subnets[keymap[key]] = nn.load_checkpoint(path)
    _, fold, split, meta = _rebuild_split(gate, manifest)
    word_labels = None
    for sub in subnets.values():
        labels = sub.train_meta.get("label_names")
        if word_labels is None:
            word_labels = labels
        elif labels != word_labels:
            raise ValueError("subnets do not share one word label map")
    if word_labels is None:
        raise ValueError("at least one --sub CLASS=CKPT is required")
    size = gate.spec.input_shape[0]
    pipeline = replace(tasks.PipelineConfig(), train_size=size)
    cache = tasks.RepresentationCache(pipeline)
    report = tasks.cascade_evaluate(gate, subnets, split.test, word_labels,
                                    cache, meta["representation"])
    _emit_report(report, args)
    return 0


def _cmd_gradcheck(args) -> int:
    err = nn.grad_check(seed=args.seed, eps=args.eps)
    print(f"{err:.3e}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # invariant violations and bugs
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main_entry() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    main_entry()
