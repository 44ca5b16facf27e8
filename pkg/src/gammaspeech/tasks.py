"""Experiment harness: session folds, task splits, training runs, reports.

Three tasks share one pipeline (optional VAD trim, time-frequency
representation, fixed-size render, CNN):

* asr            -- word labels; SD trains on one session for all speakers,
                    SI leaves each test speaker out of training entirely.
* speaker_id     -- speaker labels; TD shares words across train/test, TI
                    tests only on the held-out `cw` word group.
* intelligibility -- 2- or 3-class severity bands; always without VAD, since
                    in-word pauses are part of the signal being classified.

The cascade recognizer routes each utterance through an intelligibility gate
(non-VAD representation) to a per-class word recognizer (VAD representation).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .audio_io import CorpusManifest, UtteranceRecord, load_wav, SESSIONS
from .dsp import StftConfig, spectrogram
from .gammatone import (DEFAULT_CHANNELS, DEFAULT_FMAX_HZ, DEFAULT_FMIN_HZ,
                        gammatone_weights, gammatonegram)
from .nn import (Checkpoint, Hyper, gammanet_s, init_network, predict,
                 predict_batch, train, transfer_head)
from .render import render_image
from .vad import VadConfig, trim_silence, vad_mask

REPRESENTATIONS = ("gammatonegram", "spectrogram")

SEVERITY_CLASSES_3 = ("HighSeverity", "MidSeverity", "LowSeverity")
SEVERITY_CLASSES_2 = ("LowIntelligibility", "HighIntelligibility")

_MODES = {"asr": ("SD", "SI"), "speaker_id": ("TD", "TI"),
          "intelligibility": ("2c", "3c")}


@dataclass(frozen=True)
class Fold:
    train_session: str
    test_sessions: tuple[str, str]


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple[Fold, ...]


@dataclass(frozen=True)
class PipelineConfig:
    stft: StftConfig = StftConfig()
    vad: VadConfig = VadConfig()
    channels: int = DEFAULT_CHANNELS
    fmin_hz: float = DEFAULT_FMIN_HZ
    fmax_hz: float = DEFAULT_FMAX_HZ
    train_size: int = 64
    floor_db: float = -80.0


@dataclass
class TaskConfig:
    task: str
    mode: str
    use_vad: bool | None = None
    hyper: Hyper = field(default_factory=Hyper)
    pretrain: Checkpoint | None = None
    freeze_features: bool = True
    label_override: list[str] | None = None

    def __post_init__(self):
        if self.task not in _MODES:
            raise ValueError(f"unknown task {self.task!r}, "
                             f"expected one of {sorted(_MODES)}")
        if self.mode not in _MODES[self.task]:
            raise ValueError(f"mode {self.mode!r} invalid for {self.task}; "
                             f"valid modes: {_MODES[self.task]}")
        if self.task == "intelligibility":
            if self.use_vad:
                raise ValueError("intelligibility runs without VAD")
            self.use_vad = False
        elif self.use_vad is None:
            self.use_vad = True

    @property
    def n_classes_intel(self) -> int:
        return 2 if self.mode == "2c" else 3


@dataclass
class TaskDataset:
    records: list[UtteranceRecord]
    images: np.ndarray            # N x h x w x 3 float32 in [0, 1]
    labels: np.ndarray            # N ints
    label_names: list[str]


@dataclass
class Split:
    name: str
    train: list[UtteranceRecord]
    test: list[UtteranceRecord]
    y_train: np.ndarray
    y_test: np.ndarray
    label_names: list[str]


@dataclass
class EvalReport:
    per_speaker: dict[str, float]     # accuracy percent
    mean: float
    confusion: np.ndarray             # class_count x class_count counts
    n_test: int
    label_names: list[str]
    gate_accuracy: float | None = None


def make_folds(manifest: CorpusManifest) -> FoldPlan:
    """The three rotations with one training session held apart per fold."""
    present = set(manifest.sessions)
    for s in SESSIONS:
        if s not in present:
            raise ValueError(f"manifest is missing session {s}")
    folds = tuple(
        Fold(train_session=s,
             test_sessions=tuple(t for t in SESSIONS if t != s))
        for s in SESSIONS)
    return FoldPlan(folds=folds)


def label_intelligibility(pct: int, n_classes: int) -> str:
    """Deterministic severity band for an intelligibility percentage."""
    if not 0 <= pct <= 100:
        raise ValueError(f"intelligibility {pct} outside 0-100")
    if n_classes == 3:
        if pct <= 37:
            return "HighSeverity"
        if pct <= 62:
            return "MidSeverity"
        return "LowSeverity"
    if n_classes == 2:
        return "LowIntelligibility" if pct <= 62 else "HighIntelligibility"
    raise ValueError(f"n_classes must be 2 or 3, got {n_classes}")


class RepresentationCache:
    """Lazily computed CNN input images, shared across folds and tasks."""

    def __init__(self, pipeline: PipelineConfig = PipelineConfig()):
        self.pipeline = pipeline
        self.filterbank = gammatone_weights(
            pipeline.stft.nfft, 16000, pipeline.channels,
            pipeline.fmin_hz, pipeline.fmax_hz)
        self._images: dict[tuple, np.ndarray] = {}

    def matrix(self, path: str, use_vad: bool,
               representation: str) -> np.ndarray:
        """Channels-x-frames magnitude matrix for one utterance."""
        clip = load_wav(path)
        if clip.sample_rate_hz != self.filterbank.sample_rate_hz:
            raise ValueError(
                f"{path}: sample rate {clip.sample_rate_hz} != "
                f"{self.filterbank.sample_rate_hz}")
        if use_vad:
            mask = vad_mask(clip, self.pipeline.vad)
            clip = trim_silence(clip, mask, self.pipeline.vad)
        spec = spectrogram(clip, self.pipeline.stft)
        if representation == "gammatonegram":
            return gammatonegram(spec, self.filterbank).energies
        if representation == "spectrogram":
            return spec.mags
        raise ValueError(f"unknown representation {representation!r}")

    def image(self, path: str, use_vad: bool,
              representation: str) -> np.ndarray:
        key = (path, use_vad, representation)
        if key not in self._images:
            size = self.pipeline.train_size
            img = render_image(self.matrix(path, use_vad, representation),
                               size, size, self.pipeline.floor_db)
            self._images[key] = img.pixels.astype(np.float32) / 255.0
        return self._images[key]

    def dataset(self, records: list[UtteranceRecord], labels: np.ndarray,
                label_names: list[str], use_vad: bool,
                representation: str) -> TaskDataset:
        images = np.stack([self.image(r.path, use_vad, representation)
                           for r in records])
        return TaskDataset(records=list(records), images=images,
                           labels=np.asarray(labels), label_names=label_names)


def _word_labels(manifest: CorpusManifest,
                 cfg: TaskConfig) -> list[str]:
    return list(cfg.label_override) if cfg.label_override else manifest.words


def _to_indices(records, label_names: list[str], key) -> np.ndarray:
    index = {name: i for i, name in enumerate(label_names)}
    try:
        return np.array([index[key(r)] for r in records], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"label {exc} missing from label map") from exc


def split_task(manifest: CorpusManifest, cfg: TaskConfig,
               fold: Fold) -> list[Split]:
    """Train/test record splits for one fold.

    Returns one split for SD/TD/TI/intelligibility; SI returns one split per
    held-out speaker.
    """
    records = manifest.records
    in_train = [r for r in records if r.session == fold.train_session]
    in_test = [r for r in records if r.session in fold.test_sessions]

    def build(name, train, test, label_names, key) -> Split:
        if not train or not test:
            raise ValueError(
                f"split {name!r} is empty: {len(train)} train / "
                f"{len(test)} test records")
        return Split(name=name, train=train, test=test,
                     y_train=_to_indices(train, label_names, key),
                     y_test=_to_indices(test, label_names, key),
                     label_names=label_names)

    if cfg.task == "asr":
        words = _word_labels(manifest, cfg)
        key = lambda r: r.word_label
        if cfg.mode == "SD":
            return [build("SD", in_train, in_test, words, key)]
        splits = []
        for spk in manifest.speakers:
            splits.append(build(
                f"holdout={spk}",
                [r for r in in_train if r.speaker_id != spk],
                [r for r in in_test if r.speaker_id == spk],
                words, key))
        return splits

    if cfg.task == "speaker_id":
        speakers = (list(cfg.label_override) if cfg.label_override
                    else manifest.speakers)
        key = lambda r: r.speaker_id
        if cfg.mode == "TD":
            return [build("TD", in_train, in_test, speakers, key)]
        return [build("TI",
                      [r for r in in_train if r.word_group != "cw"],
                      [r for r in in_test if r.word_group == "cw"],
                      speakers, key)]

    n = cfg.n_classes_intel
    names = list(SEVERITY_CLASSES_2 if n == 2 else SEVERITY_CLASSES_3)
    key = lambda r: label_intelligibility(r.intelligibility_pct, n)
    return [build(cfg.mode, in_train, in_test, names, key)]


def evaluate_wrr(ckpt: Checkpoint, ds: TaskDataset) -> EvalReport:
    """Per-utterance argmax accuracy, reported per speaker plus a mean row."""
    if len(ds.records) == 0:
        raise ValueError("empty test set")
    if ckpt.spec.class_count != len(ds.label_names):
        raise ValueError(
            f"checkpoint has {ckpt.spec.class_count} classes, "
            f"test set has {len(ds.label_names)}")
    preds = predict_batch(ckpt, ds.images)
    c = len(ds.label_names)
    confusion = np.zeros((c, c), dtype=np.int64)
    np.add.at(confusion, (ds.labels, preds), 1)
    per_speaker: dict[str, float] = {}
    speakers = sorted({r.speaker_id for r in ds.records})
    spk_arr = np.array([r.speaker_id for r in ds.records])
    for spk in speakers:
        sel = spk_arr == spk
        per_speaker[spk] = float(
            100.0 * (preds[sel] == ds.labels[sel]).mean())
    mean = float(np.mean(list(per_speaker.values())))
    return EvalReport(per_speaker=per_speaker, mean=mean,
                      confusion=confusion, n_test=len(ds.records),
                      label_names=ds.label_names)


def _merge_reports(reports: list[EvalReport]) -> EvalReport:
    by_speaker: dict[str, list[float]] = {}
    for rep in reports:
        for spk, acc in rep.per_speaker.items():
            by_speaker.setdefault(spk, []).append(acc)
    per_speaker = {spk: float(np.mean(v))
                   for spk, v in sorted(by_speaker.items())}
    confusion = sum(rep.confusion for rep in reports)
    gate_accs = [rep.gate_accuracy for rep in reports
                 if rep.gate_accuracy is not None]
    return EvalReport(
        per_speaker=per_speaker,
        mean=float(np.mean(list(per_speaker.values()))),
        confusion=confusion,
        n_test=sum(rep.n_test for rep in reports),
        label_names=reports[0].label_names,
        gate_accuracy=float(np.mean(gate_accs)) if gate_accs else None)


def _task_meta(cfg: TaskConfig, fold: Fold, split: Split,
               representation: str) -> dict:
    return {"task": cfg.task, "mode": cfg.mode, "use_vad": cfg.use_vad,
            "representation": representation,
            "fold": fold.train_session, "split": split.name,
            "label_names": split.label_names}


def train_split(cfg: TaskConfig, fold: Fold, split: Split,
                representation: str, cache: RepresentationCache,
                derived_seed) -> Checkpoint:
    """Train one model for one split, from scratch or from cfg.pretrain."""
    n_classes = len(split.label_names)
    if cfg.pretrain is not None:
        ckpt = transfer_head(cfg.pretrain, n_classes, seed=derived_seed)
        freeze = tuple(name for name, layer, _ in ckpt.spec.param_layers()
                       if layer.type == "conv") if cfg.freeze_features else ()
    else:
        spec = gammanet_s(n_classes, cache.pipeline.train_size)
        ckpt = init_network(spec, seed=derived_seed)
        freeze = ()
    ckpt.train_meta.update(_task_meta(cfg, fold, split, representation))
    train_ds = cache.dataset(split.train, split.y_train, split.label_names,
                             cfg.use_vad, representation)
    hyper = replace(cfg.hyper, seed=derived_seed)
    ckpt, _ = train(ckpt, train_ds.images, train_ds.labels, hyper, freeze)
    return ckpt


def run_task(manifest: CorpusManifest, cfg: TaskConfig,
             representation: str = "gammatonegram",
             cache: RepresentationCache | None = None,
             ) -> tuple[dict[str, Checkpoint], EvalReport]:
    """Train and evaluate cfg over the three session folds.

    Returns the per-split checkpoints keyed by "session" or "session/split"
    and the fold-averaged report (per-speaker accuracies averaged across
    folds, mean = unweighted speaker average).
    """
    if representation not in REPRESENTATIONS:
        raise ValueError(f"unknown representation {representation!r}")
    if cache is None:
        cache = RepresentationCache()
    checkpoints: dict[str, Checkpoint] = {}
    reports = []
    for fi, fold in enumerate(make_folds(manifest).folds):
        splits = split_task(manifest, cfg, fold)
        for si, split in enumerate(splits):
            derived_seed = [cfg.hyper.seed, fi, si]
            ckpt = train_split(cfg, fold, split, representation, cache,
                               derived_seed)
            key = fold.train_session if len(splits) == 1 \
                else f"{fold.train_session}/{split.name}"
            checkpoints[key] = ckpt
            test_ds = cache.dataset(split.test, split.y_test,
                                    split.label_names, cfg.use_vad,
                                    representation)
            reports.append(evaluate_wrr(ckpt, test_ds))
    return checkpoints, _merge_reports(reports)


def cascade_evaluate(gate_ckpt: Checkpoint,
                     subnets: dict[str, Checkpoint],
                     records: list[UtteranceRecord],
                     word_labels: list[str],
                     cache: RepresentationCache,
                     representation: str = "gammatonegram",
                     subnet_use_vad: bool = True) -> EvalReport:
    """Route each utterance through the gate, then the selected recognizer.

    The gate always consumes the non-VAD representation; the word networks
    consume the VAD-trimmed one (unless subnet_use_vad is False). The report
    carries the word-level WRR plus the gate's own accuracy.
    """
    gate_classes = list(gate_ckpt.train_meta.get(
        "label_names",
        SEVERITY_CLASSES_2 if gate_ckpt.spec.class_count == 2
        else SEVERITY_CLASSES_3))
    missing = [c for c in gate_classes if c not in subnets]
    if missing:
        raise ValueError(f"no subnet for gate classes {missing}")
    for cls, sub in subnets.items():
        if sub.spec.class_count != len(word_labels):
            raise ValueError(
                f"subnet {cls!r} has {sub.spec.class_count} classes, "
                f"expected {len(word_labels)}")
    word_index = {w: i for i, w in enumerate(word_labels)}
    n_gate = len(gate_classes)
    c = len(word_labels)
    confusion = np.zeros((c, c), dtype=np.int64)
    per_spk: dict[str, list[bool]] = {}
    gate_hits = 0
    for r in records:
        x_gate = cache.image(r.path, False, representation)
        gate_pred = gate_classes[predict(gate_ckpt, x_gate)[0]]
        if gate_pred == label_intelligibility(r.intelligibility_pct, n_gate):
            gate_hits += 1
        x_word = cache.image(r.path, subnet_use_vad, representation)
        word_pred = predict(subnets[gate_pred], x_word)[0]
        truth = word_index[r.word_label]
        confusion[truth, word_pred] += 1
        per_spk.setdefault(r.speaker_id, []).append(word_pred == truth)
    per_speaker = {spk: float(100.0 * np.mean(v))
                   for spk, v in sorted(per_spk.items())}
    return EvalReport(
        per_speaker=per_speaker,
        mean=float(np.mean(list(per_speaker.values()))),
        confusion=confusion, n_test=len(records), label_names=word_labels,
        gate_accuracy=float(100.0 * gate_hits / len(records)))


def compare_representations(manifest: CorpusManifest, cfg: TaskConfig,
                            cache: RepresentationCache | None = None,
                            ) -> tuple[dict[str, float], str]:
    """Run the same task once per representation; emit a two-row table."""
    if cache is None:
        cache = RepresentationCache()
    means = {}
    for rep in REPRESENTATIONS:
        _, report = run_task(manifest, cfg, rep, cache)
        means[rep] = report.mean
    lines = [f"{rep}\t{means[rep]:.2f}" for rep in REPRESENTATIONS]
    return means, "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Report serialization: text table and JSON-lines twin, columns
# (speaker, accuracy), Mean row last.
# ---------------------------------------------------------------------------

def report_text(report: EvalReport) -> str:
    lines = [f"{spk}\t{acc:.2f}" for spk, acc in
             sorted(report.per_speaker.items())]
    lines.append(f"Mean\t{report.mean:.2f}")
    if report.gate_accuracy is not None:
        lines.append(f"GateAccuracy\t{report.gate_accuracy:.2f}")
    return "\n".join(lines) + "\n"


def report_jsonl(report: EvalReport) -> str:
    rows = [{"speaker": spk, "accuracy": acc}
            for spk, acc in sorted(report.per_speaker.items())]
    rows.append({"speaker": "Mean", "accuracy": report.mean})
    if report.gate_accuracy is not None:
        rows.append({"speaker": "GateAccuracy",
                     "accuracy": report.gate_accuracy})
    return "".join(json.dumps(r) + "\n" for r in rows)
