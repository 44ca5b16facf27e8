"""Waveform and corpus-manifest IO plus the synthetic isolated-word corpus.

Only mono 16-bit PCM WAV at a fixed sample rate is accepted; anything else is
rejected rather than converted, so the DSP chain always sees exactly the bytes
that were written.
"""

from __future__ import annotations

import json
import math
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SESSIONS = ("B1", "B2", "B3")
WORD_GROUPS = ("digit", "command", "alphabet", "cw")

_DIGIT_POOL = ["zero", "one", "two", "three", "four", "five", "six", "seven",
               "eight", "nine"]
_COMMAND_POOL = ["up", "down", "left", "right", "stop", "go", "open", "close",
                 "on", "off", "yes", "no"]
_ALPHABET_POOL = ["alpha", "bravo", "charlie", "delta", "echo", "foxtrot",
                  "golf", "hotel"]


class WavFormatError(ValueError):
    """Raised when a WAV file is not mono 16-bit PCM or has a bad header."""


class ManifestError(ValueError):
    """Raised when a corpus manifest violates the record schema."""


@dataclass
class AudioClip:
    """Mono waveform in [-1, 1] with its sample rate."""

    samples: np.ndarray
    sample_rate_hz: int = 16000

    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


@dataclass(frozen=True)
class UtteranceRecord:
    path: str
    speaker_id: str
    word_label: str
    session: str
    word_group: str
    intelligibility_pct: int


@dataclass
class CorpusManifest:
    records: list[UtteranceRecord] = field(default_factory=list)

    @property
    def words(self) -> list[str]:
        return sorted({r.word_label for r in self.records})

    @property
    def speakers(self) -> list[str]:
        return sorted({r.speaker_id for r in self.records})

    @property
    def sessions(self) -> list[str]:
        return sorted({r.session for r in self.records})


def load_wav(path: str | Path) -> AudioClip:
    """Read a mono 16-bit PCM WAV file, scaling samples by 1/32768.

    Raises FileNotFoundError for a missing file and WavFormatError (with a
    distinct message) for non-mono, non-16-bit, or malformed input.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such WAV file: {path}")
    try:
        with wave.open(str(path), "rb") as wf:
            n_channels = wf.getnchannels()
            samp_width = wf.getsampwidth()
            rate = wf.getframerate()
            n_frames = wf.getnframes()
            if n_channels != 1:
                raise WavFormatError(
                    f"{path}: expected mono, got {n_channels} channels")
            if samp_width != 2:
                raise WavFormatError(
                    f"{path}: expected 16-bit PCM, got {8 * samp_width}-bit")
            raw = wf.readframes(n_frames)
    except (wave.Error, EOFError, RuntimeError) as exc:
        # the stdlib chunk reader surfaces truncated containers as
        # EOFError/RuntimeError
        raise WavFormatError(f"{path}: malformed WAV header ({exc})") from exc
    pcm = np.frombuffer(raw, dtype="<i2")
    return AudioClip(samples=pcm.astype(np.float64) / 32768.0,
                     sample_rate_hz=rate)


def write_wav(path: str | Path, clip: AudioClip) -> None:
    """Write a clip as mono 16-bit little-endian PCM.

    Quantization is round-to-nearest of 32768*x clipped to the int16 range,
    the exact inverse of the loader's 1/32768 scaling up to half a step.
    """
    x = np.clip(np.asarray(clip.samples, dtype=np.float64), -1.0, 1.0)
    pcm = np.clip(np.floor(x * 32768.0 + 0.5), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(clip.sample_rate_hz)
        wf.writeframes(pcm.tobytes())


_MANIFEST_FIELDS = ("path", "speaker_id", "word_label", "session",
                    "word_group", "intelligibility_pct")


def load_manifest(path: str | Path) -> CorpusManifest:
    """Parse a JSON-lines manifest, one utterance record per line.

    Relative record paths are resolved against the manifest's directory.
    """
    path = Path(path)
    base = path.parent
    records: list[UtteranceRecord] = []
    seen_paths: set[str] = set()
    speaker_pct: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: bad JSON ({exc})") from exc
            missing = [k for k in _MANIFEST_FIELDS if k not in row]
            if missing:
                raise ManifestError(
                    f"{path}:{lineno}: missing fields {missing}")
            if row["session"] not in SESSIONS:
                raise ManifestError(
                    f"{path}:{lineno}: unknown session {row['session']!r}, "
                    f"expected one of {SESSIONS}")
            if row["word_group"] not in WORD_GROUPS:
                raise ManifestError(
                    f"{path}:{lineno}: unknown word_group {row['word_group']!r}")
            pct = int(row["intelligibility_pct"])
            if not 0 <= pct <= 100:
                raise ManifestError(
                    f"{path}:{lineno}: intelligibility_pct {pct} outside 0-100")
            rec_path = row["path"]
            if rec_path in seen_paths:
                raise ManifestError(
                    f"{path}:{lineno}: duplicate path {rec_path!r}")
            seen_paths.add(rec_path)
            spk = row["speaker_id"]
            if spk in speaker_pct and speaker_pct[spk] != pct:
                raise ManifestError(
                    f"{path}:{lineno}: speaker {spk} has conflicting "
                    f"intelligibility {pct} vs {speaker_pct[spk]}")
            speaker_pct[spk] = pct
            resolved = rec_path if Path(rec_path).is_absolute() \
                else str(base / rec_path)
            records.append(UtteranceRecord(
                path=resolved, speaker_id=spk, word_label=row["word_label"],
                session=row["session"], word_group=row["word_group"],
                intelligibility_pct=pct))
    return CorpusManifest(records=records)


def save_manifest(path: str | Path, manifest: CorpusManifest) -> None:
    """Write a manifest as JSON lines, paths relative to the manifest dir."""
    path = Path(path)
    base = path.parent
    with open(path, "w", encoding="utf-8") as fh:
        for r in manifest.records:
            p = Path(r.path)
            try:
                rel = str(p.relative_to(base))
            except ValueError:
                rel = str(p)
            row = {"path": rel, "speaker_id": r.speaker_id,
                   "word_label": r.word_label, "session": r.session,
                   "word_group": r.word_group,
                   "intelligibility_pct": r.intelligibility_pct}
            fh.write(json.dumps(row) + "\n")


# ---------------------------------------------------------------------------
# Synthetic corpus
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FormantSegment:
    """One voiced segment: two sinusoidal formants with linear glides."""

    f1_start: float
    f1_end: float
    f2_start: float
    f2_end: float
    duration_s: float


@dataclass(frozen=True)
class WordTemplate:
    label: str
    group: str
    segments: tuple[FormantSegment, ...]


@dataclass(frozen=True)
class SpeakerProfile:
    speaker_id: str
    formant_scale: float   # multiplies every formant frequency
    tilt: float            # amplitude of the second formant relative to base
    severity: float        # 0 = clean, 1 = maximally disordered

    @property
    def intelligibility_pct(self) -> int:
        return int(math.floor(100.0 * (1.0 - self.severity) + 0.5))


@dataclass
class UtteranceMeta:
    """Generation bookkeeping used by tests of the severity model."""

    inserted_silences: int
    duration_scales: list[float]
    freq_scales: list[float]


@dataclass
class SynthConfig:
    out_dir: str | Path = "."
    words: int = 10
    speakers: int = 8
    reps: int = 3
    snr_db: float = 30.0
    severities: list[float] | None = None
    sample_rate_hz: int = 16000


# Word-group assignment pattern, cycled over the word index.
_GROUP_CYCLE = ("digit", "command", "command", "alphabet", "cw")

_F1_RANGE = (250.0, 750.0)
_F2_RANGE = (950.0, 2300.0)
_SEG_DUR_RANGE = (0.08, 0.16)
_GLIDE_RANGE = (0.8, 1.25)
_EDGE_PAD_S = 0.08          # canonical leading/trailing silence
_INTER_SEG_GAP_S = 0.012    # canonical tiny gap between segments
_AMP_F1 = 0.35
_AMP_F2 = 0.25


def _pause_duration_range(severity: float) -> tuple[float, float]:
    # inserted pauses lengthen with severity, mirroring how disordered
    # speech blocks longer as motor control degrades
    return 0.03 + 0.10 * severity, 0.10 + 0.20 * severity


def _next_label(group: str, counters: dict[str, int]) -> str:
    n = counters.get(group, 0)
    counters[group] = n + 1
    if group == "digit":
        pool = _DIGIT_POOL
    elif group == "command":
        pool = _COMMAND_POOL
    elif group == "alphabet":
        pool = _ALPHABET_POOL
    else:
        return f"cw{n + 1:02d}"
    return pool[n] if n < len(pool) else f"{group}{n + 1:02d}"


def build_vocabulary(n_words: int, seed: int) -> list[WordTemplate]:
    """Deterministic word templates; the same for every speaker and session."""
    rng = np.random.default_rng([seed, 0])
    counters: dict[str, int] = {}
    vocab = []
    for w in range(n_words):
        group = _GROUP_CYCLE[w % len(_GROUP_CYCLE)]
        label = _next_label(group, counters)
        n_seg = int(rng.integers(2, 5))
        segs = []
        for _ in range(n_seg):
            f1s = rng.uniform(*_F1_RANGE)
            f1e = f1s * rng.uniform(*_GLIDE_RANGE)
            f2s = rng.uniform(*_F2_RANGE)
            f2e = f2s * rng.uniform(*_GLIDE_RANGE)
            dur = rng.uniform(*_SEG_DUR_RANGE)
            segs.append(FormantSegment(f1s, f1e, f2s, f2e, dur))
        vocab.append(WordTemplate(label=label, group=group,
                                  segments=tuple(segs)))
    return vocab


def build_speakers(n_speakers: int, severities: list[float] | None,
                   seed: int) -> list[SpeakerProfile]:
    """Deterministic speaker profiles; severity defaults to an even 0-0.9 spread."""
    if severities is None:
        severities = [0.0] if n_speakers == 1 else \
            list(np.linspace(0.0, 0.9, n_speakers))
    if len(severities) != n_speakers:
        raise ValueError(
            f"got {len(severities)} severities for {n_speakers} speakers")
    rng = np.random.default_rng([seed, 1])
    profiles = []
    for i, sev in enumerate(severities):
        if not 0.0 <= sev <= 1.0:
            raise ValueError(f"severity {sev} outside [0, 1]")
        scale = rng.uniform(0.85, 1.15)
        tilt = rng.uniform(0.3, 1.0)
        profiles.append(SpeakerProfile(
            speaker_id=f"SPK{i + 1:02d}", formant_scale=scale, tilt=tilt,
            severity=float(sev)))
    return profiles


def _formant_pair(f_start: float, f_end: float, n: int, sr: int) -> np.ndarray:
    # Linear glide: instantaneous frequency f(t) = fs + (fe - fs) * t / T,
    # integrated to phase.
    t = np.arange(n) / sr
    dur = n / sr
    phase = 2.0 * np.pi * (f_start * t + (f_end - f_start) * t * t / (2.0 * dur))
    return np.sin(phase)


def _envelope(n: int, sr: int) -> np.ndarray:
    ramp = min(int(0.010 * sr), n // 2)
    env = np.ones(n)
    if ramp > 0:
        edge = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
        env[:ramp] = edge
        env[-ramp:] = edge[::-1]
    return env


def synth_utterance(word: WordTemplate, speaker: SpeakerProfile,
                    rng: np.random.Generator,
                    sample_rate_hz: int = 16000,
                    ) -> tuple[np.ndarray, UtteranceMeta]:
    """Render one utterance of `word` by `speaker`, without additive noise.

    Severity s jitters segment durations by up to +-40%*s and formant
    frequencies by up to +-10%*s, and inserts a pause between consecutive
    segments with probability s. At s = 0 the output is the canonical word.
    """
    sr = sample_rate_hz
    sev = speaker.severity
    meta = UtteranceMeta(inserted_silences=0, duration_scales=[],
                         freq_scales=[])
    pieces = [np.zeros(int(_EDGE_PAD_S * sr))]
    for i, seg in enumerate(word.segments):
        dur_scale = 1.0 + 0.4 * sev * rng.uniform(-1.0, 1.0)
        freq_scale = 1.0 + 0.1 * sev * rng.uniform(-1.0, 1.0)
        insert_pause = rng.uniform() < sev if i > 0 else False
        meta.duration_scales.append(dur_scale)
        meta.freq_scales.append(freq_scale)
        if i > 0:
            gap = _INTER_SEG_GAP_S
            if insert_pause:
                gap += rng.uniform(*_pause_duration_range(sev))
                meta.inserted_silences += 1
            pieces.append(np.zeros(int(gap * sr)))
        n = max(int(round(seg.duration_s * dur_scale * sr)), int(0.02 * sr))
        k = speaker.formant_scale * freq_scale
        wave_ = (_AMP_F1 * _formant_pair(seg.f1_start * k, seg.f1_end * k, n, sr)
                 + _AMP_F2 * speaker.tilt
                 * _formant_pair(seg.f2_start * k, seg.f2_end * k, n, sr))
        pieces.append(wave_ * _envelope(n, sr))
    pieces.append(np.zeros(int(_EDGE_PAD_S * sr)))
    return np.concatenate(pieces), meta


def _add_noise(x: np.ndarray, snr_db: float,
               rng: np.random.Generator) -> np.ndarray:
    power = float(np.mean(x * x))
    if power <= 0.0:
        return x
    noise_std = math.sqrt(power / (10.0 ** (snr_db / 10.0)))
    return x + rng.normal(0.0, noise_std, size=len(x))


def synth_corpus(config: SynthConfig, seed: int) -> CorpusManifest:
    """Generate WAV files plus a manifest.jsonl under config.out_dir.

    Deterministic given the seed: each file is rendered from its own child
    generator derived from (seed, file index), so any parallel generation
    order would produce identical bytes.
    """
    if config.words <= 0 or config.speakers <= 0 or config.reps <= 0:
        raise ValueError("words, speakers, and reps must all be positive")
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not out_dir.is_dir():
        raise OSError(f"not a writable directory: {out_dir}")
    vocab = build_vocabulary(config.words, seed)
    speakers = build_speakers(config.speakers, config.severities, seed)
    records = []
    file_index = 0
    for spk in speakers:
        for session in SESSIONS:
            for word in vocab:
                for rep in range(1, config.reps + 1):
                    rng = np.random.default_rng([seed, 2, file_index])
                    samples, _ = synth_utterance(word, spk, rng,
                                                 config.sample_rate_hz)
                    samples = _add_noise(samples, config.snr_db, rng)
                    name = (f"{spk.speaker_id}_{session}_{word.label}"
                            f"_r{rep}.wav")
                    write_wav(out_dir / name,
                              AudioClip(samples, config.sample_rate_hz))
                    records.append(UtteranceRecord(
                        path=str(out_dir / name), speaker_id=spk.speaker_id,
                        word_label=word.label, session=session,
                        word_group=word.group,
                        intelligibility_pct=spk.intelligibility_pct))
                    file_index += 1
    manifest = CorpusManifest(records=records)
    save_manifest(out_dir / "manifest.jsonl", manifest)
    return manifest
