"""Dataset cleaning: silence and stationarity screens, speech and
alignment filters, and fixed-length clip segmentation.

Manifests are line-delimited JSON, one clip per line. Filters run in a
documented order (stationary, silent, speech, alignment) but each entry
is evaluated against every applicable filter, so removal reasons
accumulate and the kept set does not depend on the order. Entries
missing an optional score are never removed by that filter; they are
flagged as skipped instead.

All threshold comparisons are strict: a value sitting exactly on a
boundary is kept.
"""

from __future__ import annotations

import glob
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import EmptySignal, FoagenError, ManifestParseError, MissingScore
from .panorama import read_frame, stationarity_verdict


@dataclass(frozen=True)
class FilterThresholds:
    """Cleaning thresholds; defaults follow the shipped recipe.

    ``min_alignment`` defaults to the lenient 1.0 cut; the stricter 2.0
    preset is available as :data:`STRICT_ALIGNMENT`.
    """

    silence_dbfs: float = -35.0
    silence_ratio: float = 0.90
    stationary_ratio: float = 0.85
    max_words: int = 5
    min_alignment: float = 1.0
    window_ms: float = 20.0
    hop_ms: float | None = None
    frame_interval: int = 8
    frame_mse: float = 1e-3

    def __post_init__(self):
        if not 0.0 <= self.silence_ratio <= 1.0:
            raise ValueError("silence_ratio must lie in [0, 1]")
        if not 0.0 <= self.stationary_ratio <= 1.0:
            raise ValueError("stationary_ratio must lie in [0, 1]")
        if self.window_ms <= 0.0:
            raise ValueError("window_ms must be positive")
        if self.hop_ms is not None and self.hop_ms <= 0.0:
            raise ValueError("hop_ms must be positive when set")
        if self.frame_interval < 1:
            raise ValueError("frame_interval must be >= 1")


STRICT_ALIGNMENT = 2.0


@dataclass(frozen=True)
class ClipManifestEntry:
    """One media clip: paths, duration, and externally supplied scores."""

    id: str
    audio_path: str
    duration: float
    sample_rate: int
    frames_pattern: str | None = None
    labels: tuple[str, ...] = ()
    word_count: int | None = None
    alignment_score: float | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("entry id must be non-empty")
        if self.duration < 0.0 or not math.isfinite(self.duration):
            raise ValueError(f"duration must be finite and >= 0, got {self.duration!r}")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        object.__setattr__(self, "labels", tuple(self.labels))


# --- windowed level analysis --------------------------------------------------

def window_dbfs(
    samples,
    window_ms: float,
    sample_rate: int,
    hop_ms: float | None = None,
) -> np.ndarray:
    """Peak level per analysis window, in dBFS.

    ``samples`` is (n,) or (channels, n); the peak is taken across
    channels and samples inside each window. Windows are complete only
    (a trailing partial window is dropped) and tile the signal without
    overlap unless ``hop_ms`` says otherwise. An all-zero window yields
    -inf.

    Raises:
        EmptySignal: when not even one complete window fits.
    """
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError("samples must be (n,) or (channels, n)")
    window = int(round(window_ms * sample_rate / 1000.0))
    if window < 1:
        raise ValueError(
            f"window of {window_ms} ms at {sample_rate} Hz holds no samples"
        )
    hop = window if hop_ms is None else int(round(hop_ms * sample_rate / 1000.0))
    if hop < 1:
        raise ValueError(f"hop of {hop_ms} ms at {sample_rate} Hz holds no samples")
    n = arr.shape[1]
    if n < window:
        raise EmptySignal(f"{n} samples cannot fill a {window}-sample window")
    peaks = []
    for start in range(0, n - window + 1, hop):
        peaks.append(float(np.max(np.abs(arr[:, start : start + window]))))
    peaks = np.asarray(peaks)
    with np.errstate(divide="ignore"):
        return 20.0 * np.log10(peaks)


@dataclass(frozen=True)
class SilenceResult:
    """Silent-window fraction and the resulting verdict."""

    silent: bool
    ratio: float
    windows: int


def silence_verdict(
    samples, sample_rate: int, thresholds: FilterThresholds | None = None
) -> SilenceResult:
    """Decide whether a clip is mostly silent.

    A window is silent when its peak level falls strictly below
    ``silence_dbfs``; the clip is silent when the silent fraction
    strictly exceeds ``silence_ratio``.
    """
    if thresholds is None:
        thresholds = FilterThresholds()
    levels = window_dbfs(
        samples, thresholds.window_ms, sample_rate, thresholds.hop_ms
    )
    silent_windows = int(np.sum(levels < thresholds.silence_dbfs))
    ratio = silent_windows / levels.shape[0]
    return SilenceResult(ratio > thresholds.silence_ratio, ratio, levels.shape[0])


# --- per-entry filters ---------------------------------------------------------

def speech_filter(entry: ClipManifestEntry, max_words: int = 5) -> bool:
    """True to keep: the clip's detected word count does not exceed the cap.

    Raises:
        MissingScore: when the entry carries no word count.
    """
    if entry.word_count is None:
        raise MissingScore(f"entry {entry.id!r} has no word_count")
    return entry.word_count <= max_words


def alignment_filter(entry: ClipManifestEntry, min_alignment: float = 1.0) -> bool:
    """True to keep: audio-visual alignment is not below the floor.

    Raises:
        MissingScore: when the entry carries no alignment score.
    """
    if entry.alignment_score is None:
        raise MissingScore(f"entry {entry.id!r} has no alignment_score")
    return entry.alignment_score >= min_alignment


# --- segmentation ---------------------------------------------------------------

@dataclass(frozen=True)
class ClipSpan:
    """A fixed-length span of a clip, in seconds and in samples."""

    index: int
    start_seconds: float
    end_seconds: float
    start_sample: int
    end_sample: int


def segment_clips(
    entry: ClipManifestEntry, clip_seconds: float = 10.0
) -> list[ClipSpan]:
    """Non-overlapping fixed-length spans; trailing remainder is dropped."""
    if clip_seconds <= 0.0:
        raise ValueError("clip_seconds must be positive")
    count = int(entry.duration / clip_seconds)
    samples_per_clip = int(round(clip_seconds * entry.sample_rate))
    return [
        ClipSpan(
            index=k,
            start_seconds=k * clip_seconds,
            end_seconds=(k + 1) * clip_seconds,
            start_sample=k * samples_per_clip,
            end_sample=(k + 1) * samples_per_clip,
        )
        for k in range(count)
    ]


# --- manifest I/O ----------------------------------------------------------------

_REQUIRED_KEYS = {"id", "audio_path", "duration", "sample_rate"}
_OPTIONAL_KEYS = {"frames_pattern", "labels", "word_count", "alignment_score"}


def read_manifest(path) -> list[ClipManifestEntry]:
    """Read a line-delimited JSON manifest.

    Raises:
        ManifestParseError: naming the offending line on bad JSON, bad or
            missing keys, or duplicate ids.
    """
    entries: list[ClipManifestEntry] = []
    seen: set[str] = set()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ManifestParseError(f"cannot read manifest {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestParseError(f"line {lineno}: invalid JSON ({exc})") from exc
        if not isinstance(record, dict):
            raise ManifestParseError(f"line {lineno}: expected an object")
        keys = set(record)
        missing = _REQUIRED_KEYS - keys
        if missing:
            raise ManifestParseError(
                f"line {lineno}: missing keys {sorted(missing)}"
            )
        unknown = keys - _REQUIRED_KEYS - _OPTIONAL_KEYS
        if unknown:
            raise ManifestParseError(
                f"line {lineno}: unknown keys {sorted(unknown)}"
            )
        try:
            entry = ClipManifestEntry(
                id=str(record["id"]),
                audio_path=str(record["audio_path"]),
                duration=float(record["duration"]),
                sample_rate=int(record["sample_rate"]),
                frames_pattern=record.get("frames_pattern"),
                labels=tuple(record.get("labels") or ()),
                word_count=(
                    None if record.get("word_count") is None
                    else int(record["word_count"])
                ),
                alignment_score=(
                    None if record.get("alignment_score") is None
                    else float(record["alignment_score"])
                ),
            )
        except (TypeError, ValueError) as exc:
            raise ManifestParseError(f"line {lineno}: {exc}") from exc
        if entry.id in seen:
            raise ManifestParseError(f"line {lineno}: duplicate id {entry.id!r}")
        seen.add(entry.id)
        entries.append(entry)
    return entries


def write_manifest(path, entries) -> None:
    """Write entries as line-delimited JSON, one clip per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            record = asdict(entry)
            record["labels"] = list(record["labels"])
            fh.write(json.dumps(record) + "\n")


# --- the pipeline -----------------------------------------------------------------

FILTER_ORDER = ("stationary", "silent", "speech", "alignment")


@dataclass
class FilterReport:
    """Outcome of a cleaning run, keyed by entry id."""

    kept: list[str] = field(default_factory=list)
    removed: dict[str, list[str]] = field(default_factory=dict)
    skipped: dict[str, list[str]] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    evaluated: int = 0

    def summary_table(self) -> str:
        """Human-readable per-filter removal counts."""
        lines = [
            f"{'filter':<12} {'removed':>8}",
            f"{'-' * 12} {'-' * 8}",
        ]
        for name in FILTER_ORDER:
            lines.append(f"{name:<12} {self.counts.get(name, 0):>8}")
        lines.append(
            f"{'total':<12} {len(self.removed):>8}  "
            f"(kept {len(self.kept)} of {self.evaluated})"
        )
        return "\n".join(lines)


def write_report(path, report: FilterReport) -> None:
    """Write a report as line-delimited JSON plus a summary table."""
    with open(path, "w", encoding="utf-8") as fh:
        for entry_id in sorted(set(report.kept) | set(report.removed)):
            record = {
                "id": entry_id,
                "status": "removed" if entry_id in report.removed else "kept",
                "reasons": report.removed.get(entry_id, []),
                "skipped": report.skipped.get(entry_id, []),
            }
            fh.write(json.dumps(record) + "\n")
    with open(str(path) + ".summary", "w", encoding="utf-8") as fh:
        fh.write(report.summary_table() + "\n")


def _evaluate_entry(
    entry: ClipManifestEntry,
    thresholds: FilterThresholds,
    base_dir: str | None,
) -> tuple[str, list[str], list[str]]:
    """Run every applicable filter; reasons and skip notes accumulate."""
    from .audio_io import read_wav, signal_channels  # deferred: avoids an import cycle

    def resolve(path: str) -> str:
        if base_dir is not None and not os.path.isabs(path):
            return os.path.join(base_dir, path)
        return path

    reasons: list[str] = []
    skipped: list[str] = []

    if entry.frames_pattern:
        frame_paths = sorted(glob.glob(resolve(entry.frames_pattern)))
        try:
            frames = [read_frame(p) for p in frame_paths]
            verdict = stationarity_verdict(
                frames,
                thresholds.frame_interval,
                thresholds.frame_mse,
                thresholds.stationary_ratio,
            )
            if verdict.stationary:
                reasons.append("stationary")
        except FoagenError:
            # Unreadable or too-short sequences cannot be judged.
            skipped.append("stationary")
    else:
        skipped.append("stationary")

    audio_path = resolve(entry.audio_path)
    if os.path.exists(audio_path):
        try:
            signal = read_wav(audio_path)
            result = silence_verdict(
                signal_channels(signal), signal.sample_rate, thresholds
            )
            if result.silent:
                reasons.append("silent")
        except FoagenError:
            skipped.append("silent")
    else:
        skipped.append("silent")

    try:
        if not speech_filter(entry, thresholds.max_words):
            reasons.append("speech")
    except MissingScore:
        skipped.append("speech")

    try:
        if not alignment_filter(entry, thresholds.min_alignment):
            reasons.append("alignment")
    except MissingScore:
        skipped.append("alignment")

    return entry.id, reasons, skipped


def run_pipeline(
    entries,
    thresholds: FilterThresholds | None = None,
    base_dir: str | None = None,
    jobs: int = 1,
) -> FilterReport:
    """Evaluate every entry against every applicable filter.

    Entries are processed independently (optionally in ``jobs`` threads)
    and the report is merged in sorted-id order, so the result does not
    depend on the worker count.
    """
    if thresholds is None:
        thresholds = FilterThresholds()
    entries = sorted(entries, key=lambda e: e.id)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(
                pool.map(
                    lambda e: _evaluate_entry(e, thresholds, base_dir), entries
                )
            )
    else:
        results = [_evaluate_entry(e, thresholds, base_dir) for e in entries]

    report = FilterReport(evaluated=len(entries))
    report.counts = {name: 0 for name in FILTER_ORDER}
    for entry_id, reasons, skipped in results:
        if skipped:
            report.skipped[entry_id] = skipped
        if reasons:
            report.removed[entry_id] = reasons
            for reason in reasons:
                report.counts[reason] += 1
        else:
            report.kept.append(entry_id)
    return report
