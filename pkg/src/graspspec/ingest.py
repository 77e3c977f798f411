"""Recording/epoch data model and the CSV formats it is stored in.

Three on-disk formats, all plain CSV so they can be eyeballed:

* recording: metadata comment ``# fs=<Hz>`` followed by a header row
  ``time,<ch1>,...,<chK>`` and one row per sample.  The time column is only
  checked for monotonicity and then discarded.
* event log: header ``onset_sample,label,kind``.
* epoch set: ``# fs=<Hz>`` followed by header
  ``trial_id,label,channel,sample_index,value`` with one row per sample.
  Values are written with full ``repr`` precision so a write/read round trip
  is bit-exact.

Labels form a closed three-class enumeration; anything else is a parse
error, not a new class.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

LABELS = ("power", "precision", "none")
EVENT_KINDS = ("observe_start", "cue", "baseline_start", "baseline_end")


class ParseError(ValueError):
    """Malformed on-disk data; the message names the offending location."""


@dataclass
class Recording:
    """Continuous multichannel recording: channels x time samples."""

    channel_names: list[str]
    fs_hz: float
    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.fs_hz <= 0:
            raise ValueError(f"fs_hz must be positive, got {self.fs_hz}")
        if self.samples.ndim != 2 or self.samples.shape[0] < 1:
            raise ValueError("samples must be a channels x time matrix with >= 1 channel")
        if len(self.channel_names) != self.samples.shape[0]:
            raise ValueError("channel_names length does not match sample rows")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples contain non-finite values")
        self.samples.setflags(write=False)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]


@dataclass
class Event:
    onset_sample: int
    label: str
    kind: str

    def __post_init__(self):
        if self.onset_sample < 0:
            raise ValueError(f"negative onset_sample {self.onset_sample}")
        if self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}, expected one of {LABELS}")
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}, expected one of {EVENT_KINDS}")


@dataclass
class EventLog:
    events: list[Event] = field(default_factory=list)

    def __post_init__(self):
        onsets = [e.onset_sample for e in self.events]
        if any(b < a for a, b in zip(onsets, onsets[1:])):
            raise ValueError("event onsets must be nondecreasing")

    def of_kind(self, kind: str) -> list[Event]:
        return [e for e in self.events if e.kind == kind]


@dataclass
class Epoch:
    """One labeled fixed-length trial window, channels x L."""

    label: str
    data: np.ndarray
    fs_hz: float

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}")
        if self.data.ndim != 2:
            raise ValueError("epoch data must be channels x L")
        if self.fs_hz <= 0:
            raise ValueError("fs_hz must be positive")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("epoch contains non-finite values")
        self.data.setflags(write=False)

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]


@dataclass
class EpochSet:
    """A homogeneous collection of epochs sharing channels, length and rate."""

    epochs: list[Epoch]
    channel_names: list[str]
    fs_hz: float

    def __post_init__(self):
        if not self.epochs:
            raise ValueError("no trials: epoch set must contain at least one epoch")
        n_ch = len(self.channel_names)
        lengths = {e.n_samples for e in self.epochs}
        if len(lengths) != 1:
            raise ValueError(f"epochs have mixed lengths {sorted(lengths)}")
        for i, e in enumerate(self.epochs):
            if e.n_channels != n_ch:
                raise ValueError(f"epoch {i} has {e.n_channels} channels, expected {n_ch}")
            if e.fs_hz != self.fs_hz:
                raise ValueError(f"epoch {i} fs {e.fs_hz} != set fs {self.fs_hz}")

    @property
    def labels(self) -> list[str]:
        return [e.label for e in self.epochs]

    @property
    def n_samples(self) -> int:
        return self.epochs[0].n_samples

    def map_data(self, fn) -> "EpochSet":
        """New EpochSet with ``fn(channels x L array) -> array`` applied per epoch."""
        out = [Epoch(e.label, fn(e.data), e.fs_hz) for e in self.epochs]
        return EpochSet(out, list(self.channel_names), self.fs_hz)


def _read_fs_comment(line: str, path, lineno: int) -> float:
    body = line.lstrip("#").strip()
    if not body.startswith("fs="):
        raise ParseError(f"{path}:{lineno}: expected metadata comment '# fs=<Hz>', got {line!r}")
    try:
        fs = float(body[3:])
    except ValueError:
        raise ParseError(f"{path}:{lineno}: bad fs value {body[3:]!r}") from None
    if fs <= 0:
        raise ParseError(f"{path}:{lineno}: fs must be positive, got {fs}")
    return fs


def read_recording(path) -> Recording:
    """Read a recording CSV (``# fs=`` comment, ``time,<ch...>`` header).

    Raises ParseError naming the line for missing metadata, ragged rows,
    non-numeric cells and non-monotonic time stamps.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    fs = None
    header = None
    data_rows = []
    prev_t = None
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            fs = _read_fs_comment(line, path, lineno)
            continue
        cells = line.split(",")
        if header is None:
            header = [c.strip() for c in cells]
            if len(header) < 2 or header[0] != "time":
                raise ParseError(f"{path}:{lineno}: header must be 'time,<ch1>,...', got {line!r}")
            continue
        if len(cells) != len(header):
            raise ParseError(
                f"{path}:{lineno}: ragged row, {len(cells)} cells but {len(header)} columns"
            )
        row = np.empty(len(cells))
        for col, cell in enumerate(cells):
            try:
                v = float(cell)
            except ValueError:
                v = np.nan
            if not np.isfinite(v):
                raise ParseError(
                    f"{path}:{lineno}: non-numeric cell {cell.strip()!r} in column {header[col]!r}"
                )
            row[col] = v
        if prev_t is not None and row[0] <= prev_t:
            raise ParseError(f"{path}:{lineno}: time column not strictly increasing")
        prev_t = row[0]
        data_rows.append(row)
    if fs is None:
        raise ParseError(f"{path}: missing '# fs=<Hz>' metadata comment")
    if header is None or not data_rows:
        raise ParseError(f"{path}: no data rows")
    table = np.vstack(data_rows)
    return Recording(channel_names=header[1:], fs_hz=fs, samples=table[:, 1:].T)


def write_recording(rec: Recording, path) -> None:
    """Inverse of read_recording; time column synthesized as sample_index / fs."""
    t = np.arange(rec.n_samples) / rec.fs_hz
    cols = {"time": t}
    for i, name in enumerate(rec.channel_names):
        cols[name] = rec.samples[i]
    text = f"# fs={rec.fs_hz:g}\n" + pd.DataFrame(cols).to_csv(index=False)
    write_text_atomic(path, text)


def read_event_log(path) -> EventLog:
    path = Path(path)
    try:
        df = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise ParseError(f"{path}: empty event log") from None
    expected = ["onset_sample", "label", "kind"]
    if list(df.columns) != expected:
        raise ParseError(f"{path}: expected header {','.join(expected)}, got {','.join(df.columns)}")
    events = []
    for i, row in df.iterrows():
        try:
            events.append(Event(int(row["onset_sample"]), str(row["label"]), str(row["kind"])))
        except ValueError as exc:
            raise ParseError(f"{path}: row {i + 2}: {exc}") from None
    return EventLog(events)


def epoch_recording(rec: Recording, log: EventLog, epoch_seconds: float = 6.0) -> EpochSet:
    """Cut one epoch per observe_start event, labeled by the event's label.

    The window is [onset, onset + round(epoch_seconds * fs)); any later cue
    or baseline events are metadata only and do not affect the cut.
    """
    if epoch_seconds <= 0:
        raise ValueError("epoch_seconds must be positive")
    starts = log.of_kind("observe_start")
    if not starts:
        raise ValueError("no trials: event log has no observe_start events")
    length = int(round(epoch_seconds * rec.fs_hz))
    overruns = [i for i, e in enumerate(starts) if e.onset_sample + length > rec.n_samples]
    if overruns:
        raise ValueError(
            f"epoch window overruns recording end for observe_start event(s) {overruns} "
            f"(need onset + {length} <= {rec.n_samples})"
        )
    epochs = [
        Epoch(e.label, rec.samples[:, e.onset_sample : e.onset_sample + length], rec.fs_hz)
        for e in starts
    ]
    return EpochSet(epochs, list(rec.channel_names), rec.fs_hz)


def write_epochs(epoch_set: EpochSet, path) -> None:
    """Write the epoch-set CSV; values keep full precision for exact round trips."""
    n_ch = len(epoch_set.channel_names)
    length = epoch_set.n_samples
    n_trials = len(epoch_set.epochs)
    trial_id = np.repeat(np.arange(n_trials), n_ch * length)
    label = np.repeat(np.asarray(epoch_set.labels, dtype=object), n_ch * length)
    channel = np.tile(np.repeat(np.asarray(epoch_set.channel_names, dtype=object), length), n_trials)
    sample_index = np.tile(np.arange(length), n_trials * n_ch)
    value = np.concatenate([e.data.reshape(-1) for e in epoch_set.epochs])
    df = pd.DataFrame(
        {
            "trial_id": trial_id,
            "label": label,
            "channel": channel,
            "sample_index": sample_index,
            "value": value,
        }
    )
    text = f"# fs={epoch_set.fs_hz:g}\n" + df.to_csv(index=False)
    write_text_atomic(path, text)


def read_epochs(path) -> EpochSet:
    """Read an epoch-set CSV written by write_epochs."""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
        if not first:
            raise ParseError(f"{path}: empty file")
        if not first.startswith("#"):
            raise ParseError(f"{path}: missing '# fs=<Hz>' metadata comment")
        fs = _read_fs_comment(first, path, 1)
        try:
            df = pd.read_csv(fh, float_precision="round_trip")
        except pd.errors.EmptyDataError:
            raise ParseError(f"{path}: no data rows") from None
    expected = ["trial_id", "label", "channel", "sample_index", "value"]
    if list(df.columns) != expected:
        raise ParseError(f"{path}: expected header {','.join(expected)}, got {','.join(df.columns)}")
    if len(df) == 0:
        raise ParseError(f"{path}: no data rows")

    channel_names = list(pd.unique(df["channel"].astype(str)))
    n_ch = len(channel_names)
    trial_ids = df["trial_id"].to_numpy()
    n_trials = int(trial_ids.max()) + 1
    lengths = df["sample_index"].to_numpy()
    length = int(lengths.max()) + 1
    if len(df) != n_trials * n_ch * length:
        raise ParseError(
            f"{path}: schema mismatch, {len(df)} rows != trials*channels*samples "
            f"({n_trials}*{n_ch}*{length})"
        )
    # Writer emits rows in (trial, channel, sample) order; verify before reshaping.
    want_trial = np.repeat(np.arange(n_trials), n_ch * length)
    want_sample = np.tile(np.arange(length), n_trials * n_ch)
    if not (np.array_equal(trial_ids, want_trial) and np.array_equal(lengths, want_sample)):
        raise ParseError(f"{path}: schema mismatch, rows are not in canonical order")
    values = df["value"].to_numpy(dtype=float).reshape(n_trials, n_ch, length)
    labels = df["label"].to_numpy()[:: n_ch * length]
    epochs = [Epoch(str(labels[t]), values[t], fs) for t in range(n_trials)]
    return EpochSet(epochs, channel_names, fs)


def write_text_atomic(path, text: str) -> None:
    """Write text via a temp file in the same directory, then rename."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)
