"""EDF recordings, seizure annotations, and per-seizure segment extraction.

The reader implements the classic 16-bit EDF layout: a 256-byte fixed header,
256 bytes of signal header per channel, then data records of little-endian
two's-complement samples.  EDF+ files are accepted only when continuous
("EDF+C" in the reserved field); discontinuous recordings are rejected.

Seizure times come from a sidecar CSV (``file,onset_s,end_s``) rather than
from free-text summaries, and a plain signal-CSV fallback (header row =
channel labels, one column per channel) lets every downstream stage run
without binary fixtures.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from datetime import datetime

import numpy as np


class IngestError(Exception):
    """Base class for recording/annotation input failures."""


class TruncatedHeaderError(IngestError):
    """Fewer bytes than the fixed EDF header layout requires."""


class MalformedFieldError(IngestError):
    """A numeric header field does not parse or violates its bounds."""


class UnsupportedVariantError(IngestError):
    """EDF variant outside the supported subset (e.g. discontinuous EDF+D)."""


class TruncatedRecordsError(IngestError):
    """The data-record area is shorter than the header promises."""


class ParseError(IngestError):
    """Malformed annotation or signal CSV."""


class OverlapError(IngestError):
    """Seizure intervals within one file overlap."""


class SeizureIndexError(IngestError):
    """Requested seizure index not present in the annotation list."""


class EmptySegmentError(IngestError):
    """Extraction window contains no samples (onset at recording start)."""


@dataclass(frozen=True)
class ChannelHeader:
    label: str
    n_samples_per_record: int
    physical_min: float
    physical_max: float
    digital_min: int
    digital_max: int


@dataclass(frozen=True)
class RecordingHeader:
    version: int
    patient_id: str
    recording_id: str
    start_datetime: datetime
    n_data_records: int
    record_duration: float
    channels: tuple[ChannelHeader, ...]

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def header_size(self) -> int:
        return 256 * (1 + self.n_channels)


@dataclass
class ChannelSignal:
    """One EEG channel in physical units (microvolts for EEG)."""

    label: str
    fs: float
    samples: np.ndarray

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.fs


@dataclass(frozen=True)
class SeizureInterval:
    onset: float
    end: float


@dataclass
class RawSegment:
    """Pre-seizure analysis segment: all samples strictly before one onset."""

    channels: list[ChannelSignal]
    seizure_onset: float  # seconds from segment start
    patient_id: str = ""
    seizure_index: int = 0


# --- EDF parsing -----------------------------------------------------------

# Fixed header: (offset, length) of each ASCII field.
_VERSION = (0, 8)
_PATIENT = (8, 80)
_RECORDING = (88, 80)
_STARTDATE = (168, 8)
_STARTTIME = (176, 8)
_HEADER_BYTES = (184, 8)
_RESERVED = (192, 44)
_N_RECORDS = (236, 8)
_DURATION = (244, 8)
_N_SIGNALS = (252, 4)

# Per-signal blocks, in file order: (field width, attribute).
_SIGNAL_FIELDS = (
    (16, "label"),
    (80, "transducer"),
    (8, "dimension"),
    (8, "physical_min"),
    (8, "physical_max"),
    (8, "digital_min"),
    (8, "digital_max"),
    (80, "prefilter"),
    (8, "n_samples_per_record"),
    (32, "reserved"),
)


def _ascii(data: bytes, field: tuple[int, int]) -> str:
    off, length = field
    return data[off : off + length].decode("latin-1").strip()


def _as_int(text: str, name: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise MalformedFieldError(f"{name}: {text!r} is not an integer") from None


def _as_float(text: str, name: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise MalformedFieldError(f"{name}: {text!r} is not a number") from None


def _parse_start(date_text: str, time_text: str) -> datetime:
    # EDF start date is dd.mm.yy with the 1985 clipping rule; some writers
    # use ':' instead of '.'.
    try:
        day, month, year = (int(p) for p in date_text.replace(":", ".").split("."))
        hour, minute, second = (int(p) for p in time_text.replace(":", ".").split("."))
        year += 1900 if year >= 85 else 2000
        return datetime(year, month, day, hour, minute, second)
    except ValueError:
        raise MalformedFieldError(
            f"start date/time: {date_text!r} {time_text!r}"
        ) from None


def parse_edf_header(data: bytes) -> RecordingHeader:
    """Decode the fixed-layout ASCII header of an EDF recording.

    Raises TruncatedHeaderError, MalformedFieldError or
    UnsupportedVariantError; trailing spaces are stripped from every field.
    """
    if len(data) < 256:
        raise TruncatedHeaderError(f"need at least 256 header bytes, got {len(data)}")

    reserved = _ascii(data, _RESERVED)
    if reserved.startswith("EDF+D"):
        raise UnsupportedVariantError("discontinuous EDF+D recordings not supported")

    version = _as_int(_ascii(data, _VERSION), "version")
    n_records = _as_int(_ascii(data, _N_RECORDS), "n_data_records")
    if n_records < 0:
        raise UnsupportedVariantError("unknown record count (n_data_records < 0)")
    duration = _as_float(_ascii(data, _DURATION), "record_duration")
    if duration <= 0:
        raise MalformedFieldError(f"record_duration must be positive, got {duration}")
    n_signals = _as_int(_ascii(data, _N_SIGNALS), "n_signals")
    if n_signals <= 0:
        raise MalformedFieldError(f"n_signals must be positive, got {n_signals}")
    if len(data) < 256 * (1 + n_signals):
        raise TruncatedHeaderError(
            f"need {256 * (1 + n_signals)} bytes for {n_signals} signal headers, "
            f"got {len(data)}"
        )

    # Signal headers are stored field-major: all labels, all transducers, ...
    fields: dict[str, list[str]] = {}
    offset = 256
    for width, name in _SIGNAL_FIELDS:
        fields[name] = [
            _ascii(data, (offset + i * width, width)) for i in range(n_signals)
        ]
        offset += width * n_signals

    channels = []
    for i in range(n_signals):
        n_samples = _as_int(fields["n_samples_per_record"][i], f"signal {i} samples")
        if n_samples <= 0:
            raise MalformedFieldError(f"signal {i}: non-positive samples per record")
        pmin = _as_float(fields["physical_min"][i], f"signal {i} physical_min")
        pmax = _as_float(fields["physical_max"][i], f"signal {i} physical_max")
        dmin = _as_int(fields["digital_min"][i], f"signal {i} digital_min")
        dmax = _as_int(fields["digital_max"][i], f"signal {i} digital_max")
        if pmax <= pmin:
            raise MalformedFieldError(f"signal {i}: physical_max <= physical_min")
        if dmax <= dmin:
            raise MalformedFieldError(f"signal {i}: digital_max <= digital_min")
        channels.append(
            ChannelHeader(fields["label"][i], n_samples, pmin, pmax, dmin, dmax)
        )

    return RecordingHeader(
        version=version,
        patient_id=_ascii(data, _PATIENT),
        recording_id=_ascii(data, _RECORDING),
        start_datetime=_parse_start(_ascii(data, _STARTDATE), _ascii(data, _STARTTIME)),
        n_data_records=n_records,
        record_duration=duration,
        channels=tuple(channels),
    )


def dedupe_labels(labels: list[str]) -> list[str]:
    """Disambiguate repeated channel labels by suffixing ``#k``.

    The first occurrence keeps the plain label; later ones get ``#2``, ``#3``
    in order of appearance (CHB-MIT files contain literal duplicates).
    """
    seen: dict[str, int] = {}
    out = []
    for label in labels:
        seen[label] = seen.get(label, 0) + 1
        out.append(label if seen[label] == 1 else f"{label}#{seen[label]}")
    return out


def channel_labels(header: RecordingHeader) -> list[str]:
    return dedupe_labels([c.label for c in header.channels])


def read_signal(data: bytes, header: RecordingHeader, channel_index: int) -> ChannelSignal:
    """Gather one channel across all data records, rescaled to physical units.

    phys = physical_min + (dig - digital_min) * (physical_max - physical_min)
           / (digital_max - digital_min)
    """
    if not 0 <= channel_index < header.n_channels:
        raise IndexError(
            f"channel index {channel_index} out of range 0..{header.n_channels - 1}"
        )
    ch = header.channels[channel_index]
    per_record = [c.n_samples_per_record for c in header.channels]
    record_samples = sum(per_record)
    needed = header.header_size + 2 * record_samples * header.n_data_records
    if len(data) < needed:
        raise TruncatedRecordsError(
            f"recording needs {needed} bytes for {header.n_data_records} records, "
            f"got {len(data)}"
        )
    raw = np.frombuffer(
        data,
        dtype="<i2",
        count=record_samples * header.n_data_records,
        offset=header.header_size,
    ).reshape(header.n_data_records, record_samples)
    start = sum(per_record[:channel_index])
    dig = raw[:, start : start + ch.n_samples_per_record].ravel().astype(np.float64)
    scale = (ch.physical_max - ch.physical_min) / (ch.digital_max - ch.digital_min)
    phys = ch.physical_min + (dig - ch.digital_min) * scale
    return ChannelSignal(
        label=channel_labels(header)[channel_index],
        fs=ch.n_samples_per_record / header.record_duration,
        samples=phys,
    )


def read_recording(data: bytes, labels: list[str] | None = None) -> list[ChannelSignal]:
    """Read all channels (or the given deduplicated labels) in file order."""
    header = parse_edf_header(data)
    all_labels = channel_labels(header)
    if labels is None:
        indices = range(header.n_channels)
    else:
        missing = [lb for lb in labels if lb not in all_labels]
        if missing:
            raise ParseError(f"channels not in recording: {', '.join(missing)}")
        indices = [all_labels.index(lb) for lb in labels]
    return [read_signal(data, header, i) for i in indices]


def _format_number(value: float, width: int, name: str) -> str:
    if value == int(value):
        text = str(int(value))
    else:
        text = repr(float(value))
    if len(text) > width:
        text = f"{value:.{max(1, width - 7)}e}"
    if len(text) > width:
        raise ValueError(f"{name}: {value!r} does not fit in {width} ASCII bytes")
    return text


def write_edf(header: RecordingHeader, digital: list[np.ndarray]) -> bytes:
    """Serialize a recording back to EDF bytes (test fixtures, synthetic data).

    ``digital`` holds one int16 vector per channel with
    ``n_samples_per_record * n_data_records`` entries; round-trips bit-exactly
    through parse_edf_header/read_signal.
    """
    if len(digital) != header.n_channels:
        raise ValueError(
            f"expected {header.n_channels} digital vectors, got {len(digital)}"
        )
    for ch, dig in zip(header.channels, digital):
        expected = ch.n_samples_per_record * header.n_data_records
        if len(dig) != expected:
            raise ValueError(f"channel {ch.label}: expected {expected} samples")

    def pad(text: str, width: int) -> bytes:
        raw = text.encode("latin-1")
        if len(raw) > width:
            raise ValueError(f"{text!r} does not fit in {width} ASCII bytes")
        return raw.ljust(width)

    start = header.start_datetime
    parts = [
        pad(str(header.version), 8),
        pad(header.patient_id, 80),
        pad(header.recording_id, 80),
        pad(f"{start.day:02d}.{start.month:02d}.{start.year % 100:02d}", 8),
        pad(f"{start.hour:02d}.{start.minute:02d}.{start.second:02d}", 8),
        pad(str(header.header_size), 8),
        pad("", 44),
        pad(str(header.n_data_records), 8),
        pad(_format_number(header.record_duration, 8, "record_duration"), 8),
        pad(str(header.n_channels), 4),
    ]
    for width, name in _SIGNAL_FIELDS:
        for i, ch in enumerate(header.channels):
            if name == "label":
                parts.append(pad(ch.label, width))
            elif name == "n_samples_per_record":
                parts.append(pad(str(ch.n_samples_per_record), width))
            elif name == "physical_min":
                parts.append(pad(_format_number(ch.physical_min, width, name), width))
            elif name == "physical_max":
                parts.append(pad(_format_number(ch.physical_max, width, name), width))
            elif name == "digital_min":
                parts.append(pad(str(ch.digital_min), width))
            elif name == "digital_max":
                parts.append(pad(str(ch.digital_max), width))
            else:
                parts.append(pad("", width))

    records = []
    for r in range(header.n_data_records):
        for ch, dig in zip(header.channels, digital):
            n = ch.n_samples_per_record
            chunk = np.asarray(dig[r * n : (r + 1) * n], dtype="<i2")
            records.append(chunk.tobytes())
    return b"".join(parts) + b"".join(records)


# --- annotations ------------------------------------------------------------


def load_annotations(text: str) -> dict[str, list[SeizureInterval]]:
    """Parse the seizure-annotation CSV: ``file,onset_s,end_s`` per line.

    '#' lines are comments.  Intervals are validated (0 <= onset < end),
    sorted by onset and checked for overlap within each file.
    """
    by_file: dict[str, list[SeizureInterval]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = [p.strip() for p in stripped.split(",")]
        if len(parts) != 3:
            raise ParseError(f"line {lineno}: expected 'file,onset_s,end_s'")
        name = parts[0]
        if not name:
            raise ParseError(f"line {lineno}: empty file name")
        try:
            onset, end = float(parts[1]), float(parts[2])
        except ValueError:
            raise ParseError(f"line {lineno}: non-numeric onset/end") from None
        if not 0 <= onset < end:
            raise ParseError(f"line {lineno}: need 0 <= onset < end")
        by_file.setdefault(name, []).append(SeizureInterval(onset, end))

    for name, intervals in by_file.items():
        intervals.sort(key=lambda s: s.onset)
        for prev, cur in zip(intervals, intervals[1:]):
            if cur.onset < prev.end:
                raise OverlapError(
                    f"{name}: seizures [{prev.onset},{prev.end}) and "
                    f"[{cur.onset},{cur.end}) overlap"
                )
    return by_file


def extract_dataset(
    channels: list[ChannelSignal],
    seizures: list[SeizureInterval],
    seizure_index: int,
    max_lead_s: float = 3600.0,
    patient_id: str = "",
) -> RawSegment:
    """Cut the pre-seizure segment [max(0, onset - max_lead_s), onset).

    When the seizure starts earlier than ``max_lead_s`` into the recording,
    everything up to the onset is kept.  No sample at or after the onset is
    ever included.
    """
    if not 0 <= seizure_index < len(seizures):
        raise SeizureIndexError(
            f"seizure index {seizure_index} out of range 0..{len(seizures) - 1}"
        )
    onset = seizures[seizure_index].onset
    start_s = max(0.0, onset - max_lead_s)
    out = []
    for ch in channels:
        i0 = math.ceil(start_s * ch.fs - 1e-9)
        i1 = math.ceil(onset * ch.fs - 1e-9)
        i1 = min(i1, len(ch.samples))
        if i1 <= i0:
            raise EmptySegmentError(
                f"no samples before onset at {onset}s on channel {ch.label}"
            )
        out.append(ChannelSignal(ch.label, ch.fs, ch.samples[i0:i1].copy()))
    return RawSegment(
        channels=out,
        seizure_onset=onset - start_s,
        patient_id=patient_id,
        seizure_index=seizure_index,
    )


# --- signal-CSV fallback ----------------------------------------------------


def read_signal_csv(text: str, fs: float) -> list[ChannelSignal]:
    """Parse the fallback signal CSV: header row = labels, one column per channel."""
    if fs <= 0:
        raise ParseError(f"sampling rate must be positive, got {fs}")
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if len(rows) < 2:
        raise ParseError("signal CSV needs a header row and at least one sample row")
    labels = dedupe_labels([c.strip() for c in rows[0]])
    data = np.empty((len(rows) - 1, len(labels)))
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != len(labels):
            raise ParseError(f"row {i + 1}: expected {len(labels)} columns")
        try:
            data[i - 1] = [float(c) for c in row]
        except ValueError:
            raise ParseError(f"row {i + 1}: non-numeric sample") from None
    return [ChannelSignal(lb, fs, data[:, j].copy()) for j, lb in enumerate(labels)]


def write_signal_csv(channels: list[ChannelSignal]) -> str:
    lengths = {len(ch.samples) for ch in channels}
    if len(lengths) != 1:
        raise ValueError("all channels must have the same length")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([ch.label for ch in channels])
    columns = np.column_stack([ch.samples for ch in channels])
    for row in columns:
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()
