"""
Symbolic input: Standard MIDI Files, note lists, piano rolls, manifests.

Time is rasterized in ticks, ignoring tempo: a piece's tick span is mapped
linearly onto a fixed number of frames.

"""

from __future__ import annotations

import csv
import io
import os
import struct
from collections import defaultdict, deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ROLL_MAGIC = b"EPRL"
ROLL_VERSION = 1


class MidiParseError(ValueError):
    def __init__(self, message, offset):
        super().__init__("%s at byte offset %d" % (message, offset))
        self.offset = offset


class NoteCsvError(ValueError):
    def __init__(self, message, line):
        super().__init__("line %d: %s" % (line, message))
        self.line = line


class ManifestError(ValueError):
    pass


class RollFormatError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class NoteEvent:
    onset: int
    pitch: int
    duration: int
    velocity: int = 64

    def __post_init__(self):
        if not 0 <= self.pitch <= 127:
            raise ValueError("pitch %d outside [0, 127]" % self.pitch)
        if not 0 <= self.velocity <= 127:
            raise ValueError("velocity %d outside [0, 127]" % self.velocity)
        if self.onset < 0 or self.duration < 0:
            raise ValueError("onset and duration must be non-negative")

    @property
    def end(self):
        return self.onset + self.duration


# ---------------------------------------------------------------------------
# Standard MIDI Files
# ---------------------------------------------------------------------------

_DATA_BYTES = {0x80: 2, 0x90: 2, 0xA0: 2, 0xB0: 2, 0xC0: 1, 0xD0: 1, 0xE0: 2}


def _read_vlq(data, pos, end):
    value = 0
    for i in range(4):
        if pos >= end:
            raise MidiParseError("truncated variable-length quantity", pos)
        byte = data[pos]
        pos += 1
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos
    raise MidiParseError("variable-length quantity longer than 4 bytes", pos - 4)


def _parse_track(data, start, end):
    notes = []
    pending = defaultdict(deque)
    pos, tick, status = start, 0, None
    while pos < end:
        delta, pos = _read_vlq(data, pos, end)
        tick += delta
        if pos >= end:
            raise MidiParseError("truncated event", pos)
        byte = data[pos]
        if byte >= 0x80:
            pos += 1
            if byte < 0xF0:
                status = byte
        elif status is None:
            raise MidiParseError("data byte without running status", pos)
        else:
            byte = status
        if byte == 0xFF:
            status = None
            if pos >= end:
                raise MidiParseError("truncated meta event", pos)
            kind = data[pos]
            length, pos = _read_vlq(data, pos + 1, end)
            if pos + length > end:
                raise MidiParseError("truncated meta event", pos)
            pos += length
            if kind == 0x2F:
                break
            continue
        if byte in (0xF0, 0xF7):
            status = None
            length, pos = _read_vlq(data, pos, end)
            if pos + length > end:
                raise MidiParseError("truncated sysex event", pos)
            pos += length
            continue
        if byte >= 0xF0:
            raise MidiParseError("unexpected system message 0x%02X" % byte, pos - 1)
        kind, channel = byte & 0xF0, byte & 0x0F
        n_data = _DATA_BYTES[kind]
        if pos + n_data > end:
            raise MidiParseError("truncated channel message", pos)
        args = data[pos:pos + n_data]
        pos += n_data
        if kind == 0x90 and args[1] > 0:
            pending[(channel, args[0])].append((tick, args[1]))
        elif kind == 0x80 or kind == 0x90:
            queue = pending.get((channel, args[0]))
            if queue:
                onset, velocity = queue.popleft()
                notes.append(NoteEvent(onset, args[0], tick - onset, velocity))
    for (_, pitch), queue in pending.items():
        for onset, velocity in queue:
            notes.append(NoteEvent(onset, pitch, tick - onset, velocity))
    return notes


def parse_midi(data):
    """
    Note events of a format 0 or 1 Standard MIDI File.

    Note-ons are paired first-in first-out with the next note-off (or
    zero-velocity note-on) of the same channel and pitch; note-ons left
    open are closed at the end of their track. Onsets are absolute ticks,
    merged across tracks and sorted by (onset, pitch).

    Raises
    ------
    MidiParseError
        On a malformed header, truncated data, or format 2.

    """
    data = bytes(data)
    if len(data) < 14 or data[:4] != b"MThd":
        raise MidiParseError("missing MThd header chunk", 0)
    (length,) = struct.unpack(">I", data[4:8])
    if length < 6:
        raise MidiParseError("header chunk too short", 4)
    fmt, ntracks, _division = struct.unpack(">HHH", data[8:14])
    if fmt == 2:
        raise MidiParseError("unsupported SMF format 2", 8)
    if fmt not in (0, 1):
        raise MidiParseError("unknown SMF format %d" % fmt, 8)
    pos = 8 + length
    notes = []
    tracks = 0
    while pos < len(data):
        if pos + 8 > len(data):
            raise MidiParseError("truncated chunk header", pos)
        kind = data[pos:pos + 4]
        (size,) = struct.unpack(">I", data[pos + 4:pos + 8])
        body = pos + 8
        if body + size > len(data):
            raise MidiParseError("chunk length exceeds file size", pos + 4)
        if kind == b"MTrk":
            notes.extend(_parse_track(data, body, body + size))
            tracks += 1
        pos = body + size
    if tracks < ntracks:
        raise MidiParseError("header declares %d tracks, found %d"
                             % (ntracks, tracks), len(data))
    notes.sort(key=lambda n: (n.onset, n.pitch, n.duration, n.velocity))
    return notes


def _vlq(value):
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(out))


def _track_chunk(events):
    body = bytearray()
    last = 0
    for tick, message in events:
        body += _vlq(tick - last) + message
        last = tick
    body += _vlq(0) + b"\xff\x2f\x00"
    return b"MTrk" + struct.pack(">I", len(body)) + bytes(body)


def write_midi(notes, fmt=0, ticks_per_beat=480, channel=0):
    """
    Serialize notes to a Standard MIDI File (format 0, or format 1 with a
    tempo track followed by one note track). Velocity 0 is written as 1,
    since a zero-velocity note-on means note-off.
    """
    if fmt not in (0, 1):
        raise ValueError("only formats 0 and 1 are written")
    events = []
    for n in notes:
        velocity = max(1, n.velocity)
        off_rank = 2 if n.duration == 0 else 0
        events.append((n.onset, 1, n.pitch, bytes((0x90 | channel, n.pitch, velocity))))
        events.append((n.end, off_rank, n.pitch, bytes((0x80 | channel, n.pitch, 0))))
    events.sort(key=lambda e: e[:3])
    note_track = _track_chunk([(tick, msg) for tick, _, _, msg in events])
    tempo = _track_chunk([(0, b"\xff\x51\x03\x07\xa1\x20")])
    tracks = [note_track] if fmt == 0 else [tempo, note_track]
    header = b"MThd" + struct.pack(">IHHH", 6, fmt, len(tracks), ticks_per_beat)
    return header + b"".join(tracks)


# ---------------------------------------------------------------------------
# note CSV and manifests
# ---------------------------------------------------------------------------

def parse_note_csv(text):
    """Notes from ``pitch,onset,duration[,velocity]`` CSV (velocity defaults to 64)."""
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows:
        raise NoteCsvError("missing header", 1)
    header = [h.strip().lower() for h in rows[0]]
    if header not in (["pitch", "onset", "duration"],
                      ["pitch", "onset", "duration", "velocity"]):
        raise NoteCsvError("expected header pitch,onset,duration[,velocity]", 1)
    notes = []
    for line, row in enumerate(rows[1:], start=2):
        if not row or not "".join(row).strip():
            continue
        if len(row) != len(header):
            raise NoteCsvError("expected %d fields, got %d" % (len(header), len(row)), line)
        try:
            values = [int(v.strip()) for v in row]
        except ValueError:
            raise NoteCsvError("non-integer field in %r" % ",".join(row), line) from None
        pitch, onset, duration = values[:3]
        velocity = values[3] if len(values) > 3 else 64
        if not 0 <= pitch <= 127:
            raise NoteCsvError("pitch %d out of range [0, 127]" % pitch, line)
        if not 0 <= velocity <= 127:
            raise NoteCsvError("velocity %d out of range [0, 127]" % velocity, line)
        if onset < 0 or duration < 0:
            raise NoteCsvError("negative onset or duration", line)
        notes.append(NoteEvent(onset, pitch, duration, velocity))
    return notes


def read_notes(path):
    """Parse a ``.mid``/``.midi`` or note ``.csv`` file."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return parse_note_csv(path.read_text())
    return parse_midi(path.read_bytes())


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple = ()

    def __len__(self):
        return len(self.entries)

    @property
    def paths(self):
        return [p for p, _ in self.entries]

    @property
    def labels(self):
        return [label for _, label in self.entries]

    @property
    def classes(self):
        return sorted(set(self.labels))

    def require_two_classes(self):
        if len(self.classes) != 2:
            raise ManifestError("exactly two classes required, found %d: %s"
                                % (len(self.classes), self.classes))
        return self.classes


def parse_manifest(text, base_dir=None):
    """``path,label`` CSV. Relative paths are resolved against ``base_dir``."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r and "".join(r).strip()]
    if not rows or [h.strip().lower() for h in rows[0]] != ["path", "label"]:
        raise ManifestError("manifest must start with header path,label")
    entries = []
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise ManifestError("line %d: expected path,label" % line)
        path, label = row[0].strip(), row[1].strip()
        if base_dir is not None and not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        entries.append((path, label))
    return DatasetManifest(tuple(entries))


def load_manifest(path):
    path = Path(path)
    return parse_manifest(path.read_text(), base_dir=str(path.parent))


# ---------------------------------------------------------------------------
# piano rolls
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PianoRoll:
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2:
            raise ValueError("piano roll must be a T x P matrix")
        if np.any(data < 0):
            raise ValueError("piano roll entries must be non-negative")
        object.__setattr__(self, "data", data)

    @property
    def frames(self):
        return self.data.shape[0]

    @property
    def pitches(self):
        return self.data.shape[1]


def _round_half_up(numerator, denominator):
    return (2 * numerator + denominator) // (2 * denominator)


def rasterize(notes, frames=1024, pitches=128, binary=True, span=None):
    """
    Piano roll of a note list.

    The tick interval ``[0, span]`` (by default the end of the last note) is
    mapped linearly onto ``frames`` frames; a note covers the frames between
    its rounded onset and rounded end, and at least one frame. Cells hold 1
    in binary mode, else the largest ``velocity / 127`` sounding there.
    """
    if frames < 1 or pitches < 1:
        raise ValueError("frames and pitches must be positive")
    roll = np.zeros((frames, pitches))
    notes = list(notes)
    if not notes:
        return PianoRoll(roll)
    if span is None:
        span = max(n.end for n in notes)
    span = max(int(span), 1)
    for n in notes:
        if n.pitch >= pitches:
            raise ValueError("pitch %d does not fit %d pitch rows" % (n.pitch, pitches))
        start = min(_round_half_up(n.onset * frames, span), frames - 1)
        stop = min(_round_half_up(n.end * frames, span), frames)
        if stop <= start:
            stop = start + 1
        value = 1.0 if binary else n.velocity / 127.0
        np.maximum(roll[start:stop, n.pitch], value, out=roll[start:stop, n.pitch])
    return PianoRoll(roll)


def save_roll(path, roll):
    data = np.asarray(getattr(roll, "data", roll), dtype="<f8")
    frames, pitches = data.shape
    with open(path, "wb") as fh:
        fh.write(ROLL_MAGIC + struct.pack("<III", ROLL_VERSION, frames, pitches))
        fh.write(np.ascontiguousarray(data).tobytes())


def load_roll(path):
    raw = Path(path).read_bytes()
    if raw[:4] != ROLL_MAGIC:
        raise RollFormatError("%s: not a piano-roll file" % path)
    version, frames, pitches = struct.unpack("<III", raw[4:16])
    if version != ROLL_VERSION:
        raise RollFormatError("%s: unsupported roll version %d" % (path, version))
    body = raw[16:]
    if len(body) != 8 * frames * pitches:
        raise RollFormatError("%s: expected %d values, found %d bytes"
                              % (path, frames * pitches, len(body)))
    data = np.frombuffer(body, dtype="<f8").reshape(frames, pitches)
    return PianoRoll(data.astype(float))
