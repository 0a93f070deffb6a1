import io
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eigenprog.pianoroll import (ManifestError, MidiParseError, NoteCsvError,
                                 NoteEvent, PianoRoll, RollFormatError,
                                 load_manifest, load_roll, parse_manifest,
                                 parse_midi, parse_note_csv, rasterize,
                                 save_roll, write_midi)


def smf(tracks, fmt=0, division=480):
    out = b"MThd" + struct.pack(">IHHH", 6, fmt, len(tracks), division)
    for body in tracks:
        out += b"MTrk" + struct.pack(">I", len(body)) + body
    return out


END = b"\x00\xff\x2f\x00"

# delta 0 note-on C4 vel 100; delta 480 (0x83 0x60) note-off
SINGLE = smf([b"\x00\x90\x3c\x64" + b"\x83\x60\x80\x3c\x40" + END])


def test_single_note():
    assert parse_midi(SINGLE) == [NoteEvent(0, 60, 480, 100)]


def test_single_note_against_reference_reader():
    mido = pytest.importorskip("mido")
    mf = mido.MidiFile(file=io.BytesIO(SINGLE))
    tick, on = 0, {}
    for msg in mf.tracks[0]:
        tick += msg.time
        if msg.type == "note_on":
            on[msg.note] = tick
        elif msg.type == "note_off":
            assert (msg.note, on[msg.note], tick - on[msg.note]) == (60, 0, 480)


def test_empty_track():
    assert parse_midi(smf([END])) == []


def test_running_status_and_zero_velocity_off():
    body = b"\x00\x90\x3c\x50" + b"\x00\x40\x50" + b"\x60\x3c\x00" + b"\x10\x40\x00" + END
    assert parse_midi(smf([body])) == [NoteEvent(0, 60, 96, 80), NoteEvent(0, 64, 112, 80)]


def test_meta_and_sysex_are_skipped():
    body = (b"\x00\xff\x51\x03\x07\xa1\x20" + b"\x00\xf0\x03\x7e\x01\xf7"
            + b"\x00\x90\x3c\x40" + b"\x0a\x80\x3c\x00" + END)
    assert parse_midi(smf([body])) == [NoteEvent(0, 60, 10, 64)]


def test_fifo_matching_of_repeated_notes():
    body = (b"\x00\x90\x3c\x40" + b"\x05\x90\x3c\x41" + b"\x05\x80\x3c\x00"
            + b"\x05\x80\x3c\x00" + END)
    assert parse_midi(smf([body])) == [NoteEvent(0, 60, 10, 64), NoteEvent(5, 60, 10, 65)]


def test_unmatched_note_closed_at_track_end():
    body = b"\x00\x90\x3c\x40" + b"\x20\xff\x2f\x00"
    assert parse_midi(smf([body])) == [NoteEvent(0, 60, 32, 64)]


def test_format1_tracks_merge():
    t1 = b"\x00\xff\x51\x03\x07\xa1\x20" + END
    t2 = b"\x0a\x90\x40\x40\x0a\x80\x40\x00" + END
    t3 = b"\x00\x91\x30\x40\x30\x81\x30\x00" + END
    notes = parse_midi(smf([t1, t2, t3], fmt=1))
    assert notes == [NoteEvent(0, 48, 48, 64), NoteEvent(10, 64, 10, 64)]


@pytest.mark.parametrize("data,offset", [
    (b"MTrk" + b"\x00" * 20, 0),
    (smf([END], fmt=2), 8),
    (smf([b"\x00\x90\x3c"]), 24),
    (smf([b"\xff\xff\xff\xff\x7f"]), 22),
    (smf([b"\x80"]), 23),
])
def test_parse_errors_name_offset(data, offset):
    with pytest.raises(MidiParseError) as info:
        parse_midi(data)
    assert info.value.offset == offset
    assert "byte offset %d" % offset in str(info.value)


def test_format2_rejected():
    with pytest.raises(MidiParseError, match="format 2"):
        parse_midi(smf([END], fmt=2))


@st.composite
def note_lists(draw):
    notes = []
    for pitch in draw(st.lists(st.integers(0, 127), max_size=6, unique=True)):
        t = draw(st.integers(0, 100))
        for _ in range(draw(st.integers(1, 4))):
            dur = draw(st.integers(0, 500))
            notes.append(NoteEvent(t, pitch, dur, draw(st.integers(1, 127))))
            t += dur + draw(st.integers(1, 50))
    return notes


@given(note_lists(), st.sampled_from([0, 1]))
@settings(max_examples=60, deadline=None)
def test_round_trip(notes, fmt):
    assert parse_midi(write_midi(notes, fmt=fmt)) == sorted(
        notes, key=lambda n: (n.onset, n.pitch, n.duration, n.velocity))


@given(note_lists())
@settings(max_examples=20, deadline=None)
def test_writer_agrees_with_reference_reader(notes):
    mido = pytest.importorskip("mido")
    mf = mido.MidiFile(file=io.BytesIO(write_midi(notes)))
    tick, found, open_ = 0, [], {}
    for msg in mf.tracks[0]:
        tick += msg.time
        if msg.type == "note_on" and msg.velocity > 0:
            open_[msg.note] = (tick, msg.velocity)
        elif msg.type in ("note_on", "note_off"):
            start, vel = open_.pop(msg.note)
            found.append(NoteEvent(start, msg.note, tick - start, vel))
    assert sorted(found) == sorted(notes)


# -- note CSV ----------------------------------------------------------------

def test_csv_default_velocity():
    assert parse_note_csv("pitch,onset,duration\n60,0,480") == [NoteEvent(0, 60, 480, 64)]


def test_csv_header_only():
    assert parse_note_csv("pitch,onset,duration\n") == []


def test_csv_velocity_column():
    notes = parse_note_csv("pitch,onset,duration,velocity\n60,0,10,5\n62,3,1,127\n")
    assert notes == [NoteEvent(0, 60, 10, 5), NoteEvent(3, 62, 1, 127)]


@pytest.mark.parametrize("text,line", [
    ("pitch,onset,duration\n200,0,1", 2),
    ("pitch,onset,duration\n60,0,1\n60,x,1", 3),
    ("pitch,onset,duration\n60,-1,1", 2),
    ("pitch,onset\n60,0", 1),
])
def test_csv_errors_carry_line(text, line):
    with pytest.raises(NoteCsvError) as info:
        parse_note_csv(text)
    assert info.value.line == line


# -- rasterization -----------------------------------------------------------

def test_rasterize_single_note():
    roll = rasterize([NoteEvent(0, 60, 480)], frames=8)
    expected = np.zeros((8, 128))
    expected[:, 60] = 1
    assert np.array_equal(roll.data, expected)


def test_rasterize_two_notes():
    roll = rasterize([NoteEvent(0, 60, 480), NoteEvent(0, 64, 480)], frames=4)
    assert roll.data[:, [60, 64]].all() and roll.data.sum() == 8


def test_zero_duration_note_occupies_one_frame():
    notes = [NoteEvent(100, 60, 0), NoteEvent(0, 10, 800)]
    roll = rasterize(notes, frames=8)
    assert list(np.flatnonzero(roll.data[:, 60])) == [1]


def test_empty_notes_give_zero_roll():
    assert not rasterize([], frames=4, pitches=12).data.any()


def test_velocity_mode_takes_maximum():
    notes = [NoteEvent(0, 60, 10, 127), NoteEvent(0, 60, 5, 20)]
    roll = rasterize(notes, frames=2, binary=False)
    assert roll.data[0, 60] == 1.0 and roll.data[1, 60] == 1.0
    roll = rasterize([NoteEvent(0, 60, 10, 64)], frames=2, binary=False)
    assert roll.data[0, 60] == pytest.approx(64 / 127)


def test_rasterize_pitch_range_error():
    with pytest.raises(ValueError):
        rasterize([NoteEvent(0, 100, 1)], pitches=64)


notes_st = st.lists(st.builds(NoteEvent, onset=st.integers(0, 900), pitch=st.integers(0, 127),
                              duration=st.integers(0, 300), velocity=st.integers(0, 127)),
                    min_size=1, max_size=12)


@given(notes_st, st.builds(NoteEvent, onset=st.integers(0, 900), pitch=st.integers(0, 127),
                           duration=st.integers(0, 300), velocity=st.integers(0, 127)),
       st.booleans())
@settings(max_examples=80, deadline=None)
def test_monotone_for_fixed_span(notes, extra, binary):
    span = 1200
    a = rasterize(notes, frames=32, binary=binary, span=span).data
    b = rasterize(notes + [extra], frames=32, binary=binary, span=span).data
    assert np.all(b >= a)


@given(notes_st)
@settings(max_examples=50, deadline=None)
def test_binary_entries(notes):
    data = rasterize(notes, frames=16).data
    assert set(np.unique(data)) <= {0.0, 1.0}
    assert data.sum() >= 1


def test_piano_roll_validation():
    with pytest.raises(ValueError):
        PianoRoll(-np.ones((2, 2)))
    with pytest.raises(ValueError):
        PianoRoll(np.ones(3))


def test_roll_file_round_trip(tmp_path):
    data = np.random.default_rng(0).random((16, 12))
    path = tmp_path / "x.eprl"
    save_roll(path, PianoRoll(data))
    raw = path.read_bytes()
    assert raw[:4] == b"EPRL" and struct.unpack("<III", raw[4:16]) == (1, 16, 12)
    assert np.frombuffer(raw[16:24], "<f8")[0] == data[0, 0]
    assert np.array_equal(load_roll(path).data, data)
    path.write_bytes(raw[:-8])
    with pytest.raises(RollFormatError):
        load_roll(path)


# -- manifests ---------------------------------------------------------------

def test_manifest():
    m = parse_manifest("path,label\na.mid,haydn\nb.mid,mozart")
    assert len(m) == 2 and set(m.labels) == {"haydn", "mozart"}
    assert m.require_two_classes() == ["haydn", "mozart"]


def test_manifest_class_count_errors():
    with pytest.raises(ManifestError, match="exactly two classes required"):
        parse_manifest("path,label\na.mid,haydn\nb.mid,haydn").require_two_classes()
    empty = parse_manifest("path,label\n")
    assert len(empty) == 0
    with pytest.raises(ManifestError, match="exactly two classes required"):
        empty.require_two_classes()


def test_manifest_paths_relative_to_file(tmp_path):
    (tmp_path / "m.csv").write_text("path,label\nsub/a.mid,x\n/abs/b.mid,y\n")
    m = load_manifest(tmp_path / "m.csv")
    assert m.paths == [str(tmp_path / "sub/a.mid"), "/abs/b.mid"]
