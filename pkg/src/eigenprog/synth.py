"""
Synthetic two-class corpus: triadic pieces (arpeggiated and block major or
minor triads) against chromatic pieces (semitone runs and clusters).
"""

from __future__ import annotations

import os

import numpy as np

from .pianoroll import NoteEvent, write_midi

BEAT = 480


def triadic_piece(rng, beats=48):
    """Arpeggiated and block major or minor triads, roots moving by fourths,
    fifths and thirds."""
    notes = []
    tick = 0
    root = int(rng.integers(0, 12))
    while tick < beats * BEAT:
        third = 4 if rng.integers(0, 2) else 3
        base = 48 + root + 12 * int(rng.integers(0, 2))
        chord = [base, base + third, base + 7]
        step = BEAT // int(rng.choice([2, 4]))
        style = rng.integers(0, 3)
        if style == 2:
            for p in chord:
                notes.append(NoteEvent(tick, p, 2 * BEAT, int(rng.integers(60, 100))))
            tick += 2 * BEAT
        else:
            order = chord if style == 0 else chord[::-1]
            for k in range(6):
                notes.append(NoteEvent(tick, order[k % 3] + 12 * (k // 3), step,
                                       int(rng.integers(60, 100))))
                tick += step
        root = (root + int(rng.choice([5, 7, 9, 3, 8]))) % 12
    return notes


def chromatic_piece(rng, beats=48):
    """Semitone runs and three-note semitone clusters."""
    notes = []
    tick = 0
    while tick < beats * BEAT:
        start = int(rng.integers(48, 72))
        step = BEAT // int(rng.choice([2, 4]))
        if rng.integers(0, 3) == 0:
            for p in (start, start + 1, start + 2):
                notes.append(NoteEvent(tick, p, 2 * BEAT, int(rng.integers(60, 100))))
            tick += 2 * BEAT
        else:
            direction = 1 if rng.integers(0, 2) else -1
            for k in range(6):
                notes.append(NoteEvent(tick, start + direction * k, step,
                                       int(rng.integers(60, 100))))
                tick += step
    return notes


def make_corpus(directory, pieces=20, seed=0):
    """
    Write ``pieces`` MIDI files (half per class) and ``manifest.csv``.
    Returns the manifest path.
    """
    os.makedirs(directory, exist_ok=True)
    rng = np.random.default_rng(seed)
    lines = ["path,label"]
    for i in range(pieces):
        label = "triadic" if i % 2 == 0 else "chromatic"
        maker = triadic_piece if label == "triadic" else chromatic_piece
        notes = maker(rng, beats=int(rng.integers(32, 64)))
        name = "%s_%02d.mid" % (label, i)
        with open(os.path.join(directory, name), "wb") as fh:
            fh.write(write_midi(notes, fmt=int(i % 4 == 1)))
        lines.append("%s,%s" % (name, label))
    path = os.path.join(directory, "manifest.csv")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path
