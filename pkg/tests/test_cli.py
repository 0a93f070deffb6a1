import json
import os

import numpy as np
import pytest

from eigenprog import features as feat
from eigenprog.cli import main
from eigenprog.config import ConfigError, parse_config
from eigenprog.pianoroll import NoteEvent, load_roll, write_midi
from eigenprog.synth import chromatic_piece, make_corpus, triadic_piece

SMALL = """
# small but complete configuration
frames = 256
pitches = 96
pitch_pad = 96
j1_scales = 8
j2_scales = 8
xi = 2pi/3
workers = 1
"""


# -- config ------------------------------------------------------------------

def test_config_defaults_and_values():
    c = parse_config(SMALL)
    assert c.filterbank.frames == 256 and c.filterbank.xi == pytest.approx(2 * np.pi / 3)
    assert c.energy_fraction == 0.5 and c.svm_c == 1e4 and c.ablation_level == "full"
    assert not c.paper_parity and c.workers == 1
    c = parse_config("gamma2_set = 1, -1\npaper_parity = yes", svm_c=10.0)
    assert c.filterbank.gamma2_set == (-1, 1) and c.paper_parity and c.svm_c == 10.0


@pytest.mark.parametrize("text", [
    "frame = 256", "frames = abc", "pitch_pad = 130", "energy_fraction = 1.5",
    "ablation_level = a2", "paper_parity = maybe", "frames 256",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_config_relative_paths():
    c = parse_config("manifest = m.csv\nworkdir = /w", base_dir="/cfg")
    assert c.manifest == "/cfg/m.csv" and c.workdir == "/w"


# -- stages ------------------------------------------------------------------

@pytest.fixture()
def two_pieces(tmp_path):
    (tmp_path / "a.mid").write_bytes(write_midi([NoteEvent(0, 60, 480)]))
    (tmp_path / "b.csv").write_text("pitch,onset,duration\n64,0,480\n67,240,240\n")
    (tmp_path / "m.csv").write_text("path,label\na.mid,x\nb.csv,y\n")
    (tmp_path / "run.cfg").write_text(SMALL)
    return tmp_path


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out + captured.err


def test_rasterize_and_skip(two_pieces, capsys):
    args = ["rasterize", "--config", str(two_pieces / "run.cfg"),
            "--manifest", str(two_pieces / "m.csv"), "--workdir", str(two_pieces / "w")]
    code, out = run(capsys, *args)
    assert code == 0 and "2 ok, 0 failed" in out
    rolls = sorted(os.listdir(two_pieces / "w" / "rolls"))
    assert [r for r in rolls if r.endswith(".eprl")] == ["000_a.eprl", "001_b.eprl"]
    assert load_roll(two_pieces / "w/rolls/000_a.eprl").data.shape == (256, 96)
    code, out = run(capsys, *args)
    assert code == 0 and "2 skipped" in out
    assert (two_pieces / "w" / "config.txt").read_text() == SMALL
    prov = json.loads((two_pieces / "w" / "provenance.json").read_text())
    assert "numpy" in prov["versions"] and "rasterize" in prov["stages"]


def test_rasterize_unreadable(two_pieces, capsys):
    (two_pieces / "m.csv").write_text("path,label\na.mid,x\nmissing.mid,y\n")
    code, out = run(capsys, "rasterize", "--config", str(two_pieces / "run.cfg"),
                    "--manifest", str(two_pieces / "m.csv"),
                    "--workdir", str(two_pieces / "w"))
    assert code == 1 and "missing.mid" in out and "1 failed" in out


def test_transform_outputs(two_pieces, capsys):
    base = ["--config", str(two_pieces / "run.cfg"), "--manifest",
            str(two_pieces / "m.csv"), "--workdir", str(two_pieces / "w")]
    code, out = run(capsys, "transform", *base)
    assert code == 1 and "eigenprog rasterize" in out
    assert run(capsys, "rasterize", *base)[0] == 0
    code, out = run(capsys, "transform", *base)
    assert code == 0 and "2 ok" in out
    paths, s1 = feat.read_coefficients((two_pieces / "w/features/000_a.s1.csv").read_text())
    assert len(s1) == 24 and paths[0] == (0, -1)
    meta = json.loads((two_pieces / "w/features/000_a.meta.json").read_text())
    assert meta["beta2_count"] == 14 and meta["s2_dim"] == 3528
    code, out = run(capsys, "transform", *base)
    assert "2 skipped" in out


def test_transform_silent_and_mismatch(tmp_path, capsys):
    (tmp_path / "s.csv").write_text("pitch,onset,duration\n")
    (tmp_path / "m.csv").write_text("path,label\ns.csv,x\n")
    (tmp_path / "run.cfg").write_text(SMALL)
    base = ["--config", str(tmp_path / "run.cfg"), "--manifest", str(tmp_path / "m.csv"),
            "--workdir", str(tmp_path / "w")]
    assert run(capsys, "rasterize", *base)[0] == 0
    assert run(capsys, "transform", *base)[0] == 0
    _, s1 = feat.read_coefficients((tmp_path / "w/features/000_s.s1.csv").read_text())
    _, s2 = feat.read_coefficients((tmp_path / "w/features/000_s.s2.csv").read_text())
    assert not s1.any() and not s2.any()
    (tmp_path / "other.cfg").write_text(SMALL.replace("pitch_pad = 96", "pitch_pad = 108")
                                        .replace("pitches = 96", "pitches = 100"))
    base[1] = str(tmp_path / "other.cfg")
    code, out = run(capsys, "transform", *base)
    assert code == 1 and "pitches" in out


@pytest.fixture(scope="module")
def toy_workdir(tmp_path_factory):
    # Each class holds transpositions of one motif. Transposition leaves the
    # features unchanged, so each class collapses to a single point and any
    # two distinct points are separable.
    root = tmp_path_factory.mktemp("toy")
    motifs = {"tri": triadic_piece(np.random.default_rng(1), beats=24),
              "chrom": chromatic_piece(np.random.default_rng(2), beats=24)}
    lines = ["path,label"]
    for i in range(6):
        label = "tri" if i % 2 else "chrom"
        notes = [NoteEvent(n.onset, n.pitch + i, n.duration, n.velocity)
                 for n in motifs[label]]
        (root / ("p%d.mid" % i)).write_bytes(write_midi(notes))
        lines.append("p%d.mid,%s" % (i, label))
    (root / "m.csv").write_text("\n".join(lines) + "\n")
    (root / "run.cfg").write_text(SMALL)
    base = ["--config", str(root / "run.cfg"), "--manifest", str(root / "m.csv"),
            "--workdir", str(root / "w")]
    assert main(["rasterize", *base]) == 0
    assert main(["transform", *base]) == 0
    return base, root


def test_crossval_toy(toy_workdir, capsys):
    base, root = toy_workdir
    code, out = run(capsys, "crossval", *base)
    assert code == 0
    report = json.loads((root / "w/report.json").read_text())
    assert report["accuracy"] == 1.0 and report["n"] == 6 and report["dimension"] == 3528
    assert (root / "w/model.epsv").read_bytes()[:4] == b"EPSV"
    assert (root / "w/selected_features.txt").read_text().count("\n") == report["selected_dim"]


def test_crossval_ablation_a1(toy_workdir, capsys):
    base, root = toy_workdir
    code, _ = run(capsys, "crossval", "--ablation", "a1", *base)
    assert code == 0
    report = json.loads((root / "w/report.json").read_text())
    assert report["dimension"] == 8 and report["level"] == "a1"


def test_features_command_and_parity(toy_workdir, capsys):
    base, root = toy_workdir
    code, out = run(capsys, "features", "--ablation", "a1b1a2", *base)
    assert code == 0 and "6 pieces x 84" in out
    code, _ = run(capsys, "crossval", "--paper-parity", "--energy-fraction", "0.9", *base)
    report = json.loads((root / "w/report.json").read_text())
    assert code == 0 and report["mode"] == "paper-parity"


def test_crossval_missing_features(two_pieces, capsys):
    base = ["--config", str(two_pieces / "run.cfg"), "--manifest",
            str(two_pieces / "m.csv"), "--workdir", str(two_pieces / "w")]
    code, out = run(capsys, "crossval", *base)
    assert code == 1 and "eigenprog transform" in out


def test_crossval_single_class(two_pieces, capsys):
    (two_pieces / "m.csv").write_text("path,label\na.mid,x\nb.csv,x\n")
    code, out = run(capsys, "crossval", "--config", str(two_pieces / "run.cfg"),
                    "--manifest", str(two_pieces / "m.csv"),
                    "--workdir", str(two_pieces / "w"))
    assert code == 1 and "exactly two classes required" in out


def test_selftest_command(capsys):
    code, out = run(capsys, "selftest", "--quick")
    assert code == 0 and "tonnetz eigen-residuals" in out and "invariance" not in out
    code, out = run(capsys, "selftest", "--quick", "--debug-corrupt-tonnetz")
    assert code == 1 and "FAIL" in out


def test_selftest_full(capsys):
    code, out = run(capsys, "selftest")
    assert code == 0 and "9/9 checks passed" in out


def test_synth_command(tmp_path, capsys):
    code, _ = run(capsys, "synth", str(tmp_path / "c"), "--pieces", "4")
    assert code == 0
    text = (tmp_path / "c" / "manifest.csv").read_text().splitlines()
    assert len(text) == 5 and {l.split(",")[1] for l in text[1:]} == {"triadic", "chromatic"}


def test_corpus_is_reproducible(tmp_path):
    make_corpus(tmp_path / "a", pieces=4, seed=3)
    make_corpus(tmp_path / "b", pieces=4, seed=3)
    for name in os.listdir(tmp_path / "a"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
