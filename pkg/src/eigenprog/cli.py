"""
Command-line pipeline: rasterize -> transform -> features -> crossval.

Each stage reads and writes files in a work directory and skips pieces whose
inputs (content hashes) and parameters are unchanged.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import features as feat
from . import selftest, svm
from .config import ConfigError, RunConfig, parse_config
from .pianoroll import (ManifestError, load_manifest, load_roll, rasterize,
                        read_notes, save_roll)
from .scattering import Transformer
from .synth import make_corpus


class PipelineError(RuntimeError):
    pass


def _sha256(*chunks):
    h = hashlib.sha256()
    for c in chunks:
        h.update(c if isinstance(c, bytes) else c.encode("utf-8"))
    return h.hexdigest()


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, ValueError):
        return None


def _write_json(path, obj):
    tmp = str(path) + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


class Workspace:
    """Layout of a work directory."""

    def __init__(self, root, manifest):
        self.root = Path(root)
        self.manifest = manifest
        self.rolls = self.root / "rolls"
        self.coeffs = self.root / "features"

    def piece_ids(self):
        return ["%03d_%s" % (i, Path(p).stem) for i, p in enumerate(self.manifest.paths)]

    def roll(self, pid):
        return self.rolls / (pid + ".eprl")

    def s1(self, pid):
        return self.coeffs / (pid + ".s1.csv")

    def s2(self, pid):
        return self.coeffs / (pid + ".s2.csv")

    def meta(self, pid):
        return self.coeffs / (pid + ".meta.json")

    def matrix(self, level):
        return self.root / ("features-%s.epfm" % level)

    def update_provenance(self, stage, data):
        path = self.root / "provenance.json"
        prov = _read_json(path) or {}
        prov.setdefault("stages", {})[stage] = data
        prov["versions"] = _versions()
        _write_json(path, prov)


def _versions():
    import scipy
    out = {"python": platform.python_version(), "numpy": np.__version__,
           "scipy": scipy.__version__}
    try:
        import numba
        out["numba"] = numba.__version__
    except ImportError:
        out["numba"] = None
    try:
        from importlib.metadata import version
        out["package"] = version("artifact")
    except Exception:
        out["package"] = None
    return out


# ---------------------------------------------------------------------------
# config and workspace setup
# ---------------------------------------------------------------------------

def load_run_config(args):
    text, base = "", None
    if args.config:
        text = Path(args.config).read_text()
        base = str(Path(args.config).resolve().parent)
    overrides = {
        "manifest": args.manifest, "workdir": args.workdir,
        "workers": args.workers, "energy_fraction": args.energy_fraction,
        "svm_c": args.svm_c, "ablation_level": args.ablation,
        "paper_parity": True if args.paper_parity else None,
    }
    config = parse_config(text, base_dir=base, **overrides)
    return config, text


def open_workspace(config, config_text):
    if not config.manifest:
        raise PipelineError("no manifest given (use --manifest or 'manifest =' in the config)")
    if not config.workdir:
        raise PipelineError("no work directory given (use --workdir or 'workdir =')")
    manifest = load_manifest(config.manifest)
    ws = Workspace(config.workdir, manifest)
    ws.root.mkdir(parents=True, exist_ok=True)
    (ws.root / "config.txt").write_text(config_text)
    _write_json(ws.root / "config.json", config.as_dict())
    return ws


def _pool_map(fn, jobs, workers, initializer=None, initargs=()):
    if workers <= 1 or len(jobs) <= 1:
        if initializer is not None:
            initializer(*initargs)
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs)),
                             initializer=initializer, initargs=initargs) as pool:
        return list(pool.map(fn, jobs))


# ---------------------------------------------------------------------------
# rasterize
# ---------------------------------------------------------------------------

def _rasterize_job(job):
    source, target, frames, pitches, binary = job
    sidecar = target + ".json"
    try:
        raw = Path(source).read_bytes()
        key = _sha256(raw, json.dumps([frames, pitches, binary]))
        previous = _read_json(sidecar)
        if previous and previous.get("key") == key and os.path.exists(target):
            return "skipped", None, previous
        notes = read_notes(source)
        roll = rasterize(notes, frames=frames, pitches=pitches, binary=binary)
        save_roll(target, roll)
        info = {"key": key, "source": source, "source_sha256": _sha256(raw),
                "roll_sha256": _sha256(Path(target).read_bytes()), "notes": len(notes)}
        _write_json(sidecar, info)
        return "ok", None, info
    except Exception as exc:
        return "failed", "%s: %s" % (source, exc), None


def cmd_rasterize(config, ws, out=print):
    ws.rolls.mkdir(parents=True, exist_ok=True)
    fb = config.filterbank
    jobs = [(p, str(ws.roll(pid)), fb.frames, fb.pitches, config.binary)
            for p, pid in zip(ws.manifest.paths, ws.piece_ids())]
    results = _pool_map(_rasterize_job, jobs, config.worker_count)
    counts = {"ok": 0, "skipped": 0, "failed": 0}
    for status, error, _ in results:
        counts[status] += 1
        if error:
            out("FAILED %s" % error)
    line = "%d ok, %d failed" % (counts["ok"], counts["failed"])
    if counts["skipped"]:
        line += ", %d skipped" % counts["skipped"]
    out("rasterize: " + line)
    ws.update_provenance("rasterize", {
        pid: r[2] for pid, r in zip(ws.piece_ids(), results) if r[2]})
    return 1 if counts["failed"] else 0


# ---------------------------------------------------------------------------
# transform
# ---------------------------------------------------------------------------

_TRANSFORMER = None


def _init_transformer(config_dict):
    global _TRANSFORMER
    from .filterbank import FilterbankConfig
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        _TRANSFORMER = Transformer(FilterbankConfig(**config_dict))


def _transform_job(job):
    pid, roll_path, s1_path, s2_path, meta_path, key = job
    try:
        roll = load_roll(roll_path)
        S1, S2 = _TRANSFORMER(roll)
        Path(s1_path).write_text(feat.write_coefficients(S1.paths, S1.values))
        Path(s2_path).write_text(feat.write_coefficients(S2.paths, S2.values))
        meta = dict(_TRANSFORMER.metadata())
        meta["key"] = key
        meta["s1_sha256"] = _sha256(Path(s1_path).read_bytes())
        meta["s2_sha256"] = _sha256(Path(s2_path).read_bytes())
        _write_json(meta_path, meta)
        return "ok", None
    except Exception as exc:
        return "failed", "%s: %s" % (pid, exc)


def _config_json(fb):
    d = fb.as_dict()
    d["gamma2_set"] = list(d["gamma2_set"])
    return json.dumps(d, sort_keys=True)


def cmd_transform(config, ws, out=print):
    ws.coeffs.mkdir(parents=True, exist_ok=True)
    fb = config.filterbank
    fb_json = _config_json(fb)
    jobs, skipped = [], 0
    for pid in ws.piece_ids():
        roll_path = ws.roll(pid)
        if not roll_path.exists():
            raise PipelineError("missing piano roll for %s: run `eigenprog rasterize` first"
                                % pid)
        roll = load_roll(roll_path)
        if roll.frames != fb.frames or roll.pitches not in (fb.pitches, fb.pitch_pad):
            raise PipelineError(
                "%s: roll is %dx%d but the config expects %d frames and %d (or %d) "
                "pitches" % (pid, roll.frames, roll.pitches, fb.frames, fb.pitches,
                             fb.pitch_pad))
        key = _sha256(roll_path.read_bytes(), fb_json)
        meta = _read_json(ws.meta(pid))
        if (meta and meta.get("key") == key and ws.s1(pid).exists()
                and ws.s2(pid).exists()):
            skipped += 1
            continue
        jobs.append((pid, str(roll_path), str(ws.s1(pid)), str(ws.s2(pid)),
                     str(ws.meta(pid)), key))
    start = time.perf_counter()
    results = _pool_map(_transform_job, jobs, config.worker_count,
                        _init_transformer, (json.loads(fb_json),))
    failed = [err for status, err in results if status == "failed"]
    for err in failed:
        out("FAILED %s" % err)
    line = "%d ok, %d failed" % (len(results) - len(failed), len(failed))
    if skipped:
        line += ", %d skipped" % skipped
    out("transform: %s (%.1fs)" % (line, time.perf_counter() - start))
    ws.update_provenance("transform", {
        pid: {k: (_read_json(ws.meta(pid)) or {}).get(k)
              for k in ("key", "s1_sha256", "s2_sha256")}
        for pid in ws.piece_ids()})
    return 1 if failed else 0


# ---------------------------------------------------------------------------
# features and cross-validation
# ---------------------------------------------------------------------------

def assemble_workspace(config, ws):
    level = config.ablation_level
    s1_rows, s2_rows, s1_paths, s2_paths, ref = [], [], None, None, None
    for pid in ws.piece_ids():
        meta = _read_json(ws.meta(pid))
        if meta is None or not ws.s1(pid).exists() or not ws.s2(pid).exists():
            raise PipelineError("missing features for %s: run `eigenprog transform` first"
                                % pid)
        if ref is None:
            ref = meta["config"]
        elif meta["config"] != ref:
            raise PipelineError("%s was transformed under a different configuration" % pid)
        paths1, v1 = feat.read_coefficients(ws.s1(pid).read_text())
        paths2, v2 = feat.read_coefficients(ws.s2(pid).read_text())
        if s1_paths is None:
            s1_paths, s2_paths = paths1, paths2
        s1_rows.append(v1)
        s2_rows.append(v2)
    X = feat.assemble(s1_rows, s2_rows, ws.manifest.labels, level,
                      s1_paths=s1_paths, s2_paths=s2_paths)
    feat.save(X, ws.matrix(level))
    return X


def cmd_features(config, ws, out=print):
    X = assemble_workspace(config, ws)
    out("features: level %s, %d pieces x %d dimensions -> %s"
        % (config.ablation_level, X.shape[0], X.shape[1], ws.matrix(config.ablation_level)))
    return 0


def cmd_crossval(config, ws, out=print):
    try:
        ws.manifest.require_two_classes()
    except ManifestError as exc:
        raise PipelineError(str(exc)) from None
    path = ws.matrix(config.ablation_level)
    if path.exists():
        X = feat.load(path)
        if X.labels != tuple(ws.manifest.labels):
            X = assemble_workspace(config, ws)
    else:
        X = assemble_workspace(config, ws)
    # shrinkage applies to the full transform only, as in the ablation table
    fraction = config.energy_fraction if config.ablation_level == "full" else None
    report = svm.loocv(X, C=config.svm_c, energy_fraction=fraction,
                       paper_parity=config.paper_parity, tol=config.svm_tol,
                       max_iter=config.svm_max_iter, workers=config.worker_count)
    report["level"] = config.ablation_level
    for fold in report["folds"]:
        fold["path"] = ws.manifest.paths[fold["index"]]
    # final model and selected features on the whole dataset
    keep, mean, std = svm._prepare(X.values, fraction)
    y, classes = svm.encode_labels(X.labels)
    model = svm.train((X.values[:, keep] - mean) / std, y, C=config.svm_c,
                      tol=config.svm_tol, max_iter=config.svm_max_iter)
    model = svm.LinearSvmModel(model.weights, model.bias, model.C, model.iterations,
                               model.max_violation, model.converged,
                               paths=tuple(X.paths[i] for i in keep), classes=classes)
    svm.save_model(model, ws.root / "model.epsv")
    (ws.root / "selected_features.txt").write_text(
        "".join("%d\t%s\n" % (i, X.paths[i]) for i in keep))
    report["selected_dim"] = int(keep.size)
    report["reference_accuracy_note"] = (
        "82.2% is the published figure on the 107-movement Haydn/Mozart corpus")
    _write_json(ws.root / "report.json", report)
    ws.update_provenance("crossval", {
        "features_sha256": _sha256(path.read_bytes()) if path.exists() else None,
        "report_sha256": _sha256((ws.root / "report.json").read_bytes()),
        "accuracy": report["accuracy"]})
    out("crossval: level %s, d=%d, selected %d, accuracy %.4f (%d/%d), %s, %d failed folds"
        % (config.ablation_level, report["dimension"], keep.size, report["accuracy"],
           round(report["accuracy"] * report["n"]), report["n"], report["mode"],
           report["failed_folds"]))
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--manifest", help="CSV of path,label")
    p.add_argument("--workdir", help="work directory for all outputs")
    p.add_argument("--workers", type=int, help="parallel jobs (0 = all CPUs)")
    p.add_argument("--ablation", choices=feat.LEVELS, help="feature level")
    p.add_argument("--paper-parity", action="store_true",
                   help="fit shrinkage and standardization once on all pieces")
    p.add_argument("--energy-fraction", type=float, help="shrinkage energy budget")
    p.add_argument("--svm-c", type=float, help="SVM penalty C")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="eigenprog",
        description="Eigentriad and eigenprogression scattering of symbolic music.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in [("rasterize", "MIDI/CSV notes to piano-roll files"),
                       ("transform", "piano rolls to S1/S2 coefficient files"),
                       ("features", "assemble the dataset feature matrix"),
                       ("crossval", "leave-one-out SVM evaluation"),
                       ("pipeline", "all stages in order")]:
        _add_common(sub.add_parser(name, help=text))
    st = sub.add_parser("selftest", help="run embedded property checks")
    st.add_argument("--quick", action="store_true", help="sub-second checks only")
    st.add_argument("--debug-corrupt-tonnetz", action="store_true",
                    help=argparse.SUPPRESS)
    syn = sub.add_parser("synth", help="write the synthetic two-class demo corpus")
    syn.add_argument("directory")
    syn.add_argument("--pieces", type=int, default=20)
    syn.add_argument("--seed", type=int, default=0)
    return parser


STAGES = {"rasterize": [cmd_rasterize], "transform": [cmd_transform],
          "features": [cmd_features], "crossval": [cmd_crossval],
          "pipeline": [cmd_rasterize, cmd_transform, cmd_features, cmd_crossval]}


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        return 0 if selftest.run(quick=args.quick,
                                 corrupt_tonnetz=args.debug_corrupt_tonnetz) else 1
    if args.command == "synth":
        path = make_corpus(args.directory, pieces=args.pieces, seed=args.seed)
        print("wrote %d pieces and %s" % (args.pieces, path))
        return 0
    try:
        config, text = load_run_config(args)
        ws = open_workspace(config, text)
        for stage in STAGES[args.command]:
            code = stage(config, ws)
            if code:
                return code
        return 0
    except (ConfigError, ManifestError, PipelineError, OSError, svm.TrainingError,
            feat.FeatureFileError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
