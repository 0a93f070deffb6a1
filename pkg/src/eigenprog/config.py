"""Run configuration: ``key = value`` lines, ``#`` comments."""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import asdict, dataclass, field, fields

from .features import LEVELS
from .filterbank import FilterbankConfig


class ConfigError(ValueError):
    pass


def _bool(text):
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean, got %r" % text)


def _float(text):
    # accepts plain numbers and multiples of pi such as "2pi/3"
    t = text.strip().replace(" ", "")
    if "pi" in t:
        head, _, tail = t.partition("pi")
        scale = float(head) if head not in ("", "+", "-") else float(head + "1")
        if tail:
            if not tail.startswith("/"):
                raise ValueError("cannot parse %r" % text)
            scale /= float(tail[1:])
        return scale * math.pi
    return float(t)


def _gammas(text):
    return tuple(int(v) for v in text.replace(" ", "").split(",") if v)


_PARSERS = {
    "frames": int, "pitches": int, "pitch_pad": int, "j1_scales": int,
    "j2_scales": int, "j2_coupling": str.strip, "sigma": _float, "xi": _float,
    "gamma2_set": _gammas, "binary": _bool, "energy_fraction": _float,
    "svm_c": _float, "svm_tol": _float, "svm_max_iter": int,
    "ablation_level": str.strip, "paper_parity": _bool, "manifest": str.strip,
    "workdir": str.strip, "workers": int,
}


@dataclass(frozen=True)
class RunConfig:
    filterbank: FilterbankConfig = field(default_factory=FilterbankConfig)
    binary: bool = True
    energy_fraction: float = 0.5
    svm_c: float = 1e4
    svm_tol: float = 1e-4
    svm_max_iter: int = 10000
    ablation_level: str = "full"
    paper_parity: bool = False
    manifest: str | None = None
    workdir: str | None = None
    workers: int = 0

    def __post_init__(self):
        if not 0 < self.energy_fraction <= 1:
            raise ConfigError("energy_fraction must be in (0, 1]")
        if self.svm_c <= 0 or self.svm_tol <= 0 or self.svm_max_iter < 1:
            raise ConfigError("svm_c, svm_tol and svm_max_iter must be positive")
        if self.ablation_level not in LEVELS:
            raise ConfigError("ablation_level must be one of %s" % (LEVELS,))
        if self.workers < 0:
            raise ConfigError("workers must be >= 0 (0 means all CPUs)")

    @property
    def worker_count(self):
        return self.workers or os.cpu_count() or 1

    def as_dict(self):
        out = asdict(self)
        out["filterbank"] = self.filterbank.as_dict()
        out["filterbank"]["gamma2_set"] = list(self.filterbank.gamma2_set)
        return out


def parse_config(text, base_dir=None, **overrides):
    """
    Parse and validate a configuration. Keys are the filterbank fields plus
    the pipeline and path keys of :class:`RunConfig`; unknown keys and bad
    values raise :class:`ConfigError`. ``overrides`` (non-None values) win.
    """
    parser = configparser.ConfigParser(delimiters=("=",), comment_prefixes=("#",),
                                       inline_comment_prefixes=("#",),
                                       interpolation=None)
    try:
        parser.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    values = {}
    for key, raw in parser["run"].items():
        if key not in _PARSERS:
            raise ConfigError("unknown configuration key %r" % key)
        try:
            values[key] = _PARSERS[key](raw)
        except ValueError as exc:
            raise ConfigError("%s: %s" % (key, exc)) from None
    for key in ("manifest", "workdir"):
        if values.get(key) and base_dir and not os.path.isabs(values[key]):
            values[key] = os.path.join(base_dir, values[key])
    values.update({k: v for k, v in overrides.items() if v is not None})
    fb_names = {f.name for f in fields(FilterbankConfig)}
    fb_args = {k: v for k, v in values.items() if k in fb_names}
    run_args = {k: v for k, v in values.items() if k not in fb_names}
    try:
        return RunConfig(filterbank=FilterbankConfig(**fb_args), **run_args)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
