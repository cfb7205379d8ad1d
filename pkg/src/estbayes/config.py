"""Run configuration: INI files layered over the shipped defaults.

The defaults live in ``data/defaults.ini``. A user file may hold any subset
of its sections and keys; ``--set section.key=value`` overrides win over
both. Unknown sections or keys are rejected so that typos fail loudly.
"""

from __future__ import annotations

import configparser
import io
import math
import platform
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .bath import BathConfig
from .controller import Environment, HeraldConfig, ProbeConfig, TimingModel
from .estimator import FixedPointConfig, FrequencyGrid, LikelihoodParams
from .readout import ReadoutConfig
from .spin_model import SpinOutcomeModel

MAX_SEED = 2**64 - 1


class ConfigError(ValueError):
    """Malformed configuration file, override or value."""


def defaults_text() -> str:
    return resources.files("estbayes").joinpath("data/defaults.ini").read_text()


def _parser() -> configparser.ConfigParser:
    return configparser.ConfigParser(interpolation=None, inline_comment_prefixes=None)


def _merge(base: configparser.ConfigParser, extra: configparser.ConfigParser, origin: str) -> None:
    for section in extra.sections():
        if section == "versions":
            continue  # informational block written into manifests
        if not base.has_section(section):
            raise ConfigError(f"{origin}: unknown section [{section}]")
        for key, value in extra.items(section, raw=True):
            if not base.has_option(section, key):
                raise ConfigError(f"{origin}: unknown key {section}.{key}")
            base.set(section, key, value)


def parse_override(text: str) -> tuple[str, str, str]:
    """Split ``section.key=value``; the section may itself contain dashes."""
    name, sep, value = text.partition("=")
    section, dot, key = name.strip().rpartition(".")
    if not sep or not dot or not section or not key:
        raise ConfigError(f"override {text!r} is not of the form section.key=value")
    return section, key, value.strip()


def load_config(path=None, overrides=()) -> configparser.ConfigParser:
    """Defaults, then ``path``, then overrides."""
    cp = _parser()
    cp.read_string(defaults_text())
    if path is not None:
        user = _parser()
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            user.read_string(text, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
        _merge(cp, user, str(path))
    for item in overrides:
        section, key, value = parse_override(item)
        if not cp.has_option(section, key):
            raise ConfigError(f"unknown key {section}.{key}")
        cp.set(section, key, value)
    return cp


@dataclass
class RunConfig:
    """Resolved configuration for one experiment run."""

    experiment: str
    seed: int
    parser: configparser.ConfigParser
    out_dir: Path | None = None

    @classmethod
    def build(cls, experiment: str, path=None, overrides=(), seed: int | None = None, out_dir=None) -> RunConfig:
        cp = load_config(path, overrides)
        if seed is not None:
            cp.set("run", "seed", str(seed))
        cfg = cls(experiment, 0, cp, None if out_dir is None else Path(out_dir))
        cfg.seed = cfg.get_int("run", "seed")
        if not 0 <= cfg.seed <= MAX_SEED:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        cfg.validate()
        return cfg

    # --- typed getters -----------------------------------------------------

    def raw(self, section: str, key: str) -> str:
        try:
            return self.parser.get(section, key).strip()
        except (configparser.NoSectionError, configparser.NoOptionError) as exc:
            raise ConfigError(str(exc)) from exc

    def get_float(self, section: str, key: str) -> float:
        text = self.raw(section, key)
        try:
            value = float(text)
        except ValueError as exc:
            raise ConfigError(f"{section}.{key}: expected a number, got {text!r}") from exc
        if math.isnan(value):
            raise ConfigError(f"{section}.{key}: NaN is not allowed")
        return value

    def get_int(self, section: str, key: str) -> int:
        text = self.raw(section, key)
        try:
            return int(text)
        except ValueError as exc:
            raise ConfigError(f"{section}.{key}: expected an integer, got {text!r}") from exc

    def get_bool(self, section: str, key: str) -> bool:
        try:
            return self.parser.getboolean(section, key)
        except ValueError as exc:
            raise ConfigError(f"{section}.{key}: expected true/false") from exc

    def get_auto(self, section: str, key: str) -> float | None:
        return None if self.raw(section, key).lower() == "auto" else self.get_float(section, key)

    def get_list(self, section: str, key: str, kind=float) -> list:
        text = self.raw(section, key)
        try:
            values = [kind(v) for v in text.replace(",", " ").split()]
        except ValueError as exc:
            raise ConfigError(f"{section}.{key}: bad list {text!r}") from exc
        if not values:
            raise ConfigError(f"{section}.{key}: empty list")
        return values

    def get_str(self, section: str, key: str) -> str:
        return self.raw(section, key)

    # --- module configs ----------------------------------------------------

    def grid(self) -> FrequencyGrid:
        return FrequencyGrid(
            self.get_int("grid", "n_bins"), self.get_float("grid", "f_min"), self.get_float("grid", "f_max")
        )

    def bath(self) -> BathConfig:
        base = BathConfig(
            diffusivity=self.get_float("bath", "diffusivity"),
            mean=self.get_float("bath", "mean"),
            bounds=(self.get_float("bath", "lower"), self.get_float("bath", "upper")),
        )
        rate = self.get_auto("bath", "reversion_rate")
        if rate is None:
            return base.with_stationary_sigma(self.sigma_ensemble())
        return BathConfig(base.diffusivity, base.mean, rate, base.bounds)

    def sigma_ensemble(self) -> float:
        return self.get_float("bath", "sigma_ensemble")

    def readout(self) -> ReadoutConfig:
        f = lambda k: self.get_float("readout", k)  # noqa: E731
        return ReadoutConfig(
            t_meas=f("t_meas"),
            t_int=f("t_int"),
            sample_period=f("sample_period"),
            tunnel_out_rate=f("tunnel_out_rate"),
            tunnel_in_rate=f("tunnel_in_rate"),
            snr_at_tint=f("snr"),
            threshold=f("threshold"),
            spurious_rate=f("spurious_rate"),
        )

    def readout_mode(self) -> str:
        mode = self.get_str("readout", "mode")
        if mode not in ("analytic", "trace"):
            raise ConfigError("readout.mode must be 'analytic' or 'trace'")
        return mode

    def model(self) -> SpinOutcomeModel:
        f = lambda k: self.get_float("model", k)  # noqa: E731
        beta_t = f("beta_t")
        return SpinOutcomeModel(
            beta_s=1.0 - beta_t, beta_t=beta_t, alpha_s=f("alpha_s"), gamma=f("gamma"), e_t=f("e_t"), e_n=f("e_n")
        )

    def probe(self) -> ProbeConfig:
        beta = self.get_auto("probe", "beta")
        likelihood = None if beta is None else LikelihoodParams(self.get_float("probe", "alpha"), beta)
        return ProbeConfig(self.get_int("probe", "n_shots"), self.get_float("probe", "tau_step"), likelihood)

    def herald(self) -> HeraldConfig:
        return HeraldConfig(
            self.get_float("herald", "target"), self.get_float("herald", "tolerance"), self.get_int("herald", "op_shots")
        )

    def timing(self) -> TimingModel:
        return TimingModel(
            t_meas=self.get_float("readout", "t_meas"),
            t_calc=self.get_float("timing", "t_calc"),
            t_init_check=self.get_float("timing", "t_init_check"),
            probe_period=self.get_float("timing", "probe_period"),
            op_period=self.get_float("timing", "op_period"),
            pipelined_calc=self.get_bool("timing", "pipelined_calc"),
        )

    def fixed_point(self) -> FixedPointConfig | None:
        if not self.get_bool("fixed_point", "enabled"):
            return None
        return self.fixed_point_config()

    def fixed_point_config(self) -> FixedPointConfig:
        trigger = self.get_auto("fixed_point", "renorm_trigger")
        return FixedPointConfig(
            lut_bits=self.get_int("fixed_point", "lut_bits"),
            accumulator_bits=self.get_int("fixed_point", "accumulator_bits"),
            renorm_trigger=None if trigger is None else int(trigger),
        )

    def environment(self, **overrides) -> Environment:
        kwargs = dict(
            bath=self.bath(),
            readout=self.readout(),
            model=self.model(),
            grid=self.grid(),
            timing=self.timing(),
            init_success_prob=self.get_float("controller", "init_success_prob"),
            init_attempt_cap=self.get_int("controller", "init_attempt_cap"),
            readout_mode=self.readout_mode(),
            leakage=self.get_float("controller", "leakage"),
            sigma_ensemble=self.sigma_ensemble(),
            fixed_point=self.fixed_point(),
        )
        kwargs.update(overrides)
        return Environment(**kwargs)

    def validate(self) -> None:
        """Build every module config once so bad values surface as
        ConfigError before any work starts."""
        try:
            self.environment()
            self.probe()
            self.herald()
            self.fixed_point_config()
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc

    # --- manifest ----------------------------------------------------------

    def manifest_text(self) -> str:
        """Resolved configuration plus versions, in the same INI format."""
        cp = _parser()
        cp.read_dict({s: dict(self.parser.items(s, raw=True)) for s in self.parser.sections()})
        cp.set("run", "seed", str(self.seed))
        cp["versions"] = {
            "estbayes": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        }
        buf = io.StringIO()
        buf.write(f"# manifest for experiment {self.experiment}\n")
        cp.write(buf)
        return buf.getvalue()
