"""TOML experiment configuration: loading, validation, presets."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

from .potential import PiecewisePotential1D, ReLUNetPotential, SelectionRule, example_potential

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "build_potential", "parse_init"]

POTENTIAL_PRESETS = {"paper_example": example_potential}


class ConfigError(ValueError):
    """Invalid configuration; maps to CLI exit code 2."""


def _check_keys(table: dict, allowed: set, where: str):
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in [{where}]: {', '.join(sorted(unknown))}")


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return _toml.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except _toml.TOMLDecodeError as exc:
        # tomli reports "... (at line L, column C)" in the message
        raise ConfigError(f"config parse error in {path}: {exc}") from None


def build_potential(spec) -> PiecewisePotential1D | ReLUNetPotential:
    """Resolve a potential from a preset name or an inline table."""
    if isinstance(spec, str):
        if spec not in POTENTIAL_PRESETS:
            raise ConfigError(f"unknown potential preset {spec!r}; available: {sorted(POTENTIAL_PRESETS)}")
        return POTENTIAL_PRESETS[spec]()
    if not isinstance(spec, dict):
        raise ConfigError("potential must be a preset name or a table")
    if "preset" in spec:
        _check_keys(spec, {"preset"}, "potential")
        return build_potential(spec["preset"])
    if "widths" in spec:
        _check_keys(spec, {"widths", "lambda", "relu_slope_at_zero", "data"}, "potential")
        if "data" not in spec:
            raise ConfigError("relu potential needs a 'data' CSV path")
        try:
            return ReLUNetPotential.from_csv(
                spec["data"],
                spec["widths"],
                lam=spec.get("lambda", 0.0),
                relu_slope_at_zero=spec.get("relu_slope_at_zero", 0.0),
            )
        except (ValueError, OSError) as exc:
            raise ConfigError(f"bad relu potential: {exc}") from None
    _check_keys(spec, {"breakpoints", "pieces"}, "potential")
    try:
        return PiecewisePotential1D.from_dict(spec)
    except ValueError as exc:
        raise ConfigError(f"bad potential table: {exc}") from None


_SAMPLER_KEYS = {
    "kind", "epsilon", "sigma", "steps", "burn_in", "thin", "seed",
    "selection", "proposal_std", "init",
}
_FP_KEYS = {"domain", "n_cells", "tol", "sigma", "times", "dt", "init"}
_JKO_KEYS = {"h", "steps", "m", "sigma", "init", "times", "domain", "n_cells"}
_GIBBS_KEYS = {"domain", "sigma", "n_points"}


@dataclass
class ExperimentConfig:
    """Validated view of the TOML config with defaults filled in."""

    potential: object = field(default_factory=example_potential)
    potential_spec: object = "paper_example"
    sampler: dict = field(default_factory=dict)
    fp: dict = field(default_factory=dict)
    jko: dict = field(default_factory=dict)
    gibbs: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        _check_keys(raw, {"potential", "sampler", "fp", "jko", "gibbs"}, "config")
        spec = raw.get("potential", "paper_example")
        cfg = cls(potential=build_potential(spec), potential_spec=spec)

        sampler = dict(raw.get("sampler", {}))
        _check_keys(sampler, _SAMPLER_KEYS, "sampler")
        if "selection" in sampler:
            try:
                sampler["selection"] = SelectionRule.from_name(sampler["selection"])
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if sampler.get("kind", "ula") not in ("ula", "rwm", "mala"):
            raise ConfigError(f"unknown sampler kind {sampler.get('kind')!r}")
        cfg.sampler = sampler

        fp = dict(raw.get("fp", {}))
        _check_keys(fp, _FP_KEYS, "fp")
        cfg.fp = fp

        jko = dict(raw.get("jko", {}))
        _check_keys(jko, _JKO_KEYS, "jko")
        if "init" in jko:
            parse_init(jko["init"])  # fail fast
        cfg.jko = jko

        gibbs = dict(raw.get("gibbs", {}))
        _check_keys(gibbs, _GIBBS_KEYS, "gibbs")
        cfg.gibbs = gibbs
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_dict(load_config(path))


def parse_init(spec):
    """Initial-law presets for JKO: gaussian(mean, std) or uniform(a, b)."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("jko init must be a table with a 'kind' key")
    kind = spec["kind"]
    if kind == "gaussian":
        _check_keys(spec, {"kind", "mean", "std"}, "jko.init")
        return ("gaussian", float(spec.get("mean", 0.0)), float(spec.get("std", 1.0)))
    if kind == "uniform":
        _check_keys(spec, {"kind", "a", "b"}, "jko.init")
        a, b = float(spec.get("a", -1.0)), float(spec.get("b", 1.0))
        if a >= b:
            raise ConfigError("jko init uniform needs a < b")
        return ("uniform", a, b)
    raise ConfigError(f"unknown jko init kind {kind!r}; use 'gaussian' or 'uniform'")
