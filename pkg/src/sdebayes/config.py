"""INI study configs: parsing, validation and stable hashing.

A config file has sections [study], [data], [model], [prior], [mc]; every
key is validated against the schema below, and unknown keys are rejected by
name so typos fail fast.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from pathlib import Path as FsPath

from .errors import InvalidArgumentError
from .selection import STUDY_KINDS, StudyConfig, default_config

# section -> key -> (type, StudyConfig field or None for non-study keys)
_SCHEMA: dict[str, dict[str, tuple]] = {
    "study": {
        "kind": (str, "kind"),
        "seed": (int, "base_seed"),
    },
    "data": {
        "n_individuals": (int, "n_individuals"),
        "horizon": (float, "horizon"),
        "n_steps": (int, "n_steps"),
        "x0": (float, "x0"),
        "p": (int, "p"),
        "sigma0": (float, "sigma0"),
        "sigma_step": (float, "sigma_step"),
        "prices": (str, None),
        "covariates": (str, None),
        "dt": (float, None),
    },
    "model": {
        "mu_sd": (float, "mu_sd"),
        "xi_jitter_sd": (float, "xi_jitter_sd"),
        "covariate_coef_sd": (float, "covariate_coef_sd"),
        "theta0_override": (str, None),
        "drift0": (str, None),
        "theta0": (str, None),
        "drift1": (str, None),
        "mask1": (str, None),
    },
    "prior": {
        "sd_fixed": (float, "prior_sd_fixed"),
        "sd_marginal": (float, "prior_sd_marginal"),
        "sd": (float, None),
    },
    "mc": {
        "m_draws": (int, "m_draws"),
        "replications": (int, "replications"),
        "n_alternatives": (int, "n_alternatives"),
        "n_paths": (int, None),
        "anneal_max_evals": (int, "anneal_max_evals"),
        "anneal_iters_per_temp": (int, "anneal_iters_per_temp"),
        "anneal_cooling": (float, "anneal_cooling"),
        "anneal_proposal_scale": (float, "anneal_proposal_scale"),
        "grid_min": (str, None),
        "grid_max": (str, None),
        "grid_points": (str, None),
    },
}

COMMAND_KINDS = tuple(STUDY_KINDS) + ("simulate", "kl", "market")


def parse_config_text(text: str) -> dict[str, dict[str, str]]:
    """Parse and validate INI text into a {section: {key: raw value}} dict."""
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise InvalidArgumentError(f"config parse error: {exc}") from None
    sections: dict[str, dict[str, str]] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise InvalidArgumentError(f"unknown config section [{section}]")
        sections[section] = {}
        for key, value in parser.items(section):
            if key not in _SCHEMA[section]:
                raise InvalidArgumentError(
                    f"unknown config key '{key}' in section [{section}]"
                )
            sections[section][key] = value
    if "study" not in sections or "kind" not in sections["study"]:
        raise InvalidArgumentError("config must set kind in [study]")
    kind = sections["study"]["kind"]
    if kind not in COMMAND_KINDS:
        raise InvalidArgumentError(f"unknown study kind {kind!r}")
    return sections


def load_config_file(path: FsPath | str) -> dict[str, dict[str, str]]:
    return parse_config_text(FsPath(path).read_text())


def _convert(section: str, key: str, raw: str):
    typ, _ = _SCHEMA[section][key]
    try:
        return typ(raw)
    except ValueError:
        raise InvalidArgumentError(
            f"config key '{key}' in [{section}]: cannot parse {raw!r} as {typ.__name__}"
        ) from None


def typed_values(sections: dict[str, dict[str, str]]) -> dict[str, dict]:
    """Values converted per the schema, for hashing and request building."""
    return {
        section: {key: _convert(section, key, raw) for key, raw in keys.items()}
        for section, keys in sections.items()
    }


def config_hash(sections: dict[str, dict[str, str]]) -> str:
    """Stable SHA-256 over the canonical JSON of the typed config."""
    canon = json.dumps(typed_values(sections), sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()


def parse_float_list(raw: str) -> list[float]:
    return [float(v) for v in raw.replace(",", " ").split()]


def parse_int_list(raw: str) -> list[int]:
    return [int(v) for v in raw.replace(",", " ").split()]


def overrides_dict(sections: dict[str, dict[str, str]]) -> dict:
    """StudyConfig field overrides present in the config (minus kind and seed)."""
    values = typed_values(sections)
    overrides = {}
    for section, keys in values.items():
        for key, value in keys.items():
            field = _SCHEMA[section][key][1]
            if field and field not in ("kind", "base_seed"):
                overrides[field] = value
    if "theta0_override" in sections.get("model", {}):
        overrides["theta0_override"] = list(
            parse_float_list(sections["model"]["theta0_override"])
        )
    return overrides


def study_config_from_sections(
    sections: dict[str, dict[str, str]], seed_override: int | None = None
) -> StudyConfig:
    """Build a StudyConfig from validated sections, applying kind defaults."""
    values = typed_values(sections)
    kind = values["study"]["kind"]
    if kind not in STUDY_KINDS:
        raise InvalidArgumentError(f"[study] kind {kind!r} is not a selection study")
    overrides = overrides_dict(sections)
    if "theta0_override" in overrides:
        overrides["theta0_override"] = tuple(overrides["theta0_override"])
    seed = values["study"].get("seed", 0)
    if seed_override is not None:
        seed = seed_override
    return default_config(kind, base_seed=seed, **overrides)
