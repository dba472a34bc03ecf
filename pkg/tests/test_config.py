import json

import pytest

from sdebayes.config import (
    config_hash,
    load_config_file,
    overrides_dict,
    parse_config_text,
    study_config_from_sections,
)
from sdebayes.errors import InvalidArgumentError
from sdebayes.manifest import ManifestTimer, RunManifest

GOOD = """
[study]
kind = case1
seed = 7

[data]
n_individuals = 5
n_steps = 200

[mc]
m_draws = 1000
"""


class TestConfigParsing:
    def test_roundtrip(self):
        sections = parse_config_text(GOOD)
        cfg = study_config_from_sections(sections)
        assert cfg.kind == "case1"
        assert cfg.base_seed == 7
        assert cfg.n_individuals == 5
        assert cfg.m_draws == 1000
        # untouched fields keep the kind defaults
        assert cfg.sigma0 == 10.0

    def test_unknown_key_named(self):
        with pytest.raises(InvalidArgumentError, match="frobnicate"):
            parse_config_text("[study]\nkind = case1\nfrobnicate = 3\n")

    def test_unknown_section_named(self):
        with pytest.raises(InvalidArgumentError, match="wrong"):
            parse_config_text("[study]\nkind = case1\n[wrong]\nx = 1\n")

    def test_kind_required(self):
        with pytest.raises(InvalidArgumentError):
            parse_config_text("[data]\nn_steps = 200\n")

    def test_bad_type_reported(self):
        sections = parse_config_text("[study]\nkind = case1\n[data]\nn_steps = many\n")
        with pytest.raises(InvalidArgumentError, match="n_steps"):
            study_config_from_sections(sections)

    def test_seed_override(self):
        sections = parse_config_text(GOOD)
        cfg = study_config_from_sections(sections, seed_override=99)
        assert cfg.base_seed == 99

    def test_hash_stable_and_sensitive(self):
        a = config_hash(parse_config_text(GOOD))
        b = config_hash(parse_config_text(GOOD))
        c = config_hash(parse_config_text(GOOD.replace("seed = 7", "seed = 8")))
        assert a == b
        assert a != c

    def test_overrides_exclude_seed_and_kind(self):
        overrides = overrides_dict(parse_config_text(GOOD))
        assert "kind" not in overrides and "base_seed" not in overrides
        assert overrides["n_individuals"] == 5

    def test_load_file(self, tmp_path):
        file = tmp_path / "c.ini"
        file.write_text(GOOD)
        assert parse_config_text(GOOD) == load_config_file(file)


class TestManifest:
    def test_success_lifecycle(self, tmp_path):
        manifest = RunManifest(command="select:case1", config_hash="abc", base_seed=1)
        with ManifestTimer(manifest, tmp_path):
            on_disk = json.loads((tmp_path / "manifest.json").read_text())
            assert on_disk["status"] == "running"
        on_disk = json.loads((tmp_path / "manifest.json").read_text())
        assert on_disk["status"] == "ok"
        assert on_disk["wall_clock_s"] >= 0

    def test_crash_leaves_failed(self, tmp_path):
        manifest = RunManifest(command="select:case1", config_hash="abc", base_seed=1)
        with pytest.raises(RuntimeError):
            with ManifestTimer(manifest, tmp_path):
                raise RuntimeError("boom")
        on_disk = json.loads((tmp_path / "manifest.json").read_text())
        assert on_disk["status"] == "failed"
