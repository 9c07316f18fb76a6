#!/usr/bin/env python
"""Tests for configuration loading."""

import json
import tempfile
import unittest
from decimal import Decimal
from pathlib import Path

from tests.support import CONFIG_DIR, GOLDEN_DIR

from blab_reporter.config import check_artifacts, load_config, load_resources, read_list
from blab_reporter.errors import ConfigError
from blab_reporter.realization import GreetingWindow


class TestLoadConfig(unittest.TestCase):
    """blab.json and environment overrides."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, **changes) -> Path:
        data = json.loads((CONFIG_DIR / "blab.json").read_text(encoding="utf-8"))
        data["paths"] = {k: str((CONFIG_DIR / v).resolve()) for k, v in data["paths"].items()}
        data.update(changes)
        path = self.dir / "blab.json"
        path.write_text(json.dumps(data, ensure_ascii=False), encoding="utf-8")
        return path

    def test_paths_resolve_against_the_config_file(self):
        config = load_config(CONFIG_DIR / "blab.json", env={})
        self.assertEqual(config.paths.grammar.resolve(), (CONFIG_DIR.parent / "grammar" / "blab.grammar").resolve())
        self.assertEqual(config.paths.journal.resolve(), (CONFIG_DIR.parent / "state" / "publish.journal").resolve())
        self.assertEqual(config.polish.greetings[GreetingWindow.MORNING][0], "Bom dia!")
        self.assertFalse(config.dry_run)
        self.assertIsNone(config.twitter_token)

    def test_state_dir_override(self):
        config = load_config(CONFIG_DIR / "blab.json", env={"BLAB_STATE_DIR": str(self.dir)})
        self.assertEqual(config.paths.store, self.dir / "store")
        self.assertEqual(config.paths.dry_run_journal, self.dir / "dry-run.journal")

    def test_environment_overrides(self):
        env = {"BLAB_DRY_RUN": "yes", "BLAB_LOG_LEVEL": "DEBUG", "BLAB_TWITTER_TOKEN": "secret"}
        config = load_config(CONFIG_DIR / "blab.json", env=env)
        self.assertTrue(config.dry_run)
        self.assertEqual(config.log_level, "DEBUG")
        self.assertEqual(config.twitter_token, "secret")
        self.assertNotIn("secret", repr(config))

    def test_config_path_from_environment(self):
        config = load_config(env={"BLAB_CONFIG": str(GOLDEN_DIR / "blab.json")})
        self.assertEqual(config.seed, 20220522)

    def test_bad_seed(self):
        for seed in (-1, 2 ** 64, "7"):
            with self.subTest(seed=seed):
                with self.assertRaises(ConfigError):
                    load_config(self.write(seed=seed), env={})

    def test_urgent_magnitude(self):
        self.assertEqual(load_config(self.write(urgent_magnitude="3.5"), env={}).urgent_magnitude, Decimal("3.5"))
        with self.assertRaises(ConfigError):
            load_config(self.write(urgent_magnitude="forte"), env={})

    def test_missing_path_key(self):
        path = self.write()
        data = json.loads(path.read_text(encoding="utf-8"))
        del data["paths"]["catalog"]
        path.write_text(json.dumps(data), encoding="utf-8")
        with self.assertRaises(ConfigError):
            load_config(path, env={})

    def test_not_json(self):
        path = self.dir / "blab.json"
        path.write_text("{", encoding="utf-8")
        with self.assertRaises(ConfigError):
            load_config(path, env={})


class TestResources(unittest.TestCase):
    """Artifact loading."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.config = load_config(CONFIG_DIR / "blab.json", env={"BLAB_STATE_DIR": self.tmp.name})

    def tearDown(self):
        self.tmp.cleanup()

    def test_production_resources(self):
        resources = load_resources(self.config, env={})
        self.assertEqual(len(resources.entities), 4)
        self.assertIn("sr.", resources.abbreviations)
        self.assertIn("idiota", resources.blocklist.terms)
        self.assertEqual(len(resources.curious_facts), 8)
        self.assertEqual([s.source_id for s in resources.sources],
                         ["inmet-santos", "chm-santos", "sismo-usp", "ais-santos", "news-mar"])
        self.assertTrue(Path(resources.sources[0].endpoint).exists())

    def test_production_artifacts_are_clean(self):
        self.assertEqual(check_artifacts(self.config.paths), [])

    def test_broken_grammar_is_a_config_error(self):
        grammar = Path(self.tmp.name) / "broken.grammar"
        grammar.write_text("template CAUSE\n    {nope}\n", encoding="utf-8")
        self.config.paths.grammar = grammar
        with self.assertRaises(ConfigError) as ctx:
            load_resources(self.config, env={})
        self.assertIn("broken.grammar:2:", str(ctx.exception))

    def test_unknown_literal_entity_is_reported(self):
        grammar = Path(self.tmp.name) / "entity.grammar"
        text = (GOLDEN_DIR / "golden.grammar").read_text(encoding="utf-8")
        grammar.write_text(text + "template CAUSE\n    Segundo «ENTITY:NASA», {earthquake?sim|não}.\n",
                           encoding="utf-8")
        self.config.paths.grammar = grammar
        diagnostics = check_artifacts(self.config.paths)
        self.assertEqual(len(diagnostics), 1)
        self.assertTrue(diagnostics[0].endswith("unknown entity NASA"))

    def test_read_list_skips_comments(self):
        path = Path(self.tmp.name) / "list.txt"
        path.write_text("# header\none\n\ntwo  # note\n", encoding="utf-8")
        self.assertEqual(read_list(path), ["one", "two"])


if __name__ == '__main__':
    unittest.main()
