import json

import pytest
import yaml

from adscout.cli import main
from adscout.config import AdscoutConfig
from tests.conftest import BUNDLES, CORPUS, EXPECTED, GOLDENS, SEED_EXPERIENCES


def test_profile_prints_priors(capsys):
    assert main(["profile", str(BUNDLES / "minimal.yaml")]) == 0
    assert json.loads(capsys.readouterr().out) == json.loads((EXPECTED / "minimal.json").read_text())


def test_probe_writes_utg(tmp_path, capsys):
    utg = tmp_path / "utg.json"
    assert main(["probe", str(BUNDLES / "minimal.yaml"), "--budget", "20", "--utg", str(utg)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["events"] == 20 and json.loads(utg.read_text())["format"] == "adscout-utg"


def test_explore_replay_and_export(tmp_path, capsys):
    run = tmp_path / "run"
    rc = main(["explore", str(BUNDLES / "dict_loop.yaml"), "--backend", "replay",
               "--transcript", str(GOLDENS / "dict_loop_transcript.jsonl"),
               "--experiences", str(SEED_EXPERIENCES), "--max-ads", "1", "--out", str(run)])
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["steps_taken"] == 2 and summary["distinct_ads"] == ["play_redirect"]
    assert sorted(p.name for p in run.iterdir()) == ["episode.jsonl", "experiences.jsonl", "report.json", "utg.json"]
    assert len((run / "episode.jsonl").read_text().splitlines()) == 2
    assert main(["export-utg", str(run), "--format", "dot"]) == 0
    assert capsys.readouterr().out.startswith("digraph utg {")


@pytest.mark.parametrize("policy", ["random", "bfs", "keyword", "criterion"])
def test_explore_baselines(policy, capsys):
    assert main(["explore", str(BUNDLES / "minimal.yaml"), "--policy", policy, "--max-steps", "10"]) == 0
    assert json.loads(capsys.readouterr().out)["policy"] == policy


def test_campaign_command(tmp_path, capsys):
    spec = tmp_path / "spec.yaml"
    spec.write_text(yaml.safe_dump({"manifest": str(CORPUS / "manifest.yaml"), "policies": ["random"],
                                    "runs_per_app": 1, "rendering": "canvas"}))
    out = tmp_path / "out"
    assert main(["campaign", str(spec), "--out", str(out)]) == 0
    assert capsys.readouterr().out.startswith("policy")
    assert (out / "report.json").exists() and (out / "report.txt").exists()


def test_errors_return_2(tmp_path, capsys):
    assert main(["profile", str(tmp_path / "missing.yaml")]) == 2
    bad = tmp_path / "spec.yaml"
    bad.write_text(yaml.safe_dump({"manifest": "m.yaml", "policies": []}))
    assert main(["campaign", str(bad)]) == 2
    assert "error" in capsys.readouterr().err


def test_config_file(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump({"alpha": 0.5, "max_steps": 10, "remote": {"url": "http://x", "model": "m"}}))
    cfg = AdscoutConfig.load(path)
    assert cfg.alpha == 0.5 and cfg.limits.max_steps == 10 and cfg.remote.model == "m"
    assert AdscoutConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError, match="unknown config keys"):
        AdscoutConfig.from_dict({"alfa": 1})
    with pytest.raises(ValueError):
        AdscoutConfig(alpha=2.0)


def test_remote_backend_needs_config():
    with pytest.raises(SystemExit):
        main(["explore", str(BUNDLES / "minimal.yaml"), "--backend", "remote"])
