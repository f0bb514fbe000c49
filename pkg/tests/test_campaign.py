import json

import pytest
import yaml

from adscout.eval_harness.campaign import (CampaignError, CampaignSpec, load_experiences, load_manifest,
                                           report_json, report_text, run_campaign)
from tests.conftest import CORPUS, GOLDENS, SEED_EXPERIENCES


def small_manifest(tmp_path, names=("minimal", "no_ad", "success_activity")):
    full = yaml.safe_load((CORPUS / "manifest.yaml").read_text())
    apps = [a for a in full["apps"] if any(a["bundle"].endswith(f"/{n}.yaml") for n in names)]
    for a in apps:
        a["bundle"] = str(CORPUS / a["bundle"])
    path = tmp_path / "manifest.yaml"
    path.write_text(yaml.safe_dump({"apps": apps}))
    return path


def test_manifest_loads_all_apps():
    entries = load_manifest(CORPUS / "manifest.yaml")
    assert len(entries) == 20 and all(e.bundle.exists() for e in entries)
    assert sum(len(e.ad_types) for e in entries) == 20


def test_seed_experiences():
    exps = load_experiences(SEED_EXPERIENCES)
    assert len(exps) == 3 and all(e.summary for e in exps)


@pytest.mark.parametrize("kwargs, fragment", [
    ({"policies": []}, "at least one policy"),
    ({"policies": ["mana", "oracle"]}, "unknown policies"),
    ({"policies": ["mana"], "runs_per_app": 0}, "runs_per_app"),
    ({"policies": ["mana"], "runs_per_app": 2, "seeds": [1]}, "len\\(seeds\\)"),
])
def test_spec_validation(kwargs, fragment):
    with pytest.raises(CampaignError, match=fragment):
        CampaignSpec(manifest="m.yaml", **kwargs)


def test_missing_bundle_raises(tmp_path):
    path = tmp_path / "manifest.yaml"
    path.write_text(yaml.safe_dump({"apps": [{"app_id": "x", "bundle": "nope.yaml", "ads": {}}]}))
    with pytest.raises(CampaignError, match="missing bundle"):
        run_campaign(CampaignSpec(str(path), ["random"], runs_per_app=1))


def test_malformed_manifest(tmp_path):
    path = tmp_path / "manifest.yaml"
    path.write_text("apps: [{bundle: x.yaml}]\n")
    with pytest.raises(CampaignError):
        load_manifest(path)


def test_seeds_give_one_report_each(tmp_path):
    spec = CampaignSpec(str(small_manifest(tmp_path)), ["mana", "random"], runs_per_app=5,
                        experiences=str(SEED_EXPERIENCES))
    result = run_campaign(spec)
    assert len(result["reports"]) == 2 * 3 * 5
    for p in ("mana", "random"):
        for app in result["apps"]:
            seeds = [r["seed"] for r in result["reports"] if r["policy"] == p and r["app_id"] == app]
            assert seeds == [0, 1, 2, 3, 4]


def test_byte_identical_across_runs_and_workers(tmp_path):
    manifest = str(small_manifest(tmp_path))
    docs = []
    for workers in (1, 1, 4):
        spec = CampaignSpec(manifest, ["mana", "criterion", "bfs"], runs_per_app=3,
                            experiences=str(SEED_EXPERIENCES), workers=workers)
        docs.append(report_json(run_campaign(spec), include_runs=True))
    assert docs[0] == docs[1] == docs[2]


def test_rendering_filter(tmp_path):
    spec = CampaignSpec(str(CORPUS / "manifest.yaml"), ["random"], runs_per_app=1, rendering="canvas")
    result = run_campaign(spec)
    assert result["apps"] and len(result["apps"]) < 20


def test_corpus_report_matches_golden(corpus_campaign):
    assert report_json(corpus_campaign) == (GOLDENS / "campaign_report.json").read_text()


def test_report_text(corpus_campaign):
    text = report_text(corpus_campaign)
    lines = text.splitlines()
    assert lines[0].split() == ["policy", "detection", "avg", "steps", "found"]
    assert [ln.split()[0] for ln in lines[1:6]] == ["mana", "criterion", "random", "bfs", "keyword"]
    assert json.loads(report_json(corpus_campaign))["runs_per_app"] == 5
