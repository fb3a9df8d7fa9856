import pytest

from agitation_ssl.config import DEFAULTS, PRESETS, STAGE_ORDER, RunConfig, parse_config_text
from agitation_ssl.errors import ValidationError


def test_defaults_build():
    cfg = RunConfig.build()
    assert cfg.seed == 0
    assert cfg.fusion_config().threshold == 0.5
    assert cfg.cohort_spec().n_homes == DEFAULTS["cohort.n_homes"]
    assert cfg.models() == ("proposed", "supervised-only", "random-forest", "lstm")


def test_parse_comments_and_blanks():
    text = "# header\n\nseed = 4  # trailing\ncohort.n_homes=3\n"
    assert parse_config_text(text) == {"seed": "4", "cohort.n_homes": "3"}
    with pytest.raises(ValidationError, match="line 1"):
        parse_config_text("seed 4")


def test_overrides_coerced_by_default_type():
    cfg = RunConfig.build({"seed": "7", "threshold": "1", "selfsup.ae_epochs": "3", "eval.models": "lstm"})
    assert cfg.seed == 7 and cfg["threshold"] == 1.0 and isinstance(cfg["threshold"], float)
    assert cfg.models() == ("lstm",)


@pytest.mark.parametrize("overrides", [{"nope": "1"}, {"seed": "x"}, {"threshold": "high"},
                                       {"cohort.labelled_fraction": "2"}])
def test_bad_overrides_rejected(overrides):
    with pytest.raises(ValidationError):
        RunConfig.build(overrides)


def test_presets_and_files(tmp_path):
    for name in ("tiny", "benchmark"):
        assert (PRESETS / f"{name}.cfg").exists()
        RunConfig.load(name)
    path = tmp_path / "run.cfg"
    path.write_text("seed = 3\nselfsup.ae_epochs = 1\n")
    cfg = RunConfig.load(path, {"seed": "5"})
    assert cfg.seed == 5 and cfg["selfsup.ae_epochs"] == 1
    with pytest.raises(ValidationError):
        RunConfig.load(tmp_path / "missing.cfg")


def test_holdout_spec_is_disjoint():
    cfg = RunConfig.build()
    a, b = cfg.cohort_spec(), cfg.holdout_spec()
    assert a.home_prefix != b.home_prefix and a.seed != b.seed
    assert b.n_homes == DEFAULTS["holdout.n_homes"]


def test_stage_hash_lineage():
    base = RunConfig.build()
    hashes = {s: base.stage_hash(s) for s in STAGE_ORDER}
    assert len(set(hashes.values())) == len(STAGE_ORDER)
    # an evaluation-only change leaves upstream stages untouched
    changed = RunConfig.build({"eval.k": "5"})
    assert all(changed.stage_hash(s) == hashes[s] for s in STAGE_ORDER[:-1])
    assert changed.stage_hash("evaluate") != hashes["evaluate"]
    # a cohort change propagates to every stage
    reseeded = RunConfig.build({"seed": "1"})
    assert all(reseeded.stage_hash(s) != hashes[s] for s in STAGE_ORDER)
    # output paths are not part of any hash
    moved = RunConfig.build({"paths.reports": "elsewhere"})
    assert all(moved.stage_hash(s) == hashes[s] for s in STAGE_ORDER)
    with pytest.raises(ValidationError):
        base.stage_hash("deploy")


def test_dumps_round_trip():
    cfg = RunConfig.build({"seed": "9", "fusion.l2": "0.01"})
    assert RunConfig.build(parse_config_text(cfg.dumps())).values == cfg.values
