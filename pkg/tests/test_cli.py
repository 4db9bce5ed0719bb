import json
import math

import pytest

from infodistill.cli import main
from infodistill.config import ConfigError, RunConfig, load_config, parse_config_text
from infodistill.pipeline import dataset_statistics
from infodistill.store import Store, file_digest

CORPUS_LINES = [
    "Austin, (AP) -- The volcano erupted near the lava. The lava slowed the volcano. The volcano rumbled past the crater.",
    "Boston, (CNN) -- The flood crested near the levee. The levee faced the flood. The flood surged past the embankment.",
    "Denver, (NPR) -- The museum reopened near the galleries. The curators slowed the museum. The museum unveiled the exhibits.",
    "Austin, (AP) -- The volcano smoldered near the crater. The crater faced the volcano. The volcano erupted past the ashfall.",
    "Boston, (CNN) -- The flood receded near the embankment. The floodwater slowed the flood. The flood crested on monday.",
    "Denver, (NPR) -- The museum expanded near the exhibits. The galleries faced the museum. The museum reopened on friday.",
]


@pytest.fixture()
def workdir(tmp_path):
    corpus = tmp_path / "corpus.txt"
    corpus.write_text("\n".join(CORPUS_LINES) + "\n", encoding="utf-8")
    config = tmp_path / "run.cfg"
    config.write_text(
        f"""
# desk-scale smoke configuration
seed = 5
store = {tmp_path / 'store'}
corpus = {corpus}
backend = reference:{tmp_path / 'teacher.json'}
ngram_order = 3
smoothing_k = 0.001
condition_weight = 0.8
n_candidates = 12
max_doc_tokens = 40
# lenient critics so the tiny fixture yields accepted pairs
tau_s_log = -1.0
tau_f_log = -1.0
tau_b = 0.8
trainer_mode = update
trainer_weight = 10
msttr_window = 10
""",
        encoding="utf-8",
    )
    return tmp_path, config


# -- config ----------------------------------------------------------------------


def test_parse_config_text_types():
    values = parse_config_text("seed = 9\nalpha = 0.5\nbackend = remote:http://x\n")
    assert values == {"seed": 9, "alpha": 0.5, "backend": "remote:http://x"}


def test_parse_config_rejects_unknown_key():
    with pytest.raises(ConfigError):
        parse_config_text("nonsense = 1\n")


def test_parse_config_rejects_bad_int():
    with pytest.raises(ConfigError):
        parse_config_text("seed = banana\n")


def test_config_defaults_carry_shipped_thresholds():
    cfg = RunConfig(backend="remote:http://x")
    assert cfg.tau_s_log == pytest.approx(math.log(14.0))
    assert cfg.tau_f_log == pytest.approx(math.log(1.7))
    assert cfg.tau_b == 0.2
    assert cfg.top_p == 0.9
    assert cfg.temperature == 1.0
    assert cfg.max_doc_tokens == 1024
    assert (cfg.len_tau1, cfg.len_tau2) == (38.0, 69.0)
    assert (cfg.ext_tau1, cfg.ext_tau2) == (0.34, 0.51)
    assert cfg.spe_tau2 == 4.8


def test_config_env_override(workdir, monkeypatch):
    _, config = workdir
    monkeypatch.setenv("INFODISTILL_SEED", "99")
    cfg = load_config(config)
    assert cfg.seed == 99


def test_config_digest_stable(workdir):
    _, config = workdir
    assert load_config(config).digest() == load_config(config).digest()


def test_config_validation_errors():
    with pytest.raises(ConfigError):
        RunConfig(backend="").validate()
    with pytest.raises(ConfigError):
        RunConfig(backend="ftp:thing").validate()
    with pytest.raises(ConfigError):
        RunConfig(backend="remote:http://x", n_candidates=0).validate()
    with pytest.raises(ConfigError):
        RunConfig(backend="reference:x", corpus="").validate()


# -- CLI ----------------------------------------------------------------------------


def run_cli(*argv):
    return main(list(argv))


def test_missing_config_exits_1(capsys):
    assert run_cli("generate", "--config", "/nonexistent.cfg") == 1
    assert "error" in capsys.readouterr().err


def test_generate_zero_candidates_exits_1(workdir, monkeypatch, capsys):
    _, config = workdir
    monkeypatch.setenv("INFODISTILL_N_CANDIDATES", "0")
    assert run_cli("generate", "--config", str(config)) == 1


def test_stage_preconditions(workdir, capsys):
    _, config = workdir
    assert run_cli("filter", "--config", str(config)) == 1  # no candidates yet
    assert run_cli("annotate", "--config", str(config)) == 1  # nothing filtered
    assert run_cli("iterate", "--config", str(config)) == 1  # nothing accepted


def test_full_stage_sequence(workdir, capsys):
    tmp, config = workdir
    for command in ("generate", "filter", "iterate", "generate", "filter", "annotate", "export", "stats"):
        code = run_cli(command, "--config", str(config))
        out = capsys.readouterr()
        assert code == 0, f"{command} failed: {out.err}"

    store = Store(tmp / "store")
    manifest = store.load_manifest()
    assert manifest["rounds"]["current"] == 1
    assert manifest["config_digest"] == load_config(config).digest()
    assert len(store.stage_records("init")) == 12
    assert len(store.stage_records("round1")) == 12
    assert (tmp / "store" / "export_plain.jsonl").exists()
    # iterated backend artifact saved and recorded
    assert (tmp / "store" / "backend_round1.json").exists()


def test_stats_matches_library_recomputation(workdir, capsys):
    tmp, config = workdir
    for command in ("generate", "filter"):
        assert run_cli(command, "--config", str(config)) == 0
    capsys.readouterr()
    assert run_cli("stats", "--config", str(config)) == 0
    printed = json.loads(capsys.readouterr().out)
    expected = dataset_statistics(Store(tmp / "store"), msttr_window=10)
    for key, value in expected.items():
        if isinstance(value, float):
            assert printed[key] == pytest.approx(value, abs=1e-9), key
        else:
            assert printed[key] == value, key


def test_rank_command(workdir, tmp_path, capsys):
    _, config = workdir
    ranking_input = tmp_path / "rank_in.jsonl"
    ranking_input.write_text(
        json.dumps(
            {
                "document": "The volcano erupted near the lava. The lava slowed the volcano.",
                "candidates": ["The volcano erupted.", "The museum reopened."],
            }
        )
        + "\n",
        encoding="utf-8",
    )
    out_path = tmp_path / "rank_out.jsonl"
    assert run_cli("rank", "--config", str(config), "--input", str(ranking_input), "--output", str(out_path)) == 0
    selection = json.loads(out_path.read_text().splitlines()[0])
    assert selection["index"] == 0  # the on-topic candidate wins
    assert selection["total"] == pytest.approx(selection["saliency_pmi"] + selection["faithfulness_pmi"])


def test_config_digest_mismatch_refused(workdir, capsys):
    tmp, config = workdir
    assert run_cli("generate", "--config", str(config)) == 0
    # same store, different effective config
    assert run_cli("generate", "--config", str(config), "--seed", "123") == 1
    assert "digest" in capsys.readouterr().err


def test_pipeline_deterministic_across_stores(workdir, tmp_path, capsys):
    tmp, config = workdir
    for command in ("generate", "filter", "export"):
        assert run_cli(command, "--config", str(config)) == 0
    other = tmp_path / "other_store"
    for command in ("generate", "filter", "export"):
        assert run_cli(command, "--config", str(config), "--store", str(other)) == 0
    a = file_digest(tmp / "store" / "export_plain.jsonl")
    b = file_digest(other / "export_plain.jsonl")
    assert a == b


def test_rank_bad_json_line_is_runtime_error(workdir, tmp_path, capsys):
    _, config = workdir
    bad = tmp_path / "bad.jsonl"
    bad.write_text("{not json}\n", encoding="utf-8")
    assert run_cli("rank", "--config", str(config), "--input", str(bad)) == 2
    assert "runtime error" in capsys.readouterr().err


def test_stage_limit_partial_then_complete(workdir, capsys):
    tmp, config = workdir
    assert run_cli("generate", "--config", str(config)) == 0
    capsys.readouterr()
    assert run_cli("filter", "--config", str(config), "--stage-limit", "5") == 0
    partial = json.loads(capsys.readouterr().out)
    assert partial["generated"] == 5
    assert run_cli("filter", "--config", str(config)) == 0
    rest = json.loads(capsys.readouterr().out)
    assert rest["generated"] == 7  # the remainder of the 12 candidates
