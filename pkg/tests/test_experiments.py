import json

import numpy as np
import pytest

from hashattack import cli
from hashattack.config import ConfigError, default_config_text, dump_config, load_config, parse_config
from hashattack.experiments import PipelineError, RunReport, ablation_sweep, chance_t_map, run_pipeline
from hashattack.hash_space import RetrievalIndex

TINY = """# tiny end-to-end configuration
[dataset]
num_classes = 4
images_per_class = 10
queries_per_class = 1
seed = 5

[hash_model]
k = 16
epochs = 2

[alignment]
epochs = 5

[attack]
steps = 3

[evaluation]
K = 10
chance_trials = 5
ablation_seeds = 5
"""


@pytest.fixture(scope="module")
def tiny_runs(tmp_path_factory):
    cfg = parse_config(TINY)
    a = run_pipeline(cfg, tmp_path_factory.mktemp("a"))
    b = run_pipeline(cfg, tmp_path_factory.mktemp("b"))
    return a, b


# ---- config ----

def test_default_config_round_trips():
    text = default_config_text()
    assert dump_config(parse_config(text)) == text


def test_partial_config_fills_defaults():
    cfg = parse_config(TINY)
    assert cfg.dataset.num_classes == 4 and cfg.dataset.image_size == 32
    assert cfg.attack.kappa1 == 15.0 and cfg.attack.steps == 3
    assert cfg.evaluation.ablation_seeds == (5,)
    assert cfg.pairing_seed == 5


@pytest.mark.parametrize("text", [
    "[dataset]\nnum_clases = 4\n",
    "[datasett]\nseed = 1\n",
    "[attack]\nkappa1 = abc\n",
    "[attack]\nkappa1 = 0\nkappa2 = 0\nkappa3 = 0\n",
    "[attack]\nsteps = 40\n",
    "[backend]\nimage_size = 64\n",
    "no section header",
])
def test_bad_configs_rejected(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_config_echo_is_byte_identical(tmp_path, tiny_runs):
    rep, _ = tiny_runs
    assert rep.config_text == TINY
    p = tmp_path / "c.ini"
    p.write_bytes(TINY.encode())
    assert load_config(p).source_text == TINY


# ---- pipeline ----

def test_report_contents(tiny_runs):
    rep, _ = tiny_runs
    assert rep.status == "ok"
    assert len(rep.queries) == 4 and set(rep.traces) == {q["query_id"] for q in rep.queries}
    assert rep.t_map_benign == pytest.approx(np.mean([q["ap_benign"] for q in rep.queries]))
    assert rep.t_map_adversarial == pytest.approx(np.mean([q["ap_adversarial"] for q in rep.queries]))
    assert all(len(t["total"]) == 3 for t in rep.traces.values())
    assert list(rep.timings) == ["gen-data", "train-hash", "train-align", "attack", "eval", "report"]
    el = list(rep.elapsed.values())
    assert el == sorted(el) and el[-1] == pytest.approx(sum(rep.timings.values()))
    assert rep.mean_attack_seconds == pytest.approx(np.mean([q["seconds"] for q in rep.queries]))
    for name in ("plots/loss_curves.png", "plots/tmap.png", "plots/perturbations.png", "index.tsv", "han.npz"):
        assert name in rep.artifacts


def test_same_seed_same_numerics(tiny_runs):
    a, b = tiny_runs
    assert json.dumps(a.numerics(), sort_keys=True) == json.dumps(b.numerics(), sort_keys=True)


def test_report_json_round_trip(tiny_runs):
    rep, _ = tiny_runs
    back = RunReport.load(rep.artifacts["report.json"])
    assert back.to_dict() == json.loads(json.dumps(rep.to_dict()))


def test_zero_steps_is_identity(tmp_path):
    rep = run_pipeline(parse_config(TINY.replace("steps = 3", "steps = 0")), tmp_path)
    assert rep.t_map_adversarial == rep.t_map_benign


def test_stage_failure_is_tagged(tmp_path, monkeypatch):
    import hashattack.experiments as ex

    def boom(*a, **k):
        raise RuntimeError("no alignment today")

    monkeypatch.setattr(ex, "train_alignment", boom)
    with pytest.raises(PipelineError) as e:
        run_pipeline(parse_config(TINY), tmp_path)
    assert e.value.stage == "train-align"
    rep = RunReport.load(tmp_path / "report.json")
    assert rep.status == "failed" and rep.failed_stage == "train-align"
    assert (tmp_path / "hash_model.npz").exists() and (tmp_path / "index.tsv").exists()


def test_chance_matches_label_frequency():
    rng = np.random.default_rng(0)
    labels = (rng.random((200, 4)) < 0.3).astype(int)
    labels[:, 0] |= labels.sum(1) == 0
    idx = RetrievalIndex([f"{i}" for i in range(200)], rng.choice([-1, 1], (200, 8)), labels)
    target = np.array([[0, 1, 0, 0]])
    # with K = n every item is retrieved in random order; expected AP approaches the relevant fraction
    c = chance_t_map(idx, target, 200, trials=300)
    assert c == pytest.approx(labels[:, 1].mean(), abs=0.03)


def test_ablation_table_shape(tmp_path):
    cfg = parse_config(TINY)
    table = ablation_sweep(cfg, combos=[(15, 1, 8), (0, 0, 8)], out=tmp_path)
    assert [r["kappa"] for r in table.rows] == [[15.0, 1.0, 8.0], [0.0, 0.0, 8.0]]
    assert set(table.rows[0]["han"]) == {"5"} and set(table.rows[0]["no_han"]) == {"5"}
    assert "w/o HAN" in (tmp_path / "ablation.txt").read_text()
    assert table.lookup((15, 1, 8)) == table.rows[0]["han"]["5"]


# ---- CLI ----

def test_cli_stages(tmp_path, capsys):
    cfg = tmp_path / "tiny.ini"
    cfg.write_text(TINY)
    out = str(tmp_path / "run")
    base = ["--config", str(cfg), "--out", out]
    assert cli.main(["attack", *base]) == 2  # nothing generated yet
    assert "gen-data" in capsys.readouterr().err
    for stage in ("gen-data", "train-hash", "train-align"):
        assert cli.main([stage, *base]) == 0
    assert cli.main(["attack", *base, "--query-id", "q00000", "--target-label", "3"]) == 0
    assert "target class 3" in capsys.readouterr().out
    assert cli.main(["attack", *base, "--query-id", "nope"]) == 2
    assert cli.main(["attack", *base]) == 0
    assert cli.main(["eval", *base]) == 0
    assert cli.main(["report", *base]) == 0
    assert (tmp_path / "run" / "report.txt").exists()
    with pytest.raises(SystemExit):
        cli.main(["attack", "--config", str(cfg)])


def test_cli_rejects_overlapping_target(tmp_path, capsys):
    cfg = tmp_path / "tiny.ini"
    cfg.write_text(TINY)
    base = ["--config", str(cfg), "--out", str(tmp_path / "r")]
    for stage in ("gen-data", "train-hash", "train-align"):
        cli.main([stage, *base])
    own = int(np.flatnonzero(np.load(tmp_path / "r" / "dataset.npz")["q_labels"][0])[0])
    assert cli.main(["attack", *base, "--query-id", "q00000", "--target-label", str(own)]) == 2
    assert "overlaps" in capsys.readouterr().err
