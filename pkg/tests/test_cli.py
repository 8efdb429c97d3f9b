import json

import pytest

from mwpcl.cli import load_config, main
from mwpcl.corpus import load_corpus, save_corpus
from mwpcl.errors import ConfigError

from synth import two_template_corpus


@pytest.fixture
def workspace(tmp_path):
    corpus = two_template_corpus(seed=1, size=24)
    train_path = tmp_path / "train.jsonl"
    save_corpus(corpus, train_path)
    out_dir = tmp_path / "out"
    config = tmp_path / "pipeline.cfg"
    config.write_text(
        f"train_path = {train_path}\n"
        f"out_dir = {out_dir}\n"
        "trainer_steps = 20\n"
        "trainer_dim = 16\n"
        "trainer_classes = 2\n"
        "grid_steps = 5\n"
        "challenge_size = 10\n",
        encoding="utf-8")
    return tmp_path, config, out_dir


def test_unknown_config_key_is_config_error(tmp_path):
    config = tmp_path / "bad.cfg"
    config.write_text("no_such_key = 1\n")
    assert main(["simmatrix", "--config", str(config)]) == 2


def test_bad_enum_is_config_error(tmp_path):
    config = tmp_path / "bad.cfg"
    config.write_text("retrieval_strategy = fuzzy\n")
    assert main(["retrieve", "--config", str(config)]) == 2


def test_missing_required_path_is_config_error():
    assert main(["simmatrix"]) == 2


def test_missing_data_file_is_data_error(tmp_path):
    config = tmp_path / "c.cfg"
    config.write_text(f"train_path = {tmp_path / 'nope.jsonl'}\n")
    assert main(["simmatrix", "--config", str(config)]) == 3


def test_set_overrides_config(tmp_path):
    config = load_config(None, ["trainer_tau=0.05", "retrieval_strategy=nn"])
    assert config.trainer_tau == 0.05
    assert config.retrieval_strategy == "nn"
    with pytest.raises(ConfigError):
        load_config(None, ["trainer_tau"])


def test_ingest_writes_canonical_corpus(tmp_path, capsys):
    raw = tmp_path / "raw.jsonl"
    rows = [
        {"id": "a", "text": "Tom has 3 apples and buys 5 . How many now ?",
         "equation": "3+5", "answer": 8},
        {"id": "b", "text": "Ate 1/2 of 8 pies . How many eaten ?",
         "equation": "8*1/2", "answer": 4},
    ]
    raw.write_text("".join(json.dumps(r) + "\n" for r in rows))
    out_dir = tmp_path / "out"
    assert main(["ingest", "--set", f"raw_path={raw}", "--set", f"out_dir={out_dir}"]) == 0
    loaded = load_corpus(out_dir / "corpus.jsonl")
    assert len(loaded) == 2
    captured = capsys.readouterr().out
    assert "fraction slotting" in captured and "b" in captured


def test_simmatrix_contains_derived_value(workspace, capsys):
    _, config, out_dir = workspace
    assert main(["simmatrix", "--config", str(config)]) == 0
    text = (out_dir / "simmatrix.txt").read_text().splitlines()
    assert text[0].startswith("# mwpcl ")
    keys = text[1].split("\t")
    assert sorted(keys) == ["+ n1 n2", "- n1 n2"]
    row = [float(v) for v in text[2].split()]
    assert any(abs(v - 5 / 6) < 1e-9 for v in row)


def test_augment_and_challenge_set(workspace, capsys):
    _, config, out_dir = workspace
    assert main(["augment", "--config", str(config)]) == 0
    assert (out_dir / "augments.jsonl").exists()
    assert "roda coverage" in capsys.readouterr().out
    assert main(["challenge-set", "--config", str(config)]) == 0
    lines = [ln for ln in (out_dir / "challenge.jsonl").read_text().splitlines()
             if not ln.startswith("#")]
    assert len(lines) == 10
    payload = json.loads(lines[0])
    assert payload["method"] in ("QR", "RODA")
    assert payload["origin"] in ("aug_qr", "aug_roda")


def test_retrieve_deterministic_byte_identical(workspace):
    _, config, out_dir = workspace
    assert main(["retrieve", "--config", str(config)]) == 0
    first = (out_dir / "triplets.jsonl").read_bytes()
    assert main(["retrieve", "--config", str(config)]) == 0
    assert (out_dir / "triplets.jsonl").read_bytes() == first


def test_train_eval_dump_pipeline(workspace, capsys):
    tmp_path, config, out_dir = workspace
    assert main(["retrieve", "--config", str(config)]) == 0
    assert main(["train", "--config", str(config)]) == 0
    ckpt = out_dir / "checkpoint.txt"
    metrics = out_dir / "metrics.txt"
    assert ckpt.exists()
    body = [ln for ln in metrics.read_text().splitlines() if not ln.startswith("#")]
    assert len(body) == 20
    assert all(len(line.split()) == 5 for line in body)

    assert main(["eval", "--config", str(config),
                 "--set", f"checkpoint_path={ckpt}"]) == 0
    out = capsys.readouterr().out
    assert "gap" in out and "same_template_retrieval_at_1" in out

    assert main(["dump-embeddings", "--config", str(config),
                 "--set", f"checkpoint_path={ckpt}"]) == 0
    emb = (out_dir / "embeddings.txt").read_text().splitlines()
    assert emb[0].startswith("# mwpcl ")
    assert len([ln for ln in emb if not ln.startswith("#")]) == 24


def test_train_deterministic_byte_identical(workspace):
    _, config, out_dir = workspace
    assert main(["retrieve", "--config", str(config)]) == 0
    assert main(["train", "--config", str(config)]) == 0
    first_ckpt = (out_dir / "checkpoint.txt").read_bytes()
    first_metrics = (out_dir / "metrics.txt").read_bytes()
    assert main(["train", "--config", str(config)]) == 0
    assert (out_dir / "checkpoint.txt").read_bytes() == first_ckpt
    assert (out_dir / "metrics.txt").read_bytes() == first_metrics


def test_strategy_grid_runs_all_cells(workspace, capsys):
    _, config, out_dir = workspace
    assert main(["strategy-grid", "--config", str(config)]) == 0
    out = capsys.readouterr().out
    for eq in ("em", "nn"):
        for metric in ("random", "embedcos", "bibleu"):
            assert f"eq={eq} text={metric}" in out
    grid = [ln for ln in (out_dir / "grid.txt").read_text().splitlines()
            if not ln.startswith("#")]
    assert len(grid) == 6
    assert all("gap=" in line and "retrieval@1=" in line for line in grid)


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
