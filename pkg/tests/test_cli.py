import json
import subprocess
import sys

import numpy as np
import pytest

from mccaspeech.cli import main
from mccaspeech.decomp import mcca_reduce
from mccaspeech.harness import Dataset, PipelineConfig, run_experiment
from mccaspeech.matrixio import AudioClip, FeatureMatrix, Kind, read_fmx, write_fmx, write_wav
from mccaspeech.synth import SynthConfig, generate

SYNTH = dict(n_speakers_per_class=10, segments_per_speaker=4, F=16, T=48, signal_span=6,
             template_distance=1.0)


@pytest.fixture()
def seg257(tmp_path):
    path = tmp_path / "seg.fmx"
    rng = np.random.default_rng(0)
    write_fmx(FeatureMatrix(rng.random((257, 126)), Kind.SPECTROGRAM, "seg"), path)
    return path


@pytest.fixture(scope="module")
def synth_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("synth")
    (d / "synth.json").write_text(json.dumps(SYNTH))
    assert main(["synth", "--config", str(d / "synth.json"), "--output-dir", str(d / "data")]) == 0
    (d / "pipe.json").write_text(json.dumps({"chunks": 8, "components": 3, "n_folds": 5, "seeds": [0, 1]}))
    return d


def test_reduce_writes_257_by_5(tmp_path, seg257):
    out = tmp_path / "out"
    rc = main(["reduce", str(seg257), "--method", "mcca", "--chunks", "8", "--components", "5",
               "--output-dir", str(out)])
    assert rc == 0
    result = read_fmx(out / "seg.mcca.fmx")
    assert result.shape == (257, 5) and result.kind == Kind.REDUCED
    # thin adapter: identical to the library call
    np.testing.assert_array_equal(result.data, mcca_reduce(read_fmx(seg257), 8, 5).data)


def test_reduce_zero_chunks_is_usage_error(tmp_path, seg257, capsys):
    rc = main(["reduce", str(seg257), "--chunks", "0", "--components", "5", "--output-dir", str(tmp_path)])
    assert rc == 2
    err = capsys.readouterr().err
    assert "reduce" in err and "chunks" in err


def test_unknown_flag_and_missing_subcommand():
    assert main(["reduce", "x.fmx", "--bogus"]) == 2
    assert main([]) == 2


def test_bad_file_is_data_error(tmp_path, capsys):
    bad = tmp_path / "bad.fmx"
    bad.write_bytes(b"nonsense")
    assert main(["reduce", str(bad), "--output-dir", str(tmp_path)]) == 3
    assert "[read" in capsys.readouterr().err


def test_missing_manifest_is_data_error(tmp_path):
    assert main(["experiment", "--manifest", str(tmp_path / "none.csv")]) == 3


def test_bad_config_is_usage_error(tmp_path, synth_dir):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"reduction": "ica"}))
    rc = main(["experiment", "--manifest", str(synth_dir / "data" / "manifest.csv"), "--config", str(cfg)])
    assert rc == 2


def test_numeric_error_exit_code(tmp_path, monkeypatch, seg257):
    from mccaspeech import decomp

    monkeypatch.setattr(decomp, "QL_ITERATIONS", 0)
    rc = main(["reduce", str(seg257), "--method", "pca", "--components", "2", "--output-dir", str(tmp_path)])
    assert rc == 4


def test_stft_and_segment(tmp_path):
    t = np.arange(16000) / 16000
    write_wav(AudioClip(0.3 * np.sin(2 * np.pi * 1000 * t), 16000), tmp_path / "tone.wav")
    assert main(["stft", str(tmp_path / "tone.wav"), "-o", str(tmp_path / "tone.fmx")]) == 0
    assert read_fmx(tmp_path / "tone.fmx").shape == (257, 16000 // 64 + 1)
    assert main(["segment", str(tmp_path / "tone.wav"), "--len-ms", "500", "--overlap", "0.5", "--stft",
                 "--output-dir", str(tmp_path / "segs")]) == 0
    segs = sorted((tmp_path / "segs").glob("*.fmx"))
    assert len(segs) == 3 and read_fmx(segs[0]).shape == (257, 126)


def test_convert_csv_roundtrip(tmp_path):
    m = FeatureMatrix(np.random.default_rng(1).standard_normal((3, 4)), Kind.EMBEDDING, "x")
    write_fmx(m, tmp_path / "x.fmx")
    assert main(["convert-csv", str(tmp_path / "x.fmx"), "-o", str(tmp_path / "x.csv")]) == 0
    assert main(["convert-csv", str(tmp_path / "x.csv"), "--kind", "embedding", "-o", str(tmp_path / "y.fmx")]) == 0
    assert read_fmx(tmp_path / "y.fmx").data.tobytes() == m.data.tobytes()


def test_experiment_matches_library_and_is_repeatable(tmp_path, synth_dir):
    args = ["experiment", "--manifest", str(synth_dir / "data" / "manifest.csv"),
            "--config", str(synth_dir / "pipe.json")]
    assert main(args + ["--output-dir", str(tmp_path / "a")]) == 0
    assert main(args + ["--output-dir", str(tmp_path / "b"), "--threads", "3"]) == 0
    for name in ("report.json", "report.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    lib = run_experiment(Dataset.from_synth(generate(SynthConfig(**SYNTH))),
                         PipelineConfig(chunks=8, components=3, n_folds=5, seeds=[0, 1]))
    cli = json.loads((tmp_path / "a" / "report.json").read_text())
    assert cli["per_fold_per_seed"] == lib.per_fold_per_seed.tolist()
    assert (tmp_path / "a" / "report.csv").read_text().splitlines()[0] == "config,mean,std"


def test_sweep_csv(tmp_path, synth_dir):
    rc = main(["sweep", "--manifest", str(synth_dir / "data" / "manifest.csv"),
               "--config", str(synth_dir / "pipe.json"), "--chunks", "4,8", "--components", "2,3",
               "--output-dir", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0] == "M,t,mean,std" and len(lines) == 5


def test_train_evaluate(tmp_path, synth_dir):
    manifest = str(synth_dir / "data" / "manifest.csv")
    assert main(["train", "--manifest", manifest, "--config", str(synth_dir / "pipe.json"),
                 "-o", str(tmp_path / "model.json")]) == 0
    assert main(["evaluate", "--manifest", manifest, "--model", str(tmp_path / "model.json"),
                 "-o", str(tmp_path / "eval.json")]) == 0
    doc = json.loads((tmp_path / "eval.json").read_text())
    assert doc["speaker_accuracy"] >= 0.9  # training speakers
    assert len(doc["speakers"]) == 20


def test_rank_and_select(tmp_path, synth_dir):
    common = ["--manifest", str(synth_dir / "data" / "manifest.csv"), "--config", str(synth_dir / "pipe.json"),
              "--repeats", "2", "--output-dir", str(tmp_path)]
    assert main(["rank-features", *common]) == 0
    rows = (tmp_path / "ranking.csv").read_text().splitlines()
    assert rows[0] == "rank,index,feature,score" and len(rows) == 1 + 16 * 3
    assert main(["select-top", "--percent", "10", "--percent", "50", *common]) == 0
    sel = (tmp_path / "selection.csv").read_text().splitlines()
    assert sel[0] == "percent,n_features,mean,std" and len(sel) == 4


def test_module_entry_point(tmp_path, seg257):
    proc = subprocess.run([sys.executable, "-m", "mccaspeech", "reduce", str(seg257), "--chunks", "0",
                           "--output-dir", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 2
    assert proc.stderr.startswith("mccaspeech reduce")
