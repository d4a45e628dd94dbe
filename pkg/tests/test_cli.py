import argparse
import json
import subprocess
import sys
from pathlib import Path

import pytest

from newsseg.cli import build_parser, run
from newsseg.features import write_wav
from newsseg.synthetic import labeled_block_video, tone
from newsseg.timeline import SceneLabel

FIXTURE = Path(__file__).resolve().parents[1] / "fixtures" / "table1.json"

TINY_TOML = """
[run]
seed = 0

[transformer]
layers = 1
heads = 2
hidden = 8
patch = 8
image_size = 16

[synthetic]
n_clips = 12
image_size = 16
"""


@pytest.fixture
def corpus(tmp_path):
    """One two-shot raw video with audio and its annotation."""
    video, truth, _ = labeled_block_video([SceneLabel.STORY, SceneLabel.STUDIO], [30, 30], size=(24, 32))
    (tmp_path / "v.rgb").write_bytes(video.tobytes())
    write_wav(tmp_path / "v.wav", tone(440, 60 * 1764))
    doc = {
        "videos": [
            {
                "video_id": "v",
                "fps": 25,
                "frame_count": 60,
                "width": 32,
                "height": 24,
                "audio_sample_rate": 44100,
                "regions": [s.to_json() for s in truth.spans],
            }
        ]
    }
    (tmp_path / "ann.json").write_text(json.dumps(doc))
    (tmp_path / "tiny.toml").write_text(TINY_TOML)
    (tmp_path / "pred").mkdir()
    (tmp_path / "pred" / "v.json").write_text(json.dumps(truth.to_json()))
    return tmp_path


def test_stats_matches_table(capsys):
    assert run(["stats", str(FIXTURE)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "label,clips,avg_dur_s,total_dur_h"
    assert "Story,631,78.03,13.68" in lines and "Transition,295,7.82,0.64" in lines


def test_stats_writes_figure(tmp_path):
    assert run(["stats", str(FIXTURE), "--out", str(tmp_path / "dist.csv")]) == 0
    assert (tmp_path / "dist_distribution.png").stat().st_size > 0


def test_detect_from_stdin():
    video, _, _ = labeled_block_video([SceneLabel.STORY, SceneLabel.STUDIO], [20, 20], size=(64, 64))
    proc = subprocess.run(
        [sys.executable, "-m", "newsseg.cli", "detect", "--frames", "-", "--width", "64", "--height", "64", "--fps", "25"],
        input=video.tobytes(),
        capture_output=True,
        check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout) == {"fps": 25, "boundaries": [20], "frame_count": 40}


def test_detect_fractional_fps(corpus, capsys):
    assert run(["detect", "--frames", str(corpus / "v.rgb"), "--width", "32", "--height", "24", "--fps", "30000/1001"]) == 0
    assert json.loads(capsys.readouterr().out)["fps"] == "30000/1001"


def test_unknown_subcommand(capsys):
    assert run(["transmogrify"]) == 1
    assert "usage" in capsys.readouterr().err


def test_no_subcommand(capsys):
    assert run([]) == 1


def test_validation_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"videos": [{"video_id": "x"}]}))
    assert run(["stats", str(bad), "--json-errors"]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["exit_code"] == 1 and err["error"] == "SchemaError"


def test_io_error_exit_code(tmp_path, capsys):
    assert run(["stats", str(tmp_path / "missing.json"), "--json-errors"]) == 2
    assert json.loads(capsys.readouterr().err)["exit_code"] == 2


def test_features_summary(corpus, capsys):
    args = ["features", "--audio", str(corpus / "v.wav"), "--fps", "25", "--start-frame", "0", "--end-frame", "60"]
    assert run([*args, "--out", str(corpus / "s.bin")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["frame_indices"][0] == 10 and out["frame_indices"][-1] == 49
    assert out["spectrogram_shape"] == [128, 51]
    assert (corpus / "s.bin").stat().st_size == 8 + 4 * 128 * 51


def test_features_short_span_strict(capsys):
    assert run(["features", "--fps", "25", "--start-frame", "0", "--end-frame", "20"]) == 1
    assert run(["features", "--fps", "25", "--start-frame", "0", "--end-frame", "3", "--mode", "clamp"]) == 0


def test_config_overrides(corpus, capsys):
    cfg = corpus / "det.toml"
    cfg.write_text("[detector]\nthreshold = 200.0\n")
    base = ["detect", "--frames", str(corpus / "v.rgb"), "--width", "32", "--height", "24", "--fps", "25", "--config", str(cfg)]
    assert run(base) == 0
    assert json.loads(capsys.readouterr().out)["boundaries"] == []
    assert run([*base, "--threshold", "27", "--log-level", "INFO"]) == 0
    captured = capsys.readouterr()
    assert json.loads(captured.out)["boundaries"] == [30]
    # the effective config is echoed to the run log
    assert '"threshold": 27.0' in captured.err


def test_unknown_config_key(corpus):
    cfg = corpus / "bad.toml"
    cfg.write_text("[detector]\nthreshhold = 3\n")
    assert run(["detect", "--frames", str(corpus / "v.rgb"), "--width", "32", "--height", "24", "--fps", "25", "--config", str(cfg)]) == 1


def test_train_segment_evaluate(corpus, capsys):
    w = corpus / "w.nsg"
    assert run(["train", "--model", "fusion", "--data", "synthetic", "--config", str(corpus / "tiny.toml"), "--max-epochs", "2", "--out", str(w)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["epochs"] == 2
    assert (corpus / "w_epochs.csv").exists() and (corpus / "w_epochs_curves.png").exists()

    seg = ["segment", "--frames", str(corpus / "v.rgb"), "--width", "32", "--height", "24", "--fps", "25", "--model", str(w)]
    assert run(seg) == 1  # fusion needs audio
    capsys.readouterr()
    assert run([*seg, "--audio", str(corpus / "v.wav"), "--out", str(corpus / "pred" / "v.json")]) == 0
    timeline = json.loads((corpus / "pred" / "v.json").read_text())
    assert timeline["spans"][0]["start_frame"] == 0 and timeline["spans"][-1]["end_frame"] == 60

    assert run(["evaluate", "--annotations", str(corpus / "ann.json"), "--pred-dir", str(corpus / "pred"), "--report", str(corpus / "r.csv")]) == 0
    assert (corpus / "r_confusion.png").stat().st_size > 0
    assert (corpus / "r.csv").read_text().splitlines()[6] == "model,accuracy,total_s,excluded_s"


def test_binary_training(corpus, capsys):
    w = corpus / "b.nsg"
    args = ["train", "--model", "binary:Story", "--data", "synthetic", "--config", str(corpus / "tiny.toml"), "--max-epochs", "1", "--out", str(w), "--no-figures"]
    assert run(args) == 0
    from newsseg.models import load_parameters

    assert load_parameters(w).kind == "binary:Story:fusion"


def test_evaluate_report(corpus, capsys):
    assert run(["evaluate", "--annotations", str(corpus / "ann.json"), "--pred-dir", str(corpus / "pred"), "--report", str(corpus / "r.csv"), "--model-name", "truth"]) == 0
    rows = (corpus / "r.csv").read_text().splitlines()
    assert rows[-1] == "truth,1.0000,2.400,0.000"


class TestReproducible:
    def test_train_weights_and_log(self, corpus, capsys):
        outs = []
        for i in range(2):
            w = corpus / f"w{i}.nsg"
            assert run(["train", "--model", "ast", "--data", "synthetic", "--config", str(corpus / "tiny.toml"), "--max-epochs", "2", "--seed", "7", "--out", str(w)]) == 0
            outs.append((w.read_bytes(), (corpus / f"w{i}_epochs.csv").read_bytes(), (corpus / f"w{i}_epochs_curves.png").read_bytes()))
        assert outs[0] == outs[1]

    def test_evaluate_and_figures(self, corpus, capsys):
        outs = []
        for i in range(2):
            rep = corpus / f"r{i}.csv"
            assert run(["evaluate", "--annotations", str(corpus / "ann.json"), "--pred-dir", str(corpus / "pred"), "--report", str(rep)]) == 0
            outs.append((rep.read_bytes(), (corpus / f"r{i}_confusion.png").read_bytes()))
        assert outs[0] == outs[1]

    def test_stats_and_detect(self, corpus, capsys):
        for cmd in (
            ["stats", str(FIXTURE)],
            ["detect", "--frames", str(corpus / "v.rgb"), "--width", "32", "--height", "24", "--fps", "25", "--workers", "1"],
        ):
            assert run(cmd) == 0
            first = capsys.readouterr().out
            assert run(cmd) == 0
            assert capsys.readouterr().out == first


def _subparsers():
    parser = build_parser()
    action = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    return action.choices


@pytest.mark.parametrize("name", ["stats", "detect", "features", "train", "segment", "evaluate"])
def test_help_documents_every_flag(name):
    sub = _subparsers()[name]
    text = sub.format_help()
    for action in sub._actions:
        if isinstance(action, argparse._HelpAction):
            continue
        assert action.help, f"{name}: {action.dest} has no help text"
        for opt in action.option_strings or [action.dest]:
            assert opt in text, f"{name}: {opt} missing from --help"


def test_help_exits_zero():
    proc = subprocess.run([sys.executable, "-m", "newsseg.cli", "train", "--help"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "--max-epochs" in proc.stdout
