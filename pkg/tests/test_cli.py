import numpy as np
import pytest
import yaml

from urbanlabel import io
from urbanlabel.cli import main
from urbanlabel.synthgen import demo_spec, generate


@pytest.fixture(scope="module")
def scene_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("scene")
    return generate(demo_spec(density=80), d), d


def test_print_config(capsys):
    assert main(["print-config"]) == 0
    d = yaml.safe_load(capsys.readouterr().out)
    assert d["ground"]["margin_m"] == 0.25


def test_label_eval_stats(scene_files, capsys, tmp_path):
    p, _ = scene_files
    out = tmp_path / "pred_2386_9702.csv"
    assert main(["label", "--cloud", p["cloud"], "--ground", p["ground"], "--roof", p["roof"],
                 "--topo", p["topo"], "--out", str(out), "--format", "triples"]) == 0
    assert "ground points" in capsys.readouterr().out
    assert main(["eval", "--pred", str(out), "--truth", p["truth"], "--format", "triples"]) == 0
    triples = dict((" ".join(l.split()[:2]), float(l.split()[2])) for l in capsys.readouterr().out.splitlines())
    assert triples["all mean_iou"] > 0.85
    assert main(["stats", "--cloud", p["truth"], "--format", "table"]) == 0
    assert capsys.readouterr().out.splitlines()[0].split() == ["class", "points", "percent"]
    assert main(["eval", "--pred", str(out), "--truth", p["truth"], "--ignore", "unlabelled"]) == 0


def test_synth_command(tmp_path, capsys):
    spec = tmp_path / "s.yaml"
    spec.write_text(demo_spec(density=20).dump())
    assert main(["synth", "--spec", str(spec), "--out-dir", str(tmp_path / "o")]) == 0
    paths = dict(l.split(" ", 1) for l in capsys.readouterr().out.splitlines())
    assert len(io.read_cloud_csv(paths["truth"])) > 0


@pytest.mark.parametrize("argv", [
    ["stats", "--cloud", "/nonexistent/x.csv"],
    ["print-config", "--config", "/nonexistent/c.yaml"],
])
def test_errors_are_one_line(argv, capsys):
    assert main(argv) != 0
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("error command=")


def test_bad_config_rejected(tmp_path, capsys):
    c = tmp_path / "c.yaml"
    c.write_text("ground:\n  margin_m: 0.25\n  extra: 1\n")
    assert main(["print-config", "--config", str(c)]) == 2
    assert "ConfigError" in capsys.readouterr().err


def test_invalid_pair(scene_files, tmp_path, capsys):
    p, _ = scene_files
    short = tmp_path / "short_2386_9702.csv"
    short.write_text("x,y,z,label\n119300.5,485100.5,1.0,1\n")
    assert main(["eval", "--pred", str(short), "--truth", p["truth"]]) == 2
    assert "InvalidPairError" in capsys.readouterr().err
