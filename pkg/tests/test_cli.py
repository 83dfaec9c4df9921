import json
import os

import numpy as np
import pytest

from sketchvision import cli, fixtures
from sketchvision.core import load_latent, save_latent


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


COMMANDS = ["prepare", "train", "train-field", "infer", "encode", "render",
            "interp", "sketchify", "serve"]


@pytest.mark.parametrize("command", COMMANDS)
def test_help_exits_zero(command):
    with pytest.raises(SystemExit) as e:
        cli.main([command, "--help"])
    assert e.value.code == 0


def test_missing_command_is_usage_error():
    with pytest.raises(SystemExit) as e:
        cli.main([])
    assert e.value.code == 1


def test_missing_required_flag_is_usage_error():
    with pytest.raises(SystemExit) as e:
        cli.main(["prepare", "--photos", "x"])
    assert e.value.code == 1


def test_unknown_config_key_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as e:
        cli.main(["train", "--data", str(tmp_path), "--out",
                  str(tmp_path / "o.ckpt"), "--opt", "bogus_key=1"])
    assert e.value.code == 1


def test_prepare_empty_dir_exit_2(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    code, _, err = run_cli(capsys, "prepare", "--photos", str(empty),
                           "--out", str(tmp_path / "out"))
    assert code == 2
    assert "error" in err


def test_prepare_reports_count(tmp_path, capsys):
    photos = tmp_path / "photos"
    fixtures.write_shape_corpus(photos, n=5, size=32, seed=0)
    code, out, _ = run_cli(capsys, "prepare", "--photos", str(photos),
                           "--out", str(tmp_path / "data"))
    assert code == 0
    assert "prepared 5 triplets" in out


def test_prepare_byte_identical_same_seed(tmp_path, capsys):
    photos = tmp_path / "photos"
    fixtures.write_shape_corpus(photos, n=4, size=32, seed=1)
    for name in ("a", "b"):
        code, _, _ = run_cli(capsys, "prepare", "--photos", str(photos),
                             "--out", str(tmp_path / name), "--seed", "9")
        assert code == 0
    for sub in ("photos", "sketches", "depths"):
        for f in sorted(os.listdir(tmp_path / "a" / sub)):
            assert (tmp_path / "a" / sub / f).read_bytes() == \
                (tmp_path / "b" / sub / f).read_bytes()
    assert (tmp_path / "a" / "style_order.json").read_bytes() == \
        (tmp_path / "b" / "style_order.json").read_bytes()


def test_infer_missing_checkpoint_exit_2(tmp_path, capsys):
    photos = tmp_path / "photos"
    fixtures.write_shape_corpus(photos, n=1, size=32, seed=0)
    sketch = sorted(photos.glob("*.png"))[0]
    code, _, err = run_cli(capsys, "infer", "--sketch", str(sketch),
                           "--ckpt", str(tmp_path / "missing.ckpt"),
                           "--out", str(tmp_path / "o.png"))
    assert code == 2


def test_sketchify_command(tmp_path, capsys):
    photos = tmp_path / "photos"
    fixtures.write_shape_corpus(photos, n=1, size=32, seed=2)
    photo = sorted(photos.glob("*.png"))[0]
    out = tmp_path / "sk.png"
    code, _, _ = run_cli(capsys, "sketchify", "--photo", str(photo),
                         "--out", str(out))
    assert code == 0
    assert out.is_file()


def test_render_turntable_count(tmp_path, capsys, trained_field):
    table = trained_field["table"]
    z = table[sorted(table)[0]]
    zp = tmp_path / "z.latent.json"
    save_latent(z, zp)
    sheet = tmp_path / "sheet.png"
    code, out, _ = run_cli(capsys, "render", "--latent", str(zp),
                           "--field", trained_field["path"],
                           "--out", str(tmp_path / "views"),
                           "--turntable", "4",
                           "--contact-sheet", str(sheet),
                           "--opt", "render_size=32",
                           "--opt", "samples_per_ray=16")
    assert code == 0
    files = sorted(os.listdir(tmp_path / "views"))
    assert files == [f"view_{i:03d}.png" for i in range(4)]
    assert sheet.is_file()


def test_interp_two_steps(tmp_path, capsys, trained_field):
    table = trained_field["table"]
    ids = sorted(table)
    pa, pb = tmp_path / "a.latent.json", tmp_path / "b.latent.json"
    save_latent(table[ids[0]], pa)
    save_latent(table[ids[1]], pb)
    strip = tmp_path / "strip.png"
    code, _, _ = run_cli(capsys, "interp", "--a", str(pa), "--b", str(pb),
                         "--n", "2", "--field", trained_field["path"],
                         "--out", str(tmp_path / "morph"),
                         "--strip-plot", str(strip),
                         "--opt", "render_size=24",
                         "--opt", "samples_per_ray=12")
    assert code == 0
    assert sorted(os.listdir(tmp_path / "morph")) == ["step_000.png",
                                                      "step_001.png"]
    assert strip.is_file()


def test_encode_writes_latent_and_curve(tmp_path, capsys, trained_field):
    photos = tmp_path / "photos"
    fixtures.write_shape_corpus(photos, n=1, size=32, seed=3)
    photo = sorted(photos.glob("*.png"))[0]
    zp = tmp_path / "z.latent.json"
    curve = tmp_path / "curve.png"
    code, out, _ = run_cli(capsys, "encode", "--photo", str(photo),
                           "--field", trained_field["path"],
                           "--out", str(zp), "--budget", "5",
                           "--curve-plot", str(curve),
                           "--opt", "render_size=24",
                           "--opt", "samples_per_ray=12")
    assert code == 0
    z = load_latent(zp)
    assert z.shape == (trained_field["field"].latent_dim,)
    assert curve.is_file()


def test_train_and_infer_smoke(tmp_path, capsys):
    photos = tmp_path / "photos"
    fixtures.write_shape_corpus(photos, n=4, size=32, seed=4)
    data = tmp_path / "data"
    run_cli(capsys, "prepare", "--photos", str(photos), "--out", str(data))
    ckpt = tmp_path / "gen.ckpt"
    log = tmp_path / "loss.csv"
    plot = tmp_path / "loss.png"
    opts = ["--opt", "image_size=32", "--opt", "base_channels=8",
            "--opt", "residual_blocks=1", "--opt", "batch_size=2"]
    code, out, _ = run_cli(capsys, "train", "--data", str(data),
                           "--out", str(ckpt), "--steps", "3",
                           "--loss-log", str(log), "--loss-plot", str(plot),
                           *opts)
    assert code == 0
    assert "trained 3 steps" in out
    assert len(log.read_text().strip().split("\n")) == 4
    assert plot.is_file()

    out_png = tmp_path / "photo.png"
    sketch = sorted((data / "sketches").glob("*.png"))[0]
    code, _, _ = run_cli(capsys, "infer", "--sketch", str(sketch),
                         "--ckpt", str(ckpt), "--out", str(out_png), *opts)
    assert code == 0
    assert out_png.is_file()
