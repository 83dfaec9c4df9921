import os

import numpy as np
import pytest

from sketchvision import fixtures, inverse_drawings as idw, neural_field as nf
from sketchvision import pipeline as pl


@pytest.fixture(scope="session")
def toy_cfg():
    return fixtures.toy_config(samples_per_ray=32, render_size=48,
                               encode_iterations=40)


@pytest.fixture(scope="session")
def scenes64():
    return fixtures.sphere_cube_scenes(image_size=64, n_views=6, samples_per_ray=48)


@pytest.fixture(scope="session")
def trained_field(toy_cfg, scenes64, tmp_path_factory):
    """Two-scene auto-decoder trained once per session; also saved as a
    checkpoint file for the CLI/service tests."""
    field = nf.MLPField(toy_cfg.latent_dim, toy_cfg.pe_frequencies,
                        toy_cfg.field_hidden, toy_cfg.field_layers)
    field, table = nf.train_field(field, scenes64, toy_cfg, seed=0,
                                  iterations=10000, rays_per_batch=1024,
                                  target_psnr=22.0, eval_every=250)
    path = tmp_path_factory.mktemp("field") / "field.ckpt"
    nf.save_field(field, table, toy_cfg, path)
    return {"field": field, "table": table, "path": str(path),
            "scenes": scenes64, "config": toy_cfg}


@pytest.fixture(scope="session")
def shape_dataset(tmp_path_factory):
    """32-image synthetic shapes corpus prepared into the triplet tree."""
    root = tmp_path_factory.mktemp("shapes")
    photos = root / "photos_raw"
    fixtures.write_shape_corpus(photos, n=32, size=64, seed=3)
    data = root / "data"
    summary = pl.prepare_dataset(photos, data, seed=3)
    assert summary["count"] == 32
    return str(data)


@pytest.fixture(scope="session")
def smoke_generator(shape_dataset, tmp_path_factory):
    """200-step smoke training run on the shapes corpus (the loss-curve
    acceptance run); checkpoint + CSV shared with the CLI tests."""
    cfg = fixtures.toy_config(image_size=64)
    state = idw.train(shape_dataset, cfg, seed=0, steps=200)
    d = tmp_path_factory.mktemp("gen")
    ckpt_path = d / "generator.ckpt"
    csv_path = d / "loss.csv"
    idw.save_train_state(state, cfg, ckpt_path)
    idw.export_loss_log(state, csv_path)
    return {"state": state, "config": cfg, "path": str(ckpt_path),
            "csv": str(csv_path)}


@pytest.fixture()
def registry(trained_field, smoke_generator):
    return pl.BackendRegistry.from_checkpoints(smoke_generator["path"],
                                               trained_field["path"])
