"""Operator CLI: every pipeline capability scriptable without the UI.

Exit codes: 0 success, 1 usage error, 2 runtime failure. Each command
prints one structured summary line on stdout; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import fixtures, inverse_drawings as idw, neural_field as nf
from . import pipeline as pl
from . import plotting
from .core import (Camera, Config, load_image, load_latent, save_image,
                   save_latent, turntable_cameras)
from .errors import SketchVisionError
from .sketchify import get_backend, pseudo_depth, sketchify


class CliParser(argparse.ArgumentParser):
    def error(self, message):
        print(f"usage error: {message}", file=sys.stderr)
        sys.exit(1)


def _load_config(args) -> Config:
    if getattr(args, "config", None):
        cfg = Config.from_json(args.config)
    else:
        cfg = Config()
    for kv in getattr(args, "opt", None) or []:
        key, _, value = kv.partition("=")
        if not hasattr(cfg, key):
            print(f"usage error: unknown config key {key!r}", file=sys.stderr)
            sys.exit(1)
        current = getattr(cfg, key)
        setattr(cfg, key, type(current)(json.loads(value))
                if isinstance(current, (int, float)) else value)
    return cfg.validate()


def cmd_prepare(args):
    backend = get_backend(args.backend)
    summary = pl.prepare_dataset(args.photos, args.out, backend, args.seed,
                                 image_size=args.size)
    print(f"prepared {summary['count']} triplets -> {summary['out_dir']}"
          + (f" ({len(summary['skipped'])} skipped)" if summary["skipped"] else ""))


def cmd_train(args):
    cfg = _load_config(args)
    state = None
    if args.resume:
        state = idw.load_train_state(args.resume, cfg)
    state = idw.train(args.data, cfg, args.seed, args.steps, state=state)
    idw.save_train_state(state, cfg, args.out)
    if args.loss_log:
        idw.export_loss_log(state, args.loss_log)
        if args.loss_plot:
            plotting.plot_loss_log(args.loss_log, args.loss_plot)
    print(f"trained {state.step} steps -> {args.out}"
          f" (final total {state.loss_history['total'][-1]:.4f})")


def cmd_train_field(args):
    cfg = _load_config(args)
    scenes = fixtures.read_scenes_dir(args.scenes)
    field = nf.MLPField(cfg.latent_dim, cfg.pe_frequencies, cfg.field_hidden,
                        cfg.field_layers)
    field, table = nf.train_field(field, scenes, cfg, seed=args.seed,
                                  iterations=args.iterations,
                                  target_psnr=args.target_psnr,
                                  log_every=args.log_every)
    nf.save_field(field, table, cfg, args.out)
    psnrs = {}
    for i, (sid, pairs) in enumerate(scenes):
        img, cam = pairs[0]
        out = nf.render(field, table[sid], cam, cfg.samples_per_ray,
                        cfg.background, seed=0, config=cfg)
        psnrs[sid] = round(nf.psnr(out, img), 2)
    print(f"trained field on {len(scenes)} scenes -> {args.out} psnr={psnrs}")


def cmd_infer(args):
    cfg = _load_config(args)
    gen = idw.load_generator(args.ckpt)
    sketch = load_image(args.sketch, 1)
    photo = idw.generate(gen, sketch)
    save_image(photo, args.out)
    print(f"inferred photo {photo.shape[1]}x{photo.shape[0]} -> {args.out}")


def cmd_encode(args):
    cfg = _load_config(args)
    field, _ = nf.load_field(args.field)
    photo = load_image(args.photo, 3)
    from .core import resize

    cam = pl.frontal_camera(cfg)
    target = resize(photo, cfg.render_size)
    result = nf.encode(field, target, cam, args.budget, seed=args.seed,
                       lr=cfg.encode_lr, samples_per_ray=cfg.samples_per_ray,
                       config=cfg)
    save_latent(result.latent, args.out)
    if args.curve_plot:
        plotting.plot_encode_curve(result.loss_curve, args.curve_plot)
    print(f"encoded -> {args.out} (loss {result.final_loss:.5f} after "
          f"{result.iterations_used} iterations)")


def cmd_render(args):
    cfg = _load_config(args)
    field, _ = nf.load_field(args.field)
    z = load_latent(args.latent)
    cams = turntable_cameras(args.turntable, radius=2.0, fov=50.0,
                             image_size=cfg.render_size)
    frames = nf.decode(z, field, cams, cfg.samples_per_ray, cfg.background,
                       seed=args.seed, config=cfg)
    paths = nf.export_turntable(frames, args.out)
    if args.contact_sheet:
        plotting.plot_image_strip(frames, args.contact_sheet)
    print(f"rendered {len(paths)} views -> {args.out}")


def cmd_interp(args):
    cfg = _load_config(args)
    field, _ = nf.load_field(args.field)
    za, zb = load_latent(args.a), load_latent(args.b)
    steps = nf.interpolate(za, zb, args.n)
    os.makedirs(args.out, exist_ok=True)
    frames = []
    for i, z in enumerate(steps):
        if args.turntable:
            cams = turntable_cameras(args.turntable, radius=2.0, fov=50.0,
                                     image_size=cfg.render_size)
            views = nf.decode(z, field, cams, cfg.samples_per_ray,
                              cfg.background, seed=args.seed, config=cfg)
            nf.export_turntable(views, os.path.join(args.out, f"step_{i:03d}"))
            frames.append(views[0])
        else:
            frame = nf.render(field, z, pl.frontal_camera(cfg),
                              cfg.samples_per_ray, cfg.background,
                              seed=args.seed, config=cfg)
            save_image(frame, os.path.join(args.out, f"step_{i:03d}.png"))
            frames.append(frame)
    if args.strip_plot:
        plotting.plot_image_strip(frames, args.strip_plot)
    print(f"interpolated {args.n} steps -> {args.out}")


def cmd_sketchify(args):
    backend = get_backend(args.backend)
    photo = load_image(args.photo, 3)
    sketch = sketchify(photo, backend)
    save_image(sketch, args.out)
    print(f"sketchified -> {args.out}")


def cmd_serve(args):
    cfg = _load_config(args)
    from . import service

    registry = pl.BackendRegistry.from_checkpoints(args.generator, args.field)
    jobs_root = args.jobs_dir or os.environ.get("SKETCHVISION_JOBS_DIR", "jobs")
    print(f"serving on port {args.port} (jobs in {jobs_root})")
    service.serve(jobs_root, registry, cfg, port=args.port, host=args.host,
                  max_upload=args.max_upload)


def build_parser() -> CliParser:
    p = CliParser(prog="sketchvision",
                  description="sketch <-> photo <-> 3D pipeline tools")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        sp.add_argument("--seed", type=int, default=0)
        if config:
            sp.add_argument("--config", help="JSON config file")
            sp.add_argument("--opt", action="append", metavar="KEY=VALUE",
                            help="override one config key (repeatable)")

    sp = sub.add_parser("prepare", help="build photo/sketch/depth triplets")
    sp.add_argument("--photos", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--backend", default="fallback")
    sp.add_argument("--size", type=int, default=None,
                    help="resize photos to this square size")
    common(sp, config=False)
    sp.set_defaults(fn=cmd_prepare)

    sp = sub.add_parser("train", help="train the sketch->photo generator")
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--steps", type=int, default=200)
    sp.add_argument("--resume", help="checkpoint to continue from")
    sp.add_argument("--loss-log", help="write per-step loss CSV here")
    sp.add_argument("--loss-plot", help="write loss-curve figure here")
    common(sp)
    sp.set_defaults(fn=cmd_train)

    sp = sub.add_parser("train-field", help="train the toy implicit field")
    sp.add_argument("--scenes", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--iterations", type=int, default=None)
    sp.add_argument("--target-psnr", type=float, default=None)
    sp.add_argument("--log-every", type=int, default=0)
    common(sp)
    sp.set_defaults(fn=cmd_train_field)

    sp = sub.add_parser("infer", help="sketch -> photo")
    sp.add_argument("--sketch", required=True)
    sp.add_argument("--ckpt", required=True)
    sp.add_argument("--out", required=True)
    common(sp)
    sp.set_defaults(fn=cmd_infer)

    sp = sub.add_parser("encode", help="photo -> latent by optimization")
    sp.add_argument("--photo", required=True)
    sp.add_argument("--field", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--budget", type=int, default=500)
    sp.add_argument("--curve-plot", help="write optimization curve figure")
    common(sp)
    sp.set_defaults(fn=cmd_encode)

    sp = sub.add_parser("render", help="latent -> turntable renders")
    sp.add_argument("--latent", required=True)
    sp.add_argument("--field", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--turntable", type=int, default=8)
    sp.add_argument("--contact-sheet", help="write contact-sheet figure")
    common(sp)
    sp.set_defaults(fn=cmd_render)

    sp = sub.add_parser("interp", help="latent interpolation frames")
    sp.add_argument("--a", required=True)
    sp.add_argument("--b", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--field", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--turntable", type=int, default=0,
                    help="render a full turntable per step instead of one frame")
    sp.add_argument("--strip-plot", help="write morph-strip figure")
    common(sp)
    sp.set_defaults(fn=cmd_interp)

    sp = sub.add_parser("sketchify", help="photo -> line drawing")
    sp.add_argument("--photo", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--backend", default="fallback")
    common(sp, config=False)
    sp.set_defaults(fn=cmd_sketchify)

    sp = sub.add_parser("serve", help="run the HTTP service")
    sp.add_argument("--port", type=int, default=8787)
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--jobs-dir")
    sp.add_argument("--generator")
    sp.add_argument("--field")
    sp.add_argument("--max-upload", type=int, default=8 * 1024 * 1024)
    common(sp)
    sp.set_defaults(fn=cmd_serve)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
        return 0
    except (SketchVisionError, FileNotFoundError, ValueError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
