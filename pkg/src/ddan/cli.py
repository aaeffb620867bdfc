"""``ddan`` command line: data degradation, training, inference, evaluation and diagnostics."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .autograd.checkpoint import CheckpointError
from .data.io import LightFieldFormatError, load_lf, save_lf
from .data.lightfield import ColorTag, LightField, rgb_to_ycbcr, ycbcr_to_rgb
from .data.noise import add_gaussian_noise
from .data.resample import downsample, upsample
from .model import ModelConfig, ModelWeights, count_params, load_config, probe_attention, super_resolve

EXIT_FAILED_CHECK = 1
EXIT_USAGE = 2
EXIT_MISSING = 3
EXIT_FORMAT = 4
EXIT_MISMATCH = 5
EXIT_INVALID = 6
EXIT_TRAINING = 7

CONTAINER_SUFFIX = ".lfsr"


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------- helpers


def _require(path: Optional[str], flag: str) -> Path:
    if not path:
        raise CliError(f"{flag} is required", EXIT_USAGE)
    p = Path(path)
    if not p.exists():
        raise CliError(f"missing file: {p}", EXIT_MISSING)
    return p


def _config(args, scale_override: bool = True) -> ModelConfig:
    spec = args.config or "desk"
    try:
        cfg = load_config(spec)
    except FileNotFoundError:
        raise CliError(f"missing file: config {spec!r} is neither a preset nor a file", EXIT_MISSING)
    except ValueError as exc:
        raise CliError(f"malformed config {spec}: {exc}", EXIT_INVALID)
    if scale_override and args.scale is not None and args.scale != cfg.scale:
        cfg = cfg.with_(scale=args.scale)
    return cfg


def _weights(args, cfg: ModelConfig) -> ModelWeights:
    path = _require(args.ckpt, "--ckpt")
    try:
        return ModelWeights.load(cfg, path)
    except CheckpointError as exc:
        message = str(exc)
        if "mismatch" in message:
            raise CliError(message, EXIT_MISMATCH)
        raise CliError(f"malformed checkpoint {path}: {message}", EXIT_FORMAT)


def _load(path: Path) -> LightField:
    try:
        return load_lf(path)
    except LightFieldFormatError as exc:
        raise CliError(f"malformed container {path}: {exc}", EXIT_FORMAT)


def load_scenes(path: Path) -> List[Tuple[str, LightField]]:
    """A container file, a view directory, or a directory of ``*.lfsr`` containers."""
    if path.is_dir() and not any(path.glob("view_*")):
        files = sorted(path.glob(f"*{CONTAINER_SUFFIX}"))
        if not files:
            raise CliError(f"missing file: no {CONTAINER_SUFFIX} containers in {path}", EXIT_MISSING)
        return [(f.stem, _load(f)) for f in files]
    return [(path.stem, _load(path))]


def _parse_view(text: str) -> Tuple[int, int]:
    try:
        u, v = (int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected U,V (two integers), got {text!r}")
    return u, v


def _luma(lf: LightField) -> Tuple[np.ndarray, Optional[LightField]]:
    """(U, V, H, W) luma plus the YCbCr light field when the input has chroma."""
    lf = lf.to_real()
    if lf.color == ColorTag.Y:
        return lf.data[:, :, 0], None
    ycc = rgb_to_ycbcr(lf) if lf.color == ColorTag.RGB else lf
    return ycc.data[:, :, 0], ycc


# ---------------------------------------------------------------- commands


def cmd_degrade(args) -> int:
    src = _require(args.data, "--data")
    if not args.out:
        raise CliError("--out is required", EXIT_USAGE)
    lf = _load(src).to_real()
    a = args.scale or 2
    try:
        lr = np.clip(downsample(lf.data, a), 0.0, 1.0).astype(np.float32)
    except ValueError as exc:
        raise CliError(f"cannot degrade {src}: {exc}", EXIT_INVALID)
    save_lf(LightField(lr, lf.color), args.out)
    print(f"wrote {args.out}: {lf.H}x{lf.W} -> {lr.shape[-2]}x{lr.shape[-1]} per view")
    return 0


def cmd_train(args) -> int:
    from .model import init_weights, save_config
    from .train import TrainConfig, TrainingError, build_patches, load_checkpoint, train

    cfg = _config(args)
    scenes = load_scenes(_require(args.data, "--data"))
    if not args.out:
        raise CliError("--out is required", EXIT_USAGE)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tcfg = TrainConfig.desk(
        seed=args.seed,
        scale=cfg.scale,
        checkpoint=str(out / "model.ckpt"),
        trace_path=str(out / "trace.csv"),
        max_steps=args.max_steps,
        data_paths=(str(args.data),),
    )
    if args.epochs is not None:
        tcfg.epochs = args.epochs
    if args.batch is not None:
        if args.batch < 1:
            raise CliError("--batch must be >= 1", EXIT_INVALID)
        tcfg.batch_size = args.batch
    for name, lf in scenes:
        if (lf.U, lf.V) != (cfg.angular_u, cfg.angular_v):
            raise CliError(f"scene {name} has a {lf.U}x{lf.V} grid, config expects {cfg.angular_u}x{cfg.angular_v}", EXIT_INVALID)
    try:
        patches = build_patches([lf for _, lf in scenes], cfg.scale, tcfg.patch_size, tcfg.stride)
    except ValueError as exc:
        raise CliError(f"cannot cut training patches: {exc}", EXIT_INVALID)
    state = None
    if args.ckpt:
        path = _require(args.ckpt, "--ckpt")
        try:
            wts, state = load_checkpoint(path, cfg)
        except CheckpointError as exc:
            code = EXIT_MISMATCH if "mismatch" in str(exc) else EXIT_FORMAT
            raise CliError(str(exc), code)
    else:
        wts = init_weights(cfg, args.seed)
    save_config(cfg, out / "config.txt")
    try:
        result = train(cfg, wts, patches, tcfg, state)
    except TrainingError as exc:
        raise CliError(f"training failed: {exc}", EXIT_TRAINING)
    last = result.trace[-1].loss if result.trace else float("nan")
    print(f"trained {result.steps} steps on {len(patches)} patches; last loss {last:.6f}; checkpoint {tcfg.checkpoint}")
    return 0


def cmd_infer(args) -> int:
    cfg = _config(args)
    wts = _weights(args, cfg)
    src = _require(args.data, "--data")
    if not args.out:
        raise CliError("--out is required", EXIT_USAGE)
    lf = _load(src)
    if (lf.U, lf.V) != (cfg.angular_u, cfg.angular_v):
        raise CliError(f"input has a {lf.U}x{lf.V} grid, config expects {cfg.angular_u}x{cfg.angular_v}", EXIT_INVALID)
    y, ycc = _luma(lf)
    sr_y = np.clip(super_resolve(y, cfg, wts), 0.0, 1.0).astype(np.float32)
    if ycc is None:
        result = LightField(sr_y[:, :, None], ColorTag.Y)
    else:
        chroma = np.clip(upsample(ycc.data[:, :, 1:], cfg.scale), 0.0, 1.0).astype(np.float32)
        result = LightField(np.concatenate([sr_y[:, :, None], chroma], axis=2), ColorTag.YCBCR)
        if args.rgb:
            result = ycbcr_to_rgb(result)
    save_lf(result, args.out)
    print(f"wrote {args.out}: {result.U}x{result.V} views of {result.H}x{result.W}")
    return 0


def cmd_eval(args) -> int:
    from .evaluate import EvalReport, compare, evaluate

    hr_scenes = load_scenes(_require(args.data, "--data"))
    if not args.out:
        raise CliError("--out is required", EXIT_USAGE)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.sr:
        sr_scenes = load_scenes(_require(args.sr, "--sr"))
        if len(sr_scenes) != len(hr_scenes):
            raise CliError(f"--sr has {len(sr_scenes)} scenes, --data has {len(hr_scenes)}", EXIT_INVALID)
        report = EvalReport()
        for (name, hr), (_, sr) in zip(hr_scenes, sr_scenes):
            try:
                report.scenes.append(compare(sr, hr, name))
            except ValueError as exc:
                raise CliError(f"scene {name}: {exc}", EXIT_INVALID)
        report.write_csv(out / "report.csv")
        print(f"mean PSNR {report.mean_psnr:.4f} dB, SSIM {report.mean_ssim:.4f}")
        return 0
    cfg = _config(args)
    wts = _weights(args, cfg)
    try:
        report = evaluate(cfg, wts, hr_scenes)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_INVALID)
    report.write_csv(out / "report.csv")
    report.write_csv(out / "bicubic.csv", method="bicubic")
    print(
        f"model PSNR {report.mean_psnr:.4f} dB / SSIM {report.mean_ssim:.4f}; "
        f"bicubic PSNR {report.bicubic_psnr:.4f} dB / SSIM {report.bicubic_ssim:.4f}"
    )
    return 0


def cmd_gradcheck(args) -> int:
    from .gradcheck import run_suite

    results = run_suite(seed=args.seed)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:22s} max_rel_err={r.max_rel_err:.3e} entries={r.n_entries:6d} tol={r.tolerance:.0e} {status}")
    ok = all(r.passed for r in results)
    print(f"overall max rel. error {max(r.max_rel_err for r in results):.3e}: {'PASS' if ok else 'FAIL'}")
    return 0 if ok else EXIT_FAILED_CHECK


def cmd_probe(args) -> int:
    from .evaluate import attention_rows, write_attention_csv

    cfg = _config(args)
    if not cfg.use_va:
        raise CliError("view attention is disabled in this configuration", EXIT_INVALID)
    wts = _weights(args, cfg)
    src = _require(args.data, "--data")
    lf = _load(src)
    label = src.stem
    if args.noise_view is not None or args.noise_var is not None:
        if args.noise_view is None or args.noise_var is None:
            raise CliError("--noise-view and --noise-var must be given together", EXIT_USAGE)
        try:
            lf = add_gaussian_noise(lf.to_real(), args.noise_view, args.noise_var, args.seed)
        except (IndexError, ValueError) as exc:
            raise CliError(f"cannot add noise: {exc}", EXIT_INVALID)
        label += f"+noise{args.noise_var:g}@{args.noise_view[0]},{args.noise_view[1]}"
    y, _ = _luma(lf)
    if y.shape[:2] != (cfg.angular_u, cfg.angular_v):
        raise CliError(f"input has a {y.shape[0]}x{y.shape[1]} grid, config expects {cfg.angular_u}x{cfg.angular_v}", EXIT_INVALID)
    weights = probe_attention(y, cfg, wts)
    rows = attention_rows(weights, label)
    if args.out:
        write_attention_csv(args.out, rows)
    else:
        print("block,lr,view,weight")
        for block, lbl, view, w in rows:
            print(f"{block},{lbl},{view},{w:.8f}")
    return 0


def cmd_count(args) -> int:
    print(count_params(_config(args)))
    return 0


def cmd_synthesize(args) -> int:
    from .data.synthetic import synthetic_dataset

    if not args.out:
        raise CliError("--out is required", EXIT_USAGE)
    if args.count < 1:
        raise CliError("--count must be >= 1", EXIT_INVALID)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, lf in enumerate(synthetic_dataset(args.count, args.seed)):
        save_lf(lf, out / f"scene_{i:03d}{CONTAINER_SUFFIX}")
    print(f"wrote {args.count} light fields to {out}")
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ddan", description="Light-field super-resolution with dense dual attention.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    def add(name, fn, help_text, flags):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.set_defaults(func=fn)
        if "config" in flags:
            p.add_argument("--config", help="preset name or key=value config file (default: desk)")
        if "scale" in flags:
            p.add_argument("--scale", type=int, choices=(2, 4), help="upscaling factor")
        if "data" in flags:
            p.add_argument("--data", help="input container, view directory or directory of containers")
        if "out" in flags:
            p.add_argument("--out", help="output path")
        if "ckpt" in flags:
            p.add_argument("--ckpt", help="checkpoint file")
        if "seed" in flags:
            p.add_argument("--seed", type=int, default=0, help="seed for every random choice (default 0)")
        return p

    add("degrade", cmd_degrade, "bicubic-downsample an HR light field container", ("scale", "data", "out"))
    p = add("train", cmd_train, "train on HR light fields", ("config", "scale", "data", "out", "ckpt", "seed"))
    p.add_argument("--epochs", type=int, help="number of epochs (default 80)")
    p.add_argument("--batch", type=int, help="light-field patches per step (default 4)")
    p.add_argument("--max-steps", type=int, help="stop after this many optimizer steps")
    p = add("infer", cmd_infer, "super-resolve an LR light field container", ("config", "scale", "data", "out", "ckpt"))
    p.add_argument("--rgb", action="store_true", help="recombine chroma into an RGB container")
    p = add("eval", cmd_eval, "per-view PSNR/SSIM reports against HR ground truth", ("config", "scale", "data", "out", "ckpt"))
    p.add_argument("--sr", help="score this SR container (or directory) instead of running the model")
    add("gradcheck", cmd_gradcheck, "64-bit finite-difference checks of every op and the tiny model", ("seed",))
    p = add("probe-attention", cmd_probe, "view-attention weights per block as CSV", ("config", "scale", "data", "out", "ckpt", "seed"))
    p.add_argument("--noise-view", type=_parse_view, help="inject noise into view U,V")
    p.add_argument("--noise-var", type=float, help="noise variance")
    add("count-params", cmd_count, "print the trainable parameter count of a config", ("config", "scale"))
    p = add("synthesize", cmd_synthesize, "write procedural HR light fields", ("out", "seed"))
    p.add_argument("--count", type=int, default=24, help="number of scenes (default 24)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"ddan {args.command}: error: {exc}", file=sys.stderr)
        return exc.code
    except ValueError as exc:
        print(f"ddan {args.command}: error: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
