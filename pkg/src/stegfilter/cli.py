"""Command-line front-end.

Subcommands: ``synth``, ``filter``, ``stego-demo``, ``postproc``, ``eval`` and
``pipeline``. Exit status is 0 on success, 1 on invalid input or
configuration, 2 when a processing stage fails.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import dct, evalmetrics, masksynth, postproc, stegosim
from .imagecore import (
    ImageFormatError,
    ImageGrid,
    load_image,
    load_instance_mask,
    normalize,
    save_image,
    save_instance_mask,
)
from .pipeline import ConfigError, StageError, image_seed, parse_config, run_pipeline

EXIT_OK, EXIT_INVALID, EXIT_STAGE = 0, 1, 2


def _global_flags():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=None, help="base random seed")
    p.add_argument("--config", type=Path, default=None, help="key=value configuration file")
    p.add_argument("--out-dir", type=Path, default=None, help="output directory")
    p.add_argument("--jobs", type=int, default=None, help="worker processes")
    return p


def _taus(text):
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid tau list {text!r}") from None


def build_parser():
    glob = _global_flags()
    parser = argparse.ArgumentParser(prog="stegfilter", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[glob], help="write synthetic instance masks")
    p.add_argument("--preset", default="dsb")
    p.add_argument("--count", type=int, default=1500)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--separation", type=int, default=0)
    p.add_argument("--max-attempts", type=int, default=100)

    p = sub.add_parser("filter", parents=[glob], help="DCT low-pass filter an image")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--keep-fraction", type=float, default=0.5)
    p.add_argument("--ordering", choices=dct.ORDERINGS, default="radial")
    p.add_argument("--mask-out", type=Path, default=None, help="also export the frequency mask")

    p = sub.add_parser("stego-demo", parents=[glob], help="embed, filter and report")
    p.add_argument("--carrier", type=Path, required=True)
    p.add_argument("--payload", type=Path, required=True)
    p.add_argument("--epsilon", type=float, default=0.01)
    p.add_argument("--payload-side", type=int, default=16)
    p.add_argument("--keep-fraction", type=float, default=0.5)
    p.add_argument("--ordering", choices=dct.ORDERINGS, default="radial")

    p = sub.add_parser("postproc", parents=[glob], help="binary mask PNG -> label PNG")
    p.add_argument("--in", dest="input", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--threshold", type=float, default=None,
                   help="default: midpoint of the image's value range")
    p.add_argument("--max-hole-area", type=int, default=64)
    p.add_argument("--min-marker-distance", type=float, default=5.0)
    p.add_argument("--min-marker-height", type=float, default=2.0)
    p.add_argument("--min-marker-dynamic", type=float, default=1.0)

    p = sub.add_parser("eval", parents=[glob], help="score label PNGs against ground truth")
    p.add_argument("--pred-dir", type=Path, required=True)
    p.add_argument("--gt-dir", type=Path, required=True)
    p.add_argument("--tau", type=_taus, default=(0.5, 0.75))
    p.add_argument("--out", type=Path, default=None, help="write the table here instead of stdout")

    p = sub.add_parser("pipeline", parents=[glob], help="run the end-to-end pipeline")
    for key in ("preset", "ordering", "tau"):
        p.add_argument("--" + key.replace("_", "-"), default=None)
    for key in ("count", "size", "payload_side", "max_hole_area", "separation"):
        p.add_argument("--" + key.replace("_", "-"), type=int, default=None)
    for key in ("keep_fraction", "epsilon", "band_fraction", "threshold", "min_marker_distance",
                "min_marker_height", "min_marker_dynamic"):
        p.add_argument("--" + key.replace("_", "-"), type=float, default=None)
    return parser


def _cmd_synth(args):
    out = args.out_dir or Path("synth_out")
    out.mkdir(parents=True, exist_ok=True)
    base = args.seed or 0
    preset = masksynth.load_preset(args.preset, (args.size, args.size))
    lines = [f"# preset={args.preset} count={args.count} size={args.size} seed={base}"]
    for i in range(args.count):
        seed = image_seed(base, i)
        mask, info = masksynth.synthesize_mask(preset, seed, args.max_attempts,
                                               args.separation, return_info=True)
        name = f"{i:04d}.png"
        save_instance_mask(mask, out / name)
        lines.append(f"{name}\tseed={seed}\trow={info.row_index}\trequested={info.requested}"
                     f"\tplaced={mask.instance_count}")
        lines.extend(f"warning\t{name}\t{w}" for w in info.warnings)
    (out / "manifest.txt").write_text("\n".join(lines) + "\n")


def _cmd_filter(args):
    img = load_image(args.input)
    fmask = dct.build_frequency_mask(*img.shape, args.keep_fraction, args.ordering)
    out = dct.lowpass_filter(img, fmask)
    clipped = ImageGrid(np.clip(out.values, *img.value_range), img.value_range)
    save_image(clipped, args.out, 16 if img.value_range[1] > 255 else 8)
    if args.mask_out:
        dct.save_frequency_mask(fmask, args.mask_out)


def _load_carrier(path):
    img = load_image(path)
    return normalize(img, (-1.0, 1.0))


def _cmd_stego_demo(args):
    out = args.out_dir or Path("stego_demo")
    out.mkdir(parents=True, exist_ok=True)
    carrier = _load_carrier(args.carrier)
    payload = postproc.binarize(load_image(args.payload))
    cfg = stegosim.StegoConfig(args.payload_side, args.epsilon)
    fmask = dct.build_frequency_mask(*carrier.shape, args.keep_fraction, args.ordering)
    stego = stegosim.embed(carrier, payload, cfg)
    filtered = dct.lowpass_filter(stego, fmask)
    diff = np.abs(stego.values - filtered.values)
    save_image(ImageGrid(np.clip(stego.values, -1, 1), (-1, 1)), out / "stego.png", 16)
    save_image(ImageGrid(np.clip(filtered.values, -1, 1), (-1, 1)), out / "filtered.png", 16)
    save_image(ImageGrid(diff, (0.0, max(float(diff.max()), 1e-12))), out / "difference.png", 16)
    report = stegosim.stego_report(carrier, payload, cfg, fmask)
    (out / "report.txt").write_text(report.to_text())
    sys.stdout.write(report.to_text())


def _cmd_postproc(args):
    img = load_image(args.input)
    labels = postproc.image_to_instances(
        img, args.threshold, args.max_hole_area, args.min_marker_distance,
        args.min_marker_height, args.min_marker_dynamic,
    )
    save_instance_mask(labels, args.out)


def _cmd_eval(args):
    if not args.tau or any(not 0.5 <= t <= 1 for t in args.tau):
        raise ValueError(f"tau values must lie in [0.5, 1], got {args.tau}")
    gt_files = sorted(args.gt_dir.glob("*.png"))
    if not gt_files:
        raise FileNotFoundError(f"no PNG files in {args.gt_dir}")
    rows = ["image\ttau\ttp\tfp\tfn\tprecision\trecall\tf1"]
    per_tau = {t: [] for t in args.tau}
    for gt_path in gt_files:
        pred_path = args.pred_dir / gt_path.name
        if not pred_path.is_file():
            raise FileNotFoundError(f"missing prediction for {gt_path.name} in {args.pred_dir}")
        gt = load_instance_mask(gt_path)
        pred = load_instance_mask(pred_path)
        for t in args.tau:
            m = evalmetrics.match_instances(pred, gt, t)
            per_tau[t].append(m)
            rows.append(_row(gt_path.name, t, m.tp, m.fp, m.fn, evalmetrics.prf_scores(m)))
    for t, ms in per_tau.items():
        tp, fp, fn = (sum(getattr(m, k) for m in ms) for k in ("tp", "fp", "fn"))
        rows.append(_row("ALL(pooled)", t, tp, fp, fn, evalmetrics.pool_matches(ms)))
        rows.append(_row("ALL(image_mean)", t, tp, fp, fn, evalmetrics.mean_scores(ms)))
    text = "\n".join(rows) + "\n"
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)


def _row(name, tau, tp, fp, fn, s):
    return f"{name}\t{tau:g}\t{tp}\t{fp}\t{fn}\t{s.precision:.4f}\t{s.recall:.4f}\t{s.f1:.4f}"


def _cmd_pipeline(args):
    keys = ("preset", "ordering", "tau", "count", "size", "payload_side", "max_hole_area",
            "separation", "keep_fraction", "epsilon", "band_fraction", "threshold",
            "min_marker_distance", "min_marker_height", "min_marker_dynamic", "seed", "jobs")
    overrides = {k: getattr(args, k) for k in keys}
    overrides["out_dir"] = str(args.out_dir) if args.out_dir else None
    cfg = parse_config(args.config, overrides)
    summary = run_pipeline(cfg)
    for tau, sc in summary["scores"].items():
        s = sc["pooled"]
        print(f"tau={tau:g}\tprecision={s.precision:.4f}\trecall={s.recall:.4f}\tf1={s.f1:.4f}")
    print(f"ber_prefilter={summary['ber_prefilter']:.4f}\t"
          f"ber_postfilter={summary['ber_postfilter']:.4f}\tpsnr={summary['psnr']:.2f}")


_COMMANDS = {
    "synth": _cmd_synth,
    "filter": _cmd_filter,
    "stego-demo": _cmd_stego_demo,
    "postproc": _cmd_postproc,
    "eval": _cmd_eval,
    "pipeline": _cmd_pipeline,
}


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; here 2 is reserved for stage failures
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    try:
        _COMMANDS[args.command](args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (ConfigError, ImageFormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
