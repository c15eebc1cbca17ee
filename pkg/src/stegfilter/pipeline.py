"""End-to-end run: synth -> carrier + stego -> DCT filter -> postproc -> eval.

The stego codec stands in for a trained mask-to-image generator, and the
carrier is a procedural texture (smooth noisy background, brighter nucleus
interiors). Neither claims to reproduce a trained network; they give the
pipeline a realistic dynamic range and a known hidden channel.
"""

from __future__ import annotations

import hashlib
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import dct, evalmetrics, masksynth, postproc, stegosim
from .imagecore import ImageGrid, save_image, save_instance_mask

__all__ = [
    "ConfigError",
    "StageError",
    "PipelineConfig",
    "parse_config",
    "parse_config_text",
    "image_seed",
    "render_carrier",
    "run_pipeline",
]


class ConfigError(ValueError):
    """Unknown key or out-of-range value in a pipeline configuration."""


class StageError(RuntimeError):
    def __init__(self, stage, index, cause):
        super().__init__(f"stage {stage!r} failed on image {index}: {cause}")
        self.stage = stage
        self.index = index


def _taus(text):
    vals = tuple(float(t) for t in str(text).split(",") if t.strip())
    if not vals or any(not 0.5 <= t <= 1.0 for t in vals):
        raise ValueError
    return vals


# key -> (parser, validity check, description of the accepted range)
_FIELDS = {
    "preset": (str, lambda v: bool(v), "built-in name or preset file"),
    "out_dir": (str, lambda v: bool(v), "non-empty path"),
    "count": (int, lambda v: v >= 1, "integer >= 1"),
    "size": (int, lambda v: v >= 8, "integer >= 8"),
    "keep_fraction": (float, lambda v: 0.0 <= v <= 1.0, "[0, 1]"),
    "ordering": (str, lambda v: v in dct.ORDERINGS, "radial|diagonal"),
    "epsilon": (float, lambda v: v > 0, "> 0"),
    "payload_side": (int, lambda v: v >= 1, "integer >= 1"),
    "band_fraction": (float, lambda v: 0 < v <= 0.5, "(0, 0.5]"),
    "threshold": (float, lambda v: -1.0 <= v <= 1.0, "[-1, 1]"),
    "max_hole_area": (int, lambda v: v >= 0, "integer >= 0"),
    "min_marker_distance": (float, lambda v: v >= 0, ">= 0"),
    "min_marker_height": (float, lambda v: v >= 0, ">= 0"),
    "min_marker_dynamic": (float, lambda v: v >= 0, ">= 0"),
    "separation": (int, lambda v: v >= 0, "integer >= 0"),
    "tau": (_taus, lambda v: True, "comma-separated values in [0.5, 1]"),
    "seed": (int, lambda v: v >= 0, "integer >= 0"),
    "jobs": (int, lambda v: v >= 1, "integer >= 1"),
}


@dataclass(frozen=True)
class PipelineConfig:
    preset: str = "dsb"
    out_dir: str = "pipeline_out"
    count: int = 50
    size: int = 256
    keep_fraction: float = 0.5
    ordering: str = "radial"
    epsilon: float = 0.01
    payload_side: int = 16
    band_fraction: float = 0.5
    threshold: float = 0.0
    max_hole_area: int = 64
    min_marker_distance: float = 5.0
    min_marker_height: float = 2.0
    min_marker_dynamic: float = 1.0
    separation: int = 0
    tau: tuple = (0.5, 0.75)
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        for f in fields(self):
            _, ok, desc = _FIELDS[f.name]
            if not ok(getattr(self, f.name)):
                raise ConfigError(f"{f.name}={getattr(self, f.name)!r} out of range; accepted: {desc}")

    def to_lines(self):
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "tau":
                v = ",".join(f"{t:g}" for t in v)
            out.append(f"{f.name}={v}")
        return out


def _coerce(key, raw):
    if key not in _FIELDS:
        raise ConfigError(f"unknown configuration key {key!r}; known keys: {', '.join(_FIELDS)}")
    parser, ok, desc = _FIELDS[key]
    try:
        if parser is _taus and not isinstance(raw, str):
            raw = ",".join(str(t) for t in raw)
        value = parser(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}={raw!r} is not valid; accepted: {desc}") from None
    if not ok(value):
        raise ConfigError(f"{key}={raw!r} out of range; accepted: {desc}")
    return value


def parse_config_text(text):
    """Parse flat ``key=value`` lines (``#`` comments) into a dict of typed values."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        values[key] = _coerce(key, raw)
    return values


def parse_config(path=None, overrides=None):
    """Resolve a config: defaults < file at `path` < `overrides` (e.g. CLI flags).

    `overrides` entries whose value is None are ignored.
    """
    values = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text()))
    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        values[key] = _coerce(key, raw if not isinstance(raw, (int, float)) else str(raw))
    return PipelineConfig(**values)


def image_seed(base_seed, index):
    """Per-image seed derived from the base seed and the image index."""
    return int(np.random.SeedSequence([base_seed, index]).generate_state(1)[0])


def render_carrier(mask, rng):
    """Procedural nuclei image in ``[-1, 1]`` for an instance mask.

    Smooth low-contrast background around -0.8, each nucleus a brighter blob
    with its own intensity and mild texture, blurred edges and a little pixel
    noise.
    """
    gen = np.random.default_rng(rng)
    shape = mask.shape
    background = -0.8 + 0.05 * ndimage.gaussian_filter(gen.normal(size=shape), 8) * 8
    levels = np.concatenate([[0.0], gen.uniform(0.3, 0.8, mask.instance_count)])
    texture = 0.1 * ndimage.gaussian_filter(gen.normal(size=shape), 2) * 4
    fg = mask.labels > 0
    img = np.where(fg, levels[mask.labels] + texture, background)
    img = ndimage.gaussian_filter(img, 0.7)
    img = img + gen.normal(0.0, 0.01, size=shape)
    return ImageGrid(np.clip(img, -1.0, 1.0), (-1.0, 1.0))


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _process(index, cfg):
    seed = image_seed(cfg.seed, index)
    name = f"{index:04d}"
    out = Path(cfg.out_dir)
    timings = {}
    files = []
    stage = "synth"
    try:
        t0 = time.perf_counter()
        gen = np.random.default_rng(seed)
        preset = masksynth.load_preset(cfg.preset, (cfg.size, cfg.size))
        gt, info = masksynth.synthesize_mask(preset, gen, separation=cfg.separation,
                                             return_info=True)
        files.append(f"gt/{name}.png")
        save_instance_mask(gt, out / files[-1])
        timings["synth"] = time.perf_counter() - t0

        stage = "stego"
        t0 = time.perf_counter()
        carrier = render_carrier(gt, gen)
        scfg = stegosim.StegoConfig(cfg.payload_side, cfg.epsilon, cfg.band_fraction)
        truth = stegosim.downsample_payload(gt.foreground, cfg.payload_side)
        stego = stegosim.embed(carrier, gt.foreground, scfg)
        psnr = stegosim.psnr(carrier, stego)
        ber_pre = stegosim.bit_error_ratio(truth, stegosim.extract(stego, scfg))
        files.append(f"stego/{name}.png")
        save_image(ImageGrid(np.clip(stego.values, -1, 1), (-1, 1)), out / files[-1], 16)
        timings["stego"] = time.perf_counter() - t0

        stage = "filter"
        t0 = time.perf_counter()
        fmask = dct.build_frequency_mask(cfg.size, cfg.size, cfg.keep_fraction, cfg.ordering)
        filtered = dct.lowpass_filter(stego, fmask)
        ber_post = stegosim.bit_error_ratio(truth, stegosim.extract(filtered, scfg))
        diff = np.abs(stego.values - filtered.values)
        files.append(f"filtered/{name}.png")
        save_image(ImageGrid(np.clip(filtered.values, -1, 1), (-1, 1)), out / files[-1], 16)
        files.append(f"difference/{name}.png")
        save_image(ImageGrid(diff, (0.0, max(float(diff.max()), 1e-12))), out / files[-1], 16)
        timings["filter"] = time.perf_counter() - t0

        stage = "postproc"
        t0 = time.perf_counter()
        pred = postproc.image_to_instances(
            filtered, cfg.threshold, cfg.max_hole_area, cfg.min_marker_distance,
            cfg.min_marker_height, cfg.min_marker_dynamic,
        )
        files.append(f"pred/{name}.png")
        save_instance_mask(pred, out / files[-1])
        timings["postproc"] = time.perf_counter() - t0

        stage = "eval"
        t0 = time.perf_counter()
        matches = [evalmetrics.match_instances(pred, gt, t) for t in cfg.tau]
        timings["eval"] = time.perf_counter() - t0
    except Exception as exc:  # noqa: BLE001 - reported with its stage
        return {"index": index, "name": name, "seed": seed, "status": "FAILED",
                "stage": stage, "error": f"{type(exc).__name__}: {exc}", "files": files,
                "timings": timings, "warnings": []}
    return {
        "index": index, "name": name, "seed": seed, "status": "OK", "files": files,
        "timings": timings, "warnings": info.warnings, "gt_count": gt.instance_count,
        "pred_count": pred.instance_count, "psnr": psnr, "ber_prefilter": ber_pre,
        "ber_postfilter": ber_post, "matches": matches,
    }


def _fmt(v):
    return f"{v:.6f}" if isinstance(v, float) else str(v)


def run_pipeline(cfg):
    """Run the whole chain and write ``manifest.txt`` into ``cfg.out_dir``.

    The manifest is line-oriented and tab-separated, written in image-index
    order as results arrive. Lines starting with ``timing`` carry wall-clock
    durations; everything else is reproducible from the config.

    Returns
    -------
    dict
        ``status`` ("OK" or "FAILED"), per-image ``results``, aggregate
        ``scores`` keyed by tau and the mean BER values.

    Raises
    ------
    StageError
        After writing the manifest, if any image failed.
    """
    out = Path(cfg.out_dir)
    for sub in ("gt", "stego", "filtered", "difference", "pred"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    manifest = out / "manifest.txt"
    results = []
    failed = None
    with open(manifest, "w") as fh:
        fh.write("# stegfilter pipeline manifest\n")
        for line in cfg.to_lines():
            fh.write(f"config\t{line}\n")
        fh.flush()
        indices = range(cfg.count)
        if cfg.jobs > 1:
            pool = ProcessPoolExecutor(cfg.jobs)
            stream = pool.map(_process, indices, [cfg] * cfg.count)
        else:
            pool = None
            stream = (_process(i, cfg) for i in indices)
        try:
            for res in stream:
                results.append(res)
                _write_entry(fh, res, out)
                fh.flush()
                if res["status"] != "OK" and failed is None:
                    failed = res
        finally:
            if pool is not None:
                pool.shutdown()
        ok = [r for r in results if r["status"] == "OK"]
        summary = {"status": "OK" if failed is None else "FAILED", "results": results,
                   "scores": {}}
        for k, tau in enumerate(cfg.tau):
            per_image = [r["matches"][k] for r in ok]
            pooled = evalmetrics.pool_matches(per_image)
            mean = evalmetrics.mean_scores(per_image)
            summary["scores"][tau] = {"pooled": pooled, "mean": mean}
            for label, s in (("pooled", pooled), ("image_mean", mean)):
                fh.write(f"aggregate\ttau={tau:g}\t{label}\tprecision={s.precision:.6f}"
                         f"\trecall={s.recall:.6f}\tf1={s.f1:.6f}\n")
        for key in ("psnr", "ber_prefilter", "ber_postfilter"):
            val = float(np.mean([r[key] for r in ok])) if ok else float("nan")
            summary[key] = val
            fh.write(f"aggregate\t{key}_mean={val:.6f}\n")
        fh.write(f"status\t{summary['status']}\n")
    if failed is not None:
        raise StageError(failed["stage"], failed["index"], failed["error"])
    return summary


def _write_entry(fh, res, out):
    name = res["name"]
    if res["status"] == "OK":
        fh.write(f"image\t{name}\tseed={res['seed']}\tstatus=OK\tgt_instances={res['gt_count']}"
                 f"\tpred_instances={res['pred_count']}\tpsnr={res['psnr']:.6f}"
                 f"\tber_prefilter={res['ber_prefilter']:.6f}"
                 f"\tber_postfilter={res['ber_postfilter']:.6f}\n")
        for m in res["matches"]:
            s = evalmetrics.prf_scores(m)
            fh.write(f"score\t{name}\ttau={m.tau:g}\ttp={m.tp}\tfp={m.fp}\tfn={m.fn}"
                     f"\tprecision={s.precision:.6f}\trecall={s.recall:.6f}\tf1={s.f1:.6f}\n")
    else:
        fh.write(f"image\t{name}\tseed={res['seed']}\tstatus=FAILED\tstage={res['stage']}"
                 f"\terror={res['error']}\n")
    for w in res["warnings"]:
        fh.write(f"warning\t{name}\t{w}\n")
    for rel in res["files"]:
        if (out / rel).exists():
            fh.write(f"file\t{rel}\tsha256={_sha256(out / rel)}\n")
    fh.write("timing\t" + name + "".join(f"\t{k}={_fmt(v)}" for k, v in res["timings"].items())
             + "\n")
