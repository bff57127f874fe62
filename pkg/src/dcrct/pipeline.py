"""End-to-end comparison pipeline and dataset generation.

One pipeline run simulates truncated noisy measurements for a suite of random
phantoms, reconstructs them with the requested methods, and emits per-method
images plus a report shaped like the usual method-comparison table
(RMSE in FOV / whole-body RMSE / SSIM per method).
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from scipy.ndimage import gaussian_filter

from .core import Image, Unit, fov_mask, hu_to_mu
from .fbp import fbp_reconstruct
from .io import DataError, PipelineConfig, load_image, save_image, save_sinogram
from .metrics import evaluate
from .phantom import rasterize, sample_phantom
from .projector import forward_project
from .recon import dcr_reconstruct, wtv_reconstruct
from .simulate import add_poisson_noise, truncate
from .wce import reconstruct_wce

PRIMARY_METHODS = ("fbp", "wce", "wtv", "dcr")
ALL_METHODS = ("fbp", "wce", "wtv", "unet", "dcr")


def surrogate_prior(ground_truth: Image, blur_px: float, noise_hu: float,
                    seed: int) -> Image:
    """Imperfect stand-in for a trained network: blurred truth plus HU noise."""
    rng = np.random.default_rng([seed, 0x50])
    vals = gaussian_filter(ground_truth.values, blur_px) if blur_px > 0 else ground_truth.values.copy()
    if noise_hu > 0:
        vals = vals + noise_hu * rng.standard_normal(vals.shape)
    return Image(ground_truth.grid, vals, Unit.HU)


def export_png(path: str | Path, image: Image, window: tuple[float, float]) -> None:
    lo, hi = window
    scaled = np.clip((image.values - lo) / (hi - lo), 0.0, 1.0)
    PILImage.fromarray((scaled * 255.0).astype(np.uint8)).save(path)


def simulate_measurement(config: PipelineConfig, phantom_seed: int):
    """Ground truth plus measured (noisy, truncated) sinogram for one phantom."""
    geometry = config.geometry.build()
    grid = config.grid.build()
    phantom = sample_phantom(phantom_seed, truncating=True,
                             r_fov=geometry.fov_radius(False),
                             r_ext=geometry.fov_radius(True),
                             half_extent=min(grid.nx * grid.dx, grid.ny * grid.dy) / 2.0)
    gt = rasterize(phantom, grid)
    sino = forward_project(hu_to_mu(gt), geometry)
    if config.noise.enabled:
        sino = add_poisson_noise(sino, config.noise.build(phantom_seed))
    return phantom, gt, truncate(sino)


def _reconstruct(method: str, measured, grid, config: PipelineConfig, prior: Image | None):
    if method == "fbp":
        return fbp_reconstruct(measured, grid)
    if method == "wce":
        return reconstruct_wce(measured, grid)
    if method == "wtv":
        return wtv_reconstruct(measured, config.recon.build(), grid)
    if method == "unet":
        return prior
    if method == "dcr":
        return dcr_reconstruct(measured, prior, config.recon.build())
    raise ValueError(f"unknown method {method!r}")


def run_pipeline(config: PipelineConfig, methods=PRIMARY_METHODS,
                 out_dir: str | Path | None = None,
                 prior_files: list[str] | None = None) -> dict:
    """Simulate, reconstruct with every requested method, and evaluate.

    ``prior_files`` supplies externally produced prior images (one per
    phantom) for the "unet" and "dcr" methods; without it a surrogate prior
    (blurred ground truth + noise) is used. The result is a JSON-serializable
    report; images are written under ``out_dir`` when given.
    """
    methods = list(methods)
    unknown = set(methods) - set(ALL_METHODS)
    if unknown:
        raise ValueError(f"unknown methods: {sorted(unknown)}")
    needs_prior = bool({"unet", "dcr"} & set(methods))
    if prior_files is not None and len(prior_files) < config.n_phantoms:
        raise DataError(f"{config.n_phantoms} phantoms but only "
                        f"{len(prior_files)} prior files")
    geometry = config.geometry.build()
    grid = config.grid.build()
    fov = fov_mask(geometry, grid, virtual=False)
    out = Path(out_dir) if out_dir is not None else None

    per_method: dict[str, list[dict]] = {m: [] for m in methods}
    for k in range(config.n_phantoms):
        phantom_seed = config.seed + k
        phantom, gt, measured = simulate_measurement(config, phantom_seed)
        prior = None
        if needs_prior:
            if prior_files is not None:
                prior = load_image(prior_files[k])
                if prior.grid != grid:
                    raise DataError(f"prior {prior_files[k]} grid mismatch")
            else:
                sp = config.surrogate_prior
                prior = surrogate_prior(gt, sp.blur_px, sp.noise_hu, phantom_seed)
        slice_dir = out / f"phantom_{k:03d}" if out else None
        if slice_dir:
            slice_dir.mkdir(parents=True, exist_ok=True)
            (slice_dir / "phantom.json").write_text(phantom.to_json())
            save_image(slice_dir / "reference.json", gt, seed=phantom_seed)
            save_sinogram(slice_dir / "measured.json", measured, seed=phantom_seed)
            export_png(slice_dir / "reference.png", gt, config.window_hu)
        for m in methods:
            rec = _reconstruct(m, measured, grid, config, prior)
            report = evaluate(rec, gt, fov)
            per_method[m].append({
                "phantom": k, "seed": phantom_seed,
                "rmse_fov": report.rmse_fov, "rmse_body": report.rmse_body,
                "ssim": report.ssim,
            })
            if slice_dir:
                save_image(slice_dir / f"{m}.json", rec, seed=phantom_seed, method=m)
                diff = rec.with_values(rec.values - gt.values)
                save_image(slice_dir / f"{m}_diff.json", diff, seed=phantom_seed, method=m)
                export_png(slice_dir / f"{m}.png", rec, config.window_hu)

    report = {
        "seed": config.seed,
        "n_phantoms": config.n_phantoms,
        "methods": {
            m: {
                "rmse_fov": float(np.mean([r["rmse_fov"] for r in rows])),
                "rmse_body": float(np.mean([r["rmse_body"] for r in rows])),
                "ssim": float(np.mean([r["ssim"] for r in rows])),
                "per_phantom": rows,
            }
            for m, rows in per_method.items()
        },
    }
    if out:
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(format_report_json(report))
        (out / "report.txt").write_text(format_report_table(report))
    return report


def format_report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)


def format_report_table(report: dict) -> str:
    """Aligned text table: metric rows by method columns."""
    methods = list(report["methods"])
    rows = [("RMSE in FOV", "rmse_fov", "{:.1f} HU"),
            ("RMSE", "rmse_body", "{:.1f} HU"),
            ("SSIM", "ssim", "{:.3f}")]
    width = 12
    lines = ["Method".ljust(14) + "".join(m.ljust(width) for m in methods)]
    for label, key, fmt in rows:
        cells = [fmt.format(report["methods"][m][key]).ljust(width) for m in methods]
        lines.append(label.ljust(14) + "".join(cells))
    return "\n".join(lines) + "\n"


def make_dataset(out_dir: str | Path, n_train: int, n_test: int, seed: int,
                 config: PipelineConfig | None = None) -> dict:
    """Generate (f_WCE, reference, artifact) training triples as array files.

    The artifact image is stored so that artifact + reference == f_WCE holds
    bit-exactly in the float32 file representation. Train and test phantom
    seeds come from disjoint spawned seed streams.
    """
    if n_train <= 0 or n_test <= 0:
        raise ValueError("n_train and n_test must be positive")
    config = config or PipelineConfig(seed=seed)
    out = Path(out_dir)
    train_ss, test_ss = np.random.SeedSequence(seed).spawn(2)
    manifest = {"seed": seed, "splits": {}}
    for split, n, ss in (("train", n_train, train_ss), ("test", n_test, test_ss)):
        split_dir = out / split
        split_dir.mkdir(parents=True, exist_ok=True)
        seeds = [int(s) for s in ss.generate_state(n)]
        entries = []
        for idx, phantom_seed in enumerate(seeds):
            _, gt, measured = simulate_measurement(config, phantom_seed)
            wce_img = reconstruct_wce(measured, gt.grid)
            ref32 = gt.values.astype(np.float32)
            art32 = wce_img.values.astype(np.float32) - ref32
            wce32 = art32 + ref32  # float32-exact residual identity
            grid = gt.grid
            save_image(split_dir / f"reference_{idx:04d}.json",
                       Image(grid, ref32.astype(np.float64), Unit.HU), seed=phantom_seed)
            save_image(split_dir / f"artifact_{idx:04d}.json",
                       Image(grid, art32.astype(np.float64), Unit.HU), seed=phantom_seed)
            save_image(split_dir / f"wce_{idx:04d}.json",
                       Image(grid, wce32.astype(np.float64), Unit.HU), seed=phantom_seed)
            entries.append({"index": idx, "seed": phantom_seed})
        manifest["splits"][split] = {"count": n, "entries": entries}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return manifest
