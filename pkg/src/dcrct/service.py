"""HTTP service wrapping the reconstruction pipeline.

Requests reference files on the service host's filesystem (the tool is meant
to run next to its data); heavy arrays never travel through request bodies.
The CLI in ``dcrct.cli`` is a thin client of these endpoints.
"""
from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict, Field

from . import __version__
from .core import fov_mask, hu_to_mu
from .fbp import fbp_reconstruct
from .io import (ConfigError, DataError, PipelineConfig, load_image,
                 load_sinogram, save_image, save_sinogram)
from .metrics import evaluate
from .phantom import (EllipsePhantom, analytic_sinogram, rasterize,
                      sample_phantom)
from .pipeline import (PRIMARY_METHODS, export_png, make_dataset,
                       run_pipeline, surrogate_prior)
from .projector import forward_project
from .recon import dcr_reconstruct, wtv_reconstruct
from .simulate import NoiseModel, add_poisson_noise, truncate
from .wce import reconstruct_wce


class _Req(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PhantomRequest(_Req):
    seed: int = 0
    truncating: bool = True
    out_dir: str
    config: PipelineConfig = PipelineConfig()


class PhantomResponse(BaseModel):
    phantom_path: str
    reference_path: str


class ProjectRequest(_Req):
    phantom_path: str
    out_path: str
    analytic: bool = False  # closed-form sinogram instead of the discrete projector
    config: PipelineConfig = PipelineConfig()


class SinogramResponse(BaseModel):
    sinogram_path: str


class TruncateRequest(_Req):
    sinogram_path: str
    out_path: str


class NoiseRequest(_Req):
    sinogram_path: str
    out_path: str
    i0: float = Field(1e5, gt=0)
    seed: int = 0


class ReconstructRequest(_Req):
    method: str  # fbp | wce | wtv | dcr
    sinogram_path: str
    out_path: str
    prior_path: str | None = None  # dcr only; surrogate is not implied here
    reference_path: str | None = None  # enables surrogate prior for dcr
    config: PipelineConfig = PipelineConfig()


class ImageResponse(BaseModel):
    image_path: str
    png_path: str


class EvaluateRequest(_Req):
    image_path: str
    reference_path: str
    config: PipelineConfig = PipelineConfig()


class EvaluateResponse(BaseModel):
    rmse_fov: float
    rmse_body: float
    ssim: float


class DatasetRequest(_Req):
    out_dir: str
    n_train: int = Field(425, gt=0)
    n_test: int = Field(20, gt=0)
    seed: int = 0
    config: PipelineConfig = PipelineConfig()


class PipelineRequest(_Req):
    out_dir: str | None = None
    methods: list[str] = list(PRIMARY_METHODS)
    prior_files: list[str] | None = None
    config: PipelineConfig = PipelineConfig()


app = FastAPI(title="dcrct", version=__version__,
              description="Truncated-CT reconstruction and FOV extension service")


@app.exception_handler(ConfigError)
async def _config_error(request: Request, exc: ConfigError):
    return JSONResponse(status_code=400, content={"kind": "config", "detail": str(exc)})


@app.exception_handler(DataError)
async def _data_error(request: Request, exc: DataError):
    return JSONResponse(status_code=409, content={"kind": "data", "detail": str(exc)})


@app.exception_handler(ValueError)
async def _value_error(request: Request, exc: ValueError):
    return JSONResponse(status_code=400, content={"kind": "config", "detail": str(exc)})


@app.get("/health")
def health() -> dict:
    return {"status": "ok", "version": __version__}


@app.get("/defaults", response_model=PipelineConfig)
def defaults() -> PipelineConfig:
    return PipelineConfig()


@app.post("/phantom", response_model=PhantomResponse)
def phantom(req: PhantomRequest) -> PhantomResponse:
    geometry = req.config.geometry.build()
    grid_cfg = req.config.grid
    ph = sample_phantom(req.seed, req.truncating,
                        r_fov=geometry.fov_radius(False),
                        r_ext=geometry.fov_radius(True),
                        half_extent=min(grid_cfg.nx * grid_cfg.dx,
                                        grid_cfg.ny * grid_cfg.dy) / 2.0)
    out = Path(req.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ph_path = out / f"phantom_{req.seed}.json"
    ph_path.write_text(ph.to_json())
    ref = rasterize(ph, req.config.grid.build())
    ref_path = save_image(out / f"reference_{req.seed}.json", ref, seed=req.seed)
    return PhantomResponse(phantom_path=str(ph_path), reference_path=str(ref_path))


@app.post("/project", response_model=SinogramResponse)
def project(req: ProjectRequest) -> SinogramResponse:
    try:
        ph = EllipsePhantom.from_json(Path(req.phantom_path).read_text())
    except (OSError, KeyError) as exc:
        raise DataError(f"cannot read phantom {req.phantom_path}: {exc}") from exc
    geometry = req.config.geometry.build()
    if req.analytic:
        sino = analytic_sinogram(ph, geometry)
    else:
        sino = forward_project(hu_to_mu(rasterize(ph, req.config.grid.build())), geometry)
    return SinogramResponse(sinogram_path=str(save_sinogram(req.out_path, sino)))


@app.post("/truncate", response_model=SinogramResponse)
def truncate_endpoint(req: TruncateRequest) -> SinogramResponse:
    sino = truncate(load_sinogram(req.sinogram_path))
    return SinogramResponse(sinogram_path=str(save_sinogram(req.out_path, sino)))


@app.post("/noise", response_model=SinogramResponse)
def noise(req: NoiseRequest) -> SinogramResponse:
    sino = add_poisson_noise(load_sinogram(req.sinogram_path),
                             NoiseModel(i0=req.i0, rng_seed=req.seed))
    return SinogramResponse(sinogram_path=str(save_sinogram(req.out_path, sino, seed=req.seed)))


@app.post("/reconstruct", response_model=ImageResponse)
def reconstruct(req: ReconstructRequest) -> ImageResponse:
    sino = load_sinogram(req.sinogram_path)
    grid = req.config.grid.build()
    if req.method == "fbp":
        rec = fbp_reconstruct(sino, grid)
    elif req.method == "wce":
        rec = reconstruct_wce(sino, grid)
    elif req.method == "wtv":
        rec = wtv_reconstruct(sino, req.config.recon.build(), grid)
    elif req.method == "dcr":
        if req.prior_path is not None:
            prior = load_image(req.prior_path)
        elif req.reference_path is not None:
            sp = req.config.surrogate_prior
            prior = surrogate_prior(load_image(req.reference_path),
                                    sp.blur_px, sp.noise_hu, req.config.seed)
        else:
            raise ConfigError("dcr requires prior_path or reference_path")
        rec = dcr_reconstruct(sino, prior, req.config.recon.build())
    else:
        raise ConfigError(f"unknown reconstruction method {req.method!r}")
    out = Path(req.out_path)
    img_path = save_image(out, rec, method=req.method)
    png_path = img_path.with_suffix(".png")
    export_png(png_path, rec, req.config.window_hu)
    return ImageResponse(image_path=str(img_path), png_path=str(png_path))


@app.post("/evaluate", response_model=EvaluateResponse)
def evaluate_endpoint(req: EvaluateRequest) -> EvaluateResponse:
    rec = load_image(req.image_path)
    ref = load_image(req.reference_path)
    fov = fov_mask(req.config.geometry.build(), ref.grid, virtual=False)
    report = evaluate(rec, ref, fov)
    return EvaluateResponse(rmse_fov=report.rmse_fov, rmse_body=report.rmse_body,
                            ssim=report.ssim)


@app.post("/dataset")
def dataset(req: DatasetRequest) -> dict:
    return make_dataset(req.out_dir, req.n_train, req.n_test, req.seed, req.config)


@app.post("/pipeline")
def pipeline(req: PipelineRequest) -> dict:
    return run_pipeline(req.config, req.methods, req.out_dir, req.prior_files)
