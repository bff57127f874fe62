"""Command line interface: a thin client of the HTTP service.

By default each invocation routes through an in-process instance of the
FastAPI app (no server needed); ``--server URL`` targets a running one
instead. Exit codes: 0 success, 2 configuration error, 3 data error.
"""
from __future__ import annotations

import json
import sys

import click
import httpx

from .io import ConfigError, PipelineConfig
from .pipeline import PRIMARY_METHODS, format_report_table

EXIT_CONFIG = 2
EXIT_DATA = 3


class ServiceClient:
    def __init__(self, server: str | None):
        if server:
            self._client = httpx.Client(base_url=server, timeout=None)
        else:
            from fastapi.testclient import TestClient
            from .service import app
            self._client = TestClient(app)

    def call(self, method: str, path: str, payload: dict | None = None) -> dict:
        resp = self._client.request(method, path, json=payload)
        if resp.status_code >= 400:
            try:
                body = resp.json()
            except json.JSONDecodeError:
                body = {"detail": resp.text}
            kind = body.get("kind", "config" if resp.status_code in (400, 422) else "data")
            detail = body.get("detail", resp.text)
            click.echo(f"error ({kind}): {detail}", err=True)
            sys.exit(EXIT_CONFIG if kind == "config" else EXIT_DATA)
        return resp.json()


def _load_config(config_path: str | None, seed: int | None) -> dict:
    try:
        cfg = PipelineConfig.from_file(config_path) if config_path else PipelineConfig()
        if seed is not None:
            cfg = cfg.model_copy(update={"seed": seed})
        return cfg.model_dump()
    except ConfigError as exc:
        click.echo(f"error (config): {exc}", err=True)
        sys.exit(EXIT_CONFIG)


@click.group()
@click.option("--server", default=None, help="Base URL of a running dcrct service; "
              "default runs the service in-process.")
@click.pass_context
def main(ctx, server):
    """Truncated-CT simulation, reconstruction, and evaluation."""
    ctx.obj = ServiceClient(server)


def _common(f):
    f = click.option("--config", "config_path", default=None,
                     help="Pipeline config JSON file.")(f)
    f = click.option("--seed", type=int, default=None, help="Override the config seed.")(f)
    return f


@main.command()
@click.option("--seed", type=int, default=0)
@click.option("--truncating/--no-truncating", default=True)
@click.option("--out", "out_dir", required=True)
@click.option("--config", "config_path", default=None)
@click.pass_obj
def phantom(client, seed, truncating, out_dir, config_path):
    """Sample a random phantom; write its description and reference image."""
    cfg = _load_config(config_path, None)
    res = client.call("POST", "/phantom", {"seed": seed, "truncating": truncating,
                                           "out_dir": out_dir, "config": cfg})
    click.echo(json.dumps(res))


@main.command()
@click.option("--phantom", "phantom_path", required=True)
@click.option("--out", "out_path", required=True)
@click.option("--analytic", is_flag=True, help="Closed-form sinogram instead of the projector.")
@_common
@click.pass_obj
def project(client, phantom_path, out_path, analytic, config_path, seed):
    """Forward-project a phantom onto the virtual detector."""
    cfg = _load_config(config_path, seed)
    res = client.call("POST", "/project", {"phantom_path": phantom_path,
                                           "out_path": out_path,
                                           "analytic": analytic, "config": cfg})
    click.echo(json.dumps(res))


@main.command()
@click.option("--sinogram", "sinogram_path", required=True)
@click.option("--out", "out_path", required=True)
@click.pass_obj
def truncate(client, sinogram_path, out_path):
    """Zero the channels outside the physical detector."""
    res = client.call("POST", "/truncate", {"sinogram_path": sinogram_path,
                                            "out_path": out_path})
    click.echo(json.dumps(res))


@main.command()
@click.option("--sinogram", "sinogram_path", required=True)
@click.option("--out", "out_path", required=True)
@click.option("--i0", type=float, default=1e5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_obj
def noise(client, sinogram_path, out_path, i0, seed):
    """Apply Poisson counting noise to the measured channels."""
    res = client.call("POST", "/noise", {"sinogram_path": sinogram_path,
                                         "out_path": out_path, "i0": i0, "seed": seed})
    click.echo(json.dumps(res))


def _recon_command(method: str, help_text: str, with_prior: bool = False):
    @click.option("--sinogram", "sinogram_path", required=True)
    @click.option("--out", "out_path", required=True)
    @_common
    @click.pass_obj
    def cmd(client, sinogram_path, out_path, config_path, seed, **kw):
        cfg = _load_config(config_path, seed)
        payload = {"method": method, "sinogram_path": sinogram_path,
                   "out_path": out_path, "config": cfg}
        if with_prior:
            payload["prior_path"] = kw.get("prior_path")
            payload["reference_path"] = kw.get("reference_path")
        res = client.call("POST", "/reconstruct", payload)
        click.echo(json.dumps(res))

    cmd.__doc__ = help_text
    if with_prior:
        cmd = click.option("--prior", "prior_path", default=None,
                           help="Prior image file (e.g. network output).")(cmd)
        cmd = click.option("--reference", "reference_path", default=None,
                           help="Reference image for the surrogate prior.")(cmd)
    return main.command(name=method)(cmd)


fbp = _recon_command("fbp", "Filtered back-projection (channels as given).")
wce = _recon_command("wce", "FBP of the water-cylinder-extrapolated sinogram.")
wtv = _recon_command("wtv", "Reweighted-TV reconstruction from measured channels.")
dcr = _recon_command("dcr", "Data-consistent reconstruction with a prior image.",
                     with_prior=True)


@main.command()
@click.option("--image", "image_path", required=True)
@click.option("--reference", "reference_path", required=True)
@click.option("--config", "config_path", default=None)
@click.pass_obj
def evaluate(client, image_path, reference_path, config_path):
    """RMSE in FOV, whole-body RMSE, and SSIM against a reference."""
    cfg = _load_config(config_path, None)
    res = client.call("POST", "/evaluate", {"image_path": image_path,
                                            "reference_path": reference_path,
                                            "config": cfg})
    click.echo(json.dumps(res))


@main.command()
@click.option("--out", "out_dir", required=True)
@click.option("--n-train", type=int, default=425, show_default=True)
@click.option("--n-test", type=int, default=20, show_default=True)
@_common
@click.pass_obj
def dataset(client, out_dir, n_train, n_test, config_path, seed):
    """Generate (f_WCE, reference, artifact) training triples."""
    cfg = _load_config(config_path, seed)
    res = client.call("POST", "/dataset", {"out_dir": out_dir, "n_train": n_train,
                                           "n_test": n_test,
                                           "seed": seed if seed is not None else 0,
                                           "config": cfg})
    click.echo(json.dumps(res))


@main.command()
@click.option("--out", "out_dir", default=None)
@click.option("--methods", default=",".join(PRIMARY_METHODS), show_default=True,
              help="Comma-separated subset of fbp,wce,wtv,unet,dcr.")
@click.option("--prior", "prior_files", multiple=True,
              help="Prior image file per phantom (repeatable, for unet/dcr).")
@_common
@click.pass_obj
def pipeline(client, out_dir, methods, prior_files, config_path, seed):
    """Simulate, reconstruct with several methods, and emit a comparison report."""
    cfg = _load_config(config_path, seed)
    payload = {"out_dir": out_dir, "methods": methods.split(","), "config": cfg,
               "prior_files": list(prior_files) or None}
    res = client.call("POST", "/pipeline", payload)
    click.echo(format_report_table(res))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn
    uvicorn.run("dcrct.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
