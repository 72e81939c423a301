"""Command-line client for the bandverify service.

Every subcommand posts one request to a running service (start it with
`bandverify serve`) and prints the JSON response. The service URL comes
from --url or the BANDVERIFY_URL environment variable.

Exit codes: 0 success, 1 server-side failure, 2 invalid request/config.
"""

import json
import sys

import click
import httpx

DEFAULT_URL = "http://127.0.0.1:8732"


@click.group()
@click.option("--url", envvar="BANDVERIFY_URL", default=DEFAULT_URL,
              show_default=True, help="Base URL of the bandverify service.")
@click.option("--timeout", default=3600.0, show_default=True,
              help="Request timeout in seconds (corpus jobs can be long).")
@click.pass_context
def main(ctx, url, timeout):
    """Telephone-channel simulation, bandwidth extension, and speaker
    verification experiments."""
    ctx.obj = {"url": url.rstrip("/"), "timeout": timeout}


def _post(ctx, route, payload):
    try:
        resp = httpx.post(ctx.obj["url"] + route, json=payload,
                          timeout=ctx.obj["timeout"])
    except httpx.HTTPError as exc:
        click.echo(f"cannot reach service at {ctx.obj['url']}: {exc}", err=True)
        sys.exit(1)
    try:
        body = resp.json()
    except ValueError:
        body = {"detail": resp.text}
    click.echo(json.dumps(body, indent=1, sort_keys=True))
    if resp.status_code >= 500:
        sys.exit(1)
    if resp.status_code >= 400:
        sys.exit(2)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8732, show_default=True)
def serve(host, port):
    """Run the bandverify service."""
    import uvicorn

    from .service import app
    uvicorn.run(app, host=host, port=port)


@main.command("synth-corpus")
@click.option("--out-dir", required=True)
@click.option("--n-speakers", default=10, show_default=True)
@click.option("--utterances-per-speaker", default=6, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--train-seconds", default=60.0, show_default=True)
@click.option("--test-seconds", default=2.0, show_default=True)
@click.pass_context
def synth_corpus(ctx, out_dir, n_speakers, utterances_per_speaker, seed,
                 train_seconds, test_seconds):
    """Generate a seeded synthetic wideband corpus."""
    _post(ctx, "/synth-corpus", {
        "out_dir": out_dir, "n_speakers": n_speakers,
        "utterances_per_speaker": utterances_per_speaker, "seed": seed,
        "train_seconds": train_seconds, "test_seconds": test_seconds})


@main.command()
@click.option("--in-dir", required=True)
@click.option("--out-dir", required=True)
@click.option("--with-alaw", is_flag=True,
              help="Also downsample to 8 kHz and store 8-bit A-law.")
@click.pass_context
def narrowband(ctx, in_dir, out_dir, with_alaw):
    """Simulate the telephone channel over a corpus."""
    _post(ctx, "/narrowband", {"in_dir": in_dir, "out_dir": out_dir,
                               "with_alaw": with_alaw})


@main.command("train-bwe")
@click.option("--manifest", "manifest_path", required=True)
@click.option("--components", "-k", default=8, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--model-out", required=True)
@click.pass_context
def train_bwe(ctx, manifest_path, components, seed, model_out):
    """Train the joint narrowband/high-band mixture model."""
    _post(ctx, "/train-bwe", {"manifest_path": manifest_path,
                              "components": components, "seed": seed,
                              "model_out": model_out})


@main.command()
@click.option("--manifest", "manifest_path", required=True)
@click.option("--model", "model_path", required=True)
@click.option("--lam", "--lambda", default=2.0, show_default=True,
              help="Over-estimation penalty of the energy-ratio estimator.")
@click.option("--out-dir", required=True)
@click.pass_context
def extend(ctx, manifest_path, model_path, lam, out_dir):
    """Bandwidth-extend a narrowband corpus to 16 kHz."""
    _post(ctx, "/extend", {"manifest_path": manifest_path,
                           "model_path": model_path, "lam": lam,
                           "out_dir": out_dir})


@main.command()
@click.option("--wav", "wav_path", required=True)
@click.option("--kind", type=click.Choice(["LPCC", "MELCEPST"]),
              default="LPCC", show_default=True)
@click.option("--dim", default=15, show_default=True)
@click.option("--csv-out", required=True)
@click.pass_context
def features(ctx, wav_path, kind, dim, csv_out):
    """Extract per-frame features from one file to CSV."""
    _post(ctx, "/features", {"wav_path": wav_path, "kind": kind,
                             "dim": dim, "csv_out": csv_out})


@main.command("train-speakers")
@click.option("--manifest", "manifest_path", required=True)
@click.option("--kind", type=click.Choice(["LPCC", "MELCEPST"]),
              default="LPCC", show_default=True)
@click.option("--dim", default=15, show_default=True)
@click.option("--out-dir", required=True)
@click.option("--mean-removal", is_flag=True)
@click.pass_context
def train_speakers(ctx, manifest_path, kind, dim, out_dir, mean_removal):
    """Train per-speaker covariance models."""
    _post(ctx, "/train-speakers", {
        "manifest_path": manifest_path, "kind": kind, "dim": dim,
        "out_dir": out_dir, "mean_removal": mean_removal})


@main.command()
@click.option("--manifest", "manifest_path", required=True)
@click.option("--models-dir", required=True)
@click.option("--kind", type=click.Choice(["LPCC", "MELCEPST"]),
              default="LPCC", show_default=True)
@click.option("--dim", default=15, show_default=True)
@click.option("--trials-out", required=True)
@click.option("--mean-removal", is_flag=True)
@click.pass_context
def score(ctx, manifest_path, models_dir, kind, dim, trials_out, mean_removal):
    """Score all test utterances against all speaker models."""
    _post(ctx, "/score", {
        "manifest_path": manifest_path, "models_dir": models_dir,
        "kind": kind, "dim": dim, "trials_out": trials_out,
        "mean_removal": mean_removal})


@main.command()
@click.option("--trials", "trials_path", required=True)
@click.option("--out-base", required=True)
@click.option("--p-true", default=0.5, show_default=True)
@click.option("--v-miss", default=1.0, show_default=True)
@click.option("--v-fa", default=1.0, show_default=True)
@click.pass_context
def det(ctx, trials_path, out_base, p_true, v_miss, v_fa):
    """DET curve, minimum DCF, and EER from a trials CSV."""
    _post(ctx, "/det", {"trials_path": trials_path, "out_base": out_base,
                        "p_true": p_true, "v_miss": v_miss, "v_fa": v_fa})


@main.command("run-experiment")
@click.option("--config", "config_path", required=True,
              help="JSON experiment configuration.")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Override a config key (JSON-parsed value).")
@click.pass_context
def run_experiment(ctx, config_path, overrides):
    """Run the full scenario/feature/dimension grid and write the report."""
    try:
        with open(config_path) as f:
            payload = json.load(f)
    except (OSError, ValueError) as exc:
        click.echo(f"bad config file: {exc}", err=True)
        sys.exit(2)
    for item in overrides:
        key, _, value = item.partition("=")
        try:
            payload[key] = json.loads(value)
        except ValueError:
            payload[key] = value
    _post(ctx, "/run-experiment", payload)


if __name__ == "__main__":
    main()
