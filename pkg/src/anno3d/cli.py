"""Command-line interface: reconstruct, evaluate, stats, serve."""

from __future__ import annotations

import datetime
import json
import os
import sys

import click

from anno3d.config import ReconstructionConfig
from anno3d.document import ParseError, parse
from anno3d.evaluate import ALL_METRICS, JobManifest, ManifestError, run_evaluation
from anno3d.io_formats import (
    depth_png16,
    encode_dmap,
    encode_glb,
    encode_nmap,
    encode_ply,
    id_map_png,
    normal_map_png,
)
from anno3d.pipeline import ReconstructionError, reconstruct_document
from anno3d.stats import corpus_stats

DEFAULT_PORT_ENV = "ANNO3D_PORT"


def _load_config(config_path, seed, resolution, lp_mode) -> ReconstructionConfig:
    config = ReconstructionConfig.load(config_path) if config_path else ReconstructionConfig()
    return config.with_overrides(seed=seed, working_resolution=resolution, lp_mode=lp_mode)


@click.group()
def main():
    """Reconstruct 3D surfaces from sparse image annotations and evaluate them."""


@main.command()
@click.argument("documents", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path(), help="output directory")
@click.option("--config", "config_path", type=click.Path(exists=True), help="config JSON file")
@click.option("--seed", type=int, default=None, help="override config seed")
@click.option("--resolution", type=int, default=None, help="working resolution (max dimension)")
@click.option("--lp-mode", type=click.Choice(["strict", "soft"]), default=None)
@click.option("--png", "write_png", is_flag=True, help="also write PNG visualizations")
@click.option("--debug", "write_debug", is_flag=True, help="dump id maps and adjacency summary")
def reconstruct(documents, out_dir, config_path, seed, resolution, lp_mode, write_png, write_debug):
    """Reconstruct DOCUMENTS (annotation JSON files) into 3D artifacts.

    Writes per document: .nmap, .dmap, .ply, .glb and a _report.json. Exits
    with code 2 if any document fails; the batch continues regardless.
    """
    config = _load_config(config_path, seed, resolution, lp_mode)
    os.makedirs(out_dir, exist_ok=True)
    failures = 0
    for path in documents:
        stem = os.path.splitext(os.path.basename(path))[0]
        try:
            with open(path, "rb") as fh:
                doc = parse(fh.read())
            rec = reconstruct_document(doc, config)
        except (ParseError, ReconstructionError) as exc:
            failures += 1
            detail = getattr(exc, "detail", None)
            report = {
                "document": path,
                "error": getattr(exc, "code", "parse_error"),
                "detail": detail,
                "generated_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            }
            with open(os.path.join(out_dir, f"{stem}_report.json"), "w", encoding="utf-8") as fh:
                json.dump(report, fh, indent=2, sort_keys=True)
            click.echo(f"FAILED {path}: {exc}", err=True)
            continue

        with open(os.path.join(out_dir, f"{stem}.nmap"), "wb") as fh:
            fh.write(encode_nmap(rec.normal_map.normals, rec.valid_mask))
        with open(os.path.join(out_dir, f"{stem}.dmap"), "wb") as fh:
            fh.write(encode_dmap(rec.export_depth, rec.valid_mask))
        with open(os.path.join(out_dir, f"{stem}.ply"), "wb") as fh:
            fh.write(encode_ply(rec.mesh.vertices, rec.mesh.vertex_surface, rec.mesh.faces))
        with open(os.path.join(out_dir, f"{stem}.glb"), "wb") as fh:
            fh.write(encode_glb(rec.mesh.vertices, rec.mesh.faces))

        report = rec.run_report()
        report["generated_at"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
        with open(os.path.join(out_dir, f"{stem}_report.json"), "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)

        if write_png:
            normal_map_png(rec.normal_map.normals, rec.valid_mask, os.path.join(out_dir, f"{stem}_normals.png"))
            depth_png16(
                rec.export_depth,
                rec.valid_mask,
                os.path.join(out_dir, f"{stem}_depth.png"),
                os.path.join(out_dir, f"{stem}_depth_scale.json"),
            )
        if write_debug:
            id_map_png(rec.partition.continuous_id, os.path.join(out_dir, f"{stem}_continuous.png"))
            id_map_png(rec.partition.smooth_id, os.path.join(out_dir, f"{stem}_smooth.png"))
            summary = {
                "continuous_surfaces": rec.partition.n_continuous,
                "smooth_surfaces": rec.partition.n_smooth,
                "pixels_per_continuous": {
                    str(sid): int((rec.partition.continuous_id == sid).sum())
                    for sid in range(rec.partition.n_continuous)
                },
                "ordering_pairs": len(rec.pairs),
            }
            with open(os.path.join(out_dir, f"{stem}_adjacency.json"), "w", encoding="utf-8") as fh:
                json.dump(summary, fh, indent=2, sort_keys=True)
        click.echo(f"ok {path} -> {stem}.{{nmap,dmap,ply,glb}}")

    sys.exit(2 if failures else 0)


@main.command()
@click.argument("manifest_path", type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--metrics", "metric_list", default=",".join(ALL_METRICS), show_default=True,
              help="comma-separated subset of " + ",".join(ALL_METRICS))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
@click.option("--resolution", type=int, default=None)
@click.option("--lp-mode", type=click.Choice(["strict", "soft"]), default=None)
@click.option("--allow-partial", is_flag=True, help="skip items with missing files")
def evaluate(manifest_path, out_dir, metric_list, config_path, seed, resolution, lp_mode, allow_partial):
    """Evaluate predictions listed in a manifest; writes JSON and CSV reports."""
    config = _load_config(config_path, seed, resolution, lp_mode)
    names = tuple(m.strip() for m in metric_list.split(",") if m.strip())
    unknown = set(names) - set(ALL_METRICS)
    if unknown:
        raise click.UsageError(f"unknown metrics: {sorted(unknown)}")
    try:
        manifest = JobManifest.load(manifest_path)
        report = run_evaluation(manifest, out_dir, names, config, allow_partial)
    except ManifestError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(json.dumps(report["aggregate"], indent=2, sort_keys=True))


@main.command()
@click.argument("documents", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path(), default=None, help="write JSON here instead of stdout")
def stats(documents, out_path):
    """Histogram report over annotation documents (focal, boundaries, surfaces)."""
    docs = []
    for path in documents:
        with open(path, "rb") as fh:
            docs.append(parse(fh.read()))
    report = corpus_stats(docs)
    text = json.dumps(report, indent=2, sort_keys=True)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        click.echo(text)


@main.command()
@click.option("--port", type=int, default=None, help=f"default from ${DEFAULT_PORT_ENV} or 8008")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--timeout", "timeout_s", type=float, default=30.0, show_default=True,
              help="per-request reconstruction timeout (seconds)")
@click.option("--config", "config_path", type=click.Path(exists=True))
def serve(port, host, timeout_s, config_path):
    """Run the HTTP preview service used by the annotation UI."""
    from anno3d.service import serve as run_service

    if port is None:
        port = int(os.environ.get(DEFAULT_PORT_ENV, "8008"))
    config = ReconstructionConfig.load(config_path) if config_path else None
    run_service(port=port, host=host, timeout_s=timeout_s, config=config)


if __name__ == "__main__":
    main()
