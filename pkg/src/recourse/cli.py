"""Command-line front door: train, explain, compare metrics, demo, serve.

Exit codes: 0 success, 2 input error, 3 non-convergence, 4 internal error.
Machine-readable output goes to stdout, diagnostics to stderr. Every command
writes a run manifest (config snapshot, seeds, input hashes, output paths,
wall time) next to its outputs. A JSON config file may supply defaults for
any flag (flags > config file > defaults); RECOURSE_DATA_DIR sets the
default data directory.
"""

from __future__ import annotations

import hashlib
import json
import os
import socket
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import click
import numpy as np

from .bundle import ModelBundle
from .data import DatasetError, builtin, load_csv, lsat_schema, pima_schema
from .distances import KIND_ALIASES
from .local_models import demo_score_curve, emit_plot_data, scale_sweep
from .model import AdamConfig, TrainConfig, init_model, train
from .profiles import training_profile
from .search import CfQuery, NotConverged, solve_clamped, solve_diverse
from .text import render

EXIT_INPUT_ERROR = 2
EXIT_NOT_CONVERGED = 3
EXIT_INTERNAL = 4

DEMO_HALF_WIDTHS = (0.1, 0.3, 1.0, 3.0)


def data_dir_default() -> str:
    return os.environ.get("RECOURSE_DATA_DIR", "recourse_data")


def fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir: Path, command: str, config: dict, seeds: dict,
                   input_hashes: dict, output_paths: list, t0: float) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "config": config,
        "seeds": seeds,
        "input_hashes": input_hashes,
        "output_paths": [str(p) for p in output_paths],
        "wall_time_s": round(time.perf_counter() - t0, 3),
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    path = out_dir / f"{command}_manifest.json"
    path.write_text(json.dumps(manifest, indent=2))
    return path


def load_dataset(name: str, data_csv: str | None):
    if data_csv:
        schema = {"lsat": lsat_schema, "pima": pima_schema}.get(name)
        if schema is None:
            raise DatasetError(f"--data-csv is only supported for lsat/pima, not {name!r}")
        return load_csv(data_csv, schema())
    return builtin(name)


def load_bundle_or_fail(path: str) -> ModelBundle:
    try:
        return ModelBundle.load(path)
    except FileNotFoundError:
        fail(EXIT_INPUT_ERROR, f"no such model file: {path}")
    except (ValueError, KeyError, json.JSONDecodeError) as e:
        fail(EXIT_INPUT_ERROR, f"cannot load model bundle: {e}")


def eval_rows_for(bundle: ModelBundle):
    """Rebuild the held-out evaluation rows recorded in the bundle's metadata."""
    meta = bundle.training_meta or {}
    if "dataset" not in meta:
        return None
    ds = load_dataset(meta["dataset"], meta.get("data_path"))
    _, eval_X, eval_y = ds.split(meta.get("eval_fraction", 0.2),
                                 seed=meta.get("split_seed", 0))
    return eval_X, eval_y


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="JSON file with default values for any flag.")
@click.pass_context
def main(ctx, config_path):
    """Train small classifiers and explain their decisions counterfactually."""
    if config_path:
        ctx.default_map = json.loads(Path(config_path).read_text())


@main.command("train")
@click.option("--dataset", type=click.Choice(["lsat", "pima", "xor", "two_moons_like"]),
              required=True)
@click.option("--data-csv", default=None, help="Use this CSV instead of the bundled copy.")
@click.option("--seed", default=7, show_default=True)
@click.option("--epochs", default=None, type=int, help="Override the profile's epochs.")
@click.option("--hidden", default=None, help="Hidden layer sizes, e.g. 20,20,20.")
@click.option("--eval-fraction", default=0.2, show_default=True)
@click.option("--split-seed", default=0, show_default=True)
@click.option("--out", "out_dir", default=None, help="Output directory.")
def cmd_train(dataset, data_csv, seed, epochs, hidden, eval_fraction, split_seed, out_dir):
    """Train a model on a dataset and archive it as a bundle."""
    t0 = time.perf_counter()
    out = Path(out_dir or data_dir_default())
    try:
        ds_full = load_dataset(dataset, data_csv)
        train_ds, eval_X, eval_y = ds_full.split(eval_fraction, seed=split_seed)
    except DatasetError as e:
        fail(EXIT_INPUT_ERROR, str(e))

    prof = training_profile(dataset, seed=seed)
    dims = prof.layer_dims
    if hidden:
        hid = tuple(int(h) for h in hidden.split(","))
        dims = (train_ds.schema.n_features, *hid, 1)
    model0 = init_model(dims, prof.hidden_activation, prof.output_head, seed=seed)
    cfg = prof.config
    if epochs is not None:
        cfg.epochs = epochs
    Z, yz = train_ds.standardized_xy()
    model, trace = train(model0, Z, yz, cfg)

    bundle = ModelBundle(
        model=model,
        schema=train_ds.schema,
        standardizer=train_ds.standardizer,
        stats=train_ds.stats,
        dataset_manifest=train_ds.manifest,
        training_meta={
            "dataset": dataset,
            "data_path": data_csv,
            "seed": seed,
            "split_seed": split_seed,
            "eval_fraction": eval_fraction,
            "epochs": cfg.epochs,
            "loss": cfg.loss,
            "layer_dims": list(dims),
            "final_loss": trace[-1] if trace else None,
        },
    )
    out.mkdir(parents=True, exist_ok=True)
    model_path = out / f"{dataset}_model.json"
    bundle.save(model_path)

    click.echo(f"dataset: {dataset} ({train_ds.n_rows} train rows, {len(eval_X)} eval rows)")
    click.echo(f"architecture: {'x'.join(str(d) for d in dims)}")
    click.echo(f"parameters: {model.n_parameters}")
    if trace:
        click.echo(f"final training loss: {trace[-1]:.4f}")
    click.echo(f"model bundle: {model_path}")
    write_manifest(out, "train", {
        "dataset": dataset, "data_csv": data_csv, "epochs": cfg.epochs,
        "layer_dims": list(dims), "eval_fraction": eval_fraction,
    }, {"seed": seed, "split_seed": split_seed},
        {"dataset_sha256": train_ds.manifest["sha256"]}, [model_path], t0)


def _parse_x(x_text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in x_text.split(",")])
    except ValueError:
        fail(EXIT_INPUT_ERROR, f"cannot parse --x values: {x_text!r}")


def _resolve_point(bundle, row, x_text):
    if x_text is not None:
        return _parse_x(x_text)
    rows = eval_rows_for(bundle)
    if rows is None:
        fail(EXIT_INPUT_ERROR,
             "bundle has no dataset metadata; supply the point with --x")
    eval_X, _ = rows
    if row is None or not (0 <= row < len(eval_X)):
        fail(EXIT_INPUT_ERROR,
             f"--row must be in [0, {len(eval_X) - 1}] for this bundle's eval split")
    return eval_X[row]


@main.command("explain")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--row", type=int, default=None,
              help="Index into the held-out evaluation rows.")
@click.option("--x", "x_text", default=None, help="Inline point, e.g. 3.1,39.0,0.")
@click.option("--target", type=float, required=True)
@click.option("--metric", type=click.Choice(sorted(KIND_ALIASES)), default="l1mad",
              show_default=True)
@click.option("--clamp-categoricals", is_flag=True)
@click.option("--cap-range", is_flag=True)
@click.option("--diverse", "n_diverse", default=1, show_default=True)
@click.option("--restarts", "n_restarts", default=4, show_default=True)
@click.option("--lock", "locks", multiple=True, help="Feature to hold constant.")
@click.option("--seed", default=0, show_default=True)
@click.option("--tolerance", default=0.01, show_default=True)
@click.option("--outcome-phrase", default=None)
@click.option("--show-raw", is_flag=True,
              help="Also print the raw counterfactual vectors (unclamped codes).")
@click.option("--out", "out_dir", default=None)
def cmd_explain(model_path, row, x_text, target, metric, clamp_categoricals,
                cap_range, n_diverse, n_restarts, locks, seed, tolerance,
                outcome_phrase, show_raw, out_dir):
    """Generate and render counterfactual explanations for one point."""
    t0 = time.perf_counter()
    out = Path(out_dir or data_dir_default())
    bundle = load_bundle_or_fail(model_path)
    x_original = _resolve_point(bundle, row, x_text)
    try:
        x_original = bundle.validate_point(x_original)
    except ValueError as e:
        fail(EXIT_INPUT_ERROR, str(e))

    query = CfQuery(
        x_original=x_original,
        target_score=target,
        distance=bundle.distance_spec(metric),
        locked_features=frozenset(locks),
        n_restarts=max(n_restarts, n_diverse),
        n_diverse=n_diverse,
        tolerance_eps=tolerance,
        cap_to_training_range=cap_range,
        rng_seed=seed,
    )
    space = bundle.space()
    current = bundle.predict(x_original)
    click.echo(f"current score: {current:.4f}  target: {target}", err=True)

    if clamp_categoricals:
        result = solve_clamped(bundle.model, query, space)
        cfs = [result] if result.converged else result
    else:
        cfs = solve_diverse(bundle.model, query, space)

    if isinstance(cfs, NotConverged):
        click.echo(f"not converged: {cfs.message}", err=True)
        click.echo(f"best effort score {cfs.achieved_score:.4f} "
                   f"at distance {cfs.distance_value:.4f}", err=True)
        sys.exit(EXIT_NOT_CONVERGED)

    ordered = sorted(cfs, key=lambda c: c.distance_value)
    explanations = []
    for i, cf in enumerate(ordered, start=1):
        phrase = outcome_phrase or f"a score of {cf.achieved_score:.2f}"
        explanations.append(render(cf, bundle.schema, phrase, subject_id=i))
    for e in explanations:
        click.echo(f"{e.subject_id}. {e.statement}")
    if show_raw:
        names = ",".join(bundle.schema.names)
        click.echo(f"raw counterfactuals ({names}):")
        for cf in ordered:
            click.echo("  " + ",".join(f"{v:.3f}" for v in cf.x_prime)
                       + f"  score={cf.achieved_score:.4f} distance={cf.distance_value:.4f}")

    out.mkdir(parents=True, exist_ok=True)
    out_json = out / "explanations.json"
    out_json.write_text(json.dumps({
        "query": query.to_doc(),
        "current_score": current,
        "counterfactuals": [cf.to_doc() for cf in ordered],
        "explanations": [e.to_doc() for e in explanations],
    }, indent=2))
    click.echo(f"wrote {out_json}", err=True)
    write_manifest(out, "explain", {
        "model": str(model_path), "metric": metric, "target": target,
        "clamp_categoricals": clamp_categoricals, "cap_range": cap_range,
        "diverse": n_diverse, "locks": list(locks),
    }, {"seed": seed}, {"model_sha256": sha256_file(model_path)}, [out_json], t0)


@main.command("tables")
@click.option("--model", "model_path", required=True, type=click.Path())
@click.option("--metrics", default="l2,l2norm,l1mad", show_default=True)
@click.option("--rows", "n_rows", default=5, show_default=True,
              help="How many evaluation rows to explain.")
@click.option("--target", type=float, default=None,
              help="Target score (defaults to the dataset profile's question).")
@click.option("--seed", default=0, show_default=True)
@click.option("--cap-range", is_flag=True)
@click.option("--csv", "csv_path", default=None, help="Also write rows as CSV.")
@click.option("--out", "out_dir", default=None)
def cmd_tables(model_path, metrics, n_rows, target, seed, cap_range, csv_path, out_dir):
    """Compare counterfactuals across distance metrics on evaluation rows."""
    t0 = time.perf_counter()
    out = Path(out_dir or data_dir_default())
    bundle = load_bundle_or_fail(model_path)
    metric_list = [m.strip() for m in metrics.split(",") if m.strip()]
    for m in metric_list:
        if m not in KIND_ALIASES and m not in set(KIND_ALIASES.values()):
            fail(EXIT_INPUT_ERROR, f"unknown metric {m!r}")
    rows = eval_rows_for(bundle)
    if rows is None:
        fail(EXIT_INPUT_ERROR, "bundle has no dataset metadata; tables needs one")
    eval_X, _ = rows
    batch = eval_X[:n_rows]
    if target is None:
        name = (bundle.training_meta or {}).get("dataset", "lsat")
        target = training_profile(name).default_target

    names = bundle.schema.names
    results = []  # (row_idx, metric, changed names, n_changed, distance, converged)
    for idx, x_original in enumerate(batch):
        for m in metric_list:
            q = CfQuery(x_original=x_original, target_score=target,
                        distance=bundle.distance_spec(m),
                        cap_to_training_range=cap_range, rng_seed=seed)
            r = solve_diverse(bundle.model, q, bundle.space())
            if isinstance(r, NotConverged):
                results.append((idx, m, "-", None, None, False))
            else:
                best = r[0]
                changed = ",".join(n for n, _, _ in best.changed) or "(none)"
                results.append((idx, m, changed, len(best.changed),
                                best.distance_value, True))

    if not len(batch):
        click.echo("no rows selected")
        write_manifest(out, "tables", {"model": str(model_path), "rows": 0}, {"seed": seed},
                       {"model_sha256": sha256_file(model_path)}, [], t0)
        return

    header = f"{'row':>4} {'metric':<8} {'changed':<24} {'#chg':>4} {'distance':>10}"
    click.echo(header)
    click.echo("-" * len(header))
    for idx, m, changed, n_changed, dist, conv in results:
        if conv:
            click.echo(f"{idx:>4} {m:<8} {changed:<24} {n_changed:>4} {dist:>10.4f}")
        else:
            click.echo(f"{idx:>4} {m:<8} {'NOT CONVERGED':<24} {'-':>4} {'-':>10}")

    click.echo("\nsparsity summary (median changed features):")
    medians = {}
    for m in metric_list:
        counts = [n for _, mm, _, n, _, conv in results if mm == m and conv]
        medians[m] = float(np.median(counts)) if counts else None
        shown = "-" if medians[m] is None else f"{medians[m]:.1f}"
        click.echo(f"  {m:<8} {shown}")

    outputs = []
    if csv_path:
        p = Path(csv_path)
        p.parent.mkdir(parents=True, exist_ok=True)
        with p.open("w") as fh:
            fh.write("row,metric,changed,n_changed,distance,converged\n")
            for idx, m, changed, n_changed, dist, conv in results:
                fh.write(f"{idx},{m},\"{changed}\",{'' if n_changed is None else n_changed},"
                         f"{'' if dist is None else f'{dist:.6f}'},{conv}\n")
        outputs.append(p)
        click.echo(f"wrote {p}", err=True)
    write_manifest(out, "tables", {
        "model": str(model_path), "metrics": metric_list, "rows": n_rows,
        "target": target, "cap_range": cap_range,
    }, {"seed": seed}, {"model_sha256": sha256_file(model_path)}, outputs, t0)


@main.command("surrogate-demo")
@click.option("--center", default=1.0, show_default=True)
@click.option("--target", default=-10.0, show_default=True)
@click.option("--out", "out_dir", default=None)
def cmd_surrogate_demo(center, target, out_dir):
    """Emit the local-surrogate instability demo data and summary."""
    t0 = time.perf_counter()
    out = Path(out_dir or data_dir_default()) / "surrogate_demo"
    summary = emit_plot_data(out, demo_score_curve, center=center,
                             half_widths=DEMO_HALF_WIDTHS, target=target)
    fits = scale_sweep(demo_score_curve, center, DEMO_HALF_WIDTHS)
    click.echo(f"local fits at center {center}:")
    for f in fits:
        hw = (f.window[1] - f.window[0]) / 2
        click.echo(f"  half-width {hw:>5.2f}: slope {f.slope:>9.3f} "
                   f"(sign {'+' if f.slope > 0 else '-'}) rmse {f.fit_rmse:.3f}")
    click.echo("opposite-sign slopes across windows: "
               + ("yes" if summary["opposite_sign_slopes"] else "no"))
    comp = summary["comparison"]
    if comp["surrogate"]["unreachable"]:
        click.echo("surrogate: target unreachable (flat fit)")
    else:
        click.echo(f"surrogate answer: x={comp['surrogate']['x']:.3f} -> "
                   f"true score {comp['surrogate']['true_score']:.3f} "
                   f"(target {comp['target']})")
    if comp["counterfactual"]["converged"]:
        click.echo(f"counterfactual answer: x={comp['counterfactual']['x']:.3f} -> "
                   f"true score {comp['counterfactual']['true_score']:.3f}")
    else:
        click.echo("counterfactual: not converged within the search box")
    click.echo(f"plot data in {out}", err=True)
    write_manifest(out, "surrogate_demo", {"center": center, "target": target}, {},
                   {}, [out / n for n in ("curve.csv", "fits.csv", "counterfactual.csv")], t0)


@main.command("serve")
@click.option("--data-dir", default=None, help="Registry/audit directory.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def cmd_serve(data_dir, host, port):
    """Run the auditing HTTP service."""
    import uvicorn

    from .service import create_app

    directory = Path(data_dir or data_dir_default())
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((host, port))
    except OSError as e:
        fail(EXIT_INPUT_ERROR, f"cannot bind {host}:{port}: {e}")
    finally:
        probe.close()
    app = create_app(directory)
    click.echo(f"serving audit API on http://{host}:{port} (data in {directory})",
               err=True)
    uvicorn.run(app, host=host, port=port, log_level="warning")


def entry():
    try:
        main(standalone_mode=True)
    except SystemExit:
        raise
    except Exception as e:  # noqa: BLE001 - last-resort mapping to exit code 4
        click.echo(f"internal error: {e}", err=True)
        sys.exit(EXIT_INTERNAL)


if __name__ == "__main__":
    entry()
