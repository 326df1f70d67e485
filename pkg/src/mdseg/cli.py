"""Command-line front end.

Every subcommand is deterministic given its flags and seed, writes output
files atomically, and keeps machine-readable results on stdout (or in
--out files) with progress and diagnostics on stderr.

Exit codes, part of the public contract:

    0  success
    1  verification warning under --strict
    2  parse error (malformed CSV/JSON/SGLT, bad configuration)
    3  data error (invalid pixel values, shape mismatches)
    4  predictor error

Configuration precedence: command-line flags beat the optional JSON
config file (--config), which beats built-in defaults.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from . import augment as aug
from . import catalog as cat
from . import evaluate as ev
from . import sampler as samp
from .errors import DataError, ParseError, StrictFailure, ToolkitError
from .label_space import (
    MaskImage,
    apply_overlay,
    build_lut,
    invert_mapping,
    load_label_space,
    load_mapping,
    parse_mapping_rows,
    project_mask,
    unified_template,
)
from .pngio import atomic_write_bytes, read_image, read_mask, write_image, write_mask
from .tta import SubprocessPredictor, TtaConfig, run_tta


def _echo_err(msg: str) -> None:
    click.echo(msg, err=True)


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ParseError(f"cannot read config {path}: {e}") from None


@click.group()
@click.option("--config", type=click.Path(), default=None, help="JSON config file; flags override it.")
@click.option("--seed", type=int, default=None, help="Global seed (default 0).")
@click.option("--strict", is_flag=True, default=False, help="Promote verification warnings to failures.")
@click.option("--threads", type=int, default=None, help="Worker threads for per-file commands (default 1).")
@click.pass_context
def cli(ctx, config, seed, strict, threads):
    """Multi-dataset segmentation toolkit."""
    cfg = _load_config(config)
    ctx.obj = {
        "seed": seed if seed is not None else cfg.get("seed", 0),
        "strict": strict or cfg.get("strict", False),
        "threads": threads if threads is not None else cfg.get("threads", 1),
    }


@cli.command("validate-mapping")
@click.argument("mapping_files", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--void-target", type=int, default=0, show_default=True,
              help="Void class id in the shared target space.")
@click.pass_context
def validate_mapping_cmd(ctx, mapping_files, void_target):
    """Report original -> projected class counts for mapping CSVs.

    Counts are checked against the built-in dataset expectations when the
    file stem names a known dataset.
    """
    strict = ctx.obj["strict"]
    failures = 0
    for path in mapping_files:
        p = Path(path)
        try:
            triples = parse_mapping_rows(p.read_text(encoding="utf-8"))
        except ParseError as e:
            raise ParseError(f"{p}: {e}") from None
        original = len({s for _, s, _ in triples})
        projected = len({t for _, _, t in triples} - {void_target})
        desc = cat.find_descriptor(p.stem)
        if desc is None:
            click.echo(f"{p.stem}: {original} -> {projected}")
            continue
        ok = (original, projected) == (desc.original_classes, desc.projected_classes)
        status = "ok" if ok else (
            f"MISMATCH, expected {desc.original_classes} -> {desc.projected_classes}"
        )
        click.echo(f"{desc.name}: {original} -> {projected} ({status})")
        if not ok:
            failures += 1
            _echo_err(f"warning: {desc.name} counts differ from the built-in catalog")
    if failures and strict:
        raise StrictFailure(f"{failures} mapping(s) differ from expected counts")


def _space_or_template(path: str | None, fallback_name: str = "unified"):
    if path:
        return load_label_space(path)
    return unified_template()


@cli.command("remap")
@click.argument("in_dir", type=click.Path(exists=True, file_okay=False))
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("--mapping", "mapping_path", required=True, type=click.Path(exists=True),
              help="Dataset -> shared-space mapping CSV.")
@click.option("--dataset-space", "dataset_space_path", required=True, type=click.Path(exists=True),
              help="Dataset label-space CSV.")
@click.option("--unified-space", "unified_space_path", type=click.Path(exists=True), default=None,
              help="Shared label-space CSV (defaults to the 256-class template).")
@click.option("--overlay", type=click.Path(exists=True), default=None,
              help="Corrections overlay CSV applied over the base mapping.")
@click.option("--direction", type=click.Choice(["to-unified", "to-dataset"]), required=True)
@click.option("--inversion-policy", type=click.Choice(["strict", "first-listed", "to-void"]),
              default="first-listed", show_default=True)
@click.pass_context
def remap_cmd(ctx, in_dir, out_dir, mapping_path, dataset_space_path, unified_space_path,
              overlay, direction, inversion_policy):
    """Remap every PNG mask in IN_DIR into OUT_DIR."""
    dataset_space = load_label_space(dataset_space_path)
    shared_space = _space_or_template(unified_space_path)
    mapping = load_mapping(mapping_path, dataset_space, shared_space)
    if overlay:
        mapping = apply_overlay(mapping, Path(overlay).read_text(encoding="utf-8"))
    if direction == "to-unified":
        lut, target, source_name = build_lut(mapping), shared_space, dataset_space.name
    else:
        inv = invert_mapping(mapping, inversion_policy)
        lut, target, source_name = build_lut(inv), dataset_space, shared_space.name

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = sorted(Path(in_dir).glob("*.png"))

    def one(path: Path) -> None:
        mask = MaskImage(read_mask(path), space=source_name)
        write_mask(out / path.name, project_mask(mask, lut, target).data)

    _run_parallel(one, files, ctx.obj["threads"])
    click.echo(f"{len(files)} files")


def _run_parallel(fn, items, threads: int) -> None:
    if threads <= 1 or len(items) <= 1:
        for item in items:
            fn(item)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for result in pool.map(fn, items):
            pass


@cli.command("manifest")
@click.option("--root", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--dataset", "dataset_name", required=True,
              help="Built-in dataset name, or any name for a custom tree.")
@click.option("--splits", default="train,val", show_default=True)
@click.option("--image-suffix", default=None, help="Override the image filename suffix.")
@click.option("--mask-suffix", default=None, help="Override the mask filename suffix.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--no-dims", is_flag=True, default=False, help="Skip reading image headers.")
@click.pass_context
def manifest_cmd(ctx, root, dataset_name, splits, image_suffix, mask_suffix, out_path, no_dims):
    """Scan a dataset tree into a line-delimited JSON manifest.

    Built-in dataset names get their counts verified against the catalog;
    unknown names are scanned with the default layout and no verification.
    """
    strict = ctx.obj["strict"]
    desc = cat.find_descriptor(dataset_name)
    builtin = desc is not None
    if desc is None:
        desc = cat.DatasetDescriptor(
            name=dataset_name, scene="natural", train_count=1, val_count=1,
            original_classes=1, projected_classes=1,
            image_suffix=image_suffix or ".png", mask_suffix=mask_suffix or ".png",
        )
    elif image_suffix or mask_suffix:
        desc = dataclasses.replace(
            desc,
            image_suffix=image_suffix or desc.image_suffix,
            mask_suffix=mask_suffix or desc.mask_suffix,
        )
    m = cat.build_manifest(
        desc, root, splits=tuple(splits.split(",")), collect_dims=not no_dims, strict=strict
    )
    cat.save_manifest(m, out_path)
    for w in m.orphans:
        _echo_err(f"warning: {w}")
    mismatched = False
    if builtin:
        report = cat.verify_manifest(m, desc)
        mismatched = not report.ok
        for line in report.mismatches:
            _echo_err(f"warning: {line}")
    click.echo(f"{len(m)} records -> {out_path} (sha256 {m.checksum[:12]})")
    if mismatched and strict:
        raise StrictFailure("manifest counts differ from the catalog")


@cli.command("plan")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--target", type=int, default=samp.DEFAULT_TARGET_SIZE, show_default=True)
@click.option("--total-iters", type=int, default=samp.DEFAULT_TOTAL_ITERS, show_default=True)
@click.option("--batch", type=int, default=samp.DEFAULT_BATCH_SIZE, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--dump-batches", type=int, default=0, show_default=True,
              help="Also stream the first N batches as JSON lines on stdout.")
@click.pass_context
def plan_cmd(ctx, manifest_path, target, total_iters, batch, out_path, dump_batches):
    """Build the balanced two-phase schedule and write the plan file."""
    m = cat.load_manifest(manifest_path)
    sizes = {}
    for (dataset, split), n in m.counts().items():
        if split == "train":
            sizes[dataset] = n
    if not sizes:
        raise DataError("manifest has no train records")
    plan = samp.build_repeat_plan(sizes, target)
    schedule = samp.build_schedule(
        sizes, plan, total_iters=total_iters, batch_size=batch, seed=ctx.obj["seed"]
    )
    atomic_write_bytes(out_path, samp.plan_to_json(schedule).encode("utf-8"))
    _echo_err(f"plan -> {out_path}")
    for it in range(min(dump_batches, total_iters)):
        click.echo(samp.batch_to_json(samp.next_batch(schedule, it)))


@cli.command("augment")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--root", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--n", "count", type=int, default=1, show_default=True,
              help="Number of manifest records to augment.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--crop", nargs=2, type=int, default=(1024, 1024), show_default=True)
@click.option("--base-scale", nargs=2, type=int, default=(2048, 1024), show_default=True)
@click.option("--void", type=int, default=0, show_default=True)
@click.option("--replay", "replay_log", type=click.Path(exists=True), default=None,
              help="Re-apply a previous draw log instead of drawing.")
@click.pass_context
def augment_cmd(ctx, manifest_path, root, count, out_dir, crop, base_scale, void, replay_log):
    """Write augmented image/mask pairs plus the draw log for replay."""
    m = cat.load_manifest(manifest_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    root = Path(root)

    if replay_log:
        seed, cfg, entries = aug.draw_log_from_json(Path(replay_log).read_text(encoding="utf-8"))
        for entry in entries:
            record = m.records[entry["index"]]
            img = read_image(root / record.image)
            mask = read_mask(root / record.mask)
            draws = aug.AugDraws.from_dict(entry["draws"])
            img_out, mask_out = aug.apply_pipeline(img, mask, cfg, draws, void)
            stem = Path(record.image).stem
            write_image(out / f"{stem}_aug.png", img_out)
            write_mask(out / f"{stem}_aug_mask.png", mask_out)
        click.echo(f"replayed {len(entries)} samples -> {out}")
        return

    seed = ctx.obj["seed"]
    cfg = aug.AugConfig(base_scale=tuple(base_scale), crop=tuple(crop))
    entries = []
    records = m.records[:count]
    for i, record in enumerate(records):
        img = read_image(root / record.image)
        mask = read_mask(root / record.mask)
        draws = aug.draw_params(img.shape[1], img.shape[0], cfg, aug.sample_stream(seed, i))
        img_out, mask_out = aug.apply_pipeline(img, mask, cfg, draws, void)
        stem = Path(record.image).stem
        write_image(out / f"{stem}_aug.png", img_out)
        write_mask(out / f"{stem}_aug_mask.png", mask_out)
        entries.append(
            {"index": i, "image": record.image, "mask": record.mask, "draws": draws.to_dict()}
        )
    atomic_write_bytes(out / "draws.json", aug.draw_log_to_json(seed, cfg, entries).encode("utf-8"))
    click.echo(f"augmented {len(records)} samples -> {out}")


@cli.command("tta")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--root", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--predictor-cmd", required=True, help="Command line of a predictor process.")
@click.option("--ratios", default="0.5,0.75,1.0,1.25,1.5,1.75", show_default=True)
@click.option("--flip/--no-flip", default=True, show_default=True)
@click.option("--base-scale", nargs=2, type=int, default=(2048, 1024), show_default=True)
@click.option("--prob-mean", is_flag=True, default=False,
              help="Average softmax probabilities instead of raw scores.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.pass_context
def tta_cmd(ctx, manifest_path, root, predictor_cmd, ratios, flip, base_scale, prob_mean, out_dir):
    """Run multi-scale + flip fusion over every manifest image."""
    m = cat.load_manifest(manifest_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    root = Path(root)
    cfg = TtaConfig(
        base_scale=tuple(base_scale),
        ratios=tuple(float(r) for r in ratios.split(",")),
        flip=flip,
        fuse="prob-mean" if prob_mean else "logit-mean",
    )
    threads = max(1, ctx.obj["threads"])
    records = list(m.records)

    def worker(chunk):
        predictor = SubprocessPredictor(predictor_cmd)
        try:
            for record in chunk:
                mask = run_tta(root / record.image, predictor, cfg)
                write_mask(out / (Path(record.image).stem + ".png"), mask.data)
        finally:
            predictor.close()

    chunks = [records[i::threads] for i in range(threads)]
    chunks = [c for c in chunks if c]
    _run_parallel(worker, chunks, threads)
    click.echo(f"{len(records)} masks -> {out}")


@cli.command("evaluate")
@click.option("--pred", "pred_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--gt", "gt_manifest", required=True, type=click.Path(exists=True))
@click.option("--root", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--mapping", "mapping_path", type=click.Path(exists=True), default=None)
@click.option("--dataset-space", "dataset_space_path", required=True, type=click.Path(exists=True))
@click.option("--unified-space", "unified_space_path", type=click.Path(exists=True), default=None)
@click.option("--ignore", "ignore_class", type=int, default=None,
              help="Ground-truth ignore id (defaults to the space's void class).")
@click.option("--unified", is_flag=True, default=False,
              help="Diagnostics: score in the shared space without back-projection.")
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.pass_context
def evaluate_cmd(ctx, pred_dir, gt_manifest, root, mapping_path, dataset_space_path,
                 unified_space_path, ignore_class, unified, out_path):
    """Back-project predictions and report per-class IoU / mIoU."""
    dataset_space = load_label_space(dataset_space_path)
    shared_space = _space_or_template(unified_space_path)
    mapping = (
        load_mapping(mapping_path, dataset_space, shared_space) if mapping_path else None
    )
    if ignore_class is None:
        if dataset_space.void_id is None:
            raise ParseError(
                f"space {dataset_space.name!r} has no void class; pass --ignore"
            )
        ignore_class = dataset_space.void_id
    m = cat.load_manifest(gt_manifest)
    cfg = ev.EvalConfig(
        space=dataset_space,
        ignore_class=ignore_class,
        mapping=mapping,
        unified=unified,
        strict=ctx.obj["strict"],
    )
    try:
        report = ev.evaluate_dataset(pred_dir, m, cfg, root, threads=max(1, ctx.obj["threads"]))
    except ValueError as e:
        raise ParseError(str(e)) from None
    datasets = m.datasets()
    name = datasets[0] if len(datasets) == 1 else "+".join(datasets)
    payload = report.to_json(name, len(dataset_space))
    if out_path:
        atomic_write_bytes(out_path, payload.encode("utf-8"))
        _echo_err(f"report -> {out_path}")
    else:
        click.echo(payload, nl=False)
    for missing in report.missing:
        _echo_err(f"warning: no prediction for {missing}")


@cli.command("stats")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--root", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--space", "space_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.pass_context
def stats_cmd(ctx, manifest_path, root, space_path, out_path):
    """Per-split record counts and the class pixel histogram."""
    m = cat.load_manifest(manifest_path)
    space = load_label_space(space_path)
    histogram = cat.class_histogram(m, space, root)
    doc = {
        "records": len(m),
        "per_split": {f"{d}/{s}": n for (d, s), n in sorted(m.counts().items())},
        "class_histogram": {str(k): v for k, v in histogram.items()},
        "checksum": m.checksum,
    }
    payload = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out_path:
        atomic_write_bytes(out_path, payload.encode("utf-8"))
        _echo_err(f"stats -> {out_path}")
    else:
        click.echo(payload, nl=False)


def main(argv=None) -> int:
    """Entry point translating toolkit errors into contract exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except ToolkitError as e:
        _echo_err(f"error: {e}")
        return e.exit_code
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.ClickException as e:
        e.show()
        return 2
    except click.exceptions.Abort:
        return 130


if __name__ == "__main__":
    sys.exit(main())
