import json
import sys
import textwrap

import numpy as np
import pytest

from mdseg.cli import main
from mdseg.label_space import MappingTable, MaskImage, build_lut, project_mask
from mdseg.pngio import read_mask

from conftest import (
    build_toy_tree,
    devkit_shaped_mapping_csv,
    make_space,
    mapping_csv,
    space_csv,
    toy_descriptor,
    write_png_mask,
)


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# validate-mapping


def test_validate_mapping_devkit_shaped_counts(tmp_path, capsys):
    f = tmp_path / "coco.csv"
    f.write_text(devkit_shaped_mapping_csv(201, 133))
    code, out, _ = run(capsys, "validate-mapping", str(f))
    assert code == 0
    assert "COCO: 201 -> 133 (ok)" in out


def test_validate_mapping_identity_toy(tmp_path, capsys):
    f = tmp_path / "toy.csv"
    f.write_text(mapping_csv([(1, 1), (2, 2), (3, 3)]))
    code, out, _ = run(capsys, "validate-mapping", str(f))
    assert code == 0
    assert "toy: 3 -> 3" in out


def test_validate_mapping_corrupt_csv_exit_2(tmp_path, capsys):
    f = tmp_path / "bad.csv"
    f.write_text("source_id,source_name,target_id,target_name\n1,a,xx,b\n")
    code, _, err = run(capsys, "validate-mapping", str(f))
    assert code == 2
    assert "line 2" in err


def test_validate_mapping_mismatch_warns_and_strict_fails(tmp_path, capsys):
    f = tmp_path / "cityscapes.csv"
    f.write_text(devkit_shaped_mapping_csv(34, 30))  # expected 31
    code, out, err = run(capsys, "validate-mapping", str(f))
    assert code == 0
    assert "MISMATCH" in out
    code, _, err = run(capsys, "--strict", "validate-mapping", str(f))
    assert code == 1


# remap


def _write_spaces_and_mapping(tmp_path, pairs=((1, 5), (2, 7), (3, 9))):
    ds = tmp_path / "toy_space.csv"
    ds.write_text(space_csv(4))
    uni = tmp_path / "unified_space.csv"
    uni.write_text(space_csv(16))
    mp = tmp_path / "mapping.csv"
    mp.write_text(mapping_csv(list(pairs)))
    return ds, uni, mp


def test_remap_matches_library_projection(tmp_path, capsys):
    ds, uni, mp = _write_spaces_and_mapping(tmp_path)
    in_dir = tmp_path / "in"
    out_dir = tmp_path / "out"
    in_dir.mkdir()
    rng = np.random.default_rng(0)
    masks = {}
    for i in range(20):
        data = rng.integers(0, 4, (9, 7)).astype(np.uint8)
        masks[f"{i:03d}.png"] = data
        write_png_mask(in_dir / f"{i:03d}.png", data)
    code, out, _ = run(
        capsys,
        "remap",
        str(in_dir),
        str(out_dir),
        "--mapping",
        str(mp),
        "--dataset-space",
        str(ds),
        "--unified-space",
        str(uni),
        "--direction",
        "to-unified",
    )
    assert code == 0
    assert "20 files" in out

    toy = make_space("toy_space", 4)
    unified = make_space("unified_space", 16)
    table = MappingTable(toy, unified, ((1, 5), (2, 7), (3, 9)))
    lut = build_lut(table)
    for name, data in masks.items():
        expected = project_mask(MaskImage(data, space="toy"), lut, unified)
        assert np.array_equal(read_mask(out_dir / name), expected.data)


def test_remap_round_trip_bijective_bytes(tmp_path, capsys):
    from mdseg.pngio import write_mask

    ds, uni, mp = _write_spaces_and_mapping(tmp_path)
    in_dir = tmp_path / "in"
    mid_dir = tmp_path / "mid"
    back_dir = tmp_path / "back"
    in_dir.mkdir()
    rng = np.random.default_rng(1)
    for i in range(5):
        # canonical encoder, so the round trip is comparable byte-wise
        write_mask(in_dir / f"{i}.png", rng.integers(0, 4, (8, 8)).astype(np.uint8))
    common = ["--mapping", str(mp), "--dataset-space", str(ds), "--unified-space", str(uni)]
    assert run(capsys, "remap", str(in_dir), str(mid_dir), *common, "--direction", "to-unified")[0] == 0
    assert run(capsys, "remap", str(mid_dir), str(back_dir), *common, "--direction", "to-dataset")[0] == 0
    for i in range(5):
        # classes 1..3 map bijectively; 0 is void in both spaces
        assert (back_dir / f"{i}.png").read_bytes() == (in_dir / f"{i}.png").read_bytes()


def test_remap_empty_dir(tmp_path, capsys):
    ds, uni, mp = _write_spaces_and_mapping(tmp_path)
    in_dir = tmp_path / "in"
    in_dir.mkdir()
    code, out, _ = run(
        capsys, "remap", str(in_dir), str(tmp_path / "out"),
        "--mapping", str(mp), "--dataset-space", str(ds),
        "--unified-space", str(uni), "--direction", "to-unified",
    )
    assert code == 0
    assert "0 files" in out


def test_remap_invalid_pixel_exit_3(tmp_path, capsys):
    ds, uni, mp = _write_spaces_and_mapping(tmp_path)
    in_dir = tmp_path / "in"
    in_dir.mkdir()
    write_png_mask(in_dir / "bad.png", np.full((4, 4), 200, dtype=np.uint8))
    code, _, err = run(
        capsys, "remap", str(in_dir), str(tmp_path / "out"),
        "--mapping", str(mp), "--dataset-space", str(ds),
        "--unified-space", str(uni), "--direction", "to-unified",
    )
    assert code == 3
    assert "200" in err


# manifest + stats


def _toy_manifest(tmp_path, capsys):
    build_toy_tree(tmp_path / "data", toy_descriptor(), {"train": 3, "val": 2})
    out = tmp_path / "manifest.jsonl"
    code, _, _ = run(
        capsys, "manifest", "--root", str(tmp_path / "data"),
        "--dataset", "Toy", "--out", str(out),
    )
    return code, out


def test_manifest_custom_dataset_skips_verification(tmp_path, capsys):
    build_toy_tree(tmp_path / "data", toy_descriptor(), {"train": 3, "val": 2})
    code, out, err = run(
        capsys, "manifest", "--root", str(tmp_path / "data"),
        "--dataset", "Toy", "--out", str(tmp_path / "m.jsonl"),
    )
    assert code == 0
    assert "5 records" in out
    assert "warning" not in err


def test_manifest_and_stats_flow(tmp_path, capsys):
    build_toy_tree(tmp_path / "data", toy_descriptor(name="Cityscapes"), {"train": 3, "val": 2})
    out = tmp_path / "manifest.jsonl"
    code, stdout, err = run(
        capsys, "manifest", "--root", str(tmp_path / "data"),
        "--dataset", "Cityscapes", "--out", str(out),
    )
    assert code == 0
    assert "5 records" in stdout
    assert "warning" in err  # count mismatch vs the real Cityscapes

    space = tmp_path / "space.csv"
    space.write_text(space_csv(4))
    code, stdout, _ = run(
        capsys, "stats", "--manifest", str(out), "--root", str(tmp_path / "data"),
        "--space", str(space),
    )
    assert code == 0
    doc = json.loads(stdout)
    assert doc["records"] == 5
    assert doc["per_split"] == {"Cityscapes/train": 3, "Cityscapes/val": 2}
    assert sum(doc["class_histogram"].values()) > 0


def test_manifest_strict_count_mismatch_exit_1(tmp_path, capsys):
    build_toy_tree(tmp_path / "data", toy_descriptor(name="Cityscapes"), {"train": 3, "val": 2})
    code, _, _ = run(
        capsys, "--strict", "manifest", "--root", str(tmp_path / "data"),
        "--dataset", "Cityscapes", "--out", str(tmp_path / "m.jsonl"),
    )
    assert code == 1


# plan


def test_plan_deterministic_files(tmp_path, capsys):
    code, manifest_path = _toy_manifest(tmp_path, capsys)
    assert code == 0
    p1, p2 = tmp_path / "p1.json", tmp_path / "p2.json"
    for p in (p1, p2):
        code, _, _ = run(
            capsys, "--seed", "7", "plan", "--manifest", str(manifest_path),
            "--target", "6", "--total-iters", "10", "--batch", "2", "--out", str(p),
        )
        assert code == 0
    assert p1.read_bytes() == p2.read_bytes()
    doc = json.loads(p1.read_text())
    assert doc["seed"] == 7
    assert doc["repeat_factors"] == {"Toy": 2}
    assert doc["training_meta"]["optimizer"] == "AdamW"


def test_plan_dump_batches(tmp_path, capsys):
    _, manifest_path = _toy_manifest(tmp_path, capsys)
    code, out, _ = run(
        capsys, "--seed", "3", "plan", "--manifest", str(manifest_path),
        "--target", "6", "--total-iters", "10", "--batch", "2",
        "--out", str(tmp_path / "p.json"), "--dump-batches", "4",
    )
    assert code == 0
    lines = [json.loads(l) for l in out.strip().splitlines()]
    assert [b["iter"] for b in lines] == [0, 1, 2, 3]
    assert all(len(b["items"]) == 2 for b in lines)


# augment


def test_augment_and_replay_bit_identical(tmp_path, capsys):
    _, manifest_path = _toy_manifest(tmp_path, capsys)
    out1 = tmp_path / "aug1"
    code, _, _ = run(
        capsys, "--seed", "11", "augment", "--manifest", str(manifest_path),
        "--root", str(tmp_path / "data"), "--n", "3", "--out", str(out1),
        "--crop", "24", "24", "--base-scale", "32", "16",
    )
    assert code == 0
    log = out1 / "draws.json"
    assert log.exists()
    pngs = sorted(p.name for p in out1.glob("*_aug*.png"))
    assert len(pngs) == 6  # 3 images + 3 masks

    out2 = tmp_path / "aug2"
    code, _, _ = run(
        capsys, "augment", "--manifest", str(manifest_path),
        "--root", str(tmp_path / "data"), "--out", str(out2), "--replay", str(log),
    )
    assert code == 0
    for name in pngs:
        assert (out2 / name).read_bytes() == (out1 / name).read_bytes()


def test_augment_output_dims(tmp_path, capsys):
    _, manifest_path = _toy_manifest(tmp_path, capsys)
    out = tmp_path / "aug"
    run(
        capsys, "augment", "--manifest", str(manifest_path),
        "--root", str(tmp_path / "data"), "--n", "1", "--out", str(out),
        "--crop", "20", "20", "--base-scale", "32", "16",
    )
    mask_file = next(out.glob("*_aug_mask.png"))
    assert read_mask(mask_file).shape == (20, 20)


# tta + evaluate end to end


_GT_LEAK_PREDICTOR = textwrap.dedent(
    """
    import json, sys
    from pathlib import Path
    import numpy as np
    from mdseg.pngio import read_mask
    from mdseg.resample import resize_nearest
    from mdseg.sglt import write_sglt

    gt_dir = Path(sys.argv[1])
    workdir = Path(sys.argv[2])
    n = 0
    for line in sys.stdin:
        req = json.loads(line)
        n += 1
        mask = read_mask(gt_dir / (Path(req["image_path"]).stem + ".png"))
        w, h = req["scale"]
        mask = resize_nearest(mask, w, h)
        if req["flip"]:
            mask = mask[:, ::-1]
        logits = np.zeros((16, h, w), dtype=np.float32)
        for c in range(16):
            logits[c][mask == c] = 10.0
        out = workdir / f"{req['id']}.sglt"
        write_sglt(out, logits)
        print(json.dumps({"id": req["id"], "logit_path": str(out)}), flush=True)
    """
)


def test_tta_then_evaluate_scores_one(tmp_path, capsys):
    ds, uni, mp = _write_spaces_and_mapping(tmp_path)
    data_root = tmp_path / "data"
    build_toy_tree(data_root, toy_descriptor(), {"val": 2}, size=(12, 8), classes=(0, 1, 2, 3))
    manifest_path = tmp_path / "m.jsonl"
    run(capsys, "manifest", "--root", str(data_root), "--dataset", "Toy",
        "--splits", "val", "--out", str(manifest_path))

    # project the ground truth into the shared space for the leak predictor
    toy = make_space("toy_space", 4)
    unified = make_space("unified_space", 16)
    lut = build_lut(MappingTable(toy, unified, ((1, 5), (2, 7), (3, 9))))
    leak_dir = tmp_path / "leak"
    leak_dir.mkdir()
    for mask_path in sorted((data_root / "val/masks").glob("*.png")):
        projected = project_mask(MaskImage(read_mask(mask_path), space="toy"), lut, unified)
        write_png_mask(leak_dir / mask_path.name, projected.data)

    script = tmp_path / "leak_predictor.py"
    script.write_text(_GT_LEAK_PREDICTOR)
    predictor_cmd = f"{sys.executable} {script} {leak_dir} {tmp_path}"

    pred_dir = tmp_path / "pred"
    code, _, _ = run(
        capsys, "tta", "--manifest", str(manifest_path), "--root", str(data_root),
        "--predictor-cmd", predictor_cmd, "--ratios", "1.0", "--no-flip",
        "--base-scale", "12", "8", "--out", str(pred_dir),
    )
    assert code == 0

    report_path = tmp_path / "report.json"
    code, _, _ = run(
        capsys, "evaluate", "--pred", str(pred_dir), "--gt", str(manifest_path),
        "--root", str(data_root), "--mapping", str(mp),
        "--dataset-space", str(ds), "--unified-space", str(uni),
        "--out", str(report_path),
    )
    assert code == 0
    doc = json.loads(report_path.read_text())
    assert doc["miou"] == 1.0
    assert doc["dataset"] == "Toy"


def test_tta_predictor_failure_exit_4(tmp_path, capsys):
    data_root = tmp_path / "data"
    build_toy_tree(data_root, toy_descriptor(), {"val": 1}, size=(8, 8))
    manifest_path = tmp_path / "m.jsonl"
    run(capsys, "manifest", "--root", str(data_root), "--dataset", "Toy",
        "--splits", "val", "--out", str(manifest_path))
    code, _, err = run(
        capsys, "tta", "--manifest", str(manifest_path), "--root", str(data_root),
        "--predictor-cmd", f"{sys.executable} -c 'import sys; sys.exit(1)'",
        "--out", str(tmp_path / "pred"),
    )
    assert code == 4


def test_evaluate_without_mapping_exit_2(tmp_path, capsys):
    ds, uni, mp = _write_spaces_and_mapping(tmp_path)
    data_root = tmp_path / "data"
    build_toy_tree(data_root, toy_descriptor(), {"val": 1}, size=(8, 8))
    manifest_path = tmp_path / "m.jsonl"
    run(capsys, "manifest", "--root", str(data_root), "--dataset", "Toy",
        "--splits", "val", "--out", str(manifest_path))
    pred = tmp_path / "pred"
    pred.mkdir()
    code, _, err = run(
        capsys, "evaluate", "--pred", str(pred), "--gt", str(manifest_path),
        "--root", str(data_root), "--dataset-space", str(ds),
    )
    assert code == 2
    assert "back-projection" in err
