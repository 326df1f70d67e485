"""Command-line entry point for the predictor adapter."""

from __future__ import annotations

import argparse
import sys

from .stubs import STUB_MODES, make_stub


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mdseg-adapter",
        description="Serve segmentation logits over the line protocol, writing SGLT files.",
    )
    p.add_argument("--workdir", required=True, help="Directory for SGLT output files.")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--stub", choices=STUB_MODES, help="Serve a deterministic fake model.")
    src.add_argument("--checkpoint", help="TorchScript checkpoint of a real model.")
    p.add_argument("--device", default="cpu", help="Torch device for --checkpoint.")
    p.add_argument("--classes", type=int, default=256, help="Logit plane count.")
    p.add_argument("--gt-dir", default=None, help="Mask directory for the gt-leak stub.")
    p.add_argument("--margin", type=float, default=10.0, help="Stub one-hot logit margin.")
    p.add_argument("--cell", type=int, default=1, help="Checkerboard cell size in pixels.")
    p.add_argument(
        "--interp",
        default="bilinear",
        choices=("bilinear", "nearest"),
        help="Image interpolation for --checkpoint inference.",
    )
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.stub:
            model = make_stub(
                args.stub, args.classes, gt_dir=args.gt_dir, margin=args.margin, cell=args.cell
            )
        else:
            from .real import RealModel

            model = RealModel(args.checkpoint, args.device, args.classes, args.interp)
    except (ValueError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    from .server import serve

    serve(model, args.workdir)
    return 0


if __name__ == "__main__":
    sys.exit(main())
