"""Command line: batch-export feature grids for a directory of images."""

from __future__ import annotations

import argparse
import sys

from .backbones import BackboneUnavailableError, make_backbone
from .export import ExportSettings, export_features, find_images


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dinoexport",
        description="Dump dense per-patch image features as binary grids.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="export one .ftr grid per image + manifest.csv")
    p.add_argument("--in", dest="in_dir", required=True, help="directory of images")
    p.add_argument("--out", dest="out_dir", required=True)
    p.add_argument("--half", action="store_true", help="half-precision inference (f32 files)")
    p.add_argument(
        "--backbone", choices=("dinov2", "stub"), default="dinov2",
        help="dinov2 needs the pretrained weights; stub is deterministic and offline",
    )
    p.add_argument("--input-size", type=int, default=700)
    p.add_argument("--patch-size", type=int, default=14)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    settings = ExportSettings(
        input_size=args.input_size,
        patch_size=args.patch_size,
        output_size=args.input_size // args.patch_size,
        half=args.half,
    )
    try:
        backbone = make_backbone(args.backbone, half=args.half)
        images = find_images(args.in_dir)
        rows = export_features(images, settings, backbone, args.out_dir)
    except BackboneUnavailableError as exc:
        print(f"ERROR backbone: {exc}", file=sys.stderr)
        return 4
    except FileNotFoundError as exc:
        print(f"ERROR missing-file: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return 2
    print(f"export: {len(rows)} feature grids -> {args.out_dir} (manifest.csv written)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
