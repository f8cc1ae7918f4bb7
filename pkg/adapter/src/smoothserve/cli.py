"""Command-line entry point: read the handshake on stdin, serve on stdout.

Example (as the certification engine would spawn it)::

    hiercert certify --model-cmd "smoothserve --model argmax --image x.npy" ...
"""

from __future__ import annotations

import argparse
import sys

from .models import load_model
from .protocol import Handshake, load_image, serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smoothserve",
        description="serve Monte-Carlo segmentation samples under Gaussian "
                    "input noise as an HCS1 stream")
    parser.add_argument("--model", required=True,
                        help="constant[:label] | argmax[:temperature] | "
                             "torchscript:<path>[,device]")
    parser.add_argument("--image", required=True,
                        help="input image (.npy float array, or a raster "
                             "file decoded to [0, 1])")
    parser.add_argument("--emit-kind", choices=["labels", "posteriors"],
                        help="pin the reply kind, overriding the handshake "
                             "mode request")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        image = load_image(args.image)
        model = load_model(args.model, image)
        line = sys.stdin.readline()
        if not line.strip():
            raise ValueError("no handshake line on stdin")
        handshake = Handshake.from_line(line)
        if args.emit_kind:
            handshake.mode = args.emit_kind
        summary = serve(model, image, handshake, sys.stdout.buffer)
    except Exception as exc:
        print(f"smoothserve: {exc}", file=sys.stderr)
        return 1
    print(f"served {summary['frames']} frames "
          f"({summary['components']} components, "
          f"{summary['class_count']} classes, mode={summary['mode']})",
          file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
