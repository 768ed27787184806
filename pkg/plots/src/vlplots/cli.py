"""Standalone figure script: ``plot <spec.json>``.

Reads only the figure spec and the CSV(s) it names; writes only the image.
"""

from __future__ import annotations

import sys

from .figspec import FigureSpec, FigureSpecError
from .render import render


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1 or argv[0] in ("-h", "--help"):
        print("usage: plot <spec.json>", file=sys.stderr)
        return 2
    try:
        spec = FigureSpec.load(argv[0])
        result = render(spec)
    except (OSError, FigureSpecError, KeyError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(f"wrote {result.path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
