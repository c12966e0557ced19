"""Command-line wrapper: render one figure kind from simulator outputs."""

from __future__ import annotations

import argparse
import sys

from .render import render
from .spec import KINDS, FigureSpec, MissingColumnsError


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="loocv-figures", description=__doc__)
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--trials", help="trials.csv from `loocvlab simulate`")
    parser.add_argument("--summary", help="summary.json from `loocvlab simulate`")
    parser.add_argument("--out", required=True, help="output image (.png or .svg)")
    parser.add_argument("--n", default="", help="facet sizes, comma separated (default: all)")
    parser.add_argument("--beta-delta", default="", help="facet effects, comma separated (default: all)")
    parser.add_argument("--mu-out", type=float, default=None)
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec(
            kind=args.kind,
            output_path=args.out,
            trials_csv=args.trials,
            summary_json=args.summary,
            n_values=tuple(int(v) for v in _parse_floats(args.n)) or None,
            beta_values=_parse_floats(args.beta_delta) or None,
            mu_out=args.mu_out,
        )
        render(spec)
    except (MissingColumnsError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
