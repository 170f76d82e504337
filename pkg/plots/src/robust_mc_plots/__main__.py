"""CLI: python -m robust_mc_plots --figure fig2 --csv results.csv --out fig2.png"""

import argparse
import sys

from .figures import FIGURES, FigureSpec, SchemaError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="robust_mc_plots",
        description="Render a figure from a robust-mc result CSV.",
    )
    parser.add_argument("--figure", required=True, choices=FIGURES)
    parser.add_argument("--csv", required=True, help="input results CSV")
    parser.add_argument("--out", required=True, help="output image (png/svg)")
    parser.add_argument("--linear-x", action="store_true",
                        help="force a linear x axis")
    parser.add_argument("--linear-y", action="store_true",
                        help="force a linear y axis")
    args = parser.parse_args(argv)
    spec = FigureSpec(figure=args.figure, csv_path=args.csv, out_path=args.out,
                      log_x=False if args.linear_x else None,
                      log_y=not args.linear_y)
    try:
        summary = render(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}: {summary.series_count} series "
          f"({', '.join(f'{k}: {v} pts' for k, v in summary.series.items())})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
