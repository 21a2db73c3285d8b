"""Command line front end: figplots <spec.json>."""

import argparse
import json
import sys

from .render import SchemaError, load_spec, render


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="figplots",
        description="Render a sweep output file as a figure image.",
    )
    parser.add_argument("spec", help="JSON plot description")
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code else 0
    try:
        spec = load_spec(args.spec)
        render(spec)
    except (SchemaError, ValueError, OSError, json.JSONDecodeError) as e:
        print(f"figplots: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
