#!/usr/bin/env python3
"""Regenerate the canonical scenario JSON files in scenarios/."""

import argparse
from pathlib import Path

from rssloc.presets import PRESETS
from rssloc.scenario import save_scenario


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=Path(__file__).resolve().parent.parent / "scenarios",
                        type=Path, help="output directory")
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for name, make in PRESETS.items():
        path = args.out / f"{name}.json"
        save_scenario(make(), path)
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
