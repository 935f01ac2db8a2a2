"""Run every experiment config in configs/ through the CLI."""
import argparse
import sys
from pathlib import Path

from asyncnewton.cli import main

ROOT = Path(__file__).resolve().parent.parent


def run(out_root: Path) -> int:
    status = 0
    for cfg in sorted((ROOT / "configs").glob("*.yaml")):
        print(f"== {cfg.name}")
        code = main(["run", str(cfg), "--output-dir", str(out_root / cfg.stem)])
        status = max(status, code)
    return status


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--output-root", type=Path, default=ROOT / "results")
    sys.exit(run(p.parse_args().output_root))
