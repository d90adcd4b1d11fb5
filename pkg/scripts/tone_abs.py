"""Analysis-by-synthesis overfit check: train the vocoder on a 400 Hz tone and
report where the spectrum of the vocoded audio peaks.

    python scripts/tone_abs.py [--config configs/tone.cfg]
"""
import argparse
import json
from pathlib import Path

from advtts.config import load_config
from advtts.experiments import as_dict, tone_abs

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "tone.cfg"))
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    args = ap.parse_args()
    print(json.dumps(as_dict(tone_abs(load_config(args.config, args.set))), indent=1))


if __name__ == "__main__":
    main()
