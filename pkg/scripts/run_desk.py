"""Desk-scale training trends: vocoder NLL, warmup MSE, critic gradient norm, vocoder term.

    python scripts/run_desk.py [--config configs/desk.cfg] [--out desk.json]
"""
import argparse
import json
from pathlib import Path

from advtts.config import load_config
from advtts.experiments import as_dict, train_acoustic, train_vocoder

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "desk.cfg"))
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    ap.add_argument("--out", help="write the results here as JSON")
    args = ap.parse_args()
    config = load_config(args.config, args.set)
    trainer, voc = train_vocoder(config)
    print("vocoder:", json.dumps(as_dict(voc)), flush=True)
    _, ac = train_acoustic(config, trainer)
    print("acoustic:", json.dumps(as_dict(ac)), flush=True)
    if args.out:
        Path(args.out).write_text(json.dumps({"vocoder": as_dict(voc), "acoustic": as_dict(ac)}, indent=1))


if __name__ == "__main__":
    main()
