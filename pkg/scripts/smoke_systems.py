"""Run the five system configurations end to end through the CLI on the tiny corpus.

    python scripts/smoke_systems.py [--work runs/smoke]

Prepares the corpus once, trains one vocoder, then trains each acoustic
system and synthesizes one utterance with it.  Prints one line per system.
"""
import argparse
import time
from pathlib import Path

from advtts import cache
from advtts.cli import main as cli

ROOT = Path(__file__).resolve().parent.parent
SYSTEMS = ["baseline", "gan", "gan_w", "wgan_gp", "wgan_gp_w"]


def run(*argv) -> int:
    return cli([str(a) for a in argv])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--work", default="runs/smoke")
    args = ap.parse_args()
    work = Path(args.work)
    base = ROOT / "configs" / "systems" / "baseline.cfg"
    prepared = work / "prepared"
    assert run("prepare", "--config", base, "--out", prepared) == 0
    assert run("train-vocoder", "--config", base, "--prepared", prepared, "--run-dir", work / "vocoder") == 0
    vocoder = work / "vocoder" / "vocoder.zip"
    utt = cache.read_manifest(prepared)[0]["utt_id"]
    failures = 0
    for name in SYSTEMS:
        cfg = ROOT / "configs" / "systems" / f"{name}.cfg"
        start = time.perf_counter()
        rc = run("train-acoustic", "--config", cfg, "--prepared", prepared, "--vocoder", vocoder,
                 "--run-dir", work / name)
        if rc == 0:
            rc = run("synthesize", "--config", cfg, "--prepared", prepared, "--utt", utt, "--vocoder", vocoder,
                     "--acoustic", work / name / "checkpoints" / "latest.zip", "--out", work / name / "wav")
        failures += rc != 0
        print(f"{name}: exit {rc} in {time.perf_counter() - start:.1f} s")
    raise SystemExit(1 if failures else 0)


if __name__ == "__main__":
    main()
