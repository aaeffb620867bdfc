"""
The command-line workflow
=========================

Every stage is reachable through the ``ddan`` command. This script drives
it in-process: synthesize scenes, degrade one, run inference with an
barely trained checkpoint, score it, and probe the view attention.
"""

import tempfile
from pathlib import Path

from ddan.cli import main

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    main(["count-params", "--config", "canonical_5x5_x2"])
    main(["synthesize", "--out", str(tmp / "hr"), "--count", "2", "--seed", "1"])
    scene = sorted((tmp / "hr").glob("*.lfsr"))[0]
    main(["degrade", "--data", str(scene), "--scale", "2", "--out", str(tmp / "lr.lfsr")])
    main(["train", "--data", str(tmp / "hr"), "--max-steps", "2", "--batch", "1",
          "--out", str(tmp / "run")])
    main(["infer", "--ckpt", str(tmp / "run" / "model.ckpt"), "--data", str(tmp / "lr.lfsr"),
          "--out", str(tmp / "sr.lfsr")])
    main(["eval", "--ckpt", str(tmp / "run" / "model.ckpt"), "--data", str(scene), "--out", str(tmp / "eval")])
    print((tmp / "eval" / "report.csv").read_text().splitlines()[-1])
    main(["probe-attention", "--ckpt", str(tmp / "run" / "model.ckpt"), "--data", str(tmp / "lr.lfsr"),
          "--noise-view", "1,1", "--noise-var", "0.01", "--out", str(tmp / "att.csv")])
    print("\n".join((tmp / "att.csv").read_text().splitlines()[:6]))
