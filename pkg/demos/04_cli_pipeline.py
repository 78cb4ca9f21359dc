#!/usr/bin/env python3
"""The same workflow through the command-line tool.

Runs synth -> train -> score -> eval in a temporary directory and shows
each command with its output.  The CLI is a thin adapter: the numbers
match the library calls bit for bit.
"""

import subprocess
import sys
import tempfile
from pathlib import Path


def run(*args):
    cmd = [sys.executable, "-m", "jbplda.cli", *map(str, args)]
    print("$ jbplda " + " ".join(map(str, args)))
    result = subprocess.run(cmd, capture_output=True, text=True)
    if result.stdout:
        print(result.stdout, end="")
    if result.returncode != 0:
        print(result.stderr, end="")
        raise SystemExit(result.returncode)
    print()


with tempfile.TemporaryDirectory() as tmp:
    base = Path(tmp)
    prefix = base / "corpus"

    run(
        "synth", "--dim", 16, "--speakers", 200, "--sessions", 5, "--seed", 7,
        "--mu-spectrum", ",".join(f"{1.8 * 0.85 ** k:.4f}" for k in range(16)),
        "--targets", 300, "--nontargets", 1500,
        "--out-prefix", prefix,
    )

    run(
        "train", "--model", "jb", "--mode", "exact", "--iters", 15,
        "--data", f"{prefix}.gvb", "--labels", f"{prefix}.labels.tsv",
        "--out", base / "jb.mdl", "--trace", base / "trace.csv",
    )
    print("convergence trace head:")
    for line in (base / "trace.csv").read_text().splitlines()[:4]:
        print("  " + line)
    print()

    run(
        "score", "--model", base / "jb.mdl", "--path", "sd",
        "--data", f"{prefix}.gvb", "--labels", f"{prefix}.labels.tsv",
        "--trials", f"{prefix}.trials.tsv", "--out", base / "scores.tsv",
    )

    run("eval", "--scores", base / "scores.tsv", "--trials", f"{prefix}.trials.tsv")
