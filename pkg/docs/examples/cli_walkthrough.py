"""Drive the ``rmc`` command line from Python.

Writes a noisy rank-3 matrix with a few gross errors to a MatrixMarket
file, completes it with ``rmc solve``, then runs a one-point SNR sweep.
Shell equivalents are printed as the script goes.

Run:  python docs/examples/cli_walkthrough.py [workdir]
"""

import json
import shlex
import sys
import tempfile
from pathlib import Path

import numpy as np

from rmc import ObservedMatrix, cli, mmio

work = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="rmc-demo-"))
work.mkdir(parents=True, exist_ok=True)

rng = np.random.default_rng(3)
X = rng.standard_normal((150, 3)) @ rng.standard_normal((3, 100))
mask = rng.random(X.shape) < 0.5
Y = X + 0.01 * rng.standard_normal(X.shape)
bad = rng.random(X.shape) < 0.03
Y[bad] += rng.choice([-1, 1], bad.sum()) * 20.0
src = work / "observed.mtx"
mmio.write_observed(src, ObservedMatrix.from_dense(Y, mask))


def run(args):
    print("$ rmc " + shlex.join(args))
    code = cli.main(args)
    print(f"(exit {code})\n")
    return code


run(["solve", str(src), "--rank", "3", "--loss", "how", "--dense", "--out", str(work / "solve")])
M = np.loadtxt(work / "solve" / "completion.txt")
print(f"RMSE against the clean matrix: {np.sqrt(np.mean((M - X) ** 2)):.4f}")
# On much smaller problems (say 40 x 30 at rank 2) the random start can stall
# in a poor local minimum when gross errors are this large; trying another
# --seed is the cheap remedy.
report = json.loads((work / "solve" / "report.json").read_text())
print(f"knot schedule (first five): {[round(c, 4) for c in report['c_history'][:5]]}\n")

run(["sweep-snr", "--snr-grid", "10", "--m", "60", "--n", "40", "--rank", "2",
     "--trials", "2", "--out", str(work / "sweep")])
print((work / "sweep" / "summary.csv").read_text())
print(f"outputs are under {work}")
