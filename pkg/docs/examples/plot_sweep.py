"""Plot a ``summary.csv`` written by ``rmc sweep-snr`` or ``rmc sweep-fraction``.

Needs matplotlib (``pip install artifact[plot]``).

Run:  rmc sweep-snr --trials 3 --out snr
      python docs/examples/plot_sweep.py snr/summary.csv snr.png
"""

import csv
import sys
from collections import defaultdict

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:  # pragma: no cover
    sys.exit("plot_sweep.py needs matplotlib: pip install matplotlib")

if len(sys.argv) != 3:
    sys.exit(__doc__)
src, dst = sys.argv[1:]

with open(src, newline="") as fh:
    rows = list(csv.DictReader(fh))

# whichever of the two grid columns actually varies is the x axis
xkey = "snr_db" if len({r["snr_db"] for r in rows}) > 1 else "observe_fraction"
curves = defaultdict(list)
for row in rows:
    curves[row["method"]].append((float(row[xkey]), float(row["mean_rmse"])))

fig, ax = plt.subplots(figsize=(5, 3.5))
for method, pts in curves.items():
    pts.sort()
    ax.semilogy(*zip(*pts), marker="o", label=method)
ax.set_xlabel("SNR (dB)" if xkey == "snr_db" else "fraction observed")
ax.set_ylabel("mean RMSE")
ax.grid(True, which="both", alpha=0.3)
ax.legend()
fig.tight_layout()
fig.savefig(dst, dpi=150)
print(f"wrote {dst}")
