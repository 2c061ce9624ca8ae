"""Plot an F(x) grid written by `quartz equilibrium --x-min ... --x-max ...`."""
import sys

import matplotlib.pyplot as plt
import pandas as pd

df = pd.read_csv(sys.argv[1], comment="#")
fig, ax = plt.subplots()
ax.semilogx(df["x"], df["value"])
ax.set_xlabel("x")
ax.set_ylabel("F(x)")
fig.savefig(sys.argv[2] if len(sys.argv) > 2 else "grid.png", dpi=150)
