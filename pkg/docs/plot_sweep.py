#!/usr/bin/env python3
"""Plot a gate-width sweep CSV produced by `tfqkd sweep`."""

import sys

import matplotlib.pyplot as plt
import numpy as np

path = sys.argv[1] if len(sys.argv) > 1 else "sweep.csv"
gate, sifted, qber, secret = np.loadtxt(path, delimiter=",", skiprows=1, unpack=True)

fig, ax = plt.subplots()
ax.plot(gate, sifted / 1e3, "o-", label="sifted rate")
ax.plot(gate, secret / 1e3, "s-", label="secret rate (intercept/resend estimate)")
ax.set_xlabel("gate width (ns)")
ax.set_ylabel("rate (kbit/s)")
ax.legend(loc="upper left")

ax2 = ax.twinx()
ax2.plot(gate, 100 * qber, "^--", color="tab:red", label="QBER")
ax2.set_ylabel("QBER (%)")
ax2.legend(loc="upper right")

fig.tight_layout()
plt.show()
