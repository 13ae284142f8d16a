"""Loss on the plane through two modes and a trained bend, printed as a
coarse text heat map (darker characters mean higher loss).

Run:  python3 demos/loss_plane.py
"""
import numpy as np

from modeconn import nn
from modeconn.data import gen_synthetic
from modeconn.evaluation import plane_grid
from modeconn.experiments import connect
from modeconn.training import train_model

train = gen_synthetic("two_spirals", 2000, 0.05, seed=1)
config = nn.MLPConfig((2, 32, 32, 2), l2_coeff=1e-4)
w_a, _ = train_model(config, train, 100, 0.05, 64, seed=11)
w_b, _ = train_model(config, train, 100, 0.05, 64, seed=12)
curve, _ = connect(w_a, w_b, config, train, "polychain", 1, iterations=3000)

grid = plane_grid(w_a, w_b, curve.bends[0], config, train, resolution=31, margin=0.25)
shades = " .:-=+*#%@"
levels = np.log10(np.clip(grid.loss, 1e-3, None))
levels = (levels - levels.min()) / np.ptp(levels)
marks = {tuple(np.round(a, 6)): c for a, c in zip(grid.anchors, "ABT")}
cells = {}
for x, y in grid.anchors:
    i = int(np.argmin(np.abs(grid.xs - x)))
    j = int(np.argmin(np.abs(grid.ys - y)))
    cells[(j, i)] = marks[(round(x, 6), round(y, 6))]
for j in range(len(grid.ys) - 1, -1, -1):
    row = "".join(cells.get((j, i), shades[min(int(v * 10), 9)])
                  for i, v in enumerate(levels[j]))
    print(row)
print("\nA, B: trained models   T: bend   (log-scale loss)")
print(f"loss range on the plane: {grid.loss.min():.4f} .. {grid.loss.max():.2f}")
