"""Two independently trained spiral classifiers, the straight line between
them, and a trained one-bend polychain.

Run:  python3 demos/connect_two_modes.py
"""
import numpy as np

from modeconn import nn
from modeconn.curves import CurveSpec, arclength, t_grid
from modeconn.curve_train import losses_on_grid
from modeconn.data import gen_synthetic
from modeconn.experiments import connect
from modeconn.training import train_model

train = gen_synthetic("two_spirals", 2000, 0.05, seed=1)
config = nn.MLPConfig((2, 32, 32, 2), l2_coeff=1e-4)

# Two modes: same data, same recipe, different seeds.
w_a, _ = train_model(config, train, 100, 0.05, 64, seed=11)
w_b, _ = train_model(config, train, 100, 0.05, 64, seed=12)
for name, w in (("A", w_a), ("B", w_b)):
    err, _, _ = nn.predict_eval(w, config, train.X, train.y)
    print(f"model {name}: train error {err:.4f}, |w| = {np.linalg.norm(w):.2f}")
print(f"distance between modes: {np.linalg.norm(w_a - w_b):.2f}")

ts = t_grid(121)
segment = losses_on_grid(CurveSpec("segment", w_a, w_b), config, train, ts)

# Train the bend; the endpoints stay fixed.
curve, history = connect(w_a, w_b, config, train, "polychain", 1, iterations=3000)
chain = losses_on_grid(curve, config, train, ts)

print("\n   t   segment   polychain")
for k in range(0, 121, 10):
    print(f"{ts[k]:5.2f}  {segment[k]:8.4f}  {chain[k]:9.4f}")
print(f"\nmax loss: segment {segment.max():.4f}, polychain {chain.max():.4f}")
print(f"polychain length ratio: {arclength(curve)[1]:.3f}")
print(f"curve-training loss, first/last 100 iterations: "
      f"{np.mean(history.loss[:100]):.4f} -> {np.mean(history.loss[-100:]):.4f}")
