"""Rescaling a ReLU network layer by layer changes its weights but not its
predictions, so a path through the origin joins any two networks without
ever representing a new function.

Run:  python3 demos/rescaling_control.py
"""
import numpy as np

from modeconn import nn
from modeconn.data import gen_synthetic
from modeconn.evaluation import disagreement
from modeconn.training import train_model
from modeconn.trivial import trivial_check, trivial_path

train = gen_synthetic("two_spirals", 2000, 0.05, seed=1)
test = gen_synthetic("two_spirals", 1000, 0.05, seed=2, split="test")
config = nn.MLPConfig((2, 32, 32, 2), l2_coeff=1e-4)
w_a, _ = train_model(config, train, 100, 0.05, 64, seed=11)
w_b, _ = train_model(config, train, 100, 0.05, 64, seed=12)

rep = trivial_check(w_a, config, test.X, np.linspace(0.1, 1.0, 10), test.y)
print("t     test error   loss")
for t, e, l in zip(rep["t"], rep["error"], rep["loss"]):
    print(f"{t:.1f}   {e:.4f}       {l:.4f}")
print(f"predictions unchanged: {rep['argmax_invariant']}; "
      f"worst logit mismatch {rep['logit_ratio_error']:.2e}")

# Along w_a -> 0 -> w_b the classifier is either A or B, never something in between.
for s in (0.1, 0.4, 0.6, 0.9):
    w = trivial_path(w_a, w_b, config, s)
    print(f"s={s:.1f}: disagrees with A on {disagreement(w, w_a, config, test):.3f}, "
          f"with B on {disagreement(w, w_b, config, test):.3f}")
