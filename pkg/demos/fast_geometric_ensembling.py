"""Pretrain one network, then cycle the learning rate and collect a small
ensemble at every cycle's low point.

Run:  python3 demos/fast_geometric_ensembling.py
"""
import itertools

import numpy as np

from modeconn import nn
from modeconn.data import gen_synthetic
from modeconn.evaluation import disagreement, ensemble_predict
from modeconn.fge import (CyclicLRSchedule, FGERunConfig, ensemble_members, fge_run, lr_at,
                          pretrain)

train = gen_synthetic("two_spirals", 500, 0.1, seed=1, turns=1.5)
test = gen_synthetic("two_spirals", 1000, 0.1, seed=2, turns=1.5, split="test")
config = nn.MLPConfig((2, 32, 32, 2), l2_coeff=1e-4)

w_hat, _ = pretrain(config, train, 80, 0.05, 64, seed=0)
err, nll, _ = nn.predict_eval(w_hat, config, test.X, test.y)
print(f"pretrained: test error {err:.4f}, NLL {nll:.4f}")

schedule = CyclicLRSchedule(lr_high=0.05, lr_low=0.0005, cycle=26)
print("learning rate over one cycle:",
      " ".join(f"{lr_at(schedule, i):.4f}" for i in range(1, 27, 5)))

run = fge_run(w_hat, config, train, FGERunConfig(6 * 26, schedule, 64, seed=0))
print(f"collected at iterations {run.collected_at}")
print(f"distance from start at each collection: "
      f"{', '.join(f'{run.distances[i - 1]:.2f}' for i in run.collected_at)}")

members = ensemble_members(run, w_hat)
for k in range(1, len(members) + 1):
    e, l, _ = ensemble_predict(members[:k], config, test)
    print(f"ensemble of {k}: test error {e:.4f}, NLL {l:.4f}")

d = [disagreement(a, b, config, test) for a, b in itertools.combinations(run.checkpoints, 2)]
print(f"mean pairwise disagreement between checkpoints: {np.mean(d):.4f}")
