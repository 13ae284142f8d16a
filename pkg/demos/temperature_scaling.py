"""Ensembling points from the interior of a trained curve, then fitting one
temperature on held-out data.

Run:  python3 demos/temperature_scaling.py
"""
import numpy as np

from modeconn import nn
from modeconn.curves import point_at
from modeconn.data import gen_synthetic
from modeconn.evaluation import ensemble_from_logits, fit_temperature, model_logits
from modeconn.experiments import connect
from modeconn.training import train_model

train = gen_synthetic("two_spirals", 2000, 0.1, seed=1, turns=1.5)
heldout = gen_synthetic("two_spirals", 1000, 0.1, seed=3, turns=1.5, split="heldout")
test = gen_synthetic("two_spirals", 1000, 0.1, seed=2, turns=1.5, split="test")
config = nn.MLPConfig((2, 32, 32, 2), l2_coeff=1e-4)
w_a, _ = train_model(config, train, 100, 0.05, 64, seed=11)
w_b, _ = train_model(config, train, 100, 0.05, 64, seed=12)
curve, _ = connect(w_a, w_b, config, train, "bezier", 1, iterations=3000)

members = [point_at(curve, t) for t in np.linspace(0.05, 0.95, 19)]
fit = fit_temperature(model_logits(members, config, heldout.X), heldout.y)
print(f"fitted T = {fit.temperature:.3f}; held-out NLL {fit.nll_at_one:.4f} -> {fit.nll:.4f}")

logits = model_logits(members, config, test.X)
for T in (1.0, fit.temperature):
    err, nll, _ = ensemble_from_logits(logits, test.y, T)
    print(f"T={T:.3f}: test error {err:.4f}, NLL {nll:.6f}")
single, _, _ = nn.predict_eval(w_a, config, test.X, test.y)
print(f"single endpoint model: test error {single:.4f}")
