"""Train the digit-scale net dense, then with its fc layers l0-capped.

Runs on a generated dataset so it works offline; a few minutes of CPU.
The sparse run keeps 10% of the fc weights yet lands within about a
point of the dense baseline.
"""

import numpy as np

from sparsenet.datasets import subtract_mean
from sparsenet.memory import render_table, report
from sparsenet.net import build_lenet_small
from sparsenet.regularizers import RegSpec
from sparsenet.synthetic import make_synthetic_pair
from sparsenet.training import TrainConfig, evaluate_accuracy, train

train_d, test_d = make_synthetic_pair(3000, 800, shape=(1, 28, 28), noise=1.5,
                                      max_shift=2, seed=200)
train_d, test_d = subtract_mean(train_d, test_d)

cfg = TrainConfig(batch_size=32, learning_rate=0.01, momentum=0.9, lr_decay=0.5,
                  lr_step=300, max_iterations=1000, eval_interval=250, eval_max=400, seed=6)

results = {}
for regime in ("dense", "sparse"):
    net = build_lenet_small(seed=5, conv_std=0.2, fc_std=0.05)
    specs = {l.name: RegSpec(kind="l2_decay", strength=1e-4) for l in net.param_layers()}
    if regime == "sparse":
        specs["fc1"] = RegSpec(kind="l0_projection", t=40_000, period=100)
        specs["fc2"] = RegSpec(kind="l0_projection", t=500, period=100)
    print(f"\n=== {regime} ===")
    net, metrics = train(net, train_d, cfg, reg_specs=specs, test_data=test_d)
    for row in metrics.rows:
        nnz = sum(row.layer_nnz.values())
        print(f"  iter {row.iteration:5d} loss {row.loss:.3f} "
              f"train {row.train_acc:.3f} test {row.test_acc:.3f} nnz {nnz}")
    results[regime] = (net, evaluate_accuracy(net, test_d))

print("\naccuracy: dense %.4f vs sparse %.4f" % (results["dense"][1], results["sparse"][1]))
print("\nmemory (KB), sparse run:")
print(render_table(report(results["sparse"][0]), units="kb"))
