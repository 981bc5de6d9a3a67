"""Post-hoc magnitude thresholding vs retraining under matched l0 caps.

Trains a dense baseline with weight decay, thresholds it at increasing
cutoffs, and for each cutoff retrains a copy of the dense weights under
the per-layer nonzero distribution the threshold produced. Retraining
wins by a growing margin as the model gets sparser.
"""

import numpy as np

from sparsenet.datasets import subtract_mean
from sparsenet.net import build_cifar_quick
from sparsenet.protocols import threshold_compare
from sparsenet.regularizers import RegSpec
from sparsenet.synthetic import make_synthetic_pair
from sparsenet.training import TrainConfig, train

train_d, test_d = make_synthetic_pair(3000, 600, shape=(3, 32, 32), noise=5.0, seed=100)
train_d, test_d = subtract_mean(train_d, test_d)

net = build_cifar_quick(seed=1, conv1_std=0.16, conv_std=0.05, fc_std=0.05)
cfg = TrainConfig(batch_size=32, learning_rate=0.02, momentum=0.9, lr_decay=0.5,
                  lr_step=400, max_iterations=900, eval_interval=900, eval_max=400, seed=2)
specs = {l.name: RegSpec(kind="l2_decay", strength=1e-4) for l in net.param_layers()}
print("training the dense baseline...")
net, _ = train(net, train_d, cfg, reg_specs=specs)

magnitudes = np.concatenate([np.abs(l.weights.ravel()) for l in net.param_layers()])
grid = [0.0] + [float(np.quantile(magnitudes, q)) for q in (0.5, 0.8, 0.9)]
print("threshold grid:", [round(d, 4) for d in grid])

retrain_cfg = TrainConfig(batch_size=32, learning_rate=0.005, momentum=0.9,
                          max_iterations=500, eval_interval=500, eval_max=400, seed=3)
rows = threshold_compare(net, grid, train_d, test_d, retrain_cfg, projection_period=50)

total = net.param_count()
print(f"\n{'delta':>8} {'nnz':>8} {'nnz%':>6} {'thresholded':>12} {'retrained':>10}")
for delta, nnz, acc_t, acc_r in rows:
    print(f"{delta:>8.4f} {nnz:>8} {nnz/total:>6.1%} {acc_t:>12.4f} {acc_r:>10.4f}")
