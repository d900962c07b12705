"""
Training a small constraint-masked model
========================================

Fits a 1-layer model on a few hundred oracle trajectories and watches the
composite loss terms fall. Runs in well under a minute on a laptop.
"""

import os
import tempfile

from latticepath.checkpoint import load_checkpoint, save_checkpoint
from latticepath.corpus import GenerationConfig, generate_corpus
from latticepath.lattice import desk_workspace
from latticepath.model import (
    LossConfig,
    ModelConfig,
    Optimizer,
    OptimizerConfig,
    PathModel,
    fit,
)

records = generate_corpus(
    GenerationConfig(workspace=desk_workspace(), count=400, train_fraction=0.8), seed=1
)
train = [(r.trajectory, r.context, r.workspace) for r in records if r.split_tag == "train"]
print("training on", len(train), "trajectories")

cfg = ModelConfig(embed_dim=32, num_layers=1, num_heads=2, max_seq_len=32)
model = PathModel(cfg, seed=1)
print("parameters:", sum(p.data.size for _, p in model.parameters()))

opt = Optimizer(OptimizerConfig(kind="adam", lr=3e-3))

print("%5s %8s %8s %8s %8s %8s %8s" % ("epoch", "seq", "coord", "valid", "cov", "len", "total"))
history = fit(
    model, train, LossConfig(), opt, epochs=8, batch_size=32, seed=0,
    log=lambda e, bd: print("%5d %8.4f %8.4f %8.4f %8.4f %8.4f %8.4f" % (
        e, bd.seq, bd.coord, bd.valid, bd.cov, bd.len, bd.total)),
)
assert history[-1].total < history[0].total

# checkpoints restore bit-for-bit, optimizer slots included
with tempfile.TemporaryDirectory() as d:
    path = os.path.join(d, "model.npz")
    save_checkpoint(path, model, opt, step=opt.step_count)
    loaded, opt2, step = load_checkpoint(path)
    print("checkpoint restored at step", step)
    assert all(
        (p.data == q.data).all()
        for (_, p), (_, q) in zip(model.parameters(), loaded.parameters())
    )
print("done; final seq loss %.4f" % history[-1].seq)
