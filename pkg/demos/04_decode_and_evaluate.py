"""
Decoding strategies and the evaluation report
=============================================

Greedy vs beam decoding from the same trained model, then the pooled
metric report over the held-out split.
"""

from latticepath.corpus import GenerationConfig, generate_corpus
from latticepath.decoder import DecodeConfig, decode, decode_records, validate_path
from latticepath.evaluator import evaluate_records, format_report
from latticepath.lattice import desk_workspace
from latticepath.model import LossConfig, ModelConfig, Optimizer, OptimizerConfig, PathModel, fit

records = generate_corpus(
    GenerationConfig(workspace=desk_workspace(), count=600, train_fraction=0.8), seed=9
)
train = [r for r in records if r.split_tag == "train"]
val = [r for r in records if r.split_tag == "validation"]

model = PathModel(ModelConfig(embed_dim=32, num_layers=1, num_heads=2, max_seq_len=32), seed=9)
fit(model,
    [(r.trajectory, r.context, r.workspace) for r in train],
    LossConfig(), Optimizer(OptimizerConfig(kind="adam", lr=3e-3)),
    epochs=8, batch_size=32, seed=5)

# one example, both strategies
r = val[0]
for mode, width in (("greedy", 1), ("beam", 5)):
    d = decode(model, r.trajectory.start, r.context, r.workspace,
               DecodeConfig(max_steps=32, mode=mode, beam_width=width))
    print("%-6s score=%8.3f len=%2d stop=%s" % (
        mode, d.score, len(d.trajectory), d.terminated_by))
    # legality is structural: the mask never lets an illegal move out
    assert validate_path(d.trajectory, r.workspace).valid

gold = r.trajectory.points
print("gold len=%2d  start=%s -> target=%s" % (
    len(gold), gold[0].as_tuple(), gold[-1].as_tuple()))

# full held-out evaluation
preds = decode_records(model, val, DecodeConfig(max_steps=32))
report = evaluate_records(preds, val)
print()
print(format_report(report))
