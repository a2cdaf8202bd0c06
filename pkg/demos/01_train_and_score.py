"""Train the law-school grade predictor and poke at it.

The net is a small fully-connected network (941 weights for the default
architecture) trained on standardized features with a z-scored target, so a
score of 0 means "the average first-year grade".
"""

import numpy as np

from recourse import builtin, init_model, train
from recourse.profiles import training_profile

ds = builtin("lsat")
train_ds, eval_X, eval_y = ds.split(eval_fraction=0.2, seed=0)
print(f"{train_ds.n_rows} training rows, {len(eval_X)} held-out rows")
print(f"features: {train_ds.schema.names}, target: {train_ds.schema.target_name}")

prof = training_profile("lsat", seed=7)
model0 = init_model(prof.layer_dims, prof.hidden_activation, prof.output_head, seed=7)
print(f"architecture {prof.layer_dims} -> {model0.n_parameters} parameters")

Z, yz = train_ds.standardized_xy()
model, trace = train(model0, Z, yz, prof.config)
print(f"training loss: {trace[0]:.4f} (epoch 1) -> {trace[-1]:.4f} (epoch {len(trace)})")

# score a few held-out students
space = train_ds.space()
for row in eval_X[:5]:
    score = model.forward(space.to_model(row))
    gpa, lsat, race = row
    label = train_ds.schema.features[2].categories[int(race)]
    print(f"  GPA {gpa:.2f}  LSAT {lsat:4.1f}  race {label:<5} -> score {score:+.3f}")

# same seed, same data: training is bit-identical
model_b, _ = train(model0, Z, yz, prof.config)
identical = all(np.array_equal(a, b)
                for a, b in zip(model.parameters(), model_b.parameters()))
print(f"retrained with the same seed, weights identical: {identical}")
