"""Default architectures and training settings for the bundled datasets.

These are the configurations the CLI, demos and tests reach for. The law
school net reports 941 parameters; the diabetes net is trained as a
regularized logistic-style classifier so its probability surface stays
smooth enough for sparse counterfactuals.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import AdamConfig, TrainConfig


@dataclass
class TrainingProfile:
    layer_dims: tuple[int, ...]
    hidden_activation: str
    output_head: str
    config: TrainConfig
    default_target: float  # the what-if question each experiment asks


def training_profile(name: str, seed: int = 0) -> TrainingProfile:
    if name == "lsat":
        return TrainingProfile(
            layer_dims=(3, 20, 20, 20, 1),
            hidden_activation="tanh",
            output_head="linear_score",
            config=TrainConfig(
                loss="squared_error", regularizer_weight=1e-4, epochs=400,
                adam=AdamConfig(step_size=0.01), rng_seed=seed,
            ),
            default_target=0.0,
        )
    if name == "pima":
        return TrainingProfile(
            layer_dims=(8, 20, 20, 1),
            hidden_activation="tanh",
            output_head="sigmoid_probability",
            config=TrainConfig(
                loss="binary_cross_entropy", regularizer_weight=3e-3, epochs=300,
                adam=AdamConfig(step_size=0.01), rng_seed=seed,
            ),
            default_target=0.5,
        )
    if name == "xor":
        return TrainingProfile(
            layer_dims=(2, 8, 1),
            hidden_activation="tanh",
            output_head="sigmoid_probability",
            config=TrainConfig(
                loss="squared_error", regularizer_weight=1e-4, epochs=2000,
                adam=AdamConfig(step_size=0.05), rng_seed=seed,
            ),
            default_target=0.5,
        )
    if name == "two_moons_like":
        return TrainingProfile(
            layer_dims=(2, 16, 1),
            hidden_activation="tanh",
            output_head="sigmoid_probability",
            config=TrainConfig(
                loss="binary_cross_entropy", regularizer_weight=1e-3, epochs=500,
                adam=AdamConfig(step_size=0.01), rng_seed=seed,
            ),
            default_target=0.5,
        )
    raise ValueError(f"no training profile for {name!r}")
