from types import SimpleNamespace

import pytest

from recourse import builtin, init_model, train
from recourse.bundle import ModelBundle
from recourse.profiles import training_profile


def _train_bundle(name: str, seed: int):
    ds = builtin(name)
    train_ds, eval_X, eval_y = ds.split(eval_fraction=0.2, seed=0)
    prof = training_profile(name, seed=seed)
    model0 = init_model(prof.layer_dims, prof.hidden_activation, prof.output_head,
                        seed=seed)
    Z, yz = train_ds.standardized_xy()
    model, trace = train(model0, Z, yz, prof.config)
    return SimpleNamespace(
        dataset=ds, train_ds=train_ds, eval_X=eval_X, eval_y=eval_y,
        model=model, trace=trace, profile=prof, space=train_ds.space(),
    )


@pytest.fixture(scope="session")
def lsat_bundle():
    return _train_bundle("lsat", seed=7)


@pytest.fixture(scope="session")
def pima_bundle():
    return _train_bundle("pima", seed=3)


def bundle_of(b, name: str, seed: int) -> ModelBundle:
    return ModelBundle(
        model=b.model,
        schema=b.train_ds.schema,
        standardizer=b.train_ds.standardizer,
        stats=b.train_ds.stats,
        dataset_manifest=b.train_ds.manifest,
        training_meta={
            "dataset": name, "seed": seed, "split_seed": 0, "eval_fraction": 0.2,
            "layer_dims": list(b.model.layer_dims),
        },
    )


@pytest.fixture(scope="session")
def lsat_bundle_file(lsat_bundle, tmp_path_factory):
    path = tmp_path_factory.mktemp("bundles") / "lsat_model.json"
    bundle_of(lsat_bundle, "lsat", 7).save(path)
    return path


@pytest.fixture(scope="session")
def pima_bundle_file(pima_bundle, tmp_path_factory):
    path = tmp_path_factory.mktemp("bundles") / "pima_model.json"
    bundle_of(pima_bundle, "pima", 3).save(path)
    return path
