"""Session-scoped trained checkpoints shared by the appshell and acceptance tests.

Training budgets are desk-scale on purpose: the full suite must run on a
laptop CPU in minutes. Configs live here so every consumer sees the same
bundle.
"""

import numpy as np
import pytest

from diffdesign.appshell import runs
from diffdesign.appshell.bundles import load_bundle

SYNTH16_CONFIG = {
    "seed": 0,
    "T": 200,
    "train_rows": 2000,
    "width": 128,
    "blocks": 2,
    "embed_dim": 128,
    "epochs": 300,
    "batch_size": 128,
    "lr": 1e-3,
    "lr_final": 5e-5,
    "guidance_epochs": 200,
    "predictor_width": 128,
}

AIRFOIL_CONFIG = {
    "seed": 0,
    "T": 200,
    "train_rows": 2000,
    "width": 160,
    "blocks": 2,
    "embed_dim": 128,
    "epochs": 400,
    "batch_size": 128,
    "lr": 1e-3,
    "lr_final": 3e-5,
    "guidance_epochs": 150,
    "predictor_width": 96,
}


@pytest.fixture(scope="session")
def synth16_bundle_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("ckpt") / "synth16"
    runs.run_train({"problem": "synthetic-16", "config": SYNTH16_CONFIG}, str(out))
    return str(out)


@pytest.fixture(scope="session")
def synth16_bundle(synth16_bundle_dir):
    return load_bundle(synth16_bundle_dir)


@pytest.fixture(scope="session")
def airfoil_bundle_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("ckpt") / "airfoil"
    runs.run_train({"problem": "synthetic-airfoil", "config": AIRFOIL_CONFIG}, str(out))
    return str(out)


@pytest.fixture(scope="session")
def airfoil_bundle(airfoil_bundle_dir):
    return load_bundle(airfoil_bundle_dir)


@pytest.fixture(scope="session")
def mixture_data():
    rng = np.random.default_rng(0)
    n = 2000
    comp = rng.integers(0, 2, n)
    means = np.array([[-2.0, 0.0], [2.0, 1.0]])
    x = means[comp] + rng.standard_normal((n, 2)) * 0.4
    return x, means


@pytest.fixture(scope="session")
def mixture_model(mixture_data):
    from diffdesign import diffusion as df

    x, _ = mixture_data
    model = df.build_model(2, ("target",), schedule=df.default_schedule(),
                           width=128, blocks=2, embed_dim=64, seed=0)
    df.train(model, x, np.zeros((x.shape[0], 1)),
             df.TrainConfig(epochs=600, batch_size=128, lr=1e-3, lr_final=5e-5, seed=0))
    return model
