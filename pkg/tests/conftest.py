import numpy as np
import pytest


def pytest_terminal_summary(terminalreporter):
    """One pass/fail line per acceptance criterion at the end of the run."""
    lines = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py" in nodeid and getattr(rep, "when", "") == "call":
                lines[nodeid.split("::")[-1]] = "PASS" if status == "passed" else "FAIL"
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name in sorted(lines):
            terminalreporter.write_line(f"{lines[name]}  {name}")

from inpaint_lab.data import write_synthetic_dataset, ingest_dataset
from inpaint_lab.imaging import MaskSpec
from inpaint_lab.networks import DiscriminatorSpec, GeneratorSpec
from inpaint_lab.perceptual import PerceptualSpec


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def texture_dataset_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("textures")
    write_synthetic_dataset(root, n_train=8, n_test=4, size=32, seed=7)
    return root


@pytest.fixture(scope="session")
def texture_data(texture_dataset_dir):
    spec = _texture_spec(texture_dataset_dir)
    return ingest_dataset(spec, verify=True)


def _texture_spec(root, flip_prob=0.0, max_shift=0):
    from inpaint_lab.data import DatasetSpec, load_split_file

    return DatasetSpec(
        root=str(root),
        recipe="generic",
        train_files=load_split_file(root / "train.txt"),
        test_files=load_split_file(root / "test.txt"),
        target_size=32,
        flip_prob=flip_prob,
        max_shift=max_shift,
    )


@pytest.fixture
def small_gen_spec():
    return GeneratorSpec(levels=2, encoder_channels=(8, 16), dilation_rates=(1, 2))


@pytest.fixture
def small_disc_spec():
    return DiscriminatorSpec(channels=(8, 16), input_size=32)


@pytest.fixture
def shallow_perc_spec():
    # taps that tolerate tiny inputs (stride up to 2)
    return PerceptualSpec(layer_taps=("conv1_2", "conv2_2"), layer_weights=(1.0, 1.0),
                          backbone="fixed-random", seed=3)


@pytest.fixture
def toy_mask_spec():
    return MaskSpec(min_size=8, max_size=16)


@pytest.fixture(scope="session")
def toy_checkpoint(texture_dataset_dir, tmp_path_factory):
    """A real (briefly trained) checkpoint for CLI/service tests."""
    from inpaint_lab.trainer import StageSpec, TrainConfig, run_training

    data = ingest_dataset(_texture_spec(texture_dataset_dir))
    out = tmp_path_factory.mktemp("ckpt")
    config = TrainConfig(
        stages=(StageSpec(3, ("reconstruction",)),),
        batch_size=2, seed=5, checkpoint_every=1000,
    )
    return run_training(
        config, data.train,
        GeneratorSpec(levels=2, encoder_channels=(8, 16), dilation_rates=(1, 2)),
        DiscriminatorSpec(channels=(8, 16), input_size=32),
        PerceptualSpec(layer_taps=("conv1_2",), layer_weights=(1.0,), seed=2),
        MaskSpec(8, 16), out,
    )
