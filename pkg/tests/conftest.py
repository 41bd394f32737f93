import pytest

from seivote.classifier import save_model, train_softmax
from seivote.config import settings_from_mapping
from seivote.experiments import build_dataset, load_split


@pytest.fixture(scope="session")
def desk_settings():
    return settings_from_mapping({})


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory, desk_settings):
    """Desk-scale dataset built once and shared across the suite."""
    out = tmp_path_factory.mktemp("dataset")
    build_dataset(desk_settings.manifest(), out)
    return out


@pytest.fixture(scope="session")
def trained(dataset_dir, desk_settings):
    train_set, _ = load_split(dataset_dir, "train")
    val_set, _ = load_split(dataset_dir, "val")
    model, history = train_softmax(train_set, val_set, desk_settings.training)
    return model, history


@pytest.fixture(scope="session")
def model_path(tmp_path_factory, trained):
    model, _ = trained
    path = tmp_path_factory.mktemp("model") / "model.bin"
    save_model(model, path)
    return path
