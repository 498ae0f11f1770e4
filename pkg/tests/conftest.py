import pytest

from src.data.corpus import Vocabulary
from src.utils.config import build_config
from tests.helpers import SMOKE, random_dataset, restored_logging, tiny_discriminator, tiny_generator


@pytest.fixture(autouse=True)
def restore_root_logger():
    with restored_logging():
        yield


@pytest.fixture
def gen():
    return tiny_generator()


@pytest.fixture
def disc():
    return tiny_discriminator()


@pytest.fixture
def dataset():
    return random_dataset()


@pytest.fixture
def vocab():
    return Vocabulary.numbered(4)


@pytest.fixture
def smoke_values(tmp_path):
    return dict(SMOKE, run_dir=str(tmp_path / "run"))


@pytest.fixture
def smoke_cfg(smoke_values):
    return build_config(smoke_values)
