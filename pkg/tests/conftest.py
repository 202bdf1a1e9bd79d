import sys
from pathlib import Path

import numpy as np
import pytest
import torch

sys.path.insert(0, str(Path(__file__).parent))

from hashattack.align_net import build_han  # noqa: E402
from hashattack.attack import LatentProjection  # noqa: E402
from hashattack.backend import BackendConfig, ToyBackend  # noqa: E402
from hashattack.data import DatasetConfig, generate_dataset  # noqa: E402
from hashattack.hash_model import train_hash_model  # noqa: E402
from hashattack.text import MockCaptionProvider, MockSimilarityScorer, encode_text, guide_text  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running end-to-end checks")


@pytest.fixture(scope="session")
def small_data():
    return generate_dataset(DatasetConfig(num_classes=4, images_per_class=12, queries_per_class=2, seed=3))


@pytest.fixture(scope="session")
def backend(small_data):
    return ToyBackend.fit(small_data[0], BackendConfig())


@pytest.fixture(scope="session")
def small_hash_model(small_data):
    return train_hash_model(small_data[0], 16, seed=0, epochs=3)


@pytest.fixture(scope="session")
def text_latents(small_data):
    db, q, tg = small_data
    P, S = MockCaptionProvider(4, 0), MockSimilarityScorer(4)
    lat = lambda ims: np.stack([encode_text(guide_text(P, S, im)) for im in ims])  # noqa: E731
    return lat(db), lat(q), lat([t for t, _ in tg])


@pytest.fixture(scope="session")
def reader(small_data, backend, text_latents):
    """(han, projection) pair with an untrained HAN, enough for mechanics tests."""
    han = build_han(16, seed=1)
    for p in han.parameters():
        p.requires_grad_(False)
    with torch.no_grad():
        lat = torch.stack([backend.encode_latent(im).z for im in small_data[0]]).numpy()
    return han, LatentProjection.fit(lat, text_latents[0])


def pytest_terminal_summary(terminalreporter):
    import acceptance_log

    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(acceptance_log.LINES):
            terminalreporter.write_line(acceptance_log.LINES[n])
