import numpy as np
import pytest

from leafgan.datakit import save_image


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def image_folder(tmp_path):
    """Factory writing n random RGB images into a named subfolder."""

    def _make(name: str, n: int, side: int = 16, seed: int = 0):
        folder = tmp_path / name
        gen = np.random.default_rng(seed)
        for i in range(n):
            save_image(gen.random((side, side, 3)).astype(np.float32), folder / f"img_{i:03d}.png")
        return folder

    return _make
