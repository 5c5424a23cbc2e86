"""History buffer of generated images for discriminator updates.

Feeding the critics a mixture of current and past fakes dampens
oscillation. Until the buffer fills, images pass through; afterwards each
incoming image either swaps with a random stored one (p = 0.5) or passes
through unchanged.
"""

import numpy as np
import torch


class ImagePool:
    def __init__(self, size: int, rng: np.random.Generator):
        self.size = size
        self.rng = rng
        self.images: list[torch.Tensor] = []

    def query(self, batch: torch.Tensor) -> torch.Tensor:
        if self.size <= 0:
            return batch
        out = []
        for image in batch:
            image = image.detach().unsqueeze(0)
            if len(self.images) < self.size:
                self.images.append(image.clone())
                out.append(image)
            elif self.rng.random() < 0.5:
                idx = int(self.rng.integers(len(self.images)))
                out.append(self.images[idx])
                self.images[idx] = image.clone()
            else:
                out.append(image)
        return torch.cat(out, dim=0)

    def state(self) -> list[torch.Tensor]:
        return [t.clone() for t in self.images]

    def load_state(self, images: list[torch.Tensor]) -> None:
        self.images = [t.clone() for t in images]
