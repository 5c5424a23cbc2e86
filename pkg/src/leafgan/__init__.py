"""Mask-guided unpaired image translation for leaf disease data
augmentation, with a weakly supervised attention-mask segmenter and a
downstream classifier comparison harness."""

import os

import torch

__version__ = "0.1.0"

# Reproducibility contract: identical seed and config must give bit-identical
# masks, loss curves and reports. The JIT conv backend can wobble by 1 ulp
# depending on process state, which breaks that; the native conv path is also
# faster at the small sizes this package targets. Set LEAFGAN_ONEDNN=1 to
# trade the guarantee back for JIT conv speed on large inputs.
if os.environ.get("LEAFGAN_ONEDNN", "") != "1":
    torch.backends.mkldnn.enabled = False
