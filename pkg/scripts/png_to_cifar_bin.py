"""Rebuild CIFAR-10 binary batches from the lossless PNG mirror in the tfjs-cifar10 npm package."""
import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image

src, dst = Path(sys.argv[1]), Path(sys.argv[2])
train_labels = json.loads((src / "train_lables.json").read_text())
test_labels = json.loads((src / "test_lables.json").read_text())
jobs = [(f"data_batch_{i}", train_labels[(i - 1) * 10000 : i * 10000]) for i in range(1, 6)]
jobs.append(("test_batch", test_labels))
for name, labels in jobs:
    px = np.asarray(Image.open(src / f"{name}.png").convert("RGB"), dtype=np.uint8)
    assert px.shape == (10000, 1024, 3), px.shape
    planar = px.transpose(0, 2, 1).reshape(10000, 3072)  # R plane, G plane, B plane
    rec = np.empty((10000, 3073), dtype=np.uint8)
    rec[:, 0] = np.asarray(labels, dtype=np.uint8)
    rec[:, 1:] = planar
    (dst / f"{name}.bin").write_bytes(rec.tobytes())
    print(name, np.bincount(labels, minlength=10))
