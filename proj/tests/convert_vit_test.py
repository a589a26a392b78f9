# Copyright 2026 The facadegen Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
# ==============================================================================
"""Round trip: a fake timm ViT state dict converts and loads in facadectl."""

import os
import struct
import subprocess
import sys
import tempfile
import zlib

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "tools"))
import convert_vit_checkpoint as cv  # noqa: E402


def fake_state_dict(dim=16, depth=2, patch=4, grid=4, seed=0):
  rng = np.random.default_rng(seed)
  r = lambda *s: (rng.standard_normal(s) * 0.05).astype(np.float32)
  sd = {"module.cls_token": r(1, 1, dim), "module.pos_embed": r(1, 1 + grid * grid, dim),
        "module.patch_embed.proj.weight": r(dim, 3, patch, patch),
        "module.patch_embed.proj.bias": r(dim), "module.norm.weight": r(dim),
        "module.head.weight": r(10, dim)}
  for i in range(depth):
    p = f"module.blocks.{i}."
    sd.update({p + "norm1.weight": 1 + r(dim), p + "norm1.bias": r(dim),
               p + "norm2.weight": 1 + r(dim), p + "norm2.bias": r(dim),
               p + "attn.qkv.weight": r(3 * dim, dim), p + "attn.qkv.bias": r(3 * dim),
               p + "attn.proj.weight": r(dim, dim), p + "attn.proj.bias": r(dim),
               p + "mlp.fc1.weight": r(4 * dim, dim), p + "mlp.fc1.bias": r(4 * dim),
               p + "mlp.fc2.weight": r(dim, 4 * dim), p + "mlp.fc2.bias": r(dim)})
  return sd


def png(width, height, seed=1):
  pix = np.random.default_rng(seed).integers(0, 256, (height, width, 3), dtype=np.uint8)
  raw = b"".join(b"\x00" + row.tobytes() for row in pix)
  chunk = lambda t, d: struct.pack(">I", len(d)) + t + d + struct.pack(">I", zlib.crc32(t + d))
  return (b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)) +
          chunk(b"IDAT", zlib.compress(raw)) + chunk(b"IEND", b""))


def main():
  facadectl = sys.argv[1]
  raw = fake_state_dict()
  sd = {k.removeprefix("module."): v for k, v in raw.items()}
  data = cv.convert(sd, heads=2)
  meta, tensors = cv.parse(data)
  assert meta["kind"] == "vit-keys", meta
  assert meta["config"] == {"depth": 2, "embed_dim": 16, "heads": 2, "image_size": 16, "ln_eps": 1e-6,
                            "mlp_ratio": 4, "patch_size": 4}, meta
  assert "norm.weight" not in tensors and "head.weight" not in tensors
  for name, t in tensors.items():
    assert np.array_equal(t, sd[name]), name
  try:
    cv.convert(sd, heads=3)
    raise AssertionError("indivisible head count accepted")
  except ValueError:
    pass

  with tempfile.TemporaryDirectory() as d:
    ext = os.path.join(d, "vit.fckpt")
    with open(ext, "wb") as f:
      f.write(data)
    with open(os.path.join(d, "in.png"), "wb") as f:
      f.write(png(16, 16))
    r = subprocess.run([facadectl, "mask", "extract", "--extractor", ext, "--image",
                        os.path.join(d, "in.png"), "--out", os.path.join(d, "m.png"),
                        "--weights", "1", "0", "0", "0"], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    assert os.path.getsize(os.path.join(d, "m.sigma.f32")) == 16
    try:
      import torch
    except ImportError:
      torch = None
    if torch is not None:
      # Wrapped, prefixed checkpoint as the public releases ship it.
      pth = os.path.join(d, "fake.pth")
      torch.save({"teacher": {k: torch.from_numpy(v) for k, v in raw.items()}}, pth)
      out = os.path.join(d, "via_cli.fckpt")
      assert cv.main(["--in", pth, "--heads", "2", "--out", out]) == 0
      assert cv.parse(open(out, "rb").read())[1].keys() == tensors.keys()
  print("convert_vit round trip ok")


if __name__ == "__main__":
  main()
