#!/usr/bin/env python3
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
"""Convert a timm-layout ViT state dict into a facade extractor archive.

Works with the public self-supervised releases (e.g. DINO ViT-S/8,
dino_deitsmall8_pretrain.pth). Parameter names already match, so the only
work is stripping wrapper prefixes, dropping the classifier/final norm and
inferring the architecture from tensor shapes. The head count cannot be
recovered from weights and must be given (6 for ViT-S, 12 for ViT-B).

Usage:
  python3 tools/convert_vit_checkpoint.py --in dino_deitsmall8_pretrain.pth \
      --heads 6 --out vit_s8.fckpt
"""

import argparse
import hashlib
import json
import math
import struct
import sys

import numpy as np

MAGIC = b"FACADEAR"
VERSION = 1
DTYPES = {np.dtype("float32"): "f32", np.dtype("float64"): "f64",
          np.dtype("int64"): "i64", np.dtype("uint8"): "u8"}
WRAPPERS = ("teacher", "student", "model", "state_dict")
PREFIXES = ("module.", "backbone.")


def load_state_dict(path):
  import torch  # only needed for reading .pth files
  obj = torch.load(path, map_location="cpu", weights_only=True)
  for key in WRAPPERS:
    if isinstance(obj, dict) and key in obj and isinstance(obj[key], dict):
      obj = obj[key]
      break
  out = {}
  for name, t in obj.items():
    for p in PREFIXES:
      if name.startswith(p):
        name = name[len(p):]
    out[name] = t.detach().float().numpy()
  return out


def infer_config(sd, heads, ln_eps):
  proj = sd["patch_embed.proj.weight"]  # [D, 3, p, p]
  dim, patch = proj.shape[0], proj.shape[2]
  tokens = sd["pos_embed"].shape[1] - 1
  grid = int(round(math.sqrt(tokens)))
  if grid * grid != tokens:
    raise ValueError("pos_embed does not describe a square grid")
  depth = 1 + max(int(k.split(".")[1]) for k in sd if k.startswith("blocks."))
  hidden = sd["blocks.0.mlp.fc1.weight"].shape[0]
  if dim % heads:
    raise ValueError(f"embedding width {dim} is not divisible by {heads} heads")
  return {"depth": depth, "embed_dim": dim, "heads": heads, "image_size": grid * patch,
          "ln_eps": ln_eps, "mlp_ratio": hidden // dim, "patch_size": patch}


def expected_names(depth):
  names = ["cls_token", "pos_embed", "patch_embed.proj.weight", "patch_embed.proj.bias"]
  for i in range(depth):
    for sub in ("norm1", "norm2", "attn.qkv", "attn.proj", "mlp.fc1", "mlp.fc2"):
      names += [f"blocks.{i}.{sub}.weight", f"blocks.{i}.{sub}.bias"]
  return names


def serialize(meta, tensors):
  header = {"meta": meta, "tensors": []}
  payload = bytearray()
  for name in sorted(tensors):
    a = np.ascontiguousarray(tensors[name])
    header["tensors"].append({"dtype": DTYPES[a.dtype], "name": name, "nbytes": a.nbytes,
                              "offset": len(payload), "shape": list(a.shape)})
    payload += a.astype(a.dtype.newbyteorder("<")).tobytes()
  text = json.dumps(header, separators=(",", ":"), sort_keys=True).encode()
  body = MAGIC + struct.pack("<IQ", VERSION, len(text)) + text + bytes(payload)
  return body + hashlib.sha256(body).digest()


def parse(data):
  """Inverse of serialize; used by the round-trip test."""
  body, digest = data[:-32], data[-32:]
  if body[:8] != MAGIC or hashlib.sha256(body).digest() != digest:
    raise ValueError("not a facade archive")
  _, n = struct.unpack("<IQ", body[8:20])
  header = json.loads(body[20:20 + n])
  payload = body[20 + n:]
  inv = {v: k for k, v in DTYPES.items()}
  tensors = {}
  for e in header["tensors"]:
    raw = payload[e["offset"]:e["offset"] + e["nbytes"]]
    tensors[e["name"]] = np.frombuffer(raw, dtype=inv[e["dtype"]].newbyteorder("<")).reshape(e["shape"])
  return header["meta"], tensors


def convert(sd, heads, ln_eps=1e-6):
  config = infer_config(sd, heads, ln_eps)
  names = expected_names(config["depth"])
  missing = [n for n in names if n not in sd]
  if missing:
    raise ValueError("state dict is missing " + ", ".join(missing[:5]))
  tensors = {n: sd[n].astype(np.float32) for n in names}
  return serialize({"config": config, "kind": "vit-keys"}, tensors)


def main(argv=None):
  ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
  ap.add_argument("--in", dest="src", required=True, help="timm-layout .pth state dict")
  ap.add_argument("--out", required=True, help="output extractor archive")
  ap.add_argument("--heads", type=int, default=6, help="attention heads (not stored in weights)")
  ap.add_argument("--ln-eps", type=float, default=1e-6)
  args = ap.parse_args(argv)
  data = convert(load_state_dict(args.src), args.heads, args.ln_eps)
  with open(args.out, "wb") as f:
    f.write(data)
  meta, _ = parse(data)
  print(json.dumps({"out": args.out, "config": meta["config"]}))
  return 0


if __name__ == "__main__":
  sys.exit(main())
