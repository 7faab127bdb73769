"""Model weight persistence: JSON header + little-endian flat binary + vocab file."""

import json
import os

import numpy as np

from cfguide.errors import ContractViolation
from cfguide.models import MicroTransformer, OneLayerToy
from cfguide.vocab import Vocabulary

DTYPE = "<f8"


def _toy_arrays(model):
    return [
        ("embedding", model.embedding),
        ("vote_matrix", model.vote_matrix),
        ("score_vector", model.score_vector),
        ("base_logits", model.base_logits),
    ]


def save_model(model, path):
    """Persist a reference model into a directory (header.json + weights.bin + vocab.txt)."""
    os.makedirs(path, exist_ok=True)
    if isinstance(model, MicroTransformer):
        kind = "micro_transformer"
        arrays = model.weight_arrays()
        extra = {
            "dim": model.dim,
            "n_layers": model.n_layers,
            "n_heads": model.n_heads,
            "seed": model.seed,
            "max_positions": model.max_positions,
        }
    elif isinstance(model, OneLayerToy):
        kind = "one_layer_toy"
        arrays = _toy_arrays(model)
        extra = {
            "dim": model.dim,
            "recency_weight": model.recency_weight,
            "logit_scale": model.logit_scale,
        }
    else:
        raise ContractViolation(f"cannot serialize model of type {type(model).__name__}")

    layout = []
    offset = 0
    with open(os.path.join(path, "weights.bin"), "wb") as fh:
        for name, arr in arrays:
            data = np.ascontiguousarray(arr, dtype=DTYPE).tobytes()
            fh.write(data)
            layout.append({"name": name, "shape": list(np.shape(arr)), "offset": offset})
            offset += len(data)
    header = {
        "kind": kind,
        "dtype": DTYPE,
        "vocab_size": model.vocab_size,
        "arrays": layout,
        **extra,
    }
    with open(os.path.join(path, "header.json"), "w", encoding="utf-8") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
    model.vocab.save(os.path.join(path, "vocab.txt"))


def load_model(path):
    with open(os.path.join(path, "header.json"), encoding="utf-8") as fh:
        header = json.load(fh)
    vocab = Vocabulary.load(os.path.join(path, "vocab.txt"))
    raw = np.fromfile(os.path.join(path, "weights.bin"), dtype=header["dtype"])
    arrays = {}
    pos = 0
    for spec in header["arrays"]:
        size = int(np.prod(spec["shape"])) if spec["shape"] else 1
        arrays[spec["name"]] = raw[pos : pos + size].reshape(spec["shape"])
        pos += size

    if header["kind"] == "micro_transformer":
        model = MicroTransformer(
            vocab,
            dim=header["dim"],
            n_layers=header["n_layers"],
            n_heads=header["n_heads"],
            seed=header["seed"],
            max_positions=header["max_positions"],
        )
        model.embedding = arrays["embedding"]
        model.positional = arrays["positional"]
        for i, layer in enumerate(model.layers):
            for key in layer:
                layer[key] = arrays[f"layer{i}.{key}"]
        model.lnf_g = arrays["lnf_g"]
        model.lnf_b = arrays["lnf_b"]
        model.w_out = arrays["w_out"]
        return model
    if header["kind"] == "one_layer_toy":
        return OneLayerToy(
            vocab,
            dim=header["dim"],
            embedding=arrays["embedding"],
            vote_matrix=arrays["vote_matrix"],
            score_vector=arrays["score_vector"],
            base_logits=arrays["base_logits"],
            recency_weight=header["recency_weight"],
            logit_scale=header["logit_scale"],
        )
    raise ContractViolation(f"unknown model kind {header['kind']!r}")
