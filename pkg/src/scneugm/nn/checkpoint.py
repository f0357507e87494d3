"""JSON checkpoints: one spec descriptor and a base64 float64 payload per network."""

from __future__ import annotations

import base64
import json
import os
from pathlib import Path

import numpy as np

from .layers import DenseSpec, LstmSpec
from .params import ParamVector

NETWORK_NAMES = ("SENNI", "LSTM-enc", "SENNO", "LSTM-dec", "DECO",
                 "PCNN", "PHNN", "DHF", "EGNN")


def spec_from_description(desc: dict):
    kind = desc["kind"]
    if kind == "dense":
        return DenseSpec(tuple(desc["layer_dims"]), desc["hidden_activation"],
                         desc["output_activation"])
    if kind == "lstm":
        return LstmSpec(desc["input_dim"], desc["hidden_dim"], desc["layers"])
    raise ValueError(f"unknown network kind {kind!r}")


def encode_values(values: np.ndarray) -> str:
    return base64.b64encode(np.asarray(values, dtype="<f8").tobytes()).decode("ascii")


def decode_values(text: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(text), dtype="<f8").astype(np.float64)


def save_checkpoint(path, networks: dict, meta: dict | None = None) -> None:
    """Write ``{name: (spec, ParamVector)}``; the file appears atomically."""
    doc = {"meta": meta or {}, "networks": {}}
    for name, (spec, params) in networks.items():
        doc["networks"][name] = {"spec": spec.describe(), "size": len(params),
                                 "values": encode_values(params.values)}
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(doc, indent=1, sort_keys=True))
    os.replace(tmp, path)


def load_checkpoint(path) -> tuple[dict, dict]:
    """Returns ``({name: (spec, ParamVector)}, meta)``."""
    doc = json.loads(Path(path).read_text())
    networks = {}
    for name, entry in doc["networks"].items():
        spec = spec_from_description(entry["spec"])
        networks[name] = (spec, ParamVector(decode_values(entry["values"]), spec.layout))
    return networks, doc.get("meta", {})
