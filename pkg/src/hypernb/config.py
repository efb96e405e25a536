"""Model config files: canonical JSON with bit-exact round-trip.

Schema:
    {
      "r": 2,
      "pi": [0.5, 0.5],
      "layers": [
        {"q": 2, "two_param": {"a": 3.0, "b": 1.0}},
        {"q": 4, "tensor": {"4,0": 11.0, "3,1": 3.0, ...}}
      ],
      "weights": [0.5, 0.25]
    }

A layer carries either explicit composition entries (keys are comma-joined
count vectors over the r communities) or a two-parameter shorthand.
Serialization is canonical (sorted keys, fixed separators, shortest float
repr), so serialize -> parse -> serialize is the identity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .model import (
    LayerParams,
    ModelParams,
    SymTensor,
    layer_from_tensor,
    tensor_two_param,
)

__all__ = ["LayerSpec", "ModelConfig", "parse_config", "serialize_config",
           "load_config", "save_config", "config_to_params"]


@dataclass(frozen=True)
class LayerSpec:
    q: int
    entries: dict | None = None          # composition-key strings -> probability
    two_param: tuple[float, float] | None = None

    def tensor(self, r: int) -> SymTensor:
        if (self.entries is None) == (self.two_param is None):
            raise InputError("layer needs exactly one of `tensor` or `two_param`")
        if self.two_param is not None:
            return tensor_two_param(r, self.q, *self.two_param)
        parsed = {}
        for key, value in self.entries.items():
            comp = tuple(int(c) for c in key.split(","))
            parsed[comp] = float(value)
        return SymTensor(q=self.q, r=r, entries=parsed)


@dataclass(frozen=True)
class ModelConfig:
    r: int
    pi: tuple[float, ...]
    layers: tuple[LayerSpec, ...]
    weights: tuple[float, ...]


def parse_config(text: str) -> ModelConfig:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"config is not valid JSON: {exc}") from exc
    try:
        layers = []
        for spec in obj["layers"]:
            q = int(spec["q"])
            if "two_param" in spec:
                tp = spec["two_param"]
                layers.append(LayerSpec(q=q, two_param=(float(tp["a"]), float(tp["b"]))))
            else:
                layers.append(LayerSpec(q=q, entries=dict(spec["tensor"])))
        return ModelConfig(
            r=int(obj["r"]),
            pi=tuple(float(p) for p in obj["pi"]),
            layers=tuple(layers),
            weights=tuple(float(w) for w in obj["weights"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed config: {exc}") from exc


def serialize_config(cfg: ModelConfig) -> str:
    layers = []
    for spec in cfg.layers:
        if spec.two_param is not None:
            layers.append({"q": spec.q,
                           "two_param": {"a": spec.two_param[0], "b": spec.two_param[1]}})
        else:
            layers.append({"q": spec.q, "tensor": {k: float(v) for k, v in spec.entries.items()}})
    obj = {"r": cfg.r, "pi": list(cfg.pi), "layers": layers, "weights": list(cfg.weights)}
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def load_config(path) -> ModelConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def save_config(cfg: ModelConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_config(cfg))


def config_to_params(cfg: ModelConfig) -> ModelParams:
    pi = np.array(cfg.pi, dtype=float)
    layers: list[LayerParams] = []
    for spec in cfg.layers:
        layers.append(layer_from_tensor(spec.tensor(cfg.r), pi))
    return ModelParams(r=cfg.r, pi=pi, layers=tuple(layers),
                       weights=np.array(cfg.weights, dtype=float))
