"""Builders for the architectures analysed in the experiments, plus the
published ImageNet accuracy manifest."""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Sequence

from .graph_ir import (
    Activation, Add, BatchNorm, Conv2D, Dense, Dropout, Flatten, GlobalPool,
    GraphBuilder, Identity, NetworkGraph, Pool2D,
)

RESNET_DEPTHS = (18, 34, 50, 101, 152)
VGG_VARIANTS = (11, 13, 16, 19)

_RESNET_LAYOUT = {
    18: ("basic", (2, 2, 2, 2)),
    34: ("basic", (3, 4, 6, 3)),
    50: ("bottleneck", (3, 4, 6, 3)),
    101: ("bottleneck", (3, 4, 23, 3)),
    152: ("bottleneck", (3, 8, 36, 3)),
}

_VGG_CFG = {
    11: (64, "M", 128, "M", 256, 256, "M", 512, 512, "M", 512, 512, "M"),
    13: (64, 64, "M", 128, 128, "M", 256, 256, "M", 512, 512, "M", 512, 512, "M"),
    16: (64, 64, "M", 128, 128, "M", 256, 256, 256, "M", 512, 512, 512, "M", 512, 512, 512, "M"),
    19: (64, 64, "M", 128, 128, "M", 256, 256, 256, 256, "M", 512, 512, 512, 512, "M",
         512, 512, 512, 512, "M"),
}

IMAGENET_SHAPE = (224, 224, 3)


def build_mlp(layer_widths: Sequence[int], activation: str = "relu", name: str | None = None) -> NetworkGraph:
    """Input -> (Dense, Activation)* -> Dense.  The last layer has no activation."""
    widths = list(layer_widths)
    if len(widths) < 2:
        raise ValueError("an MLP needs at least two widths")
    b = GraphBuilder(name or "mlp-" + "-".join(map(str, widths)), (widths[0],))
    for i, w in enumerate(widths[1:], start=1):
        b.add(Dense(w), id=f"dense_{i}")
        if i < len(widths) - 1:
            b.add(Activation(activation), id=f"act_{i}")
    return b.build()


def build_autoencoder(widths: Sequence[int], name: str | None = None) -> NetworkGraph:
    widths = list(widths)
    if len(widths) < 2:
        raise ValueError("an autoencoder needs at least two widths")
    if widths != widths[::-1]:
        raise ValueError(f"autoencoder widths must be palindromic, got {widths}")
    b = GraphBuilder(name or "autoencoder-" + "-".join(map(str, widths)), (widths[0],))
    for i, w in enumerate(widths[1:], start=1):
        b.add(Dense(w), id=f"dense_{i}")
        b.add(Activation("linear"), id=f"act_{i}")
    return b.build()


def build_vgg(variant: int) -> NetworkGraph:
    if variant not in _VGG_CFG:
        raise ValueError(f"VGG variant must be one of {VGG_VARIANTS}, got {variant}")
    b = GraphBuilder(f"vgg{variant}", IMAGENET_SHAPE)
    block, idx = 1, 1
    for item in _VGG_CFG[variant]:
        if item == "M":
            b.add(Pool2D("max", 2, 2, stride=2), id=f"pool{block}")
            block, idx = block + 1, 1
        else:
            b.add(Conv2D(3, 3, item, padding="same"), id=f"conv{block}_{idx}")
            b.add(Activation("relu"), id=f"relu{block}_{idx}")
            idx += 1
    b.add(Flatten(), id="flatten")
    for i in (1, 2):
        b.add(Dense(4096), id=f"fc{i}")
        b.add(Activation("relu"), id=f"fc{i}_relu")
        b.add(Dropout(0.5), id=f"fc{i}_dropout")
    b.add(Dense(1000), id="fc3")
    b.add(Activation("softmax"), id="softmax")
    return b.build()


def _conv_bn(b, prefix, kernel, filters, stride=1, inputs=None):
    pad = "valid" if kernel == 1 else "same"
    b.add(Conv2D(kernel, kernel, filters, stride=stride, padding=pad, bias=False),
          inputs=inputs, id=f"{prefix}_conv")
    return b.add(BatchNorm(), id=f"{prefix}_bn")


def _stem(b):
    b.add(Conv2D(7, 7, 64, stride=2, padding=(3, 3), bias=False), id="stem_conv")
    b.add(BatchNorm(), id="stem_bn")
    b.add(Activation("relu"), id="stem_relu")
    b.add(Pool2D("max", 3, 3, stride=2, padding=(1, 1)), id="stem_pool")


def _head(b):
    b.add(GlobalPool("avg"), id="gap")
    b.add(Dense(1000), id="fc")
    b.add(Activation("softmax"), id="softmax")


def _residual_net(depth: int, shortcuts: bool) -> NetworkGraph:
    if depth not in _RESNET_LAYOUT:
        raise ValueError(f"depth must be one of {RESNET_DEPTHS}, got {depth}")
    block_type, counts = _RESNET_LAYOUT[depth]
    expansion = 4 if block_type == "bottleneck" else 1
    b = GraphBuilder(f"{'resnet' if shortcuts else 'plainnet'}{depth}", IMAGENET_SHAPE)
    _stem(b)
    channels = 64
    for stage, (n_blocks, width) in enumerate(zip(counts, (64, 128, 256, 512)), start=1):
        for blk in range(1, n_blocks + 1):
            stride = 2 if (stage > 1 and blk == 1) else 1
            p = f"s{stage}b{blk}"
            block_in = b.last
            if block_type == "basic":
                _conv_bn(b, f"{p}_1", 3, width, stride)
                b.add(Activation("relu"), id=f"{p}_1_relu")
                branch = _conv_bn(b, f"{p}_2", 3, width)
            else:
                _conv_bn(b, f"{p}_1", 1, width)
                b.add(Activation("relu"), id=f"{p}_1_relu")
                _conv_bn(b, f"{p}_2", 3, width, stride)
                b.add(Activation("relu"), id=f"{p}_2_relu")
                branch = _conv_bn(b, f"{p}_3", 1, width * expansion)
            out_channels = width * expansion
            if shortcuts:
                if stride != 1 or channels != out_channels:
                    short = _conv_bn(b, f"{p}_down", 1, out_channels, stride, inputs=block_in)
                else:
                    short = b.add(Identity(), inputs=block_in, id=f"{p}_shortcut")
                b.add(Add(), inputs=(branch, short), id=f"{p}_add")
            b.add(Activation("relu"), id=f"{p}_relu")
            channels = out_channels
    _head(b)
    return b.build()


def build_resnet(depth: int) -> NetworkGraph:
    return _residual_net(depth, shortcuts=True)


def build_plainnet(depth: int) -> NetworkGraph:
    """ResNet with every shortcut branch and merge removed (a pure chain)."""
    return _residual_net(depth, shortcuts=False)


DEFAULT_AUTOENCODER = (64, 32, 16, 8, 16, 32, 64)


def zoo_names() -> list[str]:
    return (
        [f"resnet{d}" for d in RESNET_DEPTHS]
        + [f"plainnet{d}" for d in RESNET_DEPTHS]
        + [f"vgg{v}" for v in VGG_VARIANTS]
        + ["autoencoder", "mlp"]
    )


def build(name: str) -> NetworkGraph:
    """Build a zoo model by short name, e.g. ``resnet50`` or ``vgg16``."""
    key = name.lower().replace(" ", "").replace("-", "")
    m = re.fullmatch(r"(resnet|plainnet|vgg)(\d+)", key)
    if m:
        family, n = m.group(1), int(m.group(2))
        builder = {"resnet": build_resnet, "plainnet": build_plainnet, "vgg": build_vgg}[family]
        return builder(n)
    if key == "autoencoder":
        return build_autoencoder(DEFAULT_AUTOENCODER)
    if key == "mlp":
        return build_mlp([784, 128, 10], "relu")
    raise KeyError(f"unknown model {name!r}; known: {', '.join(zoo_names())}")


# --- accuracy manifest -----------------------------------------------------

SOURCES = ("table1", "table2", "table3")


@dataclass(frozen=True)
class ModelRecord:
    name: str
    family: str
    top1: float | None
    top5: float | None
    params: int | None
    source: str

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        for v in (self.top1, self.top5):
            if v is not None and not 0 <= v <= 100:
                raise ValueError(f"{self.name}: accuracy out of range: {v}")
        if self.top1 is not None and self.top5 is not None and self.top1 > self.top5:
            raise ValueError(f"{self.name}: top1 exceeds top5")

    @property
    def zoo_key(self) -> str:
        return self.name.lower().replace(" ", "")


def _opt_float(s: str) -> float | None:
    s = s.strip()
    if s in ("", "NA", "NaN"):
        return None
    v = float(s)
    return None if math.isnan(v) else v


def parse_manifest(text: str) -> list[ModelRecord]:
    reader = csv.DictReader(io.StringIO(text))
    expected = ["model", "family", "source", "top1", "top5", "params"]
    if reader.fieldnames != expected:
        raise ValueError(f"manifest header must be {expected}, got {reader.fieldnames}")
    out = []
    for row in reader:
        params = row["params"].strip()
        out.append(ModelRecord(
            name=row["model"],
            family=row["family"],
            top1=_opt_float(row["top1"]),
            top5=_opt_float(row["top5"]),
            params=int(params) if params else None,
            source=row["source"],
        ))
    return out


@lru_cache(maxsize=1)
def _manifest() -> tuple[ModelRecord, ...]:
    text = resources.files("layeralg").joinpath("data/manifest.csv").read_text(encoding="utf-8")
    return tuple(parse_manifest(text))


def load_manifest() -> list[ModelRecord]:
    return list(_manifest())


def find_record(name: str, source: str = "table1") -> ModelRecord:
    for rec in _manifest():
        if rec.name == name and rec.source == source:
            return rec
    raise KeyError(f"no manifest record {name!r} in {source}")


def built_family_records(metric: str = "top1") -> list[tuple[ModelRecord, str]]:
    """Manifest rows that have a zoo builder reproducing their exact parameter
    count, paired with the zoo name.  Rows lacking ``metric`` are skipped."""
    from .local_metrics import count_params

    counts: dict[str, int] = {}
    out = []
    for rec in _manifest():
        key = rec.zoo_key
        if not re.fullmatch(r"(resnet|vgg)\d+", key) or getattr(rec, metric) is None:
            continue
        if key not in counts:
            try:
                counts[key] = count_params(build(key))
            except (KeyError, ValueError):
                continue
        if rec.params == counts[key]:
            out.append((rec, key))
    return out
