"""Architecture IR for the factorized block search space.

A network is a fixed stem (3x3 regular conv, stride 2), a sequence of blocks,
and a classifier head (global average pool + dense). Each block repeats a
single layer spec N times; only the first repeated layer carries the block
stride, all others run at stride 1. Layers are descriptors only -- there is
no tensor math anywhere in this package.

Conv ops are named by short strings: "conv" (regular), "dconv" (depthwise
separable), "mbconvE" (mobile inverted bottleneck with expansion E, e.g.
"mbconv6"). Skip ops: "none", "id", "maxpool", "avgpool".

Downsampling uses floor division (floor(H/stride)), keeping all arithmetic
integral. A skip op other than "none" is legal for a block iff at least one
of its layers preserves shape, i.e. repeats >= 2, or the single layer has
stride 1 and equal input/output channels.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, replace

from .errors import ShapeUnderflow

SKELETON_VERSION = 1
ARCH_VERSION = 1

SKIP_OPS = ("none", "id", "maxpool", "avgpool")

_MBCONV_RE = re.compile(r"^mbconv(\d+)$")


def conv_op_kind(conv_op: str) -> str:
    """Coefficient-table kind for a conv op name: conv, dconv or mbconv."""
    if _MBCONV_RE.match(conv_op):
        return "mbconv"
    if conv_op in ("conv", "dconv"):
        return conv_op
    raise ValueError(f"unknown conv op {conv_op!r}")


def mbconv_expansion(conv_op: str) -> int | None:
    m = _MBCONV_RE.match(conv_op)
    return int(m.group(1)) if m else None


@dataclass(frozen=True)
class LayerShape:
    height: int
    width: int
    channels_in: int
    channels_out: int
    kernel: int
    stride: int

    @property
    def out_height(self) -> int:
        return self.height // self.stride

    @property
    def out_width(self) -> int:
        return self.width // self.stride

    def preserves_shape(self) -> bool:
        return self.stride == 1 and self.channels_in == self.channels_out


@dataclass(frozen=True)
class LayerSpec:
    conv_op: str
    kernel: int
    skip_op: str
    filters: int


@dataclass(frozen=True)
class BlockSpec:
    layer: LayerSpec
    repeats: int
    block_stride: int


@dataclass(frozen=True)
class BlockChoices:
    """Per-block sub search space: the allowed sets for each choice slot."""

    block_stride: int
    conv_ops: tuple[str, ...]
    kernels: tuple[int, ...]
    skips: tuple[str, ...]
    filters: tuple[int, ...]
    repeats: tuple[int, ...]


@dataclass(frozen=True)
class SearchSpaceSkeleton:
    name: str
    input_resolution: int
    stem_filters: int
    num_classes: int
    blocks: tuple[BlockChoices, ...]

    def __post_init__(self):
        if not self.blocks:
            raise ValueError("skeleton needs at least one block")
        for i, b in enumerate(self.blocks):
            for field in ("conv_ops", "kernels", "skips", "filters", "repeats"):
                if not getattr(b, field):
                    raise ValueError(f"block {i}: empty allowed set {field}")


@dataclass(frozen=True)
class ResolvedLayer:
    """One concrete layer: its spec, shape, and the skip actually applied.

    effective_skip downgrades the block's skip op to "none" on layers that
    change shape (the stride-carrying first layer, or channel changes).
    """

    spec: LayerSpec
    shape: LayerShape
    effective_skip: str
    block_index: int


@dataclass(frozen=True)
class NetworkArch:
    """A fully resolved candidate model. Immutable; operations are pure."""

    skeleton_id: str
    input_resolution: int
    stem_filters: int
    num_classes: int
    block_specs: tuple[BlockSpec, ...]


@dataclass(frozen=True)
class Violation:
    kind: str  # ChoiceOutOfRange | SkipShapeMismatch | BlockCountMismatch | ShapeUnderflow
    block_index: int
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def arch_from_specs(skeleton: SearchSpaceSkeleton,
                    block_specs: list[BlockSpec] | tuple[BlockSpec, ...]) -> NetworkArch:
    return NetworkArch(
        skeleton_id=skeleton.name,
        input_resolution=skeleton.input_resolution,
        stem_filters=skeleton.stem_filters,
        num_classes=skeleton.num_classes,
        block_specs=tuple(block_specs),
    )


def propagate_shapes(arch: NetworkArch) -> list[ResolvedLayer]:
    """Chain shapes through stem and blocks; floor(H/2) after stride 2.

    Raises ShapeUnderflow if any resolution reaches 0.
    """
    res = arch.input_resolution // 2  # stem stride 2
    channels = arch.stem_filters
    if res < 1:
        raise ShapeUnderflow(f"stem output resolution is {res}")
    layers: list[ResolvedLayer] = []
    for bi, block in enumerate(arch.block_specs):
        spec = block.layer
        for li in range(block.repeats):
            stride = block.block_stride if li == 0 else 1
            shape = LayerShape(res, res, channels, spec.filters,
                               kernel=spec.kernel, stride=stride)
            if shape.out_height < 1 or shape.out_width < 1:
                raise ShapeUnderflow(
                    f"block {bi} layer {li}: resolution underflow at {res}/s{stride}")
            skip = spec.skip_op if shape.preserves_shape() else "none"
            layers.append(ResolvedLayer(spec, shape, skip, bi))
            res = shape.out_height
            channels = spec.filters
    return layers


def _block_skip_legal(block: BlockSpec, channels_in: int) -> bool:
    if block.repeats >= 2:
        return True
    return block.block_stride == 1 and channels_in == block.layer.filters


def validate(arch: NetworkArch, skeleton: SearchSpaceSkeleton) -> ValidationReport:
    """Structural validation; returns every violation rather than failing."""
    out: list[Violation] = []
    if len(arch.block_specs) != len(skeleton.blocks):
        out.append(Violation("BlockCountMismatch", -1,
                             f"{len(arch.block_specs)} block specs for "
                             f"{len(skeleton.blocks)} skeleton blocks"))
        return ValidationReport(tuple(out))

    channels = arch.stem_filters
    for i, (spec, allowed) in enumerate(zip(arch.block_specs, skeleton.blocks)):
        layer = spec.layer
        checks = [
            ("conv_op", layer.conv_op, allowed.conv_ops),
            ("kernel", layer.kernel, allowed.kernels),
            ("filters", layer.filters, allowed.filters),
            ("repeats", spec.repeats, allowed.repeats),
        ]
        for name, value, allowed_set in checks:
            if value not in allowed_set:
                out.append(Violation(
                    "ChoiceOutOfRange", i,
                    f"{name}={value!r} not in allowed set {list(allowed_set)}"))
        # "none" is always an acceptable skip even if a skeleton omits it
        if layer.skip_op != "none" and layer.skip_op not in allowed.skips:
            out.append(Violation(
                "ChoiceOutOfRange", i,
                f"skip_op={layer.skip_op!r} not in allowed set {list(allowed.skips)}"))
        if spec.block_stride != allowed.block_stride:
            out.append(Violation(
                "ChoiceOutOfRange", i,
                f"block_stride={spec.block_stride} != skeleton stride "
                f"{allowed.block_stride}"))
        if layer.skip_op != "none" and not _block_skip_legal(spec, channels):
            out.append(Violation(
                "SkipShapeMismatch", i,
                f"skip {layer.skip_op!r} on a block with no shape-preserving "
                f"layer (stride {spec.block_stride}, {channels}->{layer.filters}, "
                f"x{spec.repeats})"))
        channels = layer.filters
    return ValidationReport(tuple(out))


def uniform_variant(arch: NetworkArch, layer_type: LayerSpec) -> NetworkArch:
    """Repeat a single layer type everywhere, keeping per-block repeats and
    filter counts. Skips that become illegal are downgraded to "none"."""
    new_blocks: list[BlockSpec] = []
    channels = arch.stem_filters
    for block in arch.block_specs:
        spec = LayerSpec(conv_op=layer_type.conv_op, kernel=layer_type.kernel,
                         skip_op=layer_type.skip_op, filters=block.layer.filters)
        candidate = replace(block, layer=spec)
        if spec.skip_op != "none" and not _block_skip_legal(candidate, channels):
            candidate = replace(candidate, layer=replace(spec, skip_op="none"))
        new_blocks.append(candidate)
        channels = block.layer.filters
    return replace(arch, block_specs=tuple(new_blocks))


def skeleton_problems(skeleton: SearchSpaceSkeleton) -> list[str]:
    """Sanity checks beyond the constructor (used by config loading)."""
    problems = []
    stride_product = 2 * math.prod(b.block_stride for b in skeleton.blocks)
    if skeleton.input_resolution % stride_product != 0:
        problems.append(
            f"input_resolution {skeleton.input_resolution} not divisible by "
            f"total stride {stride_product}")
    for i, b in enumerate(skeleton.blocks):
        for op in b.conv_ops:
            conv_op_kind(op)  # raises on unknown names
        for k in b.kernels:
            if k not in (3, 5):
                problems.append(f"block {i}: kernel {k} not in {{3,5}}")
        for s in b.skips:
            if s not in SKIP_OPS:
                problems.append(f"block {i}: unknown skip op {s!r}")
        if b.block_stride not in (1, 2):
            problems.append(f"block {i}: stride {b.block_stride} not in {{1,2}}")
    return problems


# ---------------------------------------------------------------------------
# JSON serialization


def skeleton_to_json(skeleton: SearchSpaceSkeleton) -> dict:
    return {
        "skeleton_version": SKELETON_VERSION,
        "name": skeleton.name,
        "input_resolution": skeleton.input_resolution,
        "stem_filters": skeleton.stem_filters,
        "num_classes": skeleton.num_classes,
        "blocks": [
            {
                "block_stride": b.block_stride,
                "conv_ops": list(b.conv_ops),
                "kernels": list(b.kernels),
                "skips": list(b.skips),
                "filters": list(b.filters),
                "repeats": list(b.repeats),
            }
            for b in skeleton.blocks
        ],
    }


def skeleton_from_json(doc: dict) -> SearchSpaceSkeleton:
    if doc.get("skeleton_version") != SKELETON_VERSION:
        raise ValueError(f"unsupported skeleton_version {doc.get('skeleton_version')}")
    blocks = tuple(
        BlockChoices(
            block_stride=int(b["block_stride"]),
            conv_ops=tuple(b["conv_ops"]),
            kernels=tuple(int(k) for k in b["kernels"]),
            skips=tuple(b["skips"]),
            filters=tuple(int(f) for f in b["filters"]),
            repeats=tuple(int(r) for r in b["repeats"]),
        )
        for b in doc["blocks"]
    )
    return SearchSpaceSkeleton(
        name=doc["name"],
        input_resolution=int(doc["input_resolution"]),
        stem_filters=int(doc["stem_filters"]),
        num_classes=int(doc["num_classes"]),
        blocks=blocks,
    )


def load_skeleton(path: str) -> SearchSpaceSkeleton:
    with open(path) as fh:
        return skeleton_from_json(json.load(fh))


def save_skeleton(skeleton: SearchSpaceSkeleton, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(skeleton_to_json(skeleton), fh, indent=2)
        fh.write("\n")


def arch_to_json(arch: NetworkArch) -> dict:
    return {
        "arch_version": ARCH_VERSION,
        "skeleton_id": arch.skeleton_id,
        "input_resolution": arch.input_resolution,
        "stem_filters": arch.stem_filters,
        "num_classes": arch.num_classes,
        "block_specs": [
            {
                "conv_op": b.layer.conv_op,
                "kernel": b.layer.kernel,
                "skip_op": b.layer.skip_op,
                "filters": b.layer.filters,
                "repeats": b.repeats,
                "block_stride": b.block_stride,
            }
            for b in arch.block_specs
        ],
    }


def arch_from_json(doc: dict) -> NetworkArch:
    return NetworkArch(
        skeleton_id=doc["skeleton_id"],
        input_resolution=int(doc["input_resolution"]),
        stem_filters=int(doc["stem_filters"]),
        num_classes=int(doc["num_classes"]),
        block_specs=tuple(
            BlockSpec(
                layer=LayerSpec(
                    conv_op=b["conv_op"],
                    kernel=int(b["kernel"]),
                    skip_op=b["skip_op"],
                    filters=int(b["filters"]),
                ),
                repeats=int(b["repeats"]),
                block_stride=int(b["block_stride"]),
            )
            for b in doc["block_specs"]
        ),
    )


def load_arch(path: str) -> NetworkArch:
    with open(path) as fh:
        return arch_from_json(json.load(fh))


def save_arch(arch: NetworkArch, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(arch_to_json(arch), fh, indent=2)
        fh.write("\n")
