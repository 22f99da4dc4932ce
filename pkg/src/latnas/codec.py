"""Bijection between architectures and flat token sequences.

Slot order is fixed and block-major: for each block, in order,
(conv_op, kernel, skip_op, filters, repeats). Every slot indexes into the
skeleton's allowed set for that block, so the controller's action space is
rectangular: any in-range token sequence decodes to a valid architecture.
Skip tokens that would be illegal for the decoded shapes are remapped to
"none" at decode time instead of being rejected, so sampling never has to
retry (rejection would bias the policy gradient).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator

from .arch import (
    BlockSpec,
    LayerSpec,
    NetworkArch,
    SearchSpaceSkeleton,
    _block_skip_legal,
    arch_from_specs,
)
from .errors import InvalidArch, TokenOutOfRange

SLOTS_PER_BLOCK = 5


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[int, ...]
    slot_arities: tuple[int, ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.slot_arities):
            raise TokenOutOfRange(
                f"{len(self.tokens)} tokens for {len(self.slot_arities)} slots")
        for i, (t, a) in enumerate(zip(self.tokens, self.slot_arities)):
            if not 0 <= t < a:
                raise TokenOutOfRange(f"slot {i}: token {t} out of range [0,{a})")


def slot_arities(skeleton: SearchSpaceSkeleton) -> tuple[int, ...]:
    arities: list[int] = []
    for b in skeleton.blocks:
        arities += [len(b.conv_ops), len(b.kernels), len(b.skips),
                    len(b.filters), len(b.repeats)]
    return tuple(arities)


def encode(arch: NetworkArch, skeleton: SearchSpaceSkeleton) -> TokenSequence:
    """Raises InvalidArch if any choice is absent from its allowed set."""
    if len(arch.block_specs) != len(skeleton.blocks):
        raise InvalidArch(
            f"{len(arch.block_specs)} block specs for {len(skeleton.blocks)} blocks")
    tokens: list[int] = []
    for i, (spec, allowed) in enumerate(zip(arch.block_specs, skeleton.blocks)):
        layer = spec.layer
        for name, value, allowed_set in (
            ("conv_op", layer.conv_op, allowed.conv_ops),
            ("kernel", layer.kernel, allowed.kernels),
            ("skip_op", layer.skip_op, allowed.skips),
            ("filters", layer.filters, allowed.filters),
            ("repeats", spec.repeats, allowed.repeats),
        ):
            try:
                tokens.append(allowed_set.index(value))
            except ValueError:
                raise InvalidArch(
                    f"block {i}: {name}={value!r} not in {list(allowed_set)}") from None
    return TokenSequence(tuple(tokens), slot_arities(skeleton))


def decode(tokens: TokenSequence | list[int] | tuple[int, ...],
           skeleton: SearchSpaceSkeleton) -> NetworkArch:
    """Decode tokens to an arch; illegal skips deterministically become "none"."""
    arities = slot_arities(skeleton)
    if isinstance(tokens, TokenSequence):
        if tokens.slot_arities != arities:
            raise TokenOutOfRange("slot arities do not match skeleton")
        flat = tokens.tokens
    else:
        flat = tuple(tokens)
    if len(flat) != len(arities):
        raise TokenOutOfRange(f"expected {len(arities)} tokens, got {len(flat)}")
    for i, (t, a) in enumerate(zip(flat, arities)):
        if not 0 <= t < a:
            raise TokenOutOfRange(f"slot {i}: token {t} out of range [0,{a})")

    specs: list[BlockSpec] = []
    channels = skeleton.stem_filters
    for i, allowed in enumerate(skeleton.blocks):
        t = flat[i * SLOTS_PER_BLOCK:(i + 1) * SLOTS_PER_BLOCK]
        layer = LayerSpec(
            conv_op=allowed.conv_ops[t[0]],
            kernel=allowed.kernels[t[1]],
            skip_op=allowed.skips[t[2]],
            filters=allowed.filters[t[3]],
        )
        block = BlockSpec(layer=layer, repeats=allowed.repeats[t[4]],
                          block_stride=allowed.block_stride)
        if layer.skip_op != "none" and not _block_skip_legal(block, channels):
            block = BlockSpec(
                layer=LayerSpec(layer.conv_op, layer.kernel, "none", layer.filters),
                repeats=block.repeats, block_stride=block.block_stride)
        specs.append(block)
        channels = layer.filters
    return arch_from_specs(skeleton, specs)


def cardinality(skeleton: SearchSpaceSkeleton) -> int:
    """Number of token sequences: product of per-block sub-space sizes."""
    return math.prod(slot_arities(skeleton))


def per_block_subspace_sizes(skeleton: SearchSpaceSkeleton) -> list[int]:
    arities = slot_arities(skeleton)
    return [
        math.prod(arities[i:i + SLOTS_PER_BLOCK])
        for i in range(0, len(arities), SLOTS_PER_BLOCK)
    ]


def flat_cardinality(skeleton: SearchSpaceSkeleton, avg_layers: int) -> int:
    """Size of the per-layer (unfactorized) space the block space competes
    with: each of the avg_layers layers in every block independently draws
    from that block's full sub-space, giving prod_b S_b^avg_layers."""
    return math.prod(s ** avg_layers for s in per_block_subspace_sizes(skeleton))


def enumerate_space(skeleton: SearchSpaceSkeleton) -> Iterator[tuple[tuple[int, ...], NetworkArch]]:
    """Yield (tokens, arch) for every token sequence, in lexicographic order."""
    for combo in itertools.product(*(range(a) for a in slot_arities(skeleton))):
        yield combo, decode(combo, skeleton)
