import numpy as np
import pytest

from latnas.arch import BlockChoices, BlockSpec, LayerSpec, SearchSpaceSkeleton, arch_from_specs
from latnas.skeletons import default_profile, mobile_baseline_arch, mobile_default_skeleton, tiny_skeleton


@pytest.fixture
def tiny():
    return tiny_skeleton()


@pytest.fixture
def mobile():
    return mobile_default_skeleton()


@pytest.fixture
def baseline():
    return mobile_baseline_arch()


@pytest.fixture
def profile():
    return default_profile()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def single_block_skeleton(**overrides) -> SearchSpaceSkeleton:
    block = dict(
        block_stride=1,
        conv_ops=("conv", "dconv", "mbconv6"),
        kernels=(3, 5),
        skips=("none", "id", "maxpool", "avgpool"),
        filters=(8, 16, 24),
        repeats=(1, 2, 3, 4),
    )
    name = overrides.pop("name", "one-block")
    skel = dict(input_resolution=16, stem_filters=8, num_classes=10)
    for k in list(overrides):
        if k in block:
            block[k] = overrides.pop(k)
    skel.update(overrides)
    return SearchSpaceSkeleton(name=name, blocks=(BlockChoices(**block),), **skel)


def make_arch(skeleton, *choices):
    """choices: one (conv_op, kernel, skip, filters, repeats) tuple per block."""
    specs = [
        BlockSpec(LayerSpec(op, k, skip, f), repeats=n,
                  block_stride=skeleton.blocks[i].block_stride)
        for i, (op, k, skip, f, n) in enumerate(choices)
    ]
    return arch_from_specs(skeleton, specs)
