import numpy as np
import pytest

from latnas.arch import BlockChoices, SearchSpaceSkeleton, validate
from latnas.codec import (
    cardinality,
    decode,
    encode,
    enumerate_space,
    flat_cardinality,
    slot_arities,
)
from latnas.errors import InvalidArch, TokenOutOfRange

from conftest import make_arch, single_block_skeleton


def repeated_block_skeleton(n_blocks, **block_kw):
    base = dict(block_stride=1, conv_ops=("conv", "dconv", "mbconv6"),
                kernels=(3, 5), skips=("none", "id", "maxpool", "avgpool"),
                filters=(8, 16, 24), repeats=(1, 2, 3, 4))
    base.update(block_kw)
    return SearchSpaceSkeleton(
        name=f"rep{n_blocks}", input_resolution=64, stem_filters=8, num_classes=10,
        blocks=tuple(BlockChoices(**base) for _ in range(n_blocks)))


def test_first_choice_everywhere_is_all_zeros():
    sk = single_block_skeleton()
    assert slot_arities(sk) == (3, 2, 4, 3, 4)
    arch = make_arch(sk, ("conv", 3, "none", 8, 1))
    assert encode(arch, sk).tokens == (0, 0, 0, 0, 0)


def test_kernel5_token_is_index_in_allowed_list():
    sk = single_block_skeleton()
    arch = make_arch(sk, ("conv", 5, "none", 8, 1))
    tokens = encode(arch, sk).tokens
    assert tokens[1] == 1  # index of 5 in (3, 5)


def test_encode_rejects_choice_outside_allowed_set():
    sk = single_block_skeleton()
    arch = make_arch(sk, ("conv", 3, "none", 99, 1))
    with pytest.raises(InvalidArch):
        encode(arch, sk)


def test_round_trip_1000_random_valid_archs(tiny):
    rng = np.random.default_rng(42)
    arities = slot_arities(tiny)
    for _ in range(1000):
        tokens = tuple(int(rng.integers(a)) for a in arities)
        arch = decode(tokens, tiny)
        assert validate(arch, tiny).ok
        assert decode(encode(arch, tiny), tiny) == arch


def test_encode_after_decode_is_identity_on_tiny(tiny):
    # tiny has repeats >= 2 everywhere so no skip ever gets remapped
    rng = np.random.default_rng(3)
    arities = slot_arities(tiny)
    for _ in range(200):
        tokens = tuple(int(rng.integers(a)) for a in arities)
        assert encode(decode(tokens, tiny), tiny).tokens == tokens


def test_illegal_skip_remapped_to_none_at_decode():
    sk = repeated_block_skeleton(1, block_stride=2, repeats=(1,))
    id_token = sk.blocks[0].skips.index("id")
    arch = decode((0, 0, id_token, 0, 0), sk)
    assert arch.block_specs[0].layer.skip_op == "none"
    assert validate(arch, sk).ok


def test_malformed_length_raises():
    sk = single_block_skeleton()
    with pytest.raises(TokenOutOfRange):
        decode((0, 0, 0), sk)
    with pytest.raises(TokenOutOfRange):
        decode((0, 0, 0, 0, 99), sk)


def test_cardinality_power_law():
    # per-block sub-space of size 3*2*4*3*6 = 432, five blocks
    sk = repeated_block_skeleton(5, repeats=(1, 2, 3, 4, 5, 6))
    assert cardinality(sk) == 432 ** 5


def test_singleton_space_has_cardinality_one():
    sk = repeated_block_skeleton(1, conv_ops=("conv",), kernels=(3,),
                                 skips=("none",), filters=(8,), repeats=(1,))
    assert cardinality(sk) == 1


def test_factorized_space_orders_of_magnitude_smaller():
    sk = repeated_block_skeleton(5, repeats=(1, 2, 3, 4, 5, 6))
    ratio = cardinality(sk) / flat_cardinality(sk, avg_layers=3)
    assert ratio <= 1e-6


def test_enumeration_matches_cardinality_and_is_distinct():
    # two blocks of sub-space size 36 -> 1296 archs
    sk = repeated_block_skeleton(2, conv_ops=("conv", "dconv", "mbconv6"),
                                 kernels=(3, 5), skips=("none", "id", "maxpool"),
                                 filters=(16,), repeats=(2, 3))
    archs = [arch for _, arch in enumerate_space(sk)]
    assert len(archs) == cardinality(sk) == 1296
    assert len(set(archs)) == 1296
