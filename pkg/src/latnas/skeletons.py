"""Built-in skeleton and device-profile fixtures.

"mobile-default" is a 7-block mobile classifier skeleton with a best-effort
baseline arch in the spirit of searched mobile models; it is illustrative,
not a fidelity claim. "tiny" is small enough to enumerate exhaustively
(13,824 archs) and backs the search-efficacy experiments and tests.

CLI path arguments accept "builtin:<name>" for any fixture defined here.
"""

from __future__ import annotations

from .arch import (
    BlockChoices,
    BlockSpec,
    LayerSpec,
    NetworkArch,
    SearchSpaceSkeleton,
    arch_from_specs,
    load_skeleton,
)
from .cost import DeviceProfile, OpCoefficients, load_profile, round_filters

_STANDARD_CONV_OPS = ("conv", "dconv", "mbconv3", "mbconv6")
_STANDARD_SKIPS = ("none", "id", "maxpool", "avgpool")


def _filter_choices(base: int) -> tuple[int, ...]:
    return tuple(sorted({round_filters(base * s) for s in (0.75, 1.0, 1.25)}))


def mobile_default_skeleton() -> SearchSpaceSkeleton:
    base = [  # (stride, base filters)
        (1, 16), (2, 24), (2, 40), (2, 80), (1, 96), (2, 192), (1, 320),
    ]
    blocks = tuple(
        BlockChoices(
            block_stride=stride,
            conv_ops=_STANDARD_CONV_OPS,
            kernels=(3, 5),
            skips=_STANDARD_SKIPS,
            filters=_filter_choices(f),
            repeats=(1, 2, 3, 4),
        )
        for stride, f in base
    )
    return SearchSpaceSkeleton(
        name="mobile-default",
        input_resolution=224,
        stem_filters=32,
        num_classes=1000,
        blocks=blocks,
    )


def mobile_baseline_arch() -> NetworkArch:
    """Best-effort baseline model on the mobile-default skeleton."""
    skeleton = mobile_default_skeleton()
    rows = [  # (conv_op, kernel, skip, filters, repeats)
        ("dconv", 3, "none", 16, 1),
        ("mbconv3", 3, "id", 24, 3),
        ("mbconv3", 5, "id", 40, 3),
        ("mbconv6", 5, "id", 80, 3),
        ("mbconv6", 3, "id", 96, 2),
        ("mbconv6", 5, "id", 192, 4),
        ("mbconv6", 3, "none", 320, 1),
    ]
    specs = [
        BlockSpec(LayerSpec(op, k, skip, f), repeats=n,
                  block_stride=skeleton.blocks[i].block_stride)
        for i, (op, k, skip, f, n) in enumerate(rows)
    ]
    return arch_from_specs(skeleton, specs)


def tiny_skeleton() -> SearchSpaceSkeleton:
    """Exhaustively enumerable space: 24^3 = 13,824 token sequences.

    Repeats are always >= 2 so every skip choice is legal and decode never
    remaps, making enumeration injective."""
    blocks = tuple(
        BlockChoices(
            block_stride=2,
            conv_ops=("conv", "dconv", "mbconv6"),
            kernels=(3, 5),
            skips=("none", "id"),
            filters=(f,),
            repeats=(2, 3),
        )
        for f in (16, 32, 64)
    )
    return SearchSpaceSkeleton(
        name="tiny",
        input_resolution=32,
        stem_filters=8,
        num_classes=10,
        blocks=blocks,
    )


def default_profile() -> DeviceProfile:
    """Plausible single-core mobile CPU coefficients (not measurements)."""
    coeffs = {
        "conv:3": OpCoefficients(0.18, 1.0, 10.0),
        "conv:5": OpCoefficients(0.18, 1.0, 10.0),
        "dconv:3": OpCoefficients(0.25, 1.0, 10.0),
        "dconv:5": OpCoefficients(0.25, 1.0, 10.0),
        "mbconv:3": OpCoefficients(0.22, 1.0, 12.0),
        "mbconv:5": OpCoefficients(0.22, 1.0, 12.0),
    }
    return DeviceProfile(name="mobile-cpu-default", coefficients=coeffs)


_SKELETONS = {
    "mobile-default": mobile_default_skeleton,
    "tiny": tiny_skeleton,
}

_PROFILES = {
    "default": default_profile,
    "mobile-cpu-default": default_profile,
}


def get_skeleton(ref: str) -> SearchSpaceSkeleton:
    """Resolve "builtin:<name>" or a JSON file path."""
    if ref.startswith("builtin:"):
        name = ref.removeprefix("builtin:")
        try:
            return _SKELETONS[name]()
        except KeyError:
            raise ValueError(
                f"unknown builtin skeleton {name!r}; have {sorted(_SKELETONS)}") from None
    return load_skeleton(ref)


def get_profile(ref: str) -> DeviceProfile:
    if ref.startswith("builtin:"):
        name = ref.removeprefix("builtin:")
        try:
            return _PROFILES[name]()
        except KeyError:
            raise ValueError(
                f"unknown builtin profile {name!r}; have {sorted(_PROFILES)}") from None
    return load_profile(ref)
