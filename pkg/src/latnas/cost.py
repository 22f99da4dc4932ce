"""Analytic multiply-add / parameter counting and device-profile latency.

MAC counting convention (H', W' are post-stride output dims):
  regular conv:        H'*W'*M*N*K^2
  depthwise separable: H'*W'*M*K^2 + H'*W'*M*N
  mbconv(e):           H*W*M*(e*M)            (1x1 expand, at input res)
                       + H'*W'*(e*M)*K^2      (depthwise, stride here)
                       + H'*W'*(e*M)*N        (1x1 project)

Parameter counting (no bias, batch-norm excluded):
  regular K^2*M*N; depthwise-sep K^2*M + M*N; mbconv M*eM + K^2*eM + eM*N.

Latency per layer is affine in MACs and params with per-(op kind, kernel)
coefficients, with an optional exact lookup table taking precedence; FLOPs
alone is a poor latency proxy, so the profile lets measured numbers be
injected without any on-device tooling.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

from .arch import (
    LayerShape,
    NetworkArch,
    ResolvedLayer,
    conv_op_kind,
    mbconv_expansion,
    propagate_shapes,
)
from .errors import ProfileMiss, ShapeUnderflow

PROFILE_VERSION = 1


def layer_macs(shape: LayerShape, conv_op: str) -> int:
    h_out, w_out = shape.out_height, shape.out_width
    m, n, k = shape.channels_in, shape.channels_out, shape.kernel
    kind = conv_op_kind(conv_op)
    if kind == "conv":
        return h_out * w_out * m * n * k * k
    if kind == "dconv":
        return h_out * w_out * m * k * k + h_out * w_out * m * n
    e = mbconv_expansion(conv_op)
    mid = e * m
    expand = shape.height * shape.width * m * mid
    depthwise = h_out * w_out * mid * k * k
    project = h_out * w_out * mid * n
    return expand + depthwise + project


def layer_params(shape: LayerShape, conv_op: str) -> int:
    m, n, k = shape.channels_in, shape.channels_out, shape.kernel
    kind = conv_op_kind(conv_op)
    if kind == "conv":
        return k * k * m * n
    if kind == "dconv":
        return k * k * m + m * n
    e = mbconv_expansion(conv_op)
    mid = e * m
    return m * mid + k * k * mid + mid * n


def kernel_cost_compare(shape: LayerShape, n_out: int) -> dict:
    """Depthwise-separable cost of one 5x5 layer vs two 3x3 layers at the
    same resolution; a single 5x5 is cheaper whenever n_out > 7."""
    hwm = shape.height * shape.width * shape.channels_in
    c5 = hwm * (25 + n_out)
    c3 = hwm * (9 + n_out)
    return {"c5": c5, "c3": c3, "five_beats_two_threes": c5 < 2 * c3}


@dataclass(frozen=True)
class OpCoefficients:
    per_mac_ns: float
    per_param_ns: float
    fixed_overhead_us: float

    def __post_init__(self):
        if min(self.per_mac_ns, self.per_param_ns, self.fixed_overhead_us) < 0:
            raise ValueError("profile coefficients must be >= 0")


@dataclass(frozen=True)
class DeviceProfile:
    """Latency model. Coefficients are keyed by "kind:kernel" (e.g.
    "conv:3", "dconv:5", "mbconv:3"). lookup maps full layer descriptor
    keys to measured milliseconds and takes precedence over coefficients."""

    name: str
    coefficients: dict[str, OpCoefficients]
    lookup: dict[str, float] = field(default_factory=dict)

    def coeff_for(self, kind: str, kernel: int) -> OpCoefficients:
        try:
            return self.coefficients[f"{kind}:{kernel}"]
        except KeyError:
            raise ProfileMiss(kind, kernel) from None


def lookup_key(conv_op: str, shape: LayerShape) -> str:
    return (f"{conv_op}|k{shape.kernel}|{shape.height}x{shape.width}"
            f"|{shape.channels_in}->{shape.channels_out}|s{shape.stride}")


@dataclass(frozen=True)
class LayerCost:
    label: str
    conv_op: str
    macs: int
    params: int
    latency_ms: float


@dataclass(frozen=True)
class CostBreakdown:
    per_layer: tuple[LayerCost, ...]
    total_macs: int
    total_params: int
    total_latency_ms: float


def _coefficient_latency_ms(profile: DeviceProfile, kind: str, kernel: int,
                            macs: int, params: int) -> float:
    c = profile.coeff_for(kind, kernel)
    ns = macs * c.per_mac_ns + params * c.per_param_ns + c.fixed_overhead_us * 1e3
    return ns * 1e-6


def _layer_cost(label: str, conv_op: str, shape: LayerShape,
                profile: DeviceProfile) -> LayerCost:
    macs = layer_macs(shape, conv_op)
    params = layer_params(shape, conv_op)
    key = lookup_key(conv_op, shape)
    if key in profile.lookup:
        lat = profile.lookup[key]
    else:
        lat = _coefficient_latency_ms(profile, conv_op_kind(conv_op),
                                      shape.kernel, macs, params)
    return LayerCost(label, conv_op, macs, params, lat)


def estimate_latency(arch: NetworkArch, profile: DeviceProfile,
                     layers: list[ResolvedLayer] | None = None) -> CostBreakdown:
    """Cost of the searched layers; the fixed stem and head are excluded so
    totals depend only on the sampled choices."""
    if layers is None:
        layers = propagate_shapes(arch)
    entries: list[LayerCost] = []
    for i, rl in enumerate(layers):
        entries.append(_layer_cost(f"b{rl.block_index}.l{i}", rl.spec.conv_op,
                                   rl.shape, profile))
    return CostBreakdown(
        per_layer=tuple(entries),
        total_macs=sum(e.macs for e in entries),
        total_params=sum(e.params for e in entries),
        total_latency_ms=sum(e.latency_ms for e in entries),
    )


def block_macs(arch: NetworkArch, layers: list[ResolvedLayer] | None = None) -> int:
    """MACs of the searched layers only (stem and head excluded)."""
    if layers is None:
        layers = propagate_shapes(arch)
    return sum(layer_macs(rl.shape, rl.spec.conv_op) for rl in layers)


def round_filters(value: float) -> int:
    """Nearest multiple of 8 (half rounds up), floored at 8."""
    return max(8, int(math.floor(value / 8.0 + 0.5)) * 8)


def apply_depth_multiplier(arch: NetworkArch, d: float) -> NetworkArch:
    if d <= 0:
        raise ValueError("depth multiplier must be > 0")
    if d == 1.0:
        return arch
    new_blocks = tuple(
        replace(b, layer=replace(b.layer, filters=round_filters(d * b.layer.filters)))
        for b in arch.block_specs
    )
    return replace(arch, stem_filters=round_filters(d * arch.stem_filters),
                   block_specs=new_blocks)


def apply_input_size(arch: NetworkArch, resolution: int) -> NetworkArch:
    scaled = replace(arch, input_resolution=resolution)
    propagate_shapes(scaled)  # raises ShapeUnderflow if resolution too small
    return scaled


# ---------------------------------------------------------------------------
# JSON serialization


def profile_to_json(profile: DeviceProfile) -> dict:
    return {
        "profile_version": PROFILE_VERSION,
        "name": profile.name,
        "coefficients": {
            key: {
                "per_mac_ns": c.per_mac_ns,
                "per_param_ns": c.per_param_ns,
                "fixed_overhead_us": c.fixed_overhead_us,
            }
            for key, c in profile.coefficients.items()
        },
        "lookup": [
            {"key": k, "latency_ms": v} for k, v in sorted(profile.lookup.items())
        ],
    }


def profile_from_json(doc: dict) -> DeviceProfile:
    if doc.get("profile_version") != PROFILE_VERSION:
        raise ValueError(f"unsupported profile_version {doc.get('profile_version')}")
    return DeviceProfile(
        name=doc["name"],
        coefficients={
            key: OpCoefficients(
                per_mac_ns=float(c["per_mac_ns"]),
                per_param_ns=float(c["per_param_ns"]),
                fixed_overhead_us=float(c["fixed_overhead_us"]),
            )
            for key, c in doc["coefficients"].items()
        },
        lookup={e["key"]: float(e["latency_ms"]) for e in doc.get("lookup", [])},
    )


def load_profile(path: str) -> DeviceProfile:
    with open(path) as fh:
        return profile_from_json(json.load(fh))


def save_profile(profile: DeviceProfile, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(profile_to_json(profile), fh, indent=2)
        fh.write("\n")
