"""Accuracy/latency evaluation sources.

Three sources exist: a deterministic synthetic accuracy surrogate (desk-scale
stand-in for proxy-task training), the device-profile latency estimator, and
an external evaluator protocol for plugging in real training/measurement.

The surrogate is shaped so that accuracy and latency both rise with MACs,
producing a genuine tradeoff with non-degenerate Pareto fronts; its bonuses
make layer diversity and 5x5 depthwise kernels pay off, mirroring the
qualitative landscape the search is meant to exploit. None of its numbers
mean anything about real datasets.

External evaluator wire protocol (newline-delimited JSON, one process per
request): the request {"protocol": 1, "arch_id": ..., "tokens": [...],
"arch": {...}} is written to the child's stdin; the child replies on stdout
with one line {"arch_id": ..., "accuracy": ..., "latency_ms"?: ...}.
A missing latency_ms means "use the profile source". Requests are
idempotent by arch_id.
"""

from __future__ import annotations

import hashlib
import json
import shlex
import subprocess
import time
from dataclasses import dataclass
from statistics import NormalDist

from .arch import NetworkArch, arch_to_json, propagate_shapes
from .cost import DeviceProfile, block_macs, estimate_latency
from .errors import EvaluatorTimeout, ExternalEvaluatorFailure, ProtocolViolation

PROTOCOL_VERSION = 1

_BONUS_CAP_LAYERS = 10  # receptive/skip bonuses stop accruing past this many layers


def arch_identifier(arch: NetworkArch) -> str:
    """Stable content hash of an arch (same arch -> same id everywhere)."""
    blob = json.dumps(arch_to_json(arch), sort_keys=True).encode()
    return "a" + hashlib.sha256(blob).hexdigest()[:12]


@dataclass(frozen=True)
class Evaluation:
    arch_id: str
    accuracy: float
    latency_ms: float
    source: str  # "surrogate" | "profile" | "external"
    wall_time_ms: float

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy {self.accuracy} outside [0, 1]")
        if not self.latency_ms > 0:
            raise ValueError(f"latency {self.latency_ms} must be > 0")


@dataclass(frozen=True)
class SurrogateConfig:
    capacity_half_point: float = 2.0e8  # MACs at which the base curve hits 0.5
    receptive_bonus: float = 0.01      # per 5x5 depthwise-style layer, capped
    diversity_bonus: float = 0.02      # per extra distinct block layer type
    skip_bonus: float = 0.005          # per layer carrying a legal skip, capped
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if min(self.receptive_bonus, self.diversity_bonus,
               self.skip_bonus, self.noise_std) < 0:
            raise ValueError("bonuses and noise_std must be >= 0")
        if self.capacity_half_point <= 0:
            raise ValueError("capacity_half_point must be > 0")


def _seeded_noise(arch: NetworkArch, cfg: SurrogateConfig) -> float:
    """Counter-free pseudo-noise: a hash of (seed, arch) mapped through the
    normal inverse CDF, so evaluation order can never change results."""
    if cfg.noise_std == 0.0:
        return 0.0
    blob = json.dumps(arch_to_json(arch), sort_keys=True)
    digest = hashlib.sha256(f"{cfg.seed}|{blob}".encode()).digest()
    u = int.from_bytes(digest[:8], "big") / 2.0 ** 64
    u = min(max(u, 1e-12), 1.0 - 1e-12)
    return cfg.noise_std * NormalDist().inv_cdf(u)


def surrogate_accuracy(arch: NetworkArch, cfg: SurrogateConfig) -> float:
    layers = propagate_shapes(arch)
    macs = block_macs(arch, layers)
    base = macs / (macs + cfg.capacity_half_point)

    wide_kernel_layers = sum(
        1 for rl in layers
        if rl.spec.kernel == 5 and rl.spec.conv_op != "conv")
    skip_layers = sum(1 for rl in layers if rl.effective_skip != "none")
    distinct_types = len({(b.layer.conv_op, b.layer.kernel) for b in arch.block_specs})

    acc = base
    acc += cfg.receptive_bonus * min(wide_kernel_layers, _BONUS_CAP_LAYERS)
    acc += cfg.diversity_bonus * (distinct_types - 1)
    acc += cfg.skip_bonus * min(skip_layers, _BONUS_CAP_LAYERS)
    acc += _seeded_noise(arch, cfg)
    return min(max(acc, 0.0), 1.0)


class SurrogateAccuracy:
    """Accuracy source backed by the synthetic surrogate."""

    def __init__(self, cfg: SurrogateConfig | None = None):
        self.cfg = cfg or SurrogateConfig()

    def __call__(self, arch: NetworkArch) -> float:
        return surrogate_accuracy(arch, self.cfg)


class ProfileLatency:
    """Latency source backed by a device profile."""

    def __init__(self, profile: DeviceProfile):
        self.profile = profile

    def __call__(self, arch: NetworkArch) -> float:
        return estimate_latency(arch, self.profile).total_latency_ms


class ExternalEvaluator:
    """Runs one child process per request and parses its single-line reply."""

    def __init__(self, cmd: str, timeout_s: float = 3600.0):
        self.argv = shlex.split(cmd)
        self.timeout_s = timeout_s

    def __call__(self, arch: NetworkArch, arch_id: str,
                 tokens: tuple[int, ...] | None) -> tuple[float, float | None]:
        request = {
            "protocol": PROTOCOL_VERSION,
            "arch_id": arch_id,
            "tokens": list(tokens) if tokens is not None else None,
            "arch": arch_to_json(arch),
        }
        try:
            proc = subprocess.run(
                self.argv, input=json.dumps(request) + "\n",
                capture_output=True, text=True, timeout=self.timeout_s)
        except subprocess.TimeoutExpired:
            raise EvaluatorTimeout(
                f"evaluator exceeded {self.timeout_s}s for {arch_id}") from None
        except OSError as exc:
            raise ExternalEvaluatorFailure(f"could not launch evaluator: {exc}") from None
        if proc.returncode != 0:
            raise ExternalEvaluatorFailure(
                f"evaluator exited {proc.returncode}; stderr: {proc.stderr.strip()}")
        line = proc.stdout.strip().splitlines()
        if not line:
            raise ProtocolViolation("evaluator produced no reply line")
        try:
            reply = json.loads(line[0])
        except json.JSONDecodeError as exc:
            raise ProtocolViolation(f"malformed reply JSON: {exc}") from None
        if not isinstance(reply, dict) or reply.get("arch_id") != arch_id:
            raise ProtocolViolation(
                f"reply arch_id {reply.get('arch_id')!r} != request {arch_id!r}")
        if "accuracy" not in reply:
            raise ProtocolViolation("reply missing accuracy")
        accuracy = float(reply["accuracy"])
        latency = reply.get("latency_ms")
        return accuracy, (float(latency) if latency is not None else None)


def evaluate(arch: NetworkArch, acc_source, lat_source,
             arch_id: str | None = None,
             tokens: tuple[int, ...] | None = None) -> Evaluation:
    """Combine an accuracy source with a latency source.

    acc_source is either a pure callable(arch) -> accuracy, or an
    ExternalEvaluator, which may also supply latency; when it does not,
    lat_source fills it in.
    """
    if arch_id is None:
        arch_id = arch_identifier(arch)
    start = time.perf_counter()
    if isinstance(acc_source, ExternalEvaluator):
        accuracy, latency = acc_source(arch, arch_id, tokens)
        if latency is None:
            latency = lat_source(arch)
        source = "external"
    else:
        accuracy = acc_source(arch)
        latency = lat_source(arch)
        source = "surrogate" if isinstance(acc_source, SurrogateAccuracy) else "profile"
    wall = (time.perf_counter() - start) * 1e3
    return Evaluation(arch_id, accuracy, latency, source, wall)
