"""Compound-scaled CNN: planning, construction, training, prediction, dumps.

The architecture is a stack of conv/ReLU blocks (3x3 kernels, stride 2,
padding 1, so each block halves the grid) closed by a fixed head: global
average pooling, dropout(0.5), and a dense layer producing two logits
(index 0 = bona fide, 1 = morphed). Depth, width, and input resolution all
scale from one knob phi through per-axis coefficients.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import autodiff
from .autodiff import GradientStore, Tensor, backward, no_grad, softmax_cross_entropy
from .data import NOISE_AMPLITUDE, LabeledImage, preprocess
from .errors import (
    ArchitectureError,
    DataError,
    FormatError,
    LayerIndexError,
    PlanConstraintError,
    ResolutionMismatchError,
)
from .rng import Lcg, derive_seed

_INIT_STREAM = 0x1217
_SHUFFLE_STREAM = 0x7767
_DROPOUT_STREAM = 0xD706

DROPOUT_RATE = 0.5
KERNEL_SIZE = 3
CONV_STRIDE = 2
CONV_PADDING = 1
NUM_CLASSES = 2

# Initialization profile. First-stage kernels are contrast probes: a spatial
# pattern orthogonal to flat patches and to both linear shading ramps, so a
# unit responds to fine texture but not to smooth tone changes. The negative
# bias parks each probe _PROBE_THRESHOLD stds below its own noise response,
# which makes the rectified mean grow faster than linearly with local
# contrast. The second stage pairs zero-sum kernels with constant negative
# "absence" kernels whose positive bias fires when the stage below is quiet,
# giving the pooled features both signs of class correlation from step one.
_PROBE_GAIN = 4.0  # kernel scale relative to sqrt(2 / fan_in)
_PROBE_THRESHOLD = 1.2
_ABSENCE_RATIO = 0.5  # absence tap strength relative to _PROBE_GAIN
_ABSENCE_MARGIN = 0.8  # absence firing point as a fraction of the quiet-input drive
# E[relu(z - t)] for standard normal z at t = _PROBE_THRESHOLD.
_RECTIFIED_MEAN = math.exp(-_PROBE_THRESHOLD**2 / 2.0) / math.sqrt(2.0 * math.pi) - (
    _PROBE_THRESHOLD * 0.5 * math.erfc(_PROBE_THRESHOLD / math.sqrt(2.0))
)


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


@dataclass(frozen=True)
class ScalingPlan:
    """Resolved compound-scaling multipliers plus the base dimensions."""

    phi: float
    alpha: float
    beta: float
    gamma: float
    depth_mult: float
    width_mult: float
    resolution_mult: float
    base_depth: int
    base_width: int
    base_resolution: int


def plan_scaling(
    phi: float,
    alpha: float = 1.2,
    beta: float = 1.1,
    gamma: float = 1.15,
    base_depth: int = 2,
    base_width: int = 8,
    base_resolution: int = 64,
    tau: float = 0.15,
) -> ScalingPlan:
    """Derive depth/width/resolution multipliers alpha^phi, beta^phi, gamma^phi.

    The coefficients must satisfy alpha * beta^2 * gamma^2 in [2 - tau, 2 + tau]
    so one step of phi roughly doubles the model's cost.
    """
    if phi < 0:
        raise PlanConstraintError(f"phi must be >= 0, got {phi}")
    if alpha < 1 or beta < 1 or gamma < 1:
        raise PlanConstraintError(f"alpha, beta, gamma must each be >= 1, got ({alpha}, {beta}, {gamma})")
    if base_depth < 1 or base_width < 1 or base_resolution < 1:
        raise PlanConstraintError("base depth, width, and resolution must be positive")
    if tau < 0:
        raise PlanConstraintError(f"tau must be >= 0, got {tau}")
    product = alpha * beta**2 * gamma**2
    if not (2.0 - tau) <= product <= (2.0 + tau):
        raise PlanConstraintError(
            f"alpha * beta^2 * gamma^2 = {product!r} outside [{2.0 - tau!r}, {2.0 + tau!r}]"
        )
    return ScalingPlan(
        phi=float(phi),
        alpha=float(alpha),
        beta=float(beta),
        gamma=float(gamma),
        depth_mult=float(alpha) ** phi,
        width_mult=float(beta) ** phi,
        resolution_mult=float(gamma) ** phi,
        base_depth=int(base_depth),
        base_width=int(base_width),
        base_resolution=int(base_resolution),
    )


class ConvLayer:
    kind = "conv"

    def __init__(self, name: str, kernels: Tensor, bias: Tensor, stride: int, padding: int):
        self.name = name
        self.kernels = kernels
        self.bias = bias
        self.stride = stride
        self.padding = padding

    def forward(self, x: Tensor, train: bool = False, rng=None) -> Tensor:
        return autodiff.conv2d(x, self.kernels, self.bias, self.stride, self.padding)

    def parameters(self) -> list[tuple[str, Tensor]]:
        return [(f"{self.name}.kernels", self.kernels), (f"{self.name}.bias", self.bias)]

    def describe(self) -> str:
        o, c, kh, kw = self.kernels.shape
        return f"conv {o}x{c}x{kh}x{kw} stride {self.stride} pad {self.padding}"


class ReluLayer:
    kind = "relu"

    def forward(self, x: Tensor, train: bool = False, rng=None) -> Tensor:
        return autodiff.relu(x)

    def parameters(self) -> list[tuple[str, Tensor]]:
        return []

    def describe(self) -> str:
        return "relu"


class GapLayer:
    kind = "gap"

    def forward(self, x: Tensor, train: bool = False, rng=None) -> Tensor:
        return autodiff.global_average_pool(x)

    def parameters(self) -> list[tuple[str, Tensor]]:
        return []

    def describe(self) -> str:
        return "gap"


class DropoutLayer:
    kind = "dropout"

    def __init__(self, rate: float):
        self.rate = rate

    def forward(self, x: Tensor, train: bool = False, rng=None) -> Tensor:
        return autodiff.dropout(x, self.rate, "train" if train else "eval", rng)

    def parameters(self) -> list[tuple[str, Tensor]]:
        return []

    def describe(self) -> str:
        return f"dropout {self.rate!r}"


class DenseLayer:
    kind = "dense"

    def __init__(self, name: str, weights: Tensor, bias: Tensor):
        self.name = name
        self.weights = weights
        self.bias = bias

    def forward(self, x: Tensor, train: bool = False, rng=None) -> Tensor:
        return autodiff.dense(x, self.weights, self.bias)

    def parameters(self) -> list[tuple[str, Tensor]]:
        return [(f"{self.name}.weights", self.weights), (f"{self.name}.bias", self.bias)]

    def describe(self) -> str:
        f_in, f_out = self.weights.shape
        return f"dense {f_in}->{f_out}"


class CnnModel:
    """Ordered layer list with named parameters and a structure fingerprint."""

    def __init__(self, layers: list, plan: ScalingPlan | None, input_resolution: int, seed: int):
        self.layers = layers
        self.plan = plan
        self.input_resolution = input_resolution
        self.seed = seed
        description = "|".join([*(layer.describe() for layer in layers), f"input {input_resolution}"])
        self.fingerprint = hashlib.sha256(description.encode("ascii")).hexdigest()

    def parameters(self) -> list[tuple[str, Tensor]]:
        named: list[tuple[str, Tensor]] = []
        for layer in self.layers:
            named.extend(layer.parameters())
        return named

    def conv_blocks(self) -> int:
        return sum(1 for layer in self.layers if layer.kind == "conv")

    def conv_feature_index(self, block: int) -> int:
        """Activation-list index of the post-ReLU output of a conv block."""
        count = -1
        for i, layer in enumerate(self.layers):
            if layer.kind == "conv":
                count += 1
                if count == block:
                    if i + 1 < len(self.layers) and self.layers[i + 1].kind == "relu":
                        return i + 2  # activations[0] is the input
                    return i + 1
        raise LayerIndexError(f"conv block {block} does not exist (model has {count + 1})")

    def forward(self, x: Tensor, train: bool = False, rng=None) -> tuple[Tensor, list[Tensor]]:
        """Run all layers; returns (logits, activations) with activations[0] = input."""
        if not isinstance(x, Tensor):
            x = Tensor(np.asarray(x, dtype=np.float64))
        if x.data.ndim != 4:
            raise ResolutionMismatchError(f"forward input must be 4-D (batch, C, H, W), got {x.data.shape}")
        _, channels, height, width = x.shape
        if (height, width) != (self.input_resolution, self.input_resolution):
            raise ResolutionMismatchError(
                f"input is {height}x{width}, model expects {self.input_resolution}x{self.input_resolution}"
            )
        first = self.layers[0] if self.layers else None
        if first is not None and first.kind == "conv" and channels != first.kernels.shape[1]:
            raise ResolutionMismatchError(
                f"input has {channels} channels, model expects {first.kernels.shape[1]}"
            )
        activations = [x]
        current = x
        for layer in self.layers:
            current = layer.forward(current, train=train, rng=rng)
            activations.append(current)
        return current, activations

    def load_parameters(self, named: list[tuple[str, np.ndarray]]) -> None:
        own = self.parameters()
        if len(named) != len(own):
            raise FormatError(f"checkpoint has {len(named)} parameters, model expects {len(own)}")
        for (got_name, values), (want_name, tensor) in zip(named, own):
            if got_name != want_name:
                raise FormatError(f"checkpoint parameter {got_name!r} where model expects {want_name!r}")
            if values.shape != tensor.data.shape:
                raise FormatError(
                    f"checkpoint parameter {got_name!r} has shape {values.shape}, "
                    f"model expects {tensor.data.shape}"
                )
            tensor.data = values.astype(np.float64, copy=True)


def _probe_patterns(count: int, rng: Lcg) -> list[np.ndarray]:
    """Unit-norm 3x3 patterns orthogonal to the constant and both ramp patches."""
    half = (KERNEL_SIZE - 1) / 2.0
    yy, xx = np.mgrid[0:KERNEL_SIZE, 0:KERNEL_SIZE].astype(np.float64) - half
    low_order = np.stack([np.ones_like(xx), xx, yy]).reshape(3, -1)
    low_order /= np.linalg.norm(low_order, axis=1, keepdims=True)  # already mutually orthogonal
    patterns: list[np.ndarray] = []
    while len(patterns) < count:
        v = rng.normal_array((KERNEL_SIZE * KERNEL_SIZE,))
        v -= low_order.T @ (low_order @ v)
        norm = float(np.linalg.norm(v))
        if norm < 1e-9:  # draw fell inside the projected-out span, try again
            continue
        patterns.append((v / norm).reshape(KERNEL_SIZE, KERNEL_SIZE))
    return patterns


def _zero_sum_kernel(in_channels: int, rms: float, rng: Lcg) -> np.ndarray:
    while True:
        v = rng.normal_array((in_channels, KERNEL_SIZE, KERNEL_SIZE))
        v -= v.mean()
        scale = float(np.sqrt(np.mean(v * v)))
        if scale > 1e-9:
            return v * (rms / scale)


def build_model(plan: ScalingPlan, seed: int) -> CnnModel:
    """Deterministically construct and initialize the planned architecture.

    Initialization is structured, not generic noise: stage 0 gets thresholded
    contrast probes, stage 1 mixes zero-sum kernels with "absence" kernels
    (see the module constants), and deeper stages use plain zero-sum kernels.
    The dense head starts at zero, so an untrained model scores every input
    [0.5, 0.5]. All draws come from one seed-derived stream, so the same
    (plan, seed) rebuilds byte-identical parameters.
    """
    raw_resolution = _round_half_up(plan.base_resolution * plan.resolution_mult)
    resolution = 4 * _round_half_up(raw_resolution / 4.0)
    if resolution < 8:
        raise PlanConstraintError(f"scaled input resolution {resolution} is below the 8-pixel minimum")
    depth = _round_half_up(plan.base_depth * plan.depth_mult)
    widths = [_round_half_up(plan.base_width * plan.width_mult * 2**stage) for stage in range(depth)]
    rng = Lcg(derive_seed(seed, _INIT_STREAM))
    window = KERNEL_SIZE * KERNEL_SIZE
    # Per-channel std of the generator's pixel noise after the /255 preprocess.
    pixel_std = NOISE_AMPLITUDE / (255.0 * math.sqrt(3.0))
    probe_response = 0.0
    layers: list = []
    in_channels = 3
    for stage, width in enumerate(widths):
        scale = _PROBE_GAIN * math.sqrt(2.0 / (in_channels * window))
        kernels = np.zeros((width, in_channels, KERNEL_SIZE, KERNEL_SIZE))
        bias = np.zeros(width)
        if stage == 0:
            # One pattern shared by every input channel; the noise is shared
            # across channels too, so the pre-activation std has a closed form.
            spread = math.sqrt(float(in_channels))
            for f, pattern in enumerate(_probe_patterns(width, rng)):
                kernels[f] = pattern[None] * (3.0 * scale / spread)
            probe_std = 3.0 * scale * spread * pixel_std
            bias[:] = -_PROBE_THRESHOLD * probe_std
            probe_response = probe_std * _RECTIFIED_MEAN
        else:
            for f in range(width):
                kernels[f] = _zero_sum_kernel(in_channels, scale, rng)
            if stage == 1:
                strength = _ABSENCE_RATIO * _PROBE_GAIN
                for f in range(width - width // 2, width):
                    mix = np.array([rng.uniform(0.7, 1.3) for _ in range(in_channels)])
                    mix *= in_channels / mix.sum()
                    kernels[f] = (mix * (-strength / window))[:, None, None]
                    bias[f] = _ABSENCE_MARGIN * strength * in_channels * probe_response
        layers.append(
            ConvLayer(
                f"conv{stage}",
                Tensor(kernels, requires_grad=True),
                Tensor(bias, requires_grad=True),
                CONV_STRIDE,
                CONV_PADDING,
            )
        )
        layers.append(ReluLayer())
        in_channels = width
    layers.append(GapLayer())
    layers.append(DropoutLayer(DROPOUT_RATE))
    layers.append(
        DenseLayer(
            "head",
            Tensor(np.zeros((in_channels, NUM_CLASSES)), requires_grad=True),
            Tensor(np.zeros(NUM_CLASSES), requires_grad=True),
        )
    )
    return CnnModel(layers, plan, resolution, seed)


@dataclass(frozen=True, eq=False)
class Prediction:
    scores: np.ndarray
    probabilities: np.ndarray
    predicted_class: int


def predict(model: CnnModel, image) -> Prediction:
    """Class scores, softmax probabilities, and the argmax (ties -> bona fide)."""
    array = image.data if isinstance(image, Tensor) else np.asarray(image, dtype=np.float64)
    if array.ndim == 3:
        array = array[None]
    if array.ndim != 4 or array.shape[0] != 1:
        raise ResolutionMismatchError(f"predict expects one (C, H, W) image, got shape {array.shape}")
    with no_grad():
        logits, _ = model.forward(Tensor(array))
    scores = logits.data[0].copy()
    shifted = np.exp(scores - scores.max())
    probabilities = shifted / shifted.sum()
    predicted = 0 if probabilities[0] >= probabilities[1] else 1
    return Prediction(scores, probabilities, predicted)


@dataclass(frozen=True)
class TrainReport:
    epoch_losses: tuple[float, ...]
    train_accuracy: float
    epochs: int
    batch_size: int
    seed: int


def _eval_logits(model: CnnModel, inputs: np.ndarray) -> np.ndarray:
    with no_grad():
        logits, _ = model.forward(Tensor(inputs))
    return logits.data


def _balanced_order(pools: list[list[int]]) -> list[int]:
    """Merge per-class index pools so every prefix tracks the class ratio."""
    taken = [0 for _ in pools]
    order: list[int] = []
    total = sum(len(pool) for pool in pools)
    while len(order) < total:
        shares = [
            (len(pool) - taken[c]) / len(pool) if pool else -1.0
            for c, pool in enumerate(pools)
        ]
        c = int(np.argmax(shares))
        order.append(pools[c][taken[c]])
        taken[c] += 1
    return order


def train(
    model: CnnModel,
    dataset: list[LabeledImage],
    epochs: int = 5,
    batch_size: int = 32,
    learning_rate: float = 0.05,
    seed: int = 1,
) -> TrainReport:
    """Mini-batch SGD on softmax cross-entropy; deterministic for a fixed seed.

    Images are preprocessed to the model resolution up front. Each epoch
    reshuffles every class's samples from its own derived stream and then
    interleaves the classes proportionally, so each batch mirrors the overall
    class balance and both gradient streams are present in every update. The
    head dropout draws from a dedicated stream that advances across steps.
    """
    if not dataset:
        raise DataError("cannot train on an empty dataset")
    if epochs < 0:
        raise ValueError(f"epochs must be >= 0, got {epochs}")
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if learning_rate <= 0:
        raise ValueError(f"learning_rate must be positive, got {learning_rate}")
    inputs = np.stack([preprocess(sample.image, model.input_resolution) for sample in dataset])
    labels = np.array([sample.label for sample in dataset], dtype=np.int64)
    if not np.isin(labels, (0, 1)).all():
        raise DataError("labels must be 0 (bona fide) or 1 (morphed)")
    params = [tensor for _, tensor in model.parameters()]
    dropout_rng = Lcg(derive_seed(seed, _DROPOUT_STREAM))
    n = len(dataset)
    pools = [np.flatnonzero(labels == c).tolist() for c in (0, 1)]
    losses: list[float] = []
    for epoch in range(epochs):
        shuffle_rng = Lcg(derive_seed(seed, _SHUFFLE_STREAM, epoch))
        for pool in pools:
            shuffle_rng.shuffle(pool)
        order = _balanced_order(pools)
        total = 0.0
        for start in range(0, n, batch_size):
            batch = order[start : start + batch_size]
            logits, _ = model.forward(Tensor(inputs[batch]), train=True, rng=dropout_rng)
            loss = softmax_cross_entropy(logits, labels[batch])
            store = backward(loss)
            for tensor in params:
                grad = store.get(tensor)
                if grad is not None:
                    tensor.data -= learning_rate * grad
            total += float(loss.data) * len(batch)
        losses.append(total / n)
    logits = _eval_logits(model, inputs)
    predictions = (logits[:, 1] > logits[:, 0]).astype(np.int64)  # ties -> bona fide
    accuracy = float((predictions == labels).mean())
    return TrainReport(tuple(losses), accuracy, epochs, batch_size, seed)


def _activation_grid(values: np.ndarray) -> np.ndarray:
    """Tile channels into a square grayscale grid, each tile min-max scaled."""
    array = values
    if array.ndim == 4:
        array = array[0]
    if array.ndim == 2:  # (batch, features) -> feature channels of 1x1 tiles
        array = array[0]
    if array.ndim == 1:
        array = array[:, None, None]
    if array.ndim != 3:
        raise LayerIndexError(f"cannot tile activation of shape {values.shape}")
    channels, height, width = array.shape
    side = math.isqrt(channels)
    if side * side < channels:
        side += 1
    grid = np.zeros((side * height, side * width), dtype=np.float64)
    for k in range(channels):
        tile = array[k]
        low, high = tile.min(), tile.max()
        row, col = divmod(k, side)
        if high > low:
            grid[row * height : (row + 1) * height, col * width : (col + 1) * width] = (tile - low) / (
                high - low
            )
    return np.floor(255.0 * grid + 0.5).astype(np.uint8)


def dump_layer_activations(model: CnnModel, image, layer_index: int) -> tuple[Tensor, np.ndarray]:
    """Activation tensor at layer_index plus its tiled grayscale grid.

    Index 0 is the preprocessed input itself; index i > 0 is the output of
    layer i - 1 in the model's layer list.
    """
    array = image.data if isinstance(image, Tensor) else np.asarray(image, dtype=np.float64)
    if array.ndim == 3:
        array = array[None]
    if not 0 <= layer_index <= len(model.layers):
        raise LayerIndexError(
            f"layer index {layer_index} out of range (valid 0..{len(model.layers)})"
        )
    with no_grad():
        _, activations = model.forward(Tensor(array))
    activation = activations[layer_index]
    return activation, _activation_grid(activation.data)


class ClassificationObjective:
    """Adapter giving gradient_check a scalar loss over the model's parameters."""

    def __init__(self, model: CnnModel, label: int = 1):
        self.model = model
        self.label = label

    def __call__(self, x: Tensor) -> Tensor:
        logits, _ = self.model.forward(x, train=False)
        batch = logits.shape[0] if logits.data.ndim == 2 else 1
        return softmax_cross_entropy(logits, [self.label] * batch)

    def parameters(self) -> list[tuple[str, Tensor]]:
        return self.model.parameters()


_SIDECAR_FIELDS = ("phi", "alpha", "beta", "gamma", "base_depth", "base_width", "base_resolution", "seed")


def save_plan_sidecar(path, plan: ScalingPlan, seed: int) -> None:
    """Write the key=value sidecar that lets a checkpoint rebuild its model."""
    values = {
        "phi": repr(plan.phi),
        "alpha": repr(plan.alpha),
        "beta": repr(plan.beta),
        "gamma": repr(plan.gamma),
        "base_depth": str(plan.base_depth),
        "base_width": str(plan.base_width),
        "base_resolution": str(plan.base_resolution),
        "seed": str(seed),
    }
    lines = [f"{key}={values[key]}" for key in _SIDECAR_FIELDS]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_plan_sidecar(path) -> tuple[ScalingPlan, int]:
    """Reconstruct the plan directly (no constraint re-check) plus the seed."""
    target = Path(path)
    if not target.is_file():
        raise FormatError(f"plan sidecar not found: {target}")
    values: dict[str, str] = {}
    for line_no, line in enumerate(target.read_text(encoding="ascii").splitlines(), 1):
        if not line.strip():
            continue
        if "=" not in line:
            raise FormatError(f"sidecar line {line_no} is not key=value: {line!r}")
        key, _, raw = line.partition("=")
        values[key.strip()] = raw.strip()
    missing = [key for key in _SIDECAR_FIELDS if key not in values]
    if missing:
        raise FormatError(f"sidecar is missing keys: {', '.join(missing)}")
    try:
        phi = float(values["phi"])
        alpha = float(values["alpha"])
        beta = float(values["beta"])
        gamma = float(values["gamma"])
        base_depth = int(values["base_depth"])
        base_width = int(values["base_width"])
        base_resolution = int(values["base_resolution"])
        seed = int(values["seed"])
    except ValueError as exc:
        raise FormatError(f"sidecar has a malformed value: {exc}") from None
    plan = ScalingPlan(
        phi=phi,
        alpha=alpha,
        beta=beta,
        gamma=gamma,
        depth_mult=alpha**phi,
        width_mult=beta**phi,
        resolution_mult=gamma**phi,
        base_depth=base_depth,
        base_width=base_width,
        base_resolution=base_resolution,
    )
    return plan, seed
