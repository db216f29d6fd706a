"""
Minimal dense network kernel shared by the PPO and DQN trainers.

Float64 numpy throughout. Weight matrices are stored (in, out) so a batch
forward pass is ``x @ W + b``.
"""

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from ..core.errors import CheckpointError

CHECKPOINT_MAGIC = b"LEOCKPT\x00"
CHECKPOINT_VERSION = 1


class Mlp:
    """Fully connected network with tanh hidden layers and an identity output layer."""

    def __init__(self, sizes: Sequence[int], rng: Optional[np.random.Generator] = None,
                 output_scale: float = 1.0):
        if len(sizes) < 2 or any(int(s) < 1 for s in sizes):
            raise ValueError(f"Invalid layer sizes {list(sizes)}")
        self.sizes = [int(s) for s in sizes]
        rng = rng if rng is not None else np.random.default_rng(0)

        self.weights: List[np.ndarray] = []
        self.biases: List[np.ndarray] = []
        for k, (fan_in, fan_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            scale = np.sqrt(1.0 / fan_in)
            if k == len(self.sizes) - 2:
                scale *= output_scale
            self.weights.append(rng.standard_normal((fan_in, fan_out)) * scale)
            self.biases.append(np.zeros(fan_out))
        self._cache: Optional[List[np.ndarray]] = None

    @property
    def architecture(self) -> Dict[str, Any]:
        return {"sizes": list(self.sizes), "hidden": "tanh", "output": "identity"}

    def forward(self, x: np.ndarray) -> np.ndarray:
        """
        Forward pass over one input vector or a batch of rows.

        Activations are cached for the next ``backward`` call.
        """
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        batch = x[None, :] if single else x
        if batch.ndim != 2 or batch.shape[1] != self.sizes[0]:
            raise ValueError(f"Expected input of width {self.sizes[0]}, got shape {x.shape}")

        activations = [batch]
        h = batch
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            h = z if k == last else np.tanh(z)
            activations.append(h)
        self._cache = activations
        return h[0] if single else h

    __call__ = forward

    def backward(self, grad_output: np.ndarray) -> List[np.ndarray]:
        """
        Reverse-mode gradients of a scalar loss.

        Args:
            grad_output: dLoss/dOutput for the cached forward pass (same shape as its output)

        Returns:
            List[np.ndarray]: gradients ordered like ``parameters()``

        Raises:
            RuntimeError: if no forward pass is cached
        """
        if self._cache is None:
            raise RuntimeError("backward() called without a cached forward pass")
        activations = self._cache
        delta = np.asarray(grad_output, dtype=np.float64)
        if delta.ndim == 1:
            delta = delta[None, :]
        if delta.shape != activations[-1].shape:
            raise ValueError(f"Upstream gradient shape {delta.shape} does not match output {activations[-1].shape}")

        grads: List[np.ndarray] = [None] * (2 * len(self.weights))
        for k in range(len(self.weights) - 1, -1, -1):
            if k < len(self.weights) - 1:
                delta = delta * (1.0 - activations[k + 1] ** 2)
            grads[2 * k] = activations[k].T @ delta
            grads[2 * k + 1] = delta.sum(axis=0)
            delta = delta @ self.weights[k].T
        return grads

    def parameters(self) -> List[np.ndarray]:
        params = []
        for w, b in zip(self.weights, self.biases):
            params.extend([w, b])
        return params

    def flat_parameters(self) -> np.ndarray:
        return np.concatenate([p.reshape(-1) for p in self.parameters()])

    def load_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != self.num_parameters:
            raise CheckpointError(f"Expected {self.num_parameters} parameters, got {flat.size}")
        offset = 0
        for p in self.parameters():
            p[...] = flat[offset:offset + p.size].reshape(p.shape)
            offset += p.size

    @property
    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def copy(self) -> "Mlp":
        clone = Mlp.__new__(Mlp)
        clone.sizes = list(self.sizes)
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        clone._cache = None
        return clone

    def copy_from(self, other: "Mlp") -> None:
        for mine, theirs in zip(self.parameters(), other.parameters()):
            mine[...] = theirs

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.parameters())


@dataclass
class AdamState:
    """First and second moments plus the step counter."""
    m: List[np.ndarray]
    v: List[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params])


@dataclass(frozen=True)
class AdamHyper:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], moments: AdamState,
              lr: float, hyper: AdamHyper = AdamHyper()) -> Sequence[np.ndarray]:
    """
    One bias-corrected Adam descent step, applied in place.

    The learning rate is supplied per call so callers can decay it.
    """
    moments.t += 1
    t = moments.t
    for p, g, m, v in zip(params, grads, moments.m, moments.v):
        if g.shape != p.shape:
            raise ValueError(f"Gradient shape {g.shape} does not match parameter {p.shape}")
        m *= hyper.beta1
        m += (1.0 - hyper.beta1) * g
        v *= hyper.beta2
        v += (1.0 - hyper.beta2) * g * g
        m_hat = m / (1.0 - hyper.beta1 ** t)
        v_hat = v / (1.0 - hyper.beta2 ** t)
        p -= lr * m_hat / (np.sqrt(v_hat) + hyper.eps)
    return params


class AdamOptimizer:
    """Adam bound to one network's parameter list."""

    def __init__(self, net: Mlp, hyper: AdamHyper = AdamHyper()):
        self.net = net
        self.hyper = hyper
        self.state = AdamState.zeros_like(net.parameters())

    def step(self, grads: Sequence[np.ndarray], lr: float) -> None:
        adam_step(self.net.parameters(), grads, self.state, lr, self.hyper)


def clip_grad_norm(grads: List[np.ndarray], max_norm: Optional[float]) -> Tuple[List[np.ndarray], float]:
    """Scale gradients so their global L2 norm is at most max_norm."""
    norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))
    if max_norm is None or norm <= max_norm or norm == 0.0:
        return grads, norm
    scale = max_norm / norm
    return [g * scale for g in grads], norm


def masked_log_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """
    Log-probabilities over the last axis restricted to the unmasked entries.

    Masked entries get -inf. Every row must have at least one unmasked entry.
    """
    logits = np.asarray(logits, dtype=np.float64)
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), logits.shape)
    if not np.all(mask.any(axis=-1)):
        raise ValueError("Every mask row needs at least one allowed entry")
    masked = np.where(mask, logits, -np.inf)
    shifted = masked - masked.max(axis=-1, keepdims=True)
    with np.errstate(divide="ignore"):
        log_norm = np.log(np.sum(np.where(mask, np.exp(shifted), 0.0), axis=-1, keepdims=True))
    return np.where(mask, shifted - log_norm, -np.inf)


# ----------------------------------------------------------------------
# Checkpoints
# ----------------------------------------------------------------------
@dataclass
class Checkpoint:
    """Header metadata plus named networks."""
    kind: str
    header: Dict[str, Any]
    networks: Dict[str, Mlp] = field(default_factory=dict)


def checkpoint_bytes(kind: str, networks: Dict[str, Mlp], meta: Dict[str, Any]) -> bytes:
    header = dict(meta)
    header.update({
        "kind": kind,
        "format_version": CHECKPOINT_VERSION,
        "networks": [[name, net.architecture] for name, net in networks.items()],
    })
    encoded = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = np.concatenate([net.flat_parameters() for net in networks.values()]).astype("<f8")
    return CHECKPOINT_MAGIC + struct.pack("<Q", len(encoded)) + encoded + payload.tobytes()


def save_checkpoint(path: Union[str, Path], kind: str, networks: Dict[str, Mlp],
                    meta: Dict[str, Any]) -> Path:
    """
    Write a versioned checkpoint: magic, JSON header, little-endian float64 payload.

    The same networks and metadata always produce the same bytes.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(checkpoint_bytes(kind, networks, meta))
    logger.info(f"💾 Checkpoint saved to {path}")
    return path


def load_checkpoint(path: Union[str, Path], kind: Optional[str] = None) -> Checkpoint:
    """
    Read a checkpoint written by ``save_checkpoint``.

    Raises:
        CheckpointError: if the file is missing or unreadable, has a bad magic or
            version, holds another kind, or carries a malformed payload
    """
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e.strerror or e}") from e
    if not data.startswith(CHECKPOINT_MAGIC):
        raise CheckpointError(f"{path} is not a checkpoint file")
    offset = len(CHECKPOINT_MAGIC)
    try:
        (length,) = struct.unpack_from("<Q", data, offset)
    except struct.error as e:
        raise CheckpointError(f"Checkpoint header of {path} is truncated") from e
    offset += 8
    try:
        header = json.loads(data[offset:offset + length].decode("utf-8"))
    except ValueError as e:
        raise CheckpointError(f"Corrupt checkpoint header in {path}") from e
    offset += length

    if header.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"Unsupported checkpoint version {header.get('format_version')}")
    if kind is not None and header.get("kind") != kind:
        raise CheckpointError(f"Expected a {kind} checkpoint, found {header.get('kind')}")

    body = data[offset:]
    if len(body) % 8:
        raise CheckpointError(f"Checkpoint payload of {path} is not a whole number of float64 values")
    payload = np.frombuffer(body, dtype="<f8")
    networks: Dict[str, Mlp] = {}
    cursor = 0
    for name, architecture in header["networks"]:
        net = Mlp(architecture["sizes"])
        count = net.num_parameters
        if cursor + count > payload.size:
            raise CheckpointError(f"Checkpoint payload truncated at network {name}")
        net.load_flat(payload[cursor:cursor + count])
        cursor += count
        networks[name] = net
    if cursor != payload.size:
        raise CheckpointError("Checkpoint payload has trailing data")
    return Checkpoint(kind=header["kind"], header=header, networks=networks)
