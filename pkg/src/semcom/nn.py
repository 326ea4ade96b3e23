"""Dense feed-forward networks: specs, parameters, forward pass, checkpoints.

Every trainable map in the system (encoder, classifier, system decoder,
attack decoder) is a stack of dense layers described by a
:class:`DenseNetworkSpec`.  Parameters live in a single flat float64 vector
(:class:`ParameterSet`) with a stable layer-major order: for each layer,
the weight matrix in row-major order, then the bias vector.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

ACTIVATIONS = ("tanh", "relu", "softmax", "sigmoid", "identity")

PROB_FLOOR = 1e-12  # lower clamp for log-probabilities


@dataclass(frozen=True)
class LayerSpec:
    fan_in: int
    fan_out: int
    activation: str

    def __post_init__(self):
        if self.fan_in <= 0 or self.fan_out <= 0:
            raise ValueError(f"layer dims must be positive, got {self.fan_in}x{self.fan_out}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass(frozen=True)
class DenseNetworkSpec:
    """Ordered dense layers; consecutive dims must chain, softmax only last."""

    layers: tuple[LayerSpec, ...]

    def __post_init__(self):
        if not self.layers:
            raise ValueError("network needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.fan_out != b.fan_in:
                raise ValueError(
                    f"layer chain broken: fan_out {a.fan_out} != next fan_in {b.fan_in}"
                )
        for layer in self.layers[:-1]:
            if layer.activation == "softmax":
                raise ValueError("softmax is only allowed as the final activation")

    @classmethod
    def chain(cls, dims_and_acts: Sequence[tuple[int, int, str]]) -> "DenseNetworkSpec":
        return cls(tuple(LayerSpec(i, o, a) for i, o, a in dims_and_acts))

    @property
    def input_dim(self) -> int:
        return self.layers[0].fan_in

    @property
    def output_dim(self) -> int:
        return self.layers[-1].fan_out

    @property
    def parameter_count(self) -> int:
        return sum(l.fan_in * l.fan_out + l.fan_out for l in self.layers)


class ParameterSet:
    """Flat float64 parameter vector with per-layer (W, b) views.

    flatten()/unflatten() round-trip exactly; views share memory with the
    flat vector, so mutating a view mutates the set.
    """

    def __init__(self, spec: DenseNetworkSpec, flat: np.ndarray):
        flat = np.ascontiguousarray(flat, dtype=np.float64)
        if flat.shape != (spec.parameter_count,):
            raise ValueError(
                f"flat vector has {flat.shape}, spec needs ({spec.parameter_count},)"
            )
        self.spec = spec
        self.flat = flat
        self._views: list[tuple[np.ndarray, np.ndarray]] = []
        pos = 0
        for layer in spec.layers:
            w_n = layer.fan_out * layer.fan_in
            w = self.flat[pos : pos + w_n].reshape(layer.fan_out, layer.fan_in)
            pos += w_n
            b = self.flat[pos : pos + layer.fan_out]
            pos += layer.fan_out
            self._views.append((w, b))

    def layer(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        return self._views[i]

    def flatten(self) -> np.ndarray:
        return self.flat.copy()

    @classmethod
    def unflatten(cls, spec: DenseNetworkSpec, flat: np.ndarray) -> "ParameterSet":
        return cls(spec, np.array(flat, dtype=np.float64, copy=True))

    def copy(self) -> "ParameterSet":
        return ParameterSet(self.spec, self.flat.copy())


@dataclass
class Network:
    """A spec bound to its current parameters."""

    spec: DenseNetworkSpec
    params: ParameterSet

    def copy(self) -> "Network":
        return Network(self.spec, self.params.copy())


def init_params(spec: DenseNetworkSpec, rng: np.random.Generator) -> ParameterSet:
    """Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases."""
    flat = np.zeros(spec.parameter_count)
    params = ParameterSet(spec, flat)
    for i, layer in enumerate(spec.layers):
        w, b = params.layer(i)
        limit = np.sqrt(6.0 / (layer.fan_in + layer.fan_out))
        w[:] = rng.uniform(-limit, limit, size=w.shape)
        b[:] = 0.0
    return params


class Tape:
    """Differentiation record for one network's forward pass(es).

    Holds the leaf tensors bound to the network's parameters; after a
    backward pass, :meth:`param_grad` returns the flattened gradient in
    the ParameterSet order.
    """

    def __init__(self, params: ParameterSet, leaves: list[tuple[Tensor, Tensor]]):
        self.params = params
        self.leaves = leaves

    def param_grad(self) -> np.ndarray:
        pieces = []
        for w_t, b_t in self.leaves:
            gw = w_t.grad if w_t.grad is not None else np.zeros_like(w_t.value)
            gb = b_t.grad if b_t.grad is not None else np.zeros_like(b_t.value)
            pieces.append(gw.ravel())
            pieces.append(gb.ravel())
        return np.concatenate(pieces)


def _activate(x: Tensor, name: str) -> Tensor:
    if name == "identity":
        return x
    if name == "tanh":
        return ad.tanh(x)
    if name == "relu":
        return ad.relu(x)
    if name == "sigmoid":
        return ad.sigmoid(x)
    if name == "softmax":
        return ad.softmax(x, axis=-1)
    raise ValueError(f"unknown activation {name!r}")


def forward_graph(
    spec: DenseNetworkSpec,
    params: ParameterSet,
    x: Tensor | np.ndarray,
    tape: Tape | None = None,
) -> tuple[Tensor, Tape]:
    """Run a batch (M, input_dim) through the network, building the graph.

    Passing an existing `tape` reuses its parameter leaves so that several
    forward passes of the same network accumulate into one gradient.
    """
    x = ad.as_tensor(x)
    if x.value.ndim != 2 or x.value.shape[1] != spec.input_dim:
        raise ValueError(
            f"input has shape {x.value.shape}, expected (batch, {spec.input_dim})"
        )
    if tape is None:
        leaves = [
            (ad.parameter(w), ad.parameter(b))
            for w, b in (params.layer(i) for i in range(len(spec.layers)))
        ]
        tape = Tape(params, leaves)
    h = x
    for layer_spec, (w_t, b_t) in zip(spec.layers, tape.leaves):
        h = ad.add(ad.matmul(h, ad.transpose(w_t)), b_t)
        h = _activate(h, layer_spec.activation)
    return h, tape


def forward_values(spec: DenseNetworkSpec, params: ParameterSet, x: np.ndarray) -> np.ndarray:
    """Graph-free batch forward pass (evaluation hot path)."""
    h = np.asarray(x, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != spec.input_dim:
        raise ValueError(f"input has shape {h.shape}, expected (batch, {spec.input_dim})")
    for i, layer in enumerate(spec.layers):
        w, b = params.layer(i)
        h = h @ w.T + b
        if layer.activation == "tanh":
            h = np.tanh(h)
        elif layer.activation == "relu":
            h = np.maximum(h, 0.0)
        elif layer.activation == "sigmoid":
            h = 1.0 / (1.0 + np.exp(-h))
        elif layer.activation == "softmax":
            e = np.exp(h - h.max(axis=1, keepdims=True))
            h = e / e.sum(axis=1, keepdims=True)
    return h


def forward(
    spec: DenseNetworkSpec, params: ParameterSet, x: np.ndarray
) -> tuple[np.ndarray, tuple[Tensor, Tape]]:
    """Single-vector or batch forward; returns (output values, tape).

    The tape here is the pair (output node, parameter tape): composing the
    output node into any scalar and calling :func:`gradients` yields exact
    reverse-mode derivatives.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    out_t, tape = forward_graph(spec, params, x[None, :] if single else x)
    out = out_t.value[0] if single else out_t.value
    return out, (out_t, tape)


def gradients(tape: Tape, loss: Tensor) -> np.ndarray:
    """Flattened d(loss)/d(params) for the network behind `tape`."""
    if loss.value.size != 1:
        raise ValueError("loss must be a scalar")
    loss.backward()
    return tape.param_grad()


def cross_entropy(probs: Tensor | np.ndarray, labels: np.ndarray | int) -> Tensor:
    """Mean -log p[label] over the batch, clamped below at -log(1e-12).

    `probs` are probability rows (e.g. softmax outputs); a single vector
    and scalar label are also accepted.
    """
    probs = ad.as_tensor(probs)
    single = probs.value.ndim == 1
    if single:
        probs = ad.reshape(probs, (1, probs.value.shape[0]))
        labels = np.asarray([labels])
    labels = np.asarray(labels, dtype=np.intp)
    n_classes = probs.value.shape[1]
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ValueError(f"label out of range for {n_classes} classes")
    picked = ad.gather_rows(probs, labels)
    return ad.mean(ad.mul(ad.log(ad.clip_min(picked, PROB_FLOOR)), -1.0))


# -- checkpoint container -------------------------------------------------------
#
# Layout (little-endian):
#   magic  b"SCK1"
#   u32    header length
#   bytes  header: UTF-8 JSON {"version","networks":[{name,layers}],
#          "optimizers":{name:{step,beta1,beta2,lr,eps,schedule}}}
#   then, per network in header order: parameter_count float64 (flat params),
#   followed by, if the network has optimizer state, 3x parameter_count
#   float64 (first moment, second moment, running max).

CHECKPOINT_MAGIC = b"SCK1"


def save_checkpoint(path, networks: dict, optimizers: dict | None = None) -> None:
    """Write named (spec, params) pairs plus optional Adam state to `path`."""
    optimizers = optimizers or {}
    header = {
        "version": 1,
        "networks": [
            {
                "name": name,
                "layers": [[l.fan_in, l.fan_out, l.activation] for l in params.spec.layers],
            }
            for name, params in networks.items()
        ],
        "optimizers": {
            name: {
                "step": st.step,
                "beta1": st.beta1,
                "beta2": st.beta2,
                "lr": st.lr,
                "eps": st.eps,
                "schedule": st.schedule,
            }
            for name, st in optimizers.items()
        },
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for name, params in networks.items():
            f.write(params.flat.astype("<f8").tobytes())
            if name in optimizers:
                st = optimizers[name]
                for arr in (st.m, st.v, st.v_hat):
                    f.write(np.asarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[dict, dict]:
    """Read back (networks, optimizers) written by :func:`save_checkpoint`."""
    from .optim import AdamState

    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"bad checkpoint magic {magic!r}")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen).decode("utf-8"))
        if header.get("version") != 1:
            raise ValueError(f"unsupported checkpoint version {header.get('version')}")
        networks = {}
        optimizers = {}
        for net in header["networks"]:
            spec = DenseNetworkSpec.chain([tuple(l) for l in net["layers"]])
            n = spec.parameter_count
            flat = np.frombuffer(f.read(8 * n), dtype="<f8").copy()
            networks[net["name"]] = ParameterSet(spec, flat)
            opt = header["optimizers"].get(net["name"])
            if opt is not None:
                m = np.frombuffer(f.read(8 * n), dtype="<f8").copy()
                v = np.frombuffer(f.read(8 * n), dtype="<f8").copy()
                v_hat = np.frombuffer(f.read(8 * n), dtype="<f8").copy()
                optimizers[net["name"]] = AdamState(
                    step=opt["step"],
                    m=m,
                    v=v,
                    v_hat=v_hat,
                    beta1=opt["beta1"],
                    beta2=opt["beta2"],
                    lr=opt["lr"],
                    eps=opt["eps"],
                    schedule=opt["schedule"],
                )
    return networks, optimizers
