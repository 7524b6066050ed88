"""Multilayer perceptron numerics in plain numpy

Forward pass, reverse-mode gradients, Adam and flat parameter export for the
fixed dense topology shared by the policy, value, cost value and validation
networks. Everything is computed in float64.
"""

import dataclasses
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from src.config.config import ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON
from src.utils.errors import NonFiniteError, ShapeError

ACTIVATIONS = ("tanh", "relu", "identity")


@dataclass(frozen=True)
class MlpParams:
    """Weights of one network plus its Adam state

    weights[k] has shape (sizes[k], sizes[k+1]); activations[k] is applied after
    layer k, so the last entry is the output activation (usually 'identity').
    """
    sizes: Tuple[int, ...]
    activations: Tuple[str, ...]
    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]
    log_std: Optional[np.ndarray] = None
    adam_m: Tuple[np.ndarray, ...] = ()
    adam_v: Tuple[np.ndarray, ...] = ()
    adam_t: int = 0

    @property
    def input_size(self):
        return self.sizes[0]

    @property
    def output_size(self):
        return self.sizes[-1]

    def parameter_arrays(self):
        """Trainable arrays in optimizer order: W0, b0, W1, b1, ..., [log_std]"""
        arrays = []
        for weight, bias in zip(self.weights, self.biases):
            arrays.extend([weight, bias])
        if self.log_std is not None:
            arrays.append(self.log_std)
        return arrays

    def parameter_names(self):
        names = []
        for k in range(len(self.weights)):
            names.extend([f"W{k}", f"b{k}"])
        if self.log_std is not None:
            names.append("log_std")
        return names


@dataclass(frozen=True)
class MlpGrads:
    """Gradients mirroring MlpParams"""
    weights: Tuple[np.ndarray, ...]
    biases: Tuple[np.ndarray, ...]
    log_std: Optional[np.ndarray] = None

    def arrays(self):
        arrays = []
        for weight, bias in zip(self.weights, self.biases):
            arrays.extend([weight, bias])
        if self.log_std is not None:
            arrays.append(self.log_std)
        return arrays


def init_mlp(sizes, activation, rng, output_activation="identity", output_scale=1.0, log_std_init=None):
    """Create a network with scaled-normal weights and zero biases

    Args:
        sizes (sequence of int): layer sizes (input, hidden..., output)
        activation (str): hidden activation tag
        rng (numpy.random.Generator): source of the initial weights
        output_activation (str): activation of the last layer
        output_scale (float): extra gain on the last layer (small for policy heads)
        log_std_init (float, optional): adds a learnable log-std vector when given

    Returns:
        MlpParams: freshly initialized parameters with zero Adam state
    """
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) < 2 or min(sizes) < 1:
        raise ShapeError(f"invalid layer sizes {sizes}")
    activations = tuple([activation] * (len(sizes) - 2) + [output_activation])
    for tag in activations:
        if tag not in ACTIVATIONS:
            raise ValueError(f"unknown activation '{tag}'")

    weights, biases = [], []
    for k in range(len(sizes) - 1):
        gain = output_scale if k == len(sizes) - 2 else 1.0
        weights.append(rng.normal(0.0, gain / np.sqrt(sizes[k]), size=(sizes[k], sizes[k + 1])))
        biases.append(np.zeros(sizes[k + 1]))
    log_std = None
    if log_std_init is not None:
        log_std = np.full(sizes[-1], float(log_std_init))
    return with_fresh_optimizer(MlpParams(sizes, activations, tuple(weights), tuple(biases), log_std))


def with_fresh_optimizer(params):
    """Return params with zeroed Adam moments and step counter"""
    zeros = tuple(np.zeros_like(p) for p in params.parameter_arrays())
    return dataclasses.replace(params, adam_m=zeros, adam_v=tuple(np.zeros_like(z) for z in zeros), adam_t=0)


def _activate(tag, z):
    if tag == "tanh":
        return np.tanh(z)
    if tag == "relu":
        return np.maximum(z, 0.0)
    return z


def _activation_derivative(tag, z, a):
    if tag == "tanh":
        return 1.0 - a * a
    if tag == "relu":
        return (z > 0.0).astype(np.float64)
    return np.ones_like(z)


def _as_batch(params, inputs):
    x = np.asarray(inputs, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.input_size:
        raise ShapeError(f"expected input of size {params.input_size}, got shape {np.shape(inputs)}")
    return x, single


def _forward_trace(params, x):
    """Forward pass keeping pre-activations and activations of every layer"""
    pre_activations, activations = [], [x]
    a = x
    for weight, bias, tag in zip(params.weights, params.biases, params.activations):
        z = a @ weight + bias
        a = _activate(tag, z)
        pre_activations.append(z)
        activations.append(a)
    return pre_activations, activations


def mlp_forward(params, inputs):
    """Evaluate the network

    Args:
        params (MlpParams): network parameters
        inputs (array-like): one input vector or a (batch, input_size) matrix

    Returns:
        numpy.ndarray: output vector, or (batch, output_size) matrix for batched input

    Raises:
        ShapeError: when the input size does not match the first layer
    """
    x, single = _as_batch(params, inputs)
    a = x
    for weight, bias, tag in zip(params.weights, params.biases, params.activations):
        a = _activate(tag, a @ weight + bias)
    return a[0] if single else a


def mlp_gradient(params, inputs, upstream):
    """Backpropagate per-sample output gradients to the parameters

    The result is the gradient of (1/B) * sum_i upstream_i . f(x_i), i.e. the
    batch mean of the per-sample gradients.

    Args:
        params (MlpParams): network parameters
        inputs (array-like): (batch, input_size) inputs
        upstream (array-like): (batch, output_size) loss gradient per output

    Returns:
        MlpGrads: gradients for weights and biases (log_std gradient is None)

    Raises:
        ShapeError: on empty batches or mismatched shapes
        NonFiniteError: when an upstream row contains NaN/Inf
    """
    x, _ = _as_batch(params, inputs)
    g = np.asarray(upstream, dtype=np.float64)
    if g.ndim == 1:
        g = g[:, None] if params.output_size == 1 and g.shape[0] == x.shape[0] else g[None, :]
    batch = x.shape[0]
    if batch == 0:
        raise ShapeError("gradient batch is empty")
    if g.shape != (batch, params.output_size):
        raise ShapeError(f"upstream gradient shape {g.shape} does not match outputs {(batch, params.output_size)}")
    bad_rows = np.flatnonzero(~np.isfinite(g).all(axis=1))
    if bad_rows.size:
        raise NonFiniteError(f"non-finite upstream gradient at batch index {bad_rows[0]}", index=int(bad_rows[0]))

    pre_activations, activations = _forward_trace(params, x)
    n_layers = len(params.weights)
    grad_w = [None] * n_layers
    grad_b = [None] * n_layers
    delta = g * _activation_derivative(params.activations[-1], pre_activations[-1], activations[-1])
    for k in range(n_layers - 1, -1, -1):
        grad_w[k] = activations[k].T @ delta / batch
        grad_b[k] = delta.sum(axis=0) / batch
        if k > 0:
            back = delta @ params.weights[k].T
            delta = back * _activation_derivative(params.activations[k - 1], pre_activations[k - 1], activations[k])
    return MlpGrads(tuple(grad_w), tuple(grad_b), None)


def add_log_std_grad(grads, log_std_grad):
    """Attach a log-std gradient computed outside the dense layers"""
    return dataclasses.replace(grads, log_std=np.asarray(log_std_grad, dtype=np.float64))


def adam_step(params, grads, learning_rate, beta1=ADAM_BETA1, beta2=ADAM_BETA2, eps=ADAM_EPSILON):
    """Apply one bias-corrected Adam update

    Args:
        params (MlpParams): current parameters and moments
        grads (MlpGrads): gradients of the loss being minimized
        learning_rate (float): step size, must be positive

    Returns:
        MlpParams: a new parameter object; the input is not modified

    Raises:
        NonFiniteError: if a gradient or an updated parameter is not finite
    """
    if learning_rate <= 0.0:
        raise ValueError(f"learning rate must be positive, got {learning_rate}")
    names = params.parameter_names()
    current = params.parameter_arrays()
    grad_arrays = grads.arrays()
    if params.log_std is not None and grads.log_std is None:
        grad_arrays.append(np.zeros_like(params.log_std))
    if len(grad_arrays) != len(current):
        raise ShapeError(f"expected {len(current)} gradient arrays, got {len(grad_arrays)}")

    t = params.adam_t + 1
    bias1 = 1.0 - beta1 ** t
    bias2 = 1.0 - beta2 ** t
    new_params, new_m, new_v = [], [], []
    for name, p, g, m, v in zip(names, current, grad_arrays, params.adam_m, params.adam_v):
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, expected {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for {name}", name=name)
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        updated = p - learning_rate * (m / bias1) / (np.sqrt(v / bias2) + eps)
        if not np.all(np.isfinite(updated)):
            raise NonFiniteError(
                f"Adam step {t} produced non-finite values in {name} "
                f"(max |grad| {np.max(np.abs(g)):.3e}, lr {learning_rate})", name=name)
        new_params.append(updated)
        new_m.append(m)
        new_v.append(v)

    n_layers = len(params.weights)
    weights = tuple(new_params[0:2 * n_layers:2])
    biases = tuple(new_params[1:2 * n_layers:2])
    log_std = new_params[-1] if params.log_std is not None else None
    return dataclasses.replace(params, weights=weights, biases=biases, log_std=log_std,
                               adam_m=tuple(new_m), adam_v=tuple(new_v), adam_t=t)


def export_params(params):
    """Flatten a network into an ordered list of (name, array) pairs

    Includes architecture metadata, trainable arrays and the Adam state, so
    import_params reproduces the object bit-exactly.
    """
    named = [
        ("sizes", np.asarray(params.sizes, dtype=np.int64)),
        ("activations", np.asarray([ACTIVATIONS.index(a) for a in params.activations], dtype=np.int64)),
        ("adam_t", np.asarray([params.adam_t], dtype=np.int64)),
    ]
    for name, array in zip(params.parameter_names(), params.parameter_arrays()):
        named.append((name, np.array(array, dtype=np.float64)))
    for name, m, v in zip(params.parameter_names(), params.adam_m, params.adam_v):
        named.append((f"adam_m.{name}", np.array(m, dtype=np.float64)))
        named.append((f"adam_v.{name}", np.array(v, dtype=np.float64)))
    return named


def import_params(named):
    """Rebuild MlpParams from export_params output (list of pairs or mapping)"""
    arrays = dict(named)
    try:
        sizes = tuple(int(s) for s in arrays["sizes"])
        activations = tuple(ACTIVATIONS[int(code)] for code in arrays["activations"])
        n_layers = len(sizes) - 1
        weights = tuple(np.array(arrays[f"W{k}"], dtype=np.float64) for k in range(n_layers))
        biases = tuple(np.array(arrays[f"b{k}"], dtype=np.float64) for k in range(n_layers))
        log_std = np.array(arrays["log_std"], dtype=np.float64) if "log_std" in arrays else None
        params = MlpParams(sizes, activations, weights, biases, log_std)
        names = params.parameter_names()
        adam_m = tuple(np.array(arrays[f"adam_m.{name}"], dtype=np.float64) for name in names)
        adam_v = tuple(np.array(arrays[f"adam_v.{name}"], dtype=np.float64) for name in names)
        adam_t = int(arrays["adam_t"][0])
    except KeyError as e:
        raise ShapeError(f"missing network array {e}")
    for k, weight in enumerate(weights):
        if weight.shape != (sizes[k], sizes[k + 1]):
            raise ShapeError(f"W{k} has shape {weight.shape}, expected {(sizes[k], sizes[k + 1])}")
    return dataclasses.replace(params, adam_m=adam_m, adam_v=adam_v, adam_t=adam_t)


def params_equal(a, b):
    """True when two networks hold bit-identical parameters and optimizer state"""
    left, right = export_params(a), export_params(b)
    if [name for name, _ in left] != [name for name, _ in right]:
        return False
    return all(np.array_equal(x, y) for (_, x), (_, y) in zip(left, right))
