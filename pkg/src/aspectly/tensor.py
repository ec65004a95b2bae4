"""# Tensor engine

A small float64 array engine with reverse-mode differentiation, holding exactly the
primitives the network needs.

Operations take an optional `Tape`. When one is passed, the operation records its
inputs, output and a backward rule on it; `backward` then replays the tape in reverse
and fills ``grad`` on every leaf tensor with ``requires_grad`` set. Without a tape an
operation is a plain forward computation.

A tape belongs to one thread. Independent tapes share nothing and may run in parallel.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import (
    Any,
    Callable,
    Dict,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np

from .errors import (
    AllMasked,
    CheckpointError,
    DetachedTensor,
    IdOutOfRange,
    LabelOutOfRange,
    NonFiniteValue,
    NotScalarLoss,
    ShapeMismatch,
)
from .utils import read_json, write_json

__all__ = (
    "Tensor",
    "Node",
    "Tape",
    "OptimState",
    "add",
    "multiply",
    "reduce_sum",
    "embedding_lookup",
    "conv1d",
    "lstm_forward",
    "attention_forward",
    "global_max_pool",
    "dense",
    "dropout",
    "softmax_cross_entropy",
    "backward",
    "adam_step",
    "sgd_step",
    "parameters_to_dict",
    "parameters_from_dict",
    "save_parameters",
    "load_parameters",
)

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

CHECKPOINT_FORMAT = "aspectly-parameters"
CHECKPOINT_VERSION = 1

ACTIVATIONS = ("relu", "none")


class Tensor:
    """A dense float64 array with an optional gradient.

    Parameters
    ----------
    data: Any
        Array-like values; always copied to a contiguous float64 array.
    requires_grad: bool
        Whether `backward` should compute a gradient for this tensor.
    name: str
        Label used in error messages and checkpoints.

    Raises
    ------
    NonFiniteValue
        `data` holds NaN or infinity.
    """

    __slots__ = ("data", "requires_grad", "grad", "name")

    def __init__(self, data: Any, requires_grad: bool = False, name: str = "") -> None:
        array = np.array(data, dtype=np.float64)
        _check_finite(array, name)
        self.data = array
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name

    @classmethod
    def _wrap(cls, array: np.ndarray, requires_grad: bool, name: str = "") -> "Tensor":
        """Adopt `array` without copying it."""
        _check_finite(array, name)
        tensor = cls.__new__(cls)
        tensor.data = array
        tensor.requires_grad = requires_grad
        tensor.grad = None
        tensor.name = name
        return tensor

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        """A copy of the values."""
        return self.data.copy()

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"<Tensor{label} shape={self.shape} requires_grad={self.requires_grad}>"


def _check_finite(array: np.ndarray, name: str = "") -> None:
    if not np.all(np.isfinite(array)):
        msg = f"tensor {name or '<anonymous>'} holds a non-finite value"
        raise NonFiniteValue(msg)


class Node(NamedTuple):
    """One recorded operation."""

    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


class Tape:
    """Ordered record of the operations of one forward pass.

    Nodes are appended in execution order, which is a topological order of the
    computation graph.
    """

    def __init__(self) -> None:
        self.nodes: List[Node] = []

    def __len__(self) -> int:
        return len(self.nodes)

    def record(self, inputs: Sequence[Tensor], output: Tensor, backward_fn: BackwardFn) -> None:
        self.nodes.append(Node(tuple(inputs), output, backward_fn))

    def reset(self) -> None:
        self.nodes.clear()


def _emit(
    tape: Optional[Tape],
    inputs: Sequence[Tensor],
    data: np.ndarray,
    backward_fn: BackwardFn,
    name: str = "",
) -> Tensor:
    out = Tensor._wrap(data, any(t.requires_grad for t in inputs), name)
    if tape is not None and out.requires_grad:
        tape.record(inputs, out, backward_fn)
    return out


def _expect_ndim(tensor: Tensor, ndim: int, what: str) -> None:
    if tensor.data.ndim != ndim:
        msg = f"{what} must have {ndim} dimensions, got shape {tensor.shape}"
        raise ShapeMismatch(msg)


# elementwise


def add(a: Tensor, b: Tensor, tape: Optional[Tape] = None) -> Tensor:
    """Elementwise ``a + b`` for equal shapes."""
    if a.shape != b.shape:
        msg = f"cannot add shapes {a.shape} and {b.shape}"
        raise ShapeMismatch(msg)

    return _emit(tape, (a, b), a.data + b.data, lambda g: (g, g))


def multiply(a: Tensor, b: Tensor, tape: Optional[Tape] = None) -> Tensor:
    """Elementwise ``a * b`` for equal shapes."""
    if a.shape != b.shape:
        msg = f"cannot multiply shapes {a.shape} and {b.shape}"
        raise ShapeMismatch(msg)

    a_data, b_data = a.data, b.data
    return _emit(tape, (a, b), a_data * b_data, lambda g: (g * b_data, g * a_data))


def reduce_sum(x: Tensor, tape: Optional[Tape] = None) -> Tensor:
    """Sum of every element, as a scalar tensor."""
    shape = x.shape
    return _emit(tape, (x,), np.array(x.data.sum()), lambda g: (np.full(shape, float(g)),))


# layers


def embedding_lookup(ids: np.ndarray, table: Tensor, tape: Optional[Tape] = None) -> Tensor:
    """Gather rows of `table`.

    Parameters
    ----------
    ids: np.ndarray
        Integer ids ``[B, L]``.
    table: Tensor
        Embedding table ``[V, D]``.

    Returns
    -------
    Tensor
        ``[B, L, D]`` with ``out[b, l] = table[ids[b, l]]``. The gradient scatter-adds into
        the table rows, so a repeated id receives the sum of its upstream gradients.

    Raises
    ------
    IdOutOfRange
        An id is negative or not below ``V``.
    """
    _expect_ndim(table, 2, "embedding table")
    ids = np.asarray(ids, dtype=np.int64)
    vocab_size = table.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= vocab_size):
        msg = f"token id outside [0, {vocab_size})"
        raise IdOutOfRange(msg)

    def backward_fn(g: np.ndarray) -> Tuple[np.ndarray]:
        grad = np.zeros_like(table.data)
        np.add.at(grad, ids, g)
        return (grad,)

    return _emit(tape, (table,), table.data[ids], backward_fn, "embedding")


def conv1d(x: Tensor, kernels: Tensor, bias: Tensor, tape: Optional[Tape] = None) -> Tensor:
    """Valid 1-D convolution over time followed by ReLU.

    ``out[b, t, o] = relu(sum_{j, i} x[b, t + j, i] * kernels[j, i, o] + bias[o])``

    Parameters
    ----------
    x: Tensor
        ``[B, L, Cin]``.
    kernels: Tensor
        ``[k, Cin, Cout]``.
    bias: Tensor
        ``[Cout]``.

    Returns
    -------
    Tensor
        ``[B, L - k + 1, Cout]``.

    Raises
    ------
    ShapeMismatch
        Channel counts disagree or ``L < k``.
    """
    _expect_ndim(x, 3, "conv1d input")
    _expect_ndim(kernels, 3, "conv1d kernels")
    width, c_in, c_out = kernels.shape
    length = x.shape[1]
    if x.shape[2] != c_in or bias.shape != (c_out,):
        msg = f"conv1d shapes disagree: x {x.shape}, kernels {kernels.shape}, bias {bias.shape}"
        raise ShapeMismatch(msg)
    if length < width:
        msg = f"sequence length {length} is shorter than kernel width {width}"
        raise ShapeMismatch(msg)

    steps = length - width + 1
    xd, wd = x.data, kernels.data
    pre = np.broadcast_to(bias.data, (x.shape[0], steps, c_out)).copy()
    for j in range(width):
        pre += np.einsum("bti,io->bto", xd[:, j : j + steps], wd[j])
    active = pre > 0.0

    def backward_fn(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        gz = g * active
        dx = np.zeros_like(xd)
        dw = np.zeros_like(wd)
        for j in range(width):
            dw[j] = np.einsum("bti,bto->io", xd[:, j : j + steps], gz)
            dx[:, j : j + steps] += np.einsum("bto,io->bti", gz, wd[j])
        return dx, dw, gz.sum(axis=(0, 1))

    return _emit(tape, (x, kernels, bias), np.where(active, pre, 0.0), backward_fn, "conv1d")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def lstm_forward(
    x: Tensor,
    kernel: Tensor,
    recurrent_kernel: Tensor,
    bias: Tensor,
    tape: Optional[Tape] = None,
) -> Tensor:
    """Run an LSTM over the time axis and return every hidden state.

    Gate pre-activations are packed ``[input, forget, cell, output]`` along the last axis
    of the weights. The initial hidden and cell states are zero.

    Parameters
    ----------
    x: Tensor
        ``[B, T, D]``.
    kernel: Tensor
        Input weights ``[D, 4H]``.
    recurrent_kernel: Tensor
        Hidden-state weights ``[H, 4H]``.
    bias: Tensor
        ``[4H]``.

    Returns
    -------
    Tensor
        Hidden states ``[B, T, H]``.

    Raises
    ------
    ShapeMismatch
        Weight shapes do not describe one hidden size, or ``T == 0``.
    """
    _expect_ndim(x, 3, "lstm input")
    batch, steps, dim = x.shape
    hidden = recurrent_kernel.shape[0]
    if (
        kernel.shape != (dim, 4 * hidden)
        or recurrent_kernel.shape != (hidden, 4 * hidden)
        or bias.shape != (4 * hidden,)
    ):
        msg = (
            f"lstm weights disagree: x {x.shape}, kernel {kernel.shape}, "
            f"recurrent {recurrent_kernel.shape}, bias {bias.shape}"
        )
        raise ShapeMismatch(msg)
    if steps < 1:
        msg = "lstm needs at least one time step"
        raise ShapeMismatch(msg)

    xd, wk, wr, bd = x.data, kernel.data, recurrent_kernel.data, bias.data
    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    hs = np.zeros((batch, steps, hidden))
    cache = []
    for t in range(steps):
        z = xd[:, t] @ wk + h @ wr + bd
        i = _sigmoid(z[:, :hidden])
        f = _sigmoid(z[:, hidden : 2 * hidden])
        g = np.tanh(z[:, 2 * hidden : 3 * hidden])
        o = _sigmoid(z[:, 3 * hidden :])
        c_prev, h_prev = c, h
        c = f * c_prev + i * g
        tanh_c = np.tanh(c)
        h = o * tanh_c
        hs[:, t] = h
        cache.append((h_prev, c_prev, i, f, g, o, tanh_c))

    def backward_fn(grad: np.ndarray) -> Tuple[np.ndarray, ...]:
        dx = np.zeros_like(xd)
        dwk = np.zeros_like(wk)
        dwr = np.zeros_like(wr)
        db = np.zeros_like(bd)
        dh_next = np.zeros((batch, hidden))
        dc_next = np.zeros((batch, hidden))
        for t in reversed(range(steps)):
            h_prev, c_prev, i, f, g, o, tanh_c = cache[t]
            dh = grad[:, t] + dh_next
            dc = dh * o * (1.0 - tanh_c**2) + dc_next
            dz = np.concatenate(
                (
                    dc * g * i * (1.0 - i),
                    dc * c_prev * f * (1.0 - f),
                    dc * i * (1.0 - g**2),
                    dh * tanh_c * o * (1.0 - o),
                ),
                axis=1,
            )
            dwk += xd[:, t].T @ dz
            dwr += h_prev.T @ dz
            db += dz.sum(axis=0)
            dx[:, t] = dz @ wk.T
            dh_next = dz @ wr.T
            dc_next = dc * f
        return dx, dwk, dwr, db

    return _emit(tape, (x, kernel, recurrent_kernel, bias), hs, backward_fn, "lstm")


def attention_forward(
    h: Tensor,
    w: Tensor,
    lengths: np.ndarray,
    tape: Optional[Tape] = None,
) -> Tuple[Tensor, Tensor]:
    """Score every time step and reweight the sequence.

    ``score[b, t] = tanh(h[b, t] . w)``; the weights are a softmax over the first
    ``lengths[b]`` steps of each row, zero beyond them. The context keeps the sequence
    shape: ``context[b, t] = weights[b, t] * h[b, t]``.

    Parameters
    ----------
    h: Tensor
        ``[B, T, H]``.
    w: Tensor
        Score vector ``[H]``.
    lengths: np.ndarray
        Unmasked steps per row, clipped to ``T``.

    Returns
    -------
    Tuple[Tensor, Tensor]
        The context ``[B, T, H]`` and the weights ``[B, T]``. The weights are reported
        for inspection and carry no gradient.

    Raises
    ------
    AllMasked
        A row has a length below 1.
    ShapeMismatch
        `w` or `lengths` do not fit `h`.
    """
    _expect_ndim(h, 3, "attention input")
    batch, steps, hidden = h.shape
    lengths = np.asarray(lengths, dtype=np.int64)
    if w.shape != (hidden,) or lengths.shape != (batch,):
        msg = f"attention shapes disagree: h {h.shape}, w {w.shape}, lengths {lengths.shape}"
        raise ShapeMismatch(msg)
    if batch and lengths.min() < 1:
        msg = "every row needs at least one unmasked time step"
        raise AllMasked(msg)

    hd, wd = h.data, w.data
    mask = np.arange(steps)[None, :] < np.minimum(lengths, steps)[:, None]
    score = np.tanh(hd @ wd)
    shifted = np.where(mask, score, -np.inf)
    shifted = shifted - shifted.max(axis=1, keepdims=True)
    e = np.where(mask, np.exp(shifted), 0.0)
    alpha = e / e.sum(axis=1, keepdims=True)

    def backward_fn(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        dalpha = np.einsum("bth,bth->bt", g, hd)
        dscore = alpha * (dalpha - (alpha * dalpha).sum(axis=1, keepdims=True))
        ds = dscore * (1.0 - score**2)
        dh = alpha[..., None] * g + ds[..., None] * wd
        dw = np.einsum("bt,bth->h", ds, hd)
        return dh, dw

    context = _emit(tape, (h, w), alpha[..., None] * hd, backward_fn, "attention")
    return context, Tensor._wrap(alpha, False, "attention_weights")


def global_max_pool(x: Tensor, tape: Optional[Tape] = None) -> Tensor:
    """Maximum over the time axis, ``[B, T, H] -> [B, H]``.

    The gradient goes to the first time step holding the maximum.
    """
    _expect_ndim(x, 3, "pooling input")
    xd = x.data
    index = np.argmax(xd, axis=1)[:, None, :]

    def backward_fn(g: np.ndarray) -> Tuple[np.ndarray]:
        grad = np.zeros_like(xd)
        np.put_along_axis(grad, index, g[:, None, :], axis=1)
        return (grad,)

    out = np.take_along_axis(xd, index, axis=1)[:, 0, :]
    return _emit(tape, (x,), out, backward_fn, "max_pool")


def dense(
    x: Tensor,
    weight: Tensor,
    bias: Tensor,
    activation: str = "none",
    tape: Optional[Tape] = None,
) -> Tensor:
    """Affine map ``x @ weight + bias`` with an optional ReLU.

    Raises
    ------
    ShapeMismatch
        ``x`` is not ``[B, Din]`` for ``weight`` of shape ``[Din, Dout]``.
    ValueError
        `activation` is neither ``relu`` nor ``none``.
    """
    if activation not in ACTIVATIONS:
        msg = f"unknown activation {activation!r}"
        raise ValueError(msg)

    _expect_ndim(x, 2, "dense input")
    _expect_ndim(weight, 2, "dense weight")
    if x.shape[1] != weight.shape[0] or bias.shape != (weight.shape[1],):
        msg = f"dense shapes disagree: x {x.shape}, weight {weight.shape}, bias {bias.shape}"
        raise ShapeMismatch(msg)

    xd, wd = x.data, weight.data
    out = xd @ wd + bias.data
    active = out > 0.0 if activation == "relu" else None
    if active is not None:
        out = np.where(active, out, 0.0)

    def backward_fn(g: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        gz = g if active is None else g * active
        return gz @ wd.T, xd.T @ gz, gz.sum(axis=0)

    return _emit(tape, (x, weight, bias), out, backward_fn, "dense")


def dropout(
    x: Tensor,
    rate: float,
    training: bool = True,
    seed: int = 0,
    tape: Optional[Tape] = None,
) -> Tensor:
    """Inverted dropout.

    In training mode each element is zeroed with probability `rate` and survivors are
    scaled by ``1 / (1 - rate)``. The mask depends only on `seed`. Evaluation mode and
    ``rate == 0`` return `x` itself.

    Raises
    ------
    ValueError
        `rate` is outside ``[0, 1)``.
    """
    if not 0.0 <= rate < 1.0:
        msg = f"dropout rate must be in [0, 1), got {rate}"
        raise ValueError(msg)
    if not training or rate == 0.0:
        return x

    keep = np.random.default_rng(seed).random(x.shape) >= rate
    scale = keep / (1.0 - rate)
    return _emit(tape, (x,), x.data * scale, lambda g: (g * scale,), "dropout")


def softmax_cross_entropy(
    logits: Tensor, labels: np.ndarray, tape: Optional[Tape] = None
) -> Tuple[Tensor, Tensor]:
    """Mean negative log-likelihood of `labels` under ``softmax(logits)``.

    Parameters
    ----------
    logits: Tensor
        ``[B, C]``.
    labels: np.ndarray
        Class ids ``[B]``.

    Returns
    -------
    Tuple[Tensor, Tensor]
        The scalar loss and the probabilities ``[B, C]`` (no gradient).

    Raises
    ------
    LabelOutOfRange
        A label is negative or not below ``C``.
    ShapeMismatch
        `labels` does not have one entry per row.
    """
    _expect_ndim(logits, 2, "logits")
    batch, classes = logits.shape
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (batch,):
        msg = f"expected {batch} labels, got shape {labels.shape}"
        raise ShapeMismatch(msg)
    if batch and (labels.min() < 0 or labels.max() >= classes):
        msg = f"label outside [0, {classes})"
        raise LabelOutOfRange(msg)

    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    probs = np.exp(log_probs)
    rows = np.arange(batch)
    loss = -log_probs[rows, labels].mean()

    def backward_fn(g: np.ndarray) -> Tuple[np.ndarray]:
        grad = probs.copy()
        grad[rows, labels] -= 1.0
        return (grad * (float(g) / batch),)

    out = _emit(tape, (logits,), np.array(loss), backward_fn, "loss")
    return out, Tensor._wrap(probs, False, "probs")


# differentiation


def backward(tape: Tape, loss: Tensor) -> List[Tensor]:
    """Propagate gradients from `loss` to every leaf recorded on `tape`.

    Gradients are added to ``grad`` of each leaf with ``requires_grad`` set; leaves the
    loss does not depend on receive zeros. The tape is reset afterwards.

    Returns
    -------
    List[Tensor]
        The leaves, in first-use order.

    Raises
    ------
    NotScalarLoss
        `loss` has more than one element.
    DetachedTensor
        `loss` is not the output of an operation on `tape`.
    """
    if loss.size != 1:
        msg = f"loss must be a scalar, got shape {loss.shape}"
        raise NotScalarLoss(msg)

    produced = {id(node.output) for node in tape.nodes}
    if id(loss) not in produced:
        msg = "loss was not recorded on this tape"
        raise DetachedTensor(msg)

    leaves: Dict[int, Tensor] = {}
    for node in tape.nodes:
        for tensor in node.inputs:
            if tensor.requires_grad and id(tensor) not in produced:
                leaves.setdefault(id(tensor), tensor)

    grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(tape.nodes):
        upstream = grads.pop(id(node.output), None)
        if upstream is None:
            continue

        for tensor, grad in zip(node.inputs, node.backward(upstream)):
            if grad is None or not tensor.requires_grad:
                continue
            key = id(tensor)
            grads[key] = grad if key not in grads else grads[key] + grad

    for key, tensor in leaves.items():
        grad = grads.get(key)
        if grad is None:
            grad = np.zeros_like(tensor.data)
        tensor.grad = grad if tensor.grad is None else tensor.grad + grad

    logger.debug("backward over %d nodes reached %d leaves", len(tape), len(leaves))
    tape.reset()
    return list(leaves.values())


# optimizers


@dataclass
class OptimState:
    """Optimizer hyperparameters and per-parameter moments.

    Attributes
    ----------
    learning_rate: float
        Step size.
    beta1, beta2: float
        Decay of the first and second moment estimates.
    epsilon: float
        Denominator guard.
    step: int
        Number of updates applied so far.
    m, v: Dict[str, np.ndarray]
        First and second moments keyed by parameter name, created as zeros on first use.
    """

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def _paired(
    params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray]
) -> List[Tuple[str, Tensor, np.ndarray]]:
    if set(params) != set(grads):
        msg = "gradients must be given for exactly the optimized parameters"
        raise ShapeMismatch(msg)

    pairs = []
    for name, param in params.items():
        grad = np.asarray(grads[name], dtype=np.float64)
        if grad.shape != param.shape:
            msg = f"gradient of {name} has shape {grad.shape}, expected {param.shape}"
            raise ShapeMismatch(msg)
        pairs.append((name, param, grad))
    return pairs


def adam_step(
    params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray], state: OptimState
) -> OptimState:
    """Apply one bias-corrected Adam update in place.

    Raises
    ------
    ShapeMismatch
        A gradient is missing or has the wrong shape.
    NonFiniteValue
        The update produced NaN or infinity.
    """
    pairs = _paired(params, grads)
    state.step += 1
    correction1 = 1.0 - state.beta1**state.step
    correction2 = 1.0 - state.beta2**state.step
    for name, param, grad in pairs:
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None or v is None:
            m = np.zeros_like(param.data)
            v = np.zeros_like(param.data)
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad**2
        state.m[name], state.v[name] = m, v

        denom = np.sqrt(v / correction2) + state.epsilon
        update = state.learning_rate * (m / correction1) / denom
        param.data -= update
        _check_finite(param.data, name)
    return state


def sgd_step(
    params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray], state: OptimState
) -> OptimState:
    """Apply one plain gradient descent update in place."""
    pairs = _paired(params, grads)
    state.step += 1
    for name, param, grad in pairs:
        param.data -= state.learning_rate * grad
        _check_finite(param.data, name)
    return state


# checkpoints


def parameters_to_dict(
    params: Mapping[str, Tensor], metadata: Optional[Mapping[str, Any]] = None
) -> Dict[str, Any]:
    """Versioned JSON-ready document of named parameters, values in row-major order."""
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "parameters": {
            name: {"shape": list(tensor.shape), "values": tensor.data.reshape(-1).tolist()}
            for name, tensor in params.items()
        },
        "metadata": dict(metadata or {}),
    }


def parameters_from_dict(
    document: Mapping[str, Any],
    expected: Optional[Mapping[str, Tuple[int, ...]]] = None,
) -> Tuple[Dict[str, Tensor], Dict[str, Any]]:
    """Rebuild parameters from `parameters_to_dict` output.

    Parameters
    ----------
    document: Mapping[str, Any]
        The checkpoint document.
    expected: Optional[Mapping[str, Tuple[int, ...]]]
        Required names and shapes. When given, missing, extra or reshaped parameters
        are rejected.

    Returns
    -------
    Tuple[Dict[str, Tensor], Dict[str, Any]]
        Parameters with ``requires_grad`` set, and the metadata block.

    Raises
    ------
    CheckpointError
        Wrong format or version, malformed entries or a shape disagreement.
    """
    if document.get("format") != CHECKPOINT_FORMAT:
        msg = f"not a parameter checkpoint: format={document.get('format')!r}"
        raise CheckpointError(msg)
    if document.get("version") != CHECKPOINT_VERSION:
        msg = f"unsupported checkpoint version {document.get('version')!r}"
        raise CheckpointError(msg)

    params: Dict[str, Tensor] = {}
    for name, entry in document.get("parameters", {}).items():
        try:
            shape = tuple(int(n) for n in entry["shape"])
            values = np.asarray(entry["values"], dtype=np.float64)
            data = values.reshape(shape)
        except (KeyError, TypeError, ValueError) as e:
            msg = f"parameter {name!r} is malformed: {e}"
            raise CheckpointError(msg) from e
        params[name] = Tensor._wrap(data, True, name)

    if expected is not None:
        missing = sorted(set(expected) - set(params))
        extra = sorted(set(params) - set(expected))
        if missing or extra:
            msg = f"checkpoint parameters differ: missing {missing}, unexpected {extra}"
            raise CheckpointError(msg)
        for name, shape in expected.items():
            if params[name].shape != tuple(shape):
                found = params[name].shape
                msg = f"parameter {name!r} has shape {found}, expected {tuple(shape)}"
                raise CheckpointError(msg)

    return params, dict(document.get("metadata", {}))


def save_parameters(
    params: Mapping[str, Tensor], path: PathLike, metadata: Optional[Mapping[str, Any]] = None
) -> Path:
    return write_json(path, parameters_to_dict(params, metadata))


def load_parameters(
    path: PathLike, expected: Optional[Mapping[str, Tuple[int, ...]]] = None
) -> Tuple[Dict[str, Tensor], Dict[str, Any]]:
    try:
        document = read_json(path)
    except ValueError as e:
        msg = f"{path} is not valid JSON: {e}"
        raise CheckpointError(msg) from e
    return parameters_from_dict(document, expected)
