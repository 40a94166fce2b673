"""Miniature differentiable supernet on synthetic two-class blob data.

The cell is a DAG: node 0 is the input, each intermediate node averages the
mixed-op edges from all predecessors (averaging keeps feature scale, and so
trainability, comparable across architectures), and a linear classifier
reads the concatenation of all intermediate nodes. Every edge mixes its
candidate operations with softmax(alpha_edge) weights. Losses use sum (not
mean) reduction over the batch so duplicating a row exactly doubles the
gradient.

Candidate operations, in canonical order: identity, zero, linear (trainable
matrix), tanh-linear (trainable). `ops_per_edge` keeps the first k of these.
Node features carry the 2-D input plus a constant channel, so the trainable
matrices can express affine maps (without it every node is an odd function
of the input and the even blob labels are unlearnable by construction).
"""

from __future__ import annotations

import math

import numpy as np

from ..rng import (
    STREAM_DATA_SHUFFLE,
    STREAM_DATA_TRAIN,
    STREAM_DATA_VAL,
    rng_split,
)
from ..types import InnerState
from .base import BilevelProblem

OP_NAMES = ("identity", "zero", "linear", "tanh_linear")

# Two clusters per class at opposite corners: not linearly separable, so the
# architecture choice (tanh vs identity/zero paths) matters.
_BLOB_SEP = 1.2
_BLOB_STD = 0.5
_N_CLASSES = 2
_FEATURE_DIM = 2


def _make_blobs(rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
    if n % 4 != 0:
        raise ValueError("split size must be divisible by 4 (four clusters)")
    s = _BLOB_SEP
    centers = np.array([[s, s], [-s, -s], [s, -s], [-s, s]])
    labels = np.array([0, 0, 1, 1])
    per = n // 4
    xs, ys = [], []
    for c in range(4):
        xs.append(centers[c] + _BLOB_STD * rng.standard_normal((per, 2)))
        ys.append(np.full(per, labels[c], dtype=np.int64))
    return np.concatenate(xs), np.concatenate(ys)


def softmax_rows(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


class ToySupernet(BilevelProblem):
    def __init__(
        self,
        nodes: int = 4,
        ops_per_edge: int = 4,
        data_seed: int = 0,
        n_train: int = 256,
        n_val: int = 256,
        batch_size: int = 0,
    ):
        if nodes < 1:
            raise ValueError("need at least one intermediate node")
        if not 2 <= ops_per_edge <= len(OP_NAMES):
            raise ValueError(f"ops_per_edge must be in [2, {len(OP_NAMES)}]")
        self.nodes = nodes
        self.ops = OP_NAMES[:ops_per_edge]
        self.h = _FEATURE_DIM + 1  # input plus constant channel
        self.n_classes = _N_CLASSES
        self.edges = [(i, j) for j in range(1, nodes + 1) for i in range(j)]
        self.batch_size = batch_size

        # Flat omega layout: per edge, one h*h block per parametric op, then
        # the classifier matrix (nodes*h x classes).
        self._slots: dict[tuple[int, str], tuple[int, int]] = {}
        offset = 0
        for e in range(len(self.edges)):
            for op in self.ops:
                if op in ("linear", "tanh_linear"):
                    self._slots[(e, op)] = (offset, offset + self.h * self.h)
                    offset += self.h * self.h
        self._clf_slot = (offset, offset + nodes * self.h * self.n_classes)
        self._d_omega = self._clf_slot[1]

        self.data_seed = data_seed
        self.x_train, self.y_train = _make_blobs(rng_split(data_seed, STREAM_DATA_TRAIN), n_train)
        self.x_val, self.y_val = _make_blobs(rng_split(data_seed, STREAM_DATA_VAL), n_val)
        self.train_indices = np.arange(n_train)
        self.val_indices = np.arange(n_train, n_train + n_val)
        if batch_size > 0:
            perm = rng_split(data_seed, STREAM_DATA_SHUFFLE).permutation(n_train)
            self._batches = [perm[i : i + batch_size] for i in range(0, n_train, batch_size)]
        else:
            self._batches = []

    # -- layout helpers -------------------------------------------------

    @property
    def d_alpha(self) -> int:
        return len(self.edges) * len(self.ops)

    @property
    def d_omega(self) -> int:
        return self._d_omega

    def _matrix(self, omega: np.ndarray, e: int, op: str) -> np.ndarray:
        lo, hi = self._slots[(e, op)]
        return omega[lo:hi].reshape(self.h, self.h)

    def _classifier(self, omega: np.ndarray) -> np.ndarray:
        lo, hi = self._clf_slot
        return omega[lo:hi].reshape(self.nodes * self.h, self.n_classes)

    def _check_shapes(self, omega, alpha, x, y):
        if omega.shape != (self.d_omega,):
            raise ValueError(f"omega must have shape ({self.d_omega},), got {omega.shape}")
        if alpha.shape != (self.d_alpha,):
            raise ValueError(f"alpha must have shape ({self.d_alpha},), got {alpha.shape}")
        if x.ndim != 2 or x.shape[1] != _FEATURE_DIM:
            raise ValueError(f"batch features must have shape (n, {_FEATURE_DIM})")
        if y.shape != (x.shape[0],):
            raise ValueError("labels must match the batch size")

    def mixture_weights(self, alpha: np.ndarray) -> np.ndarray:
        return softmax_rows(np.asarray(alpha, dtype=np.float64).reshape(len(self.edges), len(self.ops)))

    # -- forward / backward ---------------------------------------------

    def forward(self, omega, alpha, x, y):
        """Return (sum cross-entropy loss, per-edge mixture weights)."""
        loss, mix, _ = self._forward_full(np.asarray(omega, float), np.asarray(alpha, float),
                                          np.asarray(x, float), np.asarray(y))
        return loss, mix

    def _forward_full(self, omega, alpha, x, y):
        self._check_shapes(omega, alpha, x, y)
        mix = self.mixture_weights(alpha)
        x0 = np.concatenate([x, np.ones((x.shape[0], 1))], axis=1)
        values = [x0]
        op_outs: list[list[np.ndarray]] = []
        e = 0
        for j in range(1, self.nodes + 1):
            acc = np.zeros((x.shape[0], self.h))
            for i in range(j):
                x_in = values[i]
                outs = []
                for o, op in enumerate(self.ops):
                    if op == "identity":
                        out = x_in
                    elif op == "zero":
                        out = np.zeros_like(x_in)
                    elif op == "linear":
                        out = x_in @ self._matrix(omega, e, op)
                    else:  # tanh_linear
                        out = np.tanh(x_in @ self._matrix(omega, e, op))
                    outs.append(out)
                    acc = acc + mix[e, o] * out
                op_outs.append(outs)
                e += 1
            values.append(acc / j)
        feats = np.concatenate(values[1:], axis=1)
        logits = feats @ self._classifier(omega)
        zmax = logits.max(axis=1, keepdims=True)
        lse = zmax[:, 0] + np.log(np.exp(logits - zmax).sum(axis=1))
        loss = float(np.sum(lse - logits[np.arange(x.shape[0]), y]))
        cache = (values, op_outs, feats, logits, lse, mix)
        return loss, mix, cache

    def backward(self, omega, alpha, x, y):
        """Analytic gradients of the sum cross-entropy w.r.t. omega and alpha."""
        omega = np.asarray(omega, float)
        alpha = np.asarray(alpha, float)
        x = np.asarray(x, float)
        y = np.asarray(y)
        _, mix, cache = self._forward_full(omega, alpha, x, y)
        values, op_outs, feats, logits, lse, mix = cache
        n = x.shape[0]

        dlogits = np.exp(logits - lse[:, None])
        dlogits[np.arange(n), y] -= 1.0

        grad_omega = np.zeros(self.d_omega)
        lo, hi = self._clf_slot
        clf = self._classifier(omega)
        grad_omega[lo:hi] = (feats.T @ dlogits).ravel()
        dfeats = dlogits @ clf.T

        dnodes = [np.zeros((n, self.h)) for _ in range(self.nodes + 1)]
        for j in range(1, self.nodes + 1):
            dnodes[j] += dfeats[:, (j - 1) * self.h : j * self.h]

        grad_alpha = np.zeros((len(self.edges), len(self.ops)))
        for j in range(self.nodes, 0, -1):
            g = dnodes[j] / j  # node value is the mean over j incoming edges
            base = j * (j - 1) // 2
            for i in range(j):
                e = base + i
                x_in = values[i]
                douts = np.zeros(len(self.ops))
                for o, op in enumerate(self.ops):
                    out = op_outs[e][o]
                    douts[o] = float(np.sum(g * out))
                    wg = mix[e, o] * g
                    if op == "identity":
                        dnodes[i] += wg
                    elif op == "zero":
                        pass
                    elif op == "linear":
                        w_mat = self._matrix(omega, e, op)
                        s, t = self._slots[(e, op)]
                        grad_omega[s:t] += (x_in.T @ wg).ravel()
                        dnodes[i] += wg @ w_mat.T
                    else:  # tanh_linear
                        v_mat = self._matrix(omega, e, op)
                        dpre = wg * (1.0 - out * out)
                        s, t = self._slots[(e, op)]
                        grad_omega[s:t] += (x_in.T @ dpre).ravel()
                        dnodes[i] += dpre @ v_mat.T
                # softmax backward per edge
                grad_alpha[e] = mix[e] * (douts - float(np.dot(mix[e], douts)))
        return grad_omega, grad_alpha.ravel()

    # -- BilevelProblem interface ----------------------------------------

    def train_loss(self, omega, alpha) -> float:
        loss, _ = self.forward(omega, alpha, self.x_train, self.y_train)
        return loss

    def val_loss(self, omega, alpha) -> float:
        loss, _ = self.forward(omega, alpha, self.x_val, self.y_val)
        return loss

    def _train_batch(self, step: int | None) -> tuple[np.ndarray, np.ndarray]:
        if self.batch_size <= 0 or step is None:
            return self.x_train, self.y_train
        idx = self._batches[step % len(self._batches)]
        return self.x_train[idx], self.y_train[idx]

    def grad_omega_train(self, omega, alpha, step=None) -> np.ndarray:
        x, y = self._train_batch(step)
        g, _ = self.backward(omega, alpha, x, y)
        return g

    def grad_alpha_train(self, omega, alpha) -> np.ndarray:
        _, g = self.backward(omega, alpha, self.x_train, self.y_train)
        return g

    def grad_omega_val(self, omega, alpha) -> np.ndarray:
        g, _ = self.backward(omega, alpha, self.x_val, self.y_val)
        return g

    def grad_alpha_val(self, omega, alpha) -> np.ndarray:
        _, g = self.backward(omega, alpha, self.x_val, self.y_val)
        return g

    def init_inner_state(self, rng: np.random.Generator) -> InnerState:
        omega = np.zeros(self.d_omega)
        # 0.5/sqrt(h) keeps the spectral norm of random matrices near 1 so
        # deep linear chains do not amplify features.
        scale = 0.5 / np.sqrt(self.h)
        for (e, op), (lo, hi) in self._slots.items():
            omega[lo:hi] = scale * rng.standard_normal(hi - lo)
        lo, hi = self._clf_slot
        omega[lo:hi] = 0.1 * rng.standard_normal(hi - lo)
        return InnerState.fresh(omega)

    def initial_alpha(self, rng: np.random.Generator) -> np.ndarray:
        # Uniform mixtures, matching the usual all-equal initialization.
        return np.zeros(self.d_alpha)


def discretized_alpha(problem: ToySupernet, alpha: np.ndarray, spike: float = 60.0) -> np.ndarray:
    """One-hot architecture: spike the per-edge argmax so softmax saturates."""
    mat = np.asarray(alpha, float).reshape(len(problem.edges), len(problem.ops))
    out = np.zeros_like(mat)
    out[np.arange(mat.shape[0]), mat.argmax(axis=1)] = spike
    return out.ravel()


def random_alpha(problem: ToySupernet, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal(problem.d_alpha)


def evaluate_architecture(
    problem: ToySupernet,
    alpha: np.ndarray,
    steps: int = 300,
    lr: float = 2e-3,
    momentum: float = 0.9,
    seed: int = 0,
) -> float:
    """Validation loss of an architecture after training fresh weights.

    Architectures whose training diverges score +inf: failing to train is a
    property of the architecture under this protocol, not an error.
    """
    from ..inner import InnerSolveError, advance_inner

    alpha = np.asarray(alpha, float)
    state = problem.init_inner_state(rng_split(seed, STREAM_DATA_SHUFFLE + 100))
    try:
        advance_inner(problem, state, alpha, steps, lr, momentum)
    except InnerSolveError:
        return math.inf
    loss = problem.val_loss(state.omega, alpha)
    return loss if np.isfinite(loss) else math.inf
