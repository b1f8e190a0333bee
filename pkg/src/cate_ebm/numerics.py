"""Numeric substrate: seeded RNG, random orthogonal matrices, a small MLP
with manual backpropagation, Adam, a finite-difference gradient checker and
column standardization.

Everything here is deterministic for a fixed seed: the RNG is PCG64, and
reductions keep a fixed summation order.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    DegenerateColumnError,
    DimensionError,
    TooFewSamplesError,
    TrainingDivergedError,
)


def make_rng(seed: int) -> np.random.Generator:
    """Seeded generator; identical seed gives an identical stream."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def random_orthogonal(k: int, rng: np.random.Generator) -> np.ndarray:
    """Random k-by-k orthogonal matrix.

    Draws a Gaussian matrix, symmetrizes it, and returns the eigenvector
    matrix of the symmetric part. Eigenvectors of a real symmetric matrix
    are real and orthonormal, so B @ B.T == I up to round-off.
    """
    if k < 1:
        raise DimensionError(f"orthogonal matrix dimension must be >= 1, got {k}")
    b0 = rng.standard_normal((k, k))
    sym = (b0 + b0.T) / 2.0
    _, vecs = np.linalg.eigh(sym)
    return vecs


class Mlp:
    """Fully connected net: ReLU hidden layers, identity output.

    Parameters are kept as a flat list [W0, b0, W1, b1, ...] with
    W of shape (fan_in, fan_out). Forward accepts a single vector or a
    batch matrix (n, d).
    """

    def __init__(self, widths, rng=None, weight_std=None):
        if len(widths) < 2:
            raise DimensionError("need at least input and output widths")
        self.widths = [int(w) for w in widths]
        self.params = []
        for fan_in, fan_out in zip(self.widths[:-1], self.widths[1:]):
            if rng is None:
                w = np.zeros((fan_in, fan_out))
            else:
                std = weight_std if weight_std is not None else 1.0 / np.sqrt(fan_in)
                w = rng.standard_normal((fan_in, fan_out)) * std
            self.params.append(w)
            self.params.append(np.zeros(fan_out))

    @property
    def in_dim(self):
        return self.widths[0]

    @property
    def out_dim(self):
        return self.widths[-1]

    def copy(self) -> "Mlp":
        clone = Mlp(self.widths)
        clone.params = [p.copy() for p in self.params]
        return clone

    def _check_input(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise DimensionError(
                f"input width {x.shape[-1]} does not match net input {self.in_dim}"
            )
        return x, single

    def forward(self, x):
        x, single = self._check_input(x)
        h = x
        n_layers = len(self.widths) - 1
        for layer in range(n_layers):
            w = self.params[2 * layer]
            b = self.params[2 * layer + 1]
            h = h @ w + b
            if layer < n_layers - 1:
                h = np.maximum(h, 0.0)
        return h[0] if single else h

    def forward_cache(self, x):
        """Forward pass keeping pre-activations for backward."""
        x, _ = self._check_input(x)
        h = x
        cache = [h]
        n_layers = len(self.widths) - 1
        for layer in range(n_layers):
            w = self.params[2 * layer]
            b = self.params[2 * layer + 1]
            z = h @ w + b
            if layer < n_layers - 1:
                h = np.maximum(z, 0.0)
            else:
                h = z
            cache.append(h)
        return h, cache

    def backward(self, cache, upstream):
        """Reverse-mode gradients of the forward map.

        upstream has the output shape (n, k). Returns (grads, input_grad)
        where grads mirrors self.params.
        """
        upstream = np.asarray(upstream, dtype=float)
        if upstream.ndim == 1:
            upstream = upstream[None, :]
        if upstream.shape != cache[-1].shape:
            raise DimensionError(
                f"upstream shape {upstream.shape} != output shape {cache[-1].shape}"
            )
        n_layers = len(self.widths) - 1
        grads = [None] * len(self.params)
        g = upstream
        for layer in range(n_layers - 1, -1, -1):
            h_in = cache[layer]
            if layer < n_layers - 1:
                # cache[layer + 1] holds relu(z); its sign pattern gates the gradient
                g = g * (cache[layer + 1] > 0.0)
            w = self.params[2 * layer]
            grads[2 * layer] = h_in.T @ g
            grads[2 * layer + 1] = g.sum(axis=0)
            g = g @ w.T
        return grads, g

    def zero_like_params(self):
        return [np.zeros_like(p) for p in self.params]


class Adam:
    """Adam with bias correction over a list of parameter arrays."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        for g in grads:
            if not np.all(np.isfinite(g)):
                raise TrainingDivergedError("non-finite gradient in Adam step")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def grad_check(loss_fn, params, h=1e-5, max_entries=10_000, seed=0):
    """Max relative error between analytic and central-difference gradients.

    loss_fn(params) must return (loss, grads). Above max_entries parameters
    a seeded subsample of entries is checked.
    """
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    _, grads = loss_fn(params)
    flat = []
    for i, p in enumerate(params):
        for j in range(p.size):
            flat.append((i, j))
    if len(flat) > max_entries:
        rng = make_rng(seed)
        idx = rng.choice(len(flat), size=max_entries, replace=False)
        flat = [flat[i] for i in sorted(idx)]
    worst = 0.0
    for i, j in flat:
        p = params[i]
        orig = p.flat[j]
        p.flat[j] = orig + h
        lo_plus, _ = loss_fn(params)
        p.flat[j] = orig - h
        lo_minus, _ = loss_fn(params)
        p.flat[j] = orig
        numeric = (lo_plus - lo_minus) / (2.0 * h)
        analytic = grads[i].flat[j]
        scale = max(abs(numeric), abs(analytic), 1e-8)
        worst = max(worst, abs(numeric - analytic) / scale)
    return worst


def standardize_columns(m: np.ndarray):
    """Center and scale every column to mean 0, population variance 1.

    Returns (standardized, means, stds). Raises DegenerateColumnError naming
    the first zero-variance column.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2:
        raise DimensionError("expected a 2-d matrix")
    if m.shape[0] < 2:
        raise TooFewSamplesError("standardization needs at least 2 rows")
    means = m.mean(axis=0)
    stds = m.std(axis=0)  # population convention, divisor n
    for j, s in enumerate(stds):
        if s == 0.0:
            raise DegenerateColumnError(j)
    return (m - means) / stds, means, stds
