"""Minimal dense-network machinery: tanh MLP with hand-written backprop,
Adam, and a running observation normalizer.

Kept deliberately small and framework-free: the fixed MLP topology used by
the trainer only needs matrix products, so explicit forward caches and
backward passes are simpler to keep bitwise-deterministic than a general
autograd, and the finite-difference tests guard the gradients.
"""

from __future__ import annotations

import numpy as np


class MLP:
    """Fully connected net, tanh hidden activations, linear output.

    Weights W[i] are (out, in); forward computes x @ W.T + b per layer.
    """

    def __init__(self, sizes: list[int], rng: np.random.Generator | None = None):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        self.sizes = list(sizes)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        rng = rng or np.random.default_rng()
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            # Xavier-ish scaling keeps tanh preactivations in range.
            scale = np.sqrt(2.0 / (n_in + n_out))
            self.weights.append(rng.normal(0.0, scale, size=(n_out, n_in)))
            self.biases.append(np.zeros(n_out))

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Returns (output, activation cache). x is (N, in)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        cache = [x]
        h = x
        last = self.num_layers - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w.T + b
            h = z if i == last else np.tanh(z)
            cache.append(h)
        return h, cache

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache: list[np.ndarray], grad_out: np.ndarray) -> list[np.ndarray]:
        """Gradients of a scalar loss wrt parameters, given dL/d(output).

        Returns a flat list [dW0, db0, dW1, db1, ...]; also exposes dL/dx on
        self.last_input_grad for callers that need it.
        """
        grads: list[np.ndarray] = []
        delta = np.atleast_2d(np.asarray(grad_out, dtype=float))
        last = self.num_layers - 1
        per_layer = []
        for i in range(last, -1, -1):
            h_prev = cache[i]
            if i != last:
                delta = delta * (1.0 - cache[i + 1] ** 2)  # tanh'
            dw = delta.T @ h_prev
            db = delta.sum(axis=0)
            per_layer.append((dw, db))
            delta = delta @ self.weights[i]
        self.last_input_grad = delta
        for dw, db in reversed(per_layer):
            grads.extend([dw, db])
        return grads

    # -- parameter plumbing ------------------------------------------------
    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def set_parameters(self, params: list[np.ndarray]) -> None:
        it = iter(params)
        for i in range(self.num_layers):
            self.weights[i] = np.asarray(next(it), dtype=float).reshape(self.weights[i].shape)
            self.biases[i] = np.asarray(next(it), dtype=float).reshape(self.biases[i].shape)

    def flat_parameters(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def set_flat_parameters(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=float)
        out, i = [], 0
        for p in self.parameters():
            out.append(flat[i : i + p.size].reshape(p.shape))
            i += p.size
        if i != flat.size:
            raise ValueError("parameter vector size mismatch")
        self.set_parameters(out)


def flatten_grads(grads: list[np.ndarray]) -> np.ndarray:
    return np.concatenate([g.ravel() for g in grads])


class Adam:
    def __init__(self, num_params: int, lr: float = 3e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros(num_params)
        self.v = np.zeros(num_params)
        self.t = 0

    def step(self, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grads
        self.v = self.beta2 * self.v + (1 - self.beta2) * grads**2
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def state_dict(self) -> dict:
        return {"m": self.m, "v": self.v, "t": self.t, "lr": self.lr,
                "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps}

    def load_state_dict(self, d: dict) -> None:
        self.m = np.asarray(d["m"], dtype=float)
        self.v = np.asarray(d["v"], dtype=float)
        self.t = int(d["t"])
        self.lr = float(d["lr"])
        self.beta1, self.beta2, self.eps = float(d["beta1"]), float(d["beta2"]), float(d["eps"])


class RunningNorm:
    """Streaming mean/variance (Welford over batches) for observation
    whitening; statistics freeze into checkpoints."""

    def __init__(self, dim: int, clip: float = 10.0):
        self.mean = np.zeros(dim)
        self.var = np.ones(dim)
        self.count = 1e-4
        self.clip = clip

    def update(self, batch: np.ndarray) -> None:
        batch = np.atleast_2d(np.asarray(batch, dtype=float))
        b_mean = batch.mean(axis=0)
        b_var = batch.var(axis=0)
        b_count = batch.shape[0]
        delta = b_mean - self.mean
        total = self.count + b_count
        self.mean = self.mean + delta * b_count / total
        m_a = self.var * self.count
        m_b = b_var * b_count
        self.var = (m_a + m_b + delta**2 * self.count * b_count / total) / total
        self.count = total

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return np.clip(
            (np.asarray(x, dtype=float) - self.mean) / np.sqrt(self.var + 1e-8),
            -self.clip,
            self.clip,
        )

    def state_dict(self) -> dict:
        return {"mean": self.mean, "var": self.var, "count": self.count, "clip": self.clip}

    def load_state_dict(self, d: dict) -> None:
        self.mean = np.asarray(d["mean"], dtype=float)
        self.var = np.asarray(d["var"], dtype=float)
        self.count = float(d["count"])
        self.clip = float(d["clip"])
