"""Order-blind reference classifier for ablations.

Features are the mean over frames and regions of both streams; a softmax
regression is fit on them by full-batch gradient descent.
"""
from __future__ import annotations

import numpy as np


def mean_pool_features(samples) -> np.ndarray:
    return np.stack([
        np.concatenate([s.cubes_p.mean(axis=(0, 1)), s.cubes_q.mean(axis=(0, 1))])
        for s in samples
    ])


class MeanPoolClassifier:
    def __init__(self, n_classes: int, l2: float = 1e-3, steps: int = 2000, lr: float = 0.5):
        self.n_classes = n_classes
        self.l2 = l2
        self.steps = steps
        self.lr = lr

    def fit(self, samples) -> "MeanPoolClassifier":
        X = mean_pool_features(samples)
        y = np.array([s.label for s in samples])
        self.mu = X.mean(axis=0)
        self.sd = X.std(axis=0) + 1e-12
        Z = (X - self.mu) / self.sd
        n, d = Z.shape
        self.W = np.zeros((d, self.n_classes))
        self.b = np.zeros(self.n_classes)
        Y = np.eye(self.n_classes)[y]
        for _ in range(self.steps):
            logits = Z @ self.W + self.b
            logits -= logits.max(axis=1, keepdims=True)
            P = np.exp(logits)
            P /= P.sum(axis=1, keepdims=True)
            G = (P - Y) / n
            self.W -= self.lr * (Z.T @ G + self.l2 * self.W)
            self.b -= self.lr * G.sum(axis=0)
        return self

    def predict(self, samples) -> np.ndarray:
        Z = (mean_pool_features(samples) - self.mu) / self.sd
        return np.argmax(Z @ self.W + self.b, axis=1)

    def accuracy(self, samples) -> float:
        y = np.array([s.label for s in samples])
        return float(np.mean(self.predict(samples) == y))
