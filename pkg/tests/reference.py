"""Dense masked reference MLP: the literal "mask the full matrix after every update" procedure.

Written independently of sparsenet.network and used as its oracle.
"""

import numpy as np


def logistic(z):
    return 1.0 / (1.0 + np.exp(-z))


class DenseMaskedNet:
    def __init__(self, weights, biases, masks, lr, momentum, dropout=None):
        self.W = [np.array(w, dtype=float) * m for w, m in zip(weights, masks)]
        self.b = [np.array(b, dtype=float) for b in biases]
        self.masks = [np.asarray(m, dtype=float) for m in masks]
        self.vW = [np.zeros_like(w) for w in self.W]
        self.vb = [np.zeros_like(b) for b in self.b]
        self.lr, self.mu = lr, momentum
        self.dropout = dropout

    @classmethod
    def from_network(cls, net):
        cfg = net.config
        return cls(
            [l.weights.to_dense() for l in net.layers],
            [l.bias for l in net.layers],
            [l.weights.mask() for l in net.layers],
            cfg.learning_rate,
            cfg.momentum,
            cfg.dropout_rates,
        )

    def forward(self, X, W=None, b=None, rng=None):
        W = self.W if W is None else W
        b = self.b if b is None else b
        acts, ins, scales = [X], [], []
        a = X
        for l in range(len(W)):
            s = None
            if self.dropout is not None and rng is not None and self.dropout[l] > 0:
                s = (rng.random(a.shape) >= self.dropout[l]) / (1.0 - self.dropout[l])
                a = a * s
            ins.append(a)
            scales.append(s)
            a = logistic(W[l] @ a + b[l][:, None])
            acts.append(a)
        return acts, ins, scales

    def grads(self, X, Y, W, b, rng=None):
        acts, ins, scales = self.forward(X, W, b, rng)
        out = acts[-1]
        loss = np.mean((out - Y) ** 2)
        delta = 2.0 * (out - Y) / out.size * out * (1 - out)
        gW, gb = [None] * len(W), [None] * len(W)
        for l in reversed(range(len(W))):
            gW[l] = (delta @ ins[l].T) * self.masks[l]
            gb[l] = delta.sum(axis=1)
            if l:
                back = W[l].T @ delta
                if scales[l] is not None:
                    back = back * scales[l]
                delta = back * acts[l] * (1 - acts[l])
        return loss, gW, gb

    def step(self, X, Y, rng=None):
        W_look = [(w + self.mu * v) * m for w, v, m in zip(self.W, self.vW, self.masks)]
        b_look = [bb + self.mu * v for bb, v in zip(self.b, self.vb)]
        loss, gW, gb = self.grads(X, Y, W_look, b_look, rng)
        for l in range(len(self.W)):
            self.vW[l] = self.mu * self.vW[l] - self.lr * gW[l]
            self.vb[l] = self.mu * self.vb[l] - self.lr * gb[l]
            self.W[l] = (self.W[l] + self.vW[l]) * self.masks[l]
            self.b[l] = self.b[l] + self.vb[l]
        return loss

    def train_epochs(self, features, labels, classes, epochs, batch, seed):
        """Same shuffling contract as the library: SeedSequence([seed, epoch]) spawns (shuffle, dropout)."""
        n = len(labels)
        Y = np.eye(classes)[labels].T
        losses = []
        for e in range(1, epochs + 1):
            sh, dr = np.random.SeedSequence([seed, e]).spawn(2)
            order = np.random.Generator(np.random.PCG64(sh)).permutation(n)
            drop = np.random.Generator(np.random.PCG64(dr))
            total = 0.0
            for s in range(0, n, batch):
                idx = order[s : s + batch]
                total += self.step(features[idx].T, Y[:, idx], drop) * idx.size
            losses.append(total / n)
        return losses
