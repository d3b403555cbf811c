import numpy as np
import pytest

from mplexnet import diffcore as dc
from mplexnet.mplexgraph import MultiplexGraph


def random_multiplex(rng, p=None, k=None, edge_prob=0.4):
    """Random symmetric binary planes with zero diagonal."""
    p = p if p is not None else int(rng.integers(2, 7))
    k = k if k is not None else int(rng.integers(1, 4))
    planes = []
    for _ in range(k):
        upper = np.triu(rng.random((p, p)) < edge_prob, k=1).astype(float)
        planes.append(upper + upper.T)
    return MultiplexGraph(planes)


def enumerate_walks(adj, control, length, start, end):
    """Count length-L two-phase walks by explicit recursion.

    One step from supra-node a: an intra-planar move a -> b with
    adj[a, b] >= 1 (counted with multiplicity) followed by a plane
    switch-or-stay b -> c with control[b, c] >= 1.
    """
    adj = np.asarray(adj.todense() if hasattr(adj, "todense") else adj)
    control = np.asarray(
        control.todense() if hasattr(control, "todense") else control
    )
    n = adj.shape[0]

    def count(node, remaining):
        if remaining == 0:
            return 1 if node == end else 0
        total = 0
        for b in range(n):
            if adj[node, b] >= 1:
                for c in range(n):
                    if control[b, c] >= 1:
                        total += int(adj[node, b]) * int(control[b, c]) * count(
                            c, remaining - 1
                        )
        return total

    return count(start, length)


def numeric_grad(loss_fn, param, h=1e-5):
    """Central-difference gradient of a scalar function wrt one Tensor."""
    grad = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        hi = float(loss_fn().data)
        flat[i] = orig - h
        lo = float(loss_fn().data)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * h)
    return grad


def numeric_grad_entry(loss_fn, param, i, h=1e-5):
    flat = param.data.reshape(-1)
    orig = flat[i]
    flat[i] = orig + h
    hi = float(loss_fn().data)
    flat[i] = orig - h
    lo = float(loss_fn().data)
    flat[i] = orig
    return (hi - lo) / (2.0 * h)


def _rel_err(a, b, atol=1e-6):
    return abs(a - b) / max(abs(a), abs(b), atol)


def check_grads(loss_fn, params, h=1e-5, rtol=1e-4):
    """Compare autodiff grads against full central differences."""
    items = params.items() if isinstance(params, dict) else enumerate(params)
    items = list(items)
    loss = loss_fn()
    for _, p in items:
        p.zero_grad()
    dc.backward(loss)
    for name, p in items:
        num = numeric_grad(loss_fn, p, h)
        got = p.grad if p.grad is not None else np.zeros_like(p.data)
        for i in range(num.size):
            rel = _rel_err(num.reshape(-1)[i], got.reshape(-1)[i])
            assert rel < rtol, f"gradient mismatch for {name}[{i}]: rel err {rel}"


def check_grad_entries(loss_fn, params, entries, h=1e-5, rtol=1e-4):
    """Spot-check sampled (param, flat index) pairs against central differences."""
    items = params.items() if isinstance(params, dict) else enumerate(params)
    items = list(items)
    loss = loss_fn()
    for _, p in items:
        p.zero_grad()
    dc.backward(loss)
    by_name = dict(items)
    for name, i in entries:
        p = by_name[name]
        num = numeric_grad_entry(loss_fn, p, i, h)
        got = 0.0 if p.grad is None else float(p.grad.reshape(-1)[i])
        rel = _rel_err(num, got)
        assert rel < rtol, f"gradient mismatch for {name}[{i}]: rel err {rel}"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
