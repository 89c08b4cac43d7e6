import numpy as np

from claim_im.qnet import Architecture, StateRepr, bellman_targets, init_params, loss_and_grad
from claim_im.replay import Transition

TINY = Architecture(in_dim=4, hidden=5, clusters=3, fc_width=6, goal_scale=0.1)


def random_state(rng, n, dim=4, density=0.5):
    A = np.triu((rng.random((n, n)) < density).astype(float), 1)
    return StateRepr(rng.normal(size=(n, dim)), A + A.T)


def random_params(rng, arch=TINY, jitter=0.1):
    p = init_params(arch, rng)
    for k in p.arrays:
        p.arrays[k] = p.arrays[k] + rng.normal(0, jitter, p.arrays[k].shape)
    return p


def random_batch(rng, sizes=(3, 4, 5, 6), dim=4, terminal=True):
    batch = []
    for n in sizes:
        nxt = None if terminal else random_state(rng, n + 1, dim)
        batch.append(Transition(
            state=random_state(rng, n, dim), action_emb=rng.normal(size=dim),
            reward=float(rng.normal()), goal=float(rng.uniform(1, 10)), next_state=nxt,
            next_action_embs=np.zeros((0, dim)) if terminal else rng.normal(size=(2, dim)),
            terminal=terminal,
        ))
    return batch


def finite_difference_error(params, batch, targets, h=1e-5, floor=1e-8):
    """Largest elementwise relative error between analytic and central-difference gradients."""
    _, grads = loss_and_grad(params, batch, targets)
    worst = 0.0
    for name, arr in params.arrays.items():
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            lp, _ = loss_and_grad(params, batch, targets)
            arr[idx] = old - h
            lm, _ = loss_and_grad(params, batch, targets)
            arr[idx] = old
            num = (lp - lm) / (2 * h)
            ana = grads[name][idx]
            denom = max(abs(num), abs(ana), floor)
            worst = max(worst, abs(num - ana) / denom)
    return worst


def fd_check(seed=0):
    rng = np.random.default_rng(seed)
    params = random_params(rng)
    batch = random_batch(rng)
    targets = bellman_targets(params, batch, 1.0)
    return finite_difference_error(params, batch, targets)
