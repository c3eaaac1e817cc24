"""Shared generators and independent oracles for the test suite."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from persuade.game import GameInstance, ex_ante_utilities_batch
from persuade.rng import substream


def random_game(n, states, signals, actions, rng, scale=1.0) -> GameInstance:
    return GameInstance(
        n_senders=n,
        states=states,
        signals=signals,
        actions=actions,
        prior=rng.dirichlet(np.ones(states)),
        receiver_utility=rng.normal(0.0, scale, (states, actions)),
        sender_utilities=tuple(rng.normal(0.0, scale, (states, actions)) for _ in range(n)),
    )


def random_profile(game: GameInstance, rng) -> np.ndarray:
    return rng.dirichlet(np.ones(game.signals), size=(game.n_senders, game.states))


def unique_optimum_game(seed, n_choices=(2, 3), dim_cap=4, scale=1.0) -> GameInstance:
    """Seeded random game with a unique receiver optimum per state and
    enough signal codewords for the revealing construction."""
    rng = substream(seed, "unique-optimum-game")
    while True:
        n = int(rng.choice(n_choices))
        states = int(rng.integers(2, dim_cap + 1))
        signals = int(rng.integers(2, dim_cap + 1))
        actions = int(rng.integers(2, dim_cap + 1))
        g = random_game(n, states, signals, actions, rng, scale)
        V = g.receiver_utility
        gaps = np.sort(V, axis=1)
        if np.any(gaps[:, -1] - gaps[:, -2] < 1e-6):
            continue
        used = len(set(int(a) for a in V.argmax(axis=1)))
        if signals ** (n - 1) >= used:
            return g


def grid_best_response(game: GameInstance, sender, others, tie, step=0.01, chunk=20000):
    """Brute-force oracle: best true utility of `sender` over a grid of its
    policies at the given step (binary signal alphabets only)."""
    assert game.signals == 2, "grid oracle enumerates the 2-signal simplex product"
    ticks = np.round(np.arange(0.0, 1.0 + step / 2, step), 10)
    grids = np.meshgrid(*[ticks] * game.states, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    pol = np.zeros((pts.shape[0], game.states, 2))
    pol[:, :, 0] = pts
    pol[:, :, 1] = 1.0 - pts
    profiles = np.zeros((pts.shape[0], game.n_senders, game.states, game.signals))
    k = 0
    for j in range(game.n_senders):
        if j == sender:
            profiles[:, j] = pol
        else:
            profiles[:, j] = others[k][None]
            k += 1
    best = -np.inf
    for i in range(0, pts.shape[0], chunk):
        best = max(best, float(ex_ante_utilities_batch(game, profiles[i : i + chunk], tie)[:, sender].max()))
    return best


def enumerate_basic_optima(c, A_ub, b_ub):
    """Vertex-enumeration LP oracle for max c@x, A_ub x <= b_ub, x >= 0.

    Enumerates all basic solutions of the slack-extended system and keeps
    the feasible ones; returns the best objective or None if infeasible.
    """
    c = np.asarray(c, float)
    A = np.asarray(A_ub, float)
    b = np.asarray(b_ub, float)
    m, n = A.shape
    full = np.hstack([A, np.eye(m)])
    best = None
    for cols in itertools.combinations(range(n + m), m):
        B = full[:, cols]
        try:
            xb = np.linalg.solve(B, b)
        except np.linalg.LinAlgError:
            continue
        if np.any(xb < -1e-9):
            continue
        x = np.zeros(n + m)
        x[list(cols)] = xb
        if np.any(A @ x[:n] - b > 1e-9):
            continue
        val = float(c @ x[:n])
        if best is None or val > best:
            best = val
    return best


def support_enumeration_2x2(u1, u2):
    """All Nash equilibria of a 2x2 bimatrix game (row maximizes u1).

    Returns a list of (x, y) mixed strategies; degenerate games return the
    pure equilibria plus the interior mixed point when it exists.
    """
    u1 = np.asarray(u1, float)
    u2 = np.asarray(u2, float)
    out = []
    for i, j in itertools.product(range(2), range(2)):
        if u1[i, j] >= u1[1 - i, j] and u2[i, j] >= u2[i, 1 - j]:
            x = np.eye(2)[i]
            y = np.eye(2)[j]
            out.append((x, y))
    # interior mixed: each player mixes to make the other indifferent
    d2 = (u2[0, 0] - u2[0, 1]) + (u2[1, 1] - u2[1, 0])
    d1 = (u1[0, 0] - u1[1, 0]) + (u1[1, 1] - u1[0, 1])
    if abs(d2) > 1e-12 and abs(d1) > 1e-12:
        p = (u2[1, 1] - u2[1, 0]) / d2          # row player's weight on row 0
        q = (u1[1, 1] - u1[0, 1]) / d1          # column player's weight on col 0
        if 1e-9 < p < 1 - 1e-9 and 1e-9 < q < 1 - 1e-9:
            out.append((np.array([p, 1 - p]), np.array([q, 1 - q])))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
