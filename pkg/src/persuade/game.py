"""Exact representation and evaluation of multi-sender persuasion games.

A game has a finite state space, one receiver with a utility matrix over
(state, action), and n senders who each commit to a row-stochastic
signaling policy (states x signals).  The receiver sees the joint signal,
forms the Bayes posterior, and takes an expected-utility-maximizing
action, with a deterministic tie-breaking rule.  Everything here is an
exact sum over states and joint signals; nothing is sampled except
:func:`sample_playthrough`.

Joint signals are tuples ``(s_1, ..., s_n)`` of per-sender signal indices
and are flattened to a single index with sender 0 most significant:
``index = s_1 * S^(n-1) + ... + s_n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TIE_TOL = 1e-9

# exact enumeration guard: |states| * |signals|^n terms
DEFAULT_TERM_CAP = 10**7


class CapError(ValueError):
    """An exact enumeration would exceed the configured term cap."""


# ---------------------------------------------------------------------------
# tie-breaking rules


@dataclass(frozen=True)
class Lexicographic:
    """Among receiver-optimal actions, pick the lowest index."""


@dataclass(frozen=True)
class SenderFavoring:
    """Among receiver-optimal actions, favor the senders.

    Tied actions are scored by the weighted sum of expected sender
    utilities under the posterior (default weights 1).  Actions still tied
    on that score are ranked by the posterior probability that they are
    ex-post optimal for the receiver; the final fallback is the lowest
    index.  The secondary rank is what makes the rule total on games whose
    senders care about disjoint actions.
    """

    weights: tuple[float, ...] | None = None


@dataclass(frozen=True)
class FixedMap:
    """A committed joint-signal -> action table, bypassing posteriors.

    ``table[k]`` is the action for the joint signal with flat index ``k``
    (sender 0 most significant).
    """

    table: tuple[int, ...]


TieRule = Lexicographic | SenderFavoring | FixedMap


# ---------------------------------------------------------------------------
# core data types


@dataclass(frozen=True)
class GameInstance:
    """A multi-sender persuasion game with identical per-sender signal alphabets."""

    n_senders: int
    states: int
    signals: int
    actions: int
    prior: np.ndarray                 # (states,)
    receiver_utility: np.ndarray      # (states, actions)
    sender_utilities: tuple           # n arrays, each (states, actions)
    meta: dict | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "prior", np.asarray(self.prior, dtype=float))
        object.__setattr__(self, "receiver_utility", np.asarray(self.receiver_utility, dtype=float))
        object.__setattr__(
            self, "sender_utilities", tuple(np.asarray(u, dtype=float) for u in self.sender_utilities)
        )
        for name in ("n_senders", "states", "signals", "actions"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.prior.shape != (self.states,):
            raise ValueError(f"prior shape {self.prior.shape} != ({self.states},)")
        if np.any(self.prior < 0) or abs(self.prior.sum() - 1.0) > 1e-12:
            raise ValueError("prior must be nonnegative and sum to 1 within 1e-12")
        if self.receiver_utility.shape != (self.states, self.actions):
            raise ValueError("receiver_utility shape mismatch")
        if len(self.sender_utilities) != self.n_senders:
            raise ValueError("need one utility matrix per sender")
        for u in self.sender_utilities:
            if u.shape != (self.states, self.actions):
                raise ValueError("sender utility shape mismatch")
        if not np.all(np.isfinite(self.receiver_utility)) or not all(
            np.all(np.isfinite(u)) for u in self.sender_utilities
        ):
            raise ValueError("utilities must be finite")

    @property
    def n_joint_signals(self) -> int:
        return self.signals**self.n_senders


@dataclass(frozen=True)
class Posterior:
    """Posterior belief over states, together with the inducing signal's probability.

    A joint signal that cannot occur under the policy gets ``marginal == 0``
    and an all-zero ``mu``; such posteriors are flagged rather than raised
    because they contribute nothing to any exact sum.
    """

    mu: np.ndarray
    marginal: float

    @property
    def is_null(self) -> bool:
        return self.marginal <= 0.0


@dataclass(frozen=True)
class Playthrough:
    """One simulated round: state, joint signal, receiver action, payoffs."""

    state: int
    signal: tuple[int, ...]
    action: int
    receiver_payoff: float
    sender_payoffs: np.ndarray


# ---------------------------------------------------------------------------
# policies and joint signals


def validate_policy(game: GameInstance, policy: np.ndarray) -> np.ndarray:
    """Check one sender's matrix: (states x signals), entries in [0,1], rows sum to 1."""
    p = np.asarray(policy, dtype=float)
    if p.shape != (game.states, game.signals):
        raise ValueError(f"policy shape {p.shape} != ({game.states}, {game.signals})")
    if np.any(p < -1e-12) or np.any(p > 1 + 1e-12):
        raise ValueError("policy entries must lie in [0, 1]")
    if np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-9):
        raise ValueError("policy rows must sum to 1 within 1e-9")
    return p


def validate_joint_policy(game: GameInstance, policies) -> np.ndarray:
    """Stack and check one policy per sender; returns an (n, states, signals) array."""
    policies = list(policies)
    if len(policies) != game.n_senders:
        raise ValueError(f"expected {game.n_senders} policies, got {len(policies)}")
    return np.stack([validate_policy(game, p) for p in policies])


def joint_signals(n_senders: int, n_signals: int) -> np.ndarray:
    """All joint signals as an (S^n, n) int array in flat-index order."""
    grids = np.meshgrid(*[np.arange(n_signals)] * n_senders, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def joint_signal_index(signal, n_signals: int) -> int:
    """Flat index of a joint signal tuple (sender 0 most significant)."""
    idx = 0
    for s in signal:
        idx = idx * n_signals + int(s)
    return idx


def check_term_cap(game: GameInstance, term_cap: int = DEFAULT_TERM_CAP) -> None:
    terms = game.states * game.signals**game.n_senders
    if terms > term_cap:
        raise CapError(f"exact enumeration needs {terms} terms, above the cap of {term_cap}")


def signal_weights(game: GameInstance, policy: np.ndarray, term_cap: int = DEFAULT_TERM_CAP) -> np.ndarray:
    """Unnormalized posterior weights q[s, w] = prior(w) * prod_j pi_j(s_j | w).

    Shape (S^n, states); row sums are the joint-signal marginals and the
    whole array sums to 1.
    """
    check_term_cap(game, term_cap)
    q = game.prior[None, :].copy()              # (1, states)
    for j in range(game.n_senders):
        # (k, states) -> (k*S, states), new signal index varying fastest
        q = (q[:, None, :] * policy[j].T[None, :, :]).reshape(-1, game.states)
    return q


# ---------------------------------------------------------------------------
# receiver behavior


def _expost_optimal(game: GameInstance, tol: float = TIE_TOL) -> np.ndarray:
    """Indicator (states x actions) of actions optimal at each point-mass belief."""
    v = game.receiver_utility
    return (v >= v.max(axis=1, keepdims=True) - tol).astype(float)


def best_actions(game: GameInstance, posteriors: np.ndarray, tie: TieRule, tol: float = TIE_TOL) -> np.ndarray:
    """Receiver-optimal action for each posterior row, tie-broken by `tie`.

    `posteriors` is (M, states) of normalized beliefs.  FixedMap rules do
    not look at posteriors and are rejected here.
    """
    if isinstance(tie, FixedMap):
        raise ValueError("FixedMap interprets joint signals directly; it cannot rank posteriors")
    mu = np.atleast_2d(np.asarray(posteriors, dtype=float))
    exp_v = mu @ game.receiver_utility
    tied = exp_v >= exp_v.max(axis=1, keepdims=True) - tol
    if isinstance(tie, Lexicographic):
        return np.argmax(tied, axis=1)
    if isinstance(tie, SenderFavoring):
        w = tie.weights if tie.weights is not None else (1.0,) * game.n_senders
        if len(w) != game.n_senders:
            raise ValueError("need one weight per sender")
        score = sum(float(wj) * (mu @ uj) for wj, uj in zip(w, game.sender_utilities))
        score = np.where(tied, score, -np.inf)
        best = score >= score.max(axis=1, keepdims=True) - tol
        mass = mu @ _expost_optimal(game, tol)
        mass = np.where(best, mass, -np.inf)
        final = mass >= mass.max(axis=1, keepdims=True) - tol
        return np.argmax(final, axis=1)
    raise TypeError(f"unknown tie rule {tie!r}")


# ---------------------------------------------------------------------------
# operations


def joint_signal_prob(game: GameInstance, policy, state: int, signal) -> float:
    """Probability of the joint signal in the given state: prod_j pi_j(s_j | state)."""
    policy = validate_joint_policy(game, policy)
    if not 0 <= state < game.states:
        raise ValueError(f"state {state} out of range")
    signal = tuple(int(s) for s in signal)
    if len(signal) != game.n_senders or any(not 0 <= s < game.signals for s in signal):
        raise ValueError(f"bad joint signal {signal}")
    return float(np.prod([policy[j, state, s] for j, s in enumerate(signal)]))


def posterior(game: GameInstance, policy, signal) -> Posterior:
    """Bayes posterior induced by a joint signal, with its marginal probability."""
    policy = validate_joint_policy(game, policy)
    signal = tuple(int(s) for s in signal)
    if len(signal) != game.n_senders or any(not 0 <= s < game.signals for s in signal):
        raise ValueError(f"bad joint signal {signal}")
    q = game.prior.copy()
    for j, s in enumerate(signal):
        q *= policy[j, :, s]
    marginal = float(q.sum())
    if marginal <= 0.0:
        return Posterior(mu=np.zeros(game.states), marginal=0.0)
    return Posterior(mu=q / marginal, marginal=marginal)


def receiver_best_action(game: GameInstance, post: Posterior | np.ndarray, tie: TieRule) -> int:
    """Action maximizing expected receiver utility under the posterior.

    Ties within 1e-9 of the maximum are resolved by the tie rule; see
    :class:`SenderFavoring` for the sender-favoring order.
    """
    mu = post.mu if isinstance(post, Posterior) else np.asarray(post, dtype=float)
    if isinstance(post, Posterior) and post.is_null:
        raise ValueError("cannot pick an action for a zero-probability posterior")
    return int(best_actions(game, mu[None, :], tie)[0])


def induced_action_map(game: GameInstance, policy, tie: TieRule, term_cap: int = DEFAULT_TERM_CAP) -> np.ndarray:
    """The receiver's action at every joint signal under the given profile.

    Zero-probability joint signals never reach the receiver; their entries
    are filled with action 0.
    """
    policy = validate_joint_policy(game, policy)
    if isinstance(tie, FixedMap):
        return np.asarray(tie.table, dtype=int)
    q = signal_weights(game, policy, term_cap)
    marg = q.sum(axis=1)
    live = marg > 0
    actions = np.zeros(q.shape[0], dtype=int)
    if np.any(live):
        actions[live] = best_actions(game, q[live] / marg[live, None], tie)
    return actions


def ex_ante_utilities(
    game: GameInstance, policy, tie: TieRule, term_cap: int = DEFAULT_TERM_CAP
) -> tuple[np.ndarray, float]:
    """Exact expected payoffs before the state realizes.

    Sums over all states and joint signals: each signal contributes its
    unnormalized posterior weight times the utility of the receiver's
    induced action.  Returns ``(sender_utilities, receiver_utility)``.
    """
    policy = validate_joint_policy(game, policy)
    if isinstance(tie, FixedMap):
        return ex_ante_utilities_fixed_interpretation(game, policy, tie, term_cap), _receiver_value(
            game, policy, np.asarray(tie.table, dtype=int), term_cap
        )
    q = signal_weights(game, policy, term_cap)
    marg = q.sum(axis=1)
    live = marg > 0
    senders = np.zeros(game.n_senders)
    receiver = 0.0
    if np.any(live):
        actions = best_actions(game, q[live] / marg[live, None], tie)
        ql = q[live]
        for j, u in enumerate(game.sender_utilities):
            senders[j] = float(np.sum(ql * u[:, actions].T))
        receiver = float(np.sum(ql * game.receiver_utility[:, actions].T))
    return senders, receiver


def _receiver_value(game, policy, table, term_cap):
    q = signal_weights(game, policy, term_cap)
    return float(np.sum(q * game.receiver_utility[:, table].T))


def ex_ante_utilities_batch(
    game: GameInstance, profiles: np.ndarray, tie: TieRule, term_cap: int = DEFAULT_TERM_CAP
) -> np.ndarray:
    """Per-sender ex-ante utilities for a batch of joint policies.

    `profiles` is (B, n, states, signals); returns (B, n).  Same exact sum
    as :func:`ex_ante_utilities`, vectorized across the batch.
    """
    profiles = np.asarray(profiles, dtype=float)
    B = profiles.shape[0]
    check_term_cap(game, term_cap)
    q = np.broadcast_to(game.prior, (B, 1, game.states)).copy()
    for j in range(game.n_senders):
        pj = np.swapaxes(profiles[:, j], 1, 2)          # (B, S, states)
        q = (q[:, :, None, :] * pj[:, None, :, :]).reshape(B, -1, game.states)
    marg = q.sum(axis=2)
    live = marg > 0
    out = np.zeros((B, game.n_senders))
    if isinstance(tie, FixedMap):
        actions = np.broadcast_to(np.asarray(tie.table, dtype=int), (B, game.n_joint_signals))
    else:
        mu = np.where(live[..., None], q / np.maximum(marg[..., None], 1e-300), 0.0)
        actions = best_actions(game, mu.reshape(-1, game.states), tie).reshape(B, -1)
    for j, u in enumerate(game.sender_utilities):
        vals = u.T[actions]                             # (B, S^n, states)
        out[:, j] = np.sum(np.where(live[..., None], q * vals, 0.0), axis=(1, 2))
    return out


def ex_ante_utilities_fixed_interpretation(
    game: GameInstance, policy, interp: FixedMap, term_cap: int = DEFAULT_TERM_CAP
) -> np.ndarray:
    """Expected sender payoffs when the receiver plays a committed signal map.

    Same exact sum as :func:`ex_ante_utilities`, but the action at each
    joint signal is read from the map instead of the posterior argmax.
    """
    policy = validate_joint_policy(game, policy)
    table = np.asarray(interp.table, dtype=int)
    if table.shape != (game.n_joint_signals,):
        raise ValueError(f"interpretation covers {table.size} joint signals, need {game.n_joint_signals}")
    if np.any(table < 0) or np.any(table >= game.actions):
        raise ValueError("interpretation contains out-of-range actions")
    q = signal_weights(game, policy, term_cap)
    return np.array([float(np.sum(q * u[:, table].T)) for u in game.sender_utilities])


def sample_playthrough(game: GameInstance, policy, tie: TieRule, rng) -> Playthrough:
    """Simulate one round; deterministic given the generator/seed."""
    from .rng import as_generator

    policy = validate_joint_policy(game, policy)
    gen = as_generator(rng)
    state = int(gen.choice(game.states, p=game.prior))
    signal = tuple(int(gen.choice(game.signals, p=policy[j, state])) for j in range(game.n_senders))
    if isinstance(tie, FixedMap):
        action = int(np.asarray(tie.table, dtype=int)[joint_signal_index(signal, game.signals)])
    else:
        action = receiver_best_action(game, posterior(game, policy, signal), tie)
    return Playthrough(
        state=state,
        signal=signal,
        action=action,
        receiver_payoff=float(game.receiver_utility[state, action]),
        sender_payoffs=np.array([u[state, action] for u in game.sender_utilities]),
    )


def simulate_mean_payoffs(game: GameInstance, policy, tie: TieRule, count: int, rng) -> np.ndarray:
    """Monte-Carlo mean of per-sender payoffs over `count` rounds (vectorized)."""
    from .rng import as_generator

    policy = validate_joint_policy(game, policy)
    gen = as_generator(rng)
    states = gen.choice(game.states, size=count, p=game.prior)
    u = gen.random(size=(count, game.n_senders))
    sig_flat = np.zeros(count, dtype=int)
    for j in range(game.n_senders):
        cdf = np.cumsum(policy[j], axis=1)[states]          # (count, S)
        draws = np.minimum((u[:, j, None] > cdf).sum(axis=1), game.signals - 1)
        sig_flat = sig_flat * game.signals + draws
    table = induced_action_map(game, policy, tie)
    actions = table[sig_flat]
    payoffs = np.stack([uj[states, actions] for uj in game.sender_utilities], axis=1)
    return payoffs.mean(axis=0)


def exact_payoff_variance(game: GameInstance, policy, tie: TieRule) -> np.ndarray:
    """Exact per-sender variance of the one-round payoff distribution."""
    policy = validate_joint_policy(game, policy)
    q = signal_weights(game, policy)
    table = induced_action_map(game, policy, tie)
    out = np.zeros(game.n_senders)
    for j, u in enumerate(game.sender_utilities):
        vals = u[:, table].T            # (S^n, states)
        mean = float(np.sum(q * vals))
        out[j] = float(np.sum(q * vals**2)) - mean**2
    return out
