"""Learning pipeline: sampled utility datasets, MSE training with Adam,
extra-gradient search over policy logits, and the end-to-end local-
equilibrium finder.

The pipeline approximates each sender's ex-ante utility with a network
over the flattened joint policy, runs two-step extra-gradient updates on
softmax-parameterized policies against the learned surrogates, and then
verifies every candidate against the *true* game - the surrogates never
touch the reported utilities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .equilibria import EPSILON_LOCAL, EquilibriumReport, local_ne_verify
from .game import GameInstance, TieRule, ex_ante_utilities, ex_ante_utilities_batch
from .neural import (
    backward,
    flatten_params,
    forward,
    init_delu,
    init_dnl,
    init_relu,
    input_dim,
    unflatten_params,
)
from .rng import substream

DIVERGENCE_GUARD = 1e6


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 128
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("epochs, batch size, and learning rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.eps_adam > 0):
            raise ValueError("bad Adam constants")


@dataclass
class EgConfig:
    steps: int = 20
    learning_rate: float = 0.1
    restarts: int = 300
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1 or self.restarts < 1 or self.learning_rate <= 0:
            raise ValueError("steps, restarts, and learning rate must be positive")


@dataclass
class UtilityDataset:
    """Sampled (flattened joint policy, per-sender ex-ante utility) pairs."""

    inputs: np.ndarray        # (M, n * states * signals)
    utilities: np.ndarray     # (M, n_senders)
    seed: int
    game: GameInstance = field(repr=False)

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def policies(self) -> np.ndarray:
        g = self.game
        return self.inputs.reshape(-1, g.n_senders, g.states, g.signals)


def sample_dataset(
    game: GameInstance, count: int, tie: TieRule, seed: int, *, chunk: int = 2048
) -> UtilityDataset:
    """Uniformly sampled joint policies labeled with exact ex-ante utilities.

    Rows are flat-Dirichlet draws (normalized unit exponentials), so every
    row-stochastic matrix is equally likely.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = substream(seed, "dataset")
    draws = rng.exponential(1.0, size=(count, game.n_senders, game.states, game.signals))
    draws /= draws.sum(axis=3, keepdims=True)
    labels = np.empty((count, game.n_senders))
    for i in range(0, count, chunk):
        labels[i : i + chunk] = ex_ante_utilities_batch(game, draws[i : i + chunk], tie)
    return UtilityDataset(
        inputs=draws.reshape(count, -1), utilities=labels, seed=seed, game=game
    )


def split_dataset(dataset: UtilityDataset, val_fraction: float, seed: int):
    """Deterministic train/validation split; returns (train, val) datasets."""
    m = len(dataset)
    n_val = int(round(m * val_fraction))
    perm = substream(seed, "split").permutation(m)
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    mk = lambda idx: UtilityDataset(
        inputs=dataset.inputs[idx], utilities=dataset.utilities[idx], seed=dataset.seed, game=dataset.game
    )
    return mk(train_idx), mk(val_idx)


def make_surrogate_params(
    arch: str,
    in_dim: int,
    rng,
    *,
    hidden=(64, 64, 64),
    lower_layers: int = 1,
    hyper_hidden=(32, 32),
    aux_hidden=(32, 32),
    out_dim: int = 1,
):
    """Fresh parameters for one of the three supported architectures."""
    dims = [in_dim, *hidden, out_dim]
    if arch == "relu":
        return init_relu(dims, rng)
    if arch == "delu":
        return init_delu(dims, aux_hidden, rng)
    if arch == "dnl":
        return init_dnl(dims, lower_layers, hyper_hidden, rng)
    raise ValueError(f"unknown architecture {arch!r}; expected relu, delu, or dnl")


def mse(params, X, y, chunk: int = 8192) -> float:
    """Mean squared error of the network over (X, y)."""
    y = np.asarray(y, dtype=float).reshape(X.shape[0], -1)
    total = 0.0
    for i in range(0, X.shape[0], chunk):
        pred = np.atleast_2d(forward(params, X[i : i + chunk]))
        total += float(np.sum((pred - y[i : i + chunk]) ** 2))
    return total / y.size


def train(params, dataset: UtilityDataset, cfg: TrainConfig, *, sender: int | None = None):
    """Minibatch Adam on the MSE loss; returns (trained params, per-epoch loss).

    `sender` selects which utility column to fit when the network has a
    scalar output; a multi-output network fits the whole utility vector.
    Deterministic given ``cfg.seed``.  Aborts if the epoch loss exceeds 1e6.
    """
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    X = dataset.inputs
    if X.shape[1] != input_dim(params):
        raise ValueError(f"network input dim {input_dim(params)} != dataset dim {X.shape[1]}")
    y = dataset.utilities if sender is None else dataset.utilities[:, [sender]]

    flat = flatten_params(params)
    m = np.zeros_like(flat)
    v = np.zeros_like(flat)
    t = 0
    losses = []
    for epoch in range(cfg.epochs):
        perm = substream(cfg.seed, f"shuffle:{epoch}").permutation(len(dataset))
        epoch_sq = 0.0
        for start in range(0, len(dataset), cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            xb, yb = X[idx], y[idx]
            current = unflatten_params(params, flat)
            pred = np.atleast_2d(forward(current, xb))
            err = pred - yb
            epoch_sq += float(np.sum(err**2))
            upstream = 2.0 * err / err.size
            grad = flatten_params(backward(current, xb, upstream).params)
            t += 1
            m = cfg.beta1 * m + (1 - cfg.beta1) * grad
            v = cfg.beta2 * v + (1 - cfg.beta2) * grad**2
            m_hat = m / (1 - cfg.beta1**t)
            v_hat = v / (1 - cfg.beta2**t)
            flat = flat - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps_adam)
        loss = epoch_sq / y.size
        losses.append(loss)
        if not np.isfinite(loss) or loss > DIVERGENCE_GUARD:
            raise RuntimeError(
                f"training diverged at epoch {epoch}: loss {loss:.3g} "
                f"(lr {cfg.learning_rate}, batch {cfg.batch_size})"
            )
    return unflatten_params(params, flat), losses


# ---------------------------------------------------------------------------
# extra-gradient on learned surrogates


class UtilitySurrogate:
    """Scalar network wrapped with the two calls extra-gradient needs."""

    def __init__(self, params):
        self.params = params

    def value(self, x) -> float:
        return float(np.asarray(forward(self.params, np.asarray(x, dtype=float))).ravel()[0])

    def input_gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return backward(self.params, x, np.ones(1)).input


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _ascent_direction(surrogates, logits):
    """d(surrogate_j)/d(logits_j) through the row softmax, for every sender."""
    n, states, signals = logits.shape
    policies = softmax_rows(logits)
    x = policies.reshape(-1)
    direction = np.zeros_like(logits)
    for j, surrogate in enumerate(surrogates):
        g = surrogate.input_gradient(x).reshape(n, states, signals)[j]
        pj = policies[j]
        direction[j] = pj * (g - np.sum(g * pj, axis=1, keepdims=True))
    if not np.all(np.isfinite(direction)):
        raise RuntimeError("non-finite surrogate gradient during extra-gradient updates")
    return direction


def extragradient(surrogates, init_logits: np.ndarray, cfg: EgConfig) -> np.ndarray:
    """Two-step extra-gradient ascent on softmax-parameterized policies.

    Each sender's logits follow its own surrogate's gradient: first an
    extrapolation step, then the actual update evaluated at the
    extrapolated point.  Returns the final softmax policies.
    """
    logits = np.asarray(init_logits, dtype=float).copy()
    if len(surrogates) != logits.shape[0]:
        raise ValueError("need one surrogate per sender")
    for _ in range(cfg.steps):
        half = logits + cfg.learning_rate * _ascent_direction(surrogates, logits)
        logits = logits + cfg.learning_rate * _ascent_direction(surrogates, half)
    return softmax_rows(logits)


# ---------------------------------------------------------------------------
# end-to-end pipeline


@dataclass
class RestartOutcome:
    restart: int
    welfare: float
    utilities: np.ndarray
    verified: bool | None         # None = not checked (a better candidate verified first)
    policy: np.ndarray = field(repr=False)


@dataclass
class PipelineResult:
    report: EquilibriumReport
    policy: np.ndarray
    verified: bool
    restarts: list
    validation_mse: float
    surrogates: list = field(repr=False)


def find_local_ne(
    game: GameInstance,
    train_cfg: TrainConfig,
    eg_cfg: EgConfig,
    tie: TieRule,
    *,
    eps: float = 0.005,
    arch: str = "dnl",
    sample_count: int = 50_000,
    dataset: UtilityDataset | None = None,
    val_fraction: float = 0.1,
    verify_samples: int | None = None,
    **arch_kwargs,
) -> PipelineResult:
    """Sample, train one surrogate per sender, restart extra-gradient, verify.

    Candidates are ranked by social welfare (sum of true sender utilities,
    ties broken by restart index) and verified in that order against the
    true game with :func:`local_ne_verify`; the first verified candidate
    wins.  If none verifies, the best-welfare candidate is returned with
    ``verified=False`` and its refuting report.
    """
    if dataset is None:
        dataset = sample_dataset(game, sample_count, tie, train_cfg.seed)
    train_split, val_split = split_dataset(dataset, val_fraction, train_cfg.seed)

    in_dim = game.n_senders * game.states * game.signals
    surrogates = []
    val_mse = 0.0
    for j in range(game.n_senders):
        params = make_surrogate_params(arch, in_dim, substream(train_cfg.seed, f"init:sender:{j}"), **arch_kwargs)
        params, _ = train(params, train_split, train_cfg, sender=j)
        if len(val_split):
            val_mse += mse(params, val_split.inputs, val_split.utilities[:, [j]])
        surrogates.append(UtilitySurrogate(params))
    val_mse /= game.n_senders

    outcomes = []
    for r in range(eg_cfg.restarts):
        init = substream(eg_cfg.seed, f"init:restart:{r}").normal(
            size=(game.n_senders, game.states, game.signals)
        )
        policy = extragradient(surrogates, init, eg_cfg)
        utilities = ex_ante_utilities(game, policy, tie)[0]
        outcomes.append(
            RestartOutcome(
                restart=r, welfare=float(utilities.sum()), utilities=utilities, verified=None, policy=policy
            )
        )

    order = sorted(outcomes, key=lambda o: (-o.welfare, o.restart))
    chosen_report = None
    chosen = None
    for outcome in order:
        report = local_ne_verify(game, outcome.policy, tie, eps, eg_cfg.seed, samples=verify_samples)
        outcome.verified = report.verdict == EPSILON_LOCAL
        if chosen_report is None:
            chosen_report, chosen = report, outcome     # best welfare, possibly refuted
        if outcome.verified:
            chosen_report, chosen = report, outcome
            break

    return PipelineResult(
        report=chosen_report,
        policy=chosen.policy,
        verified=bool(chosen.verified),
        restarts=outcomes,
        validation_mse=val_mse,
        surrogates=surrogates,
    )
