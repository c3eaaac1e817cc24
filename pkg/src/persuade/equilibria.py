"""Equilibrium machinery: exact best response, Nash verification, the
optimal-action-revealing profile, fixed-interpretation best response, and
sampled local-equilibrium checks.

The exact best response enumerates receiver action maps (joint signal ->
action), solves one LP per map over the responding sender's policy, and
ranks candidates against the receiver's true tie-broken behavior.  A map's
LP value is trusted only when the map's incentive region has a strictly
incentive-compatible interior; there the LP optimum is the supremum of the
truly attainable utilities.  Boundary-only maps (the receiver is exactly
indifferent everywhere in the region) are scored by re-evaluating their LP
vertex under the actual tie rule, which is what the receiver would do.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import lp as lpmod
from .game import (
    DEFAULT_TERM_CAP,
    TIE_TOL,
    CapError,
    FixedMap,
    GameInstance,
    TieRule,
    best_actions,
    ex_ante_utilities,
    ex_ante_utilities_fixed_interpretation,
    induced_action_map,
    joint_signal_index,
    joint_signals,
    validate_joint_policy,
    validate_policy,
)
from .rng import substream

EXACT = "exact"
EPSILON_LOCAL = "epsilon_local"
REFUTED = "refuted"

DEFAULT_NASH_TOL = 1e-7
DEFAULT_MAP_CAP = 10**6
IMPROVE_TOL = 1e-9


class PreconditionError(ValueError):
    """A documented precondition of an equilibrium construction failed."""


@dataclass
class BestResponseResult:
    """Best response of one sender against fixed opponents.

    `utility` always equals the fixed-interpretation ex-ante utility of
    ``(policy, action_map)``.  When the winning map has a strictly
    incentive-compatible interior the value is the supremum of truly
    attainable utilities (approached by shrinking toward `strict_point`);
    otherwise it is attained exactly at `policy`.
    """

    policy: np.ndarray | None
    utility: float
    action_map: np.ndarray | None
    feasible_maps: int
    feasible: bool = True
    strict_point: np.ndarray | None = field(default=None, repr=False)


@dataclass
class EquilibriumReport:
    verdict: str                         # exact | epsilon_local | refuted
    utilities: np.ndarray                # per-sender ex-ante utilities of the profile
    max_improvement: float = 0.0
    witness_sender: int | None = None
    witness_policy: np.ndarray | None = None
    samples: int = 0
    eps: float | None = None


@dataclass(frozen=True)
class RevelationCertificate:
    """Why the revealing profile is deviation-proof.

    `zeta` is a set of joint-signal codewords with pairwise Hamming
    distance >= 2, so any n-1 coordinates already determine the codeword;
    a unilateral deviation cannot change what the receiver learns.
    """

    zeta: tuple
    assignment: dict                     # action -> codeword
    optimal_actions: np.ndarray          # state -> unique receiver-optimal action
    capacity_note: str | None = None


# ---------------------------------------------------------------------------
# shared helpers


def _context_weights(game: GameInstance, others: list) -> tuple[np.ndarray, np.ndarray]:
    """Joint weights of the opponents: W[ctx, w] = prior(w) * prod_j pi_j(ctx_j | w).

    Returns (contexts, W) with contexts an ((S)^(n-1), n-1) int array in
    flat order (first opponent most significant).
    """
    n_others = len(others)
    if n_others == 0:
        return np.zeros((1, 0), dtype=int), game.prior[None, :].copy()
    ctx = joint_signals(n_others, game.signals)
    W = game.prior[None, :].copy()
    for pol in others:
        W = (W[:, None, :] * pol.T[None, :, :]).reshape(-1, game.states)
    return ctx, W


def _insert_signal(ctx_row, sender: int, sig: int) -> tuple:
    row = list(int(s) for s in ctx_row)
    row.insert(sender, int(sig))
    return tuple(row)


def _full_table(game: GameInstance, sender: int, rel_ctx_rows, per_ctx_actions, own_assignment) -> np.ndarray:
    """Assemble a total joint-signal -> action table from per-context choices.

    ``own_assignment[sig]`` indexes into the per-context action tuples.
    Unreachable joint signals are filled with action 0.
    """
    table = np.zeros(game.n_joint_signals, dtype=int)
    for sig in range(game.signals):
        actions = per_ctx_actions[own_assignment[sig]]
        for row, a in zip(rel_ctx_rows, actions):
            table[joint_signal_index(_insert_signal(row, sender, sig), game.signals)] = a
    return table


def incentive_rows(game: GameInstance, joint_conditional: np.ndarray, interp: FixedMap) -> np.ndarray:
    """Incentive-compatibility row values for a committed interpretation.

    ``joint_conditional`` is the (S^n, states) table of joint-signal
    probabilities conditioned on the state (product policies are a special
    case; any correlated scheme is accepted).  Row (s, b) is
    ``sum_w prior(w) * cond[s, w] * (V[w, map(s)] - V[w, b])``; the map is
    incentive compatible iff every row is >= 0.  Rows are linear in the
    conditional table, so the IC set is convex in it.
    """
    cond = np.asarray(joint_conditional, dtype=float)
    if cond.shape != (game.n_joint_signals, game.states):
        raise ValueError("joint conditional must be (S^n, states)")
    table = np.asarray(interp.table, dtype=int)
    q = cond * game.prior[None, :]
    V = game.receiver_utility
    rows = np.empty((game.n_joint_signals, game.actions))
    for s in range(game.n_joint_signals):
        rows[s] = q[s] @ (V[:, table[s]][:, None] - V)
    return rows


def joint_conditional(game: GameInstance, policy) -> np.ndarray:
    """(S^n, states) conditional joint-signal table of a product profile."""
    policy = validate_joint_policy(game, policy)
    cond = np.ones((1, game.states))
    for j in range(game.n_senders):
        cond = (cond[:, None, :] * policy[j].T[None, :, :]).reshape(-1, game.states)
    return cond


# ---------------------------------------------------------------------------
# candidate receiver actions per opponent context


def _producible_actions(game: GameInstance, weight_row: np.ndarray, tie: TieRule) -> tuple:
    """Actions the receiver can actually end up taking at some posterior
    reachable in this context.

    The reachable posteriors form the simplex over the face of states with
    positive weight.  An action is producible if it is the strict argmax
    somewhere on that face, or if the tie rule picks it at a tie.  Faces of
    one or two states are handled exactly; larger faces use a strict-margin
    LP per action plus tie-rule outcomes at the witness posteriors, a
    superset that is exact for games without higher-dimensional ties.
    """
    face = np.nonzero(weight_row > 0)[0]
    V = game.receiver_utility
    out: set[int] = set()

    def probe(q_face):
        mu = np.zeros(game.states)
        mu[face] = q_face
        exp = mu @ V
        top = np.nonzero(exp >= exp.max() - TIE_TOL)[0]
        if top.size == 1:
            out.add(int(top[0]))
        else:
            out.add(int(best_actions(game, mu[None, :], tie)[0]))

    if face.size == 1:
        probe(np.ones(1))
        return tuple(sorted(out))

    if face.size == 2:
        vA, vB = V[face[0]], V[face[1]]
        points = {0.0, 1.0}
        for a in range(game.actions):
            for b in range(a + 1, game.actions):
                d0 = vB[a] - vB[b]
                d1 = vA[a] - vA[b]
                if d0 != d1:
                    t = d0 / (d0 - d1)
                    if 0.0 < t < 1.0:
                        points.add(float(t))
        knots = sorted(points)
        probes = list(knots) + [(knots[i] + knots[i + 1]) / 2 for i in range(len(knots) - 1)]
        for t in probes:
            probe(np.array([t, 1.0 - t]))
        return tuple(sorted(out))

    # face of 3+ states: strict-margin LP per action
    k = face.size
    Vf = V[face]
    centroid = np.full(k, 1.0 / k)
    probe(centroid)
    for a in range(game.actions):
        diffs = Vf[:, a][:, None] - Vf          # (k, actions)
        cols = [b for b in range(game.actions) if np.max(np.abs(diffs[:, b])) > 1e-14]
        if not cols:
            out.add(int(best_actions(game, _face_mu(game, face, centroid)[None, :], tie)[0]))
            continue
        # max delta  s.t.  q in simplex(face), diffs[:, b] @ q >= delta
        c = np.zeros(k + 1)
        c[-1] = 1.0
        A_ub = np.zeros((len(cols) + 1, k + 1))
        for r, b in enumerate(cols):
            A_ub[r, :k] = -diffs[:, b]
            A_ub[r, -1] = 1.0
        A_ub[-1, -1] = 1.0                      # delta bounded to keep the LP finite
        b_ub = np.zeros(len(cols) + 1)
        b_ub[-1] = 2.0 * np.max(np.abs(Vf)) + 1.0
        A_eq = np.zeros((1, k + 1))
        A_eq[0, :k] = 1.0
        res = lpmod.solve_lp(lpmod.LinearProgram(c=c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=[1.0]))
        if res.status != lpmod.OPTIMAL:
            continue
        delta = res.value
        if delta > TIE_TOL:
            out.add(a)
        elif delta >= -TIE_TOL:
            probe(res.x[:k])
    return tuple(sorted(out))


def _face_mu(game, face, q_face):
    mu = np.zeros(game.states)
    mu[face] = q_face
    return mu


def _sanitize_policy(p: np.ndarray) -> np.ndarray:
    """Clamp LP round-off so the matrix passes strict policy validation."""
    p = np.clip(p, 0.0, None)
    return p / p.sum(axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# exact best response


def _profile_with(policy_stack, others, sender, pi):
    prof = []
    it = iter(others)
    for j in range(policy_stack):
        prof.append(pi if j == sender else next(it))
    return np.stack(prof)


def best_response_exact(
    game: GameInstance,
    sender: int,
    others,
    tie: TieRule,
    *,
    incumbent: np.ndarray | None = None,
    map_cap: int = DEFAULT_MAP_CAP,
    term_cap: int = DEFAULT_TERM_CAP,
) -> BestResponseResult:
    """Exact best response of `sender` against the fixed `others`.

    Enumerates candidate action maps column-by-column over the sender's own
    signals (own signal labels are interchangeable, so maps are enumerated
    as multisets of per-column assignments), solves the incentive-
    compatibility LP for each, and returns the best value the receiver's
    actual behavior supports.  `others` are the remaining senders' policies
    in ascending sender order.
    """
    if isinstance(tie, FixedMap):
        raise ValueError("use best_response_fixed_interpretation for committed interpretations")
    if not 0 <= sender < game.n_senders:
        raise ValueError(f"sender {sender} out of range")
    others = [validate_policy(game, p) for p in others]
    if len(others) != game.n_senders - 1:
        raise ValueError(f"expected {game.n_senders - 1} opponent policies")

    def true_utility(pi):
        prof = _profile_with(game.n_senders, others, sender, pi)
        return float(ex_ante_utilities(game, prof, tie, term_cap)[0][sender]), prof

    ctx, W = _context_weights(game, others)
    relevant = np.nonzero(W.max(axis=1) > 0)[0]
    rel_rows = [tuple(ctx[r]) for r in relevant]
    Wrel = W[relevant]

    cands = [_producible_actions(game, Wrel[r], tie) for r in range(len(relevant))]

    n_combos = math.prod(len(c) for c in cands) if cands else 1
    if n_combos > map_cap:
        raise CapError(f"{n_combos} per-column assignments exceed the map cap of {map_cap}")
    combos = list(itertools.product(*cands)) if cands else [()]
    n_multisets = math.comb(len(combos) + game.signals - 1, game.signals)
    if n_multisets > map_cap:
        raise CapError(f"{n_multisets} action maps exceed the map cap of {map_cap}")

    u_i = game.sender_utilities[sender]
    V = game.receiver_utility
    n_states, n_sig = game.states, game.signals

    # Per-combo objective vectors and IC rows over the states axis.  A combo
    # is "fragile" if some declared action is permanently tied with another
    # action on a multi-state face: there the tie rule's pick can vary over
    # the face, so the LP value cannot be trusted without re-evaluation.
    face_sizes = [int(np.count_nonzero(Wrel[r] > 0)) for r in range(len(relevant))]
    combo_obj = []
    combo_rows = []
    combo_fragile = []
    for combo in combos:
        obj = np.zeros(n_states)
        rows = []
        fragile = False
        for r, a in enumerate(combo):
            obj += Wrel[r] * u_i[:, a]
            diffs = V[:, a][:, None] - V
            for b in range(game.actions):
                if b == a:
                    continue
                vec = Wrel[r] * diffs[:, b]
                if np.max(np.abs(vec)) > 1e-14:
                    rows.append(vec)
                elif face_sizes[r] > 1:
                    fragile = True
        combo_obj.append(obj)
        combo_rows.append(np.array(rows).reshape(-1, n_states))
        combo_fragile.append(fragile)

    nvar = n_states * n_sig
    A_eq = np.zeros((n_states, nvar))
    for w in range(n_states):
        A_eq[w, w * n_sig : (w + 1) * n_sig] = 1.0
    b_eq = np.ones(n_states)

    def build(assignment, with_slack):
        extra = 1 if with_slack else 0
        c = np.zeros(nvar + extra)
        n_rows = sum(combo_rows[k].shape[0] for k in assignment) + extra
        A_ub = np.zeros((n_rows, nvar + extra))
        r0 = 0
        for sig, k in enumerate(assignment):
            block = combo_rows[k]
            if block.shape[0]:
                A_ub[r0 : r0 + block.shape[0], sig : nvar : n_sig] = -block
                if with_slack:
                    A_ub[r0 : r0 + block.shape[0], -1] = 1.0
                r0 += block.shape[0]
            if not with_slack:
                c[sig:nvar:n_sig] += combo_obj[k]
        Ae = np.zeros((n_states, nvar + extra))
        Ae[:, :nvar] = A_eq
        if with_slack:
            c[-1] = 1.0
            A_ub[-1, -1] = 1.0
        b_ub = np.zeros(n_rows)
        if with_slack:
            b_ub[-1] = 10.0 + 10.0 * np.max(np.abs(V))
        return lpmod.LinearProgram(c=c, A_ub=A_ub, b_ub=b_ub, A_eq=Ae, b_eq=b_eq)

    best_value = -np.inf
    best_policy = None
    best_table = None
    best_strict = None
    if incumbent is not None:
        inc = validate_policy(game, incumbent)
        val, prof = true_utility(inc)
        best_value, best_policy = val, inc
        best_table = induced_action_map(game, prof, tie, term_cap)

    # best-first over a cheap IC-free bound so most LPs are skipped
    multisets = list(itertools.combinations_with_replacement(range(len(combos)), n_sig))
    objs = np.array(combo_obj)

    def bound(assignment):
        return float(np.maximum.reduce([objs[k] for k in assignment]).sum())

    multisets.sort(key=bound, reverse=True)

    feasible_count = 0
    for assignment in multisets:
        if bound(assignment) <= best_value + 1e-12:
            break
        res = lpmod.solve_lp(build(assignment, with_slack=False))
        if res.status != lpmod.OPTIMAL:
            continue
        feasible_count += 1
        if res.value <= best_value + 1e-12:
            continue
        pi_star = _sanitize_policy(res.x.reshape(n_states, n_sig))
        slack = lpmod.solve_lp(build(assignment, with_slack=True))
        strict = (
            slack.status == lpmod.OPTIMAL
            and slack.value > TIE_TOL
            and not any(combo_fragile[k] for k in assignment)
        )
        if strict:
            table = _full_table(game, sender, rel_rows, combos, assignment)
            prof = _profile_with(game.n_senders, others, sender, pi_star)
            value = float(
                ex_ante_utilities_fixed_interpretation(game, prof, FixedMap(tuple(table)), term_cap)[sender]
            )
            if value > best_value:
                best_value = value
                best_policy = pi_star
                best_table = table
                best_strict = _sanitize_policy(slack.x[:nvar].reshape(n_states, n_sig))
        else:
            cands_to_try = [pi_star]
            if slack.status == lpmod.OPTIMAL:
                cands_to_try.append(_sanitize_policy(slack.x[:nvar].reshape(n_states, n_sig)))
            for cand in cands_to_try:
                val, prof = true_utility(cand)
                if val > best_value:
                    best_value = val
                    best_policy = cand
                    best_table = induced_action_map(game, prof, tie, term_cap)
                    best_strict = None

    if best_policy is None:
        raise RuntimeError("no feasible action map found; every valid policy induces one")
    return BestResponseResult(
        policy=best_policy,
        utility=float(best_value),
        action_map=best_table,
        feasible_maps=feasible_count,
        strict_point=best_strict,
    )


def best_response_fixed_interpretation(
    game: GameInstance, sender: int, others, interp: FixedMap, *, term_cap: int = DEFAULT_TERM_CAP
) -> BestResponseResult:
    """Best response when the receiver commits to the interpretation `interp`.

    One LP over the sender's policy: maximize the fixed-interpretation
    utility subject to the interpretation staying incentive compatible at
    every reachable joint signal.  Infeasibility is a legal outcome (no
    policy of this sender keeps the interpretation credible) and is
    reported via ``feasible=False``.
    """
    if not 0 <= sender < game.n_senders:
        raise ValueError(f"sender {sender} out of range")
    others = [validate_policy(game, p) for p in others]
    if len(others) != game.n_senders - 1:
        raise ValueError(f"expected {game.n_senders - 1} opponent policies")
    table = np.asarray(interp.table, dtype=int)
    if table.shape != (game.n_joint_signals,):
        raise ValueError("interpretation must cover every joint signal")

    ctx, W = _context_weights(game, others)
    relevant = np.nonzero(W.max(axis=1) > 0)[0]
    u_i = game.sender_utilities[sender]
    V = game.receiver_utility
    n_states, n_sig = game.states, game.signals
    nvar = n_states * n_sig

    c = np.zeros(nvar)
    rows = []
    for r in relevant:
        for sig in range(n_sig):
            a = int(table[joint_signal_index(_insert_signal(ctx[r], sender, sig), n_sig)])
            c[sig:nvar:n_sig] += W[r] * u_i[:, a]
            diffs = V[:, a][:, None] - V
            for b in range(game.actions):
                if b == a:
                    continue
                vec = W[r] * diffs[:, b]
                if np.max(np.abs(vec)) > 1e-14:
                    row = np.zeros(nvar)
                    row[sig:nvar:n_sig] = -vec
                    rows.append(row)
    A_eq = np.zeros((n_states, nvar))
    for w in range(n_states):
        A_eq[w, w * n_sig : (w + 1) * n_sig] = 1.0
    res = lpmod.solve_lp(
        lpmod.LinearProgram(
            c=c,
            A_ub=np.array(rows).reshape(-1, nvar) if rows else None,
            b_ub=np.zeros(len(rows)) if rows else None,
            A_eq=A_eq,
            b_eq=np.ones(n_states),
        )
    )
    if res.status != lpmod.OPTIMAL:
        return BestResponseResult(policy=None, utility=-np.inf, action_map=table, feasible_maps=0, feasible=False)
    pol = _sanitize_policy(res.x.reshape(n_states, n_sig))
    prof = _profile_with(game.n_senders, others, sender, pol)
    value = float(ex_ante_utilities_fixed_interpretation(game, prof, interp, term_cap)[sender])
    return BestResponseResult(policy=pol, utility=value, action_map=table, feasible_maps=1)


# ---------------------------------------------------------------------------
# Nash verification


def _actual_witness(game, sender, others, tie, br: BestResponseResult, baseline, tol, term_cap):
    """Confirm a claimed improvement with a policy that actually achieves it."""
    if br.policy is None:
        return None, 0.0
    candidates = [br.policy]
    if br.strict_point is not None:
        for t in (1e-9, 1e-6, 1e-3):
            candidates.append((1 - t) * br.policy + t * br.strict_point)
    best = (None, 0.0)
    for cand in candidates:
        prof = _profile_with(game.n_senders, others, sender, cand)
        val = float(ex_ante_utilities(game, prof, tie, term_cap)[0][sender])
        if val - baseline > max(tol, best[1]):
            best = (cand, val - baseline)
    return best


def verify_nash(
    game: GameInstance,
    policy,
    tie: TieRule,
    tol: float = DEFAULT_NASH_TOL,
    *,
    term_cap: int = DEFAULT_TERM_CAP,
    map_cap: int = DEFAULT_MAP_CAP,
) -> EquilibriumReport:
    """Exact Nash check: no sender's best response may improve by more than `tol`.

    A refutation is only reported together with a deviation that actually
    achieves the improvement under the receiver's true behavior.  FixedMap
    tie rules are verified against the fixed-interpretation best response.
    """
    policy = validate_joint_policy(game, policy)
    if isinstance(tie, FixedMap):
        base = ex_ante_utilities_fixed_interpretation(game, policy, tie, term_cap)
    else:
        base = ex_ante_utilities(game, policy, tie, term_cap)[0]

    worst_gap = 0.0
    witness = None
    for j in range(game.n_senders):
        others = [policy[k] for k in range(game.n_senders) if k != j]
        if isinstance(tie, FixedMap):
            br = best_response_fixed_interpretation(game, j, others, tie, term_cap=term_cap)
            if not br.feasible:
                continue
            gap = br.utility - base[j]
            if gap > max(tol, worst_gap):
                worst_gap = gap
                witness = (j, br.policy)
        else:
            br = best_response_exact(
                game, j, others, tie, incumbent=policy[j], map_cap=map_cap, term_cap=term_cap
            )
            if br.utility - base[j] > tol:
                cand, gap = _actual_witness(game, j, others, tie, br, base[j], tol, term_cap)
                if cand is not None and gap > worst_gap:
                    worst_gap = gap
                    witness = (j, cand)

    if witness is None:
        return EquilibriumReport(verdict=EXACT, utilities=base, max_improvement=worst_gap)
    return EquilibriumReport(
        verdict=REFUTED,
        utilities=base,
        max_improvement=worst_gap,
        witness_sender=witness[0],
        witness_policy=witness[1],
    )


# ---------------------------------------------------------------------------
# optimal-action revelation


def full_revelation_profile(game: GameInstance) -> tuple[np.ndarray, RevelationCertificate]:
    """Deterministic profile that reveals the receiver-optimal action of every state.

    Requires a unique optimal action per state and enough codewords:
    ``signals^(n-1)`` must cover the number of distinct optimal actions.
    Codewords are the checksum strings whose digit sum is 0 mod |S|, which
    gives exactly signals^(n-1) strings at pairwise Hamming distance >= 2.
    Each used action gets one codeword; every state's senders jointly send
    the codeword of its optimal action.
    """
    V = game.receiver_utility
    f = np.zeros(game.states, dtype=int)
    for w in range(game.states):
        top = np.nonzero(V[w] >= V[w].max() - TIE_TOL)[0]
        if top.size != 1:
            raise PreconditionError(
                f"state {w} has {top.size} receiver-optimal actions; a unique optimum is required"
            )
        f[w] = int(top[0])
    used = sorted(set(int(a) for a in f))
    capacity = game.signals ** (game.n_senders - 1)
    if capacity > 10**7:
        raise CapError("codeword set too large to enumerate")
    if capacity < len(used):
        raise PreconditionError(
            f"capacity shortfall: signals^(n-1) = {capacity} < {len(used)} distinct optimal actions"
        )

    note = None
    if capacity < min(game.actions, game.states):
        note = (
            "capacity check passed on the number of distinct optimal actions; "
            "the stricter min(|actions|, |states|) reading would reject this game"
        )

    n, S = game.n_senders, game.signals
    zeta = []
    if n == 1:
        zeta = [(0,)]
    else:
        for prefix in itertools.product(range(S), repeat=n - 1):
            last = (-sum(prefix)) % S
            zeta.append(prefix + (last,))
    assignment = {a: zeta[k] for k, a in enumerate(used)}

    policies = np.zeros((n, game.states, S))
    for w in range(game.states):
        code = assignment[int(f[w])]
        for j in range(n):
            policies[j, w, code[j]] = 1.0
    cert = RevelationCertificate(
        zeta=tuple(zeta), assignment=assignment, optimal_actions=f, capacity_note=note
    )
    return policies, cert


# ---------------------------------------------------------------------------
# sampled local check


def local_ne_sample_count(game: GameInstance, cap: int = 10000, per_dim: int = 1000) -> int:
    """Deviation sample budget per sender, growing linearly with problem size."""
    return min(
        cap,
        per_dim * (game.n_senders - 1) * (game.states - 1) * (game.signals - 1) * (game.actions - 1),
    )


def perturb_policy(policy: np.ndarray, eps: float, rng) -> np.ndarray:
    """Uniform entrywise perturbation of size eps, clamped and row-renormalized."""
    p = np.clip(policy + rng.uniform(-eps, eps, size=policy.shape), 0.0, 1.0)
    sums = p.sum(axis=1, keepdims=True)
    bad = sums[:, 0] <= 1e-12
    if np.any(bad):
        p[bad] = 1.0 / policy.shape[1]
        sums = p.sum(axis=1, keepdims=True)
    return p / sums


def local_ne_verify(
    game: GameInstance,
    policy,
    tie: TieRule,
    eps: float,
    seed: int,
    *,
    samples: int | None = None,
    term_cap: int = DEFAULT_TERM_CAP,
) -> EquilibriumReport:
    """Sampled check that no sender can gain inside an eps-ball of deviations.

    Draws K deviations per sender in the infinity-ball (clamped back onto
    the simplex rows), recomputes the deviator's true ex-ante utility for
    each, and refutes on the first improvement above 1e-9.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    policy = validate_joint_policy(game, policy)
    K = local_ne_sample_count(game) if samples is None else int(samples)
    if isinstance(tie, FixedMap):
        base = ex_ante_utilities_fixed_interpretation(game, policy, tie, term_cap)
    else:
        base = ex_ante_utilities(game, policy, tie, term_cap)[0]

    worst_gap = 0.0
    witness = None
    for j in range(game.n_senders):
        rng = substream(seed, f"deviation:{j}")
        for _ in range(K):
            dev = perturb_policy(policy[j], eps, rng)
            prof = policy.copy()
            prof[j] = dev
            if isinstance(tie, FixedMap):
                val = float(ex_ante_utilities_fixed_interpretation(game, prof, tie, term_cap)[j])
            else:
                val = float(ex_ante_utilities(game, prof, tie, term_cap)[0][j])
            gap = val - base[j]
            if gap > max(IMPROVE_TOL, worst_gap):
                worst_gap = gap
                witness = (j, dev)

    if witness is None:
        return EquilibriumReport(
            verdict=EPSILON_LOCAL, utilities=base, max_improvement=worst_gap, samples=K, eps=eps
        )
    return EquilibriumReport(
        verdict=REFUTED,
        utilities=base,
        max_improvement=worst_gap,
        witness_sender=witness[0],
        witness_policy=witness[1],
        samples=K,
        eps=eps,
    )
