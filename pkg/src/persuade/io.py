"""File formats: game instances, policies, reports, sidecars, manifests.

Everything is JSON with full-precision floats (Python's shortest
round-tripping repr), so values written by the generators read back
bit-identically.  Matrices are stored as row-major flat lists next to
their dimensions.
"""

from __future__ import annotations

import hashlib
import json
import os
import time

import numpy as np

from . import __version__
from .game import FixedMap, GameInstance, Lexicographic, SenderFavoring, TieRule
from .equilibria import EquilibriumReport

GAME_FORMAT = "persuade-game"
POLICY_FORMAT = "persuade-policy"
REPORT_FORMAT = "persuade-report"


def _dump(path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _load(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# tie rules


def tie_rule_to_dict(tie: TieRule) -> dict:
    if isinstance(tie, Lexicographic):
        return {"kind": "lexicographic"}
    if isinstance(tie, SenderFavoring):
        doc = {"kind": "sender_favoring"}
        if tie.weights is not None:
            doc["weights"] = list(tie.weights)
        return doc
    if isinstance(tie, FixedMap):
        return {"kind": "fixed_map", "table": list(tie.table)}
    raise TypeError(f"unknown tie rule {tie!r}")


def tie_rule_from_dict(doc: dict) -> TieRule:
    kind = doc.get("kind")
    if kind == "lexicographic":
        return Lexicographic()
    if kind == "sender_favoring":
        w = doc.get("weights")
        return SenderFavoring(weights=tuple(w) if w is not None else None)
    if kind == "fixed_map":
        return FixedMap(table=tuple(int(a) for a in doc["table"]))
    raise ValueError(f"unknown tie rule kind {kind!r}")


def parse_tie_flag(text: str) -> TieRule:
    """CLI spelling of posterior-based tie rules."""
    if text == "lex":
        return Lexicographic()
    if text == "sender-favoring":
        return SenderFavoring()
    raise ValueError(f"unknown tie rule {text!r}; expected 'lex' or 'sender-favoring'")


# ---------------------------------------------------------------------------
# games and policies


def write_game(path, game: GameInstance, tie: TieRule | None = None) -> None:
    doc = {
        "format": GAME_FORMAT,
        "n_senders": game.n_senders,
        "states": game.states,
        "signals": game.signals,
        "actions": game.actions,
        "prior": game.prior.tolist(),
        "receiver_utility": game.receiver_utility.ravel().tolist(),
        "sender_utilities": [u.ravel().tolist() for u in game.sender_utilities],
    }
    if tie is not None:
        doc["tie_rule"] = tie_rule_to_dict(tie)
    _dump(path, doc)


def read_game(path) -> tuple[GameInstance, TieRule | None]:
    doc = _load(path)
    if doc.get("format") != GAME_FORMAT:
        raise ValueError(f"{path} is not a {GAME_FORMAT} file")
    shape = (doc["states"], doc["actions"])
    game = GameInstance(
        n_senders=doc["n_senders"],
        states=doc["states"],
        signals=doc["signals"],
        actions=doc["actions"],
        prior=np.asarray(doc["prior"], dtype=float),
        receiver_utility=np.asarray(doc["receiver_utility"], dtype=float).reshape(shape),
        sender_utilities=tuple(np.asarray(u, dtype=float).reshape(shape) for u in doc["sender_utilities"]),
    )
    tie = tie_rule_from_dict(doc["tie_rule"]) if "tie_rule" in doc else None
    return game, tie


def write_policies(path, policies) -> None:
    policies = np.asarray(policies, dtype=float)
    _dump(
        path,
        {
            "format": POLICY_FORMAT,
            "n_senders": policies.shape[0],
            "states": policies.shape[1],
            "signals": policies.shape[2],
            "policies": policies.ravel().tolist(),
        },
    )


def read_policies(path) -> np.ndarray:
    doc = _load(path)
    if doc.get("format") != POLICY_FORMAT:
        raise ValueError(f"{path} is not a {POLICY_FORMAT} file")
    shape = (doc["n_senders"], doc["states"], doc["signals"])
    return np.asarray(doc["policies"], dtype=float).reshape(shape)


# ---------------------------------------------------------------------------
# reports


def report_to_dict(report: EquilibriumReport) -> dict:
    doc = {
        "format": REPORT_FORMAT,
        "verdict": report.verdict,
        "utilities": np.asarray(report.utilities, dtype=float).tolist(),
        "max_improvement": float(report.max_improvement),
        "samples": int(report.samples),
        "eps": None if report.eps is None else float(report.eps),
        "witness_sender": report.witness_sender,
        "witness_policy": None
        if report.witness_policy is None
        else np.asarray(report.witness_policy, dtype=float).tolist(),
    }
    return doc


def report_from_dict(doc: dict) -> EquilibriumReport:
    if doc.get("format") != REPORT_FORMAT:
        raise ValueError(f"not a {REPORT_FORMAT} document")
    return EquilibriumReport(
        verdict=doc["verdict"],
        utilities=np.asarray(doc["utilities"], dtype=float),
        max_improvement=doc["max_improvement"],
        witness_sender=doc["witness_sender"],
        witness_policy=None if doc["witness_policy"] is None else np.asarray(doc["witness_policy"], dtype=float),
        samples=doc["samples"],
        eps=doc["eps"],
    )


def write_report(path, report: EquilibriumReport) -> None:
    _dump(path, report_to_dict(report))


def read_report(path) -> EquilibriumReport:
    return report_from_dict(_load(path))


# ---------------------------------------------------------------------------
# sidecars and manifests


def write_sidecar(path, payload: dict) -> None:
    _dump(path, {"format": "persuade-sidecar", **payload})


def write_manifest(path, command: str, args: dict, seed: int | None) -> None:
    """Enough to re-run the command bit-identically (modulo the timestamp)."""
    _dump(
        path,
        {
            "format": "persuade-manifest",
            "tool_version": __version__,
            "command": command,
            "args": {k: v for k, v in sorted(args.items())},
            "seed": seed,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        },
    )


# ---------------------------------------------------------------------------
# dataset cache (PERSUADE_CACHE)

CACHE_ENV = "PERSUADE_CACHE"


def _game_digest(game: GameInstance) -> str:
    h = hashlib.sha256()
    h.update(repr((game.n_senders, game.states, game.signals, game.actions)).encode())
    for arr in (game.prior, game.receiver_utility, *game.sender_utilities):
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()[:16]


def cached_dataset_path(game: GameInstance, count: int, tie: TieRule, seed: int) -> str | None:
    """Cache file for this dataset request, or None when caching is off."""
    root = os.environ.get(CACHE_ENV)
    if not root:
        return None
    tie_tag = json.dumps(tie_rule_to_dict(tie), sort_keys=True)
    key = hashlib.sha256(f"{_game_digest(game)}|{count}|{tie_tag}|{seed}".encode()).hexdigest()[:24]
    os.makedirs(root, exist_ok=True)
    return os.path.join(root, f"dataset-{key}.npz")


def load_or_sample_dataset(game: GameInstance, count: int, tie: TieRule, seed: int):
    """Sample a dataset, reusing the PERSUADE_CACHE copy when present."""
    from .learning import UtilityDataset, sample_dataset

    path = cached_dataset_path(game, count, tie, seed)
    if path and os.path.exists(path):
        with np.load(path) as z:
            return UtilityDataset(inputs=z["inputs"], utilities=z["utilities"], seed=seed, game=game)
    ds = sample_dataset(game, count, tie, seed)
    if path:
        np.savez_compressed(path, inputs=ds.inputs, utilities=ds.utilities)
    return ds
