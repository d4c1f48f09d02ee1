"""Programmatic generators for the bundled example networks.

Each function returns a :class:`ReactionNetwork`; rate constants can be
overridden by reaction label through ``rates``.
"""

from __future__ import annotations

from typing import Callable

from .network import ReactionNetwork, parse_network

__all__ = [
    "ab",
    "birthdeath",
    "input_ab",
    "wilhelm",
    "triangular",
    "network1",
    "network2",
    "network3",
    "motor",
    "enzyme",
    "pfk",
    "closed_chain",
    "FIXTURES",
]


def _build(species, reactions, init, caps=None, rates=None) -> ReactionNetwork:
    """``reactions`` is a list of ``(label, lhs, rhs, rate, speed)``."""
    rates = dict(rates or {})
    lines = ["species: " + ", ".join(species)]
    for label, lhs, rhs, rate, speed in reactions:
        k = float(rates.pop(label, rate))
        lines.append(f"reaction {label}: {lhs} -> {rhs} rate={k!r} {speed}")
    if rates:
        raise KeyError(f"unknown reactions: {sorted(rates)}")
    lines.append("init: " + ", ".join(f"{s}={n}" for s, n in init.items()))
    if caps:
        lines.append("cap: " + ", ".join(f"{s}={n}" for s, n in caps.items()))
    return parse_network("\n".join(lines) + "\n")


def ab(n_a: int = 100, n_b: int = 1, rates=None) -> ReactionNetwork:
    """A <-> B, both directions slow."""
    return _build(
        ["A", "B"],
        [("k1", "A", "B", 0.01, "slow"), ("km1", "B", "A", 0.1, "slow")],
        {"A": n_a, "B": n_b},
        rates=rates,
    )


def birthdeath(cap: int = 30, n0: int = 1, rates=None) -> ReactionNetwork:
    """0 -> A -> 0, truncated at ``cap`` molecules."""
    return _build(
        ["A"],
        [("k1", "0", "A", 2.0, "slow"), ("k2", "A", "0", 1.0, "slow")],
        {"A": n0},
        caps={"A": cap},
        rates=rates,
    )


def input_ab(cap: int = 6, rates=None) -> ReactionNetwork:
    """0 -> A (slow), A <-> B (fast), B -> 0 (slow), truncated per species."""
    return _build(
        ["A", "B"],
        [
            ("k1", "0", "A", 0.1, "slow"),
            ("k2", "A", "B", 10.0, "fast"),
            ("k3", "B", "A", 10.0, "fast"),
            ("k4", "B", "0", 0.1, "slow"),
        ],
        {"A": 0, "B": 0},
        caps={"A": cap, "B": cap},
        rates=rates,
    )


def wilhelm(rates=None) -> ReactionNetwork:
    """S + 2X -> 3X (fast), 3X -> 2X + P (slow), X -> P (fast)."""
    return _build(
        ["S", "X", "P"],
        [
            ("k1", "S + 2 X", "3 X", 10.0, "fast"),
            ("k2", "3 X", "2 X + P", 0.1, "slow"),
            ("k3", "X", "P", 10.0, "fast"),
        ],
        {"S": 1, "X": 2, "P": 0},
        rates=rates,
    )


def triangular(n0: int = 2, rates=None) -> ReactionNetwork:
    """A <-> B fast, B <-> C and C <-> A slow, starting from ``n0`` copies of A."""
    return _build(
        ["A", "B", "C"],
        [
            ("k1", "A", "B", 10.0, "fast"),
            ("k2", "B", "A", 10.0, "fast"),
            ("k3", "B", "C", 0.1, "slow"),
            ("k4", "C", "B", 0.1, "slow"),
            ("k5", "C", "A", 0.1, "slow"),
            ("k6", "A", "C", 0.1, "slow"),
        ],
        {"A": n0, "B": 0, "C": 0},
        rates=rates,
    )


_NET_REACTIONS = [
    ("k1", "A", "B"),
    ("k2", "B", "C"),
    ("k3", "C", "B"),
    ("k4", "B", "D"),
    ("k5", "D", "B"),
    ("k6", "D", "E"),
    ("k7", "E", "D"),
    ("k8", "C", "2 F"),
    ("k9", "2 F", "C"),
    ("k10", "2 F", "G"),
    ("k11", "G", "2 F"),
]


def _seven_species(speeds: dict[str, str], rates, fast_rate: float, slow_rate: float) -> ReactionNetwork:
    reactions = []
    for label, lhs, rhs in _NET_REACTIONS:
        speed = speeds.get(label)
        if speed is None:
            continue
        reactions.append((label, lhs, rhs, fast_rate if speed == "fast" else slow_rate, speed))
    return _build(
        list("ABCDEFG"),
        reactions,
        {"A": 1, "B": 0, "C": 0, "D": 0, "E": 0, "F": 2, "G": 0},
        rates=rates,
    )


def network1(rates=None, fast_rate: float = 10.0, slow_rate: float = 0.1) -> ReactionNetwork:
    speeds = {f"k{i}": "fast" for i in range(1, 12)}
    speeds.update(k8="slow", k9="slow")
    return _seven_species(speeds, rates, fast_rate, slow_rate)


def network2(rates=None, fast_rate: float = 10.0, slow_rate: float = 0.1) -> ReactionNetwork:
    speeds = {f"k{i}": "fast" for i in range(1, 12)}
    speeds.update(k3="slow", k5="slow", k8="slow", k9="slow")
    return _seven_species(speeds, rates, fast_rate, slow_rate)


def network3(rates=None, fast_rate: float = 10.0, slow_rate: float = 0.1) -> ReactionNetwork:
    speeds = {f"k{i}": "fast" for i in range(1, 12)}
    del speeds["k3"], speeds["k5"]
    speeds.update(k8="slow", k9="slow")
    return _seven_species(speeds, rates, fast_rate, slow_rate)


def motor(
    n: int = 4,
    clockwise: bool = True,
    k1: float = 2.0,
    km1: float = 1.0,
    k3: float = 2.0,
    km3: float = 1.0,
    alpha: float = 0.1,
    beta: float = 0.08,
    y: float = 100.0,
) -> ReactionNetwork:
    """Flagellar motor with ``n`` CheY-P binding sites on each of two conformations.

    Species ``CW0..CWn`` and ``CCW0..CCWn`` hold one motor; binding is fast
    (CheY-P level ``y`` folded into the rate), switching is slow.
    """
    cw = [f"CW{k}" for k in range(n + 1)]
    ccw = [f"CCW{k}" for k in range(n + 1)]
    reactions = []
    for k in range(n):
        reactions.append((f"bcw{k}", cw[k], cw[k + 1], (n - k) * k1 * y, "fast"))
        reactions.append((f"ucw{k}", cw[k + 1], cw[k], (k + 1) * km1, "fast"))
        reactions.append((f"bccw{k}", ccw[k], ccw[k + 1], (n - k) * k3 * y, "fast"))
        reactions.append((f"uccw{k}", ccw[k + 1], ccw[k], (k + 1) * km3, "fast"))
    for k in range(n + 1):
        reactions.append((f"a{k}", cw[k], ccw[k], alpha, "slow"))
        reactions.append((f"b{k}", ccw[k], cw[k], beta, "slow"))
    init = {s: 0 for s in cw + ccw}
    init[cw[0] if clockwise else ccw[0]] = 1
    return _build(cw + ccw, reactions, init)


def enzyme(init=(5, 100, 0, 5, 0, 0), rates=None) -> ReactionNetwork:
    """Michaelis-Menten enzyme with a competitive inhibitor."""
    names = ["E", "S", "ES", "I", "EI", "P"]
    return _build(
        names,
        [
            ("k1", "E + S", "ES", 10.0, "fast"),
            ("k2", "ES", "E + S", 10.0, "fast"),
            ("k3", "ES", "E + P", 0.1, "slow"),
            ("k4", "E + I", "EI", 10.0, "fast"),
            ("k5", "EI", "E + I", 10.0, "fast"),
        ],
        dict(zip(names, init)),
        rates=rates,
    )


def pfk(init=(100, 5, 0, 5, 0, 100, 5, 0, 0), rates=None) -> ReactionNetwork:
    """PFK step: two enzyme forms convert A1 to A2, a sink enzyme converts A2 to product."""
    names = ["A1", "E1", "E1A1", "E1s", "E1sA1", "A2", "E2", "E2A2", "P"]
    return _build(
        names,
        [
            ("k1", "A1 + E1", "E1A1", 10.0, "fast"),
            ("km1", "E1A1", "A1 + E1", 10.0, "fast"),
            ("k2", "E1A1", "E1 + A2", 0.1, "slow"),
            ("k3", "A1 + E1s", "E1sA1", 10.0, "fast"),
            ("km3", "E1sA1", "A1 + E1s", 10.0, "fast"),
            ("k4", "E1sA1", "E1s + A2", 0.1, "slow"),
            ("k5", "A2 + E2", "E2A2", 10.0, "fast"),
            ("km5", "E2A2", "A2 + E2", 10.0, "fast"),
            ("k6", "E2A2", "E2 + P", 0.1, "slow"),
        ],
        dict(zip(names, init)),
        rates=rates,
    )


def closed_chain(n0: int = 50, rates=None) -> ReactionNetwork:
    """A <-> B <-> C <-> D, all slow, with ``n0`` molecules initially in A."""
    return _build(
        ["A", "B", "C", "D"],
        [
            ("k1", "A", "B", 1.0, "slow"),
            ("k2", "B", "A", 1.0, "slow"),
            ("k3", "B", "C", 1.0, "slow"),
            ("k4", "C", "B", 1.0, "slow"),
            ("k5", "C", "D", 1.0, "slow"),
            ("k6", "D", "C", 1.0, "slow"),
        ],
        {"A": n0, "B": 0, "C": 0, "D": 0},
        rates=rates,
    )


FIXTURES: dict[str, Callable[[], ReactionNetwork]] = {
    "ab": ab,
    "birthdeath": birthdeath,
    "inputAB": input_ab,
    "wilhelm": wilhelm,
    "triangular": triangular,
    "network1": network1,
    "network2": network2,
    "network3": network3,
    "motor": motor,
    "enzyme": enzyme,
    "pfk": pfk,
}
