"""Beam-selection policies: posterior-matched descent and energy bisection.

The posterior-matching rule walks the codebook tree toward the codeword
whose coverage probability is closest to 1/2, widening or narrowing the
beam as belief concentrates.  The bisection baseline ignores the
posterior entirely: it splits the slot budget into one stage per level
and keeps whichever child of the current node collects more energy.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .codebook import HierCodebook, children
from .inference import codeword_mass


@dataclass(frozen=True)
class BeamChoice:
    level: int
    index: int


def hiepm_select(pi: np.ndarray, cb: HierCodebook) -> BeamChoice:
    """Select the codeword with coverage probability closest to 1/2.

    Descend from level 1 along the larger-mass child while the current
    codeword holds mass >= 1/2; stop at the last such node and compare it
    against its larger-mass child, returning whichever is closer to 1/2.
    Ties: equal-mass children resolve to the smaller index, and an equal
    distance to 1/2 resolves to the parent (the wider beam).
    """

    def mass_of(node):
        return codeword_mass(pi, cb.coverage(*node))

    def larger_child(node):
        left, right = children(cb, *node)
        return left if mass_of(left) >= mass_of(right) else right

    node = larger_child((0, 1))
    m = mass_of(node)
    if m < 0.5:
        return BeamChoice(*node)
    while node[0] < cb.levels:
        child = larger_child(node)
        cm = mass_of(child)
        if cm >= 0.5:
            node, m = child, cm
            continue
        if abs(cm - 0.5) < abs(m - 0.5):
            return BeamChoice(*child)
        return BeamChoice(*node)
    return BeamChoice(*node)


def final_estimate(pi: np.ndarray) -> int:
    """Grid index of maximal posterior mass; ties go to the smallest index."""
    return int(np.argmax(pi))


@dataclass(frozen=True)
class BisectionState:
    """Progress of the stage-wise energy-comparison descent.

    ``node`` is the codeword whose children are being probed ((0, 1) is
    the virtual root before the first stage); energies accumulate |y|^2
    per child over the stage.
    """

    node: tuple[int, int] = (0, 1)
    slots_used: int = 0
    energies: tuple[float, float] = (0.0, 0.0)


def bisection_stage_lengths(tau: int, levels: int) -> list[int]:
    """Slots per stage: floor(tau/levels) each, extras to the deepest stages."""
    if tau < 2 * levels:
        raise ValueError(
            f"tau = {tau} cannot probe both children at every one of {levels} levels"
        )
    base, rem = divmod(tau, levels)
    return [base + (1 if s >= levels - rem else 0) for s in range(levels)]


def bisection_select(state: BisectionState, tau: int, cb: HierCodebook) -> BeamChoice:
    """Child of the current node to probe this slot (alternating, left first)."""
    left, right = children(cb, *state.node)
    return BeamChoice(*(left if state.slots_used % 2 == 0 else right))


def bisection_advance(
    state: BisectionState, y: complex, tau: int, cb: HierCodebook
) -> BisectionState:
    """Record the slot's energy; at stage end descend to the stronger child.

    Equal energies resolve to the left child.
    """
    lengths = bisection_stage_lengths(tau, cb.levels)
    stage = state.node[0]  # probing level stage+1
    side = state.slots_used % 2
    e = list(state.energies)
    e[side] += abs(y) ** 2
    used = state.slots_used + 1
    if used < lengths[stage]:
        return replace(state, slots_used=used, energies=(e[0], e[1]))
    left, right = children(cb, *state.node)
    winner = left if e[0] >= e[1] else right
    return BisectionState(node=winner, slots_used=0, energies=(0.0, 0.0))


def bisection_estimate(state: BisectionState, cb: HierCodebook) -> int:
    """Grid index of the leaf reached after the final stage."""
    level, index = state.node
    if level != cb.levels:
        raise ValueError(f"descent incomplete: at level {level} of {cb.levels}")
    return cb.coverage(level, index).angle_indices.start
