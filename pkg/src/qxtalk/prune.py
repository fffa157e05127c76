"""Candidate-gate extraction from the mono/co density-matrix difference.

Off-diagonal structure of ``|co><co| - |mono><mono|`` localizes which
single-qubit transitions gained or lost coherence between conditions.
Every above-threshold element whose two basis states differ in exactly
one bit (the transition target) is turned into control/target qubit
pairs: any other qubit that is set in both states could have gated the
transition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qsim import RegisterLayout, StateVector, density_matrix


@dataclass
class CandidateSet:
    """Ordered, de-duplicated (control, target) qubit pairs."""

    pairs: list[tuple[int, int]]
    threshold_used: float

    def __post_init__(self):
        if len(set(self.pairs)) != len(self.pairs):
            raise ValueError("candidate pairs must be unique")
        for control, target in self.pairs:
            if control == target:
                raise ValueError(f"degenerate candidate pair ({control}, {target})")

    def __len__(self) -> int:
        return len(self.pairs)


def delta_rho(mono: StateVector, co: StateVector) -> np.ndarray:
    """Density-matrix difference rho_co - rho_mono (Hermitian, trace ~ 0)."""
    if mono.num_qubits != co.num_qubits:
        raise ValueError("states must have equal qubit counts")
    return density_matrix(co) - density_matrix(mono)


def extract_candidates(dr: np.ndarray, layout: RegisterLayout, threshold: float = 0.01) -> CandidateSet:
    """Scan |dr| > threshold single-bit transitions into candidate (control, target) pairs.

    The scan is row-major over off-diagonal elements and keeps first-seen
    order, which downstream search uses for deterministic tie-breaking.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    n = layout.num_qubits
    dim = 1 << n
    dr = np.asarray(dr)
    if dr.shape != (dim, dim):
        raise ValueError(f"delta-rho shape {dr.shape} does not match a {n}-qubit layout")
    pairs: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    hot = np.argwhere(np.abs(dr) > threshold)
    for row, col in hot:
        r, c = int(row), int(col)
        if r == c:
            continue
        diff = r ^ c
        if diff & (diff - 1):
            continue  # more than one bit differs
        target = diff.bit_length() - 1
        shared = r & c
        for control in range(n):
            if control != target and (shared >> control) & 1:
                pair = (control, target)
                if pair not in seen:
                    seen.add(pair)
                    pairs.append(pair)
    return CandidateSet(pairs=pairs, threshold_used=float(threshold))
