"""KL-divergence objective for two-register circuit fitting.

The cost of a topology is the sum of the per-register divergences between
the circuit's measurement marginals and the interacting-condition targets:
``D(P_CT1 || Q_CT1) + D(P_CT2 || Q_CT2)`` in natural log.  Targets are
smoothed with a small epsilon before the ratio; zero-probability terms on
the P side contribute nothing.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._bits import bitstring_to_index
from .ingest import TargetDistribution
from .qsim import RegisterLayout, StateVector, Topology, run_circuit, marginal_probabilities, sample_counts

DEFAULT_SMOOTHING = 1e-9
DEFAULT_NSHOTS = 8192
EVAL_MODES = ("exact", "shots")


@dataclass
class Problem:
    """Fixed initial state, register layout, targets and evaluation settings."""

    initial_state: StateVector
    layout: RegisterLayout
    target_ct1: TargetDistribution
    target_ct2: TargetDistribution
    eval_mode: str = "exact"
    nshots: int = DEFAULT_NSHOTS
    shots_seed: int = 0
    smoothing: float = DEFAULT_SMOOTHING

    def __post_init__(self):
        if self.initial_state.num_qubits != self.layout.num_qubits:
            raise ValueError(
                f"initial state has {self.initial_state.num_qubits} qubits, layout needs "
                f"{self.layout.num_qubits}"
            )
        if self.target_ct1.num_qubits != self.layout.n_ct1:
            raise ValueError("CT1 target size does not match the CT1 register")
        if self.target_ct2.num_qubits != self.layout.n_ct2:
            raise ValueError("CT2 target size does not match the CT2 register")
        if self.eval_mode not in EVAL_MODES:
            raise ValueError(f"eval_mode must be one of {EVAL_MODES}")
        if self.nshots <= 0:
            raise ValueError("nshots must be positive")
        if self.smoothing <= 0:
            raise ValueError("smoothing epsilon must be positive")


@dataclass(frozen=True)
class CostReport:
    """Total objective plus its per-register parts (total = kl_ct1 + kl_ct2)."""

    total: float
    kl_ct1: float
    kl_ct2: float

    @classmethod
    def from_parts(cls, kl_ct1: float, kl_ct2: float) -> "CostReport":
        return cls(total=kl_ct1 + kl_ct2, kl_ct1=kl_ct1, kl_ct2=kl_ct2)


def kl_divergence(p: TargetDistribution, q: TargetDistribution, smoothing: float = DEFAULT_SMOOTHING) -> float:
    """D_KL(p || q) with epsilon-smoothed q, natural log; p(s)=0 terms contribute 0."""
    if p.num_qubits != q.num_qubits:
        raise ValueError("distributions must cover the same number of qubits")
    if smoothing <= 0:
        raise ValueError("smoothing epsilon must be positive")
    pv = p.probabilities
    qv = q.probabilities + smoothing
    qv = qv / qv.sum()
    mask = pv > 0
    return float(np.sum(pv[mask] * np.log(pv[mask] / qv[mask])))


def _register_distribution(problem: Problem, final: StateVector, qubits, seed: int) -> TargetDistribution:
    if problem.eval_mode == "exact":
        return marginal_probabilities(final, qubits)
    hist = sample_counts(final, qubits, problem.nshots, seed)
    probs = np.zeros(1 << hist.num_genes, dtype=np.float64)
    for state, count in hist.counts.items():
        probs[bitstring_to_index(state)] = count / problem.nshots
    return TargetDistribution(num_qubits=hist.num_genes, probabilities=probs)


def evaluate(problem: Problem, topology: Topology) -> CostReport:
    """Run the circuit and score both register marginals against their targets.

    Shots mode reuses the problem's fixed seed (CT2 uses seed + 1), so the
    cost of a given topology is deterministic for a given problem.
    """
    final = run_circuit(problem.initial_state, topology)
    p_ct1 = _register_distribution(problem, final, problem.layout.ct1_qubits, problem.shots_seed)
    p_ct2 = _register_distribution(problem, final, problem.layout.ct2_qubits, problem.shots_seed + 1)
    kl1 = kl_divergence(p_ct1, problem.target_ct1, problem.smoothing)
    kl2 = kl_divergence(p_ct2, problem.target_ct2, problem.smoothing)
    return CostReport.from_parts(kl1, kl2)


def evaluate_batch(problem: Problem, topologies, workers: int = 1) -> list[CostReport]:
    """Evaluate several topologies; results keep input order regardless of workers."""
    topologies = list(topologies)
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if workers == 1 or len(topologies) < 2:
        return [evaluate(problem, t) for t in topologies]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda t: evaluate(problem, t), topologies))
