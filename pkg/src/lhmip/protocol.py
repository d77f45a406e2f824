"""The verifier: question distribution, exact acceptance and Monte Carlo runs.

Test 1 (energy): pick a term ``j``; every prover answers the set ``S_j``; each
logical qubit's five shares are decoded and ``{H_j, Id - H_j}`` is measured.
Test 2 (code): pick ``i`` and a ``k``-set ``S`` containing it; with probability
1/2 one uniformly random prover answers ``S`` and the rest answer ``i``,
otherwise all answer ``i``; the shares of ``i`` must lie in the codespace.

Decoding is done unitarily: the decoding unitary maps a group of shares onto
(logical qubit, syndrome qubits) in place, so no density matrices over the full
register are ever formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import Optional, Union

import numpy as np

from . import code5
from .hamiltonian import HamiltonianInstance, PromiseGap
from .qmath import apply_op, expectation
from .strategy import ProverStrategy, QubitSet, SingleQubit, is_identity

MAX_EXACT_QUBITS = 26


@dataclass(frozen=True)
class EnergyTest:
    j: int


@dataclass(frozen=True)
class CodeTestMixed:
    i: int
    S: tuple
    odd_prover: int

    def __post_init__(self):
        object.__setattr__(self, "S", tuple(sorted(self.S)))
        if self.i not in self.S:
            raise ValueError(f"qubit {self.i} not in set {self.S}")


@dataclass(frozen=True)
class CodeTestAll:
    i: int


Question = Union[EnergyTest, CodeTestMixed, CodeTestAll]


@dataclass
class AcceptanceReport:
    p_test1: float
    p_test2: float
    p_overall: float
    mode: str
    shots: Optional[int] = None
    seed: Optional[int] = None
    std_error: Optional[float] = None
    gap: Optional[PromiseGap] = None
    transcript: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        out = {"p_test1": self.p_test1, "p_test2": self.p_test2, "p_overall": self.p_overall, "mode": self.mode}
        if self.mode == "sample":
            out.update(shots=self.shots, seed=self.seed, std_error=self.std_error)
            # a test that was never drawn has no empirical rate
            for key in ("p_test1", "p_test2"):
                if math.isnan(out[key]):
                    out[key] = None
        return out


def sets_containing(n: int, k: int, i: int) -> list:
    others = [q for q in range(n) if q != i]
    return [tuple(sorted((i,) + c)) for c in combinations(others, k - 1)]


def question_distribution(instance: HamiltonianInstance, r: int = code5.R) -> list:
    """Every question with its overall probability (the probabilities sum to 1)."""
    n, k, m = instance.n, instance.k, instance.m
    out = [(EnergyTest(j), 0.5 / m) for j in range(m)]
    for i in range(n):
        sets = sets_containing(n, k, i)
        out.append((CodeTestAll(i), 0.5 / n * 0.5))
        for S in sets:
            for t in range(r):
                out.append((CodeTestMixed(i, S, t), 0.5 / n * 0.5 / len(sets) / r))
    return out


def sample_question(instance: HamiltonianInstance, rng: np.random.Generator, r: int = code5.R) -> Question:
    if rng.random() < 0.5:
        return EnergyTest(int(rng.integers(instance.m)))
    i = int(rng.integers(instance.n))
    if rng.random() < 0.5:
        sets = sets_containing(instance.n, instance.k, i)
        S = sets[int(rng.integers(len(sets)))]
        return CodeTestMixed(i, S, int(rng.integers(r)))
    return CodeTestAll(i)


# ---------------------------------------------------------------- effects


@lru_cache(maxsize=None)
def _check():
    return code5.check_projector()


@lru_cache(maxsize=None)
def _dec():
    return code5.decoding_unitary()


def _apply_block(vec, strategy, t, u):
    if is_identity(u):
        return vec
    lay = strategy.layout
    return apply_op(vec, u, lay.block(t), lay.total_qubits)


def prover_unitaries(instance: HamiltonianInstance, strategy: ProverStrategy, q: Question) -> list:
    """The block unitary each prover applies for question ``q``."""
    r = strategy.layout.r
    if isinstance(q, EnergyTest):
        S = instance.terms[q.j].support
        return [strategy.unitary(t, QubitSet(S)) for t in range(r)]
    if isinstance(q, CodeTestAll):
        return [strategy.unitary(t, SingleQubit(q.i)) for t in range(r)]
    if isinstance(q, CodeTestMixed):
        return [
            strategy.unitary(t, QubitSet(q.S)) if t == q.odd_prover else strategy.unitary(t, SingleQubit(q.i))
            for t in range(r)
        ]
    raise TypeError(f"unknown question {q!r}")


def answer_accept_probability(instance: HamiltonianInstance, strategy: ProverStrategy, q: Question, vec) -> float:
    """Acceptance probability given the global state *after* the provers answered."""
    lay = strategy.layout
    total = lay.total_qubits
    if isinstance(q, EnergyTest):
        term = instance.terms[q.j]
        for i in term.support:
            vec = apply_op(vec, _dec(), lay.group(i), total)
        logical = [lay.share(0, i) for i in term.support]
        eye = np.eye(term.matrix.shape[0])
        return expectation(vec, eye - term.matrix, logical, total)
    return expectation(vec, _check(), lay.group(q.i), total)


def answered_state(instance, strategy, q, vec=None):
    vec = strategy.shared_state.amplitudes if vec is None else vec
    for t, u in enumerate(prover_unitaries(instance, strategy, q)):
        vec = _apply_block(vec, strategy, t, u)
    return vec


def accept_question(instance: HamiltonianInstance, strategy: ProverStrategy, q: Question) -> float:
    return answer_accept_probability(instance, strategy, q, answered_state(instance, strategy, q))


def _guard(strategy: ProverStrategy) -> None:
    if strategy.layout.total_qubits > MAX_EXACT_QUBITS:
        raise MemoryError(f"exact mode limited to {MAX_EXACT_QUBITS} qubits")
    if strategy.layout.r != code5.R:
        raise ValueError("the protocol uses r = 5 provers")


def question_probabilities(instance: HamiltonianInstance, strategy: ProverStrategy) -> dict:
    """Exact acceptance probability of every question."""
    _guard(strategy)
    if strategy.n != instance.n:
        raise ValueError(f"strategy has n={strategy.n}, instance n={instance.n}")
    probs = {}
    psi = strategy.shared_state.amplitudes
    r = strategy.layout.r
    for q, _ in question_distribution(instance, r):
        if isinstance(q, EnergyTest):
            probs[q] = accept_question(instance, strategy, q)
    for i in range(instance.n):
        singles = [strategy.unitary(t, SingleQubit(i)) for t in range(r)]
        phi = psi
        for t, u in enumerate(singles):
            phi = _apply_block(phi, strategy, t, u)
        probs[CodeTestAll(i)] = answer_accept_probability(instance, strategy, CodeTestAll(i), phi)
        for S in sets_containing(instance.n, instance.k, i):
            for t in range(r):
                v = strategy.unitary(t, QubitSet(S))
                u = singles[t]
                # swap prover t's U_i for V_S starting from phi
                swap_in = v @ u.conj().T
                mixed = _apply_block(phi, strategy, t, swap_in)
                q = CodeTestMixed(i, S, t)
                probs[q] = answer_accept_probability(instance, strategy, q, mixed)
    return probs


def accept_probability_exact(instance: HamiltonianInstance, strategy: ProverStrategy, gap=None) -> AcceptanceReport:
    probs = question_probabilities(instance, strategy)
    dist = question_distribution(instance, strategy.layout.r)
    p1 = sum(w * probs[q] for q, w in dist if isinstance(q, EnergyTest)) * 2
    p2 = sum(w * probs[q] for q, w in dist if not isinstance(q, EnergyTest)) * 2
    p1, p2 = min(max(p1, 0.0), 1.0), min(max(p2, 0.0), 1.0)
    return AcceptanceReport(p1, p2, (p1 + p2) / 2, "exact", gap=gap)


def accept_probability_sampled(
    instance: HamiltonianInstance, strategy: ProverStrategy, shots: int, seed: int, keep_transcript: bool = False
) -> AcceptanceReport:
    """Run ``shots`` independent executions; shot ``s`` draws from stream ``(seed, s)``."""
    if shots < 1:
        raise ValueError("shots must be at least 1")
    _guard(strategy)
    cache: dict = {}
    counts = {"test1": [0, 0], "test2": [0, 0]}
    transcript = []
    for shot in range(shots):
        rng = np.random.default_rng([seed, shot])
        q = sample_question(instance, rng, strategy.layout.r)
        if q not in cache:
            cache[q] = accept_question(instance, strategy, q)
        accepted = bool(rng.random() < cache[q])
        key = "test1" if isinstance(q, EnergyTest) else "test2"
        counts[key][0] += accepted
        counts[key][1] += 1
        if keep_transcript:
            transcript.append((q, accepted))
    acc = counts["test1"][0] + counts["test2"][0]
    p = acc / shots

    def rate(c):
        return c[0] / c[1] if c[1] else float("nan")

    se = math.sqrt(p * (1 - p) / shots)
    return AcceptanceReport(
        rate(counts["test1"]), rate(counts["test2"]), p, "sample", shots, seed, se, transcript=transcript
    )
