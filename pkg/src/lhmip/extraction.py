"""Witness extraction from an arbitrary prover strategy.

Every prover ``t`` gets two ancilla qubits per logical qubit, ``R_i^t`` and
``Rbar_i^t``, prepared as an EPR pair. ``C_i^t`` conjugates the swap of the
answer register ``Q_i^t`` with ``R_i^t`` by ``U_i^t``; ``D_{T,S}^t`` does the same
with ``V_S^t`` and swaps every ``i`` in ``T``. Applying all ``C`` operators,
keeping only the ``R`` ancillas and decoding each group gives the extracted
witness ``sigma``.

Extended-state qubit order: the strategy's qubits first, then for each
materialised pair ``(t, i)`` (in the order given) ``R_i^t`` followed by
``Rbar_i^t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np

from . import code5
from .hamiltonian import HamiltonianInstance, energy
from .protocol import CodeTestAll, answer_accept_probability, sets_containing
from .qmath import (
    SWAP,
    MixedState,
    PureState,
    apply_channel_density,
    apply_op,
    kron,
    reduced_density,
)
from .strategy import ProverStrategy, QubitSet, SingleQubit, is_identity

MAX_EXTENDED_QUBITS = 26
MAX_DENSITY_QUBITS = 13

EPR = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)


@dataclass(frozen=True, eq=False)
class ExtendedState:
    strategy: ProverStrategy
    vector: np.ndarray
    pairs: tuple  # ((t, i), ...) in ancilla order

    @property
    def base_qubits(self) -> int:
        return self.strategy.layout.total_qubits

    @property
    def num_qubits(self) -> int:
        return self.base_qubits + 2 * len(self.pairs)

    def r_index(self, t: int, i: int) -> int:
        try:
            return self.base_qubits + 2 * self.pairs.index((t, i))
        except ValueError:
            raise IndexError(f"no ancilla pair for prover {t}, qubit {i}") from None

    def rbar_index(self, t: int, i: int) -> int:
        return self.r_index(t, i) + 1

    def with_vector(self, vec: np.ndarray) -> "ExtendedState":
        return ExtendedState(self.strategy, vec, self.pairs)

    def as_pure(self) -> PureState:
        return PureState(self.num_qubits, self.vector, check=False)


@dataclass
class ExtractionResult:
    sigma: MixedState
    normalized_energy: float
    steps_applied: list = field(default_factory=list)
    method: str = "purified"


def extend(strategy: ProverStrategy, pairs: Sequence | None = None) -> ExtendedState:
    """Adjoin EPR ancillas; ``pairs`` restricts which ``(t, i)`` get one (default all)."""
    lay = strategy.layout
    if pairs is None:
        pairs = [(t, i) for t in range(lay.r) for i in range(lay.n)]
    pairs = tuple((int(t), int(i)) for t, i in pairs)
    total = lay.total_qubits + 2 * len(pairs)
    if total > MAX_EXTENDED_QUBITS:
        raise MemoryError(f"extended state needs {total} qubits (limit {MAX_EXTENDED_QUBITS})")
    vec = strategy.shared_state.amplitudes
    anc = np.ones(1, dtype=complex)
    for _ in pairs:
        anc = np.kron(anc, EPR)
    return ExtendedState(strategy, np.kron(vec, anc), pairs)


def _conjugated_swaps(ext: ExtendedState, t: int, u: np.ndarray, swapped: Sequence[int]) -> np.ndarray:
    lay = ext.strategy.layout
    n = ext.num_qubits
    block = lay.block(t)
    vec = ext.vector
    identity = is_identity(u)
    if not identity:
        vec = apply_op(vec, u, block, n)
    for i in swapped:
        vec = apply_op(vec, SWAP, [lay.share(t, i), ext.r_index(t, i)], n)
    if not identity:
        vec = apply_op(vec, u.conj().T, block, n)
    return vec


def swap_out_C(ext: ExtendedState, t: int, i: int) -> ExtendedState:
    """Apply ``C_i^t = U^dag SWAP(Q_i^t, R_i^t) U``."""
    u = ext.strategy.unitary(t, SingleQubit(i))
    return ext.with_vector(_conjugated_swaps(ext, t, u, [i]))


def swap_out_D(ext: ExtendedState, t: int, T, S) -> ExtendedState:
    """Apply ``D_{T,S}^t = V_S^dag (prod_{i in T} SWAP(Q_i^t, R_i^t)) V_S``."""
    S = tuple(sorted(S))
    T = tuple(sorted(T))
    if not set(T) <= set(S):
        raise ValueError(f"T={T} is not a subset of S={S}")
    if not T:
        return ext
    u = ext.strategy.unitary(t, QubitSet(S))
    return ext.with_vector(_conjugated_swaps(ext, t, u, T))


def c_matrix(strategy: ProverStrategy, t: int, i: int) -> np.ndarray:
    """Explicit matrix of ``C_i^t`` on (prover t's block, R_i^t), R last."""
    b = strategy.layout.block_size
    u = kron(strategy.unitary(t, SingleQubit(i)), np.eye(2))
    sw = apply_op(np.eye(2 ** (b + 1), dtype=complex), SWAP, [i, b], b + 1)
    return u.conj().T @ sw @ u


def d_matrix(strategy: ProverStrategy, t: int, T, S) -> np.ndarray:
    """Explicit matrix of ``D_{T,S}^t`` on (block, R_i^t for i in T in sorted order)."""
    b = strategy.layout.block_size
    T = sorted(T)
    width = b + len(T)
    v = kron(strategy.unitary(t, QubitSet(tuple(sorted(S)))), np.eye(2 ** len(T)))
    sw = np.eye(2**width, dtype=complex)
    for pos, i in enumerate(T):
        sw = apply_op(sw, SWAP, [i, b + pos], width)
    return v.conj().T @ sw @ v


# ---------------------------------------------------------------- witness extraction


def _extract_purified(strategy: ProverStrategy, order: Sequence[int], steps: list) -> np.ndarray:
    lay = strategy.layout
    ext = extend(strategy)
    for t in order:
        for i in range(lay.n):
            ext = swap_out_C(ext, t, i)
            steps.append(f"C_{i}^{t}")
    keep = [ext.r_index(t, i) for i in range(lay.n) for t in range(lay.r)]
    rho_r = reduced_density(ext.vector, keep, ext.num_qubits)
    steps.append("trace out Q, Rbar, S")
    return rho_r


def prover_channel_kraus(strategy: ProverStrategy, t: int) -> list:
    """Kraus operators of the channel from prover ``t``'s block to ``R_1^t..R_n^t``.

    It applies ``C_n^t ... C_1^t`` to (block, maximally mixed R^t) and traces the
    block; the maximally mixed input stands in for the EPR halves whose partners
    are traced anyway.
    """
    lay = strategy.layout
    n, b = lay.n, lay.block_size
    width = b + n
    w = np.eye(2**width, dtype=complex)
    for i in range(n):
        u = strategy.unitary(t, SingleQubit(i))
        ident = is_identity(u)
        if not ident:
            w = apply_op(w, u, range(b), width)
        w = apply_op(w, SWAP, [i, b + i], width)
        if not ident:
            w = apply_op(w, u.conj().T, range(b), width)
    # w maps (block, R) -> (block, R); K_{p,x} = (<p| x I) W (I x |x>) / sqrt(2^n)
    wt = w.reshape(2**b, 2**n, 2**b, 2**n)
    scale = 1 / np.sqrt(2**n)
    return [wt[p, :, :, x] * scale for p, x in product(range(2**b), range(2**n))]


def _extract_channel(strategy: ProverStrategy, order: Sequence[int], steps: list) -> np.ndarray:
    lay = strategy.layout
    if lay.total_qubits > MAX_DENSITY_QUBITS:
        raise MemoryError(f"trace-early extraction limited to {MAX_DENSITY_QUBITS} strategy qubits")
    psi = strategy.shared_state.amplitudes
    rho = np.outer(psi, psi.conj())
    # positions of each prover's group of qubits in the current density
    sizes = [lay.block_size] * lay.r
    for t in order:
        start = sum(sizes[:t])
        total = sum(sizes)
        rho = apply_channel_density(rho, prover_channel_kraus(strategy, t), range(start, start + sizes[t]), total)
        sizes[t] = lay.n
        steps.append(f"C_{lay.n - 1}^{t}..C_0^{t} with R^{t} traced early")
    # now ordered (t, i); reorder to (i, t)
    n, r = lay.n, lay.r
    total = n * r
    perm = [t * n + i for i in range(n) for t in range(r)]
    rho = rho.reshape((2,) * (2 * total)).transpose(perm + [p + total for p in perm]).reshape(2**total, 2**total)
    return rho


def extract_witness(
    strategy: ProverStrategy,
    instance: HamiltonianInstance,
    method: str = "auto",
    prover_order: Sequence[int] | None = None,
) -> ExtractionResult:
    """Extracted witness ``sigma`` and its normalised energy ``Tr(H sigma)/m``.

    ``method`` is ``"purified"`` (full EPR-ancilla statevector), ``"channel"``
    (ancilla partners traced out up front, one channel per prover) or ``"auto"``.
    """
    lay = strategy.layout
    if strategy.n != instance.n:
        raise ValueError("strategy and instance disagree on n")
    order = list(range(lay.r)) if prover_order is None else list(prover_order)
    if sorted(order) != list(range(lay.r)):
        raise ValueError(f"prover order {order} is not a permutation")
    if method == "auto":
        method = "purified" if lay.total_qubits + 2 * lay.r * lay.n <= 20 else "channel"
    steps: list = []
    if method == "purified":
        rho_r = _extract_purified(strategy, order, steps)
    elif method == "channel":
        rho_r = _extract_channel(strategy, order, steps)
    else:
        raise ValueError(f"unknown extraction method {method!r}")
    sigma = code5.decode_groups(rho_r, lay.n)
    steps.append("decode each group R_i^0..R_i^4")
    sigma = (sigma + sigma.conj().T) / 2
    state = MixedState(lay.n, sigma, check=False)
    return ExtractionResult(state, energy(instance, sigma) / instance.m, steps, method)


# ---------------------------------------------------------------- diagnostics


def claim1_deviation(strategy: ProverStrategy, t: int, i: int, S) -> float:
    """``|| (C_i^t - D_{i,S}^t) |Psi~> ||^2``.

    Only the ``(R_i^t, Rbar_i^t)`` pair is materialised: every other ancilla pair
    is a product factor untouched by either operator.
    """
    S = tuple(sorted(S))
    if i not in S:
        raise ValueError(f"qubit {i} not in S={S}")
    ext = extend(strategy, [(t, i)])
    c = swap_out_C(ext, t, i).vector
    d = swap_out_D(ext, t, [i], S).vector
    return float(np.vdot(c - d, c - d).real)


def claim1_average(strategy: ProverStrategy, t: int | None = None) -> float:
    """Average of :func:`claim1_deviation` over ``i`` and ``k``-sets ``S`` containing ``i``
    (and over provers when ``t`` is None)."""
    lay = strategy.layout
    provers = range(lay.r) if t is None else [t]
    vals = []
    for p in provers:
        per_i = []
        for i in range(lay.n):
            sets = sets_containing(lay.n, strategy.k, i)
            per_i.append(np.mean([claim1_deviation(strategy, p, i, S) for S in sets]))
        vals.append(np.mean(per_i))
    return float(np.mean(vals))


def _f_operator_targets(strategy: ProverStrategy, i: int, choice):
    lay = strategy.layout
    if choice is None:
        choice = ["U"] * lay.r
    if len(choice) != lay.r:
        raise ValueError(f"need one choice per prover, got {len(choice)}")
    unitaries = []
    for t, c in enumerate(choice):
        if c == "U":
            unitaries.append(strategy.unitary(t, SingleQubit(i)))
        else:
            S = tuple(sorted(c))
            if i not in S or len(S) != strategy.k:
                raise ValueError(f"choice {c} for prover {t} is not a k-set containing {i}")
            unitaries.append(strategy.unitary(t, QubitSet(S)))
    return unitaries


def _f_apply_vector(strategy, vec, n_total, i, unitaries):
    lay = strategy.layout
    for t, u in enumerate(unitaries):
        if not is_identity(u):
            vec = apply_op(vec, u, lay.block(t), n_total)
    vec = apply_op(vec, code5.check_projector(), lay.group(i), n_total)
    for t, u in enumerate(unitaries):
        if not is_identity(u):
            vec = apply_op(vec, u.conj().T, lay.block(t), n_total)
    return vec


def apply_F(state, strategy: ProverStrategy, i: int, choice=None):
    """Sandwich ``state`` with ``X^dag CHECK_{Q_i} X``, ``X = (x)_t X_i^t``.

    ``choice[t]`` is ``"U"`` (use ``U_i^t``) or a set ``S`` containing ``i`` (use
    ``V_S^t``). Mixed inputs give a subnormalised :class:`MixedState`; pure
    inputs (a strategy, a :class:`PureState` or an :class:`ExtendedState`) give a
    subnormalised :class:`PureState` / :class:`ExtendedState` vector ``A|v>``,
    whose density is the rank-one mixed output.
    """
    unitaries = _f_operator_targets(strategy, i, choice)
    if isinstance(state, ProverStrategy):
        state = state.shared_state
    if isinstance(state, ExtendedState):
        return state.with_vector(_f_apply_vector(strategy, state.vector, state.num_qubits, i, unitaries))
    if isinstance(state, PureState):
        vec = _f_apply_vector(strategy, state.amplitudes, state.num_qubits, i, unitaries)
        return PureState(state.num_qubits, vec, subnormalized=True)
    if isinstance(state, MixedState):
        n_total = state.num_qubits
        if n_total > MAX_DENSITY_QUBITS:
            raise MemoryError("density input too large")
        left = _f_apply_vector(strategy, state.matrix, n_total, i, unitaries)
        both = _f_apply_vector(strategy, left.conj().T, n_total, i, unitaries)
        return MixedState(n_total, both.conj().T, subnormalized=True, check=False)
    raise TypeError(f"cannot apply F to {type(state).__name__}")


def f_trace(output) -> float:
    if isinstance(output, MixedState):
        return output.trace
    vec = output.vector if isinstance(output, ExtendedState) else output.amplitudes
    return float(np.vdot(vec, vec).real)


def check_success(strategy: ProverStrategy, instance: HamiltonianInstance, i: int, choice=None) -> float:
    """Codespace-check success for qubit ``i`` under a per-prover choice, via the protocol."""
    lay = strategy.layout
    unitaries = _f_operator_targets(strategy, i, choice)
    vec = strategy.shared_state.amplitudes
    for t, u in enumerate(unitaries):
        if not is_identity(u):
            vec = apply_op(vec, u, lay.block(t), lay.total_qubits)
    return answer_accept_probability(instance, strategy, CodeTestAll(i), vec)
