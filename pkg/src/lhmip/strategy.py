"""Prover strategies: shared state plus per-question unitaries on each prover's block.

Prover ``t`` owns a contiguous block of ``n + aux`` qubits. After it applies its
unitary, qubit ``i`` of the block is the answer register for logical qubit ``i``
and the trailing ``aux`` qubits are its private register. Set questions are
served by a *rule*, a callable ``(t, S) -> matrix``, so that the ``C(n, k)`` set
unitaries never have to be materialised.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Union

import numpy as np

from . import code5
from .hamiltonian import HamiltonianInstance, matrix_to_json
from .qmath import (
    PureState,
    QubitOperator,
    apply_op,
    haar_unitary,
    is_unitary,
    random_state_vector,
)

R = code5.R
MAX_STRATEGY_QUBITS = 26


@dataclass(frozen=True)
class SingleQubit:
    i: int


@dataclass(frozen=True)
class QubitSet:
    S: tuple

    def __post_init__(self):
        object.__setattr__(self, "S", tuple(sorted(int(q) for q in self.S)))


ProverQuestion = Union[SingleQubit, QubitSet]


@dataclass(frozen=True)
class RegisterLayout:
    n: int
    r: int = R
    aux: int = 0

    def __post_init__(self):
        if self.n < 1 or self.r < 1 or self.aux < 0:
            raise ValueError(f"invalid layout n={self.n}, r={self.r}, aux={self.aux}")

    @property
    def block_size(self) -> int:
        return self.n + self.aux

    @property
    def total_qubits(self) -> int:
        return self.r * self.block_size

    def block(self, t: int) -> list:
        b = self.block_size
        return list(range(t * b, (t + 1) * b))

    def share(self, t: int, i: int) -> int:
        """Global index of ``Q_i^t``."""
        if not (0 <= t < self.r and 0 <= i < self.n):
            raise IndexError(f"no share register for prover {t}, qubit {i}")
        return t * self.block_size + i

    def aux_qubits(self, t: int) -> list:
        b = self.block_size
        return list(range(t * b + self.n, (t + 1) * b))

    def group(self, i: int) -> list:
        """The ``r`` share registers of logical qubit ``i``, prover order."""
        return [self.share(t, i) for t in range(self.r)]


# ---------------------------------------------------------------- set rules


class IdentityRule:
    def __init__(self, dim: int):
        self.dim = dim

    def __call__(self, t: int, S: tuple) -> np.ndarray:
        return np.eye(self.dim, dtype=complex)


class TableRule:
    """Explicit ``(t, S) -> unitary`` table with identity for missing entries."""

    def __init__(self, dim: int, table: dict | None = None):
        self.dim = dim
        self.table = {(int(t), tuple(sorted(S))): np.asarray(u, dtype=complex) for (t, S), u in (table or {}).items()}

    def __call__(self, t: int, S: tuple) -> np.ndarray:
        u = self.table.get((t, tuple(S)))
        return np.eye(self.dim, dtype=complex) if u is None else u


class HaarRule:
    """Independent Haar-random unitary for every ``(t, S)``, reproducible from ``seed``."""

    def __init__(self, dim: int, seed: int):
        self.dim = dim
        self.seed = seed
        self._cache: dict = {}

    def __call__(self, t: int, S: tuple) -> np.ndarray:
        key = (t, tuple(S))
        if key not in self._cache:
            rng = np.random.default_rng([self.seed, 2, t, *S])
            self._cache[key] = haar_unitary(self.dim, rng)
        return self._cache[key]


class PerturbedRule:
    def __init__(self, base: Callable, theta: float, seed: int):
        self.base = base
        self.theta = theta
        self.seed = seed
        self.dim = base.dim
        self._cache: dict = {}

    def __call__(self, t: int, S: tuple) -> np.ndarray:
        key = (t, tuple(S))
        if key not in self._cache:
            rng = np.random.default_rng([self.seed, 1, t, *S])
            self._cache[key] = random_rotation(self.dim, self.theta, rng) @ self.base(t, S)
        return self._cache[key]


# ---------------------------------------------------------------- strategy


@dataclass(frozen=True, eq=False)
class ProverStrategy:
    layout: RegisterLayout
    shared_state: PureState
    single_unitaries: dict
    set_rule: Callable = field(default=None)
    k: int = 1

    def __post_init__(self):
        lay = self.layout
        if self.shared_state.num_qubits != lay.total_qubits:
            raise ValueError(
                f"shared state has {self.shared_state.num_qubits} qubits, layout needs {lay.total_qubits}"
            )
        if lay.total_qubits > MAX_STRATEGY_QUBITS:
            raise ValueError(f"strategy exceeds {MAX_STRATEGY_QUBITS} qubits")
        dim = 2**lay.block_size
        singles = {}
        for t in range(lay.r):
            for i in range(lay.n):
                u = self.single_unitaries.get((t, i))
                u = np.eye(dim, dtype=complex) if u is None else np.asarray(u, dtype=complex)
                if u.shape != (dim, dim) or not is_unitary(u):
                    raise ValueError(f"U_{i}^{t} is not a {dim}x{dim} unitary")
                singles[(t, i)] = u
        object.__setattr__(self, "single_unitaries", singles)
        if self.set_rule is None:
            object.__setattr__(self, "set_rule", IdentityRule(dim))

    @property
    def n(self) -> int:
        return self.layout.n

    def unitary(self, t: int, question: ProverQuestion) -> np.ndarray:
        """Block matrix prover ``t`` applies for ``question``."""
        if isinstance(question, SingleQubit):
            return self.single_unitaries[(t, question.i)]
        if isinstance(question, QubitSet):
            u = np.asarray(self.set_rule(t, question.S), dtype=complex)
            if u.shape != (2**self.layout.block_size,) * 2:
                raise ValueError(f"set rule returned a {u.shape} matrix for S={question.S}")
            return u
        raise TypeError(f"unknown question {question!r}")

    def operator(self, t: int, question: ProverQuestion) -> QubitOperator:
        return QubitOperator(self.unitary(t, question), self.layout.block(t), unitary=True)

    def answer_qubits(self, t: int, question: ProverQuestion) -> list:
        if isinstance(question, SingleQubit):
            return [self.layout.share(t, question.i)]
        return [self.layout.share(t, i) for i in question.S]


def validate_question(strategy: ProverStrategy, question: ProverQuestion) -> None:
    n = strategy.n
    if isinstance(question, SingleQubit):
        if not 0 <= question.i < n:
            raise ValueError(f"qubit {question.i} out of range")
    elif isinstance(question, QubitSet):
        S = question.S
        if not S or len(set(S)) != len(S) or len(S) > strategy.k or S[0] < 0 or S[-1] >= n:
            raise ValueError(f"invalid set question {S} for n={n}, k={strategy.k}")
    else:
        raise ValueError(f"unknown question {question!r}")


def is_identity(u: np.ndarray) -> bool:
    return np.array_equal(u, np.eye(u.shape[0]))


def respond(strategy: ProverStrategy, t: int, question: ProverQuestion, state=None):
    """Prover ``t`` applies its unitary for ``question`` to the global state.

    Returns the new amplitude vector and the global indices of the answer qubits.
    """
    validate_question(strategy, question)
    lay = strategy.layout
    vec = strategy.shared_state.amplitudes if state is None else np.asarray(
        state.amplitudes if isinstance(state, PureState) else state
    )
    u = strategy.unitary(t, question)
    if not is_identity(u):
        vec = apply_op(vec, u, lay.block(t), lay.total_qubits)
    return vec, strategy.answer_qubits(t, question)


def question_sets(n: int, k: int) -> list:
    """Every set a prover can be asked for: all subsets of size 1..k, sorted."""
    out = []
    for size in range(1, k + 1):
        out.extend(combinations(range(n), size))
    return out


# ---------------------------------------------------------------- constructors


def encode_witness(witness: np.ndarray, n: int, aux: int = 0) -> np.ndarray:
    """Qubit-wise encoding of ``witness`` in prover-block order, aux qubits in |0>."""
    iso = code5.code_spec().encoding_isometry.reshape((2,) * R + (2,))
    psi = np.asarray(witness, dtype=complex).reshape((2,) * n)
    for i in range(n):
        # logical axis i is replaced by 5 share axes appended at the end
        psi = np.tensordot(psi, iso, axes=([0], [R]))
    # axes now ordered (i, t) for i in 0..n-1, t in 0..4 -> want (t, i)
    perm = [i * R + t for t in range(R) for i in range(n)]
    psi = psi.transpose(perm).reshape((2**n,) * R)
    if aux:
        padded = np.zeros((2**n, 2**aux) * R, dtype=complex)
        padded[(slice(None), 0) * R] = psi
        psi = padded
    return np.ascontiguousarray(psi).reshape(-1)


def honest(instance: HamiltonianInstance, witness: PureState, aux: int = 0) -> ProverStrategy:
    """Provers share the qubit-wise encoding of ``witness``; every unitary is the identity."""
    n = instance.n
    if witness.num_qubits != n:
        raise ValueError(f"witness has {witness.num_qubits} qubits, instance has {n}")
    layout = RegisterLayout(n, R, aux)
    state = PureState(layout.total_qubits, encode_witness(witness.amplitudes, n, aux))
    return ProverStrategy(layout, state, {}, IdentityRule(2**layout.block_size), instance.k)


def random_strategy(n: int, k: int, seed: int, aux: int = 0) -> ProverStrategy:
    """Haar-random shared state and Haar-random unitaries for every question."""
    layout = RegisterLayout(n, R, aux)
    rng = np.random.default_rng([seed, 0])
    dim = 2**layout.block_size
    state = PureState(layout.total_qubits, random_state_vector(layout.total_qubits, rng))
    singles = {(t, i): haar_unitary(dim, rng) for t in range(R) for i in range(n)}
    return ProverStrategy(layout, state, singles, HaarRule(dim, seed), k)


def random_rotation(dim: int, theta: float, rng: np.random.Generator) -> np.ndarray:
    """``exp(i theta G)`` for a random Hermitian ``G`` of unit operator norm."""
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    g = (g + g.conj().T) / 2
    w, v = np.linalg.eigh(g)
    w = w / np.max(np.abs(w))
    return (v * np.exp(1j * theta * w)) @ v.conj().T


def perturb(strategy: ProverStrategy, theta: float, seed: int) -> ProverStrategy:
    """Multiply every unitary by an independent ``exp(i theta G)`` (applied after it)."""
    if theta < 0:
        raise ValueError("theta must be non-negative")
    if theta == 0:
        return strategy
    dim = 2**strategy.layout.block_size
    singles = {}
    for (t, i), u in sorted(strategy.single_unitaries.items()):
        rng = np.random.default_rng([seed, 0, t, i])
        singles[(t, i)] = random_rotation(dim, theta, rng) @ u
    rule = PerturbedRule(strategy.set_rule, theta, seed)
    return ProverStrategy(strategy.layout, strategy.shared_state, singles, rule, strategy.k)


def _swap_into(dim_qubits: int, src: int, dst: int) -> np.ndarray:
    """Permutation unitary on a block exchanging qubits ``src`` and ``dst``."""
    dim = 2**dim_qubits
    eye = np.eye(dim, dtype=complex)
    if src == dst:
        return eye
    perm = list(range(dim_qubits))
    perm[src], perm[dst] = perm[dst], perm[src]
    return eye.reshape((2,) * dim_qubits + (dim,)).transpose(perm + [dim_qubits]).reshape(dim, dim)


def epr_pair_cheat(n: int, k: int = 2) -> ProverStrategy:
    """Provers 0 and 1 share one EPR pair and always answer with their half.

    The half sits on qubit 0 of each block; for question ``i`` it is moved to
    ``Q_i``, for a set question to ``Q_{min S}``. The other provers hold |0...0>
    and answer with it.
    """
    if n < 2:
        raise ValueError("the EPR cheat needs n >= 2")
    layout = RegisterLayout(n, R, 0)
    total = layout.total_qubits
    vec = np.zeros(2**total, dtype=complex)
    a, b = layout.share(0, 0), layout.share(1, 0)
    vec[0] = 1 / np.sqrt(2)
    vec[(1 << (total - 1 - a)) | (1 << (total - 1 - b))] = 1 / np.sqrt(2)
    singles = {}
    table = {}
    for t in (0, 1):
        for i in range(n):
            singles[(t, i)] = _swap_into(n, 0, i)
        for S in question_sets(n, k):
            table[(t, S)] = _swap_into(n, 0, min(S))
    return ProverStrategy(layout, PureState(total, vec), singles, TableRule(2**n, table), k)


# ---------------------------------------------------------------- JSON


def _vec_to_json(vec: np.ndarray) -> list:
    return [[float(z.real), float(z.imag)] for z in vec]


def strategy_to_dict(strategy: ProverStrategy) -> dict:
    lay = strategy.layout
    return {
        "n": lay.n,
        "k": strategy.k,
        "r": lay.r,
        "aux": lay.aux,
        "state": _vec_to_json(strategy.shared_state.amplitudes),
        "single_unitaries": [
            {"prover": t, "qubit": i, "matrix": matrix_to_json(strategy.single_unitaries[(t, i)])}
            for t in range(lay.r)
            for i in range(lay.n)
        ],
        "set_unitaries": [
            {"prover": t, "set": list(S), "matrix": matrix_to_json(strategy.unitary(t, QubitSet(S)))}
            for t in range(lay.r)
            for S in question_sets(lay.n, strategy.k)
        ],
    }


def _complex(arr) -> np.ndarray:
    a = np.asarray(arr, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def strategy_from_dict(data: dict) -> ProverStrategy:
    layout = RegisterLayout(int(data["n"]), int(data.get("r", R)), int(data.get("aux", 0)))
    if layout.r != R:
        raise ValueError("only r = 5 provers are supported")
    state = PureState(layout.total_qubits, _complex(data["state"]))
    singles = {(int(e["prover"]), int(e["qubit"])): _complex(e["matrix"]) for e in data.get("single_unitaries", [])}
    table = {(int(e["prover"]), tuple(e["set"])): _complex(e["matrix"]) for e in data.get("set_unitaries", [])}
    dim = 2**layout.block_size
    for key, u in table.items():
        if u.shape != (dim, dim) or not is_unitary(u):
            raise ValueError(f"V_S^t for {key} is not a {dim}x{dim} unitary")
    return ProverStrategy(layout, state, singles, TableRule(dim, table), int(data.get("k", 1)))


def load_strategy(path) -> ProverStrategy:
    with open(path) as fh:
        return strategy_from_dict(json.load(fh))
