"""k-local Hamiltonian instances: model, JSON parser, generators, exact ground states.

Instance file format::

    {"n": 3, "k": 2,
     "terms": [{"qubits": [0, 1], "matrix": [[[re, im], ...], ...]}, ...]}

Matrices are row-major; the first listed qubit is the most significant. Supports
are canonicalised to ascending order on load (the matrix is permuted to match).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .qmath import MixedState, PureState, apply_op, partial_trace_density, reduced_density

VALIDATION_TOL = 1e-9
GROUND_MAX_QUBITS = 12


class InstanceError(ValueError):
    """Raised when an instance fails validation; ``term`` names the offending term."""

    def __init__(self, message: str, term: int | None = None):
        self.term = term
        if term is not None:
            message = f"term {term}: {message}"
        super().__init__(message)


def _check_matrix(mat: np.ndarray, term: int | None = None) -> None:
    if not np.allclose(mat, mat.conj().T, atol=VALIDATION_TOL, rtol=0):
        raise InstanceError("matrix is not Hermitian", term)
    w = np.linalg.eigvalsh(mat)
    if w[0] < -VALIDATION_TOL:
        raise InstanceError(f"matrix is not positive semidefinite (eigenvalue {w[0]:.3g})", term)
    if w[-1] > 1 + VALIDATION_TOL:
        raise InstanceError(f"matrix norm {w[-1]:.6g} exceeds 1", term)


@dataclass(frozen=True, eq=False)
class LocalTerm:
    support: tuple
    matrix: np.ndarray

    def __post_init__(self):
        support = tuple(int(q) for q in self.support)
        mat = np.asarray(self.matrix, dtype=complex)
        if len(support) == 0:
            raise InstanceError("empty support")
        if len(set(support)) != len(support):
            raise InstanceError(f"repeated qubit in support {support}")
        if mat.shape != (2 ** len(support),) * 2:
            raise InstanceError(f"matrix shape {mat.shape} does not fit support {support}")
        order = sorted(range(len(support)), key=lambda a: support[a])
        if order != list(range(len(support))):
            a = len(support)
            mat = mat.reshape((2,) * (2 * a)).transpose(order + [a + o for o in order])
            mat = mat.reshape(2**a, 2**a)
            support = tuple(support[o] for o in order)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "matrix", mat)


@dataclass(frozen=True, eq=False)
class HamiltonianInstance:
    n: int
    k: int
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.n < 1:
            raise InstanceError("n must be positive")
        if not 1 <= self.k <= self.n:
            raise InstanceError(f"locality k={self.k} must satisfy 1 <= k <= n={self.n}")
        if not self.terms:
            raise InstanceError("instance needs at least one term")
        for j, term in enumerate(self.terms):
            if len(term.support) > self.k:
                raise InstanceError(f"support {term.support} larger than k={self.k}", j)
            if max(term.support) >= self.n:
                raise InstanceError(f"support {term.support} out of range for n={self.n}", j)
            _check_matrix(term.matrix, j)

    @property
    def m(self) -> int:
        return len(self.terms)


@dataclass(frozen=True)
class PromiseGap:
    a: float
    b: float

    def __post_init__(self):
        if not (0 <= self.a < self.b <= 1):
            raise ValueError(f"need 0 <= a < b <= 1, got a={self.a}, b={self.b}")


# ---------------------------------------------------------------- JSON


def _matrix_from_json(rows) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 3 or arr.shape[2] != 2:
        raise InstanceError("matrix must be a list of rows of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def matrix_to_json(mat: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(mat)]


def instance_from_dict(data: dict) -> HamiltonianInstance:
    try:
        n, k = int(data["n"]), int(data["k"])
        raw_terms = data["terms"]
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceError(f"missing or malformed field: {exc}") from exc
    terms = []
    for j, t in enumerate(raw_terms):
        try:
            qubits = [int(q) for q in t["qubits"]]
            mat = _matrix_from_json(t["matrix"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InstanceError(f"malformed term: {exc}", j) from exc
        if any(q < 0 or q >= n for q in qubits):
            raise InstanceError(f"support {qubits} out of range for n={n}", j)
        try:
            terms.append(LocalTerm(tuple(qubits), mat))
        except InstanceError as exc:
            raise InstanceError(str(exc), j) from exc
    return HamiltonianInstance(n, k, tuple(terms))


def parse_instance(text: str | bytes) -> HamiltonianInstance:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"malformed JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise InstanceError("instance must be a JSON object")
    return instance_from_dict(data)


def instance_to_dict(instance: HamiltonianInstance) -> dict:
    return {
        "n": instance.n,
        "k": instance.k,
        "terms": [
            {"qubits": list(t.support), "matrix": matrix_to_json(t.matrix)}
            for t in instance.terms
        ],
    }


def serialize(instance: HamiltonianInstance) -> str:
    from .reporting import dumps

    return dumps(instance_to_dict(instance))


def load_instance(path) -> HamiltonianInstance:
    with open(path, "rb") as fh:
        return parse_instance(fh.read())


# ---------------------------------------------------------------- energies


def term_operator(term: LocalTerm, n: int) -> np.ndarray:
    """The term tensored with identity, as a full ``2**n`` matrix."""
    eye = np.eye(2**n, dtype=complex)
    return apply_op(eye, term.matrix, term.support, n)


def full_matrix(instance: HamiltonianInstance) -> np.ndarray:
    dim = 2**instance.n
    h = np.zeros((dim, dim), dtype=complex)
    for term in instance.terms:
        h += term_operator(term, instance.n)
    return h


def energy(instance: HamiltonianInstance, state) -> float:
    """``sum_j Tr(H_j rho)`` for a pure or mixed state (or raw vector) on ``n`` qubits."""
    n = instance.n
    if isinstance(state, PureState):
        vec, rho = state.amplitudes, None
    elif isinstance(state, MixedState):
        vec, rho = None, state.matrix
    else:
        arr = np.asarray(state, dtype=complex)
        vec, rho = (arr, None) if arr.ndim == 1 else (None, arr)
    dim = 2**n
    if (vec is not None and vec.size != dim) or (rho is not None and rho.shape != (dim, dim)):
        raise ValueError(f"state dimension does not match n={n}")
    total = 0.0
    for term in instance.terms:
        if vec is not None:
            red = reduced_density(vec, term.support, n)
        else:
            red = partial_trace_density(rho, term.support, n)
        total += float(np.real(np.trace(term.matrix @ red)))
    return total


def ground(instance: HamiltonianInstance) -> tuple[float, PureState]:
    """Minimal eigenvalue of ``H`` and a normalised eigenvector (dense diagonalisation)."""
    if instance.n > GROUND_MAX_QUBITS:
        raise ValueError(f"dense diagonalisation limited to n <= {GROUND_MAX_QUBITS}")
    w, v = np.linalg.eigh(full_matrix(instance))
    vec = v[:, 0]
    # fix the global phase: largest-magnitude amplitude real positive
    idx = int(np.argmax(np.abs(vec)))
    vec = vec * (abs(vec[idx]) / vec[idx])
    return float(w[0]), PureState(instance.n, vec)


# ---------------------------------------------------------------- generators


def epr_projector() -> np.ndarray:
    """``I - |Phi+><Phi+|`` on two qubits."""
    phi = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    return np.eye(4, dtype=complex) - np.outer(phi, phi.conj())


def gen_epr_chain(n: int) -> HamiltonianInstance:
    if n < 2:
        raise ValueError("EPR chain needs n >= 2")
    proj = epr_projector()
    return HamiltonianInstance(n, 2, tuple(LocalTerm((j, j + 1), proj) for j in range(n - 1)))


def random_term_matrix(k: int, rng: np.random.Generator) -> np.ndarray:
    """Random PSD matrix of norm 1 with at least one zero eigenvalue."""
    dim = 2**k
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, _ = np.linalg.qr(g)
    rank = int(rng.integers(1, dim))  # 1 .. dim-1
    w = np.zeros(dim)
    w[:rank] = rng.uniform(0.1, 1.0, size=rank)
    w[0] = 1.0
    mat = (q * w) @ q.conj().T
    return (mat + mat.conj().T) / 2


def gen_random(n: int, k: int, m: int, seed: int) -> HamiltonianInstance:
    if not (1 <= k <= n) or m < 1:
        raise ValueError(f"invalid sizes n={n}, k={k}, m={m}")
    rng = np.random.default_rng(seed)
    subsets = list(combinations(range(n), k))
    terms = []
    for _ in range(m):
        support = subsets[int(rng.integers(len(subsets)))]
        terms.append(LocalTerm(support, random_term_matrix(k, rng)))
    return HamiltonianInstance(n, k, tuple(terms))


def single_qubit_terms(n: int, projector: Sequence[Sequence[complex]] | None = None) -> HamiltonianInstance:
    """``sum_i P`` on every qubit; ``P`` defaults to ``|1><1|`` (ground state all zeros)."""
    p = np.asarray(projector if projector is not None else [[0, 0], [0, 1]], dtype=complex)
    return HamiltonianInstance(n, 1, tuple(LocalTerm((i,), p) for i in range(n)))
