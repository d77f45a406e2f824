"""Dense multi-qubit linear algebra.

Convention: global qubit 0 is the most significant bit of an amplitude index,
so a state on ``n`` qubits reshaped to ``(2,) * n`` has qubit ``q`` on axis ``q``.

The dataclasses validate on construction; the underscore-free array helpers
(``apply_op``, ``reduced_density`` ...) work on raw numpy arrays and are what the
protocol, extraction and optimizer modules use on their hot paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

NORM_TOL = 1e-10
PSD_TOL = -1e-9

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}
SWAP = np.array(
    [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
)


class DimensionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PureState:
    """Statevector on ``num_qubits`` qubits.

    ``subnormalized`` marks vectors produced by trace non-increasing maps; their
    norm may be anywhere in ``[0, 1]``.
    """

    num_qubits: int
    amplitudes: np.ndarray
    subnormalized: bool = False
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        object.__setattr__(self, "amplitudes", amps)
        if self.num_qubits < 0 or amps.size != 2**self.num_qubits:
            raise DimensionError(
                f"expected {2 ** self.num_qubits} amplitudes, got {amps.size}"
            )
        if self.check:
            norm = np.linalg.norm(amps)
            if self.subnormalized:
                if norm > 1 + NORM_TOL:
                    raise ValueError(f"subnormalized state has norm {norm}")
            elif abs(norm - 1) > NORM_TOL:
                raise ValueError(f"state norm {norm} differs from 1")

    @classmethod
    def from_bits(cls, bits: str) -> "PureState":
        vec = np.zeros(2 ** len(bits), dtype=complex)
        vec[int(bits, 2) if bits else 0] = 1
        return cls(len(bits), vec)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def density(self) -> "MixedState":
        a = self.amplitudes
        return MixedState(
            self.num_qubits, np.outer(a, a.conj()), subnormalized=self.subnormalized
        )


@dataclass(frozen=True, eq=False)
class MixedState:
    num_qubits: int
    matrix: np.ndarray
    subnormalized: bool = False
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", mat)
        dim = 2**self.num_qubits
        if mat.shape != (dim, dim):
            raise DimensionError(f"expected {dim}x{dim} matrix, got {mat.shape}")
        if not self.check:
            return
        if not np.allclose(mat, mat.conj().T, atol=NORM_TOL, rtol=0):
            raise ValueError("density matrix is not Hermitian")
        low = np.linalg.eigvalsh(mat)[0]
        if low < PSD_TOL:
            raise ValueError(f"density matrix has eigenvalue {low}")
        tr = np.trace(mat).real
        if self.subnormalized:
            if tr < -NORM_TOL or tr > 1 + NORM_TOL:
                raise ValueError(f"subnormalized trace {tr} outside [0, 1]")
        elif abs(tr - 1) > NORM_TOL:
            raise ValueError(f"trace {tr} differs from 1")

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)


@dataclass(frozen=True, eq=False)
class QubitOperator:
    """A ``2**arity`` square matrix acting on the listed global qubits."""

    matrix: np.ndarray
    targets: tuple
    unitary: bool = False

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        targets = tuple(int(t) for t in self.targets)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "targets", targets)
        if len(set(targets)) != len(targets):
            raise ValueError(f"duplicate targets {targets}")
        if any(t < 0 for t in targets):
            raise ValueError(f"negative target in {targets}")
        dim = 2 ** len(targets)
        if mat.shape != (dim, dim):
            raise DimensionError(
                f"{len(targets)} targets need a {dim}x{dim} matrix, got {mat.shape}"
            )
        if self.unitary and not is_unitary(mat):
            raise ValueError("operator flagged unitary is not unitary")

    @property
    def arity(self) -> int:
        return len(self.targets)

    def dagger(self) -> "QubitOperator":
        return QubitOperator(self.matrix.conj().T, self.targets, self.unitary)


State = Union[PureState, MixedState]


def is_unitary(mat: np.ndarray, atol: float = NORM_TOL) -> bool:
    mat = np.asarray(mat)
    return np.allclose(mat @ mat.conj().T, np.eye(mat.shape[0]), atol=atol, rtol=0)


def kron(*mats) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def pauli_string(label: str) -> np.ndarray:
    return kron(*(PAULIS[c] for c in label))


def _check_targets(targets: Sequence[int], n: int) -> None:
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate targets {tuple(targets)}")
    for t in targets:
        if not 0 <= t < n:
            raise IndexError(f"qubit {t} out of range for {n} qubits")


# ---------------------------------------------------------------- array kernels


def apply_op(vec: np.ndarray, mat: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Apply ``mat`` on ``targets`` of an ``n``-qubit vector.

    ``vec`` may carry trailing batch dimensions: shape ``(2**n, *batch)``.
    """
    targets = list(targets)
    a = len(targets)
    batch = vec.shape[1:]
    first = targets[0] if targets else 0
    if targets == list(range(first, first + a)) and first + a <= n:
        # contiguous block: a batched matrix product, no axis shuffling
        d = 2**a
        left, right = 2**first, 2 ** (n - first - a) * int(np.prod(batch, dtype=int))
        mat = np.asarray(mat)
        if mat.shape != (d, d):
            raise DimensionError(f"matrix {mat.shape} does not act on {a} qubits")
        if right == 1:
            out = vec.reshape(left, d) @ mat.T
        else:
            out = np.matmul(mat, vec.reshape(left, d, right))
        return out.reshape((2**n,) + batch)
    psi = vec.reshape((2,) * n + batch)
    m = np.asarray(mat).reshape((2,) * (2 * a))
    out = np.tensordot(m, psi, axes=(list(range(a, 2 * a)), targets))
    out = np.moveaxis(out, list(range(a)), targets)
    return out.reshape((2**n,) + batch)


def apply_rect(
    vec: np.ndarray, mat: np.ndarray, targets: Sequence[int], n: int, n_out: int
) -> np.ndarray:
    """Apply a ``2**n_out x 2**len(targets)`` map to ``targets``.

    The output qubits replace the targets; they take the place of ``targets[0]``
    in the ordering of the untouched qubits. Returns a flat vector (plus batch).
    """
    targets = list(targets)
    a = len(targets)
    batch = vec.shape[1:]
    psi = vec.reshape((2,) * n + batch)
    m = np.asarray(mat).reshape((2,) * (n_out + a))
    out = np.tensordot(m, psi, axes=(list(range(n_out, n_out + a)), targets))
    rest = [q for q in range(n) if q not in targets]
    pos = sum(1 for q in rest if q < targets[0])
    out = np.moveaxis(out, list(range(n_out)), list(range(pos, pos + n_out)))
    n_new = n - a + n_out
    return out.reshape((2**n_new,) + batch)


def apply_op_density(rho: np.ndarray, mat: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """``mat rho mat^dagger`` with ``mat`` acting on ``targets``."""
    dim = 2**n
    left = apply_op(rho, mat, targets, n)
    # right multiplication by mat^dagger == conj of applying mat to rows of rho^dagger
    right = apply_op(left.conj().T, mat, targets, n)
    return right.conj().T.reshape(dim, dim)


def apply_channel_density(
    rho: np.ndarray, kraus: Sequence[np.ndarray], targets: Sequence[int], n: int
) -> np.ndarray:
    """Apply the channel with the given Kraus operators to ``targets``.

    Kraus operators may be rectangular; outputs are placed as in :func:`apply_rect`.
    """
    a = len(targets)
    n_out = int(np.log2(kraus[0].shape[0]))
    if kraus[0].shape[1] != 2**a:
        raise DimensionError("Kraus input dimension does not match targets")
    n_new = n - a + n_out
    out = np.zeros((2**n_new, 2**n_new), dtype=complex)
    for k in kraus:
        left = apply_rect(rho, k, targets, n, n_out)  # (2**n_new, 2**n)
        both = apply_rect(left.conj().T, k, targets, n, n_out)
        out += both.conj().T
    return out


def reduced_density(vec: np.ndarray, keep: Sequence[int], n: int) -> np.ndarray:
    """Reduced density matrix of a pure vector on ``keep`` (in the given order)."""
    keep = list(keep)
    rest = [q for q in range(n) if q not in keep]
    psi = vec.reshape((2,) * n).transpose(keep + rest).reshape(2 ** len(keep), -1)
    return psi @ psi.conj().T


def partial_trace_density(rho: np.ndarray, keep: Sequence[int], n: int) -> np.ndarray:
    keep = list(keep)
    rest = [q for q in range(n) if q not in keep]
    t = rho.reshape((2,) * (2 * n))
    perm = keep + rest + [q + n for q in keep] + [q + n for q in rest]
    t = t.transpose(perm)
    dk, dr = 2 ** len(keep), 2 ** len(rest)
    return np.einsum("arbr->ab", t.reshape(dk, dr, dk, dr))


def expectation(vec: np.ndarray, mat: np.ndarray, targets: Sequence[int], n: int) -> float:
    """``<vec| mat_targets |vec>`` via the reduced density on ``targets``."""
    red = reduced_density(vec, targets, n)
    return float(np.real(np.trace(mat @ red)))


def permute_qubits(vec: np.ndarray, perm: Sequence[int], n: int) -> np.ndarray:
    """New vector whose qubit ``q`` is old qubit ``perm[q]``."""
    return vec.reshape((2,) * n).transpose(list(perm)).reshape(-1)


def psd_sqrt(mat: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(mat)
    w = np.clip(w, 0, None)
    return (v * np.sqrt(w)) @ v.conj().T


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_state_vector(n: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    return v / np.linalg.norm(v)


def random_density(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    dim = 2**n
    g = rng.standard_normal((dim, rank or dim)) + 1j * rng.standard_normal((dim, rank or dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def polar_unitary(mat: np.ndarray) -> np.ndarray:
    """Closest unitary to ``mat`` in Frobenius norm (unitary factor of the polar decomposition)."""
    u, _, vh = np.linalg.svd(mat)
    return u @ vh


# ---------------------------------------------------------------- public operations


def apply(op: QubitOperator, state: State) -> State:
    """Apply ``op`` on its targets, tensored with identity elsewhere."""
    n = state.num_qubits
    _check_targets(op.targets, n)
    if isinstance(state, PureState):
        out = apply_op(state.amplitudes, op.matrix, op.targets, n)
        return PureState(n, out, subnormalized=state.subnormalized or not op.unitary, check=op.unitary)
    out = apply_op_density(state.matrix, op.matrix, op.targets, n)
    return MixedState(n, out, subnormalized=state.subnormalized or not op.unitary, check=op.unitary)


def partial_trace(state: State, keep) -> MixedState:
    """Trace out everything but ``keep``; kept qubits stay in ascending order."""
    keep = sorted(set(int(q) for q in keep))
    n = state.num_qubits
    _check_targets(keep, n)
    if isinstance(state, PureState):
        red = reduced_density(state.amplitudes, keep, n)
    else:
        red = partial_trace_density(state.matrix, keep, n)
    return MixedState(len(keep), red, subnormalized=state.subnormalized, check=False)


def tensor(a: State, b: State) -> State:
    if isinstance(a, PureState) and isinstance(b, PureState):
        return PureState(
            a.num_qubits + b.num_qubits,
            np.kron(a.amplitudes, b.amplitudes),
            subnormalized=a.subnormalized or b.subnormalized,
        )
    if isinstance(a, MixedState) and isinstance(b, MixedState):
        return MixedState(
            a.num_qubits + b.num_qubits,
            np.kron(a.matrix, b.matrix),
            subnormalized=a.subnormalized or b.subnormalized,
            check=False,
        )
    raise TypeError("tensor needs two states of the same kind")


def fidelity(a: State, b: State) -> float:
    """Squared Uhlmann fidelity ``(Tr sqrt(sqrt(a) b sqrt(a)))**2``, clipped to [0, 1]."""
    if a.num_qubits != b.num_qubits:
        raise DimensionError("fidelity of states on different qubit counts")
    if isinstance(a, PureState) and isinstance(b, PureState):
        return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))
    ma = a.matrix if isinstance(a, MixedState) else a.density().matrix
    mb = b.matrix if isinstance(b, MixedState) else b.density().matrix
    root = psd_sqrt(ma)
    w = np.linalg.eigvalsh(root @ mb @ root)
    f = np.sum(np.sqrt(np.clip(w, 0, None))) ** 2
    return float(min(1.0, max(0.0, f)))


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(a - b))))
