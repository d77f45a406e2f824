"""The [[5,1,3]] perfect code: encoder, codespace projector, syndromes and decoder.

Decoding measures the four stabilizer generators, applies the weight-one Pauli
correction indexed by the syndrome, then inverts the encoding isometry. The code
is perfect, so the 15 weight-one Paulis exhaust the 15 nonzero syndromes and the
correction table needs no tie-breaking; the lowest-qubit, X-before-Y-before-Z rule
is still applied when the table is built so the choice is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np

from .qmath import MixedState, PureState, apply_channel_density, pauli_string, reduced_density

R = 5
GENERATORS = ("XZZXI", "IXZZX", "XIXZZ", "ZXIXZ")
LOGICAL_X = "XXXXX"
LOGICAL_Z = "ZZZZZ"


def _anticommutes(p: str, q: str) -> bool:
    clashes = sum(1 for a, b in zip(p, q) if a != "I" and b != "I" and a != b)
    return clashes % 2 == 1


def syndrome_of(pauli: str) -> str:
    """Syndrome bits (generator order) of a Pauli error given as a 5-letter string."""
    return "".join("1" if _anticommutes(g, pauli) else "0" for g in GENERATORS)


def weight_one_paulis():
    for q in range(R):
        for p in "XYZ":
            yield "I" * q + p + "I" * (R - q - 1)


def weight_two_paulis():
    for q1 in range(R):
        for q2 in range(q1 + 1, R):
            for p1, p2 in product("XYZ", repeat=2):
                s = ["I"] * R
                s[q1], s[q2] = p1, p2
                yield "".join(s)


@dataclass(frozen=True)
class CodeSpec:
    r: int
    stabilizer_generators: tuple
    logical_x: str
    logical_z: str
    encoding_isometry: np.ndarray  # 32 x 2, columns |0_L>, |1_L>
    correction_table: dict  # syndrome bits -> Pauli string


@lru_cache(maxsize=None)
def code_spec() -> CodeSpec:
    proj = check_projector()
    zero = np.zeros(2**R, dtype=complex)
    zero[0] = 1
    zero_l = proj @ zero
    zero_l /= np.linalg.norm(zero_l)
    one_l = pauli_string(LOGICAL_X) @ zero_l
    iso = np.stack([zero_l, one_l], axis=1)
    table = {"0000": "IIIII"}
    for p in weight_one_paulis():
        table.setdefault(syndrome_of(p), p)
    # weight-2 fallbacks, only reachable for an imperfect code
    for p in weight_two_paulis():
        table.setdefault(syndrome_of(p), p)
    iso.setflags(write=False)
    return CodeSpec(R, GENERATORS, LOGICAL_X, LOGICAL_Z, iso, table)


@lru_cache(maxsize=None)
def _generator_matrices():
    return tuple(pauli_string(g) for g in GENERATORS)


@lru_cache(maxsize=None)
def syndrome_projector(bits: str) -> np.ndarray:
    out = np.eye(2**R, dtype=complex)
    for b, g in zip(bits, _generator_matrices()):
        sign = -1 if b == "1" else 1
        out = out @ (np.eye(2**R) + sign * g) / 2
    out.setflags(write=False)
    return out


def check_projector() -> np.ndarray:
    """The 32x32 projector onto the codespace (CHECK)."""
    return syndrome_projector("0000")


def all_syndromes():
    return ["".join(b) for b in product("01", repeat=4)]


@lru_cache(maxsize=None)
def kraus_operators() -> tuple:
    """Kraus operators ``E^dag R_s P_s`` (2 x 32) of the decoding channel, one per syndrome."""
    spec = code_spec()
    enc_dag = spec.encoding_isometry.conj().T
    ops = []
    for s in all_syndromes():
        corr = pauli_string(spec.correction_table[s])
        k = enc_dag @ corr @ syndrome_projector(s)
        k.setflags(write=False)
        ops.append(k)
    return tuple(ops)


@lru_cache(maxsize=None)
def decoding_unitary() -> np.ndarray:
    """32x32 unitary mapping 5 shares to (logical qubit, 4 syndrome qubits).

    Output qubit 0 is the decoded logical qubit; qubits 1-4 hold the syndrome in
    generator order. Tracing the syndrome qubits reproduces :func:`decode`.
    """
    u = np.zeros((2**R, 2**R), dtype=complex)
    for idx, k in enumerate(kraus_operators()):
        for b in range(2):
            u[b * 16 + idx, :] = k[b]
    u.setflags(write=False)
    return u


def encode(logical: PureState) -> PureState:
    if logical.num_qubits != 1:
        raise ValueError("encode takes a single-qubit state")
    return PureState(R, code_spec().encoding_isometry @ logical.amplitudes)


def encode_vector(vec: np.ndarray) -> np.ndarray:
    return code_spec().encoding_isometry @ vec


def decode(physical: MixedState | PureState) -> MixedState:
    """Apply the decoding channel to a 5-qubit state."""
    if physical.num_qubits != R:
        raise ValueError("decode takes a 5-qubit state")
    rho = physical.matrix if isinstance(physical, MixedState) else physical.density().matrix
    out = apply_channel_density(rho, kraus_operators(), range(R), R)
    return MixedState(1, out, subnormalized=physical.subnormalized, check=False)


def decode_groups(rho: np.ndarray, n: int) -> np.ndarray:
    """Decode a ``5n``-qubit density whose qubits are ordered group by group.

    Group ``i`` occupies qubits ``5i .. 5i+4``; the result is an ``n``-qubit density
    with logical qubit ``i`` at position ``i``.
    """
    kraus = kraus_operators()
    total = R * n
    for i in range(n):
        # groups before i are already a single qubit each
        start = i
        rho = apply_channel_density(rho, kraus, range(start, start + R), total)
        total = total - R + 1
    return rho


def syndrome(physical: PureState | MixedState) -> dict:
    """Probability of each 4-bit syndrome (generator order); zero entries omitted."""
    if physical.num_qubits != R:
        raise ValueError("syndrome takes a 5-qubit state")
    if isinstance(physical, PureState):
        rho = reduced_density(physical.amplitudes, range(R), R)
    else:
        rho = physical.matrix
    total = np.trace(rho).real
    probs = {}
    for s in all_syndromes():
        p = float(np.real(np.trace(syndrome_projector(s) @ rho)) / total)
        if p > 1e-15:
            probs[s] = p
    return probs


def tables() -> dict:
    """Generators, codewords and correction table in JSON-friendly form."""
    spec = code_spec()
    iso = spec.encoding_isometry

    def cvec(v):
        return [[float(z.real), float(z.imag)] for z in v]

    return {
        "r": spec.r,
        "stabilizer_generators": list(spec.stabilizer_generators),
        "logical_operators": {"X": spec.logical_x, "Z": spec.logical_z},
        "codewords": {"0": cvec(iso[:, 0]), "1": cvec(iso[:, 1])},
        "correction_table": [
            {"syndrome": s, "correction": spec.correction_table[s]} for s in all_syndromes()
        ],
    }
