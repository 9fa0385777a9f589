"""Sparse pure-state simulation over named qubit registers.

A basis label is a single Python int covering the full register width.
Qubits are numbered from 1, and qubit 1 is the most significant bit of the
label, so the hex form of a label reads in qubit order. Registers are
contiguous slices of that label in layout order.

Dense density matrices are only built for small kept subsystems (see
``to_density_matrix``).
"""

from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import DensityCapExceeded, SupportCapExceeded
from .rng import Rng

PRUNE = 1e-12
NORM_TOL = 1e-9
HERMITIAN_TOL = 1e-9

SUPPORT_CAP = 2**24
DENSITY_CAP = 10

_SQRT_HALF = 1.0 / math.sqrt(2.0)


def set_caps(support: int | None = None, density: int | None = None) -> None:
    """Change the module-wide defaults used when an op gets no explicit cap."""
    global SUPPORT_CAP, DENSITY_CAP
    if support is not None:
        if support < 1:
            raise ValueError("support cap must be positive")
        SUPPORT_CAP = support
    if density is not None:
        if density < 1:
            raise ValueError("density cap must be positive")
        DENSITY_CAP = density


# ---------------------------------------------------------------------------
# bit strings and layouts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Bits:
    """Fixed-length bit string. ``bits[i]`` is 1-based; bit 1 is the MSB of ``value``."""

    value: int
    length: int

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("length must be non-negative")
        if self.value < 0 or self.value >> self.length:
            raise ValueError(f"value {self.value} does not fit in {self.length} bits")

    @classmethod
    def from_str(cls, s: str) -> Bits:
        if any(c not in "01" for c in s):
            raise ValueError(f"not a bit string: {s!r}")
        return cls(int(s, 2) if s else 0, len(s))

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> Bits:
        bits = list(bits)
        value = 0
        for b in bits:
            if b not in (0, 1):
                raise ValueError(f"not a bit: {b!r}")
            value = (value << 1) | b
        return cls(value, len(bits))

    @classmethod
    def zeros(cls, n: int) -> Bits:
        return cls(0, n)

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, i: int) -> int:
        if not 1 <= i <= self.length:
            raise IndexError(f"bit index {i} out of range 1..{self.length}")
        return (self.value >> (self.length - i)) & 1

    def __iter__(self):
        for i in range(1, self.length + 1):
            yield self[i]

    def __str__(self) -> str:
        return format(self.value, f"0{self.length}b") if self.length else ""

    def flip(self, i: int) -> Bits:
        if not 1 <= i <= self.length:
            raise IndexError(f"bit index {i} out of range 1..{self.length}")
        return Bits(self.value ^ (1 << (self.length - i)), self.length)

    def ones(self) -> list[int]:
        """1-based positions holding a 1."""
        return [i for i in range(1, self.length + 1) if self[i]]

    def hex(self) -> str:
        return to_hex(self.value, self.length)


BitsLike = Union[Bits, str]


def as_bits(x: BitsLike) -> Bits:
    return x if isinstance(x, Bits) else Bits.from_str(x)


def to_hex(value: int, width: int) -> str:
    """MSB-first hex, left-padded to ceil(width / 4) digits."""
    digits = max(1, (width + 3) // 4)
    return format(value, f"0{digits}x")


def from_hex(text: str, width: int) -> int:
    value = int(text, 16)
    if value >> width:
        raise ValueError(f"hex value wider than {width} bits")
    return value


@dataclass(frozen=True)
class RegisterLayout:
    """Ordered named registers, each a contiguous run of qubits."""

    registers: tuple[tuple[str, int], ...]

    def __post_init__(self):
        names = [n for n, _ in self.registers]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate register names: {names}")
        for name, width in self.registers:
            if width < 1:
                raise ValueError(f"register {name} has width {width}")

    @classmethod
    def of(cls, *registers: tuple[str, int]) -> RegisterLayout:
        return cls(tuple((str(n), int(w)) for n, w in registers))

    @property
    def width(self) -> int:
        return sum(w for _, w in self.registers)

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.registers]

    def register_width(self, name: str) -> int:
        for n, w in self.registers:
            if n == name:
                return w
        raise KeyError(f"no register named {name!r}; have {self.names}")

    def offset(self, name: str) -> int:
        """Number of qubits before ``name``."""
        off = 0
        for n, w in self.registers:
            if n == name:
                return off
            off += w
        raise KeyError(f"no register named {name!r}; have {self.names}")

    def shift(self, name: str) -> int:
        """Bit position (from the label LSB) of the register's last qubit."""
        return self.width - self.offset(name) - self.register_width(name)

    def qubits(self, name: str) -> list[int]:
        off = self.offset(name)
        return list(range(off + 1, off + self.register_width(name) + 1))

    def extract(self, label: int, name: str) -> int:
        return (label >> self.shift(name)) & ((1 << self.register_width(name)) - 1)

    def append(self, name: str, width: int) -> RegisterLayout:
        return RegisterLayout(self.registers + ((name, width),))

    def without(self, name: str) -> RegisterLayout:
        self.register_width(name)
        return RegisterLayout(tuple(r for r in self.registers if r[0] != name))


# ---------------------------------------------------------------------------
# sparse states
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SparseState:
    """Pure state as a map from full-width basis label to amplitude.

    Treat instances as immutable; every operation returns a new state.
    """

    layout: RegisterLayout
    amps: Mapping[int, complex]

    @property
    def width(self) -> int:
        return self.layout.width

    def __len__(self) -> int:
        return len(self.amps)

    def norm2(self) -> float:
        return math.fsum(abs(a) ** 2 for a in self.amps.values())

    def labels(self) -> list[int]:
        return sorted(self.amps)

    def validate(self) -> None:
        limit = 1 << self.width
        for label, a in self.amps.items():
            if not 0 <= label < limit:
                raise ValueError(f"label {label:#x} outside {self.width}-qubit space")
            if abs(a) < PRUNE:
                raise ValueError(f"stored amplitude below prune threshold at {label:#x}")
        if abs(self.norm2() - 1.0) > NORM_TOL:
            raise ValueError(f"state norm^2 {self.norm2()!r} is not 1")

    def register_values(self, name: str) -> set[int]:
        return {self.layout.extract(label, name) for label in self.amps}

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseState):
            return NotImplemented
        return self.layout == other.layout and dict(self.amps) == dict(other.amps)

    def allclose(self, other: SparseState, atol: float = 1e-12) -> bool:
        """Same layout and key set, amplitudes within ``atol``."""
        if self.layout != other.layout or set(self.amps) != set(other.amps):
            return False
        return all(abs(a - other.amps[k]) <= atol for k, a in self.amps.items())

    def to_json(self) -> str:
        doc = {
            "layout": [{"name": n, "width": w} for n, w in self.layout.registers],
            "amps": [
                [to_hex(label, self.width), self.amps[label].real, self.amps[label].imag]
                for label in self.labels()
            ],
        }
        return json.dumps(doc, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> SparseState:
        doc = json.loads(text)
        layout = RegisterLayout.of(*[(r["name"], r["width"]) for r in doc["layout"]])
        amps = {}
        for hex_label, re, im in doc["amps"]:
            label = from_hex(hex_label, layout.width)
            if label in amps:
                raise ValueError(f"duplicate label {hex_label}")
            amps[label] = complex(float(re), float(im))
        state = cls(layout, amps)
        state.validate()
        return state


def basis_state(layout: RegisterLayout, label: int = 0) -> SparseState:
    if not 0 <= label < (1 << layout.width):
        raise ValueError("label out of range")
    return SparseState(layout, {label: 1.0 + 0j})


def _check_cap(n: int, cap: int | None) -> None:
    limit = SUPPORT_CAP if cap is None else cap
    if n > limit:
        raise SupportCapExceeded(f"support {n} exceeds cap {limit}")


def _check_qubit(state: SparseState, qubit: int) -> int:
    if not 1 <= qubit <= state.width:
        raise IndexError(f"qubit {qubit} out of range 1..{state.width}")
    return 1 << (state.width - qubit)


def prepare_bb84(x: BitsLike, theta: BitsLike, name: str = "MSG", cap: int | None = None) -> SparseState:
    """The product state H^theta_1|x_1> ... H^theta_n|x_n> on one register."""
    x, theta = as_bits(x), as_bits(theta)
    if len(x) != len(theta):
        raise ValueError(f"|x|={len(x)} but |theta|={len(theta)}")
    if len(x) == 0:
        raise ValueError("BB84 length must be at least 1")
    n = len(x)
    hmask = theta.value
    h = bin(hmask).count("1")
    _check_cap(1 << h, cap)
    base = x.value & ~hmask
    mag = _GRID[h] if h < len(_GRID) else 2.0 ** (-h / 2)
    positions = [1 << (n - i) for i in theta.ones()]
    labels = [base]
    for bit in positions:
        labels += [label | bit for label in labels]
    xh = x.value & hmask
    amps = {}
    for label in labels:
        sign = -1.0 if bin(label & xh).count("1") & 1 else 1.0
        amps[label] = complex(sign * mag, 0.0)
    return SparseState(RegisterLayout.of((name, n)), amps)


def append_register(state: SparseState, name: str, width: int) -> SparseState:
    """Tensor a fresh |0...0> register onto the end of the layout."""
    layout = state.layout.append(name, width)
    return SparseState(layout, {label << width: a for label, a in state.amps.items()})


def drop_register(state: SparseState, name: str) -> SparseState:
    """Remove a register that is in a definite basis state (product with the rest)."""
    values = state.register_values(name)
    if len(values) != 1:
        raise ValueError(f"register {name} is not in a definite basis state")
    layout = state.layout.without(name)
    width = state.layout.register_width(name)
    shift = state.layout.shift(name)
    low = (1 << shift) - 1
    amps = {}
    for label, a in state.amps.items():
        amps[((label >> (shift + width)) << shift) | (label & low)] = a
    return SparseState(layout, amps)


# magnitudes 2^(-j/2); every amplitude of a basis or BB84 state lies on this grid
_GRID = [2.0 ** (-j / 2) for j in range(128)]
_SNAP_ULPS = 8


def _snap(v: float) -> float:
    """Round ``v`` onto the 2^(-j/2) grid if it is within a few ulps of it."""
    if v == 0.0:
        return 0.0
    m = abs(v)
    j = round(-2.0 * math.log2(m))
    if 0 <= j < len(_GRID):
        g = _GRID[j]
        if abs(m - g) <= _SNAP_ULPS * math.ulp(g):
            return math.copysign(g, v)
    return v


def _prune(amps: dict[int, complex]) -> dict[int, complex]:
    out = {}
    for k, a in amps.items():
        if abs(a) >= PRUNE:
            out[k] = complex(_snap(a.real), _snap(a.imag))
    return out


def apply_h(state: SparseState, qubit: int, cap: int | None = None) -> SparseState:
    mask = _check_qubit(state, qubit)
    out: dict[int, complex] = defaultdict(complex)
    for label, a in state.amps.items():
        s = a * _SQRT_HALF
        lo = label & ~mask
        out[lo] += s
        out[lo | mask] += -s if label & mask else s
    out = _prune(out)
    _check_cap(len(out), cap)
    return SparseState(state.layout, out)


def apply_x(state: SparseState, qubit: int) -> SparseState:
    mask = _check_qubit(state, qubit)
    return SparseState(state.layout, {label ^ mask: a for label, a in state.amps.items()})


def append_classical_function(
    state: SparseState,
    src: str,
    dst: str,
    g: Callable[[int], int],
    out_width: int | None = None,
) -> SparseState:
    """XOR-embed ``g``: |m>|t>|rest> -> |m>|t xor g(m)>|rest>.

    ``g`` maps the integer value of ``src`` to the integer value to XOR into
    ``dst``. The map is unitary and its own inverse.
    """
    layout = state.layout
    dst_width = layout.register_width(dst)
    if out_width is not None and out_width != dst_width:
        raise ValueError(f"function output width {out_width} != register {dst} width {dst_width}")
    src_shift, src_mask = layout.shift(src), (1 << layout.register_width(src)) - 1
    dst_shift = layout.shift(dst)
    cache: dict[int, int] = {}
    out = {}
    for label, a in state.amps.items():
        m = (label >> src_shift) & src_mask
        t = cache.get(m)
        if t is None:
            t = g(m)
            if t < 0 or t >> dst_width:
                raise ValueError(f"g({m}) does not fit in {dst_width} bits")
            cache[m] = t
        out[label ^ (t << dst_shift)] = a
    return SparseState(layout, out)


# ---------------------------------------------------------------------------
# measurement
# ---------------------------------------------------------------------------


def _runs(qubits: Sequence[int]) -> list[tuple[int, int]]:
    """Split an ordered qubit list into maximal ascending consecutive runs."""
    runs: list[tuple[int, int]] = []
    for q in qubits:
        if runs and q == runs[-1][0] + runs[-1][1]:
            runs[-1] = (runs[-1][0], runs[-1][1] + 1)
        else:
            runs.append((q, 1))
    return runs


def _outcome_fn(width: int, qubits: Sequence[int]) -> Callable[[int], int]:
    if len(set(qubits)) != len(qubits):
        raise ValueError("repeated qubit in measurement")
    for q in qubits:
        if not 1 <= q <= width:
            raise IndexError(f"qubit {q} out of range 1..{width}")
    parts = [(width - start - length + 1, length, (1 << length) - 1) for start, length in _runs(qubits)]

    def outcome(label: int) -> int:
        v = 0
        for shift, length, mask in parts:
            v = (v << length) | ((label >> shift) & mask)
        return v

    return outcome


def outcome_probabilities(state: SparseState, qubits: Sequence[int]) -> dict[int, float]:
    """Born-rule distribution of a computational measurement, keyed by outcome int."""
    outcome = _outcome_fn(state.width, qubits)
    probs: dict[int, list[float]] = defaultdict(list)
    for label, a in state.amps.items():
        probs[outcome(label)].append(abs(a) ** 2)
    return {k: math.fsum(v) for k, v in probs.items()}


def measurement_branches(state: SparseState, qubits: Sequence[int]) -> list[tuple[Bits, float, SparseState]]:
    """Every outcome of a computational measurement with its probability and post-state.

    Outcome bits follow the order of ``qubits``. Branches are sorted by outcome.
    """
    if not state.amps:
        raise ValueError("cannot measure a state with empty support")
    outcome = _outcome_fn(state.width, qubits)
    groups: dict[int, dict[int, complex]] = defaultdict(dict)
    for label, a in state.amps.items():
        groups[outcome(label)][label] = a
    branches = []
    for key in sorted(groups):
        amps = groups[key]
        p = math.fsum(abs(a) ** 2 for a in amps.values())
        scale = 1.0 / math.sqrt(p)
        post = SparseState(state.layout, {k: a * scale for k, a in amps.items()})
        branches.append((Bits(key, len(qubits)), p, post))
    return branches


def sample_index(probs: Sequence[float], rng: Rng) -> int:
    u = rng.random() * math.fsum(probs)
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if u < acc:
            return i
    return len(probs) - 1


def measure_computational(state: SparseState, qubits: Sequence[int], rng: Rng) -> tuple[Bits, SparseState]:
    if not state.amps:
        raise ValueError("cannot measure a state with empty support")
    qubits = list(qubits)
    if len(qubits) == 1:
        return _measure_one(state, qubits[0], rng)
    outcome = _outcome_fn(state.width, qubits)
    probs = outcome_probabilities(state, qubits)
    keys = sorted(probs)
    chosen = keys[sample_index([probs[k] for k in keys], rng)]
    scale = 1.0 / math.sqrt(probs[chosen])
    post = {label: a * scale for label, a in state.amps.items() if outcome(label) == chosen}
    return Bits(chosen, len(qubits)), SparseState(state.layout, post)


def _measure_one(state: SparseState, qubit: int, rng: Rng) -> tuple[Bits, SparseState]:
    mask = _check_qubit(state, qubit)
    p0 = []
    p1 = []
    for label, a in state.amps.items():
        (p1 if label & mask else p0).append(abs(a) ** 2)
    probs = [math.fsum(p0), math.fsum(p1)]
    bit = sample_index(probs, rng) if p0 and p1 else int(bool(p1))
    scale = 1.0 / math.sqrt(probs[bit])
    want = mask if bit else 0
    post = {label: a * scale for label, a in state.amps.items() if label & mask == want}
    return Bits(bit, 1), SparseState(state.layout, post)


def measure_hadamard(
    state: SparseState, qubits: Sequence[int], rng: Rng, cap: int | None = None
) -> tuple[Bits, SparseState]:
    """Hadamard-basis measurement of ``qubits``.

    Runs H-then-measure one qubit at a time; this has the same joint
    distribution and post-state as applying every H first, but the support
    never grows by more than a factor of two.
    """
    bits = []
    for q in qubits:
        state = apply_h(state, q, cap)
        b, state = measure_computational(state, [q], rng)
        bits.append(b.value)
    return Bits.from_bits(bits), state


def hadamard_branches(
    state: SparseState, qubits: Sequence[int], cap: int | None = None
) -> list[tuple[Bits, float, SparseState]]:
    """Exact branch enumeration for a Hadamard-basis measurement."""
    for q in qubits:
        state = apply_h(state, q, cap)
    return measurement_branches(state, qubits)


# ---------------------------------------------------------------------------
# dense density matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_qubits(self) -> int:
        return self.dim.bit_length() - 1

    def validate(self, tol: float = NORM_TOL) -> None:
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] & (m.shape[0] - 1):
            raise ValueError(f"density matrix must be 2^n x 2^n, got {m.shape}")
        if np.max(np.abs(m - m.conj().T), initial=0.0) > tol:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1.0) > tol:
            raise ValueError(f"density matrix trace {np.trace(m)} != 1")
        if np.linalg.eigvalsh(m).min() < -tol:
            raise ValueError("density matrix is not positive semidefinite")

    @classmethod
    def from_pure(cls, vector: Sequence[complex]) -> DensityMatrix:
        v = np.asarray(vector, dtype=complex)
        return cls(np.outer(v, v.conj()))


def _kept_qubits(layout: RegisterLayout, keep: Iterable[str | int]) -> list[int]:
    qubits: list[int] = []
    for k in keep:
        qubits.extend(layout.qubits(k) if isinstance(k, str) else [int(k)])
    return sorted(set(qubits))


def reduced_block(state: SparseState, keep: Iterable[str | int], cap: int | None = None) -> np.ndarray:
    """Unnormalized partial trace |psi><psi| over every qubit not in ``keep``."""
    kept = _kept_qubits(state.layout, keep)
    limit = DENSITY_CAP if cap is None else cap
    if len(kept) > limit:
        raise DensityCapExceeded(f"kept width {len(kept)} exceeds density cap {limit}")
    width = state.width
    index = _outcome_fn(width, kept)
    keep_mask = 0
    for q in kept:
        keep_mask |= 1 << (width - q)
    dim = 1 << len(kept)
    groups: dict[int, list[tuple[int, complex]]] = defaultdict(list)
    for label, a in state.amps.items():
        groups[label & ~keep_mask].append((index(label), a))
    rho = np.zeros((dim, dim), dtype=complex)
    for entries in groups.values():
        if len(entries) == 1:
            i, a = entries[0]
            rho[i, i] += abs(a) ** 2
        else:
            v = np.zeros(dim, dtype=complex)
            for i, a in entries:
                v[i] = a
            rho += np.outer(v, v.conj())
    return rho


def to_density_matrix(
    ensemble: Sequence[tuple[float, SparseState]], keep: Iterable[str | int], cap: int | None = None
) -> DensityMatrix:
    """sum_k p_k Tr_discard |psi_k><psi_k| on the kept registers (or qubit indices)."""
    if not ensemble:
        raise ValueError("empty ensemble")
    total = math.fsum(p for p, _ in ensemble)
    if abs(total - 1.0) > NORM_TOL:
        raise ValueError(f"ensemble probabilities sum to {total}")
    keep = list(keep)
    rho = None
    for p, state in ensemble:
        block = p * reduced_block(state, keep, cap)
        if rho is None:
            rho = block
        elif rho.shape != block.shape:
            raise ValueError("ensemble members disagree on the kept width")
        else:
            rho = rho + block
    return DensityMatrix(rho)


def trace_norm(a: np.ndarray) -> float:
    """Sum of |eigenvalues| of a Hermitian matrix."""
    a = np.asarray(a, dtype=complex)
    if a.size == 0:
        return 0.0
    if np.max(np.abs(a - a.conj().T)) > HERMITIAN_TOL:
        raise ValueError("trace_norm needs a Hermitian matrix")
    return float(np.sum(np.abs(np.linalg.eigvalsh((a + a.conj().T) / 2))))


def trace_distance(rho0: DensityMatrix, rho1: DensityMatrix) -> float:
    if rho0.matrix.shape != rho1.matrix.shape:
        raise ValueError(f"dimension mismatch {rho0.matrix.shape} vs {rho1.matrix.shape}")
    for r in (rho0, rho1):
        if np.max(np.abs(r.matrix - r.matrix.conj().T)) > HERMITIAN_TOL:
            raise ValueError("trace_distance input is not Hermitian")
    return 0.5 * trace_norm(rho0.matrix - rho1.matrix)
