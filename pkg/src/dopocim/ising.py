"""Ising problem instances, energies and exhaustive ground-state diagnostics.

Energy convention: ``H(s) = -sum_{(i,j) in E} J_ij s_i s_j``.  Ferromagnetic
edges carry ``J > 0`` and anti-ferromagnetic edges ``J < 0``.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

MAX_BRUTE_FORCE_N = 24
_CHUNK_BITS = 16


class InstanceError(ValueError):
    """Malformed instance document or inconsistent instance data."""


class ResourceLimitError(RuntimeError):
    """Refused work that would exceed the enumeration guard."""


@dataclass(frozen=True)
class IsingInstance:
    n: int
    edges: tuple[tuple[int, int, float], ...]
    name: str = "unnamed"

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or isinstance(self.n, bool) or self.n < 1:
            raise InstanceError(f"n must be an integer >= 1, got {self.n!r}")
        clean = []
        seen = set()
        for k, edge in enumerate(self.edges):
            if len(edge) != 3:
                raise InstanceError(f"edges[{k}]: expected [i, j, J], got {edge!r}")
            i, j, w = edge
            if not _is_int(i) or not _is_int(j):
                raise InstanceError(f"edges[{k}]: vertex indices must be integers")
            i, j, w = int(i), int(j), float(w)
            if i == j:
                raise InstanceError(f"edges[{k}]: self-loop ({i}, {j})")
            if not (0 <= i < j < self.n):
                raise InstanceError(f"edges[{k}]: need 0 <= i < j < n={self.n}, got ({i}, {j})")
            if not math.isfinite(w) or w == 0.0:
                raise InstanceError(f"edges[{k}]: coupling must be finite and nonzero, got {w}")
            if (i, j) in seen:
                raise InstanceError(f"edges[{k}]: duplicate edge ({i}, {j})")
            seen.add((i, j))
            clean.append((i, j, w))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "edges", tuple(clean))

    @property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, j, _ in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max()) if self.edges else 0

    def coupling_matrix(self) -> np.ndarray:
        """Dense symmetric ``J`` with zero diagonal."""
        J = np.zeros((self.n, self.n))
        for i, j, w in self.edges:
            J[i, j] = J[j, i] = w
        return J

    def neighbor_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Padded neighbour indices and normalized signs ``J/|J|``.

        Returns ``(idx, sign)`` of shape ``(n, max_degree)``; padding slots
        point at the vertex itself with sign 0.  Neighbours are listed in
        ascending index order so sums are evaluated in a fixed order.
        """
        nbrs: list[list[tuple[int, float]]] = [[] for _ in range(self.n)]
        for i, j, w in self.edges:
            s = math.copysign(1.0, w)
            nbrs[i].append((j, s))
            nbrs[j].append((i, s))
        width = max((len(v) for v in nbrs), default=0)
        idx = np.tile(np.arange(self.n)[:, None], (1, width))
        sign = np.zeros((self.n, width))
        for v, lst in enumerate(nbrs):
            for slot, (u, s) in enumerate(sorted(lst)):
                idx[v, slot] = u
                sign[v, slot] = s
        return idx, sign


def _is_int(v) -> bool:
    return isinstance(v, (int, np.integer)) and not isinstance(v, bool)


def as_spins(config, n: int | None = None) -> np.ndarray:
    """Coerce ``config`` (array-like of +-1 or a '+'/'-' string) to int8 spins."""
    if isinstance(config, str):
        config = spins_from_str(config)
    s = np.asarray(config)
    if n is not None and s.shape[-1] != n:
        raise ValueError(f"config length {s.shape[-1]} does not match n={n}")
    if not np.all((s == 1) | (s == -1)):
        raise ValueError("spins must be exactly +1 or -1")
    return s.astype(np.int8)


def spins_to_str(spins) -> str:
    return "".join("+" if v > 0 else "-" for v in np.asarray(spins).ravel())


def spins_from_str(text: str) -> np.ndarray:
    if any(ch not in "+-" for ch in text):
        raise ValueError(f"spin string may only contain '+' and '-': {text!r}")
    return np.array([1 if ch == "+" else -1 for ch in text], dtype=np.int8)


def ising_energy(instance: IsingInstance, config) -> float | np.ndarray:
    """Energy of one configuration, or of a batch along the last axis."""
    s = as_spins(config, instance.n).astype(float)
    e = np.zeros(s.shape[:-1])
    for i, j, w in instance.edges:
        e = e - w * s[..., i] * s[..., j]
    return float(e) if e.ndim == 0 else e


def domain_wall_count(instance: IsingInstance, config) -> int:
    """Number of ring edges whose spins violate the edge's preferred alignment."""
    if instance.edges == () or np.any(instance.degrees != 2):
        raise ValueError(f"{instance.name}: domain walls are defined for ring instances only")
    s = as_spins(config, instance.n)
    walls = 0
    for i, j, w in instance.edges:
        aligned = s[i] == s[j]
        walls += int(aligned != (w > 0))
    return walls


def _ring(n: int, J: float) -> list[tuple[int, int, float]]:
    return [tuple(sorted((i, (i + 1) % n))) + (J,) for i in range(n)]


def _cubic16() -> list[tuple[int, int, float]]:
    return _ring(16, -1.0) + [(i, i + 8, -1.0) for i in range(8)]


def _cubic4() -> list[tuple[int, int, float]]:
    return [(i, j, -1.0) for i in range(4) for j in range(i + 1, 4)]


_NAMED = {
    "antiferro-ring-16": lambda: (16, _ring(16, -1.0)),
    "cubic-16": lambda: (16, _cubic16()),
    "cubic-4": lambda: (4, _cubic4()),
    "ferro-ring-16": lambda: (16, _ring(16, 1.0)),
}

NAMED_INSTANCES = tuple(sorted(_NAMED))


def make_named_instance(name: str) -> IsingInstance:
    if name not in _NAMED:
        raise KeyError(f"unknown instance {name!r}; valid names: {', '.join(NAMED_INSTANCES)}")
    n, edges = _NAMED[name]()
    return IsingInstance(n=n, edges=tuple(sorted(edges)), name=name)


# --- serialization --------------------------------------------------------

def instance_to_dict(instance: IsingInstance) -> dict:
    return {
        "name": instance.name,
        "n": instance.n,
        "edges": [[i, j, _num(w)] for i, j, w in instance.edges],
    }


def serialize_instance(instance: IsingInstance) -> str:
    return json.dumps(instance_to_dict(instance), indent=2)


def instance_from_dict(doc, where: str = "$") -> IsingInstance:
    if not isinstance(doc, dict):
        raise InstanceError(f"{where}: expected an object")
    missing = {"n", "edges"} - set(doc)
    if missing:
        raise InstanceError(f"{where}: missing field(s) {sorted(missing)}")
    n = doc["n"]
    if not _is_int(n):
        raise InstanceError(f"{where}.n: expected integer, got {n!r}")
    if not isinstance(doc["edges"], list):
        raise InstanceError(f"{where}.edges: expected a list")
    name = doc.get("name", "unnamed")
    if not isinstance(name, str):
        raise InstanceError(f"{where}.name: expected string")
    for k, e in enumerate(doc["edges"]):
        if not isinstance(e, list) or len(e) != 3:
            raise InstanceError(f"{where}.edges[{k}]: expected [i, j, J]")
        if not isinstance(e[2], (int, float)) or isinstance(e[2], bool):
            raise InstanceError(f"{where}.edges[{k}][2]: coupling must be a number")
    try:
        return IsingInstance(n=n, edges=tuple(tuple(e) for e in doc["edges"]), name=name)
    except InstanceError as exc:
        raise InstanceError(f"{where}: {exc}") from None


def parse_instance(text: str) -> IsingInstance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return instance_from_dict(doc)


def load_instance(ref: str) -> IsingInstance:
    """Resolve a named instance or read an instance JSON file."""
    if ref in _NAMED:
        return make_named_instance(ref)
    with open(ref) as fh:
        return parse_instance(fh.read())


def _num(w: float):
    return int(w) if float(w).is_integer() else w


# --- exhaustive enumeration ----------------------------------------------

@dataclass
class SpectrumSummary:
    ground_energy: float
    ground_states: np.ndarray
    energy_histogram: dict[float, int]
    local_minima_strict: np.ndarray
    local_minima_nonstrict: np.ndarray
    n: int = 0
    instance_name: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def degeneracy(self) -> int:
        return len(self.ground_states)

    def local_minima_counts(self) -> dict[str, int]:
        """Census under every single-flip convention, with and without ground states."""
        n_ground_strict = sum(1 for s in self.local_minima_strict if _is_ground(self, s))
        return {
            "strict": len(self.local_minima_strict),
            "nonstrict": len(self.local_minima_nonstrict),
            "strict_excluding_ground": len(self.local_minima_strict) - n_ground_strict,
            "nonstrict_excluding_ground": len(self.local_minima_nonstrict) - self.degeneracy,
        }

    def excited_levels(self) -> list[float]:
        return sorted(self.energy_histogram)

    def to_dict(self) -> dict:
        return {
            "instance": self.instance_name,
            "n": self.n,
            "ground_energy": _num(self.ground_energy),
            "degeneracy": self.degeneracy,
            "ground_states": [spins_to_str(s) for s in self.ground_states],
            "energy_histogram": [[_num(e), c] for e, c in sorted(self.energy_histogram.items())],
            "local_minima_strict": [spins_to_str(s) for s in self.local_minima_strict],
            "local_minima_nonstrict": [spins_to_str(s) for s in self.local_minima_nonstrict],
            "local_minima_counts": self.local_minima_counts(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SpectrumSummary":
        def configs(key):
            rows = [spins_from_str(s) for s in doc[key]]
            return np.array(rows, dtype=np.int8).reshape(len(rows), doc["n"])

        return cls(
            ground_energy=float(doc["ground_energy"]),
            ground_states=configs("ground_states"),
            energy_histogram={float(e): int(c) for e, c in doc["energy_histogram"]},
            local_minima_strict=configs("local_minima_strict"),
            local_minima_nonstrict=configs("local_minima_nonstrict"),
            n=doc["n"],
            instance_name=doc.get("instance", ""),
        )


def _is_ground(spec: SpectrumSummary, s) -> bool:
    return any(np.array_equal(s, g) for g in spec.ground_states)


def _enumerate_chunk(start: int, count: int, n: int) -> np.ndarray:
    codes = np.arange(start, start + count, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(n, dtype=np.int64)) & 1
    # bit 0 -> spin +1, so code 0 is the all-up configuration
    return (1 - 2 * bits).astype(np.int8)


def brute_force_spectrum(instance: IsingInstance, tol: float = 1e-9) -> SpectrumSummary:
    """Enumerate all ``2**n`` configurations.

    A configuration is a non-strict local minimum when no single flip lowers
    the energy, and a strict one when every single flip raises it.
    """
    n = instance.n
    if n > MAX_BRUTE_FORCE_N:
        raise ResourceLimitError(
            f"brute force refused: n={n} exceeds the enumeration guard of {MAX_BRUTE_FORCE_N}"
        )
    J = instance.coupling_matrix()
    scale = max(1.0, float(np.abs(J).sum()))
    eps = tol * scale
    total = 1 << n
    chunk = min(total, 1 << _CHUNK_BITS)

    hist: Counter = Counter()
    ground = math.inf
    ground_rows: list[np.ndarray] = []
    strict_rows: list[np.ndarray] = []
    nonstrict_rows: list[np.ndarray] = []
    for start in range(0, total, chunk):
        s = _enumerate_chunk(start, chunk, n)
        sf = s.astype(float)
        field_ = sf @ J
        energy = -0.5 * np.einsum("ci,ci->c", sf, field_)
        # energy change of flipping spin i: 2 s_i h_i with h = J s
        delta = 2.0 * sf * field_
        nonstrict = np.all(delta >= -eps, axis=1)
        strict = np.all(delta > eps, axis=1)
        strict_rows.append(s[strict])
        nonstrict_rows.append(s[nonstrict])

        keys = np.round(energy, 9)
        vals, counts = np.unique(keys, return_counts=True)
        hist.update(dict(zip(vals.tolist(), counts.tolist())))
        emin = float(keys.min())
        if emin < ground - eps:
            ground = emin
            ground_rows = []
        if abs(emin - ground) <= eps:
            ground_rows.append(s[np.abs(keys - ground) <= eps])

    return SpectrumSummary(
        ground_energy=ground + 0.0,
        ground_states=np.concatenate(ground_rows),
        energy_histogram={e + 0.0: c for e, c in sorted(hist.items())},
        local_minima_strict=np.concatenate(strict_rows),
        local_minima_nonstrict=np.concatenate(nonstrict_rows),
        n=n,
        instance_name=instance.name,
    )
