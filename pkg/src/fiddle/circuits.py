"""Circuit-level IR for the routing stage.

Gates, gate sequences, logical-to-hardware assignments, dependency and
hardware graphs, and the layered circuit table, together with sequence
validation and the deterministic sequence-to-table translation that turns a
routing solution into the circuit whose fidelity is being optimized.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence


class StructuralError(ValueError):
    """Malformed input (bad qubit index, wrong arity), as opposed to a
    routing-constraint violation which is reported, not raised."""


class DepthOverflowError(RuntimeError):
    """Translation needs more layers than the table provides."""


class GateKind(Enum):
    # routing-level kinds
    RZZ = "RZZ"
    RX = "RX"
    CX = "CX"
    SWAP = "SWAP"
    # native kinds (appear only inside circuit tables)
    CX_N = "CX_N"
    RZ_N = "RZ_N"
    RX_N = "RX_N"

    @property
    def is_native(self) -> bool:
        return self in (GateKind.CX_N, GateKind.RZ_N, GateKind.RX_N)

    @property
    def n_qubits(self) -> int:
        return 1 if self in (GateKind.RX, GateKind.RZ_N, GateKind.RX_N) else 2

    @property
    def has_angle(self) -> bool:
        return self in (GateKind.RZZ, GateKind.RX, GateKind.RZ_N, GateKind.RX_N)

    @property
    def is_symmetric(self) -> bool:
        # qubit order is irrelevant for these two-qubit kinds
        return self in (GateKind.RZZ, GateKind.SWAP)


NATIVE_KIND_ORDER = (GateKind.CX_N, GateKind.RZ_N, GateKind.RX_N)


@dataclass(frozen=True)
class Gate:
    """A routing-level gate on logical qubits."""

    kind: GateKind
    qu: int
    qv: int | None = None
    angle: float | None = None

    def __post_init__(self):
        if self.kind.is_native:
            raise StructuralError(f"{self.kind.value} is a native kind, not a routing gate")
        if self.kind.n_qubits == 2 and self.qv is None:
            raise StructuralError(f"{self.kind.value} needs two qubits")
        if self.kind.n_qubits == 1 and self.qv is not None:
            raise StructuralError(f"{self.kind.value} acts on a single qubit")
        if self.qv is not None and self.qu == self.qv:
            raise StructuralError("gate qubits must be distinct")

    @property
    def qubits(self) -> tuple[int, ...]:
        return (self.qu,) if self.qv is None else (self.qu, self.qv)

    def key(self) -> tuple:
        """Identity used for matching sequence gates against target gates.

        Symmetric kinds compare with unordered qubits.
        """
        qs = self.qubits
        if self.kind.is_symmetric:
            qs = tuple(sorted(qs))
        return (self.kind, qs, self.angle)


@dataclass(frozen=True)
class NativeGate:
    """A hardware-level gate instance: (kind, ordered hardware qubits, angle).

    Equal values denote the same gate identity; the two cells of a two-qubit
    gate hold the same NativeGate.
    """

    kind: GateKind
    qubits: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        if not self.kind.is_native:
            raise StructuralError(f"{self.kind.value} is not a native kind")
        if len(self.qubits) != self.kind.n_qubits:
            raise StructuralError(f"{self.kind.value} arity mismatch: {self.qubits}")


@dataclass(frozen=True)
class GateSequence:
    """Ordered routing solution; ``limit`` is the gate budget it was built under."""

    gates: tuple[Gate, ...]
    limit: int

    def __post_init__(self):
        if self.limit < 1:
            raise StructuralError("gate limit must be positive")

    def __len__(self) -> int:
        return len(self.gates)

    def prefix(self, i: int) -> "GateSequence":
        return GateSequence(self.gates[:i], self.limit)


class DependencyGraph:
    """DAG over target gates; node i is ``gates[i]``, edge (i, j) means i must
    run before j."""

    def __init__(self, gates: Sequence[Gate], edges: Iterable[tuple[int, int]]):
        self.gates = tuple(gates)
        self.edges = tuple(sorted(set((int(a), int(b)) for a, b in edges)))
        n = len(self.gates)
        for a, b in self.edges:
            if not (0 <= a < n and 0 <= b < n) or a == b:
                raise StructuralError(f"bad dependency edge ({a}, {b})")
        self._succ = [[] for _ in range(n)]
        for a, b in self.edges:
            self._succ[a].append(b)
        self._closure = self._transitive_closure()

    def _transitive_closure(self) -> list[list[bool]]:
        n = len(self.gates)
        reach = [[False] * n for _ in range(n)]
        # DFS from every node; also detects cycles via Kahn on the way
        indeg = [0] * n
        for _, b in self.edges:
            indeg[b] += 1
        queue = [i for i in range(n) if indeg[i] == 0]
        seen = 0
        while queue:
            v = queue.pop()
            seen += 1
            for w in self._succ[v]:
                indeg[w] -= 1
                if indeg[w] == 0:
                    queue.append(w)
        if seen != n:
            raise StructuralError("dependency graph has a cycle")
        for src in range(n):
            stack = list(self._succ[src])
            while stack:
                v = stack.pop()
                if not reach[src][v]:
                    reach[src][v] = True
                    stack.extend(self._succ[v])
        return reach

    def __len__(self) -> int:
        return len(self.gates)

    def reaches(self, a: int, b: int) -> bool:
        """True if there is a path a -> b."""
        return self._closure[a][b]

    def prerequisites(self, i: int) -> list[int]:
        """All ancestors of node i."""
        return [j for j in range(len(self.gates)) if self._closure[j][i]]


class HardwareGraph:
    """Undirected connectivity of the hardware qubits. Must be simple and
    connected."""

    def __init__(self, n_qubits: int, edges: Iterable[tuple[int, int]]):
        if n_qubits < 1:
            raise StructuralError("hardware graph needs at least one qubit")
        self.n_qubits = int(n_qubits)
        es = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise StructuralError("self-loop in hardware graph")
            if not (0 <= u < n_qubits and 0 <= v < n_qubits):
                raise StructuralError(f"hardware edge ({u}, {v}) out of range")
            es.add((min(u, v), max(u, v)))
        self.edges = tuple(sorted(es))
        self._adj = [set() for _ in range(n_qubits)]
        for u, v in self.edges:
            self._adj[u].add(v)
            self._adj[v].add(u)
        if n_qubits > 1 and not self._connected():
            raise StructuralError("hardware graph must be connected")

    def _connected(self) -> bool:
        seen = {0}
        stack = [0]
        while stack:
            for w in self._adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.n_qubits

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._adj[u]

    def neighbors(self, u: int) -> set[int]:
        return self._adj[u]


class Assignment:
    """Bijection logical qubit -> hardware qubit."""

    def __init__(self, mapping: Sequence[int]):
        m = tuple(int(x) for x in mapping)
        n = len(m)
        if sorted(m) != list(range(n)):
            raise StructuralError(f"assignment {m} is not a bijection on 0..{n - 1}")
        self._map = m
        self._inv = tuple(x[0] for x in sorted(enumerate(m), key=lambda x: x[1]))

    @classmethod
    def identity(cls, n: int) -> "Assignment":
        return cls(range(n))

    def __len__(self) -> int:
        return len(self._map)

    def __eq__(self, other) -> bool:
        return isinstance(other, Assignment) and self._map == other._map

    def __hash__(self) -> int:
        return hash(self._map)

    def __repr__(self) -> str:
        return f"Assignment({list(self._map)})"

    def hw(self, logical: int) -> int:
        return self._map[logical]

    def logical(self, hw: int) -> int:
        return self._inv[hw]

    def as_list(self) -> list[int]:
        return list(self._map)


def apply_swap(phi: Assignment, qu: int, qv: int) -> Assignment:
    """New assignment with the hardware positions of logical qu and qv exchanged."""
    if qu == qv:
        raise StructuralError("swap qubits must be distinct")
    m = phi.as_list()
    m[qu], m[qv] = m[qv], m[qu]
    return Assignment(m)


def decompose(g: Gate) -> list[NativeGate]:
    """Native-gate decomposition of a routing gate, on the gate's own qubit labels."""
    if g.kind is GateKind.RZZ:
        cx = NativeGate(GateKind.CX_N, (g.qu, g.qv))
        return [cx, NativeGate(GateKind.RZ_N, (g.qv,), g.angle), cx]
    if g.kind is GateKind.SWAP:
        return [
            NativeGate(GateKind.CX_N, (g.qu, g.qv)),
            NativeGate(GateKind.CX_N, (g.qv, g.qu)),
            NativeGate(GateKind.CX_N, (g.qu, g.qv)),
        ]
    if g.kind is GateKind.CX:
        return [NativeGate(GateKind.CX_N, (g.qu, g.qv))]
    if g.kind is GateKind.RX:
        return [NativeGate(GateKind.RX_N, (g.qu,), g.angle)]
    raise StructuralError(f"no decomposition for {g.kind.value}")


class CircuitTable:
    """N x M grid of native-gate identities; rows are hardware qubits, columns
    are layers. A two-qubit gate occupies two cells of the same column."""

    def __init__(self, rows: int, cols: int):
        self.rows = int(rows)
        self.cols = int(cols)
        self._cells: dict[tuple[int, int], NativeGate] = {}

    def cell(self, row: int, col: int) -> NativeGate | None:
        return self._cells.get((row, col))

    @property
    def cells(self) -> dict[tuple[int, int], NativeGate]:
        return self._cells

    def place(self, col: int, gate: NativeGate) -> None:
        if not (0 <= col < self.cols):
            raise DepthOverflowError(f"layer {col} outside table with {self.cols} columns")
        for q in gate.qubits:
            if not (0 <= q < self.rows):
                raise StructuralError(f"hardware qubit {q} outside table with {self.rows} rows")
            if (q, col) in self._cells:
                raise StructuralError(f"cell ({q}, {col}) written twice")
        for q in gate.qubits:
            self._cells[(q, col)] = gate

    def depth(self) -> int:
        if not self._cells:
            return 0
        return max(c for _, c in self._cells) + 1

    def column_gates(self, col: int) -> list[NativeGate]:
        """Distinct gate instances in one column, ordered by lowest acted row."""
        seen: dict[NativeGate, int] = {}
        for row in range(self.rows):
            g = self._cells.get((row, col))
            if g is not None and g not in seen:
                seen[g] = row
        return [g for g, _ in sorted(seen.items(), key=lambda kv: kv[1])]

    def trimmed(self) -> "CircuitTable":
        """Copy whose column count equals the occupied depth."""
        out = CircuitTable(self.rows, self.depth())
        out._cells = dict(self._cells)
        return out

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, CircuitTable)
            and self.rows == other.rows
            and self.cols == other.cols
            and self._cells == other._cells
        )

    def to_json(self) -> dict:
        cells = []
        for col in range(self.cols):
            for g in self.column_gates(col):
                cells.append(
                    {
                        "row": min(g.qubits),
                        "col": col,
                        "kind": g.kind.value,
                        "qubits": list(g.qubits),
                        "angle": g.angle,
                    }
                )
        return {"rows": self.rows, "cols": self.cols, "cells": cells}

    @classmethod
    def from_json(cls, obj: dict) -> "CircuitTable":
        table = cls(obj["rows"], obj["cols"])
        for c in obj["cells"]:
            gate = NativeGate(GateKind(c["kind"]), tuple(c["qubits"]), c.get("angle"))
            table.place(c["col"], gate)
        return table


@dataclass(frozen=True)
class TraitVector:
    """Cheap circuit descriptors: depth plus per-kind native gate counts."""

    depth: int
    counts: tuple[tuple[GateKind, int], ...]

    def count(self, kind: GateKind) -> int:
        return dict(self.counts).get(kind, 0)

    def to_array(self) -> list[float]:
        d = dict(self.counts)
        return [float(self.depth)] + [float(d.get(k, 0)) for k in NATIVE_KIND_ORDER]

    @staticmethod
    def width() -> int:
        return 1 + len(NATIVE_KIND_ORDER)


def trait_vector(c: CircuitTable) -> TraitVector:
    counts = {k: 0 for k in NATIVE_KIND_ORDER}
    for col in range(c.cols):
        for g in c.column_gates(col):
            counts[g.kind] += 1
    return TraitVector(c.depth(), tuple((k, counts[k]) for k in NATIVE_KIND_ORDER))


@dataclass
class ValidityReport:
    valid: bool
    violations: list[tuple[str, int, str]] = field(default_factory=list)
    # each violation: (constraint name, first offending sequence index, detail)


def _check_structure(gates: Sequence[Gate], n_qubits: int) -> None:
    for i, g in enumerate(gates):
        for q in g.qubits:
            if not (0 <= q < n_qubits):
                raise StructuralError(f"gate {i}: qubit {q} out of range for {n_qubits} qubits")


def match_targets(gates: Sequence[Gate], targets: Sequence[Gate]) -> list[int | None]:
    """Assign each non-SWAP sequence gate to a distinct target id by value.

    Matching is greedy in sequence order, lowest unmatched id first. SWAPs and
    gates matching no remaining target map to None.
    """
    by_key: dict[tuple, list[int]] = {}
    for i, t in enumerate(targets):
        by_key.setdefault(t.key(), []).append(i)
    for ids in by_key.values():
        ids.sort(reverse=True)
    assigned: list[int | None] = []
    for g in gates:
        if g.kind is GateKind.SWAP:
            assigned.append(None)
            continue
        ids = by_key.get(g.key())
        assigned.append(ids.pop() if ids else None)
    return assigned


def validate_sequence(
    seq: GateSequence,
    targets: Sequence[Gate],
    gd: DependencyGraph,
    gh: HardwareGraph,
    phi0: Assignment,
) -> ValidityReport:
    """Check the inclusion, dependency, and connectivity constraints.

    Reports at most one violation per constraint, at the first offending
    sequence index. Malformed gates raise StructuralError instead.
    """
    _check_structure(seq.gates, gh.n_qubits)
    _check_structure(targets, gh.n_qubits)
    if len(phi0) != gh.n_qubits:
        raise StructuralError("assignment size does not match hardware graph")

    violations: list[tuple[str, int, str]] = []
    ids = match_targets(seq.gates, targets)

    matched = {i for i in ids if i is not None}
    missing = [i for i in range(len(targets)) if i not in matched]
    if missing:
        violations.append(
            ("inclusion", len(seq.gates), f"target gates {missing} missing from sequence")
        )
    else:
        for pos, (g, tid) in enumerate(zip(seq.gates, ids)):
            if tid is None and g.kind is not GateKind.SWAP:
                violations.append(("inclusion", pos, "gate is neither a target nor a SWAP"))
                break

    # dependency: no later gate may be an ancestor of an earlier one
    placed: list[tuple[int, int]] = []  # (sequence position, target id)
    for pos, tid in enumerate(ids):
        if tid is None:
            continue
        bad = next((p for p, earlier in placed if gd.reaches(tid, earlier)), None)
        if bad is not None:
            violations.append(
                ("dependency", pos, f"gate at {pos} must precede the gate at {bad}")
            )
            break
        placed.append((pos, tid))

    phi = phi0
    for pos, g in enumerate(seq.gates):
        if len(g.qubits) == 2:
            hu, hv = phi.hw(g.qu), phi.hw(g.qv)
            if not gh.has_edge(hu, hv):
                violations.append(
                    ("connectivity", pos, f"qubits mapped to ({hu}, {hv}), not a hardware edge")
                )
                break
        if g.kind is GateKind.SWAP:
            phi = apply_swap(phi, g.qu, g.qv)

    return ValidityReport(valid=not violations, violations=violations)


def translate(
    seq: GateSequence,
    phi0: Assignment,
    gd: DependencyGraph,
    n: int,
    m: int,
) -> CircuitTable:
    """Deterministically place a gate sequence into an N x M circuit table.

    Each gate's native decomposition occupies consecutive layers starting at
    the first layer after (a) the last layer of both its hardware qubits,
    (b) the last layer of every placed prerequisite, and (c), for SWAPs, the
    last layer of every previously placed gate. Raises DepthOverflowError when
    a placement would need a layer >= m.
    """
    _check_structure(seq.gates, n)
    table = CircuitTable(n, m)
    qubit_layer = [-1] * n
    gate_layer: list[int] = []
    ids = match_targets(seq.gates, gd.gates)
    phi = phi0

    for i, g in enumerate(seq.gates):
        hw = tuple(phi.hw(q) for q in g.qubits)
        if len(hw) == 2:
            mapped = Gate(g.kind, hw[0], hw[1], angle=g.angle)
        else:
            mapped = Gate(g.kind, hw[0], angle=g.angle)
        native = decompose(mapped)
        chosen = max(qubit_layer[q] for q in hw) + 1
        tid = ids[i]
        for j in range(i):
            jid = ids[j]
            if tid is not None and jid is not None and gd.reaches(jid, tid):
                chosen = max(chosen, gate_layer[j] + 1)
            if g.kind is GateKind.SWAP:
                chosen = max(chosen, gate_layer[j] + 1)
        last = chosen + len(native) - 1
        if last >= m:
            raise DepthOverflowError(
                f"gate {i} needs layers {chosen}..{last} but the table has {m} columns"
            )
        for off, ng in enumerate(native):
            table.place(chosen + off, ng)
        gate_layer.append(last)
        for q in hw:
            qubit_layer[q] = last
        if g.kind is GateKind.SWAP:
            phi = apply_swap(phi, g.qu, g.qv)

    return table


@dataclass
class ProblemInstance:
    """One routing problem: targets with their dependencies, the hardware
    graph, the initial assignment, and the gate budget."""

    n_qubits: int
    gd: DependencyGraph
    gh: HardwareGraph
    phi0: Assignment
    gate_limit: int
    depth_limit: int = 0

    def __post_init__(self):
        if self.depth_limit <= 0:
            self.depth_limit = 4 * self.gate_limit
        _check_structure(self.gd.gates, self.n_qubits)
        if self.gh.n_qubits != self.n_qubits or len(self.phi0) != self.n_qubits:
            raise StructuralError("instance qubit counts disagree")

    @property
    def targets(self) -> tuple[Gate, ...]:
        return self.gd.gates

    def to_json(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "hardware_edges": [list(e) for e in self.gh.edges],
            "targets": [
                {"kind": g.kind.value, "qu": g.qu, "qv": g.qv, "angle": g.angle}
                for g in self.targets
            ],
            "dep_edges": [list(e) for e in self.gd.edges],
            "phi0": self.phi0.as_list(),
            "gate_limit": self.gate_limit,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ProblemInstance":
        targets = [
            Gate(GateKind(t["kind"]), t["qu"], t.get("qv"), t.get("angle"))
            for t in obj["targets"]
        ]
        return cls(
            n_qubits=obj["n_qubits"],
            gd=DependencyGraph(targets, [tuple(e) for e in obj["dep_edges"]]),
            gh=HardwareGraph(obj["n_qubits"], [tuple(e) for e in obj["hardware_edges"]]),
            phi0=Assignment(obj["phi0"]),
            gate_limit=obj["gate_limit"],
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json(), f, indent=1)

    @classmethod
    def load(cls, path) -> "ProblemInstance":
        with open(path, encoding="utf-8") as f:
            return cls.from_json(json.load(f))
