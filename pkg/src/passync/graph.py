"""Directed leader-follower communication graphs.

Followers are numbered ``1..m`` and the leader is node ``0``. An edge
``(i, j, w)`` means follower ``i`` receives the position of node ``j`` with
weight ``w``.
"""

from __future__ import annotations

import io
from collections import deque
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from .errors import ArbitraryRequiresEight, IsolatedFollower, UnknownPreset

PRESET_KINDS = ("star", "cyclic", "series", "arbitrary", "custom")

# Incoming weights per follower for the 8-agent arbitrary graph: {i: {j: w}}.
ARBITRARY_WEIGHTS: dict[int, dict[int, float]] = {
    1: {0: 1.0},
    2: {0: 0.75, 4: 0.25},
    3: {0: 1.0},
    4: {1: 0.5, 2: 0.5},
    5: {2: 0.25, 7: 0.75},
    6: {3: 0.75, 8: 0.25},
    7: {5: 0.5, 6: 0.45, 8: 0.05},
    8: {6: 0.5, 7: 0.5},
}

# Bidirectional cross links that the link-removal experiment deletes.
ARBITRARY_GROUPS: dict[str, tuple[tuple[int, int], ...]] = {
    "I": ((2, 4), (4, 2)),
    "II": ((5, 7), (7, 5)),
    "III": ((7, 8), (8, 7)),
}

# Follower whose leader edge is varied in the arbitrary-graph sweep.
ARBITRARY_SWEPT_AGENT = 2

BALANCE_TOL = 1e-12
CYCLIC_LEADER_WEIGHT = 0.5
CYCLIC_NEIGHBOR_WEIGHT = 0.25


@dataclass(frozen=True)
class Edge:
    i: int
    j: int
    w: float


@dataclass(frozen=True)
class Network:
    """Immutable weighted digraph with derived matrices.

    ``edges`` holds only strictly positive weights; ``groups`` names sets of
    ``(i, j)`` pairs so that experiments can drop them declaratively.
    """

    m: int
    edges: tuple[Edge, ...]
    groups: Mapping[str, tuple[tuple[int, int], ...]] = field(default_factory=dict)

    def __post_init__(self):
        if int(self.m) < 1:
            raise ValueError(f"network needs at least one follower, got m={self.m}")
        object.__setattr__(self, "edges", tuple(self.edges))
        seen = set()
        for e in self.edges:
            if not 1 <= e.i <= self.m:
                raise ValueError(f"edge target {e.i} outside 1..{self.m}")
            if not 0 <= e.j <= self.m:
                raise ValueError(f"edge source {e.j} outside 0..{self.m}")
            if e.i == e.j:
                raise ValueError(f"self-loop on follower {e.i}")
            if not (e.w > 0 and np.isfinite(e.w)):
                raise ValueError(f"edge ({e.i},{e.j}) has non-positive weight {e.w}")
            if (e.i, e.j) in seen:
                raise ValueError(f"duplicate edge ({e.i},{e.j})")
            seen.add((e.i, e.j))

    @classmethod
    def from_matrices(cls, adjacency, leader_weights, groups=None) -> "Network":
        am = np.asarray(adjacency, dtype=float)
        a0 = np.asarray(leader_weights, dtype=float)
        if a0.ndim == 2:
            a0 = np.diag(a0)
        m = a0.size
        if am.shape != (m, m):
            raise ValueError(f"adjacency shape {am.shape} does not match m={m}")
        edges = [Edge(i + 1, 0, float(a0[i])) for i in range(m) if a0[i] != 0]
        rows, cols = np.nonzero(am)
        edges += [Edge(int(r) + 1, int(c) + 1, float(am[r, c])) for r, c in zip(rows, cols)]
        return cls(m, tuple(sorted(edges, key=lambda e: (e.i, e.j))), dict(groups or {}))

    # Derived matrices -------------------------------------------------

    @cached_property
    def adjacency(self) -> np.ndarray:
        """Follower adjacency ``A_m`` with ``A_m[i-1, j-1] = w_ij``."""
        am = np.zeros((self.m, self.m))
        for e in self.edges:
            if e.j:
                am[e.i - 1, e.j - 1] = e.w
        am.setflags(write=False)
        return am

    @cached_property
    def leader_weights(self) -> np.ndarray:
        """Diagonal of ``A_0``."""
        a0 = np.zeros(self.m)
        for e in self.edges:
            if e.j == 0:
                a0[e.i - 1] = e.w
        a0.setflags(write=False)
        return a0

    @property
    def leader_matrix(self) -> np.ndarray:
        return np.diag(self.leader_weights)

    @cached_property
    def degrees(self) -> np.ndarray:
        """Follower in-degrees ``d_i`` (leader edge excluded)."""
        return self.adjacency.sum(axis=1)

    @property
    def degree_matrix(self) -> np.ndarray:
        return np.diag(self.degrees)

    @property
    def total_weights(self) -> np.ndarray:
        """``w_i = d_i + w_i0``; all ones for a balanced network."""
        return self.degrees + self.leader_weights

    @cached_property
    def laplacian(self) -> np.ndarray:
        """``L = D_m + A_0 - A_m``."""
        lap = np.diag(self.total_weights) - self.adjacency
        lap.setflags(write=False)
        return lap

    @property
    def balance_residual(self) -> float:
        """``max_i |(A_m + A_0) 1 - 1|``; zero when the balance condition holds."""
        return float(np.max(np.abs(self.total_weights - 1.0)))

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(indptr, indices, weights)`` of ``A_m`` in compressed-row form (0-based)."""
        indptr = np.zeros(self.m + 1, dtype=np.int64)
        rows: list[list[tuple[int, float]]] = [[] for _ in range(self.m)]
        for e in self.edges:
            if e.j:
                rows[e.i - 1].append((e.j - 1, e.w))
        indices, weights = [], []
        for r, row in enumerate(rows):
            row.sort()
            indices += [c for c, _ in row]
            weights += [w for _, w in row]
            indptr[r + 1] = len(indices)
        return indptr, np.asarray(indices, dtype=np.int64), np.asarray(weights, dtype=float)

    @property
    def n_follower_edges(self) -> int:
        return sum(1 for e in self.edges if e.j)

    # Editing -----------------------------------------------------------

    def without_edges(self, pairs: Iterable[tuple[int, int]]) -> "Network":
        drop = {tuple(p) for p in pairs}
        return replace(self, edges=tuple(e for e in self.edges if (e.i, e.j) not in drop))

    def without_groups(self, labels: Iterable[str]) -> "Network":
        pairs = []
        for label in labels:
            if label not in self.groups:
                raise KeyError(f"unknown edge group {label!r}; known: {sorted(self.groups)}")
            pairs += list(self.groups[label])
        return self.without_edges(pairs)

    # Serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "edges": [[e.i, e.j, e.w] for e in self.edges],
            "groups": {k: [list(p) for p in v] for k, v in self.groups.items()},
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Network":
        edges = tuple(Edge(int(i), int(j), float(w)) for i, j, w in data["edges"])
        groups = {k: tuple((int(a), int(b)) for a, b in v) for k, v in data.get("groups", {}).items()}
        return cls(int(data["m"]), edges, groups)

    def matrix_csv(self, which: str = "laplacian") -> str:
        """Dense row-major CSV dump of one derived matrix."""
        mats = {
            "adjacency": self.adjacency,
            "leader": self.leader_matrix,
            "degree": self.degree_matrix,
            "laplacian": self.laplacian,
        }
        buf = io.StringIO()
        np.savetxt(buf, mats[which], delimiter=",", fmt="%.17g")
        return buf.getvalue()


@dataclass(frozen=True)
class TopologyPreset:
    """One of the named experiment graphs, plus sweep overrides.

    ``leader_access`` restricts which followers receive the leader (1-based
    ids); ``None`` keeps the preset's own leader edges.
    """

    kind: str = "star"
    m: int = 8
    leader_weight_override: float | None = None
    removed_edges: tuple[str, ...] = ()
    leader_access: tuple[int, ...] | None = None
    custom: Network | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", str(self.kind).lower())
        object.__setattr__(self, "removed_edges", tuple(self.removed_edges))
        if self.leader_access is not None:
            object.__setattr__(self, "leader_access", tuple(int(i) for i in self.leader_access))


def _cyclic_edges(m: int, leader_weight: float, leader_access) -> list[Edge]:
    edges = []
    for i in range(1, m + 1):
        if leader_access is None or i in leader_access:
            edges.append(Edge(i, 0, leader_weight))
        if m == 1:
            continue
        nbrs = {(i - 2) % m + 1, i % m + 1}
        for j in sorted(nbrs):
            edges.append(Edge(i, j, CYCLIC_NEIGHBOR_WEIGHT))
    return edges


def build_preset(preset: TopologyPreset) -> Network:
    """Build the un-normalized preset network with its exact nominal weights."""
    kind, m = preset.kind, int(preset.m)
    if kind not in PRESET_KINDS:
        raise UnknownPreset(f"unknown topology {preset.kind!r}; expected one of {PRESET_KINDS}")
    if kind == "custom":
        if preset.custom is None:
            raise UnknownPreset("custom topology requires an explicit network")
        net = preset.custom
    else:
        if m < 1:
            raise ValueError(f"m must be >= 1, got {m}")
        override = preset.leader_weight_override
        access = preset.leader_access
        groups: dict = {}
        if kind == "star":
            w = 1.0 if override is None else float(override)
            edges = [Edge(i, 0, w) for i in range(1, m + 1) if access is None or i in access]
        elif kind == "cyclic":
            w = CYCLIC_LEADER_WEIGHT if override is None else float(override)
            edges = _cyclic_edges(m, w, access)
        elif kind == "series":
            w = 1.0 if override is None else float(override)
            edges = [Edge(1, 0, w)] + [Edge(i, i - 1, 1.0) for i in range(2, m + 1)]
        else:
            if m != 8:
                raise ArbitraryRequiresEight(f"arbitrary topology is defined for m=8, got {m}")
            edges = []
            for i, row in ARBITRARY_WEIGHTS.items():
                for j, w in row.items():
                    if j == 0 and override is not None and i == ARBITRARY_SWEPT_AGENT:
                        w = float(override)
                    edges.append(Edge(i, j, w))
            groups = dict(ARBITRARY_GROUPS)
        net = Network(m, tuple(e for e in edges if e.w > 0), groups)
    if preset.removed_edges:
        net = net.without_groups(preset.removed_edges)
    return net


def normalize(net: Network) -> Network:
    """Divide every incoming weight by the follower's total incoming weight."""
    totals = net.total_weights
    isolated = [i + 1 for i in range(net.m) if totals[i] <= 0]
    if isolated:
        raise IsolatedFollower(f"followers {isolated} have no incoming edges")
    # Rows already summing to one (to rounding) are copied untouched so that
    # normalize is idempotent bit-for-bit.
    unit = np.abs(totals - 1.0) <= BALANCE_TOL
    edges = tuple(
        e if unit[e.i - 1] else Edge(e.i, e.j, e.w / totals[e.i - 1]) for e in net.edges
    )
    return replace(net, edges=edges)


@dataclass(frozen=True)
class ConnectivityReport:
    reachable: bool
    unreachable: tuple[int, ...]
    min_real_eig: float
    positive_stable: bool
    balance_residual: float
    leader_weight_range_ok: bool
    eigenvalues: tuple[complex, ...]

    def to_dict(self) -> dict:
        return {
            "reachable": self.reachable,
            "unreachable": list(self.unreachable),
            "min_real_eig": self.min_real_eig,
            "positive_stable": self.positive_stable,
            "balance_residual": self.balance_residual,
            "leader_weight_range_ok": self.leader_weight_range_ok,
        }


def leader_reachable(net: Network) -> tuple[int, ...]:
    """Followers with no directed path from the leader (empty when all reachable)."""
    out: dict[int, list[int]] = {k: [] for k in range(net.m + 1)}
    for e in net.edges:
        out[e.j].append(e.i)
    seen = {0}
    queue = deque([0])
    while queue:
        node = queue.popleft()
        for nxt in out[node]:
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return tuple(i for i in range(1, net.m + 1) if i not in seen)


def check_connectivity(net: Network, tol: float = 1e-10) -> ConnectivityReport:
    """Leader reachability and positive stability of ``L``, reported independently."""
    missing = leader_reachable(net)
    eig = np.linalg.eigvals(net.laplacian)
    min_re = float(np.min(eig.real))
    a0 = net.leader_weights
    return ConnectivityReport(
        reachable=not missing,
        unreachable=missing,
        min_real_eig=min_re,
        positive_stable=min_re > tol,
        balance_residual=net.balance_residual,
        leader_weight_range_ok=bool(np.all((a0 >= 0) & (a0 <= 1)) and np.any(a0 > 0)),
        eigenvalues=tuple(complex(z) for z in eig),
    )
