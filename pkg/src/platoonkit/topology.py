"""Platoon graphs, reference-vehicle arrangements, and grounded Laplacians.

A platoon P(n, k) is a chain of n vehicles, indexed 1..n, where vehicles i
and j communicate iff 0 < |i - j| <= k.  A subset of vehicles acts as
references (grounded nodes); deleting their rows and columns from the graph
Laplacian yields the grounded Laplacian block that drives every robustness
quantity downstream.

Vehicle indices are 1-based everywhere in the public API.  Laplacian blocks
are built in exact integer arithmetic; conversion to floating point happens
only at the spectral boundary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class PlatoonTopology:
    """A k-nearest-neighbor platoon graph P(n, k).

    Attributes:
        n: vehicle count (>= 2).
        k: connectivity index (>= 1); k >= n - 1 yields the complete graph.
        edges: frozenset of (i, j) pairs with i < j.
    """

    n: int
    k: int
    edges: frozenset

    def neighbors(self, i: int) -> tuple:
        """Sorted neighbor indices of vehicle i."""
        if not 1 <= i <= self.n:
            raise ParameterError(f"vehicle index {i} outside 1..{self.n}")
        lo = max(1, i - self.k)
        hi = min(self.n, i + self.k)
        return tuple(j for j in range(lo, hi + 1) if j != i)

    def degree(self, i: int) -> int:
        return min(i - 1, self.k) + min(self.n - i, self.k)

    def degrees(self) -> np.ndarray:
        return np.array([self.degree(i) for i in range(1, self.n + 1)], dtype=np.int64)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.int64)
        for i, j in self.edges:
            a[i - 1, j - 1] = 1
            a[j - 1, i - 1] = 1
        return a

    def laplacian(self) -> np.ndarray:
        a = self.adjacency()
        return np.diag(a.sum(axis=1)) - a


def build_platoon(n: int, k: int) -> PlatoonTopology:
    """Construct P(n, k) with the exact |i - j| <= k edge rule.

    Args:
        n: vehicle count, n >= 2.
        k: connectivity index, k >= 1.  Values k >= n - 1 are allowed and
           saturate to the complete graph.

    Raises:
        ParameterError: if n < 2 or k < 1.
    """
    if int(n) != n or n < 2:
        raise ParameterError(f"vehicle count n must be an integer >= 2, got {n!r}")
    if int(k) != k or k < 1:
        raise ParameterError(f"connectivity index k must be an integer >= 1, got {k!r}")
    n, k = int(n), int(k)
    edges = frozenset(
        (i, j) for i in range(1, n + 1) for j in range(i + 1, min(n, i + k) + 1)
    )
    return PlatoonTopology(n=n, k=k, edges=edges)


@dataclass(frozen=True)
class ReferenceSet:
    """A nonempty set of reference (grounded) vehicles and its complement.

    Attributes:
        n: vehicle count of the underlying platoon.
        refs: sorted tuple of reference indices.
        followers: sorted tuple of the remaining indices.
    """

    n: int
    refs: tuple
    followers: tuple


def make_reference_set(n: int, refs) -> ReferenceSet:
    """Validate and normalize a collection of 1-based reference indices."""
    refs = sorted(set(int(r) for r in refs))
    if not refs:
        raise ParameterError("reference set must be nonempty")
    if refs[0] < 1 or refs[-1] > n:
        bad = [r for r in refs if not 1 <= r <= n]
        raise ParameterError(f"reference indices {bad} outside 1..{n}")
    followers = tuple(i for i in range(1, n + 1) if i not in set(refs))
    return ReferenceSet(n=n, refs=tuple(refs), followers=followers)


def md_arrangement(n: int, k: int) -> ReferenceSet:
    """Minimally dense reference arrangement for P(n, k).

    Partitions 1..n into consecutive segments of length 2k + 1 starting at
    vehicle 1 (the trailing segment may be shorter) and places one reference
    at the middle of each segment, position start + ceil(len / 2) - 1.
    Yields ceil(n / (2k + 1)) references.
    """
    if int(n) != n or n < 1:
        raise ParameterError(f"vehicle count n must be an integer >= 1, got {n!r}")
    if int(k) != k or k < 1:
        raise ParameterError(f"connectivity index k must be an integer >= 1, got {k!r}")
    n, k = int(n), int(k)
    seg = 2 * k + 1
    refs = []
    start = 1
    while start <= n:
        length = min(seg, n - start + 1)
        refs.append(start + (length + 1) // 2 - 1)
        start += seg
    return make_reference_set(n, refs)


@dataclass(frozen=True)
class GroundedSystem:
    """Grounded Laplacian decomposition of a platoon with references.

    The full Laplacian, with followers ordered before references, splits as

        [ lg   l12 ]
        [ l21  l22 ]

    and only the follower blocks lg (|F| x |F|, symmetric positive definite)
    and l12 (|F| x |R|) matter for the error dynamics.  Entries are exact
    signed integers.

    Attributes:
        lg: grounded Laplacian over followers.
        l12: coupling block from followers to references.
        betas: per-follower count of reference neighbors.
        boundary_size: number of follower-reference edges, equals betas.sum().
        dmax_f: maximum degree over follower vehicles.
        n, k: provenance of the underlying platoon.
        refs, followers: 1-based index tuples (followers order matches lg rows).
    """

    lg: np.ndarray
    l12: np.ndarray
    betas: np.ndarray
    boundary_size: int
    dmax_f: int
    n: int
    k: int
    refs: tuple
    followers: tuple

    @property
    def n_followers(self) -> int:
        return len(self.followers)


def ground(topology: PlatoonTopology, refset: ReferenceSet) -> GroundedSystem:
    """Delete reference rows/columns from the Laplacian of `topology`.

    Raises:
        ParameterError: if the reference set does not match the topology or
            leaves no followers (an all-reference platoon has no dynamics).
    """
    if refset.n != topology.n:
        raise ParameterError(
            f"reference set is for n={refset.n}, topology has n={topology.n}"
        )
    if not refset.followers:
        raise ParameterError("no followers left: all vehicles are references")
    lap = topology.laplacian()
    f_idx = np.array([i - 1 for i in refset.followers])
    r_idx = np.array([i - 1 for i in refset.refs])
    lg = lap[np.ix_(f_idx, f_idx)]
    l12 = lap[np.ix_(f_idx, r_idx)]
    betas = -l12.sum(axis=1)
    degrees = topology.degrees()
    return GroundedSystem(
        lg=lg,
        l12=l12,
        betas=betas,
        boundary_size=int(betas.sum()),
        dmax_f=int(degrees[f_idx].max()),
        n=topology.n,
        k=topology.k,
        refs=refset.refs,
        followers=refset.followers,
    )


# ---------------------------------------------------------------------------
# Scenario JSON fragment: the canonical input consumed by the CLI
# ---------------------------------------------------------------------------

def scenario_to_json(topology: PlatoonTopology, refset: ReferenceSet) -> str:
    return json.dumps(
        {"n": topology.n, "k": topology.k, "refs": list(refset.refs)},
        sort_keys=True,
    )


def scenario_from_json(doc: str):
    """Parse a {"n":…, "k":…, "refs":[…]} document into topology + references."""
    try:
        raw = json.loads(doc)
        n, k, refs = raw["n"], raw["k"], raw["refs"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ParameterError(f"malformed scenario document: {exc}") from exc
    topology = build_platoon(n, k)
    return topology, make_reference_set(n, refs)
