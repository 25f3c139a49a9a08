"""Ranked binary dendrograms built by agglomerative clustering.

Node references are plain integers: terminals are 1..n (matrix row order),
the internal node created by merge k is n+k (written ``q<k>`` in text form).
Three agglomeration criteria are supported, all via the Lance-Williams
update of a stored dissimilarity matrix:

``ward``
    minimum-variance; dissimilarities are the variance increase caused by
    a merge (``|A||B|/(|A|+|B|) * ||cA - cB||^2``), updated exactly by the
    Lance-Williams ward coefficients.
``median``
    Gower's median method on squared Euclidean distances (coefficients
    1/2, 1/2, -1/4); level inversions are possible and are preserved.
``unweighted_average``
    1/2, 1/2 update of plain Euclidean distances, i.e. equal weight per
    child cluster regardless of cardinality.

Ties between equal minimum dissimilarities are broken by merging the pair
whose (smaller, larger) node numbers are lexicographically least, which
makes the builder fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NotFoundError, ParseError
from .matrix import DataMatrix

__all__ = [
    "CRITERIA",
    "MergeStep",
    "Dendrogram",
    "build_hierarchy",
    "cluster_members",
    "validate",
    "ValidationReport",
    "dendrogram_to_text",
    "dendrogram_from_text",
    "tie_break_variants",
    "node_label",
    "parse_node",
]

CRITERIA = ("ward", "median", "unweighted_average")


def node_label(node: int, n: int) -> str:
    """Text form of a node reference: terminal index or ``q<k>``."""
    return str(node) if node <= n else f"q{node - n}"


def parse_node(text: str, n: int) -> int:
    text = text.strip()
    if text.startswith("q"):
        k = int(text[1:])
        if not 1 <= k <= n - 1:
            raise ValueError(f"internal node {text} out of range")
        return n + k
    i = int(text)
    if not 1 <= i <= n:
        raise ValueError(f"terminal {i} out of range 1..{n}")
    return i


@dataclass(frozen=True)
class MergeStep:
    """One agglomeration: node q_seq joins ``left`` and ``right`` at ``level``."""

    seq: int
    left: int
    right: int
    level: float


@dataclass(frozen=True)
class Dendrogram:
    """Ranked binary rooted tree over n terminals: n-1 ordered merges."""

    n: int
    merges: tuple
    criterion: str

    def __post_init__(self):
        object.__setattr__(self, "merges", tuple(self.merges))

    @property
    def root(self) -> int:
        return self.n + len(self.merges)

    @property
    def levels(self) -> np.ndarray:
        return np.array([m.level for m in self.merges], dtype=float)


def _initial_dissimilarity(values: np.ndarray, criterion: str) -> np.ndarray:
    sq = ((values[:, None, :] - values[None, :, :]) ** 2).sum(axis=2)
    if criterion == "ward":
        return sq / 2.0
    if criterion == "median":
        return sq
    return np.sqrt(sq)


def _lw_update(criterion, d_i, d_j, d_ij, nk, ni, nj):
    if criterion == "ward":
        return ((nk + ni) * d_i + (nk + nj) * d_j - nk * d_ij) / (nk + ni + nj)
    if criterion == "median":
        return 0.5 * d_i + 0.5 * d_j - 0.25 * d_ij
    return 0.5 * (d_i + d_j)


def _oriented(a: int, b: int, n: int, minm) -> tuple:
    """Canonical (left, right) child order for a merge.

    Both terminals: smaller index first.  Both internals: smaller seq
    first.  Mixed: the node containing the smallest terminal index first.
    """
    at, bt = a <= n, b <= n
    if at == bt:
        return (a, b) if a < b else (b, a)
    return (a, b) if minm[a - 1] < minm[b - 1] else (b, a)


def build_hierarchy(x: DataMatrix, criterion: str) -> Dendrogram:
    """Agglomerate the rows of ``x`` into a ranked binary dendrogram.

    O(n^2) expected time via stored dissimilarities with per-row
    nearest-neighbour bookkeeping; byte-identical output for identical
    input.
    """
    if criterion not in CRITERIA:
        raise InvalidInputError(f"unknown criterion {criterion!r}; use one of {CRITERIA}")
    n = x.n
    if n < 2:
        raise InvalidInputError(f"need at least 2 observations to cluster, got {n}")

    tot = 2 * n - 1
    d = np.full((tot, tot), np.inf)
    d[:n, :n] = _initial_dissimilarity(x.values, criterion)
    np.fill_diagonal(d, np.inf)

    active = np.zeros(tot, dtype=bool)
    active[:n] = True
    size = np.zeros(tot)
    size[:n] = 1.0
    minm = np.zeros(tot, dtype=int)
    minm[:n] = np.arange(1, n + 1)

    # nearest neighbour of slot s among active slots t > s
    nn_val = np.full(tot, np.inf)
    nn_idx = np.zeros(tot, dtype=int)
    for s in range(n - 1):
        row = d[s, s + 1 : n]
        a = int(np.argmin(row))
        nn_val[s] = row[a]
        nn_idx[s] = s + 1 + a

    def recompute_nn(s, act):
        after = act[act > s]
        if after.size == 0:
            nn_val[s] = np.inf
            return
        row = d[s, after]
        a = int(np.argmin(row))
        nn_val[s] = row[a]
        nn_idx[s] = after[a]

    merges = []
    for k in range(1, n):
        s = int(np.argmin(nn_val))
        i, j = s, int(nn_idx[s])
        lvl = float(nn_val[s])
        w = n - 1 + k

        active[i] = active[j] = False
        nn_val[i] = nn_val[j] = np.inf
        act = np.flatnonzero(active)
        d[act, w] = d[w, act] = _lw_update(
            criterion, d[act, i], d[act, j], lvl, size[act], size[i], size[j]
        )
        active[w] = True
        size[w] = size[i] + size[j]
        minm[w] = min(minm[i], minm[j])

        stale = act[(nn_idx[act] == i) | (nn_idx[act] == j)]
        fresh = np.setdiff1d(act, stale, assume_unique=True)
        better = fresh[d[fresh, w] < nn_val[fresh]]
        nn_val[better] = d[better, w]
        nn_idx[better] = w
        act_now = np.flatnonzero(active)
        for t in stale:
            recompute_nn(t, act_now)

        left, right = _oriented(i + 1, j + 1, n, minm)
        merges.append(MergeStep(k, left, right, lvl))

    return Dendrogram(n=n, merges=tuple(merges), criterion=criterion)


def tie_break_variants(x: DataMatrix, criterion: str, limit: int = 8) -> list:
    """All dendrograms reachable by resolving tied minima differently.

    Depth-first enumeration, default tie-break first; at most ``limit``
    trees are returned.  Intended for small n (full matrix scan per step).
    """
    if criterion not in CRITERIA:
        raise InvalidInputError(f"unknown criterion {criterion!r}")
    n = x.n
    if n < 2:
        raise InvalidInputError("need at least 2 observations")
    tot = 2 * n - 1
    d0 = np.full((tot, tot), np.inf)
    d0[:n, :n] = _initial_dissimilarity(x.values, criterion)
    np.fill_diagonal(d0, np.inf)

    out = []

    def walk(d, active, size, minm, merges, k):
        if len(out) >= limit:
            return
        if k == n:
            out.append(Dendrogram(n=n, merges=tuple(merges), criterion=criterion))
            return
        act = np.flatnonzero(active)
        sub = d[np.ix_(act, act)]
        iu = np.triu_indices(len(act), 1)
        vals = sub[iu]
        best = vals.min()
        ties = sorted(
            (int(act[iu[0][t]]), int(act[iu[1][t]])) for t in np.flatnonzero(vals == best)
        )
        for i, j in ties:
            d2 = d.copy()
            active2 = active.copy()
            size2 = size.copy()
            minm2 = minm.copy()
            w = n - 1 + k
            active2[i] = active2[j] = False
            a2 = np.flatnonzero(active2)
            d2[a2, w] = d2[w, a2] = _lw_update(
                criterion, d2[a2, i], d2[a2, j], best, size2[a2], size2[i], size2[j]
            )
            active2[w] = True
            size2[w] = size2[i] + size2[j]
            minm2[w] = min(minm2[i], minm2[j])
            left, right = _oriented(i + 1, j + 1, n, minm2)
            walk(d2, active2, size2, minm2, merges + [MergeStep(k, left, right, best)], k + 1)

    active = np.zeros(tot, dtype=bool)
    active[:n] = True
    size = np.zeros(tot)
    size[:n] = 1.0
    minm = np.zeros(tot, dtype=int)
    minm[:n] = np.arange(1, n + 1)
    walk(d0, active, size, minm, [], 1)
    return out


def cluster_members(d: Dendrogram, node: int) -> frozenset:
    """Terminal indices under ``node`` (the singleton for a terminal)."""
    n = d.n
    if not isinstance(node, (int, np.integer)) or not 1 <= node <= n + len(d.merges):
        raise NotFoundError(f"no node {node!r} in a dendrogram on {n} terminals")
    if node <= n:
        return frozenset((int(node),))
    members = [frozenset((i,)) for i in range(1, n + 1)] + [None] * (n - 1)
    for step in d.merges:
        members[n - 1 + step.seq] = members[step.left - 1] | members[step.right - 1]
        if n + step.seq == node:
            break
    return members[node - 1]


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    problems: tuple
    inversions: tuple

    def __bool__(self):
        return self.ok


def validate(d: Dendrogram) -> ValidationReport:
    """Structural diagnostics: wellformedness, child coverage, inversions.

    Level inversions (a merge lower than its predecessor) are flagged but
    do not make the report not-ok; the transform consumes merge order, not
    heights.
    """
    problems = []
    n = d.n
    if n < 2:
        problems.append(f"n must be >= 2, got {n}")
    if len(d.merges) != n - 1:
        problems.append(f"expected {n - 1} merges, found {len(d.merges)}")
    if d.criterion not in CRITERIA:
        problems.append(f"unknown criterion {d.criterion!r}")

    used = {}
    for pos, step in enumerate(d.merges, start=1):
        if step.seq != pos:
            problems.append(f"merge at position {pos} has seq {step.seq}")
        for child in (step.left, step.right):
            if child <= 0 or child > n + len(d.merges):
                problems.append(f"q{pos}: child {child} out of range")
            elif child > n and child - n >= pos:
                problems.append(
                    f"q{pos}: child {node_label(child, n)} not yet created"
                )
            elif child in used:
                problems.append(
                    f"node {node_label(child, n)} used as child of both "
                    f"q{used[child]} and q{pos}"
                )
            else:
                used[child] = pos
        if step.left == step.right:
            problems.append(f"q{pos}: identical children")
        if not np.isfinite(step.level) or step.level < 0:
            problems.append(f"q{pos}: bad level {step.level}")

    if not problems:
        expected = set(range(1, n + 1)) | set(range(n + 1, n + len(d.merges)))
        for node in sorted(expected - set(used)):
            problems.append(f"node {node_label(node, n)} is never merged")

    inversions = tuple(
        step.seq
        for prev, step in zip(d.merges, d.merges[1:])
        if step.level < prev.level
    )
    return ValidationReport(ok=not problems, problems=tuple(problems), inversions=inversions)


def dendrogram_to_text(d: Dendrogram) -> str:
    """Portable text form: n, criterion, then one merge record per line."""
    lines = [f"n\t{d.n}", f"criterion\t{d.criterion}"]
    for s in d.merges:
        lines.append(
            f"merge\t{s.seq}\t{node_label(s.left, d.n)}\t{node_label(s.right, d.n)}"
            f"\t{s.level:.17g}"
        )
    return "\n".join(lines) + "\n"


def _parse_header(lines):
    if not lines or not lines[0][1].startswith("n\t"):
        raise ParseError("expected 'n\\t<count>' on the first line")
    lineno, text = lines[0]
    try:
        n = int(text.split("\t")[1])
    except (IndexError, ValueError):
        raise ParseError("cannot parse terminal count", line=lineno) from None
    if n < 2:
        raise InvalidInputError(f"dendrogram needs n >= 2 terminals, got {n}")
    if len(lines) < 2 or not lines[1][1].startswith("criterion\t"):
        raise ParseError("expected 'criterion\\t<name>' on the second line", line=lines[0][0] + 1)
    criterion = lines[1][1].split("\t")[1].strip()
    if criterion not in CRITERIA:
        raise ParseError(f"unknown criterion {criterion!r}", line=lines[1][0])
    return n, criterion


def _parse_merge_fields(fields, n, lineno, expected_seq):
    if len(fields) < 5:
        raise ParseError("merge record needs seq, left, right, level", line=lineno)
    try:
        seq = int(fields[1])
    except ValueError:
        raise ParseError(f"bad seq {fields[1]!r}", line=lineno) from None
    if seq != expected_seq:
        raise ParseError(f"expected seq {expected_seq}, got {seq}", line=lineno)
    try:
        left = parse_node(fields[2], n)
        right = parse_node(fields[3], n)
    except ValueError as e:
        raise ParseError(str(e), line=lineno) from None
    try:
        level = float(fields[4])
    except ValueError:
        raise ParseError(f"bad level {fields[4]!r}", line=lineno) from None
    return MergeStep(seq, left, right, level)


def dendrogram_from_text(text: str) -> Dendrogram:
    lines = [
        (i, ln) for i, ln in enumerate(text.splitlines(), start=1) if ln.strip()
    ]
    n, criterion = _parse_header(lines)
    merges = []
    for lineno, ln in lines[2:]:
        fields = ln.split("\t")
        if fields[0] != "merge":
            raise ParseError(f"unexpected record {fields[0]!r}", line=lineno)
        merges.append(_parse_merge_fields(fields, n, lineno, len(merges) + 1))
    if len(merges) != n - 1:
        raise ParseError(f"expected {n - 1} merge records, found {len(merges)}")
    return Dendrogram(n=n, merges=tuple(merges), criterion=criterion)
