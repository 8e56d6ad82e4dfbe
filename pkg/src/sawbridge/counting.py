"""Exact enumeration of self-avoiding walks, bridges, and irreducible bridges.

Counts are resolved by endpoint and by number of steps, and kept as exact
integers; inverse temperature enters only when a table is evaluated into a
two-point weight.  That keeps every structural identity (class domination,
the renewal convolution of bridge counts, skeleton laws) checkable with
zero tolerance.

Three walk classes share one depth-first search skeleton:

* ALL: every self-avoiding walk from the origin.
* BRIDGE: the first coordinate of every site after the start is >= 1 and
  the final first coordinate is the running maximum.
* IRREDUCIBLE_BRIDGE: a bridge none of whose interior levels k splits it
  into "everything <= k, then everything > k".

The irreducibility test is incremental: level k in (0, max level) is a
break point iff the walk never steps down across the k/k+1 boundary, so
the search carries a per-level down-crossing count and the number of
interior levels with none.  Each move updates this state in O(1) and
undoes it on backtrack.

Sites are encoded as single integers (mixed-radix over the reachable box)
so the visited set and endpoint keys are plain ints; decoding happens once
per table, after the search.

Parallel enumeration splits the tree at a fixed prefix depth and merges
per-subtree counts by integer addition, so results are independent of the
thread count and of task scheduling order.
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .lattice import (
    FrameSplit,
    Site,
    origin,
    require_walk,
    site_add,
    unit_steps,
)

SUPPORTED_DIMENSIONS = (2, 3, 4)

# Safe overestimates of the per-step branching used for feasibility guards.
_GROWTH_BOUND = {2: 2.7, 3: 4.8, 4: 6.9}

DEFAULT_NODE_BUDGET = 5e10
DEFAULT_SPLIT_DEPTH = 6


class WalkClass(Enum):
    ALL = "all"
    BRIDGE = "bridge"
    IRREDUCIBLE_BRIDGE = "irreducible"


class BudgetExceededError(ValueError):
    """Estimated search size exceeds the configured node budget."""


class NoBridgesError(ValueError):
    """No bridge to the requested endpoint exists within the cutoff."""


class ZeroWeightError(ValueError):
    """A required endpoint has zero truncated weight (cutoff too small)."""


class CacheFormatError(ValueError):
    """A count cache file is malformed or fails its integrity check."""


@dataclass(frozen=True)
class CountTable:
    """Exact per-endpoint, per-length walk counts up to a step cutoff."""

    d: int
    cutoff: int
    walk_class: WalkClass
    counts: dict[Site, np.ndarray]

    def row(self, x: Site) -> np.ndarray:
        """Count array over step numbers 0..cutoff for endpoint x."""
        row = self.counts.get(tuple(x))
        if row is None:
            return np.zeros(self.cutoff + 1, dtype=np.int64)
        return row

    def count(self, x: Site, n: int) -> int:
        return int(self.row(x)[n])

    def endpoints(self) -> list[Site]:
        return sorted(self.counts)


def check_dimension(d: int) -> None:
    if d not in SUPPORTED_DIMENSIONS:
        raise ValueError(f"dimension must be one of {SUPPORTED_DIMENSIONS}, got {d}")


def estimate_nodes(d: int, cutoff: int) -> float:
    """Upper estimate of the number of search-tree nodes up to the cutoff."""
    check_dimension(d)
    mu = _GROWTH_BOUND[d]
    return sum(mu**k for k in range(cutoff + 1))


def _encode_origin(d: int, cutoff: int) -> int:
    base = 2 * cutoff + 1
    return sum(cutoff * base**i for i in range(d))


def _axis_offsets(d: int, cutoff: int) -> list[int]:
    """Encoded displacement per canonical unit step (axis asc, + before -)."""
    base = 2 * cutoff + 1
    offs: list[int] = []
    for axis in range(d):
        w = base**axis
        offs.extend((w, -w))
    return offs


def _decode(code: int, d: int, cutoff: int) -> Site:
    base = 2 * cutoff + 1
    out = []
    for _ in range(d):
        code, rem = divmod(code, base)
        out.append(rem - cutoff)
    return tuple(out)


def _explore_all(
    d: int,
    cutoff: int,
    prefix: tuple[int, ...],
    record_from: int,
    stop_depth: int | None,
    sink: list[tuple[int, ...]] | None,
) -> dict[int, list[int]]:
    """Count self-avoiding extensions of an encoded path prefix.

    Nodes of depth >= record_from are tallied by endpoint and depth.  When
    stop_depth is given, nodes at that depth are appended to sink (as full
    code paths) instead of being recorded or expanded; this is the prefix
    pass of the parallel split.
    """
    offsets = _axis_offsets(d, cutoff)
    visited = set(prefix)
    stack = list(prefix)
    counts: dict[int, list[int]] = {}
    stop = -1 if stop_depth is None else stop_depth
    width = cutoff + 1

    def rec(pos: int, depth: int) -> None:
        if depth == stop:
            sink.append(tuple(stack))
            return
        if depth >= record_from:
            row = counts.get(pos)
            if row is None:
                row = counts[pos] = [0] * width
            row[depth] += 1
        if depth == cutoff:
            return
        nd = depth + 1
        for off in offsets:
            nxt = pos + off
            if nxt in visited:
                continue
            visited.add(nxt)
            stack.append(nxt)
            rec(nxt, nd)
            stack.pop()
            visited.remove(nxt)

    rec(prefix[-1], len(prefix) - 1)
    return counts


def _explore_halfspace(
    d: int,
    cutoff: int,
    prefix: tuple[int, ...],
    want_irreducible: bool,
    record_from: int,
    stop_depth: int | None,
    sink: list[tuple[int, ...]] | None,
) -> dict[int, list[int]]:
    """Count bridges (or irreducible bridges) below an encoded path prefix.

    The search tree is the half-space tree: every site after the origin
    has first coordinate >= 1.  A node is recorded iff its endpoint level
    equals the running maximum (it is a bridge), and for the irreducible
    class additionally no interior level is free of down-crossings.
    """
    base = 2 * cutoff + 1
    offsets = _axis_offsets(d, cutoff)
    off_up, off_down = offsets[0], offsets[1]
    offsets_t = offsets[2:]
    visited = set(prefix)
    stack = list(prefix)
    counts: dict[int, list[int]] = {}
    stop = -1 if stop_depth is None else stop_depth
    width = cutoff + 1

    # Replay the prefix to recover the level bookkeeping at its tip.
    lvls = [c % base - cutoff for c in prefix]
    maxlvl = 0
    down = [0] * (cutoff + 2)
    zero_below = 0
    for prev, cur in zip(lvls, lvls[1:]):
        if cur > prev:
            if cur > maxlvl:
                maxlvl = cur
                if cur >= 2:
                    zero_below += 1
        elif cur < prev:
            if down[cur] == 0:
                zero_below -= 1
            down[cur] += 1

    def rec(pos: int, x0: int, depth: int) -> None:
        nonlocal maxlvl, zero_below
        if depth == stop:
            sink.append(tuple(stack))
            return
        if (
            depth >= record_from
            and x0 == maxlvl
            and (not want_irreducible or zero_below == 0)
        ):
            row = counts.get(pos)
            if row is None:
                row = counts[pos] = [0] * width
            row[depth] += 1
        if depth == cutoff:
            return
        nd = depth + 1

        nxt = pos + off_up
        if nxt not in visited:
            nx0 = x0 + 1
            grew = nx0 > maxlvl
            if grew:
                maxlvl = nx0
                if nx0 >= 2:
                    zero_below += 1
            visited.add(nxt)
            stack.append(nxt)
            rec(nxt, nx0, nd)
            stack.pop()
            visited.remove(nxt)
            if grew:
                maxlvl = nx0 - 1
                if nx0 >= 2:
                    zero_below -= 1

        if x0 >= 2:
            nxt = pos + off_down
            if nxt not in visited:
                k = x0 - 1
                was = down[k]
                if was == 0:
                    zero_below -= 1
                down[k] = was + 1
                visited.add(nxt)
                stack.append(nxt)
                rec(nxt, k, nd)
                stack.pop()
                visited.remove(nxt)
                down[k] = was
                if was == 0:
                    zero_below += 1

        if x0 >= 1:
            for off in offsets_t:
                nxt = pos + off
                if nxt in visited:
                    continue
                visited.add(nxt)
                stack.append(nxt)
                rec(nxt, x0, nd)
                stack.pop()
                visited.remove(nxt)

    rec(prefix[-1], lvls[-1], len(prefix) - 1)
    return counts


def _explore(
    d: int,
    cutoff: int,
    walk_class: WalkClass,
    prefix: tuple[int, ...],
    record_from: int,
    stop_depth: int | None,
    sink: list[tuple[int, ...]] | None,
) -> dict[int, list[int]]:
    if walk_class is WalkClass.ALL:
        return _explore_all(d, cutoff, prefix, record_from, stop_depth, sink)
    return _explore_halfspace(
        d,
        cutoff,
        prefix,
        walk_class is WalkClass.IRREDUCIBLE_BRIDGE,
        record_from,
        stop_depth,
        sink,
    )


def _subtree_counts(task: tuple[int, int, str, tuple[int, ...]]) -> dict[int, list[int]]:
    d, cutoff, class_value, prefix = task
    return _explore(
        d, cutoff, WalkClass(class_value), prefix, len(prefix) - 1, None, None
    )


def enumerate_counts(
    d: int,
    cutoff: int,
    walk_class: WalkClass,
    *,
    threads: int = 1,
    split_depth: int = DEFAULT_SPLIT_DEPTH,
    node_budget: float = DEFAULT_NODE_BUDGET,
) -> CountTable:
    """Exhaustively count walks of one class up to `cutoff` steps.

    With threads > 1 the tree is split at `split_depth` into independent
    subtree tasks executed in a process pool; counts merge by addition, so
    the result is identical for every thread count.
    """
    check_dimension(d)
    if cutoff < 0:
        raise ValueError(f"cutoff must be nonnegative, got {cutoff}")
    estimate = estimate_nodes(d, cutoff)
    if estimate > node_budget:
        raise BudgetExceededError(
            f"estimated {estimate:.2e} search nodes exceeds budget {node_budget:.2e}"
        )

    start = (_encode_origin(d, cutoff),)
    if threads <= 1 or cutoff <= split_depth:
        raw = _explore(d, cutoff, walk_class, start, 0, None, None)
    else:
        prefixes: list[tuple[int, ...]] = []
        raw = _explore(d, cutoff, walk_class, start, 0, split_depth, prefixes)
        tasks = [(d, cutoff, walk_class.value, p) for p in prefixes]
        chunk = max(1, len(tasks) // (threads * 8))
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for part in pool.map(_subtree_counts, tasks, chunksize=chunk):
                for code, row in part.items():
                    acc = raw.get(code)
                    if acc is None:
                        raw[code] = row
                    else:
                        for i, c in enumerate(row):
                            acc[i] += c

    counts: dict[Site, np.ndarray] = {}
    for code in sorted(raw):
        arr = np.array(raw[code], dtype=np.int64)
        arr.flags.writeable = False
        counts[_decode(code, d, cutoff)] = arr
    counts = dict(sorted(counts.items()))
    return CountTable(d=d, cutoff=cutoff, walk_class=walk_class, counts=counts)


def length_weights(cutoff: int, beta: float) -> np.ndarray:
    """Vector e^{-beta N} for N = 0..cutoff."""
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    return np.exp(-beta * np.arange(cutoff + 1, dtype=np.float64))


def total_counts(table: CountTable) -> tuple[np.ndarray, np.ndarray]:
    """Totals c_N over all endpoints, plus the growth sequence c_N^(1/N).

    Only meaningful for the ALL class; the second array covers N >= 1.
    """
    if table.walk_class is not WalkClass.ALL:
        raise ValueError("total_counts requires an ALL-class table")
    totals = np.zeros(table.cutoff + 1, dtype=np.int64)
    for site in table.endpoints():
        totals += table.counts[site]
    ns = np.arange(1, table.cutoff + 1, dtype=np.float64)
    growth = totals[1:].astype(np.float64) ** (1.0 / ns) if table.cutoff else np.zeros(0)
    return totals, growth


def evaluate_weight(table: CountTable, beta: float, x: Site) -> float:
    """Truncated two-point weight sum_N counts(x)[N] e^{-beta N}."""
    w = length_weights(table.cutoff, beta)
    row = table.counts.get(tuple(x))
    if row is None:
        return 0.0
    return float(row.astype(np.float64) @ w)


def bubble_diagram(table: CountTable, beta: float) -> float:
    """Truncated bubble sum: sum over endpoints of the squared weight."""
    if table.walk_class is not WalkClass.ALL:
        raise ValueError("bubble_diagram requires an ALL-class table")
    w = length_weights(table.cutoff, beta)
    total = 0.0
    for site in table.endpoints():
        g = float(table.counts[site].astype(np.float64) @ w)
        total += g * g
    return total


def mass_estimate(
    table: CountTable, beta: float, n_max: int
) -> tuple[np.ndarray, float]:
    """Finite-n decay-rate sequence -log w(n, 0̃)/n and its last value."""
    if table.walk_class is not WalkClass.ALL:
        raise ValueError("mass_estimate requires an ALL-class table")
    if n_max < 1:
        raise ValueError(f"n_max must be >= 1, got {n_max}")
    seq = np.zeros(n_max, dtype=np.float64)
    for n in range(1, n_max + 1):
        x = (n,) + (0,) * (table.d - 1)
        w = evaluate_weight(table, beta, x)
        if w <= 0.0:
            raise ZeroWeightError(
                f"zero truncated weight at axis distance {n}; increase the cutoff"
            )
        seq[n - 1] = -math.log(w) / n
    return seq, float(seq[-1])


@dataclass(frozen=True)
class BridgeAnatomy:
    """Bridge verdict for a walk, with its break points and the last visit
    to each break level (the regeneration sites)."""

    is_bridge: bool
    break_points: tuple[int, ...]
    regeneration_sites: tuple[Site, ...]


def classify_bridge(path: Sequence[Site]) -> BridgeAnatomy:
    """Classify a walk as a bridge and locate its regeneration structure.

    Level k strictly between the endpoint levels is a break point iff the
    walk never steps down across the k/k+1 boundary; the regeneration site
    for k is the walk's last visit to level k.
    """
    require_walk(path)
    levels = [s[0] for s in path]
    first, last = levels[0], levels[-1]
    if any(not first < lvl <= last for lvl in levels[1:]):
        return BridgeAnatomy(False, (), ())
    crossed_down: set[int] = set()
    last_at: dict[int, int] = {}
    for i, lvl in enumerate(levels):
        last_at[lvl] = i
        if i and lvl < levels[i - 1]:
            crossed_down.add(lvl)
    breaks = tuple(k for k in range(first + 1, last) if k not in crossed_down)
    sites = tuple(path[last_at[k]] for k in breaks)
    return BridgeAnatomy(True, breaks, sites)


def bridge_skeleton(path: Sequence[Site]) -> tuple[FrameSplit, ...]:
    """Increment sequence between consecutive regeneration sites of a bridge.

    Includes the legs from the start to the first regeneration site and
    from the last one to the endpoint; a single-site walk has an empty
    skeleton.
    """
    anatomy = classify_bridge(path)
    if not anatomy.is_bridge:
        raise ValueError("skeleton is defined only for bridges")
    if len(path) == 1:
        return ()
    marks = (path[0],) + anatomy.regeneration_sites + (path[-1],)
    return tuple(
        FrameSplit(b[0] - a[0], tuple(q - p for p, q in zip(a[1:], b[1:])))
        for a, b in zip(marks, marks[1:])
    )


def iter_bridges_to_axis_point(
    d: int, n: int, max_steps: int
) -> Iterator[tuple[Site, ...]]:
    """Yield every bridge from the origin to (n, 0̃) with <= max_steps steps.

    The search stays inside the slab 1 <= x_1 <= n (any bridge to the
    target does) and prunes branches whose lattice distance to the target
    exceeds the remaining step budget, so it is practical for small n
    even at generous step cutoffs.
    """
    check_dimension(d)
    if n < 1:
        raise ValueError(f"axis distance must be >= 1, got {n}")
    target = (n,) + (0,) * (d - 1)
    steps = unit_steps(d)
    path: list[Site] = [origin(d)]
    visited = {path[0]}

    def rec() -> Iterator[tuple[Site, ...]]:
        cur = path[-1]
        if cur == target:
            # No bridge revisits its endpoint, so recursion stops here.
            yield tuple(path)
            return
        remaining = max_steps - (len(path) - 1)
        if remaining == 0:
            return
        for st in steps:
            nxt = site_add(cur, st)
            x0 = nxt[0]
            if x0 < 1 or x0 > n or nxt in visited:
                continue
            # Lattice parity forces completions of length dist + 2j, so a
            # completion within budget exists iff dist <= remaining - 1.
            dist = (n - x0) + sum(abs(c) for c in nxt[1:])
            if dist > remaining - 1:
                continue
            visited.add(nxt)
            path.append(nxt)
            yield from rec()
            path.pop()
            visited.remove(nxt)

    yield from rec()


def exact_conditioned_skeleton_law(
    d: int, n: int, beta: float, cutoff: int
) -> dict[tuple[FrameSplit, ...], float]:
    """Skeleton law of the length-weighted bridge ensemble pinned at (n, 0̃).

    Enumerates every bridge to (n, 0̃) with at most `cutoff` steps, weights
    it by e^{-beta * steps}, aggregates the weight by regeneration skeleton
    and normalizes.  This is the exhaustive reference law the renewal
    sampler is tested against.
    """
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    weights: dict[tuple[FrameSplit, ...], float] = {}
    for path in iter_bridges_to_axis_point(d, n, cutoff):
        sk = bridge_skeleton(path)
        weights[sk] = weights.get(sk, 0.0) + math.exp(-beta * (len(path) - 1))
    if not weights:
        raise NoBridgesError(
            f"no bridge reaches ({n}, 0) within {cutoff} steps; need cutoff >= {n}"
        )
    total = math.fsum(weights.values())
    return {sk: weights[sk] / total for sk in sorted(weights)}


# ---------------------------------------------------------------------------
# Serialization: versioned binary cache plus CSV rows.

_MAGIC = b"SAWCOUNT"
_FORMAT_VERSION = 1
_CLASS_CODES = {WalkClass.ALL: 0, WalkClass.BRIDGE: 1, WalkClass.IRREDUCIBLE_BRIDGE: 2}
_CODE_CLASSES = {v: k for k, v in _CLASS_CODES.items()}


def save_count_table(table: CountTable, path: str | Path, config: dict | None = None) -> None:
    """Write a table to a binary cache with an integrity digest.

    Layout: magic, version, d, cutoff, class code, a canonical-JSON config
    blob, the endpoint count, then endpoint-sorted (coords, count row)
    records, followed by a SHA-256 digest of everything before it.
    """
    meta = json.dumps(config or {}, sort_keys=True, separators=(",", ":")).encode()
    parts = [
        _MAGIC,
        struct.pack(
            "<IIIB",
            _FORMAT_VERSION,
            table.d,
            table.cutoff,
            _CLASS_CODES[table.walk_class],
        ),
        struct.pack("<I", len(meta)),
        meta,
        struct.pack("<Q", len(table.counts)),
    ]
    for site in table.endpoints():
        parts.append(struct.pack(f"<{table.d}i", *site))
        parts.append(table.counts[site].astype("<i8").tobytes())
    body = b"".join(parts)
    Path(path).write_bytes(body + hashlib.sha256(body).digest())


def load_count_table(path: str | Path) -> CountTable:
    """Read a binary count cache, verifying magic, version, and digest."""
    blob = Path(path).read_bytes()
    if len(blob) < len(_MAGIC) + 13 + 4 + 8 + 32:
        raise CacheFormatError(f"{path}: truncated count cache")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise CacheFormatError(f"{path}: integrity digest mismatch")
    if body[: len(_MAGIC)] != _MAGIC:
        raise CacheFormatError(f"{path}: bad magic")
    off = len(_MAGIC)
    version, d, cutoff, class_code = struct.unpack_from("<IIIB", body, off)
    off += 13
    if version != _FORMAT_VERSION:
        raise CacheFormatError(f"{path}: unsupported version {version}")
    if class_code not in _CODE_CLASSES:
        raise CacheFormatError(f"{path}: unknown class code {class_code}")
    (meta_len,) = struct.unpack_from("<I", body, off)
    off += 4 + meta_len  # config blob is advisory; counts are authoritative
    (n_endpoints,) = struct.unpack_from("<Q", body, off)
    off += 8
    counts: dict[Site, np.ndarray] = {}
    row_bytes = 8 * (cutoff + 1)
    for _ in range(n_endpoints):
        site = struct.unpack_from(f"<{d}i", body, off)
        off += 4 * d
        arr = np.frombuffer(body, dtype="<i8", count=cutoff + 1, offset=off).astype(
            np.int64
        )
        arr.flags.writeable = False
        off += row_bytes
        counts[site] = arr
    if off != len(body):
        raise CacheFormatError(f"{path}: trailing bytes in count cache")
    return CountTable(
        d=d, cutoff=cutoff, walk_class=_CODE_CLASSES[class_code], counts=counts
    )


def cache_config(path: str | Path) -> dict:
    """Return the config blob embedded in a count cache."""
    blob = Path(path).read_bytes()
    off = len(_MAGIC) + 13
    (meta_len,) = struct.unpack_from("<I", blob, off)
    return json.loads(blob[off + 4 : off + 4 + meta_len].decode())


def count_table_csv_rows(table: CountTable) -> tuple[list[str], list[list]]:
    """Header and rows (x1..xd, N, count) for the nonzero table entries."""
    header = [f"x{i + 1}" for i in range(table.d)] + ["N", "count"]
    rows: list[list] = []
    for site in table.endpoints():
        row = table.counts[site]
        for n in np.flatnonzero(row):
            rows.append([*site, int(n), int(row[n])])
    return header, rows
