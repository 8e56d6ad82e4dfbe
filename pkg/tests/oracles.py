"""Independent reference implementations used to validate the package.

Everything here is written for clarity, not speed: plain tuples, linear
scans, dictionary recursions.  None of it shares code with the package
modules; agreement between the two is the point of the tests.
"""

from __future__ import annotations

import math
from typing import Iterator, Sequence

Site = tuple[int, ...]
Path = tuple[Site, ...]


def _neighbours(site: Site) -> list[Site]:
    out = []
    for axis in range(len(site)):
        for sign in (1, -1):
            s = list(site)
            s[axis] += sign
            out.append(tuple(s))
    return out


def iter_saws(d: int, max_steps: int) -> Iterator[Path]:
    """Yield every self-avoiding walk from the origin with <= max_steps steps.

    Membership is checked by linear scan over the path prefix.
    """

    def rec(path: list[Site]) -> Iterator[Path]:
        yield tuple(path)
        if len(path) - 1 == max_steps:
            return
        for nxt in _neighbours(path[-1]):
            if nxt not in path:
                path.append(nxt)
                yield from rec(path)
                path.pop()

    yield from rec([(0,) * d])


def naive_is_bridge(path: Sequence[Site]) -> bool:
    """Direct transcription of the bridge condition on axis 0."""
    first = path[0][0]
    last = path[-1][0]
    return all(first < s[0] <= last for s in path[1:])


def naive_break_points(path: Sequence[Site]) -> list[int]:
    """Break points of a bridge, by the raw two-sided definition.

    Level k (strictly between the endpoint levels) is a break point iff
    some split index r has the whole prefix at level <= k and the whole
    suffix strictly above.
    """
    levels = [s[0] for s in path]
    first, last = levels[0], levels[-1]
    out = []
    for k in range(first + 1, last):
        for r in range(len(path)):
            if all(l <= k for l in levels[: r + 1]) and all(l > k for l in levels[r + 1 :]):
                out.append(k)
                break
    return out


def naive_counts(d: int, max_steps: int, kind: str) -> dict[Site, list[int]]:
    """Exact counts by endpoint and step number, by brute enumeration.

    kind is one of "all", "bridge", "irreducible".
    """
    counts: dict[Site, list[int]] = {}
    for path in iter_saws(d, max_steps):
        if kind in ("bridge", "irreducible"):
            if not naive_is_bridge(path):
                continue
            if kind == "irreducible" and naive_break_points(path):
                continue
        end = path[-1]
        row = counts.setdefault(end, [0] * (max_steps + 1))
        row[len(path) - 1] += 1
    return counts


def naive_totals(d: int, max_steps: int) -> list[int]:
    counts = naive_counts(d, max_steps, "all")
    totals = [0] * (max_steps + 1)
    for row in counts.values():
        for n, c in enumerate(row):
            totals[n] += c
    return totals


def naive_two_point(counts: dict[Site, list[int]], beta: float, x: Site) -> float:
    row = counts.get(x)
    if row is None:
        return 0.0
    return sum(c * math.exp(-beta * n) for n, c in enumerate(row))


def naive_bridges_to(d: int, n: int, max_steps: int) -> list[Path]:
    """All bridges from the origin to (n, 0, ..., 0) with <= max_steps steps."""
    target = (n,) + (0,) * (d - 1)
    return [
        p
        for p in iter_saws(d, max_steps)
        if p[-1] == target and len(p) > 1 and naive_is_bridge(p)
    ]


def naive_skeleton(path: Sequence[Site]) -> tuple[Site, ...]:
    """Increment sequence between consecutive regeneration points of a bridge.

    The regeneration point for break level b is the last visit to level b.
    """
    breaks = naive_break_points(path)
    marks = [path[0]]
    levels = [s[0] for s in path]
    for b in breaks:
        idx = max(i for i, l in enumerate(levels) if l == b)
        marks.append(path[idx])
    marks.append(path[-1])
    return tuple(
        tuple(q - p for p, q in zip(a, b)) for a, b in zip(marks, marks[1:])
    )


def naive_skeleton_law(
    d: int, n: int, beta: float, max_steps: int
) -> dict[tuple[Site, ...], float]:
    """Skeleton distribution of the length-weighted bridge ensemble to (n, 0)."""
    weights: dict[tuple[Site, ...], float] = {}
    for path in naive_bridges_to(d, n, max_steps):
        sk = naive_skeleton(path)
        weights[sk] = weights.get(sk, 0.0) + math.exp(-beta * (len(path) - 1))
    total = sum(weights.values())
    return {sk: w / total for sk, w in weights.items()}


def composition_partition(
    steps: Sequence[tuple[int, tuple[int, ...], float]],
    n: int,
    radius: int,
) -> dict[tuple[int, tuple[int, ...]], float]:
    """Mass of step compositions reaching each (t, y) with |y|_inf <= radius.

    steps is a list of (t, y, p) triples.  Plain dictionary recursion over
    t, no array tricks, so it serves as an oracle for the slab dynamic
    program at moderate n.
    """
    table: dict[tuple[int, tuple[int, ...]], float] = {
        (0, (0,) * len(steps[0][1])): 1.0
    }
    for t in range(1, n + 1):
        # accumulate arrivals at epoch t from every earlier epoch
        for st, sy, sp in steps:
            src_t = t - st
            if src_t < 0:
                continue
            for (pt, py), mass in list(table.items()):
                if pt != src_t:
                    continue
                ny = tuple(a + b for a, b in zip(py, sy))
                if any(abs(c) > radius for c in ny):
                    continue
                key = (t, ny)
                table[key] = table.get(key, 0.0) + mass * sp
    return table


def normal_cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def brownian_bridge_covariance(times: Sequence[float], sigma2: float) -> list[list[float]]:
    """Covariance matrix sigma^2 * min(s,t) * (1 - max(s,t)) on a time grid."""
    return [
        [sigma2 * min(s, t) * (1.0 - max(s, t)) for t in times] for s in times
    ]


def walk_strategy(d: int, max_steps: int = 12):
    """Hypothesis strategy for self-avoiding walks built from step indices,
    truncated at the first collision."""
    from hypothesis import strategies as st

    def build(indices: list[int]) -> Path:
        path = [(0,) * d]
        seen = {path[0]}
        for i in indices:
            nxt = _neighbours(path[-1])[i]
            if nxt in seen:
                break
            seen.add(nxt)
            path.append(nxt)
        return tuple(path)

    return st.lists(st.integers(0, 2 * d - 1), min_size=0, max_size=max_steps).map(
        build
    )


def renewal_conditioned_law(
    steps: Sequence[tuple[int, tuple[int, ...], float]],
    n: int,
    min_prob: float = 0.0,
) -> dict[tuple[tuple[int, tuple[int, ...]], ...], float]:
    """Exact law of a pinned renewal chain, by direct composition search.

    Enumerates step sequences whose spans sum to n and whose transverse
    parts cancel, and assigns each the normalized product of step masses.
    The normalizer comes from composition_partition, which never prunes.
    min_prob > 0 keeps only sequences at or above that final probability;
    the pruning is exact because step masses never exceed one, so a
    partial product already below the floor cannot recover.
    """
    if not steps:
        raise ValueError("empty step list")
    if any(p > 1.0 for _, _, p in steps):
        raise ValueError("step masses above one break the pruning bound")
    dim = len(steps[0][1])
    reach = max(max((abs(c) for c in y), default=0) for _, y, _ in steps)
    total = composition_partition(steps, n, max(n * reach, 1)).get(
        (n, (0,) * dim), 0.0
    )
    if total <= 0.0:
        return {}
    floor = min_prob * total
    law: dict[tuple[tuple[int, tuple[int, ...]], ...], float] = {}
    ordered = sorted(steps)

    def descend(t_used: int, y: tuple[int, ...], prefix, product: float) -> None:
        if t_used == n:
            p = product / total
            if all(c == 0 for c in y) and p >= min_prob:
                law[tuple(prefix)] = p
            return
        for t, dy, q in ordered:
            if t_used + t > n:
                continue
            extended = product * q
            if extended < floor:
                continue
            prefix.append((t, dy))
            descend(t_used + t, tuple(a + b for a, b in zip(y, dy)), prefix, extended)
            prefix.pop()

    descend(0, (0,) * dim, [], 1.0)
    return law


def convolve_counts(a: Sequence[int], b: Sequence[int], width: int) -> list[int]:
    """Length-truncated integer convolution of two count rows."""
    out = [0] * width
    for i, left in enumerate(a):
        if not left or i >= width:
            continue
        for j, right in enumerate(b[: width - i]):
            if right:
                out[i + j] += left * right
    return out


def oz_residual(
    bridge: dict[Site, Sequence[int]],
    irr: dict[Site, Sequence[int]],
    width: int,
) -> int:
    """Max abs deviation of the first-break-point renewal identity.

    For every bridge endpoint v with v_1 >= 1, the per-length bridge
    counts must equal the sum over irreducible first legs u of the
    convolution of the irreducible counts at u with the bridge counts at
    v - u.  Exact integer arithmetic throughout.
    """
    worst = 0
    for v, lhs in bridge.items():
        if v[0] < 1:
            continue
        rhs = [0] * width
        for u, u_row in irr.items():
            if not 1 <= u[0] <= v[0]:
                continue
            tail = bridge.get(tuple(a - b for a, b in zip(v, u)))
            if tail is None:
                continue
            for k, value in enumerate(convolve_counts(u_row, tail, width)):
                rhs[k] += value
        worst = max(worst, max(abs(l - r) for l, r in zip(lhs, rhs)))
    return worst
