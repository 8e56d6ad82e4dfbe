"""Exact sampling of renewal skeletons pinned at (n, 0̃), and their scaling.

The step law lives on displacements (t >= 1, y); conditioning on the
partial sums hitting (n, 0̃) is handled in two passes:

* a forward dynamic program over slabs t = 0..n computes the pinned
  partition function G(t, y) = total product mass of step sequences from
  (0, 0̃) to (t, y), truncated to a transverse box of radius R, with one
  floating mantissa slab plus a log-scale offset per t so nothing
  underflows at large n;
* backward sampling then draws the last increment x of a path ending at
  (t, y) with probability proportional to Q(x) G(t - x_t, y - x_y) and
  recurses, which reproduces the conditioned product law exactly
  (within the box truncation, whose leakage is measured against a wider
  box and reported).

Sampling is batched: replicate streams are independent, and every
per-replicate decision uses that replicate's own uniforms, so results
are bit-identical regardless of batch or thread partitioning.

Full walks (not just skeletons) can be drawn only by exhaustive
enumeration at small n; that sampler lives here too.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .counting import NoBridgesError, iter_bridges_to_axis_point
from .lattice import FrameSplit, Site
from .renewal import StepLaw
from .rng import replicate_generator, uniform_block

MAX_LEAKAGE = 1e-6


class BoxTooSmallError(ValueError):
    """The transverse box cannot contain a single step of the law."""


class UnreachableStateError(RuntimeError):
    """Backward sampling reached a state with no in-box predecessor."""


class LeakageError(RuntimeError):
    """Box truncation leaks more probability than the configured bound."""


@dataclass(frozen=True)
class Skeleton:
    """A sequence of renewal increments with longitudinal total n."""

    increments: tuple[FrameSplit, ...]
    n: int


def require_skeleton(skeleton: Skeleton) -> None:
    if not skeleton.increments:
        raise ValueError("skeleton has no increments")
    if any(s.t < 1 for s in skeleton.increments):
        raise ValueError("skeleton increments must advance along the axis")
    if sum(s.t for s in skeleton.increments) != skeleton.n:
        raise ValueError("skeleton increments do not sum to its span")


@dataclass(frozen=True)
class ScaledBridgeProcess:
    """Piecewise-linear interpolation of scaled skeleton partial sums.

    Knot i sits at time s_i/n with value s_i,transverse/sqrt(n); the first
    knot is (0, 0̃) and, for a pinned skeleton, the last is (1, 0̃).
    """

    times: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class PartitionTable:
    """Pinned partition function G over slabs, in mantissa/log-scale form.

    mantissa[t] holds the transverse profile of slab t scaled to unit
    maximum; log_scale[t] restores the true magnitude (-inf marks an
    empty slab).  leakage reports how much conditioned mass the box
    truncation lost, measured against a wider box.
    """

    d: int
    n: int
    radius: int
    mantissa: np.ndarray
    log_scale: np.ndarray
    leakage: float

    def value(self, t: int, y: Site) -> float:
        idx = tuple(c + self.radius for c in y)
        if any(not 0 <= i < 2 * self.radius + 1 for i in idx):
            return 0.0
        scale = self.log_scale[t]
        if scale == -np.inf:
            return 0.0
        return float(self.mantissa[t][idx] * math.exp(scale))


def law_arrays(law: StepLaw) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Canonical (t, y, p) arrays of a step law, sorted by (t, y)."""
    items = sorted(law.probs.items())
    t_arr = np.array([s.t for s, _ in items], dtype=np.int64)
    y_arr = np.array([s.y for s, _ in items], dtype=np.int64).reshape(
        len(items), law.d - 1
    )
    p_arr = np.array([p for _, p in items], dtype=np.float64)
    return t_arr, y_arr, p_arr


def transverse_step_variance(law: StepLaw) -> float:
    """Mean squared transverse displacement per step, per coordinate."""
    _, y_arr, p_arr = law_arrays(law)
    if y_arr.shape[1] == 0:
        return 0.0
    return float(np.sum(p_arr[:, None] * y_arr.astype(np.float64) ** 2) / y_arr.shape[1])


def default_box_radius(law: StepLaw, n: int) -> int:
    """Four Gaussian standard deviations of transverse spread, floored so a
    single step always fits."""
    reach = _max_reach(law)
    spread = math.ceil(4.0 * math.sqrt(n * transverse_step_variance(law)))
    return max(spread, reach, 1)


def _max_reach(law: StepLaw) -> int:
    return max((max((abs(c) for c in s.y), default=0) for s in law.probs), default=0)


def _shifted_add(dst: np.ndarray, src: np.ndarray, shift: np.ndarray, w: float) -> None:
    """dst[y] += w * src[y - shift], clipped to the common box."""
    dst_slices = []
    src_slices = []
    for o, size in zip(shift, dst.shape):
        o = int(o)
        lo_d, hi_d = max(0, o), size + min(0, o)
        if lo_d >= hi_d:
            return
        dst_slices.append(slice(lo_d, hi_d))
        src_slices.append(slice(lo_d - o, hi_d - o))
    dst[tuple(dst_slices)] += w * src[tuple(src_slices)]


def _forward_slabs(
    t_arr: np.ndarray,
    y_arr: np.ndarray,
    p_arr: np.ndarray,
    n: int,
    radius: int,
    d: int,
) -> tuple[np.ndarray, np.ndarray]:
    shape = (2 * radius + 1,) * (d - 1)
    mantissa = np.zeros((n + 1, *shape), dtype=np.float64)
    log_scale = np.full(n + 1, -np.inf)
    mantissa[0][(radius,) * (d - 1)] = 1.0
    log_scale[0] = 0.0

    by_jump: dict[int, list[int]] = {}
    for i, tj in enumerate(t_arr):
        by_jump.setdefault(int(tj), []).append(i)

    for t in range(1, n + 1):
        sources = [tj for tj in sorted(by_jump) if tj <= t and log_scale[t - tj] > -np.inf]
        if not sources:
            continue
        anchor = max(log_scale[t - tj] for tj in sources)
        acc = np.zeros(shape, dtype=np.float64)
        for tj in sources:
            rescale = math.exp(log_scale[t - tj] - anchor)
            src = mantissa[t - tj]
            for i in by_jump[tj]:
                _shifted_add(acc, src, y_arr[i], rescale * p_arr[i])
        peak = float(acc.max())
        if peak > 0.0:
            mantissa[t] = acc / peak
            log_scale[t] = anchor + math.log(peak)
    return mantissa, log_scale


def dp_partition(law: StepLaw, n: int, radius: int | None = None) -> PartitionTable:
    """Forward DP for the pinned partition function, with leakage measured
    against a half-again-wider box."""
    if n < 1:
        raise ValueError(f"span must be >= 1, got {n}")
    reach = _max_reach(law)
    if radius is None:
        radius = default_box_radius(law, n)
    if radius < reach:
        raise BoxTooSmallError(
            f"box radius {radius} cannot hold a step of transverse reach {reach}"
        )
    t_arr, y_arr, p_arr = law_arrays(law)
    mantissa, log_scale = _forward_slabs(t_arr, y_arr, p_arr, n, radius, law.d)

    wide = radius + max(2 * reach, (radius + 1) // 2)
    mant_w, logs_w = _forward_slabs(t_arr, y_arr, p_arr, n, wide, law.d)

    center = (radius,) * (law.d - 1)
    center_w = (wide,) * (law.d - 1)
    pinned = mantissa[n][center]
    pinned_w = mant_w[n][center_w]
    if pinned_w <= 0.0 or log_scale[n] == -np.inf:
        leakage = 0.0 if pinned <= 0.0 else 1.0
    else:
        ratio = (pinned / pinned_w) * math.exp(log_scale[n] - logs_w[n])
        leakage = max(0.0, 1.0 - ratio)
    return PartitionTable(
        d=law.d,
        n=n,
        radius=radius,
        mantissa=mantissa,
        log_scale=log_scale,
        leakage=leakage,
    )


def require_leakage(partition: PartitionTable, bound: float = MAX_LEAKAGE) -> None:
    if partition.leakage >= bound:
        raise LeakageError(
            f"box truncation leaks {partition.leakage:.3e} >= {bound:.1e}; "
            "increase the radius"
        )


def _sample_batch(
    law: StepLaw, partition: PartitionTable, seed: int, reps: list[int]
) -> list[Skeleton]:
    t_arr, y_arr, p_arr = law_arrays(law)
    n, radius = partition.n, partition.radius
    width = 2 * radius + 1
    n_steps = len(t_arr)
    n_reps = len(reps)

    flat = partition.mantissa.reshape(n + 1, -1)
    with np.errstate(divide="ignore"):
        log_g = np.log(flat) + partition.log_scale[:, None]
        log_p = np.log(p_arr)

    uniforms = uniform_block(seed, reps, n)
    cur_t = np.full(n_reps, n, dtype=np.int64)
    cur_y = np.zeros((n_reps, law.d - 1), dtype=np.int64)
    choices = np.zeros((n_reps, n), dtype=np.int32)
    rounds = np.zeros(n_reps, dtype=np.int64)

    active = np.arange(n_reps)
    j = 0
    while active.size:
        cand_t = cur_t[active, None] - t_arr[None, :]
        cand_y = cur_y[active, None, :] - y_arr[None, :, :]
        valid = (cand_t >= 0) & np.all(np.abs(cand_y) <= radius, axis=2)

        coords = np.clip(cand_y + radius, 0, width - 1)
        flat_idx = np.zeros(coords.shape[:2], dtype=np.int64)
        for axis in range(law.d - 1):
            flat_idx = flat_idx * width + coords[..., axis]
        weights_log = log_p[None, :] + log_g[np.clip(cand_t, 0, n), flat_idx]
        weights_log[~valid] = -np.inf

        row_max = weights_log.max(axis=1)
        if np.any(row_max == -np.inf):
            bad = reps[int(active[int(np.argmax(row_max == -np.inf))])]
            raise UnreachableStateError(
                f"replicate {bad}: no in-box predecessor; partition table "
                "inconsistent with the law"
            )
        weights = np.exp(weights_log - row_max[:, None])
        cumulative = np.cumsum(weights, axis=1)
        target = uniforms[active, j] * cumulative[:, -1]
        above = cumulative > target[:, None]
        picked = np.argmax(above, axis=1)
        picked[~above.any(axis=1)] = n_steps - 1

        choices[active, j] = picked
        rows = np.arange(active.size)
        cur_t[active] = cand_t[rows, picked]
        cur_y[active] = cand_y[rows, picked]
        rounds[active] = j + 1
        active = active[cur_t[active] > 0]
        j += 1

    steps = [
        FrameSplit(int(t), tuple(int(c) for c in y)) for t, y in zip(t_arr, y_arr)
    ]
    out = []
    for i in range(n_reps):
        drawn = [steps[k] for k in choices[i, : rounds[i]]]
        drawn.reverse()
        skeleton = Skeleton(increments=tuple(drawn), n=n)
        require_skeleton(skeleton)
        out.append(skeleton)
    return out


def _sample_task(args) -> list[Skeleton]:
    law, partition, seed, reps = args
    return _sample_batch(law, partition, seed, reps)


def sample_skeletons(
    law: StepLaw,
    partition: PartitionTable,
    seed: int,
    replicates: range | list[int],
    *,
    threads: int = 1,
    batch_size: int = 4096,
) -> list[Skeleton]:
    """Draw one pinned skeleton per replicate id, in replicate order.

    Per-replicate streams make the output independent of batch size and
    thread count.
    """
    if partition.value(partition.n, (0,) * (partition.d - 1)) <= 0.0:
        raise UnreachableStateError(
            f"pinned mass at ({partition.n}, 0̃) is zero; box or law misconfigured"
        )
    reps = list(replicates)
    batches = [reps[i : i + batch_size] for i in range(0, len(reps), batch_size)]
    if threads <= 1 or len(batches) <= 1:
        out: list[Skeleton] = []
        for batch in batches:
            out.extend(_sample_batch(law, partition, seed, batch))
        return out
    tasks = [(law, partition, seed, batch) for batch in batches]
    out = []
    with ProcessPoolExecutor(max_workers=threads) as pool:
        for part in pool.map(_sample_task, tasks):
            out.extend(part)
    return out


def sample_skeleton(
    law: StepLaw, partition: PartitionTable, seed: int, replicate: int
) -> Skeleton:
    return sample_skeletons(law, partition, seed, [replicate])[0]


def scale_skeleton(skeleton: Skeleton) -> ScaledBridgeProcess:
    """Diffusively rescale partial sums: time by n, transverse by sqrt(n)."""
    require_skeleton(skeleton)
    t_inc = np.array([s.t for s in skeleton.increments], dtype=np.int64)
    y_inc = np.array([s.y for s in skeleton.increments], dtype=np.int64).reshape(
        len(skeleton.increments), -1
    )
    if y_inc.sum(axis=0).any():
        raise ValueError("skeleton is not pinned to the axis endpoint")
    times = np.concatenate(([0], np.cumsum(t_inc))).astype(np.float64) / skeleton.n
    values = np.vstack(
        (np.zeros((1, y_inc.shape[1])), np.cumsum(y_inc, axis=0))
    ).astype(np.float64) / math.sqrt(skeleton.n)
    return ScaledBridgeProcess(times=times, values=values)


def evaluate_process(process: ScaledBridgeProcess, t: float) -> np.ndarray:
    """Linear interpolation of the process at a single scaled time."""
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"time {t} outside [0, 1]")
    return np.array(
        [
            np.interp(t, process.times, process.values[:, j])
            for j in range(process.values.shape[1])
        ]
    )


def evaluate_process_grid(process: ScaledBridgeProcess, grid: np.ndarray) -> np.ndarray:
    """Interpolate the process on a whole grid of times at once."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size and (grid.min() < 0.0 or grid.max() > 1.0):
        raise ValueError("grid times must lie in [0, 1]")
    return np.column_stack(
        [
            np.interp(grid, process.times, process.values[:, j])
            for j in range(process.values.shape[1])
        ]
    )


class ExhaustiveWalkSampler:
    """Exact full-walk sampler at small n, by total bridge enumeration.

    Holds every bridge to (n, 0̃) within the step cutoff and draws
    proportionally to e^{-beta * steps}.  Practical only where the bridge
    count is modest (n up to about 7 in the plane); build once, draw many.
    """

    _SPAN_CAP = {2: 7, 3: 5, 4: 4}

    def __init__(self, d: int, n: int, beta: float, cutoff: int):
        if beta <= 0:
            raise ValueError(f"beta must be positive, got {beta}")
        cap = self._SPAN_CAP.get(d)
        if cap is None or n > cap:
            raise ValueError(f"exhaustive sampling supports n <= {cap} at d={d}")
        self.d, self.n, self.beta, self.cutoff = d, n, beta, cutoff
        self.paths = list(iter_bridges_to_axis_point(d, n, cutoff))
        if not self.paths:
            raise NoBridgesError(
                f"no bridge reaches ({n}, 0) within {cutoff} steps"
            )
        weights = np.exp(-beta * np.array([len(p) - 1 for p in self.paths], float))
        self._cumulative = np.cumsum(weights)

    def length_distribution(self) -> dict[int, float]:
        """Exact law of the walk length, for verification."""
        weights: dict[int, float] = {}
        for p in self.paths:
            weights[len(p) - 1] = weights.get(len(p) - 1, 0.0) + math.exp(
                -self.beta * (len(p) - 1)
            )
        total = math.fsum(weights.values())
        return {length: w / total for length, w in sorted(weights.items())}

    def sample(self, seed: int, replicate: int) -> tuple[Site, ...]:
        u = float(replicate_generator(seed, replicate).random())
        target = u * self._cumulative[-1]
        idx = int(np.searchsorted(self._cumulative, target, side="right"))
        return self.paths[min(idx, len(self.paths) - 1)]


def sample_conditioned_walk_exhaustive(
    d: int, n: int, beta: float, cutoff: int, seed: int, replicate: int = 0
) -> tuple[Site, ...]:
    """One exact draw from the pinned bridge ensemble.

    Convenience wrapper; for many draws build one ExhaustiveWalkSampler
    and reuse it.
    """
    return ExhaustiveWalkSampler(d, n, beta, cutoff).sample(seed, replicate)
