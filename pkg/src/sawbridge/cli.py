"""Command-line pipeline: enumerate, calibrate, sample, analyze, oracle.

Each subcommand reads the same configuration (a JSON file plus flag
overrides), performs one pipeline stage, and writes deterministic,
hash-stamped artifacts into the output directory:

* enumerate: count-table caches for every walk class, plus a totals CSV;
* calibrate: the tilted step law as a hashed JSON report;
* sample:    per-span skeleton ensembles and scaled-process grids (CSV);
* analyze:   covariance fit, marginal tests, gap fractions, shrinking;
* oracle:    exact-law comparisons at a small span, with a hard gate.

Exit codes: 0 on success, 2 on validation problems (bad flags, missing
inputs), 3 when a measured quantity violates its acceptance bound.

Embedded provenance deliberately omits the execution-only knobs (thread
count, output directory): results are bit-identical across those, and
the stamped files must be too.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import counting, renewal, sampler, stats
from .config import (
    ConfigError,
    ExperimentConfig,
    load_config_file,
    resolve_config,
)
from .counting import WalkClass
from .lattice import FrameSplit
from .reporting import (
    read_csv_report,
    read_json_report,
    write_csv_report,
    write_json_report,
)
from .sampler import LeakageError, Skeleton

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_THRESHOLD = 3

ORACLE_MAX_SPAN = 6
ORACLE_TOLERANCE = 1e-12
# exhaustive shrinking runs at fixed small spans with matched headroom
SHRINK_SPANS = ((4, 10), (6, 12))


class ThresholdError(RuntimeError):
    """A measured quantity violated its acceptance bound."""


def provenance(config: ExperimentConfig, *fields: str, **extra) -> dict:
    """Stamp for an output file: the config fields its content depends on.

    Execution knobs (threads, out) and fields that cannot change the file
    stay out, so reruns of equivalent campaigns are byte-identical.
    """
    payload = config.to_dict()
    stamp = {name: payload[name] for name in fields}
    stamp.update(extra)
    return stamp


def cache_path(config: ExperimentConfig, walk_class: WalkClass) -> Path:
    return Path(config.out) / (
        f"counts_d{config.d}_L{config.cutoff}_{walk_class.value}.bin"
    )


def law_path(config: ExperimentConfig) -> Path:
    return Path(config.out) / f"step_law_d{config.d}_L{config.cutoff}.json"


def skeleton_path(config: ExperimentConfig, n: int) -> Path:
    return Path(config.out) / f"skeletons_n{n}.csv"


def process_path(config: ExperimentConfig, n: int) -> Path:
    return Path(config.out) / f"process_n{n}.csv"


def cmd_enumerate(config: ExperimentConfig) -> None:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    tables = {}
    for walk_class in WalkClass:
        table = counting.enumerate_counts(
            config.d, config.cutoff, walk_class, threads=config.threads
        )
        counting.save_count_table(
            table,
            cache_path(config, walk_class),
            config=provenance(config, "d", "cutoff"),
        )
        tables[walk_class] = table
    totals, growth = counting.total_counts(tables[WalkClass.ALL])
    rows = [[0, int(totals[0]), ""]]
    rows += [
        [length, int(totals[length]), float(growth[length - 1])]
        for length in range(1, len(totals))
    ]
    write_csv_report(
        out / f"totals_d{config.d}_L{config.cutoff}.csv",
        ["N", "count", "growth"],
        rows,
        provenance(config, "d", "cutoff"),
    )


def cmd_calibrate(config: ExperimentConfig) -> None:
    path = cache_path(config, WalkClass.IRREDUCIBLE_BRIDGE)
    if not path.exists():
        raise ConfigError(f"missing count cache {path}; run enumerate first")
    irr_table = counting.load_count_table(path)
    m_hat = renewal.calibrate_mass(irr_table, config.beta)
    law = renewal.build_step_law(irr_table, config.beta, m_hat)
    payload = {
        "m_hat": m_hat,
        "tail_mass": renewal.truncation_tail_mass(irr_table, config.beta, m_hat),
        "total_mass": law.total_mass(),
        "digest": renewal.step_law_digest(law),
        "law": json.loads(renewal.step_law_to_json(law)),
    }
    Path(config.out).mkdir(parents=True, exist_ok=True)
    write_json_report(
        law_path(config), payload, provenance(config, "d", "cutoff", "beta")
    )


def load_law(config: ExperimentConfig) -> tuple[renewal.StepLaw, str]:
    path = law_path(config)
    if not path.exists():
        raise ConfigError(f"missing step law {path}; run calibrate first")
    report = read_json_report(path)
    law = renewal.step_law_from_json(json.dumps(report["law"]))
    return law, report["digest"]


def skeleton_rows(skeletons: list[Skeleton], d: int):
    for replicate, skeleton in enumerate(skeletons):
        k = len(skeleton.increments)
        for index, step in enumerate(skeleton.increments):
            yield [replicate, k, index, step.t, *step.y]


def cmd_sample(config: ExperimentConfig) -> None:
    law, digest = load_law(config)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    for n in config.spans:
        table = sampler.dp_partition(law, n, config.box_radius)
        sampler.require_leakage(table)
        skeletons = sampler.sample_skeletons(
            law,
            table,
            seed=config.seed,
            replicates=range(config.replicas),
            threads=config.threads,
        )
        stamp = provenance(
            config,
            "d", "cutoff", "beta", "replicas", "seed", "grid", "box_radius",
            n=n,
            law_digest=digest,
            leakage=table.leakage,
        )
        y_names = [f"y{j + 1}" for j in range(config.d - 1)]
        write_csv_report(
            skeleton_path(config, n),
            ["replicate", "k", "step_index", "t", *y_names],
            skeleton_rows(skeletons, config.d),
            stamp,
        )
        grid = np.array(config.grid)
        process_lines = []
        for replicate, skeleton in enumerate(skeletons):
            values = sampler.evaluate_process_grid(
                sampler.scale_skeleton(skeleton), grid
            )
            for t, row in zip(config.grid, values):
                process_lines.append([replicate, t, *(float(v) for v in row)])
        value_names = [f"Y{j + 1}" for j in range(config.d - 1)]
        write_csv_report(
            process_path(config, n),
            ["replicate", "t", *value_names],
            process_lines,
            stamp,
        )


def read_skeletons(path: Path) -> tuple[dict, list[Skeleton]]:
    if not path.exists():
        raise ConfigError(f"missing ensemble {path}; run sample first")
    stamp, header, rows = read_csv_report(path)
    transverse = len(header) - 4
    by_replicate: dict[int, list[tuple[int, FrameSplit]]] = {}
    for row in rows:
        replicate, _, index, t = (int(row[0]), int(row[1]), int(row[2]), int(row[3]))
        y = tuple(int(c) for c in row[4 : 4 + transverse])
        by_replicate.setdefault(replicate, []).append((index, FrameSplit(t, y)))
    n = int(stamp["n"])
    skeletons = []
    for replicate in sorted(by_replicate):
        steps = tuple(s for _, s in sorted(by_replicate[replicate]))
        skeleton = Skeleton(increments=steps, n=n)
        sampler.require_skeleton(skeleton)
        skeletons.append(skeleton)
    return stamp, skeletons


def exhaustive_shrinking(beta: float) -> list[dict]:
    rows = []
    for n, cutoff in SHRINK_SPANS:
        walks = sampler.ExhaustiveWalkSampler(2, n, beta, cutoff)
        weights = np.exp(-beta * np.array([len(p) - 1 for p in walks.paths]))
        weights /= weights.sum()
        values = []
        for path in walks.paths:
            skeleton = Skeleton(increments=counting.bridge_skeleton(path), n=n)
            values.append(stats.shrinking_statistic(path, skeleton, n))
        rows.append(
            {
                "n": n,
                "mean": float(weights @ np.array(values)),
                "max": float(max(values)),
            }
        )
    return rows


def cmd_analyze(config: ExperimentConfig) -> None:
    ensembles: dict[int, list[Skeleton]] = {}
    digest = ""
    for n in config.spans:
        stamp, skeletons = read_skeletons(skeleton_path(config, n))
        digest = stamp.get("law_digest", "")
        ensembles[n] = skeletons
    grid = np.array(config.grid)
    fit_span = max(config.spans)
    ensemble = stats.build_ensemble(
        ensembles[fit_span], grid, seed=config.seed, law_digest=digest
    )
    fit = stats.fit_bridge_covariance(stats.empirical_covariance(ensemble), grid)
    ks_rows = []
    for t in config.grid:
        statistic, p = stats.ks_marginal(
            ensemble, float(t), fit.sigma2_hat, lattice_resolution=1.0
        )
        ks_rows.append({"t": float(t), "stat": statistic, "p": p})
    gap_rows = [
        {"n": n, "fraction": stats.gap_statistic(ensembles[n], n)}
        for n in sorted(config.spans)
    ]
    fractions = [row["fraction"] for row in gap_rows]
    shrink_rows = exhaustive_shrinking(config.beta) if config.d == 2 else []
    payload = {
        "n_fit": fit_span,
        "sigma2_hat": fit.sigma2_hat,
        "rel_rms": fit.rel_rms,
        "ks": ks_rows,
        "gap": gap_rows,
        "gap_monotone": all(b <= a for a, b in zip(fractions, fractions[1:])),
        "shrink": shrink_rows,
    }
    out = Path(config.out)
    stamp = provenance(
        config,
        "d", "cutoff", "beta", "spans", "replicas", "seed", "grid", "box_radius",
        law_digest=digest,
    )
    write_json_report(out / "report.json", payload, stamp)
    write_csv_report(
        out / "fit.csv",
        ["n", "sigma2_hat", "rel_rms"],
        [[fit_span, fit.sigma2_hat, fit.rel_rms]],
        stamp,
    )
    write_csv_report(
        out / "ks.csv",
        ["t", "stat", "p"],
        [[row["t"], row["stat"], row["p"]] for row in ks_rows],
        stamp,
    )
    write_csv_report(
        out / "gap.csv",
        ["n", "fraction"],
        [[row["n"], row["fraction"]] for row in gap_rows],
        stamp,
    )
    write_csv_report(
        out / "shrink.csv",
        ["n", "mean", "max"],
        [[row["n"], row["mean"], row["max"]] for row in shrink_rows],
        stamp,
    )


def encode_skeleton(increments: tuple[FrameSplit, ...]) -> str:
    return " ".join(":".join(str(c) for c in (s.t, *s.y)) for s in increments)


def cmd_oracle(config: ExperimentConfig) -> None:
    n = min(config.spans)
    if n > ORACLE_MAX_SPAN:
        raise ConfigError(
            f"oracle span must be at most {ORACLE_MAX_SPAN}, got {n}"
        )
    cache = cache_path(config, WalkClass.IRREDUCIBLE_BRIDGE)
    if cache.exists():
        irr_table = counting.load_count_table(cache)
    else:
        irr_table = counting.enumerate_counts(
            config.d, config.cutoff, WalkClass.IRREDUCIBLE_BRIDGE,
            threads=config.threads,
        )
    exact = counting.exact_conditioned_skeleton_law(
        config.d, n, config.beta, config.cutoff
    )
    product = renewal.product_skeleton_law(irr_table, config.beta, n)
    keys = sorted(set(exact) | set(product))
    max_abs = max(
        abs(exact.get(key, 0.0) - product.get(key, 0.0)) for key in keys
    )
    m_hat = renewal.calibrate_mass(irr_table, config.beta)
    law = renewal.build_step_law(irr_table, config.beta, m_hat)
    table = sampler.dp_partition(law, n, config.box_radius)
    sampler.require_leakage(table)
    skeletons = sampler.sample_skeletons(
        law,
        table,
        seed=config.seed,
        replicates=range(config.replicas),
        threads=config.threads,
    )
    frequencies: dict[tuple[FrameSplit, ...], int] = {}
    for skeleton in skeletons:
        frequencies[skeleton.increments] = (
            frequencies.get(skeleton.increments, 0) + 1
        )
    tv = 0.5 * sum(
        abs(frequencies.get(key, 0) / config.replicas - exact.get(key, 0.0))
        for key in set(exact) | set(frequencies)
    )
    payload = {
        "n": n,
        "support": len(exact),
        "max_abs_difference": max_abs,
        "tolerance": ORACLE_TOLERANCE,
        "tv_sampler_vs_exact": tv,
        "exact_mass": math.fsum(exact.values()),
        "product_mass": math.fsum(product.values()),
    }
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    stamp = provenance(
        config, "d", "cutoff", "beta", "replicas", "seed", "box_radius", n=n
    )
    write_json_report(out / f"oracle_n{n}.json", payload, stamp)
    write_csv_report(
        out / f"oracle_law_n{n}.csv",
        ["skeleton", "exact", "product", "abs_diff"],
        [
            [
                encode_skeleton(key),
                exact.get(key, 0.0),
                product.get(key, 0.0),
                abs(exact.get(key, 0.0) - product.get(key, 0.0)),
            ]
            for key in keys
        ],
        stamp,
    )
    if max_abs > ORACLE_TOLERANCE:
        raise ThresholdError(
            f"skeleton law mismatch {max_abs:.3e} exceeds {ORACLE_TOLERANCE:.1e}"
        )


COMMANDS = {
    "enumerate": cmd_enumerate,
    "calibrate": cmd_calibrate,
    "sample": cmd_sample,
    "analyze": cmd_analyze,
    "oracle": cmd_oracle,
}


def parse_int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part]


def parse_float_list(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sawbridge",
        description="pinned self-avoiding bridge pipeline",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, handler in COMMANDS.items():
        sub = subparsers.add_parser(name, help=handler.__doc__)
        sub.add_argument("--config", help="JSON config file")
        sub.add_argument("--d", type=int, help="lattice dimension")
        sub.add_argument("--beta", type=float, help="inverse temperature")
        sub.add_argument(
            "--L", type=int, dest="cutoff", help="enumeration step cutoff"
        )
        sub.add_argument(
            "--n",
            type=parse_int_list,
            dest="spans",
            help="comma-separated pinning spans",
        )
        sub.add_argument("--replicas", type=int, help="replicates per span")
        sub.add_argument("--seed", type=int, help="campaign seed")
        sub.add_argument(
            "--grid", type=parse_float_list, help="comma-separated grid times"
        )
        sub.add_argument("--threads", type=int, help="worker process count")
        sub.add_argument("--out", help="output directory")
        sub.add_argument(
            "--box-radius", type=int, dest="box_radius", help="transverse box"
        )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        key: getattr(args, key)
        for key in (
            "d", "beta", "cutoff", "spans", "replicas", "seed",
            "grid", "threads", "out", "box_radius",
        )
    }
    if overrides["spans"] is not None:
        overrides["spans"] = tuple(overrides["spans"])
    if overrides["grid"] is not None:
        overrides["grid"] = tuple(overrides["grid"])
    try:
        file_payload = load_config_file(args.config) if args.config else None
        config = resolve_config(file_payload, overrides)
        COMMANDS[args.command](config)
    except (LeakageError, ThresholdError) as err:
        print(f"threshold violation: {err}", file=sys.stderr)
        return EXIT_THRESHOLD
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
