"""Distance histograms, monthly volatility stats and run manifests.

The headline diagnostics as plain data artifacts: cross-label distance
distributions before/after filtering, per-year boxes of monthly open-price
standard deviations, and a manifest capturing enough of a run (config,
input digests, stage counts) to re-execute it exactly.
"""

import hashlib
import json
from dataclasses import dataclass, asdict
from datetime import datetime, timezone

import numpy as np

from .entropy_core import pairwise_l1
from .errors import EmptySeriesError, EmptySideError, MalformedLineError
from .market_data import BarSeries

MANIFEST_SCHEMA_VERSION = 1


@dataclass
class DistanceHistogram:
    bin_edges: np.ndarray
    counts: np.ndarray
    mean: float
    median: float
    sample_count: int
    population: str  # "raw" or "filtered"


@dataclass
class YearVolatility:
    year: int
    monthly_std: list
    q1: float
    median: float
    q3: float
    whisker_low: float
    whisker_high: float


def _features_of(patterns) -> np.ndarray:
    return np.array([p.features for p in patterns], dtype=np.float64)


def _histogram(distances: np.ndarray, bins: int, population: str) -> DistanceHistogram:
    counts, edges = np.histogram(distances, bins=bins)
    return DistanceHistogram(
        bin_edges=edges,
        counts=counts,
        mean=float(distances.mean()),
        median=float(np.median(distances)),
        sample_count=int(distances.size),
        population=population,
    )


def cross_distance_histogram(buys, sells, bins: int = 50, population: str = "raw") -> DistanceHistogram:
    """Histogram of all |B| x |S| cross-label L1 distances.

    Mean and median are computed on the full distance set, not estimated
    from the binned counts.
    """
    if not len(buys) or not len(sells):
        raise EmptySideError("both a Buy and a Sell side are required")
    d = pairwise_l1(_features_of(buys), _features_of(sells)).ravel()
    return _histogram(d, bins, population)


def all_pairs_histogram(patterns, bins: int = 50, population: str = "raw") -> DistanceHistogram:
    """Histogram over unordered distinct pairs of one pattern set."""
    if len(patterns) < 2:
        raise EmptySideError("need at least two patterns")
    D = pairwise_l1(_features_of(patterns))
    iu = np.triu_indices(len(D), k=1)
    return _histogram(D[iu], bins, population)


def histogram_shift_summary(raw: DistanceHistogram, filtered: DistanceHistogram) -> dict:
    """The filtered-minus-raw deltas of the two headline statistics."""
    return {
        "raw_mean": raw.mean,
        "raw_median": raw.median,
        "filtered_mean": filtered.mean,
        "filtered_median": filtered.median,
        "mean_delta": filtered.mean - raw.mean,
        "median_delta": filtered.median - raw.median,
        "raw_pairs": raw.sample_count,
        "filtered_pairs": filtered.sample_count,
    }


def monthly_volatility(series: BarSeries, ddof: int = 0) -> list:
    """Per-year box statistics over monthly standard deviations of opens.

    Population standard deviation by default (`ddof=0`); quartiles use
    linear interpolation and whiskers are the most extreme monthly values
    within 1.5 IQR of the box.
    """
    if len(series) == 0:
        raise EmptySeriesError("no bars")
    months = series.timestamps.astype("datetime64[M]")
    out = []
    month_values = {}
    for month in np.unique(months):
        mask = months == month
        month_values[month] = float(series.opens[mask].std(ddof=ddof))
    years = sorted({m.astype("datetime64[Y]").astype(int) + 1970 for m in month_values})
    for year in years:
        stds = [
            v for m, v in sorted(month_values.items())
            if m.astype("datetime64[Y]").astype(int) + 1970 == year
        ]
        arr = np.array(stds)
        q1, med, q3 = (float(np.percentile(arr, q)) for q in (25, 50, 75))
        iqr = q3 - q1
        lo_lim, hi_lim = q1 - 1.5 * iqr, q3 + 1.5 * iqr
        inside = arr[(arr >= lo_lim) & (arr <= hi_lim)]
        lo = float(inside.min()) if inside.size else q1
        hi = float(inside.max()) if inside.size else q3
        out.append(YearVolatility(int(year), stds, q1, med, q3, lo, hi))
    return out


def write_histogram_csv(hist: DistanceHistogram, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"# population={hist.population}\n")
        fh.write(f"# samples={hist.sample_count}\n")
        fh.write(f"# mean={hist.mean!r}\n")
        fh.write(f"# median={hist.median!r}\n")
        fh.write("bin_left,bin_right,count\n")
        edges = hist.bin_edges.tolist()
        for i, c in enumerate(hist.counts.tolist()):
            fh.write(f"{edges[i]!r},{edges[i + 1]!r},{c}\n")


def read_histogram_csv(path) -> DistanceHistogram:
    meta = {}
    lefts, rights, counts = [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line.lstrip("# ").partition("=")
                meta[key] = value
                continue
            if line == "bin_left,bin_right,count":
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise MalformedLineError(lineno, line, "expected 3 fields")
            lefts.append(float(parts[0]))
            rights.append(float(parts[1]))
            counts.append(int(parts[2]))
    return DistanceHistogram(
        bin_edges=np.array(lefts + rights[-1:]),
        counts=np.array(counts),
        mean=float(meta["mean"]),
        median=float(meta["median"]),
        sample_count=int(meta["samples"]),
        population=meta.get("population", "raw"),
    )


def write_volatility_csv(years, path) -> None:
    with open(path, "w") as fh:
        for y in years:
            fh.write(
                f"# year={y.year} q1={y.q1!r} median={y.median!r} q3={y.q3!r} "
                f"lo={y.whisker_low!r} hi={y.whisker_high!r}\n"
            )
        fh.write("year,month_index,std\n")
        for y in years:
            for i, s in enumerate(y.monthly_std, start=1):
                fh.write(f"{y.year},{i},{s!r}\n")


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def build_manifest(version: str, config: dict, inputs: dict, stage_counts: dict, seed: int) -> dict:
    """Everything needed to reproduce a run, plus one wall-clock field."""
    return {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "tool_version": version,
        "generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "seed": seed,
        "config": dict(sorted(config.items())),
        "inputs": {
            name: {"path": str(path), "sha256": file_digest(path)}
            for name, path in sorted(inputs.items())
        },
        "stage_counts": dict(sorted(stage_counts.items())),
    }


def write_manifest(manifest: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_manifest(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def manifests_equal_except_clock(a: dict, b: dict) -> bool:
    strip = lambda m: {k: v for k, v in m.items() if k != "generated_at"}
    return strip(a) == strip(b)


def year_volatility_dicts(years) -> list:
    return [asdict(y) for y in years]
