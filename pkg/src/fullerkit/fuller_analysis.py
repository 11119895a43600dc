"""Empirical accumulation-order analysis of finite switching-time sets.

The topological definition (strip isolated points, repeat, count the rounds)
has no direct finite analogue: every finite set is discrete.  The surrogate
used here is scale-dependent stripping plus cluster contraction:

* a point is epsilon-isolated when its nearest neighbour is farther than
  epsilon;
* points that are not isolated form maximal epsilon-chains; each chain is
  an unresolved accumulation event and is contracted to a single
  representative (its supremum by default, since switching cascades
  accumulate one-sidedly from the left) carried into the next round;
* rounds after the first re-estimate their stripping scale from the gap
  spread of the surviving representatives, since the representatives of
  round k live at coarser spacing than the raw data.

The estimated order is the number of rounds that removed at least one input
point, minus one.  Layer k collects the input points resolved at round k,
so the layers partition the input set exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .bracket_algebra import BracketCache
from .extremal_sim import SimResult, h_word

__all__ = [
    "SwitchSet",
    "OrderReport",
    "strip_isolated",
    "auto_epsilon",
    "fuller_order",
    "ChatterStats",
    "chatter_ratio",
    "recursion_simulate",
    "divergence_check",
    "check_accumulation_conditions",
    "geometric_times",
    "nested_geometric_times",
]


@dataclass(frozen=True)
class SwitchSet:
    """A finite, strictly increasing set of switching times.

    ``resolution`` is the smallest time separation the producing process can
    distinguish (for simulator output, the event-location scale); order
    estimation refuses epsilons below twice this value.
    """

    times: tuple[float, ...]
    horizon: float
    resolution: float

    def __post_init__(self):
        times = self.times
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("switch times must be strictly increasing")
        if times and times[-1] > self.horizon:
            raise ValueError("switch times must not exceed the horizon")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")

    @classmethod
    def from_times(cls, times: Iterable[float], horizon: float | None = None,
                   resolution: float | None = None) -> "SwitchSet":
        ts = tuple(sorted(float(t) for t in times))
        if horizon is None:
            horizon = ts[-1] if ts else 0.0
        if resolution is None:
            gaps = [b - a for a, b in zip(ts, ts[1:])]
            resolution = min(gaps) / 2 if gaps else 1e-12
        return cls(ts, float(horizon), float(resolution))

    @classmethod
    def from_sim_payload(cls, payload: dict) -> "SwitchSet":
        """Read a simulator JSON payload (the object holding switch_times)."""
        result = payload.get("result", payload)
        times = tuple(float(t) for t in result["switch_times"])
        horizon = payload.get("t_final", times[-1] if times else 0.0)
        scale = max((abs(t) for t in times), default=1.0)
        resolution = max(1e-280, 4 * np.finfo(float).eps * scale)
        return cls.from_times(times, horizon, resolution)

    @classmethod
    def from_text(cls, text: str) -> "SwitchSet":
        times = [float(line) for line in text.split() if line.strip()]
        return cls.from_times(times)

    @property
    def gaps(self) -> tuple[float, ...]:
        return tuple(b - a for a, b in zip(self.times, self.times[1:]))


@dataclass(frozen=True)
class OrderReport:
    """Layered decomposition of a switch set.

    ``layers[k]`` holds the input points resolved at round k (possibly
    empty for rounds that only contracted clusters); the nonempty layers
    partition the input.  ``accumulation_points`` lists the representative
    of every cluster contracted at any round, deepest rounds last.
    """

    layers: tuple[tuple[float, ...], ...]
    estimated_order: int
    accumulation_points: tuple[float, ...]
    epsilon_used: float
    stage_thresholds: tuple[float, ...]
    mode: str = "supremum"

    def to_payload(self) -> dict:
        return {
            "estimated_order": self.estimated_order,
            "layers": [list(layer) for layer in self.layers],
            "accumulation_points": list(self.accumulation_points),
            "epsilon_used": self.epsilon_used,
            "stage_thresholds": list(self.stage_thresholds),
            "mode": self.mode,
        }


def _nn_distances(points: Sequence[float]) -> list[float]:
    n = len(points)
    if n == 1:
        return [math.inf]
    out = []
    for i in range(n):
        left = points[i] - points[i - 1] if i > 0 else math.inf
        right = points[i + 1] - points[i] if i < n - 1 else math.inf
        out.append(min(left, right))
    return out


def strip_isolated(points: Sequence[float], eps: float) -> tuple[list[float], list[float]]:
    """Split a sorted set into epsilon-isolated points and the rest.

    A point is isolated when its nearest neighbour is farther than eps
    (strictly).  Both outputs preserve the input order.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    pts = list(points)
    if any(b <= a for a, b in zip(pts, pts[1:])):
        raise ValueError("points must be sorted strictly increasing")
    isolated, residual = [], []
    for p, d in zip(pts, _nn_distances(pts)):
        (isolated if d > eps else residual).append(p)
    return isolated, residual


def _chains(points: Sequence[float], eps: float) -> list[list[int]]:
    """Indices of maximal runs of consecutive points with gap <= eps."""
    chains: list[list[int]] = []
    current = [0] if points else []
    for i in range(1, len(points)):
        if points[i] - points[i - 1] <= eps:
            current.append(i)
        else:
            chains.append(current)
            current = [i]
    if current:
        chains.append(current)
    return chains


def auto_epsilon(gaps: Sequence[float], bimodal_factor: float = 8.0) -> float:
    """Stripping scale inferred from a gap distribution.

    When the sorted log-gaps show one dominant jump (factor at least
    ``bimodal_factor``), the scale is the geometric mean of the two modes on
    either side of it; otherwise it is the geometric mean of the smallest
    and largest gap, which sits mid-ramp for geometric cascades.
    """
    gaps = sorted(float(g) for g in gaps if g > 0)
    if not gaps:
        raise ValueError("need at least one positive gap")
    if len(gaps) == 1:
        return gaps[0]
    logs = [math.log(g) for g in gaps]
    jumps = [b - a for a, b in zip(logs, logs[1:])]
    best = max(range(len(jumps)), key=lambda i: jumps[i])
    if jumps[best] >= math.log(bimodal_factor):
        low = math.exp(sum(logs[: best + 1]) / (best + 1))
        high = math.exp(sum(logs[best + 1 :]) / (len(logs) - best - 1))
        return math.sqrt(low * high)
    return math.sqrt(gaps[0] * gaps[-1])


def _staged_order(
    times: tuple[float, ...],
    eps: float,
    mode: str,
    stage_spread_min: float,
) -> OrderReport:
    """One staged stripping/contraction pass at a fixed round-0 scale.

    Round 0 strips eps-isolated points into layer 0 and contracts each
    residual eps-chain to a representative (supremum by default, centroid
    with ``mode="centroid"``).  Later rounds process the representatives
    with a threshold re-estimated from their own gap spread (never below
    eps); representative clouds whose gaps spread by less than
    ``stage_spread_min`` are treated as structureless and fully stripped.
    """
    layers: list[tuple[float, ...]] = []
    accumulation: list[float] = []
    thresholds: list[float] = []

    # each working point carries the input points it represents
    current: list[tuple[float, tuple[float, ...]]] = [(t, (t,)) for t in times]
    stage = 0
    while current:
        points = [p for p, _ in current]
        if stage == 0:
            threshold = eps
        else:
            gaps = [b - a for a, b in zip(points, points[1:])]
            if not gaps or max(gaps) < stage_spread_min * min(gaps):
                threshold = 0.0  # structureless cloud: everything isolates
            else:
                threshold = max(eps, auto_epsilon(gaps))
        thresholds.append(threshold)

        if threshold <= 0.0:
            iso_idx = list(range(len(points)))
            chains = []
        else:
            dists = _nn_distances(points)
            iso_idx = [i for i, d in enumerate(dists) if d > threshold]
            rest = [i for i, d in enumerate(dists) if d <= threshold]
            chains = _chains([points[i] for i in rest], threshold)
            chains = [[rest[i] for i in chain] for chain in chains]
        if stage > 0:
            # a cluster of representatives only counts as a deeper
            # accumulation when it shows the one-sided cascade signature:
            # at least three members with decreasing gaps
            kept = []
            for chain in chains:
                gaps = [
                    points[b] - points[a] for a, b in zip(chain, chain[1:])
                ]
                cascade = len(gaps) >= 2 and all(
                    b < a for a, b in zip(gaps, gaps[1:])
                )
                if cascade:
                    kept.append(chain)
                else:
                    iso_idx.extend(chain)
            chains = kept
            iso_idx.sort()

        resolved: list[float] = []
        for i in iso_idx:
            resolved.extend(current[i][1])
        layers.append(tuple(sorted(resolved)))

        next_points: list[tuple[float, tuple[float, ...]]] = []
        for chain in chains:
            members = tuple(sorted(m for i in chain for m in current[i][1]))
            if mode == "supremum":
                rep = points[chain[-1]]
            else:
                rep = float(np.mean([points[i] for i in chain]))
            accumulation.append(rep)
            next_points.append((rep, members))
        current = sorted(next_points)
        stage += 1

    nonempty = sum(1 for layer in layers if layer)
    order = max(nonempty - 1, 0)
    return OrderReport(
        tuple(layers), order, tuple(accumulation), eps, tuple(thresholds), mode
    )


def fuller_order(
    sset: SwitchSet,
    eps: float,
    mode: str = "supremum",
    stage_spread_min: float = 4.0,
) -> OrderReport:
    """Estimate the accumulation order of a switch set at scale ``eps``.

    The estimate is the deepest staged reading over all round-0 scales at
    least ``eps`` (candidate scales below the coarsest gap are the distinct
    gap values, where the staged pass changes behaviour), reported through
    the realizing pass's layers, with ties resolved toward the finest
    scale.  Taking the supremum over coarser scales makes the estimate
    monotone by construction: raising ``eps`` can only discard candidate
    readings, never add them, so the estimated order never increases.
    """
    if mode not in ("supremum", "centroid"):
        raise ValueError(f"unknown accumulation mode {mode!r}")
    if eps < 2 * sset.resolution:
        raise ValueError(
            f"eps {eps:g} is below twice the set resolution {sset.resolution:g}"
        )
    # gap-derived candidates carry a relative slack so that ulp-level noise
    # among near-equal gaps cannot manufacture isolated/clustered splits
    candidates = [eps]
    candidates.extend(
        g * (1 + 1e-9) for g in sorted(set(sset.gaps)) if g * (1 + 1e-9) > eps
    )
    best = None
    for scale in candidates:
        report = _staged_order(sset.times, scale, mode, stage_spread_min)
        if best is None or report.estimated_order > best.estimated_order:
            best = report
    return OrderReport(
        best.layers,
        best.estimated_order,
        best.accumulation_points,
        eps,
        best.stage_thresholds,
        mode,
    )


@dataclass(frozen=True)
class ChatterStats:
    ratio: float
    log_ratio_std: float
    n_intervals: int


def chatter_ratio(times: Sequence[float]) -> ChatterStats:
    """Geometric trend of consecutive inter-switch intervals.

    Fits the log interval-ratios by a constant: returns the geometric mean
    ratio and the standard deviation of the log-ratios.  Requires at least
    five intervals (six times).
    """
    times = [float(t) for t in times]
    intervals = [b - a for a, b in zip(times, times[1:])]
    if len(intervals) < 5:
        raise ValueError("need at least five consecutive intervals")
    if any(d <= 0 for d in intervals):
        raise ValueError("times must be strictly increasing")
    logs = [math.log(b / a) for a, b in zip(intervals, intervals[1:])]
    mean = sum(logs) / len(logs)
    var = sum((x - mean) ** 2 for x in logs) / len(logs)
    return ChatterStats(math.exp(mean), math.sqrt(var), len(intervals))


def recursion_simulate(t1: float, c: float, n: int) -> np.ndarray:
    """Iterate t_{i+1} = t_i (1 - c t_i), the slowest admissible decay.

    For c > 0 and 0 < t1 < 1/c the sequence decreases like 1/(c i) while its
    partial sums grow logarithmically without bound.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if t1 <= 0:
        raise ValueError("t1 must be positive")
    if c < 0:
        raise ValueError("c must be nonnegative")
    if c > 0 and t1 >= 1 / c:
        raise ValueError("need t1 < 1/c")
    out = np.empty(n)
    t = float(t1)
    for i in range(n):
        out[i] = t
        t = t * (1.0 - c * t)
    return out


def divergence_check(sequence: Sequence[float], bound: float) -> int | None:
    """First 1-based index where the running sum reaches ``bound``, else None."""
    total = 0.0
    for i, x in enumerate(sequence, start=1):
        total += x
        if total >= bound:
            return i
    return None


def check_accumulation_conditions(
    result: SimResult,
    report: OrderReport,
    cache: BracketCache,
    tol: float = 1e-4,
) -> list[dict]:
    """Check the switching-cascade annihilation conditions at accumulation points.

    At each reported accumulation time the sample nearest to it must have
    |h_1|, |h_01| and min(|h_+01|, |h_-01|) small relative to that
    h-function's amplitude over the whole run.  Accumulation points lying
    strictly inside a singular arc are additionally required to annihilate
    h_001 and h_101 there.  Returns the list of violations (empty = pass).
    """
    samples = [state for state, _ in result.samples()]
    if not samples:
        return [{"check": "no-samples"}]
    words = ("1", "01", "+01", "-01", "001", "101")
    values = {w: [abs(h_word(s, w, cache)) for s in samples] for w in words}
    amplitude = {w: max(vals) for w, vals in values.items()}

    violations = []
    times = [s.t for s in samples]
    for t_star in report.accumulation_points:
        k = min(range(len(times)), key=lambda i: abs(times[i] - t_star))
        checks = [
            ("h1", values["1"][k], amplitude["1"]),
            ("h01", values["01"][k], amplitude["01"]),
            (
                "h_pm01",
                min(values["+01"][k], values["-01"][k]),
                max(amplitude["+01"], amplitude["-01"]),
            ),
        ]
        in_singular = any(
            arc.kind == "singular" and arc.t_start < t_star < arc.t_end
            for arc in result.arcs
        )
        if in_singular:
            checks.append(("h001", values["001"][k], amplitude["001"]))
            checks.append(("h101", values["101"][k], amplitude["101"]))
        for name, value, scale in checks:
            if scale > 0 and value > tol * scale:
                violations.append(
                    {
                        "t": t_star,
                        "check": name,
                        "value": value,
                        "scale": scale,
                        "ratio": value / scale,
                    }
                )
    return violations


# ---------------------------------------------------------------------------
# synthetic generators used to calibrate and test the estimator


def geometric_times(
    accumulation: float, first_gap: float, ratio: float, count: int
) -> list[float]:
    """Times accumulating at ``accumulation`` from below with geometric gaps.

    Consecutive gaps are first_gap * ratio^k, so the set is the canonical
    single-accumulation cascade.
    """
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    if count < 1 or first_gap <= 0:
        raise ValueError("need count >= 1 and first_gap > 0")
    return [
        accumulation - first_gap * ratio**k / (1 - ratio) for k in range(count)
    ]


def nested_geometric_times(
    accumulation: float = 1.0,
    anchor_gap: float = 0.1,
    anchor_ratio: float = 0.45,
    n_anchors: int = 8,
    cluster_fraction: float = 0.25,
    cluster_ratio: float = 0.35,
    cluster_count: int = 12,
) -> list[float]:
    """Two-level cascade: geometric clusters whose anchors are geometric.

    Anchor j sits at accumulation - anchor_gap * anchor_ratio^j / (1 -
    anchor_ratio); it carries a geometric cluster spanning
    ``cluster_fraction`` of its forward gap.  With the default parameters
    the estimated order is 2 for any eps in roughly [1e-5, 5e-4]: small
    enough that clusters do not merge across anchors, large enough that
    every cluster keeps a sub-eps tail.
    """
    out: list[float] = []
    for j in range(n_anchors):
        anchor = accumulation - anchor_gap * anchor_ratio**j / (1 - anchor_ratio)
        forward_gap = anchor_gap * anchor_ratio**j
        first_gap = cluster_fraction * forward_gap * (1 - cluster_ratio)
        out.extend(geometric_times(anchor, first_gap, cluster_ratio, cluster_count))
    return sorted(out)
