"""Monte Carlo verification of the expansions.

The study draws i.i.d. samples by inverse-transform sampling from a
counter-based generator, solves each replicate's MLE, and measures

* the per-order remainders gamma_k = sqrt(n)(thetahat - theta0) minus the
  order-k truncation of the stochastic expansion, whose medians should scale
  like n^-((k+1)/2),
* the distance between the empirical CDF of the standardized statistic
  sqrt(n I) thetahat and the Edgeworth expansion at each order, and
* the tail fraction P(|gamma| >= eps_n / n^2) with
  eps_n = (log n)^(2 + epsilon_exponent) / sqrt(n), a sequence chosen so
  that eps_n sqrt(n) (log n)^-2 still grows.

Reproducibility contract: replicate r is seeded with base_seed XOR r, work
is split into fixed-size blocks, and aggregation is a deterministic merge in
replicate order, so the report bytes never depend on the worker count.

theta0 = 0 throughout; location equivariance of the MLE makes any other
choice redundant.
"""
from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .density import DensityModel, model_from_descriptor
from .errors import StudyAborted
from .expansion import ORDERS, XiVector, compute_xi, compute_xi_batch, edgeworth_cdf, \
    stochastic_expansion_batch
from .mle import solve_mle_batch
from .moments import MomentSet, compute_moment_set, validate_conditions

#: replicates per work item; fixed so results cannot depend on scheduling
BLOCK_SIZE = 4096

_DKW_95 = 1.3581  # sqrt(log(2/0.05)/2): ECDF sup-norm noise floor at 95%


def sample_iid(model: DensityModel, n: int, seed: int) -> np.ndarray:
    """Draw ``n`` i.i.d. points by inverting the model CDF.

    Uniforms come from a Philox counter-based stream keyed on ``seed``; the
    same (model, n, seed) gives bit-identical output on any platform and
    under any threading, and the uniforms live strictly inside (0, 1).
    """
    n = int(n)
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return np.empty(0, dtype=float)
    gen = np.random.Generator(np.random.Philox(key=int(seed)))
    u = (gen.integers(0, 1 << 53, size=n, dtype=np.uint64) + 0.5) * 2.0**-53
    return np.asarray(model.ppf(u), dtype=float)


def ecdf_distance(sample, prediction, grid) -> tuple:
    """(sup, L1) distance between an ECDF and a predicted CDF on a grid.

    The ECDF is evaluated from both sides at every grid point and the larger
    deviation counts, so a prediction running through a jump still pays for
    the half it misses.
    """
    s = np.sort(np.asarray(sample, dtype=float).ravel())
    g = np.asarray(grid, dtype=float)
    if g.size == 0 or np.any(np.diff(g) < 0):
        raise ValueError("grid must be nonempty and sorted")
    p = np.asarray(prediction(g) if callable(prediction) else prediction, dtype=float)
    left = np.searchsorted(s, g, side="left") / s.size
    right = np.searchsorted(s, g, side="right") / s.size
    dev = np.maximum(np.abs(left - p), np.abs(right - p))
    return float(np.max(dev)), float(np.mean(dev))


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _default_eval_grid():
    return tuple(np.round(np.linspace(-4.0, 4.0, 81), 10))


@dataclass
class SimulationConfig:
    """Resolved study configuration; the JSON config file mirrors the fields."""

    family: str = "logistic"
    family_params: dict = field(default_factory=dict)
    n_grid: tuple = (25, 50, 100, 200, 400)
    replications: int = 20000
    base_seed: int = 20260810
    orders: tuple = ORDERS
    eval_grid: tuple = field(default_factory=_default_eval_grid)
    epsilon_exponent: float = 0.5
    solver_tol: float = 1e-11
    moment_tol: float = 1e-10
    require_valid_conditions: bool = True

    def __post_init__(self):
        self.n_grid = tuple(int(v) for v in self.n_grid)
        self.orders = tuple(sorted(int(k) for k in self.orders))
        self.eval_grid = tuple(float(v) for v in self.eval_grid)
        if self.replications < 100:
            raise ValueError("replications must be at least 100")
        if list(self.n_grid) != sorted(set(self.n_grid)):
            raise ValueError("n_grid must be strictly increasing")
        if not set(self.orders) <= set(ORDERS):
            raise ValueError(f"orders must be a subset of {ORDERS}")
        if not self.orders:
            raise ValueError("orders must be nonempty")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_grid"] = list(self.n_grid)
        d["orders"] = list(self.orders)
        d["eval_grid"] = list(self.eval_grid)
        return d

    @staticmethod
    def from_dict(d: Mapping) -> "SimulationConfig":
        known = {f.name for f in SimulationConfig.__dataclass_fields__.values()}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return SimulationConfig(**dict(d))

    def epsilon_threshold(self, n: int) -> float:
        """Tail threshold eps_n / n^2 with eps_n = (log n)^(2+e) / sqrt(n)."""
        eps_n = math.log(n) ** (2.0 + self.epsilon_exponent) / math.sqrt(n)
        return eps_n / n**2


@dataclass(frozen=True)
class ReplicationResult:
    """One replicate of the study."""

    theta_hat: float
    standardized: float
    xi: XiVector
    remainders: Mapping[int, float]


def replicate(model: DensityModel, moments: MomentSet, n: int, seed: int,
              orders=ORDERS, tol: float = 1e-11) -> ReplicationResult:
    """Run a single replicate: sample, solve, expand, take remainders."""
    sample = sample_iid(model, n, seed)
    batch = solve_mle_batch(sample[None, :], model, tol=tol)
    if batch.failed[0]:
        raise StudyAborted("replicate solver failed")
    theta = float(batch.theta_hat[0])
    xi = compute_xi(sample, 0.0, model, moments.a)
    truncs = stochastic_expansion_batch(xi.xi[None, :], n, moments.a, orders)
    root_n = math.sqrt(n)
    rem = {k: root_n * theta - float(truncs[k][0]) for k in orders}
    return ReplicationResult(theta, math.sqrt(n * moments.fisher) * theta, xi, rem)


# ---------------------------------------------------------------------------
# block execution
# ---------------------------------------------------------------------------

@lru_cache(maxsize=8)
def _cached_model(descriptor_json: str) -> DensityModel:
    return model_from_descriptor(json.loads(descriptor_json))


def _run_block(payload: tuple) -> dict:
    """Work item: replicates [start, stop) at sample size n.

    Returns per-replicate arrays; NaN rows mark solver failures.  All inputs
    arrive as plain data so the item can cross a process boundary.
    """
    descriptor_json, n, start, stop, base_seed, a, fisher, orders, tol = payload
    model = _cached_model(descriptor_json)
    count = stop - start
    samples = np.empty((count, n))
    for r in range(count):
        samples[r] = sample_iid(model, n, base_seed ^ (start + r))
    batch = solve_mle_batch(samples, model, tol=tol)
    theta = batch.theta_hat.copy()
    failed = batch.failed.copy()
    theta[failed] = np.nan
    xi = compute_xi_batch(samples, 0.0, model, a)
    truncs = stochastic_expansion_batch(xi, n, np.asarray(a), orders)
    root_n = math.sqrt(n)
    gamma = np.stack([root_n * theta - truncs[k] for k in orders], axis=1)
    return {
        "start": start,
        "theta": theta,
        "standardized": math.sqrt(n * fisher) * theta,
        "xi": xi,
        "gamma": gamma,
        "failed": failed,
    }


def _wilson_interval(successes: int, total: int, z: float = 1.959964) -> tuple:
    if total == 0:
        return (0.0, 1.0)
    p = successes / total
    denom = 1.0 + z * z / total
    centre = (p + z * z / (2 * total)) / denom
    half = z * math.sqrt(p * (1 - p) / total + z * z / (4 * total * total)) / denom
    return (max(0.0, centre - half), min(1.0, centre + half))


# ---------------------------------------------------------------------------
# the study driver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComparisonReport:
    """Aggregated study output; ``to_dict`` is the report.json payload."""

    config: dict
    fisher: float
    moment_values: dict
    dkw_noise_floor: dict
    per_n: dict
    slopes: dict
    tail_trend: dict
    output_files: tuple

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "fisher": self.fisher,
            "moments": self.moment_values,
            "dkw_noise_floor": self.dkw_noise_floor,
            "per_n": self.per_n,
            "slopes": self.slopes,
            "tail_trend": self.tail_trend,
        }


def _format_row(values, precision):
    return ",".join(format(v, f".{precision}g") for v in values)


def run_study(config: SimulationConfig, out_dir=None, workers: int = 1,
              precision: int = 12) -> ComparisonReport:
    """Run the full simulation study described by ``config``.

    With ``out_dir`` set, per-replicate rows stream to ``remainders_<n>.csv``
    as blocks finish (memory stays at block scale; only the per-replicate
    summary columns are ever re-read for the order statistics), the ECDF
    against every order's prediction lands in ``ecdf_<n>.csv``, a long-format
    ``curves.csv`` serves plotting, and ``report.json`` holds the aggregate.
    The report is bit-identical for any ``workers`` value.
    """
    model = model_from_descriptor({"family": config.family, "params": config.family_params})
    if config.require_valid_conditions:
        cond = validate_conditions(model)
        failed = [k for k, v in cond.verdicts.items() if v == "fail"]
        if failed:
            raise StudyAborted(
                f"family {model.name!r} fails regularity condition(s) {failed}; "
                "set require_valid_conditions=False to override")
    moments = compute_moment_set(model, tol=config.moment_tol)
    a = tuple(float(v) for v in moments.a)
    fisher = moments.fisher
    grid = np.asarray(config.eval_grid, dtype=float)
    orders = config.orders
    m_total = config.replications
    desc_json = json.dumps(model.descriptor(), sort_keys=True)

    files = []
    out = None
    if out_dir is not None:
        out = str(out_dir)
        os.makedirs(out, exist_ok=True)

    def block_payloads(n):
        for start in range(0, m_total, BLOCK_SIZE):
            stop = min(start + BLOCK_SIZE, m_total)
            yield (desc_json, n, start, stop, config.base_seed, a, fisher,
                   orders, config.solver_tol)

    per_n: dict[str, dict] = {}
    medians = {k: [] for k in orders}
    tail_rows = []
    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for n in config.n_grid:
            thr = config.epsilon_threshold(n)
            counts_lt = np.zeros(grid.size, dtype=np.int64)
            counts_le = np.zeros(grid.size, dtype=np.int64)
            n_ok = 0
            n_fail = 0
            tail_hits = 0
            gamma_kept = []
            writer = None
            gamma_cols = [f"gamma_order{k}" for k in orders]
            if out is not None:
                path = os.path.join(out, f"remainders_{n}.csv")
                writer = open(path, "w", encoding="utf-8", newline="\n")
                writer.write(",".join(
                    ["replicate", "theta_hat", "standardized"]
                    + [f"xi{j}" for j in range(1, 7)] + gamma_cols) + "\n")
                files.append(path)

            payloads = block_payloads(n)
            results = executor.map(_run_block, payloads) if executor else map(_run_block, payloads)
            for block in results:
                ok = ~block["failed"]
                std_ok = np.sort(block["standardized"][ok])
                counts_lt += np.searchsorted(std_ok, grid, side="left")
                counts_le += np.searchsorted(std_ok, grid, side="right")
                n_ok += int(ok.sum())
                n_fail += int((~ok).sum())
                g_last = np.abs(block["gamma"][ok, -1])
                tail_hits += int(np.sum(g_last >= thr))
                if writer is not None:
                    start = block["start"]
                    for r in range(block["theta"].size):
                        row = [start + r, block["theta"][r], block["standardized"][r]]
                        row += list(block["xi"][r])
                        row += list(block["gamma"][r])
                        writer.write(str(row[0]) + "," + _format_row(row[1:], precision) + "\n")
                else:
                    gamma_kept.append(np.abs(block["gamma"][ok]))
                del block
            if writer is not None:
                writer.close()
                data = np.loadtxt(os.path.join(out, f"remainders_{n}.csv"),
                                  delimiter=",", skiprows=1,
                                  usecols=range(9, 9 + len(orders)), ndmin=2)
                abs_gamma = np.abs(data[~np.isnan(data[:, 0])])
            else:
                abs_gamma = np.concatenate(gamma_kept, axis=0) if gamma_kept else np.empty((0, len(orders)))

            if n_fail > 0.01 * m_total:
                raise StudyAborted(
                    f"{n_fail} of {m_total} replicates failed at n={n} (over the 1% cap)")

            ecdf_lo = counts_lt / max(n_ok, 1)
            ecdf_hi = counts_le / max(n_ok, 1)
            dist = {}
            preds = {}
            for k in orders:
                pred = np.asarray(edgeworth_cdf(moments, n, k, grid))
                preds[k] = pred
                dev = np.maximum(np.abs(ecdf_lo - pred), np.abs(ecdf_hi - pred))
                dist[str(k)] = {"sup": float(np.max(dev)), "l1": float(np.mean(dev))}

            rem_stats = {}
            for i, k in enumerate(orders):
                col = abs_gamma[:, i]
                med = float(np.median(col)) if col.size else math.nan
                rem_stats[str(k)] = {
                    "median_abs": med,
                    "q90_abs": float(np.quantile(col, 0.9)) if col.size else math.nan,
                    "max_abs": float(np.max(col)) if col.size else math.nan,
                }
                medians[k].append(med)
            ci = _wilson_interval(tail_hits, n_ok)
            frac = tail_hits / max(n_ok, 1)
            tail_rows.append((n, frac, ci))
            per_n[str(n)] = {
                "replications": m_total,
                "solver_failures": n_fail,
                "ecdf_distance": dist,
                "remainders": rem_stats,
                "tail": {"threshold": thr, "fraction": frac, "hits": tail_hits,
                         "ci95": [ci[0], ci[1]]},
            }

            if out is not None:
                epath = os.path.join(out, f"ecdf_{n}.csv")
                with open(epath, "w", encoding="utf-8", newline="\n") as fh:
                    fh.write("x,ecdf_lower,ecdf_upper," +
                             ",".join(f"pred_order{k}" for k in orders) + "\n")
                    for i, x in enumerate(grid):
                        vals = [x, ecdf_lo[i], ecdf_hi[i]] + [preds[k][i] for k in orders]
                        fh.write(_format_row(vals, precision) + "\n")
                files.append(epath)
    finally:
        if executor is not None:
            executor.shutdown()

    slopes = {}
    logn = np.log(np.asarray(config.n_grid, dtype=float))
    for k in orders:
        med = np.asarray(medians[k], dtype=float)
        if len(config.n_grid) >= 2 and np.all(med > 0):
            slope = float(np.polyfit(logn, np.log(med), 1)[0])
        else:
            slope = math.nan
        # first omitted bracket of the order-k truncation carries n^-(k/2)
        slopes[str(k)] = {"slope": slope, "expected": -k / 2.0}

    trend_ok = []
    for (n1, f1, c1), (n2, f2, c2) in zip(tail_rows, tail_rows[1:]):
        trend_ok.append(bool(c2[0] <= c1[1]))
    tail_trend = {
        "nonincreasing_within_ci": bool(all(trend_ok)) if trend_ok else True,
        "pairs": [{"from_n": a_[0], "to_n": b_[0], "ok": ok}
                  for (a_, b_, ok) in zip(tail_rows, tail_rows[1:], trend_ok)],
    }

    if out is not None:
        cpath = os.path.join(out, "curves.csv")
        with open(cpath, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("x,order,value\n")
            for n in config.n_grid:
                epath = os.path.join(out, f"ecdf_{n}.csv")
                rows = np.loadtxt(epath, delimiter=",", skiprows=1, ndmin=2)
                for i, x in enumerate(rows[:, 0]):
                    fh.write(f"{format(x, f'.{precision}g')},ecdf_n{n},"
                             f"{format(rows[i, 2], f'.{precision}g')}\n")
                    for j, k in enumerate(orders):
                        fh.write(f"{format(x, f'.{precision}g')},order{k}_n{n},"
                                 f"{format(rows[i, 3 + j], f'.{precision}g')}\n")
        files.append(cpath)

    report = ComparisonReport(
        config=config.to_dict(),
        fisher=fisher,
        moment_values=moments.to_dict(),
        dkw_noise_floor={"value": _DKW_95 / math.sqrt(m_total),
                         "note": "95% DKW bound on ECDF sup-norm fluctuation, ~1.36/sqrt(M)"},
        per_n=per_n,
        slopes=slopes,
        tail_trend=tail_trend,
        output_files=tuple(files),
    )

    if out is not None:
        rpath = os.path.join(out, "report.json")
        with open(rpath, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(_round_floats(report.to_dict(), precision), fh,
                      indent=2, sort_keys=True)
            fh.write("\n")
        object.__setattr__(report, "output_files", tuple(files + [rpath]))
    return report


def _round_floats(obj, precision: int):
    if isinstance(obj, float):
        return float(format(obj, f".{precision}g")) if math.isfinite(obj) else obj
    if isinstance(obj, dict):
        return {k: _round_floats(v, precision) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v, precision) for v in obj]
    return obj
