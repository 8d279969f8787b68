"""Overlap-versus-eps sweeps on the two-label family, thresholds, CSV output.

The two-label family has labels ``+``/``-`` with ``mu(+) = 1/2 + eps`` and
``nu(+) = 1/2 - eps``. A sweep runs every ``(pair, eps, seed)`` cell:
sample a graph, run BP, score the overlap.

Per-cell seeds come from :class:`numpy.random.SeedSequence` applied to
``(master_seed, bits(a), bits(b), eps_index, seed_index, seed)``, where ``bits`` is the
IEEE-754 binary64 pattern of the value as an unsigned integer. The mixing is
numpy's documented hash, stable across platforms and releases.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import bp
from .graphgen import sample_graph
from .model import ModelParams, tau

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ("a", "b", "eps", "seed", "tau", "overlap", "iters", "converged")


def fmt(x) -> str:
    """Nine significant digits, ``.`` decimal separator."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.9g}"


def write_csv(destination, header: Sequence[str], rows, comments: Sequence[str] = ()) -> None:
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    try:
        Path(destination).write_text(buf.getvalue(), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {destination}: {exc}") from exc


def two_label_tau(a: float, b: float, eps: float) -> float:
    return tau(ModelParams.two_label(a, b, eps))


def critical_eps(a: float, b: float) -> float:
    """Smallest eps in [0, 1/2] with tau = 1 on the two-label family.

    Returns 0 when tau >= 1 already at eps = 0 and ``inf`` when tau stays
    below 1 up to eps = 1/2. For ``a == b`` the closed form
    ``1 / (2 sqrt(a))`` is used.
    """
    if a == b:
        if a <= 0:
            return math.inf
        e = 1 / (2 * math.sqrt(a))
        return e if e <= 0.5 else math.inf
    if two_label_tau(a, b, 0.0) >= 1:
        return 0.0
    if two_label_tau(a, b, 0.5) < 1:
        return math.inf
    lo, hi = 0.0, 0.5
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if two_label_tau(a, b, mid) < 1:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def cell_seeds(master_seed: int, a: float, b: float, eps_index: int, seed_index: int,
               seed: int) -> tuple[int, int]:
    """Independent (graph, BP) seeds for one sweep cell."""
    mask = 2**64 - 1
    bits = [struct.unpack("<Q", struct.pack("<d", float(v)))[0] for v in (a, b)]
    ss = np.random.SeedSequence([int(master_seed) & mask, *bits, eps_index, seed_index,
                                 int(seed) & mask])
    g, m = ss.generate_state(2, dtype=np.uint64)
    return int(g), int(m)


@dataclass(frozen=True)
class SweepSpec:
    pairs: tuple[tuple[float, float], ...]
    eps_grid: tuple[float, ...]
    n: int
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    bp_cfg: bp.BPConfig = field(default_factory=bp.BPConfig)
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple((float(a), float(b)) for a, b in self.pairs))
        object.__setattr__(self, "eps_grid", tuple(float(e) for e in self.eps_grid))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.pairs:
            raise ValueError("sweep needs at least one (a, b) pair")
        if not self.eps_grid or list(self.eps_grid) != sorted(self.eps_grid):
            raise ValueError("eps_grid must be non-empty and ascending")
        if any(not 0 <= e <= 0.5 for e in self.eps_grid):
            raise ValueError("eps values must lie in [0, 1/2]")
        if self.n < 2 or self.n % 2:
            raise ValueError("n must be even and >= 2")
        if not self.seeds:
            raise ValueError("at least one seed is required")

    def cells(self):
        for a, b in self.pairs:
            for i, eps in enumerate(self.eps_grid):
                for j, s in enumerate(self.seeds):
                    yield a, b, i, eps, j, s


@dataclass(frozen=True)
class SweepRow:
    a: float
    b: float
    eps: float
    seed: int
    tau: float
    overlap: float
    iters: int
    converged: bool

    def as_tuple(self):
        return (self.a, self.b, self.eps, self.seed, self.tau, self.overlap,
                self.iters, self.converged)


@dataclass
class SweepResult:
    rows: list[SweepRow]

    def __len__(self):
        return len(self.rows)

    def write_csv(self, destination) -> None:
        write_csv(destination, SWEEP_COLUMNS, (r.as_tuple() for r in self.rows))

    def pairs(self) -> list[tuple[float, float]]:
        seen = []
        for r in self.rows:
            if (r.a, r.b) not in seen:
                seen.append((r.a, r.b))
        return seen

    def summary(self, a: float, b: float) -> list[tuple[float, float, float, int]]:
        """``(eps, mean overlap, standard error, seeds)`` per eps for one pair."""
        by_eps: dict[float, list[float]] = {}
        for r in self.rows:
            if (r.a, r.b) == (a, b):
                by_eps.setdefault(r.eps, []).append(r.overlap)
        out = []
        for eps in sorted(by_eps):
            q = np.array(by_eps[eps])
            se = float(q.std(ddof=1) / math.sqrt(len(q))) if len(q) > 1 else 0.0
            out.append((eps, float(q.mean()), se, len(q)))
        return out


def run_cell(a: float, b: float, eps: float, n: int, seed: int, eps_index: int,
             seed_index: int, cfg: bp.BPConfig, master_seed: int = 0) -> SweepRow:
    params = ModelParams.two_label(a, b, eps)
    t = tau(params)
    g_seed, m_seed = cell_seeds(master_seed, a, b, eps_index, seed_index, seed)
    try:
        graph = sample_graph(params, n, g_seed)
        marg, iters, conv = bp.run_bp(graph, params, cfg, m_seed)
        q = bp.overlap(graph.types, bp.estimate_types(marg))
    except (ValueError, FloatingPointError, MemoryError) as exc:
        log.warning("cell a=%s b=%s eps=%s seed=%s failed: %s", a, b, eps, seed, exc)
        return SweepRow(a, b, eps, seed, t, math.nan, 0, False)
    return SweepRow(a, b, eps, seed, t, q, iters, conv)


def _run_cell_args(args):
    return run_cell(*args)


def run_sweep(spec: SweepSpec, workers: int = 1, progress: bool = False) -> SweepResult:
    """All cells of ``spec`` in deterministic order (pair, eps, seed).

    Cells are independent, so ``workers > 1`` farms them out to processes;
    row order does not depend on completion order.
    """
    jobs = [(a, b, eps, spec.n, s, i, j, spec.bp_cfg, spec.master_seed)
            for a, b, i, eps, j, s in spec.cells()]
    rows: list[SweepRow] = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell_args, jobs, chunksize=1))
    else:
        for k, job in enumerate(jobs, 1):
            rows.append(run_cell(*job))
            if progress:
                r = rows[-1]
                log.info("[%d/%d] a=%g b=%g eps=%g seed=%d Q=%.4f iters=%d",
                         k, len(jobs), r.a, r.b, r.eps, r.seed, r.overlap, r.iters)
    return SweepResult(rows)


def series_filename(a: float, b: float) -> str:
    return f"overlap_a{fmt(a)}_b{fmt(b)}.csv"


def emit_plot_data(result: SweepResult, destination, plot: bool = True) -> list[Path]:
    """One CSV per ``(a, b)`` pair with the mean overlap and its standard error per eps.

    Each series file starts with a ``# eps_star=...`` comment marking the
    threshold. With ``plot`` an SVG chart of all series is written as well.
    Returns the written paths.
    """
    if not result.rows:
        raise ValueError("empty sweep result")
    out = Path(destination)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []
    series = {}
    for a, b in result.pairs():
        rows = result.summary(a, b)
        star = critical_eps(a, b)
        path = out / series_filename(a, b)
        write_csv(path, ("eps", "mean_q", "se_q", "n_seeds"), rows,
                  comments=[f"a={fmt(a)} b={fmt(b)} eps_star={fmt(star)}"])
        written.append(path)
        series[(a, b)] = (rows, star)
    if plot:
        from .plotting import plot_overlap

        path = out / "overlap_vs_eps.svg"
        plot_overlap(series, path)
        written.append(path)
    return written


def read_series(path) -> tuple[float, list[tuple[float, float, float, int]]]:
    """Parse a file written by :func:`emit_plot_data`: ``(eps_star, rows)``."""
    star = math.nan
    rows = []
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    for line in lines:
        if line.startswith("#"):
            for tok in line[1:].split():
                if tok.startswith("eps_star="):
                    star = float(tok.split("=", 1)[1])
    body = [l for l in lines if not l.startswith("#")]
    for rec in csv.DictReader(body):
        rows.append((float(rec["eps"]), float(rec["mean_q"]), float(rec["se_q"]),
                     int(rec["n_seeds"])))
    return star, rows
