"""Run reports: text summaries, JSON payloads and matplotlib figures."""
from __future__ import annotations

import os
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .engine import RunResult, Solution, StratumResult  # noqa: E402
from .ground import GroundedSystem  # noqa: E402
from .pops import is_finite_number  # noqa: E402
from .store import Relation, format_key  # noqa: E402

_STYLE = {
    "figure.figsize": (6.0, 3.6),
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 7,
    "legend.frameon": False,
    "svg.hashsalt": "datalogo",
}
# no timestamps or version strings, so figures are byte-stable
_META = {"Software": None}


def _save(fig, path: str) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)
    return path


def relation_rows(rel: Relation) -> list[tuple[str, str]]:
    return [(",".join(format_key(k) for k in key), rel.pops.format(v)) for key, v in rel.sorted_items()]


def format_relation(rel: Relation) -> str:
    """An aligned two-column table; absent keys (bottom) are not listed."""
    rows = relation_rows(rel)
    head = f"{rel.schema.name} ({rel.pops.name}, {len(rows)} non-bottom)"
    if not rows:
        return head + "\n  (empty)"
    w = max(len(k) for k, _ in rows)
    return "\n".join([head] + [f"  {k.ljust(w)}  {v}" for k, v in rows])


def stratum_summary(sr: StratumResult) -> str:
    sol = sr.solution
    names = ", ".join(sr.stratum.idbs)
    if sol.engine == "linear":
        how = f"solved by elimination ({sol.ops} semiring ops)"
    elif sol.converged:
        how = f"converged in {sol.iterations} iterations"
    else:
        how = f"did not converge within {sol.iterations} iterations"
    lin = "yes" if sr.linear else "no"
    return (
        f"stratum {sr.stratum.index} [{names}]: {how}; engine {sol.engine}; "
        f"N={sr.system.N}, monomials={sr.system.monomial_count}; linear: {lin}; cap {sr.cap}"
    )


def solution_json(sr: StratumResult) -> dict:
    sol = sr.solution
    out = {
        "stratum": sr.stratum.index,
        "idbs": list(sr.stratum.idbs),
        "engine": sol.engine,
        "status": sol.status.value,
        "iterations": sol.iterations,
        "stable_at": sol.stable_at,
        "cap": sr.cap.value,
        "cap_provenance": sr.cap.provenance,
        "linear": sr.linear,
        "N": sr.system.N,
        "monomials": sr.system.monomial_count,
        "ops": sol.ops,
        "wall_seconds": round(sr.seconds, 6),
    }
    if sol.diff:
        out["last_changes"] = list(sol.diff)
    return out


def run_json(result: RunResult) -> dict:
    return {
        "converged": result.converged,
        "strata": [solution_json(s) for s in result.strata],
        "relations": {n: [list(r) for r in relation_rows(rel)] for n, rel in sorted(result.relations.items())},
    }


# ---------------------------------------------------------------------------
# figures


def changes_per_step(system: GroundedSystem, sol: Solution) -> list[tuple[int, int]]:
    """(t, number of atoms whose value changed at step t) from a full trace."""
    out = []
    for (t0, a), (t1, b) in zip(sol.trace, sol.trace[1:]):
        out.append((t1, sum(1 for k in range(system.N) if a[k] != b[k])))
    return out


def _numeric(v):
    if is_finite_number(v):
        return float(v)
    return None


def convergence_figure(result: RunResult, path: str, max_series: int = 12) -> str | None:
    """Changed atoms per step for each stratum, and numeric trajectories when available."""
    traced = [s for s in result.strata if len(s.solution.trace) > 1]
    if not traced:
        return None
    with plt.rc_context(_STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.6))
        for sr in traced:
            pts = changes_per_step(sr.system, sr.solution)
            ax1.plot([t for t, _ in pts], [c for _, c in pts], marker="o", ms=3,
                     label=f"stratum {sr.stratum.index}")
        ax1.set_xlabel("iteration t")
        ax1.set_ylabel("atoms changed")
        ax1.set_title("changes per step")
        ax1.legend()
        shown = 0
        for sr in traced:
            sysm, sol = sr.system, sr.solution
            for k in range(sysm.N):
                if shown >= max_series:
                    break
                ys = [_numeric(a[k]) for _, a in sol.trace]
                if all(y is None for y in ys):
                    continue
                ax2.plot([t for t, _ in sol.trace], ys, marker=".", drawstyle="steps-post", label=sysm.label(k))
                shown += 1
        ax2.set_xlabel("iteration t")
        ax2.set_title("finite numeric values")
        if shown:
            ax2.legend(ncol=2)
        else:
            ax2.text(0.5, 0.5, "no finite numeric values", ha="center", va="center", transform=ax2.transAxes)
        return _save(fig, path)


def stability_histogram(histogram: dict, pops_name: str, path: str, cap: int) -> str:
    keys = sorted((k for k in histogram if k != "none"), key=int)
    labels = [str(k) for k in keys]
    counts = [histogram[k] for k in keys]
    if "none" in histogram:
        labels.append(f">{cap}")
        counts.append(histogram["none"])
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.bar(labels, counts, color="#4c72b0")
        ax.set_xlabel("element stability index")
        ax.set_ylabel("samples")
        ax.set_title(f"stability of sampled elements of {pops_name}")
        return _save(fig, path)


def matrix_growth_figure(rows: Sequence[tuple[int, int, int | None]], path: str) -> str:
    """rows of (p, N, measured index) for unit cycles, with the (p+1)N-1 reference."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for p in sorted({r[0] for r in rows}):
            pts = sorted((n, q) for pp, n, q in rows if pp == p and q is not None)
            line, = ax.plot([n for n, _ in pts], [q for _, q in pts], marker="o", label=f"p={p} measured")
            ax.plot([n for n, _ in pts], [(p + 1) * n - 1 for n, _ in pts], ls="--", color=line.get_color(),
                    alpha=0.6, label=f"p={p}: (p+1)N-1")
        ax.set_xlabel("cycle length N")
        ax.set_ylabel("matrix stability index")
        ax.set_title("unit cycles over trop_p")
        ax.legend(ncol=2)
        return _save(fig, path)


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path
