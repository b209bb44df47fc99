"""Report files: JSON/CSV summaries, per-run records, convergence curves, SVG chart.

Everything except ``timing.json``/``timing.csv`` is a pure function of the
configuration and is byte-identical across re-runs.
"""

from __future__ import annotations

import csv
import io
import json
import os
from pathlib import Path

from .experiment import ComparisonReport

COLORS = {"pso": "#1f77b4", "apso": "#ff7f0e", "apsosac": "#2ca02c"}


def _num(x) -> str:
    return "" if x is None else repr(float(x))


def _write(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _csv(rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def summary_rows(report: ComparisonReport) -> list[list]:
    rows = [["method", "runs", "mean_best_cost", "std_best_cost", "improvement_vs_pso_pct"]]
    for m in report.methods:
        s = report.summary[m]
        rows.append([m, s["runs"], _num(s["mean_best_cost"]), _num(s["std_best_cost"]),
                     _num(s["improvement_vs_pso_pct"])])
    return rows


def curves_svg(report: ComparisonReport, width: int = 640, height: int = 400) -> str:
    left, right, top, bottom = 70, 130, 30, 50
    pw, ph = width - left - right, height - top - bottom
    all_vals = [v for m in report.methods for (_, v, _, _) in report.curves[m]]
    n_iter = max(len(report.curves[m]) for m in report.methods) - 1
    lo, hi = min(all_vals), max(all_vals)
    if hi == lo:
        hi = lo + 1.0
    xmax = max(n_iter, 1)

    def x(t):
        return left + pw * t / xmax

    def y(v):
        return top + ph * (1.0 - (v - lo) / (hi - lo))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
        f'<text x="{left + pw / 2:.1f}" y="{height - 12}" text-anchor="middle" font-size="13">iteration</text>',
        f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 16 {top + ph / 2:.1f})">mean best cost</text>',
    ]
    for k in range(5):
        v = lo + (hi - lo) * k / 4
        out.append(f'<text x="{left - 6}" y="{y(v) + 4:.1f}" text-anchor="end" font-size="10">{v:.2f}</text>')
        t = round(xmax * k / 4)
        out.append(f'<text x="{x(t):.1f}" y="{top + ph + 16}" text-anchor="middle" font-size="10">{t}</text>')
    for i, m in enumerate(report.methods):
        color = COLORS.get(m, "#444444")
        pts = " ".join(f"{x(t):.2f},{y(v):.2f}" for (t, v, _, _) in report.curves[m])
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{pts}"/>')
        ly = top + 16 * (i + 1)
        out.append(f'<line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 35}" y="{ly + 4}" font-size="12">{m}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_report(report: ComparisonReport, out_dir: str | os.PathLike) -> list[Path]:
    d = Path(out_dir)
    (d / "curves").mkdir(parents=True, exist_ok=True)
    written = []

    def put(name: str, text: str) -> None:
        p = d / name
        _write(p, text)
        written.append(p)

    put("config.json", _json(report.config))
    put("summary.json", _json({
        "methods": report.methods,
        "summary": report.summary,
        "paired": report.paired,
        "paired_design": {
            "shared_env_and_swarm_seeds": True,
            "pairs": sorted({(r.env_seed, r.swarm_seed) for r in report.records}),
        },
    }))
    put("summary.csv", _csv(summary_rows(report)))
    run_rows = [["method", "run", "env_seed", "swarm_seed", "best_cost"]]
    run_rows += [[r.method, r.run, r.env_seed, r.swarm_seed, _num(r.best_cost)] for r in report.records]
    put("runs.csv", _csv(run_rows))
    put("runs.json", _json([{**r.to_row(), "curve": r.curve,
                             "coefficient_trace": [list(c) for c in r.coefficient_trace]}
                            for r in report.records]))
    for m in report.methods:
        rows = [["iteration", "mean_gbest", "min_gbest", "max_gbest"]]
        rows += [[t, _num(a), _num(b), _num(c)] for (t, a, b, c) in report.curves[m]]
        put(f"curves/{m}.csv", _csv(rows))
    put("curves.svg", curves_svg(report))
    if report.episodes:
        put("episodes.jsonl", "".join(
            json.dumps({
                "env_seed": e.env_seed, "swarm_seed": e.swarm_seed, "rewards": e.rewards,
                "init_best": e.init_best, "final_best": e.final_best, "actions": e.actions,
            }, sort_keys=True) + "\n"
            for e in report.episodes
        ))
    # Wall-clock measurements vary between runs; kept apart from the deterministic files.
    put("timing.json", _json(report.timing))
    t_rows = [["method", "mean_wall_time", "mean_stats_time", "wall_time_ratio_vs_pso"]]
    t_rows += [[m, _num(t["mean_wall_time"]), _num(t["mean_stats_time"]), _num(t.get("wall_time_ratio_vs_pso"))]
               for m, t in report.timing.items()]
    put("timing.csv", _csv(t_rows))
    return written


NONDETERMINISTIC_FILES = ("timing.json", "timing.csv")
