"""Serialization of an experiment report: traces, tables and figure data.

Everything except the manifest timestamp is a pure function of the report, so
reruns with the same seed and config reproduce every byte.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import math
from pathlib import Path

from .. import __version__
from .design import CONDITIONS
from .experiment import (
    INTERFACES,
    PAIRS,
    SCENARIOS,
    TABLE_PARAMETERS,
    ExperimentReport,
    calibration_checks,
    deviations,
)

PARAMETER_LABELS = {
    "min_distance": "Average minimum distance to pedestrian (m)",
    "max_swa": "Average maximum steering wheel angle (deg)",
    "response_time": "Average response time of steering wheel angle (s)",
}
# test-selection markers used in table3.md
TEST_MARKERS = {"t_equal_var": "#", "t_welch": "##", "wilcoxon_signed_rank": "###", "t_paired": "####"}
STRONG_P = 0.01


class OutputError(OSError):
    def __init__(self, failures: dict[str, str]):
        self.failures = failures
        shown = list(failures.items())[:3]
        lines = "; ".join(f"{k}: {v}" for k, v in shown)
        more = f" (+{len(failures) - len(shown)} more)" if len(failures) > len(shown) else ""
        super().__init__(f"could not write {len(failures)} file(s): {lines}{more}")


def _num(v) -> str:
    if v is None:
        return ""
    v = float(v)
    return "" if math.isnan(v) else repr(v)


def _csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    return buf.getvalue()


def metrics_csv(report: ExperimentReport) -> str:
    rows = [[
        "trial_id", "subject_id", "condition_id", "position", "interface", "scenario",
        "avg_abs_slip_deg", "min_distance_m", "max_swa_deg", "response_time_s", "collided",
        "n_slip_samples", "reaction_time_s", "error",
    ]]
    for r in report.records:
        cond = CONDITIONS[r.condition_id]
        m = r.metrics
        rt = r.trace.meta.get("reaction_time") if r.trace is not None else None
        rows.append([
            r.trial_id, r.subject_id, r.condition_id, r.position, cond.interface.value, cond.scenario_label,
            _num(m and m.avg_abs_slip), _num(m and m.min_distance), _num(m and m.max_swa),
            _num(m and m.response_time), "" if m is None else int(m.collided),
            "" if m is None else m.n_slip_samples, _num(rt), r.error or "",
        ])
    return _csv(rows)


def marker(result) -> str:
    if result is None:
        return ""
    star = "*" if result.p_value < STRONG_P else ""
    return star + TEST_MARKERS.get(result.test_name, "")


def _fmt_p(cmp) -> str:
    if cmp.result is None:
        return "n/a"
    return f"{cmp.p_value:.3f}{marker(cmp.result)}"


def table2_md(report: ExperimentReport) -> str:
    scen = list(SCENARIOS)
    out = [
        "# Interface comparison (means over subjects)",
        "",
        "| Parameter | Interface | " + " | ".join(s.capitalize() for s in scen) + " |",
        "|---|---|" + "---|" * len(scen),
    ]
    for param in TABLE_PARAMETERS:
        for i, itf in enumerate(INTERFACES):
            cells = []
            for s in scen:
                c = report.table2[(s, param, itf)]
                cells.append("n/a" if c.n == 0 else f"{c.mean:.2f} SD {c.sd:.2f} (n={c.n})")
            out.append(f"| {PARAMETER_LABELS[param] if i == 0 else ''} | {itf.label} | " + " | ".join(cells) + " |")
    out.append("")
    return "\n".join(out)


def _matrix(get) -> list[str]:
    names = [i.label for i in INTERFACES]
    rows = ["| | " + " | ".join(names) + " |", "|---|" + "---|" * len(names)]
    for a in INTERFACES:
        cells = []
        for b in INTERFACES:
            cells.append("-" if a is b else get(a, b))
        rows.append(f"| {a.label} | " + " | ".join(cells) + " |")
    return rows


def _pair_lookup(table: dict, prefix: tuple):
    def get(a, b):
        key = prefix + ((a, b) if (a, b) in PAIRS else (b, a))
        return _fmt_p(table[key])

    return get


def table3_md(report: ExperimentReport) -> str:
    out = ["# Pairwise significance of interface differences", ""]
    for scen in SCENARIOS:
        out.append(f"## Pedestrian scenario: {scen}")
        out.append("")
        for param in TABLE_PARAMETERS:
            out.append(f"### {PARAMETER_LABELS[param]}")
            out.append("")
            out += _matrix(_pair_lookup(report.table3, (scen, param)))
            out.append("")
    out.append("## Average absolute slip angle, per-subject means over both scenarios")
    out.append("")
    out += _matrix(lambda a, b: _fmt_p(report.slip_comparisons[(a, b) if (a, b) in PAIRS else (b, a)]))
    out.append("")
    cw = report.crosswalk_comparison
    out.append(f"Crosswalk vs no crosswalk (per-subject slip over all interfaces): p = {_fmt_p(cw)}")
    out.append("")
    notes = [
        f"- {c.label} {c.group_a} vs {c.group_b}: {c.note}"
        for c in list(report.table3.values()) + list(report.slip_comparisons.values()) + [cw]
        if c.note
    ]
    if notes:
        out += ["Notes:", ""] + notes + [""]
    out += [
        "Markers: * p < 0.01; # t-test for equal variances; ## t-test for unequal variances; "
        "### Wilcoxon signed-rank test.",
        "",
    ]
    return "\n".join(out)


def fig4_csv(report: ExperimentReport) -> str:
    rows = [["interface", "n", "min", "q1", "median", "q3", "max"]]
    for itf in INTERFACES:
        if itf not in report.fig4:
            continue
        f = report.fig4[itf]
        rows.append([itf.value, len(report.slip_by_subject[itf])] + [_num(f[k]) for k in ("min", "q1", "median", "q3", "max")])
    return _csv(rows)


def fig5_csv(report: ExperimentReport) -> str:
    rows = [["scenario", "interface", "t", "x", "y"]]
    for scen in SCENARIOS:
        for itf in INTERFACES:
            if (scen, itf) not in report.fig5:
                continue
            t, x, y = report.fig5[(scen, itf)]
            rows += [[scen, itf.value, _num(a), _num(b), _num(c)] for a, b, c in zip(t, x, y)]
    return _csv(rows)


def fig6_csv(report: ExperimentReport) -> str:
    rows = [["scenario", "interface", "t", "ay"]]
    for scen in SCENARIOS:
        for itf in INTERFACES:
            if (scen, itf) not in report.fig6:
                continue
            t, ay = report.fig6[(scen, itf)]
            rows += [[scen, itf.value, _num(a), _num(b)] for a, b in zip(t, ay)]
    return _csv(rows)


def _comparison_json(c):
    if c.result is None:
        return {"p_value": None, "test": None, "note": c.note}
    return {"p_value": c.result.p_value, "test": c.result.test_name, "provenance": [list(x) for x in c.result.provenance]}


def manifest(report: ExperimentReport, files: dict[str, str], timestamp: str | None = None) -> str:
    checks = calibration_checks(report)
    body = {
        "package_version": __version__,
        "master_seed": report.plan.master_seed,
        "config_sha256": report.config.digest(),
        "epoch": report.config.analysis.epoch,
        "n_trials": len(report.records),
        "calibration_checks": checks,
        "deviations": deviations(checks),
        "slip_comparisons": {f"{a.value}_vs_{b.value}": _comparison_json(c) for (a, b), c in report.slip_comparisons.items()},
        "crosswalk_comparison": _comparison_json(report.crosswalk_comparison),
        "failures": report.failures,
        "files_sha256": files,
        "timestamp": timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    return json.dumps(body, indent=2, sort_keys=True) + "\n"


def emit_outputs(report: ExperimentReport, out_dir, timestamp: str | None = None) -> list[Path]:
    """Write every output file under ``out_dir``; I/O failures are collected per file."""
    out = Path(out_dir)
    contents: dict[str, str] = {}
    for r in report.records:
        if r.trace is not None:
            contents[f"traces/{r.trial_id}.csv"] = r.trace.to_csv()
    contents["metrics.csv"] = metrics_csv(report)
    contents["table2.md"] = table2_md(report)
    contents["table3.md"] = table3_md(report)
    contents["fig4_boxplot.csv"] = fig4_csv(report)
    contents["fig5_trajectories.csv"] = fig5_csv(report)
    contents["fig6_lateral_accel.csv"] = fig6_csv(report)
    hashes = {k: hashlib.sha256(v.encode()).hexdigest() for k, v in sorted(contents.items())}
    contents["manifest.json"] = manifest(report, hashes, timestamp)

    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError({str(out): str(exc)}) from exc
    failures, written = {}, []
    for rel, text in contents.items():
        path = out / rel
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text)
            written.append(path)
        except OSError as exc:
            failures[rel] = str(exc)
    if failures:
        raise OutputError(failures)
    return written
