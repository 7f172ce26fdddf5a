"""Report serialization: schema-versioned JSON and a Markdown rendering.

The report is a plain dict (schema ``report_version: 1``) produced by
``pipeline.run_analysis``. JSON is the canonical form: keys are emitted
sorted, floats use shortest-roundtrip repr, and a report parsed back from
its own JSON re-emits byte-identically. Markdown renders the same numbers
rounded to 3 decimals (Python ``format`` rounding) for human reading.
"""

from __future__ import annotations

import json

REPORT_VERSION = 1

_SECTION_ORDER = (
    "deltae",
    "ccm",
    "indices",
    "icc",
    "bland_altman",
    "anova",
    "sensitivity",
)


def to_json(report):
    """Canonical JSON form: sorted keys, 2-space indent, trailing newline."""
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


def from_json(text):
    return json.loads(text)


def _fmt(value, digits=3):
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, (int,)):
        return str(value)
    return f"{value:.{digits}f}"


def _table(header, rows):
    lines = ["| " + " | ".join(header) + " |"]
    lines.append("|" + "|".join(" --- " for _ in header) + "|")
    for row in rows:
        lines.append("| " + " | ".join(row) + " |")
    return lines


def _skipped(section):
    return not section or section.get("status") != "ok"


def to_markdown(report):
    """Human-readable rendering of the report (numbers at 3 decimals)."""
    lines = ["# Inter-device reliability report", ""]
    tool = report.get("tool", {})
    cfg = report.get("config", {})
    lines += [
        f"- tool: {tool.get('name', '?')} {tool.get('version', '?')}",
        f"- report version: {report.get('report_version')}",
        f"- reference device: {cfg.get('reference_device', '?')}",
        f"- seed: {cfg.get('seed')}",
        f"- folds: {cfg.get('folds')}",
        f"- clinical Delta E threshold: {_fmt(cfg.get('threshold'))}",
        "",
    ]

    dataset = report.get("dataset", {})
    lines += ["## Dataset characterization", ""]
    rows = []
    for dev in sorted(dataset.get("devices", {})):
        d = dataset["devices"][dev]
        rows.append(
            [
                dev,
                str(d["n_records"]),
                str(d["n_subjects"]),
                _fmt(d["mean_lab"][0]),
                _fmt(d["mean_lab"][1]),
                _fmt(d["mean_lab"][2]),
            ]
        )
    lines += _table(
        ["Device", "Records", "Subjects", "Mean L*", "Mean a*", "Mean b*"], rows
    )
    lines.append("")

    deltae = report.get("deltae", {})
    lines += ["## Inter-device color difference (CIEDE2000)", ""]
    if _skipped(deltae):
        lines += ["_skipped_", ""]
    else:
        rows = []
        for pair in sorted(deltae["pairs"]):
            p = deltae["pairs"][pair]
            rows.append(
                [
                    pair.replace("_vs_", " vs "),
                    _fmt(p["mean"]),
                    _fmt(p["std"]),
                    _fmt(p["median"]),
                    _fmt(p["p95"]),
                    _fmt(p["acceptable_fraction"]),
                ]
            )
        lines += _table(
            ["Device pair", "Mean", "Std", "Median", "95th %ile", "Fraction < threshold"],
            rows,
        )
        pooled = deltae.get("pooled_vs_reference")
        if pooled:
            lines += [
                "",
                f"Pooled vs reference: mean {_fmt(pooled['mean'])}, "
                f"fraction below threshold {_fmt(pooled['acceptable_fraction'])} "
                f"(n = {pooled['n']})",
            ]
        lines.append("")

    ccm = report.get("ccm", {})
    lines += ["## Color correction (cross-validated)", ""]
    if _skipped(ccm):
        lines += ["_skipped_", ""]
    else:
        rows = []
        for pair in sorted(ccm["pairs"]):
            cv = ccm["pairs"][pair]["cv"]
            rows.append(
                [
                    pair.replace("_to_", " -> "),
                    f"{_fmt(cv['before_delta_e_mean'])} ± {_fmt(cv['before_delta_e_std'])}",
                    f"{_fmt(cv['after_delta_e_mean'])} ± {_fmt(cv['after_delta_e_std'])}",
                    f"{_fmt(cv['improvement_pct'], 1)}%",
                ]
            )
        lines += _table(
            ["Transformation", "Delta E before", "Delta E after", "Improvement"], rows
        )
        lines.append("")

    indices = report.get("indices", {})
    lines += ["## Clinical indices", ""]
    if _skipped(indices):
        lines += ["_skipped_", ""]
    else:
        rows = []
        for dev in sorted(indices["per_device"]):
            d = indices["per_device"][dev]
            rows.append(
                [
                    dev,
                    f"{_fmt(d['melanin_index_mean'])} ± {_fmt(d['melanin_index_std'])}",
                    f"{_fmt(d['erythema_index_mean'])} ± {_fmt(d['erythema_index_std'])}",
                    f"{_fmt(d['ita_mean'])} ± {_fmt(d['ita_std'])}",
                    str(d["n_ita_degenerate"]),
                ]
            )
        lines += _table(
            ["Device", "Melanin Index", "Erythema Index", "ITA (deg)", "Degenerate ITA"],
            rows,
        )
        lines += ["", f"Values based on: {indices.get('based_on', 'raw')} colors", ""]

    icc = report.get("icc", {})
    lines += ["## Inter-device agreement (ICC)", ""]
    if _skipped(icc):
        lines += ["_skipped_", ""]
    else:
        rows = []
        for measure in (
            "melanin_index",
            "erythema_index",
            "ita",
            "l_star",
            "a_star",
            "b_star",
        ):
            if measure not in icc["measures"]:
                continue
            m = icc["measures"][measure]
            rows.append(
                [
                    measure,
                    _fmt(m["icc"]),
                    f"[{_fmt(m['ci_low'])}, {_fmt(m['ci_high'])}]",
                    m["interpretation"],
                ]
            )
        lines += _table(["Measure", f"ICC ({icc['form']})", "95% CI", "Interpretation"], rows)
        lines += [
            "",
            f"Targets: {icc['n_targets']} (subject, region) cells, "
            f"{icc['k_raters']} devices; incomplete cells dropped: "
            f"{icc['n_incomplete_dropped']}; based on {icc.get('based_on', 'raw')} colors",
            "",
        ]

    ba = report.get("bland_altman", {})
    lines += ["## Bland-Altman limits of agreement", ""]
    if _skipped(ba):
        lines += ["_skipped_", ""]
    else:
        rows = []
        for pair in sorted(ba["pairs"]):
            for channel in ("l_star", "a_star", "b_star"):
                c = ba["pairs"][pair][channel]
                rows.append(
                    [
                        pair.replace("_vs_", " vs "),
                        channel,
                        _fmt(c["bias"]),
                        _fmt(c["loa_low"]),
                        _fmt(c["loa_high"]),
                    ]
                )
        lines += _table(["Pair (x vs y)", "Channel", "Bias", "LoA low", "LoA high"], rows)
        lines.append("")

    anova = report.get("anova", {})
    lines += ["## Variance decomposition (one-way ANOVA on Delta E)", ""]
    if _skipped(anova):
        lines += ["_skipped_", ""]
    else:
        rows = []
        for row, adj, sig in zip(
            anova["rows"],
            anova["bonferroni"]["adjusted_p"],
            anova["bonferroni"]["significant"],
        ):
            f_text = "inf" if row["f_statistic"] is None else _fmt(row["f_statistic"], 2)
            rows.append(
                [
                    row["factor"],
                    f_text,
                    _fmt(row["p_value"], 4),
                    _fmt(row["eta_squared"]),
                    row["effect_size"],
                    f"{'yes' if sig else 'no'} (adj p = {_fmt(adj, 4)})",
                ]
            )
        lines += _table(
            ["Factor", "F", "p", "eta^2", "Effect size", "Significant (Bonferroni)"],
            rows,
        )
        lines.append("")

    sens = report.get("sensitivity", {})
    lines += ["## ITA sensitivity at the cohort mean color", ""]
    if _skipped(sens):
        lines += ["_skipped_", ""]
    else:
        lab = sens["at_lab"]
        lines += [
            f"- operating point: L* = {_fmt(lab[0])}, a* = {_fmt(lab[1])}, b* = {_fmt(lab[2])}",
            f"- d(ITA)/dL*: {_fmt(sens['d_ita_d_l_deg'])} deg per L* unit",
            f"- d(ITA)/db*: {_fmt(sens['d_ita_d_b_deg'])} deg per b* unit "
            f"({_fmt(sens['d_ita_d_b_rad'], 4)} rad per unit)",
            f"- predicted ITA shift for a 1-unit b* error: "
            f"{_fmt(sens['ita_error_for_unit_b'])} deg",
            "",
        ]

    return "\n".join(lines)
