"""Command-line interface.

Subcommands: ``convert``, ``deltae``, ``ccm fit|apply|crossval``,
``indices``, ``icc``, ``bland-altman``, ``anova``, ``sensitivity``,
``simulate`` and ``report`` (the full pipeline). A flat config file may
supply defaults (pass ``--config`` or set ``DERMACAL_CONFIG``); explicit
flags always win over config values, which win over built-in defaults.

Exit codes: 0 success, 1 validation error (bad flags, bad input data),
2 analysis infeasibility (e.g. zero pairs), 3 I/O error.
"""

from __future__ import annotations

import csv
import json
import sys

import click
import numpy as np

from ._version import __version__
from .calibration import Ccm, ccm_apply, crossval_ccm, fit_ccm, pair_records, samples_as_arrays
from .clinical import erythema_index, ita, ita_degenerate, ita_sensitivity, melanin_index
from .colorspace import srgb_decode, srgb_encode, srgb_to_lab
from .config import (
    cohort_config_from,
    device_models_from,
    parse_flat_config,
    run_defaults_from,
)
from .errors import AnalysisInfeasibleError, ValidationError
from .pipeline import ALL_ANALYSES, RunConfig, ingest_inputs, run_analysis, write_outputs
from .records import PatchRecord, write_patch_csv
from .report import to_json, to_markdown
from .simulate import default_cohort_config, default_device_models, generate_cohort


def _emit(text, out=None):
    if out:
        with open(out, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        click.echo(text, nl=not text.endswith("\n"))


def _json_text(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


@click.group()
@click.version_option(version=__version__, prog_name="dermacal")
@click.option(
    "--config",
    "config_path",
    envvar="DERMACAL_CONFIG",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Flat key-value config file supplying defaults (env: DERMACAL_CONFIG).",
)
@click.pass_context
def cli(ctx, config_path):
    """Multi-device skin colorimetry toolkit."""
    ctx.obj = parse_flat_config(config_path) if config_path else {}


def _resolved(ctx, key, flag_value, fallback):
    if flag_value is not None:
        return flag_value
    defaults = run_defaults_from(ctx.obj or {})
    return defaults.get(key, fallback)


def _run_config(ctx, inputs, reference_device, folds=None, seed=None, threshold=None,
                analyses=None, out_dir=None, output_format=None):
    reference = _resolved(ctx, "reference_device", reference_device, None)
    if reference is None:
        raise ValidationError("a reference device is required (--reference-device)")
    if analyses is not None and not isinstance(analyses, tuple):
        analyses = tuple(a.strip() for a in analyses.split(",") if a.strip())
    return RunConfig(
        inputs=tuple(inputs),
        reference_device=str(reference),
        folds=int(_resolved(ctx, "folds", folds, 5)),
        seed=int(_resolved(ctx, "seed", seed, 42)),
        threshold=float(_resolved(ctx, "threshold", threshold, 2.0)),
        analyses=analyses if analyses is not None else tuple(
            _resolved(ctx, "analyses", None, ALL_ANALYSES)
        ),
        out_dir=str(_resolved(ctx, "out_dir", out_dir, ".")),
        output_format=str(_resolved(ctx, "format", output_format, "both")),
    )


_input_option = click.option(
    "--input",
    "inputs",
    multiple=True,
    required=True,
    type=click.Path(exists=True, dir_okay=False),
    help="Patch CSV file (repeatable).",
)
_out_option = click.option("--out", default=None, type=click.Path(dir_okay=False),
                           help="Output file (default: stdout).")


@cli.command()
@_input_option
@_out_option
def convert(inputs, out):
    """Convert patch records to CIELAB (CSV: ...,l,a,b)."""
    records = ingest_inputs(inputs)
    lab = srgb_to_lab(np.array([r.rgb for r in records]))
    lines = ["subject_id,device,region,angle,l,a,b"]
    for rec, row in zip(records, lab):
        lines.append(
            f"{rec.subject_id},{rec.device},{rec.region},{rec.angle},"
            f"{row[0]!r},{row[1]!r},{row[2]!r}"
        )
    _emit("\n".join(lines) + "\n", out)


@cli.command()
@_input_option
@click.option("--reference-device", default=None)
@click.option("--threshold", type=float, default=None)
@_out_option
@click.pass_context
def deltae(ctx, inputs, reference_device, threshold, out):
    """Per-pair CIEDE2000 statistics (pre-correction)."""
    cfg = _run_config(ctx, inputs, reference_device, threshold=threshold,
                      analyses=("deltae",))
    report = run_analysis(cfg, ingest_inputs(inputs))
    _emit(_json_text(report["deltae"]), out)


@cli.group()
def ccm():
    """Fit, apply, or cross-validate a color correction matrix."""


@ccm.command("fit")
@_input_option
@click.option("--source-device", required=True)
@click.option("--reference-device", default=None)
@_out_option
@click.pass_context
def ccm_fit(ctx, inputs, source_device, reference_device, out):
    """Fit a CCM from paired records and emit it as JSON."""
    reference = _resolved(ctx, "reference_device", reference_device, None)
    if reference is None:
        raise ValidationError("a reference device is required (--reference-device)")
    records = ingest_inputs(inputs)
    samples, dropped = pair_records(records, source_device, str(reference))
    if not samples:
        raise AnalysisInfeasibleError(
            f"no pairs between {source_device!r} and {reference!r}"
        )
    src, ref = samples_as_arrays(samples)
    fitted = fit_ccm(src, ref)
    payload = fitted.to_dict()
    payload["near_singular"] = fitted.is_near_singular
    payload["n_samples"] = len(samples)
    payload["n_dropped"] = dropped
    _emit(_json_text(payload), out)


@ccm.command("apply")
@_input_option
@click.option("--ccm", "ccm_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="CCM JSON produced by 'ccm fit'.")
@click.option("--source-device", required=True, help="Device whose records are corrected.")
@_out_option
def ccm_apply_cmd(inputs, ccm_path, source_device, out):
    """Apply a stored CCM to one device's records (writes a patch CSV)."""
    with open(ccm_path, encoding="utf-8") as handle:
        stored = Ccm.from_dict(json.load(handle))
    records = ingest_inputs(inputs)
    corrected = []
    for rec in records:
        if rec.device != source_device:
            corrected.append(rec)
            continue
        linear = ccm_apply(stored, srgb_decode(rec.rgb))
        srgb = srgb_encode(linear)
        corrected.append(
            PatchRecord(rec.subject_id, rec.device, rec.region, rec.angle,
                        tuple(float(v) for v in srgb))
        )
    if out:
        write_patch_csv(corrected, out)
    else:
        lines = ["subject_id,device,region,angle,r,g,b"]
        for rec in corrected:
            lines.append(
                f"{rec.subject_id},{rec.device},{rec.region},{rec.angle},"
                f"{rec.rgb[0]!r},{rec.rgb[1]!r},{rec.rgb[2]!r}"
            )
        _emit("\n".join(lines) + "\n", None)


@ccm.command("crossval")
@_input_option
@click.option("--source-device", required=True)
@click.option("--reference-device", default=None)
@click.option("--folds", type=int, default=None)
@click.option("--seed", type=int, default=None)
@_out_option
@click.pass_context
def ccm_crossval(ctx, inputs, source_device, reference_device, folds, seed, out):
    """Subject-grouped k-fold cross-validation of a CCM fit."""
    reference = _resolved(ctx, "reference_device", reference_device, None)
    if reference is None:
        raise ValidationError("a reference device is required (--reference-device)")
    records = ingest_inputs(inputs)
    samples, _ = pair_records(records, source_device, str(reference))
    if not samples:
        raise AnalysisInfeasibleError(
            f"no pairs between {source_device!r} and {reference!r}"
        )
    report = crossval_ccm(
        samples,
        k=int(_resolved(ctx, "folds", folds, 5)),
        seed=int(_resolved(ctx, "seed", seed, 42)),
    )
    _emit(_json_text(report.to_dict()), out)


@cli.command()
@_input_option
@_out_option
def indices(inputs, out):
    """Per-record clinical indices (CSV)."""
    records = ingest_inputs(inputs)
    lab = srgb_to_lab(np.array([r.rgb for r in records]))
    mi = melanin_index(lab)
    ei = erythema_index(lab)
    angle = ita(lab)
    degenerate = ita_degenerate(lab)
    lines = ["subject_id,device,region,angle,melanin_index,erythema_index,ita_degrees,ita_degenerate"]
    for rec, m, e, t, d in zip(records, mi, ei, angle, degenerate):
        lines.append(
            f"{rec.subject_id},{rec.device},{rec.region},{rec.angle},"
            f"{m!r},{e!r},{t!r},{str(bool(d)).lower()}"
        )
    _emit("\n".join(lines) + "\n", out)


@cli.command()
@_input_option
@click.option("--reference-device", default=None)
@click.option("--apply-ccm/--raw", "apply_correction", default=True,
              help="Correct consumer devices before computing agreement (default: on).")
@_out_option
@click.pass_context
def icc(ctx, inputs, reference_device, apply_correction, out):
    """Inter-device ICC per clinical index and Lab channel."""
    analyses = ("ccm", "icc") if apply_correction else ("icc",)
    cfg = _run_config(ctx, inputs, reference_device, analyses=analyses)
    report = run_analysis(cfg, ingest_inputs(inputs))
    _emit(_json_text(report["icc"]), out)


@cli.command("bland-altman")
@_input_option
@click.option("--reference-device", default=None)
@_out_option
@click.pass_context
def bland_altman_cmd(ctx, inputs, reference_device, out):
    """Bland-Altman bias and limits of agreement per channel and pair."""
    cfg = _run_config(ctx, inputs, reference_device, analyses=("bland_altman",))
    report = run_analysis(cfg, ingest_inputs(inputs))
    _emit(_json_text(report["bland_altman"]), out)


@cli.command()
@_input_option
@click.option("--reference-device", default=None)
@_out_option
@click.pass_context
def anova(ctx, inputs, reference_device, out):
    """One-way ANOVA of inter-device Delta E by region/device/angle."""
    cfg = _run_config(ctx, inputs, reference_device, analyses=("anova",))
    report = run_analysis(cfg, ingest_inputs(inputs))
    _emit(_json_text(report["anova"]), out)


@cli.command()
@click.option("--input", "inputs", multiple=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Patch CSV; sensitivity is evaluated at the cohort mean.")
@click.option("--lab", "lab_text", default=None,
              help="Explicit CIELAB point 'L,a,b' instead of --input.")
@_out_option
def sensitivity(inputs, lab_text, out):
    """Closed-form ITA error sensitivities at a CIELAB operating point."""
    if lab_text is not None:
        parts = [p.strip() for p in lab_text.split(",")]
        if len(parts) != 3:
            raise ValidationError("--lab expects three comma-separated numbers")
        try:
            point = np.array([float(p) for p in parts])
        except ValueError:
            raise ValidationError(f"--lab is not numeric: {lab_text!r}")
    elif inputs:
        records = ingest_inputs(inputs)
        point = srgb_to_lab(np.array([r.rgb for r in records])).mean(axis=0)
    else:
        raise ValidationError("pass --lab or at least one --input")
    sens = ita_sensitivity(point)
    payload = {
        "at_lab": [float(v) for v in point],
        "d_ita_d_l_deg": float(sens.d_ita_d_l),
        "d_ita_d_b_deg": float(sens.d_ita_d_b),
        "d_ita_d_l_rad": float(np.radians(sens.d_ita_d_l)),
        "d_ita_d_b_rad": float(np.radians(sens.d_ita_d_b)),
        "ita_error_for_unit_b": float(sens.predicted_ita_error(0.0, 1.0)),
    }
    _emit(_json_text(payload), out)


@cli.command()
@click.option("--subjects", type=int, default=None, help="Cohort size (default 200).")
@click.option("--seed", type=int, default=None, help="Master seed (default 42).")
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="Cohort CSV destination.")
@click.pass_context
def simulate(ctx, subjects, seed, out):
    """Generate a synthetic multi-device cohort CSV."""
    mapping = ctx.obj or {}
    if mapping:
        cfg = cohort_config_from(mapping, subject_count=subjects, seed=seed)
        models = device_models_from(mapping)
    else:
        cfg = default_cohort_config(
            subject_count=subjects if subjects is not None else 200,
            seed=seed if seed is not None else 42,
        )
        models = default_device_models()
    cohort = generate_cohort(cfg, models)
    write_patch_csv(cohort.records, out)
    click.echo(
        f"wrote {len(cohort.records)} records "
        f"({cfg.subject_count} subjects, seed {cfg.seed}) to {out}"
    )


@cli.command()
@_input_option
@click.option("--reference-device", default=None)
@click.option("--folds", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--threshold", type=float, default=None)
@click.option("--analyses", default=None,
              help="Comma-separated subset of: " + ", ".join(ALL_ANALYSES))
@click.option("--out-dir", default=None, type=click.Path(file_okay=False))
@click.option("--format", "output_format", default=None,
              type=click.Choice(["json", "markdown", "both"]))
@click.pass_context
def report(ctx, inputs, reference_device, folds, seed, threshold, analyses,
           out_dir, output_format):
    """Run the full analysis pipeline and write report files."""
    cfg = _run_config(ctx, inputs, reference_device, folds=folds, seed=seed,
                      threshold=threshold, analyses=analyses, out_dir=out_dir,
                      output_format=output_format)
    result = run_analysis(cfg, ingest_inputs(inputs))
    for path in write_outputs(result, cfg):
        click.echo(f"wrote {path}")


def main(argv=None):
    """Entry point with the documented exit-code mapping."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    except AnalysisInfeasibleError as exc:
        click.echo(f"infeasible: {exc}", err=True)
        sys.exit(2)
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        sys.exit(3)
    return 0


if __name__ == "__main__":
    main()
