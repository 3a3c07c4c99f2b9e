use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use cbci::data_model::{
    encode, load_csv, minmax_scale, read_header, split_groups, RawDataset, SchemaConfig,
};
use cbci::evaluation::{MethodOutcome, Score};
use cbci::imputation::{
    finish_imputation, match_nearest, run_pipeline, ClassifyOutcome, PipelineRun, ResolvedConfig,
    TargetOutcome, TargetReport,
};
use cbci::mapping::{distance_full, distance_full_to_mean, distance_masked_to_mean};
use cbci::{
    classify_dataset, evaluate_methods, impute_dataset, DatasetF64, MaskSpec, PipelineConfigF64,
};

use crate::args::{self, Cli, Command, EvalArgs, RunArgs};
use crate::report::{fmt6, sanitize, Doc};

pub fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Impute(mut a) => {
            a.merge_config()?;
            cmd_impute(a)
        }
        Command::Trace(mut a) => {
            a.merge_config()?;
            cmd_trace(a)
        }
        Command::Classify(mut a) => {
            a.merge_config()?;
            cmd_classify(a)
        }
        Command::Evaluate(mut a) => {
            a.merge_config()?;
            cmd_evaluate(a)
        }
    }
}

/// Reads the schema sidecar and the CSV, encodes, and optionally scales.
fn load(input: &Path, schema_path: &Path, scale: bool) -> Result<(RawDataset, DatasetF64)> {
    let schema_text = fs::read_to_string(schema_path)
        .with_context(|| format!("cannot read schema file {}", schema_path.display()))?;
    let config = SchemaConfig::parse(&schema_text)
        .with_context(|| format!("schema file {}", schema_path.display()))?;
    let csv_bytes =
        fs::read(input).with_context(|| format!("cannot read input file {}", input.display()))?;
    let header = read_header(csv_bytes.as_slice())?;
    let (schema, _class_index) = config.resolve(&header)?;
    let raw = load_csv(csv_bytes.as_slice(), &schema)?;
    let mut ds: DatasetF64 = encode(&raw)?;
    if scale {
        ds = minmax_scale(&ds)?;
    }
    Ok((raw, ds))
}

fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(path) => fs::write(path, text)
            .with_context(|| format!("cannot write report to {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_output(raw: &RawDataset, ds: &DatasetF64, path: &Path) -> Result<()> {
    let mut bytes = Vec::new();
    cbci::data_model::write_csv(raw, ds, &mut bytes)?;
    fs::write(path, bytes).with_context(|| format!("cannot write output to {}", path.display()))
}

fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn annotate(v: usize, auto: bool) -> String {
    if auto {
        format!("{v} (auto)")
    } else {
        v.to_string()
    }
}

fn opt6(v: Option<f64>) -> String {
    v.map(fmt6).unwrap_or_else(|| "-".into())
}

fn render_resolved(doc: &mut Doc, resolved: Option<&ResolvedConfig>) {
    let Some(r) = resolved else { return };
    doc.kv("k", annotate(r.k, r.k_auto));
    doc.kv("neighbors", annotate(r.neighbor_count, r.neighbor_auto));
    doc.kv("init", &r.init);
    doc.kv("max_iter", r.max_iter);
    doc.kv("fill", &r.fill);
    doc.kv("top_k", r.top_k);
    doc.kv("predict", r.predict);
    doc.kv("iterations", r.iterations);
    doc.kv("converged", r.converged);
}

fn render_warnings(doc: &mut Doc, warnings: &[String]) {
    if warnings.is_empty() {
        return;
    }
    doc.section("warnings");
    for w in warnings {
        doc.row([w.as_str()]);
    }
}

fn render_target(doc: &mut Doc, target: &TargetReport<f64>) {
    doc.section(&format!("target {}", target.record_id));
    if let Some(mapping) = &target.mapping {
        doc.kv("mapping_total", fmt6(mapping.total));
    }
    match &target.outcome {
        TargetOutcome::Imputed {
            ranking,
            filled,
            predicted_class,
        } => {
            doc.kv("status", "imputed");
            if let Some(best) = ranking.first() {
                doc.kv("donor", best.id);
                doc.kv("difference", fmt6(best.difference));
            }
            for cell in filled {
                doc.kv("filled", format!("{}={}", cell.column, cell.decoded));
            }
            if let Some(class) = predicted_class {
                doc.kv("predicted_class", class);
            }
        }
        TargetOutcome::Failed { reason } => {
            doc.kv("status", "failed");
            doc.kv("reason", reason);
        }
    }
}

/// Decoded view of every record, missing cells shown as `?`.
fn render_rows_table(doc: &mut Doc, ds: &DatasetF64) -> Result<()> {
    let mut header = vec!["id".to_string()];
    header.extend(ds.schema.attributes.iter().map(|a| a.name.clone()));
    header.push(ds.schema.class_attribute.clone());
    doc.row(header);
    for rec in &ds.records {
        let mut cells = vec![rec.id.to_string()];
        for (column, v) in rec.values.iter().enumerate() {
            match v {
                Some(v) => cells.push(ds.decode_cell(column, *v)?),
                None => cells.push("?".into()),
            }
        }
        cells.push(rec.label.clone().unwrap_or_else(|| "?".into()));
        doc.row(cells);
    }
    Ok(())
}

fn cmd_impute(args: RunArgs) -> Result<u8> {
    let Some(output) = args.output.clone() else {
        bail!("impute requires --output (where to write the completed CSV)");
    };
    let pipeline = args.pipeline()?;
    let (raw, ds) = load(&args.input, &args.schema, args.scale)?;
    let (imputed, report) = impute_dataset(&ds, &pipeline)?;

    let mut doc = Doc::new();
    doc.section("config");
    doc.kv("command", "impute");
    doc.kv("input", args.input.display());
    doc.kv("schema", args.schema.display());
    doc.kv("output", output.display());
    doc.kv("scale", args.scale);
    render_resolved(&mut doc, report.resolved.as_ref());
    if args.timestamp {
        doc.kv("generated_at_unix", unix_now());
    }

    let split = split_groups(&ds);
    let imputed_count = report
        .targets
        .iter()
        .filter(|t| matches!(t.outcome, TargetOutcome::Imputed { .. }))
        .count();
    doc.section("summary");
    doc.kv("records", ds.m());
    doc.kv("complete", split.complete.len());
    doc.kv("incomplete", split.incomplete.len());
    doc.kv("imputed", imputed_count);
    doc.kv("failed", report.targets.len() - imputed_count);
    if let Some(note) = &report.note {
        doc.kv("note", note);
    }

    render_warnings(&mut doc, &report.warnings);
    for target in &report.targets {
        render_target(&mut doc, target);
    }

    doc.table("imputed_rows");
    render_rows_table(&mut doc, &imputed)?;

    emit(&doc.finish(), args.report.as_deref())?;
    write_output(&raw, &imputed, &output)?;

    Ok(if report.has_failures() { 2 } else { 0 })
}

fn cmd_trace(args: RunArgs) -> Result<u8> {
    let pipeline = args.pipeline()?;
    let (raw, ds) = load(&args.input, &args.schema, args.scale)?;
    let run = run_pipeline(&ds, &pipeline)?;
    let (imputed, report) = finish_imputation(&run, &ds, &pipeline)?;

    let mut doc = Doc::new();
    doc.section("config");
    doc.kv("command", "trace");
    doc.kv("input", args.input.display());
    doc.kv("schema", args.schema.display());
    if let Some(output) = &args.output {
        doc.kv("output", output.display());
    }
    doc.kv("scale", args.scale);
    render_resolved(&mut doc, report.resolved.as_ref());
    if args.timestamp {
        doc.kv("generated_at_unix", unix_now());
    }

    render_warnings(&mut doc, &report.warnings);
    render_trace_tables(&mut doc, &ds, &run)?;

    for target in &report.targets {
        render_donor_ranking(&mut doc, target, &run);
        render_target(&mut doc, target);
    }

    doc.table("imputed_rows");
    render_rows_table(&mut doc, &imputed)?;

    emit(&doc.finish(), args.report.as_deref())?;
    if let Some(output) = &args.output {
        write_output(&raw, &imputed, output)?;
    }

    Ok(if report.has_failures() { 2 } else { 0 })
}

/// Every intermediate quantity of the run, one table per stage.
fn render_trace_tables(doc: &mut Doc, ds: &DatasetF64, run: &PipelineRun<f64>) -> Result<()> {
    doc.table("group_split");
    doc.row(["id", "group"]);
    for rec in &ds.records {
        doc.row([
            rec.id.to_string(),
            if rec.is_complete() { "complete" } else { "incomplete" }.into(),
        ]);
    }

    doc.table("cluster_means");
    let mut header = vec!["cluster".to_string()];
    header.extend(ds.schema.attributes.iter().map(|a| a.name.clone()));
    doc.row(header);
    for (c, mean) in run.model.means.iter().enumerate() {
        let mut row = vec![c.to_string()];
        row.extend(mean.iter().map(|v| fmt6(*v)));
        doc.row(row);
    }

    doc.table("clusters");
    doc.row(["cluster", "size", "members"]);
    for (c, members) in run.model.members.iter().enumerate() {
        let ids = members
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(" ");
        doc.row([c.to_string(), members.len().to_string(), ids]);
    }

    let cluster_header = |doc: &mut Doc| {
        let mut header = vec!["id".to_string()];
        header.extend((0..run.k).map(|c| format!("cluster_{c}")));
        doc.row(header);
    };

    doc.table("cluster_distances_g1");
    cluster_header(doc);
    for rec in &run.split.complete {
        let mut row = vec![rec.id.to_string()];
        for mean in &run.model.means {
            row.push(fmt6(distance_full_to_mean(&rec.values, mean)?));
        }
        doc.row(row);
    }

    doc.table("type1");
    doc.row(["id", "sum"]);
    for entry in &run.g1_entries {
        doc.row([entry.record_id.to_string(), fmt6(entry.cluster_sum)]);
    }

    let mapped: Vec<&cbci::mapping::MappingEntry<f64>> = run
        .g2_entries
        .iter()
        .filter_map(|(_, entry)| entry.as_ref().ok())
        .collect();

    doc.table("cluster_distances_g2");
    cluster_header(doc);
    for entry in &mapped {
        let rec = ds
            .record(entry.record_id)
            .ok_or_else(|| anyhow!("record {} vanished from the dataset", entry.record_id))?;
        let mut row = vec![rec.id.to_string()];
        for mean in &run.model.means {
            row.push(fmt6(distance_masked_to_mean(&rec.values, mean)?));
        }
        doc.row(row);
    }

    doc.table("type2");
    doc.row(["id", "sum"]);
    for entry in &mapped {
        doc.row([entry.record_id.to_string(), fmt6(entry.cluster_sum)]);
    }

    for (c, members) in run.model.members.iter().enumerate() {
        doc.table(&format!("pairwise_cluster_{c}"));
        doc.row(["id_a", "id_b", "distance"]);
        let mut ids = members.clone();
        ids.sort_unstable();
        for (i, &a) in ids.iter().enumerate() {
            for &b in &ids[i + 1..] {
                let ra = ds.record(a).ok_or_else(|| anyhow!("record {a} vanished"))?;
                let rb = ds.record(b).ok_or_else(|| anyhow!("record {b} vanished"))?;
                doc.row([
                    a.to_string(),
                    b.to_string(),
                    fmt6(distance_full(&ra.values, &rb.values)?),
                ]);
            }
        }
    }

    let neighbor_table = |doc: &mut Doc, name: &str, entries: &[&cbci::mapping::MappingEntry<f64>]| {
        doc.table(name);
        doc.row(["id", "rank", "neighbor", "distance"]);
        for entry in entries {
            for (i, nb) in entry.neighbors.iter().enumerate() {
                doc.row([
                    entry.record_id.to_string(),
                    (i + 1).to_string(),
                    nb.id.to_string(),
                    fmt6(nb.distance),
                ]);
            }
        }
    };
    let mapping_table = |doc: &mut Doc, name: &str, entries: &[&cbci::mapping::MappingEntry<f64>]| {
        doc.table(name);
        doc.row(["id", "cluster_sum", "neighbor_distances", "total"]);
        for entry in entries {
            let distances = if entry.neighbors.is_empty() {
                "-".to_string()
            } else {
                entry
                    .neighbors
                    .iter()
                    .map(|nb| fmt6(nb.distance))
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            doc.row([
                entry.record_id.to_string(),
                fmt6(entry.cluster_sum),
                distances,
                fmt6(entry.total),
            ]);
        }
    };

    let g1: Vec<&cbci::mapping::MappingEntry<f64>> = run.g1_entries.iter().collect();
    neighbor_table(doc, "neighbors_g1", &g1);
    mapping_table(doc, "final_mapping_g1", &g1);
    neighbor_table(doc, "neighbors_g2", &mapped);
    mapping_table(doc, "final_mapping_g2", &mapped);
    Ok(())
}

fn render_donor_ranking(doc: &mut Doc, target: &TargetReport<f64>, run: &PipelineRun<f64>) {
    // Failed targets may still have matched donors (the failure can come
    // later, in the fill step), so recompute the ranking for them.
    let recomputed;
    let ranking = match &target.outcome {
        TargetOutcome::Imputed { ranking, .. } => ranking,
        TargetOutcome::Failed { .. } => {
            let Some(mapping) = &target.mapping else {
                return;
            };
            match match_nearest(mapping.total, &run.g1_entries) {
                Ok(r) => {
                    recomputed = r;
                    &recomputed
                }
                Err(_) => return,
            }
        }
    };
    doc.table(&format!("donor_ranking_{}", target.record_id));
    doc.row(["rank", "donor", "donor_total", "difference"]);
    for (i, candidate) in ranking.iter().enumerate() {
        doc.row([
            (i + 1).to_string(),
            candidate.id.to_string(),
            fmt6(candidate.total),
            fmt6(candidate.difference),
        ]);
    }
}

fn cmd_classify(args: RunArgs) -> Result<u8> {
    let Some(output) = args.output.clone() else {
        bail!("classify requires --output (where to write the labeled CSV)");
    };
    let pipeline = args.pipeline()?;
    let (raw, ds) = load(&args.input, &args.schema, args.scale)?;
    let (labeled, report) = classify_dataset(&ds, &pipeline)?;

    let mut doc = Doc::new();
    doc.section("config");
    doc.kv("command", "classify");
    doc.kv("input", args.input.display());
    doc.kv("schema", args.schema.display());
    doc.kv("output", output.display());
    doc.kv("scale", args.scale);
    render_resolved(&mut doc, report.resolved.as_ref());
    if args.timestamp {
        doc.kv("generated_at_unix", unix_now());
    }

    let predicted = report
        .targets
        .iter()
        .filter(|t| matches!(t.outcome, ClassifyOutcome::Predicted { .. }))
        .count();
    doc.section("summary");
    doc.kv("records", ds.m());
    doc.kv("unlabeled", report.targets.len());
    doc.kv("predicted", predicted);
    doc.kv("failed", report.targets.len() - predicted);
    if let Some(note) = &report.note {
        doc.kv("note", note);
    }

    render_warnings(&mut doc, &report.warnings);

    for target in &report.targets {
        doc.section(&format!("target {}", target.record_id));
        doc.kv(
            "mapped_as",
            if target.complete { "complete" } else { "incomplete" },
        );
        if let Some(mapping) = &target.mapping {
            doc.kv("mapping_total", fmt6(mapping.total));
        }
        match &target.outcome {
            ClassifyOutcome::Predicted { ranking, class } => {
                doc.kv("status", "predicted");
                if let Some(best) = ranking.first() {
                    doc.kv("donor", best.id);
                    doc.kv("difference", fmt6(best.difference));
                }
                doc.kv("class", class);
            }
            ClassifyOutcome::Failed { reason } => {
                doc.kv("status", "failed");
                doc.kv("reason", reason);
            }
        }
    }

    emit(&doc.finish(), args.report.as_deref())?;
    write_output(&raw, &labeled, &output)?;

    Ok(if report.has_failures() { 2 } else { 0 })
}

fn cmd_evaluate(args: EvalArgs) -> Result<u8> {
    let pipeline = args.pipeline()?;
    let methods = args::parse_methods(args.methods.as_deref())?;
    let Some(fraction) = args.fraction else {
        bail!("evaluate requires --fraction (share of observed cells to mask)");
    };
    let seed = args.seed.unwrap_or(0);
    let columns = args.columns.as_deref().map(args::parse_columns);
    let (_raw, ds) = load(&args.input, &args.schema, args.scale)?;

    // Scoring against masked cells only makes sense when the masked columns
    // start fully observed; otherwise recovered values have no ground truth
    // to be compared with.
    let eligible: Vec<usize> = match &columns {
        Some(names) => names
            .iter()
            .map(|name| {
                ds.schema
                    .attribute(name)
                    .map(|(i, _)| i)
                    .ok_or_else(|| anyhow!("unknown column {name:?}"))
            })
            .collect::<Result<_>>()?,
        None => (0..ds.schema.n()).collect(),
    };
    for rec in &ds.records {
        for &c in &eligible {
            if rec.values[c].is_none() {
                bail!(
                    "column {:?} already has a missing cell at record {}; evaluate needs fully observed columns (restrict with --columns)",
                    ds.schema.attributes[c].name,
                    rec.id
                );
            }
        }
    }

    let spec = MaskSpec {
        fraction,
        seed,
        eligible_columns: columns.clone(),
        max_per_record: args.max_per_record,
    };
    let report = evaluate_methods(&ds, &spec, &methods, &pipeline)?;

    let mut doc = Doc::new();
    doc.section("config");
    doc.kv("command", "evaluate");
    doc.kv("input", args.input.display());
    doc.kv("schema", args.schema.display());
    doc.kv("scale", args.scale);
    doc.kv("fraction", fmt6(report.fraction));
    doc.kv("seed", report.seed);
    doc.kv("rng", &report.rng);
    doc.kv(
        "columns",
        columns
            .as_ref()
            .map(|names| names.join(","))
            .unwrap_or_else(|| "all".into()),
    );
    doc.kv(
        "max_per_record",
        args.max_per_record
            .map(|v| v.to_string())
            .unwrap_or_else(|| "-".into()),
    );
    doc.kv(
        "methods",
        methods
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(","),
    );
    render_requested_pipeline(&mut doc, &pipeline);
    if args.timestamp {
        doc.kv("generated_at_unix", unix_now());
    }

    doc.section("summary");
    doc.kv("masked_cells", report.masked_cells);
    doc.kv("shortfall", report.shortfall);

    doc.table("metrics");
    doc.row([
        "method",
        "status",
        "cells",
        "numeric_count",
        "categorical_count",
        "numeric_rmse",
        "numeric_mae",
        "categorical_accuracy",
        "class_accuracy",
    ]);
    for outcome in &report.methods {
        match &outcome.outcome {
            Ok(score) => {
                let m = &score.metrics;
                doc.row([
                    outcome.method.to_string(),
                    "ok".into(),
                    score.cells.len().to_string(),
                    m.numeric_count.to_string(),
                    m.categorical_count.to_string(),
                    opt6(m.numeric_rmse),
                    opt6(m.numeric_mae),
                    opt6(m.categorical_accuracy),
                    opt6(m.class_accuracy),
                ]);
            }
            Err(_) => {
                let dash = || "-".to_string();
                doc.row([
                    outcome.method.to_string(),
                    "error".into(),
                    dash(),
                    dash(),
                    dash(),
                    dash(),
                    dash(),
                    dash(),
                    dash(),
                ]);
            }
        }
    }

    let failures: Vec<&MethodOutcome<f64>> = report
        .methods
        .iter()
        .filter(|m| m.outcome.is_err())
        .collect();
    if !failures.is_empty() {
        doc.section("method_errors");
        for outcome in &failures {
            if let Err(reason) = &outcome.outcome {
                doc.kv(&outcome.method.to_string(), reason);
            }
        }
    }

    for outcome in &report.methods {
        if let Ok(score) = &outcome.outcome {
            render_method_details(&mut doc, &outcome.method.to_string(), score);
        }
    }

    emit(&doc.finish(), args.report.as_deref())?;
    Ok(if failures.is_empty() { 0 } else { 2 })
}

fn render_requested_pipeline(doc: &mut Doc, pipeline: &PipelineConfigF64) {
    doc.kv(
        "k",
        pipeline
            .k
            .map(|k| k.to_string())
            .unwrap_or_else(|| "auto".into()),
    );
    doc.kv(
        "neighbors",
        pipeline
            .neighbor_count
            .map(|d| d.to_string())
            .unwrap_or_else(|| "auto".into()),
    );
    doc.kv("init", &pipeline.init);
    doc.kv("max_iter", pipeline.max_iter);
    doc.kv("fill", pipeline.fill);
    doc.kv("top_k", pipeline.top_k);
}

fn render_method_details(doc: &mut Doc, method: &str, score: &Score<f64>) {
    let suffix = sanitize(method);

    doc.table(&format!("per_column_{suffix}"));
    doc.row(["column", "count", "rmse", "mae", "accuracy"]);
    for (column, s) in &score.metrics.per_column {
        doc.row([
            column.clone(),
            s.count.to_string(),
            opt6(s.rmse),
            opt6(s.mae),
            opt6(s.accuracy),
        ]);
    }

    doc.table(&format!("cells_{suffix}"));
    doc.row(["record", "column", "truth", "imputed", "error"]);
    for cell in &score.cells {
        doc.row([
            cell.record_id.to_string(),
            cell.column.clone(),
            cell.truth_text.clone(),
            cell.imputed_text.clone(),
            fmt6(cell.error),
        ]);
    }
}
