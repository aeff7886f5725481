//! One function per subcommand. Each reads its inputs from the workspace,
//! checks the prerequisite manifests and publishes its own artifacts.

use std::collections::BTreeMap;
use std::fs;

use margin_audit::audit::{
    breakdown_wmse, count_significant_groups, outlier_mse_table, toxicity_gap, BreakdownResult, GroupKind, MseRow,
    SchemaName, SignificanceSummary, ToxicityGap,
};
use margin_audit::composition::{
    mean_identity_count, outlier_proportion_per_group, write_composition_csv, write_plot_data, CompositionRow,
    IdentityCountComparison,
};
use margin_audit::data::{
    load_dataset, load_dataset_from_reader, stratified_sample, write_csv, DatasetTable, SchemaConfig,
};
use margin_audit::embed::{embed_corpus, load_embeddings, EmbeddingMatrix};
use margin_audit::outlier::{detect_outliers, OutlierAssignment, Space, SpaceSummary};
use margin_audit::scorer::{fetch_scores, import_scores, RowError};
use margin_audit::sweep::{groups_below_curve, normalize_schedule, sweep_scores, CurveComparison, SweepCurve};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::report::render_report;
use crate::workspace::{Stage, Workspace};

pub const DATASET_CSV: &str = "dataset.csv";
pub const DATASET_SCHEMA: &str = "dataset.schema.json";
pub const EMBEDDINGS: &str = "embeddings.bin";
pub const SCORED_CSV: &str = "scored.csv";
pub const SCORED_SCHEMA: &str = "scored.schema.json";
pub const SCORES_JSON: &str = "scores.json";
pub const OUTLIERS_CSV: &str = "outliers.csv";
pub const OUTLIERS_JSON: &str = "outliers.json";
pub const AUDIT_JSON: &str = "audit.json";
pub const SWEEP_JSON: &str = "sweep.json";
pub const REPORT_MD: &str = "report.md";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub config_hash: String,
    pub seed: u64,
    pub models: Vec<String>,
    pub api_version: Option<String>,
    pub errors: Vec<RowError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierSummary {
    pub config_hash: String,
    pub seed: u64,
    pub spaces: BTreeMap<Space, SpaceSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseTable {
    pub space: Space,
    pub rows: Vec<MseRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Composition {
    pub space: Space,
    pub rows: Vec<CompositionRow>,
    pub identity_counts: Option<IdentityCountComparison>,
}

/// Everything the audit stage computes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub config_hash: String,
    pub seed: u64,
    pub n_rows: usize,
    pub models: Vec<String>,
    pub toxicity_types: Vec<String>,
    pub api_version: Option<String>,
    pub outliers: BTreeMap<Space, SpaceSummary>,
    pub breakdowns: Vec<BreakdownResult>,
    pub toxicity_gaps: Vec<ToxicityGap>,
    pub significance: SignificanceSummary,
    pub mse_tables: Vec<MseTable>,
    pub composition: Vec<Composition>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveVerdicts {
    pub space: Space,
    pub model: String,
    pub schema: SchemaName,
    pub comparison: CurveComparison,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config_hash: String,
    pub seed: u64,
    pub schedule: Vec<f64>,
    pub curves: Vec<SweepCurve>,
    pub comparisons: Vec<CurveVerdicts>,
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("artifact serializes");
    v.push(b'\n');
    v
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> margin_audit::error::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

/// File-name-safe form of a model id.
fn slug(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn load_table(ws: &Workspace, csv: &str, schema: &str) -> Result<DatasetTable> {
    let schema = SchemaConfig::from_json_str(&String::from_utf8_lossy(&ws.read(schema)?))?;
    let bytes = ws.read(csv)?;
    Ok(load_dataset_from_reader(bytes.as_slice(), &schema)?.preprocess())
}

fn table_files(table: &DatasetTable, csv: &str, schema: &str) -> Result<Vec<(String, Vec<u8>)>> {
    Ok(vec![
        (csv.to_string(), csv_bytes(|b| write_csv(table, b, false))?),
        (schema.to_string(), json_bytes(&table.canonical_schema())),
    ])
}

/// Detected spaces in report order: demographic, text, disagreement.
fn detected_spaces(a: &OutlierAssignment) -> Vec<Space> {
    Space::ALL.iter().copied().filter(|&s| a.get(s).is_some()).collect()
}

fn load_assignment(ws: &Workspace) -> Result<OutlierAssignment> {
    let summary: OutlierSummary = ws.read_json(OUTLIERS_JSON)?;
    let bytes = ws.read(OUTLIERS_CSV)?;
    Ok(OutlierAssignment::read_csv(bytes.as_slice(), &summary.spaces)?)
}

pub fn ingest(cfg: &RunConfig, ws: &Workspace) -> Result<()> {
    let schema = match &cfg.schema {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            SchemaConfig::from_json_str(&text)?
        }
        None => SchemaConfig::jigsaw(),
    };
    schema.validate()?;
    let mut table = load_dataset(&cfg.dataset, &schema)?.preprocess();
    log::info!("loaded {} rows from {}", table.n_rows(), cfg.dataset.display());
    if cfg.preprocess.dedup {
        table = table.dedup_text();
    }
    if let Some(f) = cfg.preprocess.sample_fraction {
        table = stratified_sample(&table, f, cfg.seed)?;
    }
    if table.is_empty() {
        return Err(CliError::Validation(
            "the dataset has no rows after preprocessing".into(),
        ));
    }
    ws.publish(Stage::Ingest, table_files(&table, DATASET_CSV, DATASET_SCHEMA)?)?;
    Ok(())
}

pub fn embed(cfg: &RunConfig, ws: &Workspace) -> Result<()> {
    ws.require(Stage::Ingest)?;
    let table = load_table(ws, DATASET_CSV, DATASET_SCHEMA)?;
    let matrix = match &cfg.embedding.external {
        Some(p) => load_embeddings(p, table.n_rows())?,
        None => embed_corpus(&table, cfg.embedding.dim, cfg.seed, cfg.embedding.min_df)?,
    };
    ws.publish(Stage::Embed, vec![(EMBEDDINGS.into(), matrix.to_bytes()?)])?;
    Ok(())
}

pub fn score(cfg: &RunConfig, ws: &Workspace) -> Result<()> {
    ws.require(Stage::Ingest)?;
    let mut table = load_table(ws, DATASET_CSV, DATASET_SCHEMA)?;
    for imp in &cfg.scores.imports {
        table = import_scores(&table, &imp.path, &imp.model)?;
    }
    let mut errors = Vec::new();
    let mut api_version = None;
    if let Some(endpoint) = &cfg.scores.endpoint {
        let endpoint = endpoint.clone().with_env_key();
        let cache = cfg.scores.cache.clone().unwrap_or_else(|| ws.path("score_cache.jsonl"));
        let outcome = fetch_scores(&table, &endpoint, &cache)?;
        log::info!(
            "scorer: {} requests, {} failed rows",
            outcome.n_requests,
            outcome.errors.len()
        );
        table = outcome.table;
        errors = outcome.errors;
        api_version = endpoint.api_version.clone();
    }
    let summary = ScoreSummary {
        config_hash: ws.config_hash().to_string(),
        seed: ws.seed(),
        models: table.model_ids().iter().map(|s| s.to_string()).collect(),
        api_version,
        errors,
    };
    let mut files = table_files(&table, SCORED_CSV, SCORED_SCHEMA)?;
    files.push((SCORES_JSON.into(), json_bytes(&summary)));
    ws.publish(Stage::Score, files)?;
    Ok(())
}

pub fn detect(cfg: &RunConfig, ws: &Workspace) -> Result<()> {
    ws.require(Stage::Ingest)?;
    let table = load_table(ws, DATASET_CSV, DATASET_SCHEMA)?;
    let embeddings: Option<EmbeddingMatrix> = if cfg.spaces().contains(&Space::Text) {
        ws.require(Stage::Embed)?;
        Some(load_embeddings(&ws.path(EMBEDDINGS), table.n_rows())?)
    } else {
        None
    };
    let assignment = detect_outliers(&table, embeddings.as_ref(), &cfg.outliers)?;
    let summary = OutlierSummary {
        config_hash: ws.config_hash().to_string(),
        seed: ws.seed(),
        spaces: assignment.summary(),
    };
    ws.publish(
        Stage::Detect,
        vec![
            (OUTLIERS_CSV.into(), csv_bytes(|b| assignment.write_csv(b))?),
            (OUTLIERS_JSON.into(), json_bytes(&summary)),
        ],
    )?;
    Ok(())
}

/// Models and toxicity types to audit, with each model's scored types.
fn audit_targets(cfg: &RunConfig, table: &DatasetTable) -> Result<Vec<(String, Vec<String>)>> {
    let models: Vec<String> = match &cfg.models {
        Some(m) => m.clone(),
        None => table.model_ids().iter().map(|s| s.to_string()).collect(),
    };
    if models.is_empty() {
        return Err(CliError::Validation(
            "the dataset has no model scores; add score imports, an endpoint or score columns to the schema".into(),
        ));
    }
    let types: Vec<String> = match &cfg.toxicity_types {
        Some(t) => t.clone(),
        None => table.toxicity_names().iter().map(|s| s.to_string()).collect(),
    };
    for t in &types {
        if table.toxicity(t).is_none() {
            return Err(CliError::Validation(format!("unknown toxicity type `{t}`")));
        }
    }
    models
        .into_iter()
        .map(|m| {
            let scored: Vec<String> = types.iter().filter(|t| table.score(&m, t).is_some()).cloned().collect();
            if scored.is_empty() {
                Err(CliError::Validation(format!(
                    "model `{m}` scores none of the audited toxicity types"
                )))
            } else {
                Ok((m, scored))
            }
        })
        .collect()
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

pub fn audit(cfg: &RunConfig, ws: &Workspace) -> Result<()> {
    ws.require(Stage::Detect)?;
    ws.require(Stage::Score)?;
    let table = load_table(ws, SCORED_CSV, SCORED_SCHEMA)?;
    let assignment = load_assignment(ws)?;
    let scores: ScoreSummary = ws.read_json(SCORES_JSON)?;
    let targets = audit_targets(cfg, &table)?;
    let types: Vec<String> = match &cfg.toxicity_types {
        Some(t) => t.clone(),
        None => table.toxicity_names().iter().map(|s| s.to_string()).collect(),
    };
    let types_ref = strs(&types);
    let spaces = detected_spaces(&assignment);

    let mut breakdowns = Vec::new();
    for schema in SchemaName::BREAKDOWNS {
        for (model, model_types) in &targets {
            breakdowns.push(breakdown_wmse(
                &table,
                &assignment,
                schema,
                &cfg.breakdown,
                model,
                &strs(model_types),
            )?);
        }
    }
    let mut gaps = Vec::new();
    for &space in &spaces {
        for t in &types {
            gaps.push(toxicity_gap(&table, &assignment, space, t)?);
        }
    }
    let significance = count_significant_groups(&table, &assignment, &spaces, &types_ref, cfg.alpha)?;
    let mut mse_tables = Vec::new();
    for &space in &spaces {
        let mut rows = Vec::new();
        for (model, model_types) in &targets {
            rows.extend(outlier_mse_table(
                &table,
                &assignment,
                space,
                &[model.as_str()],
                &strs(model_types),
            )?);
        }
        rows.sort_by(|a, b| match (a.pct_increase, b.pct_increase) {
            (Some(x), Some(y)) => y.total_cmp(&x),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        });
        mse_tables.push(MseTable { space, rows });
    }
    let mut composition = Vec::new();
    for &space in &spaces {
        composition.push(Composition {
            space,
            rows: outlier_proportion_per_group(&table, &assignment, space)?,
            identity_counts: mean_identity_count(&table, &assignment, space)?,
        });
    }

    let report = AuditReport {
        config_hash: ws.config_hash().to_string(),
        seed: ws.seed(),
        n_rows: table.n_rows(),
        models: targets.iter().map(|t| t.0.clone()).collect(),
        toxicity_types: types.clone(),
        api_version: scores.api_version,
        outliers: assignment.summary(),
        breakdowns,
        toxicity_gaps: gaps,
        significance,
        mse_tables,
        composition,
    };
    let mut files = vec![(AUDIT_JSON.to_string(), json_bytes(&report))];
    files.extend(audit_tables(&report)?);
    ws.publish(Stage::Audit, files)?;
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_rows(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(margin_audit::error::Error::from)?;
    for r in rows {
        w.write_record(r).map_err(margin_audit::error::Error::from)?;
    }
    Ok(w.into_inner().expect("in-memory CSV"))
}

/// CSV views of the audit for external plotting.
fn audit_tables(r: &AuditReport) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    let mut pct_rows = Vec::new();
    for b in &r.breakdowns {
        let rows = b
            .groups
            .iter()
            .map(|g| {
                vec![
                    g.group.clone(),
                    format!("{:?}", g.kind).to_lowercase(),
                    g.wmse.group_size.to_string(),
                    g.wmse.value.to_string(),
                    g.percentile.to_string(),
                ]
            })
            .collect();
        files.push((
            format!("tables/wmse_{}_{}.csv", b.schema, slug(&b.model)),
            write_rows(&["group", "kind", "size", "wmse", "percentile"], rows)?,
        ));
        for g in b.groups.iter().filter(|g| g.kind == GroupKind::Outlier) {
            pct_rows.push(vec![
                b.model.clone(),
                b.schema.to_string(),
                g.group.clone(),
                g.wmse.value.to_string(),
                g.percentile.to_string(),
                b.groups.len().to_string(),
            ]);
        }
    }
    files.push((
        "tables/percentiles.csv".into(),
        write_rows(
            &["model", "schema", "outlier_group", "wmse", "percentile", "pool_size"],
            pct_rows,
        )?,
    ));
    let gap_rows = r
        .toxicity_gaps
        .iter()
        .map(|g| {
            vec![
                g.group.clone(),
                g.toxicity_type.clone(),
                g.mean_in.to_string(),
                g.mean_out.to_string(),
                fmt_opt(g.relative_pct),
            ]
        })
        .collect();
    files.push((
        "tables/toxicity_gap.csv".into(),
        write_rows(
            &[
                "outlier_group",
                "toxicity_type",
                "mean_outliers",
                "mean_others",
                "relative_pct",
            ],
            gap_rows,
        )?,
    ));
    let sig_rows = r
        .significance
        .counts
        .iter()
        .map(|c| {
            vec![
                c.outlier_space.to_string(),
                c.toxicity_type.clone(),
                c.count.to_string(),
            ]
        })
        .collect();
    files.push((
        "tables/significance_counts.csv".into(),
        write_rows(&["outlier_space", "toxicity_type", "significant_groups"], sig_rows)?,
    ));
    let test_rows = r
        .significance
        .results
        .iter()
        .map(|t| {
            vec![
                t.outlier_space.to_string(),
                t.toxicity_type.clone(),
                t.group.clone(),
                t.chi2.to_string(),
                t.p_value.to_string(),
                t.significant_after_bonferroni.to_string(),
            ]
        })
        .collect();
    files.push((
        "tables/significance_tests.csv".into(),
        write_rows(
            &[
                "outlier_space",
                "toxicity_type",
                "group",
                "chi2",
                "p_value",
                "significant",
            ],
            test_rows,
        )?,
    ));
    for t in &r.mse_tables {
        let rows = t
            .rows
            .iter()
            .map(|m| {
                vec![
                    m.model.clone(),
                    m.toxicity_type.clone(),
                    m.overall_mse.to_string(),
                    m.outlier_mse.to_string(),
                    m.non_outlier_mse.to_string(),
                    fmt_opt(m.pct_increase),
                ]
            })
            .collect();
        files.push((
            format!("tables/mse_{}.csv", t.space),
            write_rows(
                &[
                    "model",
                    "toxicity_type",
                    "overall_mse",
                    "outlier_mse",
                    "non_outlier_mse",
                    "pct_increase",
                ],
                rows,
            )?,
        ));
    }
    for c in &r.composition {
        files.push((
            format!("tables/composition_{}.csv", c.space),
            csv_bytes(|b| write_composition_csv(&c.rows, b))?,
        ));
        files.push((
            format!("plots/composition_{}.csv", c.space),
            csv_bytes(|b| write_plot_data(&c.rows, b))?,
        ));
    }
    Ok(files)
}

pub fn sweep(cfg: &RunConfig, ws: &Workspace) -> Result<()> {
    ws.require(Stage::Detect)?;
    ws.require(Stage::Score)?;
    let table = load_table(ws, SCORED_CSV, SCORED_SCHEMA)?;
    let assignment = load_assignment(ws)?;
    let targets = audit_targets(cfg, &table)?;
    let schedule = normalize_schedule(&cfg.sweep.schedule_percent)?;
    let spaces = cfg.sweep.spaces.clone().unwrap_or_else(|| detected_spaces(&assignment));

    let mut files = Vec::new();
    let mut curves = Vec::new();
    let mut comparisons = Vec::new();
    for &space in &spaces {
        let lof = assignment.get(space).ok_or_else(|| {
            CliError::Validation(format!(
                "{space} outliers were not detected; add the space to `outliers` and run detect"
            ))
        })?;
        for (model, model_types) in &targets {
            let types = strs(model_types);
            let curve = sweep_scores(&table, lof, &schedule, model, &types)?;
            files.push((
                format!("sweep/curve_{space}_{}.csv", slug(model)),
                csv_bytes(|b| curve.write_csv(b))?,
            ));
            for schema in SchemaName::BREAKDOWNS {
                let b = breakdown_wmse(&table, &assignment, schema, &cfg.breakdown, model, &types)?;
                let groups: Vec<_> = b
                    .groups
                    .into_iter()
                    .filter(|g| g.kind != GroupKind::Outlier)
                    .map(|g| g.wmse)
                    .collect();
                let comparison = groups_below_curve(&curve, &groups);
                files.push((
                    format!("sweep/verdicts_{space}_{}_{schema}.csv", slug(model)),
                    csv_bytes(|b| comparison.write_csv(b))?,
                ));
                comparisons.push(CurveVerdicts {
                    space,
                    model: model.clone(),
                    schema,
                    comparison,
                });
            }
            curves.push(curve);
        }
    }
    let report = SweepReport {
        config_hash: ws.config_hash().to_string(),
        seed: ws.seed(),
        schedule,
        curves,
        comparisons,
    };
    files.push((SWEEP_JSON.into(), json_bytes(&report)));
    ws.publish(Stage::Sweep, files)?;
    Ok(())
}

pub fn report(_cfg: &RunConfig, ws: &Workspace) -> Result<()> {
    for s in [Stage::Ingest, Stage::Score, Stage::Detect, Stage::Audit, Stage::Sweep] {
        ws.require(s)?;
    }
    let detected: OutlierSummary = ws.read_json(OUTLIERS_JSON)?;
    if detected.spaces.contains_key(&Space::Text) {
        ws.require(Stage::Embed)?;
    }
    let audit: AuditReport = ws.read_json(AUDIT_JSON)?;
    let sweep: SweepReport = ws.read_json(SWEEP_JSON)?;
    for (name, hash) in [(AUDIT_JSON, &audit.config_hash), (SWEEP_JSON, &sweep.config_hash)] {
        if hash != ws.config_hash() {
            return Err(CliError::Validation(format!(
                "{name} carries a different config hash; rerun the pipeline"
            )));
        }
    }
    let md = render_report(&audit, &sweep);
    ws.publish(Stage::Report, vec![(REPORT_MD.into(), md.into_bytes())])?;
    Ok(())
}

/// Every stage in order; embedding only when text outliers are configured.
pub fn run_all(cfg: &RunConfig, ws: &Workspace) -> Result<()> {
    ingest(cfg, ws)?;
    if cfg.spaces().contains(&Space::Text) {
        embed(cfg, ws)?;
    }
    score(cfg, ws)?;
    detect(cfg, ws)?;
    audit(cfg, ws)?;
    sweep(cfg, ws)?;
    report(cfg, ws)
}
