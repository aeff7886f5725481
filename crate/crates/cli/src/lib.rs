//! Command-line pipeline around the `margin_audit` library: configuration,
//! per-stage artifacts and the Markdown report.

pub mod config;
pub mod error;
pub mod report;
pub mod stages;
pub mod workspace;

use std::fs;
use std::path::Path;

use margin_audit::audit::default_marginalized_unions;
use margin_audit::data::write_csv;
use margin_audit::synth::{generate_synthetic, PlantedSpec};

pub use config::{RunConfig, SpaceSelection};
pub use error::{CliError, Result};
pub use workspace::{Stage, Workspace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Ingest,
    Embed,
    Score,
    Detect,
    Audit,
    Sweep,
    Report,
    Run,
}

/// Runs one pipeline command against `out`. `spaces` narrows detection
/// without changing the config hash; later stages use whatever spaces
/// detection produced.
pub fn execute(command: Command, cfg: &RunConfig, spaces: SpaceSelection, out: &Path) -> Result<()> {
    cfg.validate()?;
    let ws = Workspace::open(out, &cfg.hash(), cfg.seed)?;
    let mut narrowed = cfg.clone();
    narrowed.apply_space(spaces);
    let cfg = &narrowed;
    log::info!("{command:?} in {} (config {})", out.display(), &ws.config_hash()[..12]);
    match command {
        Command::Ingest => stages::ingest(cfg, &ws),
        Command::Embed => stages::embed(cfg, &ws),
        Command::Score => stages::score(cfg, &ws),
        Command::Detect => stages::detect(cfg, &ws),
        Command::Audit => stages::audit(cfg, &ws),
        Command::Sweep => stages::sweep(cfg, &ws),
        Command::Report => stages::report(cfg, &ws),
        Command::Run => stages::run_all(cfg, &ws),
    }
}

pub const SYNTH_CSV: &str = "synthetic.csv";
pub const SYNTH_SCHEMA: &str = "synthetic.schema.json";
pub const SYNTH_CONFIG: &str = "config.json";

/// Writes a synthetic dataset, its schema and a ready-to-run config into
/// `dir`. Marginalized unions keep only the generated groups and are dropped
/// when fewer than two members remain.
pub fn write_synthetic(n: usize, n_groups: usize, planted: &PlantedSpec, seed: u64, dir: &Path) -> Result<()> {
    let table = generate_synthetic(n, n_groups, planted, seed)?;
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut csv = Vec::new();
    write_csv(&table, &mut csv, false)?;
    let write =
        |name: &str, bytes: &[u8]| fs::write(dir.join(name), bytes).map_err(|e| CliError::io(dir.join(name), e));
    write(SYNTH_CSV, &csv)?;
    write(SYNTH_SCHEMA, &pretty(&table.canonical_schema()))?;

    let names = table.demographic_names();
    let unions: Vec<_> = default_marginalized_unions()
        .into_iter()
        .filter_map(|mut u| {
            u.members.retain(|m| names.contains(&m.as_str()));
            (u.members.len() >= 2).then_some(u)
        })
        .collect();
    let config = serde_json::json!({
        "dataset": SYNTH_CSV,
        "schema": SYNTH_SCHEMA,
        "seed": seed,
        "breakdown": { "unions": unions },
    });
    write(SYNTH_CONFIG, &pretty(&config))
}

fn pretty<T: serde::Serialize>(v: &T) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("serializes");
    b.push(b'\n');
    b
}
