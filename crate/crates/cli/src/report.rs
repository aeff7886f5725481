//! Markdown rendering of the audit and sweep artifacts.

use std::fmt::Write;

use margin_audit::audit::SchemaName;
use margin_audit::outlier::Space;

use crate::stages::{AuditReport, SweepReport};

fn pct(v: f64) -> String {
    format!("{v:.1}%")
}

fn signed_pct(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:+.1}%"),
        None => "n/a".into(),
    }
}

fn title(space: Space) -> String {
    let s = space.as_str();
    format!("{}{} outliers", s[..1].to_uppercase(), &s[1..])
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

fn table_header(out: &mut String, cols: &[String]) {
    writeln!(out, "| {} |", cols.join(" | ")).unwrap();
    writeln!(out, "|{}", " --- |".repeat(cols.len())).unwrap();
}

fn row(out: &mut String, cells: &[String]) {
    writeln!(out, "| {} |", cells.join(" | ")).unwrap();
}

fn spaces_of(a: &AuditReport) -> Vec<Space> {
    Space::ALL
        .iter()
        .copied()
        .filter(|s| a.outliers.contains_key(s))
        .collect()
}

pub fn render_report(a: &AuditReport, s: &SweepReport) -> String {
    let mut out = String::new();
    let spaces = spaces_of(a);
    let space_cols = |first: &str| -> Vec<String> {
        std::iter::once(first.to_string())
            .chain(spaces.iter().map(|&s| title(s)))
            .collect()
    };

    writeln!(out, "# Outlier disparity audit\n").unwrap();
    writeln!(out, "- Config hash: `{}`", a.config_hash).unwrap();
    writeln!(out, "- Seed: {}", a.seed).unwrap();
    writeln!(out, "- Rows: {}", a.n_rows).unwrap();
    writeln!(out, "- Models: {}", a.models.join(", ")).unwrap();
    writeln!(out, "- Toxicity types: {}", a.toxicity_types.join(", ")).unwrap();
    if let Some(v) = &a.api_version {
        writeln!(out, "- Scorer API version: {v}").unwrap();
    }
    writeln!(
        out,
        "- Tests: chi-square homogeneity (1 df, no continuity correction) with a Bonferroni cutoff; \
         identity counts compared with a two-sided Welch test under a normal approximation."
    )
    .unwrap();

    writeln!(out, "\n## Outlier detection\n").unwrap();
    table_header(
        &mut out,
        &["Space", "k", "Contamination", "Threshold", "Flagged"].map(String::from),
    );
    for &sp in &spaces {
        let o = &a.outliers[&sp];
        row(
            &mut out,
            &[
                sp.to_string(),
                o.n_neighbors.to_string(),
                o.contamination.to_string(),
                format!("{:.4}", o.threshold),
                format!("{} of {}", o.n_flagged, o.n_records),
            ],
        );
    }

    writeln!(out, "\n## WMSE percentile of the outlier groups\n").unwrap();
    writeln!(
        out,
        "Percentile of each outlier group's WMSE within the pool formed by a breakdown's groups plus the outlier groups."
    )
    .unwrap();
    for model in &a.models {
        writeln!(out, "\n### Model `{model}`\n").unwrap();
        let mut cols = space_cols("Breakdown");
        cols.push("Pool".into());
        table_header(&mut out, &cols);
        for schema in SchemaName::BREAKDOWNS {
            let Some(b) = a.breakdowns.iter().find(|b| b.schema == schema && &b.model == model) else {
                continue;
            };
            let mut cells = vec![capitalize(schema.as_str())];
            for &sp in &spaces {
                cells.push(
                    b.get(&sp.group_name())
                        .map(|g| pct(g.percentile))
                        .unwrap_or_else(|| "n/a".into()),
                );
            }
            cells.push(b.groups.len().to_string());
            row(&mut out, &cells);
        }
    }

    writeln!(out, "\n## Toxicity gaps\n").unwrap();
    writeln!(
        out,
        "Mean ground-truth toxicity of the outliers relative to everyone else.\n"
    )
    .unwrap();
    table_header(&mut out, &space_cols("Toxicity type"));
    for t in &a.toxicity_types {
        let mut cells = vec![t.clone()];
        for &sp in &spaces {
            let g = a
                .toxicity_gaps
                .iter()
                .find(|g| g.group == sp.group_name() && &g.toxicity_type == t);
            cells.push(match g {
                Some(g) => format!("{} ({:.3} vs {:.3})", signed_pct(g.relative_pct), g.mean_in, g.mean_out),
                None => "n/a".into(),
            });
        }
        row(&mut out, &cells);
    }

    let sig = &a.significance;
    writeln!(out, "\n## Groups with a significant outlier difference\n").unwrap();
    writeln!(
        out,
        "Demographic groups whose toxicity labels differ between outliers and non-outliers; \
         alpha {} over {} tests (cutoff {:.3e}); {} tests undefined.\n",
        sig.alpha,
        sig.n_tests,
        if sig.n_tests > 0 {
            sig.alpha / sig.n_tests as f64
        } else {
            sig.alpha
        },
        sig.undefined.len()
    )
    .unwrap();
    table_header(&mut out, &space_cols("Toxicity type"));
    for t in &a.toxicity_types {
        let mut cells = vec![t.clone()];
        for &sp in &spaces {
            cells.push(sig.count(sp, t).to_string());
        }
        row(&mut out, &cells);
    }

    writeln!(out, "\n## Model error by outlier status").unwrap();
    let many_models = a.models.len() > 1;
    for t in &a.mse_tables {
        writeln!(out, "\n### {}\n", title(t.space)).unwrap();
        table_header(
            &mut out,
            &[
                "Toxicity type",
                "Overall MSE",
                "Outlier MSE",
                "Non-outlier MSE",
                "MSE % increase",
            ]
            .map(String::from),
        );
        for r in &t.rows {
            let label = if many_models {
                format!("{} ({})", r.toxicity_type, r.model)
            } else {
                r.toxicity_type.clone()
            };
            row(
                &mut out,
                &[
                    label,
                    format!("{:.4}", r.overall_mse),
                    format!("{:.4}", r.outlier_mse),
                    format!("{:.4}", r.non_outlier_mse),
                    r.pct_increase
                        .map(|p| format!("{p:.1}%"))
                        .unwrap_or_else(|| "n/a".into()),
                ],
            );
        }
    }

    writeln!(out, "\n## Outlier composition").unwrap();
    for c in &a.composition {
        writeln!(out, "\n### {}\n", title(c.space)).unwrap();
        let baseline = c.rows.first().map(|r| r.baseline).unwrap_or(0.0);
        let majority = c.rows.iter().filter(|r| r.proportion.is_some_and(|p| p > 0.5)).count();
        let none = c.rows.iter().filter(|r| r.proportion == Some(0.0)).count();
        writeln!(
            out,
            "Overall outlier share {}. {majority} of {} groups are more than half outliers; {none} have no outliers.\n",
            pct(100.0 * baseline),
            c.rows.len()
        )
        .unwrap();
        table_header(&mut out, &["Group", "Members", "Outliers", "Share"].map(String::from));
        for r in &c.rows {
            row(
                &mut out,
                &[
                    r.group.clone(),
                    r.n_members.to_string(),
                    r.n_outliers.to_string(),
                    r.proportion.map(|p| pct(100.0 * p)).unwrap_or_else(|| "n/a".into()),
                ],
            );
        }
        if let Some(ic) = &c.identity_counts {
            writeln!(
                out,
                "\nMean identity count: {:.3} for outliers vs {:.3} for non-outliers (z = {:.2}, p = {:.3e}, {}).",
                ic.mean_in, ic.mean_out, ic.z, ic.p_value, ic.test
            )
            .unwrap();
        }
    }

    writeln!(out, "\n## Contamination sweep").unwrap();
    for curve in &s.curves {
        writeln!(
            out,
            "\n### {}, model `{}` (k = {})\n",
            title(curve.space),
            curve.model,
            curve.n_neighbors
        )
        .unwrap();
        table_header(&mut out, &["Contamination", "Group size", "WMSE"].map(String::from));
        for p in &curve.points {
            row(
                &mut out,
                &[
                    pct(100.0 * p.contamination),
                    p.group_size.to_string(),
                    format!("{:.4}", p.wmse.value),
                ],
            );
        }
        for sk in &curve.skipped {
            writeln!(out, "\nSkipped {}: {}.", pct(100.0 * sk.contamination), sk.reason).unwrap();
        }
        writeln!(out).unwrap();
        for v in s
            .comparisons
            .iter()
            .filter(|v| v.space == curve.space && v.model == curve.model)
        {
            let c = &v.comparison;
            writeln!(
                out,
                "- {}: {} of {} groups below the curve, {} outside its span",
                capitalize(v.schema.as_str()),
                c.below,
                c.verdicts.len(),
                c.out_of_range
            )
            .unwrap();
        }
    }

    writeln!(out, "\n## Plot data\n").unwrap();
    writeln!(
        out,
        "- `tables/wmse_<breakdown>_<model>.csv`: WMSE and percentile of every group"
    )
    .unwrap();
    writeln!(out, "- `tables/toxicity_gap.csv`: toxicity gaps").unwrap();
    writeln!(
        out,
        "- `plots/composition_<space>.csv`: outlier share per group with the overall share"
    )
    .unwrap();
    writeln!(
        out,
        "- `sweep/curve_<space>_<model>.csv` and `sweep/verdicts_*.csv`: sweep curves and group verdicts"
    )
    .unwrap();
    out
}
