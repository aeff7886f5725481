use margin_audit::audit::{wmse, GroupSpec};
use margin_audit::outlier::{detect_outliers, feature_points, run_lof, OutlierConfig, Space};
use margin_audit::sweep::{contamination_sweep, default_schedule, groups_below_curve, sweep_scores};
use margin_audit::synth::{generate_synthetic, PlantedSpec, SYNTHETIC_MODEL};

fn table(seed: u64) -> margin_audit::data::DatasetTable {
    let spec = PlantedSpec {
        group: "black".into(),
        prevalence: 0.03,
        inflation: 3.0,
    };
    generate_synthetic(1200, 24, &spec, seed).unwrap().preprocess()
}

const TYPES: [&str; 6] = [
    "toxicity",
    "severe_toxicity",
    "obscene",
    "threat",
    "insult",
    "identity_attack",
];

#[test]
fn sweep_levels_are_nested() {
    let t = table(3);
    let curve = contamination_sweep(
        &t,
        None,
        Space::Demographic,
        &default_schedule(),
        Some(30),
        SYNTHETIC_MODEL,
        &TYPES,
    )
    .unwrap();
    assert!(curve.points.len() >= 10);
    for w in curve.points.windows(2) {
        assert!(w[0].group_size <= w[1].group_size);
        assert!(w[0].flags.iter().zip(&w[1].flags).all(|(&a, &b)| !a || b));
    }
    // Every level is either a point or a recorded skip.
    assert_eq!(curve.points.len() + curve.skipped.len(), 15);
}

#[test]
fn five_percent_level_matches_detection() {
    let t = table(5);
    let cfg = OutlierConfig::new(Space::Demographic).with_neighbors(30);
    let det = detect_outliers(&t, None, std::slice::from_ref(&cfg)).unwrap();
    let lof = run_lof(t.ids(), &feature_points(&t, None, Space::Demographic).unwrap(), &cfg).unwrap();
    let curve = sweep_scores(&t, &lof, &[0.05, 0.2], SYNTHETIC_MODEL, &TYPES).unwrap();
    let p = curve.points.iter().find(|p| p.contamination == 0.05).unwrap();
    assert_eq!(p.flags, det.flags(Space::Demographic).unwrap());
    assert_eq!(p.group_size, 60);
}

#[test]
fn curve_comparison_covers_every_group() {
    let t = table(8);
    let curve = contamination_sweep(
        &t,
        None,
        Space::Demographic,
        &default_schedule(),
        Some(30),
        SYNTHETIC_MODEL,
        &TYPES,
    )
    .unwrap();
    let groups: Vec<_> = t
        .demographic_names()
        .iter()
        .filter_map(|g| {
            let m = GroupSpec::binary(g).resolve(&t, None).ok()?;
            wmse(&t, &m, &[SYNTHETIC_MODEL], &TYPES).ok()
        })
        .collect();
    let cmp = groups_below_curve(&curve, &groups);
    assert_eq!(cmp.below + cmp.above + cmp.out_of_range, groups.len());
    let mut buf = Vec::new();
    cmp.write_csv(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap().lines().count(), groups.len() + 1);
}
