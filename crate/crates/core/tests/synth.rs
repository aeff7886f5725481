use margin_audit::audit::{breakdown_wmse, BreakdownOptions, SchemaName};
use margin_audit::outlier::{detect_outliers, OutlierConfig, Space};
use margin_audit::synth::{generate_synthetic, PlantedSpec, SYNTHETIC_MODEL};

const TYPES: [&str; 6] = [
    "toxicity",
    "severe_toxicity",
    "obscene",
    "threat",
    "insult",
    "identity_attack",
];

fn planted_percentile(inflation: f64, seed: u64) -> f64 {
    let spec = PlantedSpec {
        group: "muslim".into(),
        prevalence: 0.02,
        inflation,
    };
    let t = generate_synthetic(2000, 24, &spec, seed).unwrap().preprocess();
    let a = detect_outliers(&t, None, &[OutlierConfig::new(Space::Demographic)]).unwrap();
    let b = breakdown_wmse(
        &t,
        &a,
        SchemaName::Binary,
        &BreakdownOptions::default(),
        SYNTHETIC_MODEL,
        &TYPES,
    )
    .unwrap();
    b.get("muslim").unwrap().percentile
}

#[test]
fn inflated_group_ranks_high() {
    for seed in 0..4 {
        assert!(planted_percentile(3.0, seed) >= 90.0, "seed {seed}");
    }
}

#[test]
fn no_inflation_no_signal() {
    let top = (0..8).filter(|&s| planted_percentile(1.0, s) >= 90.0).count();
    assert!(top <= 3, "{top}/8 seeds ranked the planted group on top");
}

#[test]
fn csv_round_trip_of_synthetic_data() {
    let spec = PlantedSpec {
        group: "female".into(),
        prevalence: 0.05,
        inflation: 2.0,
    };
    let t = generate_synthetic(600, 8, &spec, 11).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    margin_audit::data::write_canonical_csv(&t, &path).unwrap();
    let back = margin_audit::data::load_dataset(&path, &t.canonical_schema()).unwrap();
    assert_eq!(back, t);
}

#[test]
fn text_outliers_mention_more_identities() {
    let spec = PlantedSpec {
        group: "bisexual".into(),
        prevalence: 0.02,
        inflation: 3.0,
    };
    let t = generate_synthetic(2000, 24, &spec, 2).unwrap().preprocess();
    let e = margin_audit::embed::embed_corpus(&t, 64, 2, 5).unwrap();
    let a = detect_outliers(&t, Some(&e), &[OutlierConfig::new(Space::Text)]).unwrap();
    let c = margin_audit::composition::mean_identity_count(&t, &a, Space::Text)
        .unwrap()
        .unwrap();
    assert!(c.mean_in > c.mean_out && c.p_value < 0.01, "{c:?}");
}
