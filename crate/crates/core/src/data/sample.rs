use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::table::DatasetTable;
use crate::error::{Error, Result};

/// Per-group stratified sample.
///
/// For every demographic channel, draws `ceil(fraction * positives)` of the
/// rows labelled positive for that channel, uniformly without replacement.
/// The per-channel draws are unioned, so a row sampled through several
/// channels appears once, and rows come back in ascending id order. Channels
/// are visited in schema order with a single seeded generator, which makes
/// the result a pure function of `(table, fraction, seed)`.
pub fn stratified_sample(table: &DatasetTable, fraction: f64, seed: u64) -> Result<DatasetTable> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!(
            "sample fraction must be in (0, 1], got {fraction}"
        )));
    }
    if !table.is_binarized() {
        return Err(Error::Config("stratified sampling requires binarized labels".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = BTreeSet::new();
    for col in table.demographic_columns() {
        let positives: Vec<usize> = col
            .labels()
            .iter()
            .enumerate()
            .filter_map(|(r, &b)| b.then_some(r))
            .collect();
        if positives.is_empty() {
            continue;
        }
        let amount = ((fraction * positives.len() as f64) - 1e-9).ceil() as usize;
        let amount = amount.clamp(1, positives.len());
        for i in rand::seq::index::sample(&mut rng, positives.len(), amount) {
            keep.insert(positives[i]);
        }
    }
    let rows: Vec<usize> = keep.into_iter().collect();
    Ok(table.select_rows(&rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{AnnotationColumn, ChannelKind};

    fn table(n: usize, groups: &[Vec<usize>]) -> DatasetTable {
        let dem = groups
            .iter()
            .enumerate()
            .map(|(g, members)| {
                let mut v = vec![0.0; n];
                for &m in members {
                    v[m] = 1.0;
                }
                AnnotationColumn::new(format!("g{g}"), ChannelKind::DemographicAnnotation, v)
            })
            .collect();
        DatasetTable::new(
            (0..n as u64).map(|i| i * 3).collect(),
            (0..n).map(|i| format!("t{i}")).collect(),
            vec![],
            dem,
            vec![],
        )
        .unwrap()
        .binarize()
    }

    #[test]
    fn full_fraction_keeps_every_labelled_row_once() {
        let t = table(6, &[vec![0, 1, 2], vec![2, 4]]);
        let s = stratified_sample(&t, 1.0, 7).unwrap();
        assert_eq!(s.ids(), &[0, 3, 6, 12]);
    }

    #[test]
    fn counts_and_determinism() {
        let t = table(1000, &[(0..200).map(|i| i * 5).collect()]);
        let a = stratified_sample(&t, 0.1, 42).unwrap();
        let b = stratified_sample(&t, 0.1, 42).unwrap();
        assert_eq!(a.n_rows(), 20);
        assert_eq!(a, b);
        let c = stratified_sample(&t, 0.1, 43).unwrap();
        assert_ne!(a.ids(), c.ids());
    }

    #[test]
    fn empty_table_is_empty() {
        let t = table(0, &[vec![]]);
        assert!(stratified_sample(&t, 0.5, 1).unwrap().is_empty());
    }

    #[test]
    fn rejects_bad_fraction_and_unbinarized() {
        let t = table(4, &[vec![1]]);
        assert!(stratified_sample(&t, 0.0, 1).is_err());
        assert!(stratified_sample(&t, 1.5, 1).is_err());
        let raw = DatasetTable::new(
            vec![0],
            vec!["x".into()],
            vec![],
            vec![AnnotationColumn::new(
                "g",
                ChannelKind::DemographicAnnotation,
                vec![1.0],
            )],
            vec![],
        )
        .unwrap();
        assert!(stratified_sample(&raw, 0.5, 1).is_err());
    }

    #[test]
    fn output_is_subset_without_duplicates() {
        let t = table(
            300,
            &[(0..150).collect(), (100..260).collect(), (0..300).step_by(7).collect()],
        );
        for seed in 0..10 {
            let s = stratified_sample(&t, 0.3, seed).unwrap();
            assert!(s.ids().windows(2).all(|w| w[0] < w[1]));
            assert!(s.ids().iter().all(|id| t.ids().contains(id)));
        }
    }
}
