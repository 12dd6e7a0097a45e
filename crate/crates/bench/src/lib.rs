//! Fixtures shared by the benchmarks in `benches/`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crvar_core::signals::{synth_cohort, AnalysisEpoch, Epoch};
use crvar_core::{ClinicalRecord, FeatureMatrix, FeatureRegistry, Outcome};

/// ETT-CPAP epoch of one synthetic patient on the analysis timebase, with
/// its clinical record.
pub fn epoch(seed: u64) -> (AnalysisEpoch, ClinicalRecord) {
    let (recs, clinical) = synth_cohort(2, 0.5, 1.0, seed).expect("synthetic cohort");
    let epoch = recs[0]
        .slice_epoch(Epoch::EttCpap)
        .and_then(|v| v.to_analysis())
        .expect("ETT-CPAP epoch");
    (epoch, clinical[0].clone())
}

/// `n` rows of the canonical registry, 15% failures, failures shifted on
/// the first ten features, one cell in fifty missing.
pub fn feature_matrix(n: usize, seed: u64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let registry = FeatureRegistry::canonical();
    let p = registry.len();
    let mut m = FeatureMatrix::new(registry);
    for i in 0..n {
        let outcome = if i % 20 < 3 { Outcome::Failure } else { Outcome::Success };
        let shift = if outcome == Outcome::Failure { 0.8 } else { 0.0 };
        let row = (0..p)
            .map(|j| {
                if rng.random_range(0..50) == 0 {
                    None
                } else {
                    Some(rng.random_range(0.0..1.0) + if j < 10 { shift } else { 0.0 })
                }
            })
            .collect();
        m.push_row(format!("b{i:04}"), outcome, row).expect("row width");
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_have_expected_shape() {
        let m = feature_matrix(40, 1);
        assert_eq!((m.n_rows(), m.n_features()), (40, 79));
        assert_eq!(m.outcomes.iter().filter(|o| **o == Outcome::Failure).count(), 6);
        let (e, _) = epoch(3);
        assert_eq!(e.rcg.len(), 300 * 50);
    }
}
