mod common;

use proptest::prelude::*;
use ssvep_cstl::emd::{find_extrema, reconstruct_from_imfs, sift, SiftConfig};

fn linf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn components_sum_back_to_signal(seed in any::<u64>(), len in 200usize..1200, f_max in 5.0f64..60.0) {
        let x = common::band_limited(len, 250.0, f_max, seed);
        let s = sift(&x, 250.0, &SiftConfig::default()).unwrap();
        let full = reconstruct_from_imfs(&s, 1, s.len() + 1).unwrap();
        let err: Vec<f64> = x.iter().zip(&full).map(|(a, b)| a - b).collect();
        prop_assert!(linf(&err) <= 1e-8 * linf(&x));
    }

    #[test]
    fn imf_count_respects_limit(seed in any::<u64>(), max_imfs in 1usize..6) {
        let x = common::band_limited(600, 250.0, 40.0, seed);
        let cfg = SiftConfig { max_imfs, ..SiftConfig::default() };
        let s = sift(&x, 250.0, &cfg).unwrap();
        prop_assert!(s.len() <= max_imfs);
        prop_assert!(s.imfs.iter().all(|imf| imf.len() == x.len()));
    }
}

#[test]
fn residue_is_nearly_monotone_for_long_decompositions() {
    let x = common::band_limited(1000, 250.0, 40.0, 11);
    let cfg = SiftConfig {
        max_imfs: 12,
        ..SiftConfig::default()
    };
    let s = sift(&x, 250.0, &cfg).unwrap();
    let (maxima, minima) = find_extrema(&s.residue);
    assert!(
        maxima.len() + minima.len() <= 4,
        "{} extrema",
        maxima.len() + minima.len()
    );
}
