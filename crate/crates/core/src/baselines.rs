//! CCA-family reference decoders: plain CCA against sine/cosine references,
//! filter-bank CCA, and extended CCA with per-class templates.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::Prediction;
use crate::signal::filter::{design_bandpass, Sos, STOP_MARGIN_HZ};
use crate::signal::{Epoch, FrequencyTable};

/// Relative ridge added to covariance diagonals.
pub const CCA_RIDGE: f64 = 1e-8;

/// Leading canonical pair.
#[derive(Debug, Clone)]
pub struct Canonical {
    pub rho: f64,
    /// Spatial filter for the first argument.
    pub wx: DVector<f64>,
    pub wy: DVector<f64>,
}

/// Channel-major epoch data as a `channels × samples` matrix.
pub fn epoch_matrix(e: &Epoch) -> DMatrix<f64> {
    DMatrix::from_row_slice(e.n_channels(), e.n_samples(), e.data())
}

fn center_rows(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        let mean = row.mean();
        row.iter_mut().for_each(|v| *v -= mean);
    }
    out
}

fn regularized_cholesky(c: DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let n = c.nrows();
    let scale = c.trace() / n as f64;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::RankDeficient);
    }
    let ridged = c + DMatrix::identity(n, n) * (CCA_RIDGE * scale);
    ridged.cholesky().ok_or(Error::RankDeficient)
}

/// Largest canonical correlation between the rows of `x` and of `y`, with
/// the matching spatial filters.
pub fn cca(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<Canonical> {
    let l = x.ncols();
    if y.ncols() != l {
        return Err(Error::Dimension(format!("{} vs {} samples", l, y.ncols())));
    }
    if l <= x.nrows() + y.nrows() {
        return Err(Error::Dimension(format!(
            "{l} samples too few for {} + {} rows",
            x.nrows(),
            y.nrows()
        )));
    }
    let (xc, yc) = (center_rows(x), center_rows(y));
    let lx = regularized_cholesky(&xc * xc.transpose())?;
    let ly = regularized_cholesky(&yc * yc.transpose())?;
    let cxy = &xc * yc.transpose();
    // Whitened cross-covariance Lx⁻¹ Cxy Ly⁻ᵀ.
    let left = lx
        .l()
        .solve_lower_triangular(&cxy)
        .ok_or(Error::RankDeficient)?;
    let whitened = ly
        .l()
        .solve_lower_triangular(&left.transpose())
        .ok_or(Error::RankDeficient)?
        .transpose();
    let svd = whitened.svd(true, true);
    let (best, sigma) =
        svd.singular_values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, s)| {
                if *s > acc.1 {
                    (i, *s)
                } else {
                    acc
                }
            });
    let u = svd.u.as_ref().expect("requested").column(best).into_owned();
    let v = svd.v_t.as_ref().expect("requested").row(best).transpose();
    let wx = lx
        .l()
        .transpose()
        .solve_upper_triangular(&u)
        .ok_or(Error::RankDeficient)?;
    let wy = ly
        .l()
        .transpose()
        .solve_upper_triangular(&v)
        .ok_or(Error::RankDeficient)?;
    Ok(Canonical {
        rho: sigma.clamp(0.0, 1.0),
        wx,
        wy,
    })
}

/// Maximum canonical correlation in `[0, 1]`.
pub fn cca_corr(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    cca(x, y).map(|c| c.rho)
}

/// Like [`cca_corr`] but an all-zero input scores 0 instead of failing.
fn corr_or_zero(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    match cca_corr(x, y) {
        Err(Error::RankDeficient) => Ok(0.0),
        other => other,
    }
}

fn pearson_or_zero(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let (ma, mb) = (a.mean(), b.mean());
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa > 0.0 && sbb > 0.0 {
        sab / (saa * sbb).sqrt()
    } else {
        0.0
    }
}

/// Sine/cosine references per class, rows L2-normalised.
#[derive(Debug, Clone)]
pub struct ReferenceSignals {
    pub per_class: Vec<DMatrix<f64>>,
    pub n_harmonics: usize,
    pub fs_hz: f64,
}

impl ReferenceSignals {
    pub fn n_samples(&self) -> usize {
        self.per_class.first().map_or(0, |m| m.ncols())
    }
}

/// Rows `[sin(2πhft); cos(2πhft)]` for `h = 1..=n_h`.
pub fn build_references(
    table: &FrequencyTable,
    n_h: usize,
    fs_hz: f64,
    n_samples: usize,
) -> Result<ReferenceSignals> {
    if n_h == 0 || n_samples == 0 {
        return Err(Error::invalid(
            "references need at least one harmonic and one sample",
        ));
    }
    let top = table.max_freq() * n_h as f64;
    if top >= fs_hz / 2.0 {
        return Err(Error::Nyquist {
            freq_hz: top,
            fs_hz,
        });
    }
    let per_class = table
        .iter()
        .map(|s| {
            let mut m = DMatrix::from_fn(2 * n_h, n_samples, |r, t| {
                let w = 2.0 * PI * (r / 2 + 1) as f64 * s.freq_hz * t as f64 / fs_hz;
                if r % 2 == 0 {
                    w.sin()
                } else {
                    w.cos()
                }
            });
            for mut row in m.row_iter_mut() {
                let n = row.norm();
                if n > 0.0 {
                    row /= n;
                }
            }
            m
        })
        .collect();
    Ok(ReferenceSignals {
        per_class,
        n_harmonics: n_h,
        fs_hz,
    })
}

fn check_refs(e: &Epoch, refs: &ReferenceSignals) -> Result<()> {
    if refs.n_samples() != e.n_samples() || refs.fs_hz != e.fs_hz {
        return Err(Error::Dimension(format!(
            "references are {} samples at {} Hz, epoch is {} at {} Hz",
            refs.n_samples(),
            refs.fs_hz,
            e.n_samples(),
            e.fs_hz
        )));
    }
    Ok(())
}

/// Canonical correlation of `e` with every class reference.
pub fn cca_scores(e: &Epoch, refs: &ReferenceSignals) -> Result<Vec<f64>> {
    check_refs(e, refs)?;
    let x = epoch_matrix(e);
    refs.per_class.iter().map(|y| corr_or_zero(&x, y)).collect()
}

pub fn cca_classify(e: &Epoch, refs: &ReferenceSignals) -> Result<usize> {
    cca_scores(e, refs).map(|s| Prediction::from_logits(s).class_index)
}

/// Filter bank with passbands `(first_edge + step·(m−1) − margin, upper)`
/// and weights `m^(−a) + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubbandSpec {
    pub n_subbands: usize,
    pub a: f64,
    pub b: f64,
    pub first_edge_hz: f64,
    pub step_hz: f64,
    pub margin_hz: f64,
    pub upper_hz: f64,
    pub gstop_db: f64,
}

impl Default for SubbandSpec {
    fn default() -> Self {
        Self {
            n_subbands: 5,
            a: 1.25,
            b: 0.25,
            first_edge_hz: 8.0,
            step_hz: 8.0,
            margin_hz: 2.0,
            upper_hz: 88.0,
            gstop_db: 40.0,
        }
    }
}

impl SubbandSpec {
    pub fn weights(&self) -> Vec<f64> {
        (1..=self.n_subbands)
            .map(|m| (m as f64).powf(-self.a) + self.b)
            .collect()
    }

    /// Designs the filters for `fs_hz`; the upper edge is lowered if it
    /// would leave no room for the stopband below Nyquist.
    pub fn bank(&self, fs_hz: f64) -> Result<FilterBank> {
        if self.n_subbands == 0 {
            return Err(Error::invalid("filter bank needs at least one subband"));
        }
        let weights = self.weights();
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::invalid("subband weights must be positive"));
        }
        let hi = self.upper_hz.min(0.9 * (fs_hz / 2.0 - STOP_MARGIN_HZ.1));
        let filters = (0..self.n_subbands)
            .map(|m| {
                let lo = self.first_edge_hz + self.step_hz * m as f64 - self.margin_hz;
                design_bandpass(
                    (lo, hi),
                    (lo - STOP_MARGIN_HZ.0, hi + STOP_MARGIN_HZ.1),
                    self.gstop_db,
                    fs_hz,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FilterBank {
            filters,
            weights,
            fs_hz,
        })
    }
}

#[derive(Debug, Clone)]
pub struct FilterBank {
    pub filters: Vec<Sos>,
    pub weights: Vec<f64>,
    pub fs_hz: f64,
}

/// `Σ_m w_m ρ_{m,j}²` per class.
pub fn fbcca_scores(e: &Epoch, refs: &ReferenceSignals, bank: &FilterBank) -> Result<Vec<f64>> {
    check_refs(e, refs)?;
    if bank.fs_hz != e.fs_hz {
        return Err(Error::Dimension(
            "filter bank designed for another rate".into(),
        ));
    }
    let mut scores = vec![0.0; refs.per_class.len()];
    for (sos, w) in bank.filters.iter().zip(&bank.weights) {
        let sub = e.map_channels(|c| Ok(sos.filtfilt(c)))?;
        let x = epoch_matrix(&sub);
        for (s, y) in scores.iter_mut().zip(&refs.per_class) {
            let rho = corr_or_zero(&x, y)?;
            *s += w * rho * rho;
        }
    }
    Ok(scores)
}

pub fn fbcca_classify(e: &Epoch, refs: &ReferenceSignals, sb: &SubbandSpec) -> Result<usize> {
    if e.duration_s() < 0.25 {
        return Err(Error::invalid(
            "filter-bank CCA needs at least 0.25 s of data",
        ));
    }
    let bank = sb.bank(e.fs_hz)?;
    fbcca_scores(e, refs, &bank).map(|s| Prediction::from_logits(s).class_index)
}

/// Per-class mean epochs used by extended CCA.
#[derive(Debug, Clone)]
pub struct Templates {
    pub per_class: Vec<Option<DMatrix<f64>>>,
}

impl Templates {
    /// Mean over the given epochs of each class; classes without epochs
    /// stay empty.
    pub fn from_epochs<'a>(
        epochs: impl IntoIterator<Item = &'a Epoch>,
        n_classes: usize,
    ) -> Result<Self> {
        let mut sums: Vec<Option<(DMatrix<f64>, usize)>> = vec![None; n_classes];
        for e in epochs {
            let class = e.stimulus.class_index;
            if class >= n_classes {
                return Err(Error::invalid(format!(
                    "class {class} outside {n_classes} classes"
                )));
            }
            let m = epoch_matrix(e);
            match &mut sums[class] {
                Some((acc, n)) => {
                    if acc.shape() != m.shape() {
                        return Err(Error::Dimension("template epochs differ in shape".into()));
                    }
                    *acc += m;
                    *n += 1;
                }
                slot => *slot = Some((m, 1)),
            }
        }
        Ok(Self {
            per_class: sums
                .into_iter()
                .map(|s| s.map(|(acc, n)| acc / n as f64))
                .collect(),
        })
    }

    /// Fills empty classes with `n_channels` copies of the phase-locked
    /// sinusoidal model `Σ_h sin(2πhft + hθ)/h`.
    pub fn fill_missing_with_sinusoids(
        &mut self,
        table: &FrequencyTable,
        n_h: usize,
        fs_hz: f64,
        n_channels: usize,
        n_samples: usize,
    ) {
        for (class, slot) in self.per_class.iter_mut().enumerate() {
            if slot.is_some() {
                continue;
            }
            let Some(s) = table.get(class) else { continue };
            let row: Vec<f64> = (0..n_samples)
                .map(|t| {
                    (1..=n_h)
                        .map(|h| {
                            let h = h as f64;
                            (2.0 * PI * h * s.freq_hz * t as f64 / fs_hz + h * s.phase_rad).sin()
                                / h
                        })
                        .sum()
                })
                .collect();
            *slot = Some(DMatrix::from_fn(n_channels, n_samples, |_, t| row[t]));
        }
    }
}

/// Signed-square sum of the four extended-CCA correlations per class.
pub fn ecca_scores(e: &Epoch, templates: &Templates, refs: &ReferenceSignals) -> Result<Vec<f64>> {
    check_refs(e, refs)?;
    let x = epoch_matrix(e);
    let xt = x.transpose();
    let signed_sq = |r: f64| r.signum() * r * r;
    let mut scores = Vec::with_capacity(refs.per_class.len());
    for (class, y) in refs.per_class.iter().enumerate() {
        let tmpl = templates
            .per_class
            .get(class)
            .and_then(Option::as_ref)
            .ok_or(Error::MissingTemplate(class))?;
        if tmpl.shape() != x.shape() {
            return Err(Error::Dimension(format!(
                "template {class} shape differs from the epoch"
            )));
        }
        let tt = tmpl.transpose();
        let mut score = 0.0;
        match cca(&x, y) {
            Ok(c) => {
                score += signed_sq(c.rho);
                score += signed_sq(pearson_or_zero(&(&xt * &c.wx), &(&tt * &c.wx)));
            }
            Err(Error::RankDeficient) => {}
            Err(e) => return Err(e),
        }
        match cca(&x, tmpl) {
            Ok(c) => score += signed_sq(pearson_or_zero(&(&xt * &c.wx), &(&tt * &c.wx))),
            Err(Error::RankDeficient) => {}
            Err(e) => return Err(e),
        }
        match cca(tmpl, y) {
            Ok(c) => score += signed_sq(pearson_or_zero(&(&xt * &c.wx), &(&tt * &c.wx))),
            Err(Error::RankDeficient) => {}
            Err(e) => return Err(e),
        }
        scores.push(score);
    }
    Ok(scores)
}

pub fn ecca_classify(e: &Epoch, templates: &Templates, refs: &ReferenceSignals) -> Result<usize> {
    ecca_scores(e, templates, refs).map(|s| Prediction::from_logits(s).class_index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::signal::{generate_ssvep, SsvepParams};
    use rand_distr::{Distribution, StandardNormal};

    fn noise(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut r = rng::stream("cca-test", seed);
        DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut r))
    }

    #[test]
    fn cca_self_noise_and_mixing() {
        let x = noise(3, 500, 1);
        assert!((cca_corr(&x, &x).unwrap() - 1.0).abs() < 1e-6);

        let mut worst: f64 = 0.0;
        for seed in 0..30 {
            let a = noise(2, 1000, 100 + seed);
            let b = noise(2, 1000, 200 + seed);
            worst = worst.max(cca_corr(&a, &b).unwrap());
        }
        assert!(worst <= 0.2, "null correlation {worst}");

        let y = noise(3, 800, 2);
        let mix = noise(4, 3, 3);
        let x = &mix * &y + noise(4, 800, 4) * 1e-3;
        assert!(cca_corr(&x, &y).unwrap() >= 0.99);
    }

    #[test]
    fn cca_symmetry_and_recombination_invariance() {
        let x = noise(3, 400, 5);
        let y = &noise(2, 3, 6) * &x + noise(2, 400, 7);
        let a = cca_corr(&x, &y).unwrap();
        assert!((a - cca_corr(&y, &x).unwrap()).abs() < 1e-9);
        let mix = noise(3, 3, 8);
        assert!((a - cca_corr(&(&mix * &x), &y).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn single_row_cca_is_abs_pearson() {
        // One row each: CCA reduces to |Pearson|.
        let x = noise(1, 300, 9);
        let y = &x * -0.5 + noise(1, 300, 10);
        let r = pearson_or_zero(&x.row(0).transpose(), &y.row(0).transpose());
        assert!((cca_corr(&x, &y).unwrap() - r.abs()).abs() < 1e-7);
    }

    #[test]
    fn zero_input_is_rank_deficient() {
        let z = DMatrix::zeros(2, 100);
        assert!(matches!(
            cca_corr(&z, &noise(2, 100, 1)),
            Err(Error::RankDeficient)
        ));
    }

    #[test]
    fn references_shape_and_orthogonality() {
        let table = FrequencyTable::from_freqs(&[10.0], 0.0).unwrap();
        let r = build_references(&table, 1, 250.0, 250).unwrap();
        assert_eq!(r.per_class[0].nrows(), 2);

        let freqs: Vec<f64> = (0..40).map(|i| 8.0 + 0.2 * i as f64).collect();
        let table = FrequencyTable::from_freqs(&freqs, 0.0).unwrap();
        let r = build_references(&table, 4, 250.0, 250).unwrap();
        assert_eq!(r.per_class.len(), 40);
        assert!(r.per_class.iter().all(|m| m.nrows() == 8));

        let table = FrequencyTable::from_freqs(&[10.0, 12.0], 0.0).unwrap();
        let r = build_references(&table, 3, 250.0, 250).unwrap();
        for m in &r.per_class {
            let g = m * m.transpose();
            for i in 0..g.nrows() {
                assert!((g[(i, i)] - 1.0).abs() < 1e-12);
                for j in 0..i {
                    assert!(g[(i, j)].abs() <= 1e-9);
                }
            }
        }
        assert!(matches!(
            build_references(&table, 11, 250.0, 250),
            Err(Error::Nyquist { .. })
        ));
    }

    fn table_8_to_15_8() -> FrequencyTable {
        let freqs: Vec<f64> = (0..40).map(|i| 8.0 + 0.2 * i as f64).collect();
        FrequencyTable::from_freqs(&freqs, 0.35 * PI).unwrap()
    }

    fn params(sigma: f64, duration: f64) -> SsvepParams {
        SsvepParams {
            harmonic_amps: vec![1.0, 0.5],
            fs_hz: 250.0,
            duration_s: duration,
            noise_sigma: sigma,
            channel_gains: vec![1.0, 0.8, 0.6],
        }
    }

    #[test]
    fn fbcca_noiseless_and_scale_invariant() {
        let table = table_8_to_15_8();
        let class = table.class_of(10.0).unwrap();
        let e = generate_ssvep(*table.get(class).unwrap(), &params(0.0, 1.0), 0, 1).unwrap();
        let refs = build_references(&table, 5, 250.0, e.n_samples()).unwrap();
        let sb = SubbandSpec::default();
        assert_eq!(fbcca_classify(&e, &refs, &sb).unwrap(), class);
        let bank = sb.bank(250.0).unwrap();
        let a = fbcca_scores(&e, &refs, &bank).unwrap();
        let b = fbcca_scores(&e.scaled(37.0).unwrap(), &refs, &bank).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-9);
        }
        let zero = Epoch::zeros(3, 250, 250.0, e.stimulus).unwrap();
        assert_eq!(fbcca_classify(&zero, &refs, &sb).unwrap(), 0);
    }

    #[test]
    fn single_subband_agrees_with_plain_cca() {
        let table =
            FrequencyTable::from_freqs(&(8..16).map(f64::from).collect::<Vec<_>>(), 0.5).unwrap();
        let refs = build_references(&table, 5, 250.0, 250).unwrap();
        let sb = SubbandSpec {
            n_subbands: 1,
            ..SubbandSpec::default()
        };
        for trial in 0..50u32 {
            let spec = *table.get(trial as usize % 8).unwrap();
            let e = generate_ssvep(spec, &params(0.5, 1.0), trial, 77).unwrap();
            assert_eq!(
                fbcca_classify(&e, &refs, &sb).unwrap(),
                cca_classify(&e, &refs).unwrap()
            );
        }
    }

    #[test]
    fn ecca_templates() {
        let table = table_8_to_15_8();
        let p = params(0.0, 1.0);
        let refs = build_references(&table, 5, 250.0, 250).unwrap();
        let epochs: Vec<Epoch> = (0..40 * 5)
            .map(|i| generate_ssvep(*table.get(i % 40).unwrap(), &p, i as u32, 3).unwrap())
            .collect();
        let templates = Templates::from_epochs(&epochs, 40).unwrap();
        let correct = (0..40)
            .filter(|&c| {
                let e = generate_ssvep(*table.get(c).unwrap(), &p, 1000 + c as u32, 4).unwrap();
                ecca_classify(&e, &templates, &refs).unwrap() == c
            })
            .count();
        assert_eq!(correct, 40);

        let mut dup = templates.clone();
        dup.per_class[1] = dup.per_class[0].clone();
        let e = &epochs[0];
        assert_eq!(ecca_classify(e, &dup, &refs).unwrap(), 0);

        let mut missing = templates;
        missing.per_class[3] = None;
        assert!(matches!(
            ecca_classify(e, &missing, &refs),
            Err(Error::MissingTemplate(3))
        ));
    }
}
