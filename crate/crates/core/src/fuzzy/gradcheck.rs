use rand::seq::index;

use super::{FeatureMatrix, FuzzyModel, ParamGroup};
use crate::error::Result;
use crate::rng;

/// Coordinates sampled per parameter group (all of them if fewer).
pub const COORDS_PER_GROUP: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates whose ±h step crosses a kink of |·| or ReLU.
    pub skipped: usize,
    pub per_group: Vec<(ParamGroup, f64)>,
}

/// Relative error with both-tiny pairs treated as exact.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    if analytic.abs() < 1e-12 && numeric.abs() < 1e-12 {
        return 0.0;
    }
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs())
}

/// Compares the analytic cross-entropy gradient with central differences.
pub fn grad_check(
    model: &FuzzyModel,
    sample: (&FeatureMatrix, usize),
    h: f64,
) -> Result<GradCheckReport> {
    let (x, y) = sample;
    let mut analytic = vec![0.0; model.params.len()];
    model.loss_and_grad(x, y, &mut analytic)?;
    let base_sig = model.kink_signature(x)?;
    let mut rng = rng::stream("grad-check", 0);
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped: 0,
        per_group: Vec::new(),
    };
    for group in ParamGroup::ALL {
        let range = model.group_range(group);
        let picks = index::sample(&mut rng, range.len(), range.len().min(COORDS_PER_GROUP));
        let mut worst: f64 = 0.0;
        for k in picks {
            let idx = range.start + k;
            let orig = model.params[idx];
            probe.params[idx] = orig + h;
            let sig_plus = probe.kink_signature(x)?;
            let plus = probe.loss(x, y)?;
            probe.params[idx] = orig - h;
            let sig_minus = probe.kink_signature(x)?;
            let minus = probe.loss(x, y)?;
            probe.params[idx] = orig;
            if sig_plus != base_sig || sig_minus != base_sig {
                report.skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * h);
            worst = worst.max(relative_error(analytic[idx], numeric));
            report.checked += 1;
        }
        report.per_group.push((group, worst));
        report.max_rel_error = report.max_rel_error.max(worst);
    }
    Ok(report)
}
