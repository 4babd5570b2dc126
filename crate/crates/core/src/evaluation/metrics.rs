use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Fraction of positions where `preds` equals `truth`.
pub fn accuracy(preds: &[usize], truth: &[usize]) -> Result<f64> {
    if preds.is_empty() || preds.len() != truth.len() {
        return Err(Error::invalid(format!(
            "accuracy over {} predictions and {} labels",
            preds.len(),
            truth.len()
        )));
    }
    let correct = preds.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(correct as f64 / preds.len() as f64)
}

/// Information transfer rate in bits per minute.
///
/// `(60/T)·[log2 N + P log2 P + (1−P) log2((1−P)/(N−1))]`, with `0·log 0 = 0`.
/// Exactly zero at chance.
pub fn itr(p_acc: f64, n_classes: usize, t_total_s: f64) -> Result<f64> {
    if n_classes < 2
        || !(0.0..=1.0).contains(&p_acc)
        || !(t_total_s > 0.0)
        || !t_total_s.is_finite()
    {
        return Err(Error::invalid(format!(
            "itr needs N ≥ 2, P in [0, 1], T > 0 (got N = {n_classes}, P = {p_acc}, T = {t_total_s})"
        )));
    }
    let n = n_classes as f64;
    if (p_acc * n - 1.0).abs() < 1e-12 {
        return Ok(0.0);
    }
    let xlog = |x: f64, arg: f64| if x > 0.0 { x * arg.log2() } else { 0.0 };
    let bits = n.log2() + xlog(p_acc, p_acc) + xlog(1.0 - p_acc, (1.0 - p_acc) / (n - 1.0));
    Ok(60.0 / t_total_s * bits.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TTest {
    pub t: f64,
    /// Two-sided.
    pub p: f64,
    pub dof: usize,
}

/// Two-sided paired t-test on matched samples.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() || a.len() < 3 {
        return Err(Error::invalid(format!(
            "paired t-test needs two equal-length samples of at least 3 (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (mean, sd) = mean_std(&d);
    if !(sd > 0.0) {
        return Err(Error::ZeroVariance("paired differences"));
    }
    let n = d.len();
    let t = mean / (sd / (n as f64).sqrt());
    let dist =
        StudentsT::new(0.0, 1.0, (n - 1) as f64).map_err(|e| Error::invalid(e.to_string()))?;
    Ok(TTest {
        t,
        p: (2.0 * dist.sf(t.abs())).min(1.0),
        dof: n - 1,
    })
}

/// Mean and sample standard deviation (`n − 1`); the deviation is 0 for
/// fewer than two values.
pub fn mean_std(x: &[f64]) -> (f64, f64) {
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
