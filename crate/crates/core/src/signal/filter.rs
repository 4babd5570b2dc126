//! Chebyshev type-I band-pass design, 50 Hz notch, and zero-phase
//! second-order-section filtering.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::Epoch;
use crate::error::{Error, Result};

/// Passband ripple of the Chebyshev design, in dB.
pub const PASS_RIPPLE_DB: f64 = 0.5;
/// Stopband edges sit this far outside the passband (low, high side).
pub const STOP_MARGIN_HZ: (f64, f64) = (2.0, 10.0);
pub const DEFAULT_NOTCH_Q: f64 = 35.0;
const MAX_ORDER: usize = 24;

/// Cascade of biquads `[b0, b1, b2, a0, a1, a2]` with `a0 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sos {
    pub sections: Vec<[f64; 6]>,
}

impl Sos {
    /// Magnitude response at `freq_hz`.
    pub fn magnitude(&self, freq_hz: f64, fs_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / fs_hz;
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        self.sections
            .iter()
            .map(|s| {
                let num = s[0] + s[1] * z1 + s[2] * z2;
                let den = s[3] + s[4] * z1 + s[5] * z2;
                (num / den).norm()
            })
            .product()
    }

    /// Steady-state step-response state per section (transposed direct form II).
    fn step_state(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let gain = (s[0] + s[1] + s[2]) / (s[3] + s[4] + s[5]);
                let z2 = s[2] - s[5] * gain;
                let z1 = s[1] - s[4] * gain + z2;
                let state = [scale * z1, scale * z2];
                scale *= gain;
                state
            })
            .collect()
    }

    fn run(&self, x: &mut [f64], mut state: Vec<[f64; 2]>) {
        for (s, z) in self.sections.iter().zip(state.iter_mut()) {
            for v in x.iter_mut() {
                let input = *v;
                let y = s[0] * input + z[0];
                z[0] = s[1] * input - s[4] * y + z[1];
                z[1] = s[2] * input - s[5] * y;
                *v = y;
            }
        }
    }

    /// Single causal pass from rest.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.run(&mut y, vec![[0.0; 2]; self.sections.len()]);
        y
    }

    /// Forward-backward filtering with odd extension and steady-state
    /// initial conditions, so the result has zero phase.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n < 2 {
            return x.to_vec();
        }
        let trivial_b2 = self.sections.iter().filter(|s| s[2] == 0.0).count();
        let trivial_a2 = self.sections.iter().filter(|s| s[5] == 0.0).count();
        let padlen = (3 * (2 * self.sections.len() + 1 - trivial_b2.min(trivial_a2))).min(n - 1);

        let mut ext = Vec::with_capacity(n + 2 * padlen);
        ext.extend((1..=padlen).rev().map(|i| 2.0 * x[0] - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=padlen).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let zi = self.step_state();
        let scaled = |x0: f64| {
            zi.iter()
                .map(|z| [z[0] * x0, z[1] * x0])
                .collect::<Vec<_>>()
        };

        let x0 = ext[0];
        self.run(&mut ext, scaled(x0));
        ext.reverse();
        let y0 = ext[0];
        self.run(&mut ext, scaled(y0));
        ext.reverse();
        ext[padlen..padlen + n].to_vec()
    }
}

/// Minimum Chebyshev type-I band-pass order meeting `rs_db` stopband
/// attenuation at `stop` with `rp_db` ripple over `pass`.
pub fn cheb1_bandpass_order(
    pass: (f64, f64),
    stop: (f64, f64),
    rp_db: f64,
    rs_db: f64,
    fs_hz: f64,
) -> Result<usize> {
    let warp = |f: f64| (PI * f / fs_hz).tan();
    let (p0, p1) = (warp(pass.0), warp(pass.1));
    let nat = [warp(stop.0), warp(stop.1)]
        .iter()
        .map(|&s| ((s * s - p0 * p1) / (s * (p0 - p1))).abs())
        .fold(f64::INFINITY, f64::min);
    if !(nat > 1.0) {
        return Err(Error::FilterDesign(format!(
            "stopband edges {stop:?} do not enclose passband {pass:?}"
        )));
    }
    let gstop = 10f64.powf(0.1 * rs_db.abs());
    let gpass = 10f64.powf(0.1 * rp_db.abs());
    let ratio = ((gstop - 1.0) / (gpass - 1.0)).sqrt().acosh();
    let order = (ratio / nat.acosh()).ceil() as usize;
    Ok(order.max(1))
}

/// Digital Chebyshev type-I band-pass of the given order, as biquads.
pub fn cheb1_bandpass(order: usize, rp_db: f64, pass: (f64, f64), fs_hz: f64) -> Result<Sos> {
    if order == 0 || order > MAX_ORDER {
        return Err(Error::FilterDesign(format!(
            "order {order} outside 1..={MAX_ORDER}"
        )));
    }
    // Analog low-pass prototype.
    let eps = (10f64.powf(0.1 * rp_db) - 1.0).sqrt();
    let mu = (1.0 / eps).asinh() / order as f64;
    let proto: Vec<Complex64> = (0..order)
        .map(|i| {
            let m = -(order as f64) + 1.0 + 2.0 * i as f64;
            let theta = PI * m / (2.0 * order as f64);
            -Complex64::new(mu, theta).sinh()
        })
        .collect();
    let mut gain = proto
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, p| acc * -p)
        .re;
    if order.is_multiple_of(2) {
        gain /= (1.0 + eps * eps).sqrt();
    }

    // Pre-warped band edges, low-pass to band-pass transform.
    let fs2 = 2.0 * fs_hz;
    let lo = fs2 * (PI * pass.0 / fs_hz).tan();
    let hi = fs2 * (PI * pass.1 / fs_hz).tan();
    let bw = hi - lo;
    let wo2 = lo * hi;
    let mut poles = Vec::with_capacity(2 * order);
    for p in &proto {
        let p = p * bw / 2.0;
        let disc = (p * p - wo2).sqrt();
        poles.push(p + disc);
        poles.push(p - disc);
    }
    gain *= bw.powi(order as i32);

    // Bilinear transform: `order` zeros at z = 1 (from s = 0) and `order`
    // at z = -1 (from infinity).
    let digital: Vec<Complex64> = poles.iter().map(|p| (fs2 + p) / (fs2 - p)).collect();
    let den = poles
        .iter()
        .fold(Complex64::new(1.0, 0.0), |acc, p| acc * (fs2 - p));
    gain *= (Complex64::new(fs2.powi(order as i32), 0.0) / den).re;

    let pairs = pair_poles(&digital)?;
    let per_section = gain.abs().powf(1.0 / pairs.len() as f64);
    let sign = gain.signum();
    let sections = pairs
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let g = if i == 0 {
                per_section * sign
            } else {
                per_section
            };
            [g, 0.0, -g, 1.0, a[0], a[1]]
        })
        .collect();
    Ok(Sos { sections })
}

/// Groups poles into conjugate (or real) pairs, returning `[a1, a2]` of
/// each denominator `1 + a1 z^-1 + a2 z^-2`.
fn pair_poles(poles: &[Complex64]) -> Result<Vec<[f64; 2]>> {
    const TOL: f64 = 1e-10;
    let mut complex: Vec<Complex64> = poles.iter().copied().filter(|p| p.im > TOL).collect();
    let mut real: Vec<f64> = poles
        .iter()
        .filter(|p| p.im.abs() <= TOL)
        .map(|p| p.re)
        .collect();
    let n_lower = poles.iter().filter(|p| p.im < -TOL).count();
    if n_lower != complex.len() || !real.len().is_multiple_of(2) {
        return Err(Error::FilterDesign(
            "poles do not form conjugate pairs".into(),
        ));
    }
    complex.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    real.sort_by(f64::total_cmp);
    let mut out: Vec<[f64; 2]> = complex
        .iter()
        .map(|p| [-2.0 * p.re, p.norm_sqr()])
        .collect();
    out.extend(real.chunks_exact(2).map(|r| [-(r[0] + r[1]), r[0] * r[1]]));
    if out.iter().any(|a| a[1].abs() >= 1.0) {
        return Err(Error::FilterDesign("unstable pole pair".into()));
    }
    Ok(out)
}

/// Band-pass with passband `(lo, hi)` and stopband edges `stop`, order
/// chosen as the minimum meeting `gstop_db`.
pub fn design_bandpass(
    pass: (f64, f64),
    stop: (f64, f64),
    gstop_db: f64,
    fs_hz: f64,
) -> Result<Sos> {
    let nyq = fs_hz / 2.0;
    if !(pass.0 > 0.0 && pass.0 < pass.1 && pass.1 < nyq) {
        return Err(Error::FilterDesign(format!(
            "passband {pass:?} must satisfy 0 < lo < hi < {nyq}"
        )));
    }
    if !(stop.0 > 0.0 && stop.0 < pass.0 && stop.1 > pass.1 && stop.1 < nyq) {
        return Err(Error::FilterDesign(format!(
            "stopband edges {stop:?} infeasible for fs = {fs_hz} Hz"
        )));
    }
    let order = cheb1_bandpass_order(pass, stop, PASS_RIPPLE_DB, gstop_db, fs_hz)?;
    cheb1_bandpass(order, PASS_RIPPLE_DB, pass, fs_hz)
}

/// Second-order IIR notch at `freq_hz` with quality factor `q` (-3 dB width
/// `freq/q`).
pub fn notch(freq_hz: f64, q: f64, fs_hz: f64) -> Result<Sos> {
    if !(q > 0.0) || !(freq_hz > 0.0 && freq_hz < fs_hz / 2.0) {
        return Err(Error::FilterDesign(format!(
            "notch at {freq_hz} Hz, q = {q} invalid"
        )));
    }
    let w0 = 2.0 * PI * freq_hz / fs_hz;
    let bw = w0 / q;
    let beta = (bw / 2.0).tan();
    let gain = 1.0 / (1.0 + beta);
    let c = w0.cos();
    Ok(Sos {
        sections: vec![[
            gain,
            -2.0 * gain * c,
            gain,
            1.0,
            -2.0 * gain * c,
            2.0 * gain - 1.0,
        ]],
    })
}

/// Zero-phase Chebyshev band-pass over every channel.
pub fn chebyshev_bandpass(e: &Epoch, lo_hz: f64, hi_hz: f64, gstop_db: f64) -> Result<Epoch> {
    let stop = (lo_hz - STOP_MARGIN_HZ.0, hi_hz + STOP_MARGIN_HZ.1);
    let sos = design_bandpass((lo_hz, hi_hz), stop, gstop_db, e.fs_hz)?;
    e.map_channels(|c| Ok(sos.filtfilt(c)))
}

/// Zero-phase 50 Hz notch over every channel.
pub fn notch_50hz(e: &Epoch, q: f64) -> Result<Epoch> {
    if e.fs_hz <= 100.0 {
        return Err(Error::invalid(format!(
            "50 Hz notch needs fs > 100 Hz, got {}",
            e.fs_hz
        )));
    }
    let sos = notch(50.0, q, e.fs_hz)?;
    e.map_channels(|c| Ok(sos.filtfilt(c)))
}

/// Drops the first `⌊t·fs⌋` samples of every channel.
pub fn discard_head(e: &Epoch, t_discard_s: f64) -> Result<Epoch> {
    if !(t_discard_s >= 0.0) {
        return Err(Error::invalid("discard time must be non-negative"));
    }
    // Guard against products like 0.14 * 250 = 34.99999...
    let drop = (t_discard_s * e.fs_hz + 1e-9).floor() as usize;
    if drop >= e.n_samples() {
        return Err(Error::invalid(format!(
            "discarding {drop} samples leaves nothing of {}",
            e.n_samples()
        )));
    }
    if drop == 0 {
        return Ok(e.clone());
    }
    e.slice(drop, e.n_samples())
}

/// Preprocessing chain: band-pass, optional notch, head discard.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Preprocess {
    pub band: Option<(f64, f64)>,
    pub gstop_db: f64,
    pub notch_q: Option<f64>,
    pub discard_s: f64,
}

impl Default for Preprocess {
    fn default() -> Self {
        Self {
            band: Some((7.0, 70.0)),
            gstop_db: 40.0,
            notch_q: Some(DEFAULT_NOTCH_Q),
            discard_s: 0.14,
        }
    }
}

impl Preprocess {
    /// Variant for recordings whose head also carries a visual cue.
    pub fn with_cue() -> Self {
        Self {
            discard_s: 0.64,
            ..Self::default()
        }
    }

    pub fn none() -> Self {
        Self {
            band: None,
            gstop_db: 40.0,
            notch_q: None,
            discard_s: 0.0,
        }
    }

    pub fn apply(&self, e: &Epoch) -> Result<Epoch> {
        let mut out = match self.band {
            Some((lo, hi)) => chebyshev_bandpass(e, lo, hi, self.gstop_db)?,
            None => e.clone(),
        };
        if let Some(q) = self.notch_q {
            out = notch_50hz(&out, q)?;
        }
        discard_head(&out, self.discard_s)
    }

    /// Raw samples needed so that `window_s` remain after the discard.
    pub fn raw_len_for(&self, window_s: f64, fs_hz: f64) -> usize {
        let drop = (self.discard_s * fs_hz + 1e-9).floor() as usize;
        drop + (window_s * fs_hz).round() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::StimulusSpec;
    use rand::Rng;

    fn tone(freq: f64, fs: f64, seconds: f64) -> Vec<f64> {
        let n = (fs * seconds) as usize;
        (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / fs).sin())
            .collect()
    }

    fn epoch(x: Vec<f64>, fs: f64) -> Epoch {
        Epoch::new(x, 1, fs, StimulusSpec::new(10.0, 0.0, 0).unwrap(), 0).unwrap()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    fn trim(x: &[f64], k: usize) -> &[f64] {
        &x[k..x.len() - k]
    }

    #[test]
    fn order_matches_reference_design() {
        // Reference orders from an independent filter-design implementation.
        assert_eq!(
            cheb1_bandpass_order((7.0, 70.0), (5.0, 80.0), 0.5, 40.0, 250.0).unwrap(),
            8
        );
        assert_eq!(
            cheb1_bandpass_order((7.0, 70.0), (5.0, 80.0), 0.5, 40.0, 500.0).unwrap(),
            11
        );
        assert_eq!(
            cheb1_bandpass_order((6.0, 88.0), (4.0, 98.0), 0.5, 40.0, 250.0).unwrap(),
            7
        );
    }

    #[test]
    fn response_matches_reference_design() {
        let sos = design_bandpass((7.0, 70.0), (5.0, 80.0), 40.0, 250.0).unwrap();
        let expected = [
            (2.0, 6.4e-07),
            (5.0, 0.00358655),
            (7.0, 0.94406088),
            (10.0, 0.96741481),
            (30.0, 0.97757454),
            (70.0, 0.94406088),
            (80.0, 0.00882783),
            (100.0, 1.007e-05),
        ];
        for (f, m) in expected {
            let got = sos.magnitude(f, 250.0);
            assert!((got - m).abs() < 1e-6 + 1e-5 * m, "{f} Hz: {got} vs {m}");
        }
    }

    #[test]
    fn filtfilt_matches_reference_samples() {
        let t = |i: usize| i as f64 / 250.0;
        let x: Vec<f64> = (0..500)
            .map(|i| (2.0 * PI * 30.0 * t(i)).sin() + 0.3 * (2.0 * PI * 3.0 * t(i)).cos())
            .collect();
        let sos = design_bandpass((7.0, 70.0), (5.0, 80.0), 40.0, 250.0).unwrap();
        let y = sos.filtfilt(&x);
        let expected = [
            (0, -0.015829457681273584),
            (1, 0.6433145980826026),
            (100, 0.0031596464237053368),
            (250, 0.009219164292453716),
            (499, 0.07940185552234554),
        ];
        for (i, v) in expected {
            assert!((y[i] - v).abs() < 1e-8, "sample {i}: {} vs {v}", y[i]);
        }
        let n = notch(50.0, 35.0, 250.0).unwrap();
        let y = n.filtfilt(&x);
        let expected = [
            (0, 0.2997885481572211),
            (1, 0.9934551084459904),
            (100, 0.09265703394023504),
            (250, 0.299948747932621),
            (499, -0.3753375472967242),
        ];
        for (i, v) in expected {
            assert!((y[i] - v).abs() < 1e-9, "sample {i}: {} vs {v}", y[i]);
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let e = epoch(vec![0.0; 500], 250.0);
        assert!(chebyshev_bandpass(&e, 7.0, 70.0, 40.0)
            .unwrap()
            .data()
            .iter()
            .all(|v| *v == 0.0));
        assert!(notch_50hz(&e, 35.0)
            .unwrap()
            .data()
            .iter()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn bandpass_passes_30hz_and_rejects_2hz() {
        let x = tone(30.0, 250.0, 4.0);
        let y = chebyshev_bandpass(&epoch(x.clone(), 250.0), 7.0, 70.0, 40.0).unwrap();
        let ratio = rms(trim(y.channel(0), 125)) / rms(trim(&x, 125));
        assert!((0.9..=1.1).contains(&ratio), "passband ratio {ratio}");

        let x = tone(2.0, 250.0, 4.0);
        let y = chebyshev_bandpass(&epoch(x.clone(), 250.0), 7.0, 70.0, 40.0).unwrap();
        let ratio = rms(trim(y.channel(0), 125)) / rms(trim(&x, 125));
        assert!(
            ratio <= 10f64.powf(-40.0 / 20.0) * 2.0,
            "stopband ratio {ratio}"
        );
    }

    #[test]
    fn notch_rejects_mains_and_keeps_alpha() {
        let x = tone(50.0, 250.0, 4.0);
        let y = notch_50hz(&epoch(x.clone(), 250.0), DEFAULT_NOTCH_Q).unwrap();
        let ratio = rms(trim(y.channel(0), 125)) / rms(trim(&x, 125));
        assert!(ratio <= 0.1, "50 Hz ratio {ratio}");

        let x = tone(10.0, 250.0, 4.0);
        let y = notch_50hz(&epoch(x.clone(), 250.0), DEFAULT_NOTCH_Q).unwrap();
        let ratio = rms(y.channel(0)) / rms(&x);
        assert!(ratio >= 0.95, "10 Hz ratio {ratio}");
        assert!(notch_50hz(&epoch(vec![0.0; 100], 100.0), 35.0).is_err());
    }

    #[test]
    fn filtering_is_linear() {
        let mut rng = crate::rng::stream("filter-linearity", 3);
        let sos = design_bandpass((7.0, 70.0), (5.0, 80.0), 40.0, 250.0).unwrap();
        let x: Vec<f64> = (0..750).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..750).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (a, b) = (1.7, -0.4);
        let mix: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
        let lhs = sos.filtfilt(&mix);
        let fx = sos.filtfilt(&x);
        let fy = sos.filtfilt(&y);
        let scale = lhs.iter().map(|v| v.abs()).fold(0.0, f64::max);
        for i in 0..750 {
            assert!((lhs[i] - (a * fx[i] + b * fy[i])).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn zero_phase_has_no_lag() {
        let x = tone(20.0, 250.0, 4.0);
        let y = chebyshev_bandpass(&epoch(x.clone(), 250.0), 7.0, 70.0, 40.0).unwrap();
        let y = y.channel(0);
        let xs = trim(&x, 250);
        let best = (-6i64..=6)
            .max_by(|&a, &b| {
                let corr = |lag: i64| -> f64 {
                    xs.iter()
                        .enumerate()
                        .map(|(i, v)| v * y[(250 + i as i64 + lag) as usize])
                        .sum()
                };
                corr(a).total_cmp(&corr(b))
            })
            .unwrap();
        assert_eq!(best, 0);
    }

    #[test]
    fn infeasible_design_is_rejected() {
        let e = epoch(vec![0.0; 200], 100.0);
        assert!(matches!(
            chebyshev_bandpass(&e, 7.0, 70.0, 40.0),
            Err(Error::FilterDesign(_))
        ));
        assert!(chebyshev_bandpass(&epoch(vec![0.0; 500], 250.0), 1.0, 70.0, 40.0).is_err());
    }

    #[test]
    fn discard_head_counts() {
        let e = epoch(vec![0.0; 1500], 250.0);
        assert_eq!(discard_head(&e, 0.0).unwrap(), e);
        assert_eq!(discard_head(&e, 0.14).unwrap().n_samples(), 1465);
        assert_eq!(discard_head(&e, 0.64).unwrap().n_samples(), 1340);
        assert!(discard_head(&e, 6.0).is_err());
    }
}
