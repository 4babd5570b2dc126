use super::Epoch;
use crate::error::{Error, Result};

/// Fixed-length windows advancing by `stride_s`.
///
/// Count is `⌊(duration − win)/stride⌋ + 1`; every window keeps the parent's
/// stimulus and trial id.
pub fn sliding_windows(e: &Epoch, win_s: f64, stride_s: f64) -> Result<Vec<Epoch>> {
    if !(stride_s > 0.0) || !stride_s.is_finite() {
        return Err(Error::invalid("stride must be positive"));
    }
    let win = window_len(e, win_s)?;
    let stride = (stride_s * e.fs_hz).round().max(1.0) as usize;
    let count = (e.n_samples() - win) / stride + 1;
    (0..count)
        .map(|i| e.slice(i * stride, i * stride + win))
        .collect()
}

/// The leading window, which is what a single online decision sees.
pub fn first_window(e: &Epoch, win_s: f64) -> Result<Epoch> {
    let win = window_len(e, win_s)?;
    if win == e.n_samples() {
        return Ok(e.clone());
    }
    e.slice(0, win)
}

fn window_len(e: &Epoch, win_s: f64) -> Result<usize> {
    if !(win_s > 0.0) || !win_s.is_finite() {
        return Err(Error::invalid("window length must be positive"));
    }
    let win = (win_s * e.fs_hz).round() as usize;
    if win > e.n_samples() {
        return Err(Error::invalid(format!(
            "window of {win_s} s longer than epoch of {} s",
            e.duration_s()
        )));
    }
    if win < 2 {
        return Err(Error::invalid("window shorter than two samples"));
    }
    Ok(win)
}
