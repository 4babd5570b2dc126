use std::io::{BufWriter, Write};
use std::net::TcpStream;
use std::thread;
use std::time::{Duration, Instant};

use super::protocol::{StreamFrame, FRAME_HEADER_LEN};
use crate::error::{Error, Result};
use crate::signal::Epoch;

#[derive(Debug, Clone, PartialEq)]
pub struct ProducerOptions {
    pub chunk_ms: u32,
    /// Pace frames to the wall clock.
    pub realtime: bool,
    /// Send trials chunk by chunk in round-robin order instead of one after
    /// another.
    pub interleave: bool,
    /// Pause between consecutive trials (cue/rest emulation).
    pub inter_trial_gap: Duration,
}

impl Default for ProducerOptions {
    fn default() -> Self {
        Self {
            chunk_ms: 40,
            realtime: false,
            interleave: false,
            inter_trial_gap: Duration::ZERO,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ProducerStats {
    pub frames: u64,
    pub bytes: u64,
}

pub fn chunk_samples(fs_hz: f64, chunk_ms: u32) -> usize {
    ((fs_hz * chunk_ms as f64 / 1000.0).round() as usize).max(1)
}

fn frames_of(e: &Epoch, chunk: usize) -> Result<Vec<StreamFrame>> {
    let n_ch = u16::try_from(e.n_channels())
        .map_err(|_| Error::invalid("too many channels for a frame"))?;
    let chunk = chunk.min(u16::MAX as usize);
    let n = e.n_samples();
    Ok((0..n.div_ceil(chunk))
        .map(|k| {
            let (a, b) = (k * chunk, ((k + 1) * chunk).min(n));
            StreamFrame {
                trial_id: e.trial_id,
                chunk_index: k as u32,
                n_channels: n_ch,
                n_samples: (b - a) as u16,
                samples: e
                    .channels()
                    .flat_map(|c| c[a..b].iter().map(|v| *v as f32))
                    .collect(),
            }
        })
        .collect())
}

/// Streams every trial to `endpoint`. Each trial is cut into chunks of
/// `chunk_ms`; the last chunk may be shorter.
pub fn stream_producer(
    trials: &[Epoch],
    endpoint: &str,
    opts: &ProducerOptions,
) -> Result<ProducerStats> {
    if opts.chunk_ms == 0 {
        return Err(Error::invalid("chunk duration must be positive"));
    }
    let per_trial: Vec<Vec<StreamFrame>> = trials
        .iter()
        .map(|e| frames_of(e, chunk_samples(e.fs_hz, opts.chunk_ms)))
        .collect::<Result<_>>()?;
    let order: Vec<(usize, usize)> = if opts.interleave {
        let longest = per_trial.iter().map(Vec::len).max().unwrap_or(0);
        (0..longest)
            .flat_map(|k| (0..per_trial.len()).map(move |t| (t, k)))
            .filter(|(t, k)| *k < per_trial[*t].len())
            .collect()
    } else {
        per_trial
            .iter()
            .enumerate()
            .flat_map(|(t, f)| (0..f.len()).map(move |k| (t, k)))
            .collect()
    };

    let stream = TcpStream::connect(endpoint)
        .map_err(|e| Error::Protocol(format!("cannot connect to {endpoint}: {e}")))?;
    stream.set_nodelay(true).ok();
    let mut w = BufWriter::new(stream);
    let mut stats = ProducerStats::default();
    let start = Instant::now();
    let mut stream_time = Duration::ZERO;
    let mut last_trial = None;
    for (t, k) in order {
        if !opts.interleave && last_trial.is_some_and(|p| p != t) && !opts.inter_trial_gap.is_zero()
        {
            w.flush().ok();
            thread::sleep(opts.inter_trial_gap);
            stream_time += opts.inter_trial_gap;
        }
        last_trial = Some(t);
        let frame = &per_trial[t][k];
        if opts.realtime {
            stream_time += Duration::from_secs_f64(frame.n_samples as f64 / trials[t].fs_hz);
            if let Some(wait) = stream_time.checked_sub(start.elapsed()) {
                w.flush().ok();
                thread::sleep(wait);
            }
        }
        frame.write_to(&mut w).map_err(|e| {
            Error::Protocol(format!(
                "send failed at trial {} (position {t}) chunk {k}: {e}",
                trials[t].trial_id
            ))
        })?;
        stats.frames += 1;
        stats.bytes += (FRAME_HEADER_LEN + 4 * frame.samples.len()) as u64;
    }
    w.flush()
        .map_err(|e| Error::Protocol(format!("final flush failed: {e}")))?;
    Ok(stats)
}
