use std::collections::HashMap;
use std::io::BufReader;
use std::net::{SocketAddr, TcpListener, UdpSocket};
use std::sync::mpsc;
use std::thread;
use std::time::Instant;

use super::protocol::{read_frame, FeedbackMsg, FrameRead};
use crate::decoder::FuzzyDecoder;
use crate::error::{Error, Result};
use crate::signal::{Epoch, FrequencyTable};

/// Windows the hand-off queue can hold before ingestion would wait.
pub const MIN_QUEUE_WINDOWS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ServiceStats {
    pub frames: u64,
    pub malformed: u64,
    pub decisions: u64,
    /// Trials that ended before a full window arrived.
    pub incomplete: u64,
}

struct Partial {
    channels: Vec<Vec<f64>>,
    next_chunk: u32,
    done: bool,
}

/// Accepts one producer connection and answers every trial with a feedback
/// datagram.
pub struct DecodeService {
    decoder: FuzzyDecoder,
    listener: TcpListener,
    feedback: SocketAddr,
    queue_windows: usize,
}

impl DecodeService {
    /// Checks `table` (if given) against the decoder and binds `listen`.
    pub fn bind(
        decoder: FuzzyDecoder,
        table: Option<&FrequencyTable>,
        listen: &str,
        feedback: &str,
    ) -> Result<Self> {
        if let Some(t) = table {
            let own = decoder.meta.table()?;
            let same = own.len() == t.len()
                && own
                    .iter()
                    .zip(t.iter())
                    .all(|(a, b)| (a.freq_hz - b.freq_hz).abs() < 1e-9);
            if !same {
                return Err(Error::invalid(
                    "model was trained on a different frequency table",
                ));
            }
        }
        let listener = TcpListener::bind(listen)
            .map_err(|e| Error::Protocol(format!("cannot listen on {listen}: {e}")))?;
        let feedback = feedback.parse().map_err(|_| {
            Error::invalid(format!("feedback endpoint '{feedback}' is not host:port"))
        })?;
        Ok(Self {
            decoder,
            listener,
            feedback,
            queue_windows: MIN_QUEUE_WINDOWS,
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    /// Serves a single connection until the producer closes it.
    pub fn run(self) -> Result<ServiceStats> {
        let (stream, peer) = self.listener.accept()?;
        log::info!("producer connected from {peer}");
        let decoder = self.decoder;
        let need = decoder.raw_len();
        let n_ch = decoder.meta.n_channels;
        let fs = decoder.meta.fs_hz;
        let label = decoder
            .meta
            .table()?
            .get(0)
            .copied()
            .ok_or_else(|| Error::invalid("empty table"))?;
        let feedback = self.feedback;

        let (tx, rx) = mpsc::sync_channel::<Epoch>(self.queue_windows);
        let classifier = thread::spawn(move || -> Result<u64> {
            let socket = UdpSocket::bind("0.0.0.0:0")?;
            let mut sent = 0;
            for raw in rx {
                let start = Instant::now();
                let pred = decoder.classify_raw(&raw)?;
                let msg = FeedbackMsg {
                    trial_id: raw.trial_id,
                    class_index: pred.class_index,
                    confidence: pred.confidence,
                    inference_ms: start.elapsed().as_secs_f64() * 1e3,
                };
                if let Err(e) = socket.send_to(msg.to_line().as_bytes(), feedback) {
                    log::warn!("feedback for trial {} not sent: {e}", raw.trial_id);
                }
                sent += 1;
            }
            Ok(sent)
        });

        let mut stats = ServiceStats::default();
        let mut trials: HashMap<u32, Partial> = HashMap::new();
        let mut reader = BufReader::new(stream);
        let ingest = loop {
            let frame = match read_frame(&mut reader) {
                Ok(FrameRead::Frame(f)) => f,
                Ok(FrameRead::Malformed(why)) => {
                    log::warn!("skipping malformed frame: {why}");
                    stats.malformed += 1;
                    continue;
                }
                Ok(FrameRead::Eof) => break Ok(()),
                Err(e) => break Err(e),
            };
            stats.frames += 1;
            if frame.n_channels as usize != n_ch {
                log::warn!(
                    "trial {} chunk {}: {} channels, model expects {n_ch}",
                    frame.trial_id,
                    frame.chunk_index,
                    frame.n_channels
                );
                stats.malformed += 1;
                continue;
            }
            let p = trials.entry(frame.trial_id).or_insert_with(|| Partial {
                channels: vec![Vec::with_capacity(need); n_ch],
                next_chunk: 0,
                done: false,
            });
            if frame.chunk_index != p.next_chunk {
                log::warn!(
                    "trial {}: chunk {} out of order (expected {})",
                    frame.trial_id,
                    frame.chunk_index,
                    p.next_chunk
                );
                stats.malformed += 1;
                continue;
            }
            p.next_chunk += 1;
            if p.done {
                continue;
            }
            let ns = frame.n_samples as usize;
            for (c, dst) in p.channels.iter_mut().enumerate() {
                let take = ns.min(need - dst.len());
                dst.extend(
                    frame.samples[c * ns..c * ns + take]
                        .iter()
                        .map(|v| *v as f64),
                );
            }
            if p.channels[0].len() == need {
                p.done = true;
                let channels = std::mem::take(&mut p.channels);
                let epoch = Epoch::from_channels(channels, fs, label, frame.trial_id)?;
                if tx.send(epoch).is_err() {
                    break Err(Error::Protocol("classifier stopped".into()));
                }
            }
        };
        drop(tx);
        stats.incomplete = trials.values().filter(|p| !p.done).count() as u64;
        let decided = classifier
            .join()
            .map_err(|_| Error::Protocol("classifier thread panicked".into()))??;
        stats.decisions = decided;
        ingest?;
        Ok(stats)
    }
}
