//! Frame layout (little-endian):
//!
//! | offset | type  | field                                  |
//! |--------|-------|----------------------------------------|
//! | 0      | u32   | payload length in bytes (`4·n_ch·n_samp`) |
//! | 4      | u32   | trial_id                               |
//! | 8      | u32   | chunk_index                            |
//! | 12     | u16   | n_channels                             |
//! | 14     | u16   | n_chunk_samples                        |
//! | 16     | f32…  | samples, channel-major                 |

use std::io::{self, Read, Write};

use crate::error::{Error, Result};

pub const FRAME_HEADER_LEN: usize = 16;
/// Larger declared payloads are treated as a corrupt stream.
pub const MAX_FRAME_PAYLOAD: usize = 16 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct StreamFrame {
    pub trial_id: u32,
    pub chunk_index: u32,
    pub n_channels: u16,
    pub n_samples: u16,
    /// Channel-major, `n_channels · n_samples` values.
    pub samples: Vec<f32>,
}

impl StreamFrame {
    pub fn encoded_len(&self) -> usize {
        FRAME_HEADER_LEN + 4 * self.samples.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&((4 * self.samples.len()) as u32).to_le_bytes());
        out.extend_from_slice(&self.trial_id.to_le_bytes());
        out.extend_from_slice(&self.chunk_index.to_le_bytes());
        out.extend_from_slice(&self.n_channels.to_le_bytes());
        out.extend_from_slice(&self.n_samples.to_le_bytes());
        for v in &self.samples {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn write_to(&self, w: &mut impl Write) -> io::Result<()> {
        w.write_all(&self.encode())
    }
}

/// Outcome of reading one frame.
#[derive(Debug, Clone, PartialEq)]
pub enum FrameRead {
    Frame(StreamFrame),
    /// Header and payload disagree; the payload was consumed and skipped.
    Malformed(String),
    Eof,
}

fn read_exact_or_eof(r: &mut impl Read, buf: &mut [u8]) -> io::Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) if filled == 0 => return Ok(false),
            Ok(0) => {
                return Err(io::Error::new(
                    io::ErrorKind::UnexpectedEof,
                    "stream ended inside a frame",
                ))
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(true)
}

pub fn read_frame(r: &mut impl Read) -> Result<FrameRead> {
    let mut header = [0u8; FRAME_HEADER_LEN];
    if !read_exact_or_eof(r, &mut header)? {
        return Ok(FrameRead::Eof);
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().expect("4 bytes"));
    let u16_at = |o: usize| u16::from_le_bytes(header[o..o + 2].try_into().expect("2 bytes"));
    let len = u32_at(0) as usize;
    if len > MAX_FRAME_PAYLOAD {
        return Err(Error::Protocol(format!(
            "frame declares {len} payload bytes"
        )));
    }
    let mut payload = vec![0u8; len];
    if !read_exact_or_eof(r, &mut payload)? && len > 0 {
        return Err(Error::Protocol("stream ended inside a frame".into()));
    }
    let (trial_id, chunk_index, n_channels, n_samples) =
        (u32_at(4), u32_at(8), u16_at(12), u16_at(14));
    let expected = 4 * n_channels as usize * n_samples as usize;
    if len != expected {
        return Ok(FrameRead::Malformed(format!(
            "trial {trial_id} chunk {chunk_index}: {len} payload bytes for {n_channels}x{n_samples} samples"
        )));
    }
    let samples: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    if samples.iter().any(|v| !v.is_finite()) {
        return Ok(FrameRead::Malformed(format!(
            "trial {trial_id} chunk {chunk_index}: non-finite sample"
        )));
    }
    Ok(FrameRead::Frame(StreamFrame {
        trial_id,
        chunk_index,
        n_channels,
        n_samples,
        samples,
    }))
}

/// One classification result, sent as a single ASCII line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackMsg {
    pub trial_id: u32,
    pub class_index: usize,
    pub confidence: f64,
    pub inference_ms: f64,
}

impl FeedbackMsg {
    /// `RESULT <trial_id> <class_index> <confidence:%.4f> <inference_ms:%.2f>\n`
    pub fn to_line(&self) -> String {
        format!(
            "RESULT {} {} {:.4} {:.2}\n",
            self.trial_id, self.class_index, self.confidence, self.inference_ms
        )
    }

    pub fn parse(line: &str) -> Result<Self> {
        let bad = || Error::Protocol(format!("bad feedback line {line:?}"));
        let mut parts = line.trim_end_matches('\n').split(' ');
        if parts.next() != Some("RESULT") {
            return Err(bad());
        }
        let mut next = || parts.next().ok_or_else(bad);
        let trial_id = next()?.parse().map_err(|_| bad())?;
        let class_index = next()?.parse().map_err(|_| bad())?;
        let confidence: f64 = next()?.parse().map_err(|_| bad())?;
        let inference_ms: f64 = next()?.parse().map_err(|_| bad())?;
        if parts.next().is_some() || !(0.0..=1.0).contains(&confidence) || !(inference_ms >= 0.0) {
            return Err(bad());
        }
        Ok(Self {
            trial_id,
            class_index,
            confidence,
            inference_ms,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn frame() -> StreamFrame {
        StreamFrame {
            trial_id: 7,
            chunk_index: 3,
            n_channels: 2,
            n_samples: 3,
            samples: vec![0.5, -1.0, 2.0, 3.25, 0.0, -0.125],
        }
    }

    #[test]
    fn frame_roundtrip_and_size() {
        let f = frame();
        let bytes = f.encode();
        assert_eq!(bytes.len(), 16 + 4 * 6);
        let mut cur = Cursor::new(bytes);
        assert_eq!(read_frame(&mut cur).unwrap(), FrameRead::Frame(f));
        assert_eq!(read_frame(&mut cur).unwrap(), FrameRead::Eof);
    }

    #[test]
    fn malformed_frames_are_skipped() {
        let mut bad = frame().encode();
        bad[12] = 5;
        bad.extend(frame().encode());
        let mut cur = Cursor::new(bad);
        assert!(matches!(
            read_frame(&mut cur).unwrap(),
            FrameRead::Malformed(_)
        ));
        assert_eq!(read_frame(&mut cur).unwrap(), FrameRead::Frame(frame()));

        let truncated = frame().encode()[..20].to_vec();
        assert!(read_frame(&mut Cursor::new(truncated)).is_err());
    }

    #[test]
    fn feedback_line_format() {
        let m = FeedbackMsg {
            trial_id: 12,
            class_index: 3,
            confidence: 0.98765,
            inference_ms: 4.321,
        };
        assert_eq!(m.to_line(), "RESULT 12 3 0.9877 4.32\n");
        let back = FeedbackMsg::parse(&m.to_line()).unwrap();
        assert_eq!((back.trial_id, back.class_index), (12, 3));
        assert!(FeedbackMsg::parse("RESULT 1 2 1.5 0.1\n").is_err());
        assert!(FeedbackMsg::parse("HELLO 1 2 0.5 0.1\n").is_err());
    }
}
