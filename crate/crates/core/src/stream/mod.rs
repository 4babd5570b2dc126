//! Simulated online loop: a producer streams trials as length-prefixed
//! frames over TCP, a decode service windows and classifies each trial, and
//! results come back as UDP datagrams.

mod listener;
mod producer;
mod protocol;
mod service;

pub use listener::{FeedbackListener, ListenerSummary};
pub use producer::{chunk_samples, stream_producer, ProducerOptions, ProducerStats};
pub use protocol::{
    read_frame, FeedbackMsg, FrameRead, StreamFrame, FRAME_HEADER_LEN, MAX_FRAME_PAYLOAD,
};
pub use service::{DecodeService, ServiceStats, MIN_QUEUE_WINDOWS};
