use std::collections::HashMap;
use std::net::{SocketAddr, UdpSocket};
use std::time::Duration;

use super::protocol::FeedbackMsg;
use crate::error::Result;
use crate::evaluation::accuracy;

#[derive(Debug, Clone, PartialEq)]
pub struct ListenerSummary {
    /// In arrival order.
    pub received: Vec<FeedbackMsg>,
    /// Expected trials with no datagram before the timeout.
    pub missing: Vec<u32>,
    /// Over all expected trials; a miss counts as wrong.
    pub accuracy: f64,
}

pub struct FeedbackListener {
    socket: UdpSocket,
}

impl FeedbackListener {
    pub fn bind(endpoint: &str) -> Result<Self> {
        Ok(Self {
            socket: UdpSocket::bind(endpoint)?,
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.socket.local_addr()?)
    }

    /// Collects results for `expected` `(trial_id, true_class)` pairs. Gives
    /// up once `timeout` passes without a new datagram.
    pub fn collect(&self, expected: &[(u32, usize)], timeout: Duration) -> Result<ListenerSummary> {
        self.socket.set_read_timeout(Some(timeout))?;
        let mut by_trial: HashMap<u32, FeedbackMsg> = HashMap::new();
        let mut received = Vec::new();
        let mut buf = [0u8; 512];
        while expected.iter().any(|(t, _)| !by_trial.contains_key(t)) {
            let n = match self.socket.recv(&mut buf) {
                Ok(n) => n,
                Err(e)
                    if matches!(
                        e.kind(),
                        std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut
                    ) =>
                {
                    break
                }
                Err(e) => return Err(e.into()),
            };
            match std::str::from_utf8(&buf[..n])
                .map_err(|_| ())
                .and_then(|s| FeedbackMsg::parse(s).map_err(|_| ()))
            {
                Ok(msg) => {
                    by_trial.insert(msg.trial_id, msg);
                    received.push(msg);
                }
                Err(()) => log::warn!("ignoring malformed datagram"),
            }
        }
        let missing: Vec<u32> = expected
            .iter()
            .filter(|(t, _)| !by_trial.contains_key(t))
            .map(|(t, _)| *t)
            .collect();
        let accuracy = if expected.is_empty() {
            0.0
        } else {
            let preds: Vec<usize> = expected
                .iter()
                .map(|(t, _)| by_trial.get(t).map_or(usize::MAX, |m| m.class_index))
                .collect();
            let truth: Vec<usize> = expected.iter().map(|(_, c)| *c).collect();
            accuracy(&preds, &truth)?
        };
        Ok(ListenerSummary {
            received,
            missing,
            accuracy,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_hits_and_misses() {
        let l = FeedbackListener::bind("127.0.0.1:0").unwrap();
        let addr = l.local_addr().unwrap();
        let tx = UdpSocket::bind("127.0.0.1:0").unwrap();
        for (t, c) in [(1u32, 0usize), (2, 1)] {
            let m = FeedbackMsg {
                trial_id: t,
                class_index: c,
                confidence: 0.9,
                inference_ms: 1.0,
            };
            tx.send_to(m.to_line().as_bytes(), addr).unwrap();
        }
        let s = l
            .collect(&[(1, 0), (2, 1)], Duration::from_secs(2))
            .unwrap();
        assert_eq!(s.accuracy, 1.0);
        assert!(s.missing.is_empty());
        let s = l.collect(&[(3, 0)], Duration::from_millis(100)).unwrap();
        assert_eq!(s.missing, vec![3]);
        assert_eq!(s.accuracy, 0.0);
    }
}
