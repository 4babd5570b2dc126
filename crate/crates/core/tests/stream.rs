mod common;

use std::thread;
use std::time::Duration;

use ssvep_cstl::decoder::{DecoderSettings, FittedDecoder, Method};
use ssvep_cstl::signal::Epoch;
use ssvep_cstl::stream::{stream_producer, DecodeService, FeedbackListener, ProducerOptions};

#[test]
fn online_decisions_match_offline_for_interleaved_streams() {
    let table = ssvep_cstl::signal::FrequencyTable::from_freqs(&[8.0, 10.0, 12.0], 0.5).unwrap();
    let data = common::synth_dataset(&table, 2, 0.2, 4);
    let raw: Vec<Epoch> = data.trials.iter().flatten().cloned().collect();
    let mut settings = DecoderSettings::default();
    settings.train.epochs_max = 10;
    let fitted = FittedDecoder::fit(Method::Fuzzy, &raw, &table, &[0, 1, 2], &settings, 1).unwrap();
    let FittedDecoder::Fuzzy(decoder) = fitted.decoder else {
        unreachable!()
    };
    let offline: Vec<usize> = raw
        .iter()
        .map(|e| decoder.classify_raw(e).unwrap().class_index)
        .collect();

    let listener = FeedbackListener::bind("127.0.0.1:0").unwrap();
    let feedback = listener.local_addr().unwrap().to_string();
    let service = DecodeService::bind(decoder, Some(&table), "127.0.0.1:0", &feedback).unwrap();
    let endpoint = service.local_addr().unwrap().to_string();
    let server = thread::spawn(move || service.run().unwrap());

    let opts = ProducerOptions {
        chunk_ms: 24,
        interleave: true,
        ..ProducerOptions::default()
    };
    let sent = stream_producer(&raw, &endpoint, &opts).unwrap();
    let expected: Vec<(u32, usize)> = raw
        .iter()
        .zip(&offline)
        .map(|(e, c)| (e.trial_id, *c))
        .collect();
    let summary = listener
        .collect(&expected, Duration::from_secs(20))
        .unwrap();
    let stats = server.join().unwrap();

    assert_eq!(stats.frames, sent.frames);
    assert_eq!(stats.malformed, 0);
    assert_eq!(stats.decisions, raw.len() as u64);
    assert!(summary.missing.is_empty());
    assert_eq!(summary.accuracy, 1.0);
}
