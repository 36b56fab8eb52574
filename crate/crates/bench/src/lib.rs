//! Shared inputs for the criterion benches.

use sentidrift_core::scorer::ScoredComment;
use sentidrift_core::synth::{self, SynthConfig};

pub fn corpus_csv(count: usize) -> Vec<u8> {
    let mut buf = Vec::new();
    synth::write_csv(
        &mut buf,
        SynthConfig {
            count,
            seed: 42,
            ..SynthConfig::default()
        },
    )
    .expect("in-memory write");
    buf
}

/// Pre-labeled comments, already in time order.
pub fn scored(count: usize) -> Vec<ScoredComment> {
    synth::generate(SynthConfig {
        count,
        seed: 42,
        ..SynthConfig::default()
    })
    .into_iter()
    .map(|c| ScoredComment {
        label: c.label.expect("synthetic comments are labeled"),
        comment: c,
    })
    .collect()
}
