use std::sync::Arc;

use super::{pcm_to_f64, FeatureVector, MfccExtractor};

/// Incremental MFCC extraction over arbitrarily sized chunks.
///
/// Emits exactly the vectors [`MfccExtractor::extract`] produces on the
/// concatenated signal: samples of a partial frame are carried over until
/// the frame completes.
#[derive(Debug, Clone)]
pub struct StreamingMfcc {
    extractor: Arc<MfccExtractor>,
    // Samples starting at the next unemitted frame.
    pending: Vec<f64>,
    next_frame: u64,
}

impl StreamingMfcc {
    pub fn new(extractor: Arc<MfccExtractor>) -> Self {
        let cap = extractor.config().frame_length * 2;
        StreamingMfcc {
            extractor,
            pending: Vec::with_capacity(cap),
            next_frame: 0,
        }
    }

    pub fn extractor(&self) -> &MfccExtractor {
        &self.extractor
    }

    /// Index of the next frame this stream will emit.
    pub fn next_frame_index(&self) -> u64 {
        self.next_frame
    }

    pub fn push(&mut self, chunk: &[f64]) -> Vec<FeatureVector> {
        let mut out = Vec::new();
        self.push_into(chunk, &mut out);
        out
    }

    pub fn push_pcm(&mut self, chunk: &[i16]) -> Vec<FeatureVector> {
        let samples: Vec<f64> = chunk.iter().map(|&s| pcm_to_f64(s)).collect();
        self.push(&samples)
    }

    pub fn push_into(&mut self, chunk: &[f64], out: &mut Vec<FeatureVector>) {
        if chunk.is_empty() {
            return;
        }
        self.pending.extend_from_slice(chunk);
        let len = self.extractor.config().frame_length;
        let hop = self.extractor.config().hop_length;
        let mut start = 0;
        while self.pending.len() - start >= len {
            out.push(
                self.extractor
                    .feature_vector(self.next_frame, &self.pending[start..start + len]),
            );
            self.next_frame += 1;
            start += hop;
        }
        self.pending.drain(..start);
    }

    pub fn reset(&mut self) {
        self.pending.clear();
        self.next_frame = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{AudioBuffer, MfccConfig};

    fn signal(n: usize) -> Vec<f64> {
        (0..n).map(|i| 0.5 * (i as f64 * 0.031).sin()).collect()
    }

    #[test]
    fn one_sample_chunks_match_batch() {
        let ex = MfccExtractor::new(MfccConfig::default()).unwrap();
        let samples = signal(16_000 * 10);
        let batch = ex
            .extract(&AudioBuffer::new(samples.clone(), 16_000).unwrap())
            .unwrap();
        let mut stream = ex.into_stream();
        let mut streamed = Vec::new();
        for s in &samples {
            stream.push_into(std::slice::from_ref(s), &mut streamed);
        }
        assert_eq!(streamed, batch);
    }

    #[test]
    fn empty_chunk_is_a_no_op() {
        let ex = MfccExtractor::new(MfccConfig::default()).unwrap();
        let mut stream = ex.into_stream();
        stream.push(&signal(250));
        let before = (stream.pending.clone(), stream.next_frame);
        assert!(stream.push(&[]).is_empty());
        assert_eq!((stream.pending.clone(), stream.next_frame), before);
    }
}
