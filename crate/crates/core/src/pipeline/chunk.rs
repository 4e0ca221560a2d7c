//! Splits a sequence into outpainting chunks that start on unoccluded frames.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::occlusion::{OcclusionLabel, OcclusionVerdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChunkConfig {
    pub target_len: usize,
    pub max_len: usize,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        Self {
            target_len: 16,
            max_len: 64,
        }
    }
}

impl ChunkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_len == 0 || self.target_len > self.max_len {
            return Err(Error::Config(format!(
                "chunk lengths need 1 <= target ({}) <= max ({})",
                self.target_len, self.max_len
            )));
        }
        Ok(())
    }
}

/// Inclusive frame range processed by one outpainting call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub start: usize,
    pub end: usize,
    pub start_label: OcclusionLabel,
}

impl Chunk {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn frames(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

/// Greedy earliest-start partition.
///
/// From a chunk starting at `s`, the next chunk starts at the first
/// unoccluded frame at or after `s + target_len`, provided it is within
/// `s + max_len`. Failing that, the chunk runs to the end of the sequence if
/// the rest fits in `max_len`, else it is cut at the last unoccluded frame
/// within reach. Only when there is none is it cut at `max_len`, leaving the
/// next chunk to start on an occluded frame.
pub fn plan_chunks(verdicts: &[OcclusionVerdict], config: &ChunkConfig) -> Result<Vec<Chunk>> {
    config.validate()?;
    let n = verdicts.len();
    if n == 0 {
        return Err(Error::InvalidInput("cannot plan chunks for an empty sequence".into()));
    }
    if !verdicts[0].is_unoccluded() {
        return Err(Error::InvalidInput(format!(
            "frame 0 must be unoccluded to start the first chunk, got {:?}",
            verdicts[0].label()
        )));
    }
    let starts: Vec<usize> = (0..n).filter(|&i| verdicts[i].is_unoccluded()).collect();
    let mut chunks = Vec::new();
    let mut s = 0usize;
    while s < n {
        let reach = s + config.max_len; // first frame that may not be in this chunk
        let after_target = starts
            .iter()
            .copied()
            .find(|&u| u >= s + config.target_len);
        let end = match after_target {
            Some(u) if u <= reach => u - 1,
            _ if n - s <= config.max_len => n - 1,
            _ => match starts.iter().copied().rev().find(|&u| u > s && u <= reach) {
                Some(u) => u - 1,
                None => reach - 1,
            },
        };
        chunks.push(Chunk {
            start: s,
            end,
            start_label: verdicts[s].label(),
        });
        s = end + 1;
    }
    Ok(chunks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn verdicts(unoccluded: impl Fn(usize) -> bool, n: usize) -> Vec<OcclusionVerdict> {
        (0..n)
            .map(|i| {
                let label = if unoccluded(i) {
                    OcclusionLabel::Unoccluded
                } else {
                    OcclusionLabel::Occluded
                };
                OcclusionVerdict::new(i, Some(0.0), label).unwrap()
            })
            .collect()
    }

    fn spans(chunks: &[Chunk]) -> Vec<(usize, usize)> {
        chunks.iter().map(|c| (c.start, c.end)).collect()
    }

    #[test]
    fn all_unoccluded_sixteen() {
        let c = plan_chunks(&verdicts(|_| true, 16), &ChunkConfig::default()).unwrap();
        assert_eq!(spans(&c), vec![(0, 15)]);
    }

    #[test]
    fn two_starts_in_forty() {
        let c = plan_chunks(&verdicts(|i| i == 0 || i == 20, 40), &ChunkConfig::default()).unwrap();
        assert_eq!(spans(&c), vec![(0, 19), (20, 39)]);
    }

    #[test]
    fn exact_tiling() {
        let c = plan_chunks(&verdicts(|i| i % 16 == 0, 80), &ChunkConfig::default()).unwrap();
        assert_eq!(spans(&c), vec![(0, 15), (16, 31), (32, 47), (48, 63), (64, 79)]);
    }

    #[test]
    fn long_tail_becomes_one_chunk() {
        let c = plan_chunks(&verdicts(|i| i == 0, 50), &ChunkConfig::default()).unwrap();
        assert_eq!(spans(&c), vec![(0, 49)]);
    }

    #[test]
    fn start_beyond_reach_falls_back_to_earlier_start() {
        let c = plan_chunks(&verdicts(|i| i == 0 || i == 10 || i == 70, 90), &ChunkConfig::default()).unwrap();
        assert_eq!(spans(&c), vec![(0, 9), (10, 69), (70, 89)]);
    }

    #[test]
    fn forced_cut_when_nothing_is_unoccluded() {
        let c = plan_chunks(&verdicts(|i| i == 0, 100), &ChunkConfig::default()).unwrap();
        assert_eq!(spans(&c), vec![(0, 63), (64, 99)]);
        assert_eq!(c[1].start_label, OcclusionLabel::Occluded);
    }

    #[test]
    fn first_frame_must_be_unoccluded() {
        assert!(plan_chunks(&verdicts(|i| i > 0, 10), &ChunkConfig::default()).is_err());
        assert!(plan_chunks(&[], &ChunkConfig::default()).is_err());
        let bad = ChunkConfig {
            target_len: 20,
            max_len: 10,
        };
        assert!(plan_chunks(&verdicts(|_| true, 10), &bad).is_err());
    }

    proptest! {
        #[test]
        fn chunk_plan_invariants(
            bits in proptest::collection::vec(proptest::bool::weighted(0.3), 1..300),
            target in 1usize..24,
            extra in 0usize..48,
        ) {
            let mut bits = bits;
            bits[0] = true;
            let n = bits.len();
            let v = verdicts(|i| bits[i], n);
            let cfg = ChunkConfig { target_len: target, max_len: target + extra };
            let chunks = plan_chunks(&v, &cfg).unwrap();
            prop_assert_eq!(chunks[0].start, 0);
            prop_assert_eq!(chunks.last().unwrap().end, n - 1);
            for pair in chunks.windows(2) {
                prop_assert_eq!(pair[1].start, pair[0].end + 1);
            }
            for (k, c) in chunks.iter().enumerate() {
                prop_assert!(c.start <= c.end);
                prop_assert!(c.len() <= cfg.max_len);
                if !bits[c.start] {
                    // only after a full-length chunk with no other start inside
                    let prev = chunks[k - 1];
                    prop_assert_eq!(prev.len(), cfg.max_len);
                    prop_assert!(!(prev.start + 1..=prev.end + 1).any(|i| bits[i]));
                }
            }
        }
    }
}
