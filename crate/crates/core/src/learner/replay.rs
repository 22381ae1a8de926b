//! Episode replay buffer: a ring over whole episodes with uniform batch
//! sampling.

use alloc::vec::Vec;
use rand::Rng;
use rand_chacha::rand_core::RngCore;

use crate::record::EpisodeRecord;

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    episodes: Vec<EpisodeRecord>,
    capacity: usize,
    /// Slot the next push overwrites once the ring is full.
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            episodes: Vec::with_capacity(capacity.min(4096)),
            capacity,
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, episode: EpisodeRecord) {
        if self.episodes.len() < self.capacity {
            self.episodes.push(episode);
        } else {
            self.episodes[self.next] = episode;
            self.next = (self.next + 1) % self.capacity;
        }
    }

    pub fn get(&self, index: usize) -> &EpisodeRecord {
        &self.episodes[index]
    }

    /// Uniformly sample `batch` distinct episode indices. Returns `None`
    /// until at least one full batch is stored.
    pub fn sample_indices(&self, batch: usize, rng: &mut dyn RngCore) -> Option<Vec<usize>> {
        if batch == 0 || self.episodes.len() < batch {
            return None;
        }
        // Partial Fisher-Yates over the index range.
        let mut idx: Vec<usize> = (0..self.episodes.len()).collect();
        for i in 0..batch {
            let j = rng.gen_range(i..idx.len());
            idx.swap(i, j);
        }
        idx.truncate(batch);
        Some(idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crash::CrashMask;
    use crate::rng::{substream, Stream};

    fn episode(tag: f64) -> EpisodeRecord {
        EpisodeRecord {
            mask: CrashMask::none(1),
            steps: Vec::new(),
            success: false,
            episode_return: tag,
        }
    }

    #[test]
    fn ring_never_exceeds_capacity() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..10 {
            buf.push(episode(i as f64));
            assert!(buf.len() <= 3);
        }
        // Oldest entries were overwritten in ring order.
        let returns: Vec<f64> = (0..3).map(|i| buf.get(i).episode_return).collect();
        assert_eq!(returns, vec![9.0, 7.0, 8.0]);
    }

    #[test]
    fn sampling_waits_for_a_full_batch() {
        let mut buf = ReplayBuffer::new(8);
        let mut rng = substream(1, Stream::Replay, 0);
        buf.push(episode(0.0));
        assert!(buf.sample_indices(2, &mut rng).is_none());
        buf.push(episode(1.0));
        let idx = buf.sample_indices(2, &mut rng).unwrap();
        assert_eq!(idx.len(), 2);
        assert_ne!(idx[0], idx[1]);
    }

    #[test]
    fn sampled_indices_are_distinct_and_in_range() {
        let mut buf = ReplayBuffer::new(16);
        for i in 0..16 {
            buf.push(episode(i as f64));
        }
        let mut rng = substream(2, Stream::Replay, 0);
        for _ in 0..100 {
            let mut idx = buf.sample_indices(8, &mut rng).unwrap();
            idx.sort_unstable();
            let before = idx.len();
            idx.dedup();
            assert_eq!(before, idx.len());
            assert!(idx.iter().all(|&i| i < 16));
        }
    }
}
