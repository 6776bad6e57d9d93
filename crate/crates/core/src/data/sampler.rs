//! Epoch-wise shuffled minibatches.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::model::{MiniBatch, ModelError};

/// Walks a fresh permutation of the training rows each epoch. The
/// permutation for epoch `e` depends only on `(seed, e)`. The last batch of
/// an epoch is short when `b` does not divide `n`.
#[derive(Debug, Clone)]
pub struct BatchSampler<'a> {
    data: &'a Dataset,
    batch_size: usize,
    seed: u64,
    epoch: u64,
    cursor: usize,
    perm: Vec<usize>,
}

impl<'a> BatchSampler<'a> {
    pub fn new(data: &'a Dataset, batch_size: usize, seed: u64) -> Self {
        assert!(batch_size > 0, "batch size must be positive");
        assert!(!data.is_empty(), "cannot sample from an empty dataset");
        let perm = Self::permutation(data.len(), seed, 0);
        Self { data, batch_size: batch_size.min(data.len()), seed, epoch: 0, cursor: 0, perm }
    }

    /// Permutation of `0..n` for `epoch`.
    pub fn permutation(n: usize, seed: u64, epoch: u64) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(epoch);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        perm
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    /// `⌈n / b⌉`.
    pub fn batches_per_epoch(&self) -> usize {
        self.data.len().div_ceil(self.batch_size)
    }

    /// Epoch of the next batch.
    pub fn epoch(&self) -> u64 {
        if self.cursor == self.perm.len() {
            self.epoch + 1
        } else {
            self.epoch
        }
    }

    pub fn next_indices(&mut self) -> &[usize] {
        if self.cursor == self.perm.len() {
            self.epoch += 1;
            self.perm = Self::permutation(self.data.len(), self.seed, self.epoch);
            self.cursor = 0;
        }
        let start = self.cursor;
        self.cursor = (start + self.batch_size).min(self.perm.len());
        &self.perm[start..self.cursor]
    }

    pub fn next_batch(&mut self) -> Result<MiniBatch, ModelError> {
        let data = self.data;
        let idx = self.next_indices();
        data.batch(idx)
    }
}
