use std::collections::VecDeque;

use rand::Rng;

/// FIFO ring buffer with uniform sampling (with replacement).
#[derive(Debug, Clone)]
pub struct ReplayMemory<T> {
    items: VecDeque<T>,
    capacity: usize,
}

impl<T> ReplayMemory<T> {
    pub fn new(capacity: usize) -> Self {
        ReplayMemory {
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity: capacity.max(1),
        }
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> Option<&T> {
        self.items.get(i)
    }

    /// Draw `n` items uniformly with replacement, or `None` while fewer than
    /// `min_fill.max(n)` items are stored.
    pub fn sample<R: Rng>(&self, n: usize, min_fill: usize, rng: &mut R) -> Option<Vec<&T>> {
        if self.items.is_empty() || self.items.len() < min_fill.max(n) {
            return None;
        }
        Some(
            (0..n)
                .map(|_| &self.items[rng.gen_range(0..self.items.len())])
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn evicts_oldest_at_capacity() {
        let mut m = ReplayMemory::new(2);
        for i in 0..3 {
            m.push(i);
        }
        assert_eq!(m.len(), 2);
        assert_eq!(m.get(0), Some(&1));
        assert_eq!(m.get(1), Some(&2));
    }

    #[test]
    fn sampling_before_fill_is_deferred() {
        let mut m = ReplayMemory::new(100);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(m.sample(4, 10, &mut rng).is_none());
        for i in 0..9 {
            m.push(i);
        }
        assert!(m.sample(4, 10, &mut rng).is_none());
        m.push(9);
        assert_eq!(m.sample(4, 10, &mut rng).unwrap().len(), 4);
    }

    #[test]
    fn sampling_is_uniform() {
        let mut m = ReplayMemory::new(10);
        for i in 0..10usize {
            m.push(i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut counts = [0f64; 10];
        let draws = 100_000;
        for _ in 0..draws / 10 {
            for &i in m.sample(10, 0, &mut rng).unwrap() {
                counts[i] += 1.0;
            }
        }
        let expected = draws as f64 / 10.0;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        // 99th percentile of chi-square with 9 degrees of freedom.
        assert!(chi2 < 21.666, "chi2 = {chi2}");
    }
}
