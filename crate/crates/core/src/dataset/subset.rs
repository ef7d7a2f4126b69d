use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// The first `n` items of a seeded shuffle. For a fixed seed the subsets are
/// nested: the `n`-subset is a prefix of every larger one.
pub fn subset_sample<T: Clone>(samples: &[T], n: usize, seed: u64) -> Result<Vec<T>> {
    if n == 0 || n > samples.len() {
        return Err(Error::invalid(alloc::format!("subset size {n} must lie in 1..={}", samples.len())));
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(order[..n].iter().map(|&i| samples[i].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bounds() {
        let v = [1, 2, 3];
        assert!(subset_sample(&v, 0, 0).is_err());
        assert!(subset_sample(&v, 4, 0).is_err());
        let mut all = subset_sample(&v, 3, 9).unwrap();
        all.sort();
        assert_eq!(all, v);
    }

    proptest! {
        #[test]
        fn nested_and_distinct(len in 1usize..60, seed: u64, a in 1usize..60, b in 1usize..60) {
            let items: Vec<usize> = (0..len).collect();
            let (a, b) = (a.min(len), b.min(len));
            let (small, large) = (a.min(b), a.max(b));
            let s = subset_sample(&items, small, seed).unwrap();
            let l = subset_sample(&items, large, seed).unwrap();
            prop_assert_eq!(&l[..small], &s[..]);
            let mut sorted = l.clone();
            sorted.sort();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), large);
        }
    }
}
