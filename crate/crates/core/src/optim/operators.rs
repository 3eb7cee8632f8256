//! Variation operators on integer vectors.

use rand::seq::index;
use rand::Rng;

use super::{Member, OptimError};
use crate::env::{Bounds, TraceVector};

/// Two-point crossover: draws distinct cut points `p < q` from `0..=N` and
/// swaps the `[p, q)` segments.
pub fn two_point_crossover<R: Rng + ?Sized>(
    a: &TraceVector,
    b: &TraceVector,
    rng: &mut R,
) -> Result<(TraceVector, TraceVector), OptimError> {
    let n = check_pair(a, b)?;
    let cuts = index::sample(rng, n + 1, 2);
    let (p, q) = {
        let (x, y) = (cuts.index(0), cuts.index(1));
        (x.min(y), x.max(y))
    };
    crossover_at(a, b, p, q)
}

/// Crossover with explicit cut points.
pub fn crossover_at(a: &TraceVector, b: &TraceVector, p: usize, q: usize) -> Result<(TraceVector, TraceVector), OptimError> {
    let n = check_pair(a, b)?;
    assert!(p < q && q <= n, "cut points must satisfy p < q <= N");
    let (mut c1, mut c2) = (a.values().to_vec(), b.values().to_vec());
    c1[p..q].copy_from_slice(&b.values()[p..q]);
    c2[p..q].copy_from_slice(&a.values()[p..q]);
    Ok((TraceVector(c1), TraceVector(c2)))
}

fn check_pair(a: &TraceVector, b: &TraceVector) -> Result<usize, OptimError> {
    if a.len() != b.len() {
        return Err(OptimError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(OptimError::TooShort(a.len()));
    }
    Ok(a.len())
}

/// Each coordinate, with probability `prob`, is replaced by a uniform draw
/// from its bounds (which may reproduce the old value).
pub fn uniform_mutation<R: Rng + ?Sized>(v: &TraceVector, bounds: &Bounds, prob: f64, rng: &mut R) -> TraceVector {
    let prob = prob.clamp(0.0, 1.0);
    let out = v
        .values()
        .iter()
        .enumerate()
        .map(|(i, &x)| if rng.random_bool(prob) { rng.random_range(bounds.lower()[i]..=bounds.upper()[i]) } else { x })
        .collect();
    TraceVector(out)
}

/// Best of `size` uniform draws (with replacement) from `pool`.
pub(crate) fn tournament<'a, R: Rng + ?Sized>(pool: &'a [Member], size: usize, rng: &mut R) -> &'a Member {
    let mut best = &pool[rng.random_range(0..pool.len())];
    for _ in 1..size.max(1) {
        let c = &pool[rng.random_range(0..pool.len())];
        if c.beats(best) {
            best = c;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Layout;
    use crate::rng::seeded;
    use proptest::prelude::*;

    #[test]
    fn crossover_definition() {
        let a = TraceVector(vec![1, 2, 3, 4]);
        let b = TraceVector(vec![5, 6, 7, 8]);
        let (c1, c2) = crossover_at(&a, &b, 1, 3).unwrap();
        assert_eq!(c1.values(), &[1, 6, 7, 4]);
        assert_eq!(c2.values(), &[5, 2, 3, 8]);
    }

    #[test]
    fn crossover_identical_parents() {
        let a = TraceVector(vec![3, 1, 4, 1, 5]);
        let mut rng = seeded(1);
        for _ in 0..50 {
            let (c1, c2) = two_point_crossover(&a, &a, &mut rng).unwrap();
            assert_eq!(c1, a);
            assert_eq!(c2, a);
        }
    }

    #[test]
    fn crossover_errors() {
        let mut rng = seeded(0);
        assert_eq!(
            two_point_crossover(&TraceVector(vec![1, 2]), &TraceVector(vec![1, 2, 3]), &mut rng),
            Err(OptimError::LengthMismatch(2, 3))
        );
        assert_eq!(two_point_crossover(&TraceVector(vec![1]), &TraceVector(vec![2]), &mut rng), Err(OptimError::TooShort(1)));
    }

    #[test]
    fn mutation_degenerate_cases() {
        let layout = Layout::new(1, false);
        let b = Bounds::new(vec![1, 0, 1, 1], vec![100, 50, 100, 100], layout).unwrap();
        let v = TraceVector(vec![10, 20, 30, 40]);
        let mut rng = seeded(2);
        assert_eq!(uniform_mutation(&v, &b, 0.0, &mut rng), v);
        let fixed = Bounds::new(vec![9; 4], vec![9; 4], layout).unwrap();
        assert_eq!(uniform_mutation(&TraceVector(vec![9; 4]), &fixed, 1.0, &mut rng).values(), &[9; 4]);
    }

    proptest! {
        #[test]
        fn crossover_children_are_segment_swaps(
            a in proptest::collection::vec(-50i64..50, 2..30),
            seed in any::<u64>(),
        ) {
            let b: Vec<i64> = a.iter().map(|x| x + 1000).collect();
            let (ta, tb) = (TraceVector(a.clone()), TraceVector(b.clone()));
            let (c1, c2) = two_point_crossover(&ta, &tb, &mut seeded(seed)).unwrap();
            // Positions taken from b form one non-empty contiguous run.
            let from_b: Vec<bool> = c1.values().iter().zip(&a).map(|(x, y)| x != y).collect();
            let first = from_b.iter().position(|&f| f);
            prop_assert!(first.is_some());
            let last = from_b.iter().rposition(|&f| f).unwrap();
            prop_assert!(from_b[first.unwrap()..=last].iter().all(|&f| f));
            for i in 0..a.len() {
                prop_assert_eq!(c1.values()[i] == a[i], c2.values()[i] == b[i]);
            }
        }
    }
}
