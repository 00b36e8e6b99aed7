use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("rank-sum test needs at least 5 values per sample, got {0} and {1}")]
    TooFewSamples(usize, usize),
    #[error("all values are identical; the rank-sum test is undefined")]
    Degenerate,
    #[error("samples contain a non-finite value")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankSum {
    /// Mann-Whitney U of the first sample.
    pub u: f64,
    pub z: f64,
    /// Two-sided.
    pub p_value: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); zero for a single value.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return if xs.is_empty() { f64::NAN } else { 0.0 };
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Ranks starting at 1, ties receiving their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Pooled sizes up to this use the exact permutation distribution.
pub const EXACT_MAX_POOLED: usize = 20;

/// Two-sided Mann-Whitney U test. Small samples get the exact permutation
/// p-value (ties included); larger ones the normal approximation with tie
/// and continuity corrections.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<RankSum, StatsError> {
    let (n1, n2) = (a.len(), b.len());
    if n1 < 5 || n2 < 5 {
        return Err(StatsError::TooFewSamples(n1, n2));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    if pooled.iter().all(|x| *x == pooled[0]) {
        return Err(StatsError::Degenerate);
    }
    let ranks = average_ranks(&pooled);
    let r1: f64 = ranks[..n1].iter().sum();
    let (f1, f2) = (n1 as f64, n2 as f64);
    let u = r1 - f1 * (f1 + 1.0) / 2.0;

    let n = f1 + f2;
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    for group in sorted.chunk_by(|x, y| x == y) {
        let t = group.len() as f64;
        tie_term += t * t * t - t;
    }
    let mu = f1 * f2 / 2.0;
    let sigma = (f1 * f2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)))).sqrt();
    let z = ((u - mu).abs() - 0.5).max(0.0) / sigma;
    let p_value = if n1 + n2 <= EXACT_MAX_POOLED {
        exact_p_value(&ranks, n1)
    } else {
        let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
        (2.0 * (1.0 - std_normal.cdf(z))).min(1.0)
    };
    Ok(RankSum {
        u,
        z: z * (u - mu).signum(),
        p_value,
    })
}

/// Share of all size-`n1` subsets of `ranks` whose rank sum is at least as
/// far from its mean as the first `n1` ranks'. Ranks are doubled so that
/// tied (half-integer) ranks stay integral.
fn exact_p_value(ranks: &[f64], n1: usize) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    // ways[k][s]: subsets of size k with doubled rank sum s
    let mut ways = vec![vec![0.0f64; max_sum + 1]; n1 + 1];
    ways[0][0] = 1.0;
    for &r in &doubled {
        for k in (1..=n1).rev() {
            let (lower, upper) = ways.split_at_mut(k);
            for s in (r..=max_sum).rev() {
                upper[0][s] += lower[k - 1][s - r];
            }
        }
    }
    let n = ranks.len();
    let mean2 = (n1 * (n + 1)) as i64;
    let observed: usize = doubled[..n1].iter().sum();
    let dist = |s: usize| (s as i64 - mean2).abs();
    let total: f64 = ways[n1].iter().sum();
    let extreme: f64 = ways[n1]
        .iter()
        .enumerate()
        .filter(|(s, _)| dist(*s) >= dist(observed))
        .map(|(_, w)| w)
        .sum();
    (extreme / total).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// U of `a` and the exact two-sided p-value from enumerating every
    /// split of the pooled values.
    fn exact_rank_sum(a: &[f64], b: &[f64]) -> (f64, f64) {
        let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
        let n = pooled.len();
        let n1 = a.len();
        // Brute-force average ranks.
        let rank = |v: f64| {
            let below = pooled.iter().filter(|x| **x < v).count() as f64;
            let equal = pooled.iter().filter(|x| **x == v).count() as f64;
            below + (equal + 1.0) / 2.0
        };
        let ranks: Vec<f64> = pooled.iter().map(|v| rank(*v)).collect();
        let u_of = |mask: u32| {
            let r: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
            r - (n1 * (n1 + 1)) as f64 / 2.0
        };
        let observed = u_of((1u32 << n1) - 1);
        let mu = (n1 * (n - n1)) as f64 / 2.0;
        let (mut total, mut extreme) = (0u64, 0u64);
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != n1 {
                continue;
            }
            total += 1;
            if (u_of(mask) - mu).abs() >= (observed - mu).abs() - 1e-9 {
                extreme += 1;
            }
        }
        (observed, extreme as f64 / total as f64)
    }

    #[test]
    fn small_hand_example() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [3.0, 4.0, 5.0, 6.0, 7.0];
        let r = wilcoxon_rank_sum(&a, &b).unwrap();
        // ranks of a: 1, 2, 3.5, 5.5, 7.5 -> R = 19.5, U = 19.5 - 15
        assert_eq!(r.u, 4.5);
        let (u, p) = exact_rank_sum(&a, &b);
        assert_eq!(u, 4.5);
        assert!((r.p_value - p).abs() < 0.02, "{} vs {}", r.p_value, p);
    }

    #[test]
    fn matches_enumeration_for_small_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n1 in 5..=8 {
            for n2 in 5..=8 {
                for _ in 0..3 {
                    let a: Vec<f64> = (0..n1).map(|_| rng.gen_range(0..12) as f64).collect();
                    let b: Vec<f64> = (0..n2).map(|_| rng.gen_range(3..15) as f64).collect();
                    let r = wilcoxon_rank_sum(&a, &b).unwrap();
                    let (u, p) = exact_rank_sum(&a, &b);
                    assert_eq!(r.u, u);
                    assert!((r.p_value - p).abs() < 0.02, "n=({n1},{n2}) {} vs {}", r.p_value, p);
                }
            }
        }
    }

    #[test]
    fn normal_approximation_at_thirty() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a: Vec<f64> = (0..30).map(|_| rng.gen_range(0.0..10.0)).collect();
        let b: Vec<f64> = (0..30).map(|_| rng.gen_range(1.0..11.0)).collect();
        let r = wilcoxon_rank_sum(&a, &b).unwrap();
        let expected = 2.0 * (1.0 - Normal::new(0.0, 1.0).unwrap().cdf(r.z.abs()));
        assert!((r.p_value - expected).abs() < 1e-12);
        assert!(r.p_value > 0.0 && r.p_value < 1.0);
    }

    #[test]
    fn identical_and_separated_samples() {
        let a: Vec<f64> = (1..=30).map(f64::from).collect();
        assert!(wilcoxon_rank_sum(&a, &a).unwrap().p_value > 0.95);
        let b: Vec<f64> = (101..=130).map(f64::from).collect();
        assert!(wilcoxon_rank_sum(&a, &b).unwrap().p_value < 0.001);
    }

    #[test]
    fn degenerate_and_short_inputs() {
        assert_eq!(wilcoxon_rank_sum(&[1.0; 5], &[1.0; 6]), Err(StatsError::Degenerate));
        assert_eq!(
            wilcoxon_rank_sum(&[1.0; 4], &[2.0; 6]),
            Err(StatsError::TooFewSamples(4, 6))
        );
    }

    #[test]
    fn sample_std() {
        assert!((std_dev(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]) - 2.138089935).abs() < 1e-9);
        assert_eq!(std_dev(&[3.0]), 0.0);
    }
}
