//! Triangular step sequence with partial sums confined to `[0, 1]`.
//!
//! Block `k >= 1` occupies indices `k(k-1) .. k(k+1)`: `k` steps of `+1/k`
//! followed by `k` steps of `-1/k`. Indices below zero carry `alpha = 0`.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlphaSequence;

/// Block `k` and offset `r = n - k(k-1)` of index `n >= 0`.
pub fn block_of(n: i64) -> (i64, i64) {
    debug_assert!(n >= 0);
    let mut k = ((1.0 + (1.0 + 4.0 * n as f64).sqrt()) / 2.0).floor() as i64;
    while k * (k - 1) > n {
        k -= 1;
    }
    while (k + 1) * k <= n {
        k += 1;
    }
    (k, n - k * (k - 1))
}

/// `alpha_n`.
pub fn alpha_triangular(n: i64) -> f64 {
    if n < 0 {
        return 0.0;
    }
    let (k, r) = block_of(n);
    if r < k {
        1.0 / k as f64
    } else {
        -1.0 / k as f64
    }
}

/// `S_n = sum_{i=0}^{n} alpha_i`, zero for `n < 0`.
pub fn partial_sum(n: i64) -> f64 {
    if n < 0 {
        return 0.0;
    }
    let (k, r) = block_of(n);
    if r < k {
        (r + 1) as f64 / k as f64
    } else {
        (2 * k - r - 1) as f64 / k as f64
    }
}

impl AlphaSequence {
    pub fn alpha(&self, n: i64) -> f64 {
        alpha_triangular(n)
    }

    pub fn partial_sum(&self, n: i64) -> f64 {
        partial_sum(n)
    }

    /// `sup_{|m| > n} |alpha_m|`.
    pub fn tail_sup(&self, n: i64) -> f64 {
        if n < 0 {
            return 1.0;
        }
        1.0 / block_of(n + 1).0 as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_terms() {
        let expect = [1.0, -1.0, 0.5, 0.5, -0.5, -0.5];
        for (n, e) in expect.iter().enumerate() {
            assert_eq!(alpha_triangular(n as i64), *e);
        }
        assert_eq!(alpha_triangular(-3), 0.0);
    }

    #[test]
    fn block_ends_hit_one_and_zero() {
        // Oracle: running sum over explicit blocks.
        let mut s = 0.0;
        let mut n = 0i64;
        for k in 1..=3i64 {
            for _ in 0..k {
                s += 1.0 / k as f64;
                n += 1;
            }
            assert!((s - 1.0).abs() < 1e-15);
            assert!((partial_sum(n - 1) - 1.0).abs() < 1e-15);
            for _ in 0..k {
                s -= 1.0 / k as f64;
                n += 1;
            }
            assert!(s.abs() < 1e-15);
            assert_eq!(partial_sum(n - 1), 0.0);
        }
    }

    #[test]
    fn partial_sums_stay_in_unit_interval_up_to_a_million() {
        let mut running = crate::numerics::Compensated::ZERO;
        let mut sup: f64 = 0.0;
        for n in 0..=1_000_000i64 {
            running.add(alpha_triangular(n));
            let s = partial_sum(n);
            assert!((s - running.value()).abs() < 1e-9, "n={n}");
            assert!((0.0..=1.0).contains(&s));
            sup = sup.max(s.abs());
        }
        assert_eq!(sup, 1.0);
    }

    #[test]
    fn block_extremes_and_decay() {
        for k in 1..200i64 {
            let start = k * (k - 1);
            let sums: Vec<f64> = (start..start + 2 * k).map(partial_sum).collect();
            assert_eq!(sums.iter().cloned().fold(f64::MIN, f64::max), 1.0);
            assert_eq!(sums.iter().cloned().fold(f64::MAX, f64::min), 0.0);
            assert_eq!(alpha_triangular(start).abs(), 1.0 / k as f64);
        }
        // 1_000_001 lies in block 1000, which spans [999_000, 1_001_000).
        assert_eq!(AlphaSequence.tail_sup(1_000_000), 1e-3);
        assert!(AlphaSequence.tail_sup(2_000_000) < 1e-3);
    }
}
