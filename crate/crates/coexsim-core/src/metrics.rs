//! Outcome statistics over realized interference traces.
//!
//! All inputs arrive as plain slices so the functions stay independent of
//! how the engine stores its traces. Threshold comparisons are strict
//! (`value > threshold` counts as a violation).

use alloc::vec::Vec;

/// Mean, over slots, of the fraction of users whose aggregate INR exceeds
/// `th_lin` in that slot. `trace` is slot-major; empty traces yield 0.
pub fn violation_rate(trace: &[Vec<f64>], th_lin: f64) -> f64 {
    if trace.is_empty() {
        return 0.0;
    }
    let mut acc = 0.0;
    for slot in trace {
        if slot.is_empty() {
            continue;
        }
        let over = slot.iter().filter(|&&v| v > th_lin).count();
        acc += over as f64 / slot.len() as f64;
    }
    acc / trace.len() as f64
}

/// Per-user fraction of slots whose aggregate INR exceeds `th_lin`.
pub fn per_user_violation(trace: &[Vec<f64>], users: usize, th_lin: f64) -> Vec<f64> {
    let mut counts = alloc::vec![0usize; users];
    for slot in trace {
        assert_eq!(slot.len(), users, "trace slot width mismatch");
        for (u, &v) in slot.iter().enumerate() {
            if v > th_lin {
                counts[u] += 1;
            }
        }
    }
    let n = trace.len().max(1) as f64;
    counts.into_iter().map(|c| c as f64 / n).collect()
}

/// Mean served fraction over handovers: each entry of `served` is the
/// number of clusters that received a satellite out of `total`.
pub fn utilization(served: &[usize], total: usize) -> f64 {
    if served.is_empty() || total == 0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for &s in served {
        debug_assert!(s <= total);
        acc += s as f64 / total as f64;
    }
    acc / served.len() as f64
}

/// Empirical CDF: sorted distinct sample values paired with cumulative
/// probability, one point per distinct value (the final cumulative count
/// wins for duplicates).
pub fn empirical_cdf(samples: &[f64]) -> Vec<(f64, f64)> {
    if samples.is_empty() {
        return Vec::new();
    }
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = p,
            _ => out.push((v, p)),
        }
    }
    out
}

/// Fraction of samples strictly above `x`.
pub fn fraction_above(samples: &[f64], x: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().filter(|&&v| v > x).count() as f64 / samples.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_two_points() {
        let cdf = empirical_cdf(&[-20.0, -10.0]);
        assert_eq!(cdf, vec![(-20.0, 0.5), (-10.0, 1.0)]);
    }

    #[test]
    fn cdf_merges_duplicates_keeping_final_mass() {
        let cdf = empirical_cdf(&[1.0, 2.0, 1.0]);
        assert_eq!(cdf, vec![(1.0, 2.0 / 3.0), (2.0, 1.0)]);
    }

    #[test]
    fn cdf_is_sorted_and_ends_at_one() {
        let cdf = empirical_cdf(&[3.0, -1.0, 2.0, 2.0, 7.5, -4.0]);
        assert!(cdf.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
        assert_eq!(cdf.last().unwrap().1, 1.0);
    }

    #[test]
    fn cdf_handles_minus_infinity_samples() {
        let cdf = empirical_cdf(&[f64::NEG_INFINITY, 0.0]);
        assert_eq!(cdf[0], (f64::NEG_INFINITY, 0.5));
    }

    #[test]
    fn cdf_of_nothing_is_empty() {
        assert!(empirical_cdf(&[]).is_empty());
    }

    #[test]
    fn violation_rate_means_over_slots() {
        let trace = vec![vec![0.1, 0.9], vec![0.9, 0.9]];
        // Slot 0: 1 of 2 over 0.5; slot 1: 2 of 2.
        assert!((violation_rate(&trace, 0.5) - 0.75).abs() < 1e-15);
        // Threshold is strict: exactly-at-threshold never violates.
        assert_eq!(violation_rate(&vec![vec![0.5, 0.5]], 0.5), 0.0);
        assert_eq!(violation_rate(&[], 0.5), 0.0);
    }

    #[test]
    fn per_user_violation_counts_slots() {
        let trace = vec![vec![0.1, 0.9], vec![0.9, 0.9], vec![0.1, 0.1]];
        let v = per_user_violation(&trace, 2, 0.5);
        assert!((v[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((v[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn utilization_averages_handovers() {
        assert!((utilization(&[2, 3], 3) - (2.0 / 3.0 + 1.0) / 2.0).abs() < 1e-15);
        assert_eq!(utilization(&[], 3), 0.0);
        assert_eq!(utilization(&[0, 0], 3), 0.0);
    }

    #[test]
    fn fraction_above_is_strict() {
        let s = [-20.0, -12.2, -6.0, 0.0];
        assert_eq!(fraction_above(&s, -12.2), 0.5);
        assert_eq!(fraction_above(&s, -30.0), 1.0);
        assert_eq!(fraction_above(&s, 0.0), 0.0);
        assert_eq!(fraction_above(&[], 0.0), 0.0);
    }
}
