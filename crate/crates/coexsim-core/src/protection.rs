//! Interference protection bookkeeping.
//!
//! The long-run constraint is a sliding-window one: for every victim user,
//! the mean aggregate INR over the trailing `window_slots` plus the coming
//! `horizon_slots` must stay at or below the average threshold. At each
//! handover the already-realized past is fixed, so the budget left for the
//! horizon shrinks to an effective threshold
//!
//! `th_eff = ((T_w + T_h) * th_avg - max_u sum_past(u)) / T_h`
//!
//! which the solver enforces on per-horizon averages. A heavily loaded past
//! can drive `th_eff` to zero or below; that value is propagated as-is and
//! typically forces outages rather than being clamped.
//!
//! All thresholds and samples here are linear ratios. Sums over time are
//! always taken in chronological order and sums over users in index order,
//! matching the engine's accumulation contract, so feasibility established
//! on planned coefficients transfers to the realized trace bit-for-bit.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::db_to_lin;

/// Relative slack used when re-checking realized values against thresholds.
/// Feasibility is proved on sums; the realized *mean* divides once more, so
/// the comparison can differ by a few ulps.
pub const VERIFY_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtectionConfig {
    /// Long-run average aggregate INR threshold, linear.
    pub avg_th_lin: f64,
    /// Absolute per-slot aggregate INR threshold, linear.
    pub max_th_lin: f64,
    /// Slots per decision horizon (one handover period).
    pub horizon_slots: usize,
    /// Trailing history slots entering the sliding window.
    pub window_slots: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProtectionError {
    ZeroHorizon,
    BadThreshold,
}

impl fmt::Display for ProtectionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtectionError::ZeroHorizon => write!(f, "decision horizon must be at least one slot"),
            ProtectionError::BadThreshold => write!(f, "thresholds must not be NaN"),
        }
    }
}

impl ProtectionConfig {
    /// Builds from dB thresholds. `max_th_db` may be `+inf` to disable the
    /// absolute constraint; the average threshold must be finite.
    pub fn from_db(
        avg_th_db: f64,
        max_th_db: f64,
        horizon_slots: usize,
        window_slots: usize,
    ) -> Result<Self, ProtectionError> {
        if horizon_slots == 0 {
            return Err(ProtectionError::ZeroHorizon);
        }
        if avg_th_db.is_nan() || max_th_db.is_nan() {
            return Err(ProtectionError::BadThreshold);
        }
        Ok(ProtectionConfig {
            avg_th_lin: db_to_lin(avg_th_db),
            max_th_lin: db_to_lin(max_th_db),
            horizon_slots,
            window_slots,
        })
    }
}

/// Trailing per-user INR history, zero-filled before the run starts.
#[derive(Debug, Clone)]
pub struct HistoryBank {
    users: usize,
    window: usize,
    /// Oldest slot at the front. Length stays exactly `window`.
    slots: VecDeque<Vec<f64>>,
}

impl HistoryBank {
    pub fn new(users: usize, window_slots: usize) -> Self {
        let mut slots = VecDeque::with_capacity(window_slots);
        for _ in 0..window_slots {
            slots.push_back(vec![0.0; users]);
        }
        HistoryBank { users, window: window_slots, slots }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn window_slots(&self) -> usize {
        self.window
    }

    /// Records one realized slot of per-user aggregate INR, discarding the
    /// oldest slot.
    pub fn push_slot(&mut self, samples: &[f64]) {
        assert_eq!(samples.len(), self.users, "history slot width mismatch");
        if self.window == 0 {
            return;
        }
        let mut recycled = self.slots.pop_front().expect("window is non-empty");
        recycled.copy_from_slice(samples);
        self.slots.push_back(recycled);
    }

    /// Sum of one user's trailing window, oldest slot first.
    pub fn window_sum(&self, user: usize) -> f64 {
        let mut s = 0.0;
        for slot in &self.slots {
            s += slot[user];
        }
        s
    }

    /// Largest trailing-window sum over all users; 0 when there are none.
    pub fn max_window_sum(&self) -> f64 {
        let mut worst = 0.0f64;
        for u in 0..self.users {
            let s = self.window_sum(u);
            if s > worst {
                worst = s;
            }
        }
        worst
    }
}

/// Horizon-average threshold remaining after the realized past is charged
/// against the sliding-window budget. May be zero or negative.
pub fn effective_avg_threshold(cfg: &ProtectionConfig, hist: &HistoryBank) -> f64 {
    let tw = cfg.window_slots as f64;
    let th = cfg.horizon_slots as f64;
    ((tw + th) * cfg.avg_th_lin - hist.max_window_sum()) / th
}

/// Post-hoc check of one handover window against the configured thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowReport {
    /// Realized mean over trailing window plus horizon, per user.
    pub avg_inr_lin: Vec<f64>,
    /// Largest per-slot aggregate over the horizon, per user.
    pub max_inr_lin: Vec<f64>,
    pub avg_violated: Vec<bool>,
    pub abs_violated: Vec<bool>,
}

impl WindowReport {
    pub fn clean(&self) -> bool {
        !self.avg_violated.iter().any(|&v| v) && !self.abs_violated.iter().any(|&v| v)
    }
}

/// Recomputes realized sliding-window means and per-slot maxima for one
/// horizon and flags threshold breaches beyond `VERIFY_REL_TOL`.
///
/// `horizon` holds one entry per realized slot (slot-major, each of length
/// `hist.users()`); a final window cut short by the end of the run is
/// evaluated over the slots that exist.
pub fn verify_window(cfg: &ProtectionConfig, hist: &HistoryBank, horizon: &[Vec<f64>]) -> WindowReport {
    let users = hist.users();
    let mut avg = Vec::with_capacity(users);
    let mut mx = Vec::with_capacity(users);
    for u in 0..users {
        let mut sum = hist.window_sum(u);
        let mut peak = 0.0f64;
        for slot in horizon {
            sum += slot[u];
            if slot[u] > peak {
                peak = slot[u];
            }
        }
        let count = (cfg.window_slots + horizon.len()) as f64;
        avg.push(if count > 0.0 { sum / count } else { 0.0 });
        mx.push(peak);
    }
    let avg_violated = avg.iter().map(|&v| exceeds(v, cfg.avg_th_lin)).collect();
    let abs_violated = mx.iter().map(|&v| exceeds(v, cfg.max_th_lin)).collect();
    WindowReport { avg_inr_lin: avg, max_inr_lin: mx, avg_violated, abs_violated }
}

#[inline]
fn exceeds(value: f64, threshold: f64) -> bool {
    value > threshold * (1.0 + VERIFY_REL_TOL)
}
