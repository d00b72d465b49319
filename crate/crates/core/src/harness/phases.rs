//! Detection of the MF-exploring / MB-driving / MF-driving pattern in
//! selection-probability curves.

use std::fmt;

/// Centred moving average; the window is truncated at the curve ends.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let back = (window - 1) / 2;
    let fwd = window - 1 - back;
    let mut prefix = Vec::with_capacity(values.len() + 1);
    prefix.push(0.0);
    for v in values {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(back);
            let hi = (i + fwd + 1).min(values.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Boundaries found in one task period `[start, end)`. `None` means the
/// corresponding transition never happened.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodPhases {
    pub start: usize,
    pub end: usize,
    /// First step of the period where MF leads.
    pub mf_exploring: Option<usize>,
    /// First step after that where MB leads.
    pub mb_driving: Option<usize>,
    /// First step after that where MF leads again.
    pub mf_driving: Option<usize>,
}

impl PeriodPhases {
    /// The strictly increasing boundaries, MF→MB then MB→MF.
    pub fn boundaries(&self) -> Vec<usize> {
        [self.mb_driving, self.mf_driving].into_iter().flatten().collect()
    }

    pub fn complete(&self) -> bool {
        self.mf_driving.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseReport {
    pub window: usize,
    pub periods: Vec<PeriodPhases>,
}

impl fmt::Display for PhaseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "smoothing window: {}", self.window)?;
        let show = |b: Option<usize>| b.map_or_else(|| "absent".to_string(), |v| v.to_string());
        for (i, p) in self.periods.iter().enumerate() {
            writeln!(f, "period {i} [{}, {}):", p.start, p.end)?;
            writeln!(f, "  MF exploring from: {}", show(p.mf_exploring))?;
            writeln!(f, "  MB driving from:   {}", show(p.mb_driving))?;
            writeln!(f, "  MF driving from:   {}", show(p.mf_driving))?;
        }
        Ok(())
    }
}

fn first_where(curve: &[f64], from: usize, to: usize, pred: impl Fn(f64) -> bool) -> Option<usize> {
    (from..to.min(curve.len())).find(|&i| pred(curve[i]))
}

/// Smooths `p_mf` and locates the 0.5 crossings in order within each period.
/// `change_steps` split the curve into periods.
pub fn detect_phases(p_mf: &[f64], window: usize, change_steps: &[u64]) -> PhaseReport {
    let smooth = moving_average(p_mf, window);
    let n = smooth.len();
    let mut cuts: Vec<usize> = change_steps.iter().map(|&c| c as usize).filter(|&c| c > 0 && c < n).collect();
    cuts.sort_unstable();
    cuts.dedup();
    let mut bounds = vec![0];
    bounds.extend(cuts);
    bounds.push(n);
    let periods = bounds
        .windows(2)
        .map(|w| {
            let (start, end) = (w[0], w[1]);
            let mf_exploring = first_where(&smooth, start, end, |p| p > 0.5);
            let mb_driving = mf_exploring.and_then(|i| first_where(&smooth, i, end, |p| p < 0.5));
            let mf_driving = mb_driving.and_then(|i| first_where(&smooth, i, end, |p| p > 0.5));
            PeriodPhases {
                start,
                end,
                mf_exploring,
                mb_driving,
                mf_driving,
            }
        })
        .collect();
    PhaseReport { window, periods }
}

/// The four checks of the three-phase pattern around a first reward and a
/// task change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThreePhaseCheck {
    /// Mean p_mf over the steps before the first reward exceeds 0.5.
    pub mf_before_discovery: bool,
    /// Smoothed p_mb exceeds 0.5 within `horizon` steps after discovery.
    pub mb_after_discovery: bool,
    /// Smoothed p_mf exceeds 0.5 again before the change.
    pub mf_before_change: bool,
    /// Smoothed p_mb exceeds 0.5 within `horizon` steps after the change.
    pub mb_after_change: bool,
}

impl ThreePhaseCheck {
    pub fn all(&self) -> bool {
        self.mf_before_discovery && self.mb_after_discovery && self.mf_before_change && self.mb_after_change
    }
}

pub fn three_phase_check(p_mf: &[f64], window: usize, first_reward: usize, change: usize, horizon: usize) -> ThreePhaseCheck {
    let smooth = moving_average(p_mf, window);
    let pre = &p_mf[..first_reward.min(p_mf.len())];
    let mf_before_discovery = !pre.is_empty() && pre.iter().sum::<f64>() / pre.len() as f64 > 0.5;
    let mb_at = first_where(&smooth, first_reward, first_reward + horizon + 1, |p| p < 0.5);
    let mf_again = mb_at.and_then(|i| first_where(&smooth, i, change, |p| p > 0.5));
    let mb_after_change = first_where(&smooth, change, change + horizon + 1, |p| p < 0.5).is_some();
    ThreePhaseCheck {
        mf_before_discovery,
        mb_after_discovery: mb_at.is_some(),
        mf_before_change: mf_again.is_some(),
        mb_after_change,
    }
}
