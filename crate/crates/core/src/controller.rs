//! Two-stage predictive switching controller.
//!
//! Stage one orders the submodules of each arm (voltage-first V1-F2 or
//! status-first F1-V2). Stage two brackets the target arm voltages in the
//! cumulative sums of the ordered voltages and picks the best of at most four
//! insertion-count pairs.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ArmState, ConverterParams, PhaseState};
use crate::scalar::Scalar;

/// Submodule ordering used before selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SortPolicy {
    /// Voltage only (conventional capacitor balancing).
    V1F2,
    /// Currently inserted submodules first, voltage order inside each group.
    F1V2,
}

impl SortPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            SortPolicy::V1F2 => "V1F2",
            SortPolicy::F1V2 => "F1V2",
        }
    }
}

impl fmt::Display for SortPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SortPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().replace('-', "").as_str() {
            "V1F2" => Ok(SortPolicy::V1F2),
            "F1V2" => Ok(SortPolicy::F1V2),
            _ => Err(Error::field("policy", format!("unknown sort policy `{s}`"))),
        }
    }
}

/// Arm ordering produced by stage one.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedArm<T> {
    /// Physical submodule indices (0-based) in priority order.
    pub order: Vec<usize>,
    /// Voltages of `order`, same length.
    pub sorted_voltages: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetVoltages<T> {
    pub v_up_star: T,
    pub v_low_star: T,
}

/// Next-step statuses of the 2n submodules of one phase: upper arm first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchDecision {
    pub statuses: Vec<bool>,
    pub n_up: usize,
    pub n_low: usize,
}

impl SwitchDecision {
    /// Builds a decision from raw statuses, deriving the inserted counts.
    pub fn from_statuses(statuses: Vec<bool>, n_sm: usize) -> Self {
        let split = n_sm.min(statuses.len());
        let n_up = statuses[..split].iter().filter(|&&u| u).count();
        let n_low = statuses[split..].iter().filter(|&&u| u).count();
        SwitchDecision {
            statuses,
            n_up,
            n_low,
        }
    }

    /// Number of submodules whose status differs from `previous`.
    pub fn transitions_from(&self, previous: &PhaseState<impl Scalar>) -> usize {
        previous
            .upper
            .statuses()
            .chain(previous.lower.statuses())
            .zip(&self.statuses)
            .filter(|(old, &new)| *old != new)
            .count()
    }
}

/// Target arm voltages that would make the AC current hit `i_ref_next` and
/// the common-mode current hit `i_z_ref` exactly at the next sample.
///
/// With `i_z_ref = 0` this is plain circulating-current elimination. The
/// testbench passes each leg's DC share so that the capacitors are fed.
pub fn compute_targets<T: Scalar>(
    phase: &PhaseState<T>,
    i_ref_next: T,
    i_z_ref: T,
    params: &ConverterParams<T>,
) -> TargetVoltages<T> {
    let two = T::lit(2.0);
    let common = phase.v_dc / two + params.l_arm / params.t_s * (phase.i_z - i_z_ref);
    let differential =
        params.k_prime() * i_ref_next + phase.v_s - params.l_prime() / params.t_s * phase.i;
    TargetVoltages {
        v_up_star: common - differential,
        v_low_star: common + differential,
    }
}

/// Weighted one-step tracking error for arm-voltage deviations
/// `dv = v_star - v`.
pub fn objective_f<T: Scalar>(dv_up: T, dv_low: T, params: &ConverterParams<T>) -> T {
    let two = T::lit(2.0);
    params.w / (two * params.k_prime()) * (dv_low - dv_up).abs()
        + params.w_z * params.t_s / (two * params.l_arm) * (dv_low + dv_up).abs()
}

fn cmp_voltage<T: Scalar>(a: T, b: T) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

/// Orders the submodules of one arm by insertion priority.
///
/// The voltage key is ascending when the arm current charges (`i_arm >= 0`)
/// and descending otherwise. F1-V2 then stable-sorts on the current status so
/// inserted submodules come first. All sorts are stable over physical index.
pub fn sort_arm<T: Scalar>(arm: &ArmState<T>, policy: SortPolicy) -> SortedArm<T> {
    let sms = &arm.submodules;
    let mut order: Vec<usize> = (0..sms.len()).collect();
    if arm.i_arm >= T::zero() {
        order.sort_by(|&a, &b| cmp_voltage(sms[a].v_c, sms[b].v_c));
    } else {
        order.sort_by(|&a, &b| cmp_voltage(sms[b].v_c, sms[a].v_c));
    }
    if policy == SortPolicy::F1V2 {
        order.sort_by_key(|&k| !sms[k].inserted);
    }
    let sorted_voltages = order.iter().map(|&k| sms[k].v_c).collect();
    SortedArm {
        order,
        sorted_voltages,
    }
}

/// Prefix sums `[0, v_1, v_1 + v_2, ...]`, length n + 1.
pub fn cumulative_sums<T: Scalar>(sorted: &SortedArm<T>) -> Vec<T> {
    let mut sums = Vec::with_capacity(sorted.sorted_voltages.len() + 1);
    let mut acc = T::zero();
    sums.push(acc);
    for &v in &sorted.sorted_voltages {
        acc = acc + v;
        sums.push(acc);
    }
    sums
}

/// Insertion counts bracketing `target` in `sums`: `{i, i+1}` with
/// `sums[i] <= target < sums[i+1]`, or a single clamped count outside range.
fn bracket<T: Scalar>(sums: &[T], target: T) -> ([usize; 2], usize) {
    let n = sums.len() - 1;
    let at_or_below = sums.partition_point(|&s| s <= target);
    match at_or_below {
        0 => ([0, 0], 1),
        p if p > n => ([n, n], 1),
        p => ([p - 1, p], 2),
    }
}

/// Objective value of inserting the first `k_up` / `k_low` sorted submodules.
pub fn count_objective<T: Scalar>(
    alpha: &[T],
    beta: &[T],
    targets: &TargetVoltages<T>,
    k_up: usize,
    k_low: usize,
    params: &ConverterParams<T>,
) -> T {
    objective_f(
        targets.v_up_star - alpha[k_up],
        targets.v_low_star - beta[k_low],
        params,
    )
}

/// Picks the insertion counts minimizing [`objective_f`] among the bracketing
/// candidates and inserts that prefix of each sorted arm.
pub fn select_submodules<T: Scalar>(
    sorted_up: &SortedArm<T>,
    sorted_low: &SortedArm<T>,
    targets: &TargetVoltages<T>,
    params: &ConverterParams<T>,
) -> SwitchDecision {
    let n = sorted_up.order.len();
    let alpha = cumulative_sums(sorted_up);
    let beta = cumulative_sums(sorted_low);
    let (up_candidates, up_len) = bracket(&alpha, targets.v_up_star);
    let (low_candidates, low_len) = bracket(&beta, targets.v_low_star);

    let mut best: Option<(T, usize, usize)> = None;
    for &k_up in &up_candidates[..up_len] {
        for &k_low in &low_candidates[..low_len] {
            let value = count_objective(&alpha, &beta, targets, k_up, k_low, params);
            if best.is_none_or(|(b, _, _)| value < b) {
                best = Some((value, k_up, k_low));
            }
        }
    }
    let (_, n_up, n_low) = best.expect("at least one candidate");

    let mut statuses = vec![false; n + sorted_low.order.len()];
    for &k in &sorted_up.order[..n_up] {
        statuses[k] = true;
    }
    for &k in &sorted_low.order[..n_low] {
        statuses[n + k] = true;
    }
    SwitchDecision {
        statuses,
        n_up,
        n_low,
    }
}

/// One full controller evaluation for a phase leg.
pub fn control_step<T: Scalar>(
    phase: &PhaseState<T>,
    i_ref_next: T,
    i_z_ref: T,
    policy: SortPolicy,
    params: &ConverterParams<T>,
) -> Result<SwitchDecision> {
    if phase.upper.len() != params.n_sm || phase.lower.len() != params.n_sm {
        return Err(Error::Contract(format!(
            "phase arms have {}/{} submodules, params expect {}",
            phase.upper.len(),
            phase.lower.len(),
            params.n_sm
        )));
    }
    let targets = compute_targets(phase, i_ref_next, i_z_ref, params);
    let sorted_up = sort_arm(&phase.upper, policy);
    let sorted_low = sort_arm(&phase.lower, policy);
    Ok(select_submodules(&sorted_up, &sorted_low, &targets, params))
}
