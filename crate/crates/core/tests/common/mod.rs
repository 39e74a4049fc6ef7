//! Shared generators and independent oracles for the integration tests.
#![allow(dead_code, clippy::too_many_arguments)]

use mmc_mpc::{
    count_objective, cumulative_sums, sort_arm, ArmSide, ArmState, ConverterParams, PhaseState, SortPolicy,
    SubmoduleState, TargetVoltages,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Table I constants with `n` submodules per arm.
pub fn params_n(n: usize) -> ConverterParams<f64> {
    ConverterParams {
        n_sm: n,
        ..ConverterParams::table1()
    }
}

/// Physically plausible parameters drawn around Table I.
pub fn random_params(r: &mut impl Rng, n: usize) -> ConverterParams<f64> {
    ConverterParams {
        n_sm: n,
        r: r.gen_range(0.001..0.5),
        l: r.gen_range(1e-3..2e-2),
        l_arm: r.gen_range(1e-3..1e-2),
        c_sm: r.gen_range(5e-4..1e-2),
        v_dc: r.gen_range(1e3..1e5),
        t_s: r.gen_range(5e-6..1e-4),
        w: r.gen_range(0.1..10.0),
        w_z: r.gen_range(0.1..10.0),
    }
}

pub fn random_arm(r: &mut impl Rng, side: ArmSide, n: usize, nominal: f64, i_arm: f64) -> ArmState<f64> {
    ArmState {
        submodules: (0..n)
            .map(|_| SubmoduleState {
                v_c: r.gen_range(0.9..1.1) * nominal,
                inserted: r.gen_bool(0.5),
            })
            .collect(),
        i_arm,
        side,
    }
}

/// Random operating point: capacitors within ±10 % of nominal, random statuses.
pub fn random_phase(r: &mut impl Rng, p: &ConverterParams<f64>) -> PhaseState<f64> {
    let nominal = p.v_dc / p.n_sm as f64;
    let i = r.gen_range(-500.0..500.0);
    let i_z = r.gen_range(-100.0..100.0);
    PhaseState {
        upper: random_arm(r, ArmSide::Upper, p.n_sm, nominal, i_z + i / 2.0),
        lower: random_arm(r, ArmSide::Lower, p.n_sm, nominal, i_z - i / 2.0),
        i,
        i_z,
        v_s: r.gen_range(-0.5..0.5) * p.v_dc,
        v_dc: p.v_dc * r.gen_range(0.95..1.05),
    }
}

// Oracles: written from the circuit equations with every constant expanded
// inline, sharing no code with the library.

pub fn oracle_cap_voltage(v: f64, i_arm: f64, on: bool, c: f64, ts: f64) -> f64 {
    if on {
        v + i_arm * ts / c
    } else {
        v
    }
}

pub fn oracle_ac_current(
    i: f64,
    v_up: f64,
    v_low: f64,
    v_s: f64,
    r: f64,
    l: f64,
    l_arm: f64,
    ts: f64,
) -> f64 {
    // (R + L'/Ts) i' = (v_low - v_up)/2 - v_s + (L'/Ts) i
    let lp = l + 0.5 * l_arm;
    ((v_low - v_up) * 0.5 - v_s + lp * i / ts) / (r + lp / ts)
}

pub fn oracle_circulating(i_z: f64, v_up: f64, v_low: f64, v_dc: f64, l_arm: f64, ts: f64) -> f64 {
    // 2 l di_z/dt = V_dc - v_up - v_low
    i_z + (v_dc - v_up - v_low) * ts / (2.0 * l_arm)
}

/// Arm voltages that drive the next AC current to `i_ref` and the next
/// common-mode current to `i_z_ref`, obtained by inverting the two oracles above.
pub fn oracle_targets(
    i: f64,
    i_z: f64,
    v_s: f64,
    v_dc: f64,
    i_ref: f64,
    i_z_ref: f64,
    r: f64,
    l: f64,
    l_arm: f64,
    ts: f64,
) -> (f64, f64) {
    let lp = l + 0.5 * l_arm;
    // difference d = v_low - v_up, sum s = v_low + v_up
    let d = 2.0 * ((r + lp / ts) * i_ref + v_s - lp * i / ts);
    let s = v_dc - 2.0 * l_arm * (i_z_ref - i_z) / ts;
    ((s - d) / 2.0, (s + d) / 2.0)
}

pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

/// Brute-force minimum of the selection objective over every count pair.
pub fn brute_force_min(
    up: &ArmState<f64>,
    low: &ArmState<f64>,
    policy: SortPolicy,
    targets: &TargetVoltages<f64>,
    p: &ConverterParams<f64>,
) -> f64 {
    let alpha = cumulative_sums(&sort_arm(up, policy));
    let beta = cumulative_sums(&sort_arm(low, policy));
    let mut best = f64::INFINITY;
    for k_up in 0..=up.len() {
        for k_low in 0..=low.len() {
            best = best.min(count_objective(&alpha, &beta, targets, k_up, k_low, p));
        }
    }
    best
}

/// Random in-range targets: each within `[0, sum of the arm's voltages]`.
pub fn random_targets(r: &mut impl Rng, up: &ArmState<f64>, low: &ArmState<f64>) -> TargetVoltages<f64> {
    TargetVoltages {
        v_up_star: r.gen_range(0.0..=up.total_voltage()),
        v_low_star: r.gen_range(0.0..=low.total_voltage()),
    }
}
