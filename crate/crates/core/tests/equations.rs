mod common;

use common::*;
use mmc_mpc::{
    advance_phase, arm_voltage, compute_targets, decompose_arm_currents, predict_capacitor_voltage,
    step_ac_current, step_circulating_current, ConverterParams, PhaseState, SwitchDecision,
};
use proptest::prelude::*;
use rand::Rng;

const REL: f64 = 1e-9;

#[test]
fn capacitor_update_matches_oracle() {
    let mut r = rng(1);
    for _ in 0..1000 {
        let p = random_params(&mut r, 4);
        let ph = random_phase(&mut r, &p);
        let sm = ph.upper.submodules[0];
        for on in [false, true] {
            let got = predict_capacitor_voltage(&sm, ph.upper.i_arm, on, &p);
            let want = oracle_cap_voltage(sm.v_c, ph.upper.i_arm, on, p.c_sm, p.t_s);
            assert!(rel_close(got, want, REL), "{got} vs {want}");
        }
    }
}

#[test]
fn ac_and_circulating_currents_match_oracle() {
    let mut r = rng(2);
    for _ in 0..1000 {
        let p = random_params(&mut r, 3);
        let ph = random_phase(&mut r, &p);
        let v_up = r.gen_range(0.0..p.v_dc);
        let v_low = r.gen_range(0.0..p.v_dc);
        let v_s = r.gen_range(-0.5..0.5) * p.v_dc;
        let got = step_ac_current(&ph, v_up, v_low, v_s, &p);
        let want = oracle_ac_current(ph.i, v_up, v_low, v_s, p.r, p.l, p.l_arm, p.t_s);
        assert!(rel_close(got, want, REL), "ac {got} vs {want}");
        let got = step_circulating_current(&ph, v_up, v_low, &p);
        let want = oracle_circulating(ph.i_z, v_up, v_low, ph.v_dc, p.l_arm, p.t_s);
        assert!(rel_close(got, want, REL), "iz {got} vs {want}");
    }
}

#[test]
fn targets_match_oracle() {
    let mut r = rng(3);
    for _ in 0..1000 {
        let p = random_params(&mut r, 5);
        let ph = random_phase(&mut r, &p);
        let i_ref = r.gen_range(-500.0..500.0);
        let i_z_ref = r.gen_range(-50.0..50.0);
        let t = compute_targets(&ph, i_ref, i_z_ref, &p);
        let (up, low) = oracle_targets(ph.i, ph.i_z, ph.v_s, ph.v_dc, i_ref, i_z_ref, p.r, p.l, p.l_arm, p.t_s);
        assert!(rel_close(t.v_up_star, up, REL), "{} vs {up}", t.v_up_star);
        assert!(rel_close(t.v_low_star, low, REL), "{} vs {low}", t.v_low_star);
    }
}

#[test]
fn single_precision_tracks_double() {
    let p64 = ConverterParams::table1();
    let p32 = ConverterParams::<f32> {
        n_sm: p64.n_sm,
        r: p64.r as f32,
        l: p64.l as f32,
        l_arm: p64.l_arm as f32,
        c_sm: p64.c_sm as f32,
        v_dc: p64.v_dc as f32,
        t_s: p64.t_s as f32,
        w: p64.w as f32,
        w_z: p64.w_z as f32,
    };
    let ph64 = PhaseState::nominal(&p64, 1.0e4);
    let ph32 = PhaseState::nominal(&p32, 1.0e4);
    let a = compute_targets(&ph64, 300.0, 0.0, &p64);
    let b = compute_targets(&ph32, 300.0, 0.0, &p32);
    assert!(((a.v_up_star - b.v_up_star as f64) / a.v_up_star).abs() < 1e-5);
    assert!(((a.v_low_star - b.v_low_star as f64) / a.v_low_star).abs() < 1e-5);
}

fn arb_phase(n: usize) -> impl Strategy<Value = (ConverterParams<f64>, PhaseState<f64>, Vec<bool>)> {
    (any::<u64>(), proptest::collection::vec(any::<bool>(), 2 * n)).prop_map(move |(seed, statuses)| {
        let mut r = rng(seed);
        let p = random_params(&mut r, n);
        let ph = random_phase(&mut r, &p);
        (p, ph, statuses)
    })
}

proptest! {
    #[test]
    fn bypassed_capacitors_hold_exactly((p, ph, _) in arb_phase(4), i_arm in -2e3..2e3f64) {
        for sm in ph.upper.submodules.iter().chain(&ph.lower.submodules) {
            prop_assert_eq!(predict_capacitor_voltage(sm, i_arm, false, &p), sm.v_c);
        }
    }

    #[test]
    fn step_conserves_charge((p, ph, statuses) in arb_phase(4), v_s in -3e4..3e4f64) {
        let decision = SwitchDecision::from_statuses(statuses.clone(), 4);
        let next = advance_phase(&ph, &decision, v_s, &p).unwrap();
        for (before, after, on, i_arm) in [
            (&ph.upper, &next.upper, &statuses[..4], ph.upper.i_arm),
            (&ph.lower, &next.lower, &statuses[4..], ph.lower.i_arm),
        ] {
            let dq: f64 = before.submodules.iter().zip(&after.submodules)
                .map(|(b, a)| p.c_sm * (a.v_c - b.v_c)).sum();
            let inserted = on.iter().filter(|&&u| u).count() as f64;
            let expected = inserted * i_arm * p.t_s;
            prop_assert!((dq - expected).abs() <= 1e-9 * expected.abs().max(p.c_sm * p.v_dc * 1e-6));
            for (a, &u) in after.submodules.iter().zip(on) {
                prop_assert_eq!(a.inserted, u);
            }
        }
    }

    #[test]
    fn arm_currents_decompose_and_recompose(i in -1e4..1e4f64, i_z in -1e3..1e3f64) {
        let (up, low) = decompose_arm_currents(i, i_z);
        prop_assert!(rel_close(up - low, i, 1e-12));
        prop_assert!(rel_close((up + low) / 2.0, i_z, 1e-12));
    }

    #[test]
    fn ac_current_is_affine_in_arm_voltages((p, ph, _) in arb_phase(2), v_up in 0.0..6e4f64, v_low in 0.0..6e4f64, dv in 1.0..1e3f64) {
        let base = step_ac_current(&ph, v_up, v_low, ph.v_s, &p);
        let up = step_ac_current(&ph, v_up + dv, v_low, ph.v_s, &p);
        let low = step_ac_current(&ph, v_up, v_low + dv, ph.v_s, &p);
        let slope = 1.0 / (2.0 * p.k_prime());
        prop_assert!(rel_close((up - base) / dv, -slope, 1e-6));
        prop_assert!(rel_close((low - base) / dv, slope, 1e-6));
        let z = step_circulating_current(&ph, v_up + dv, v_low, &p) - step_circulating_current(&ph, v_up, v_low, &p);
        prop_assert!(rel_close(z / dv, -p.t_s / (2.0 * p.l_arm), 1e-6));
    }

    #[test]
    fn targets_are_a_zero_error_fixed_point((p, ph, _) in arb_phase(3), i_ref in -800.0..800.0f64, i_z_ref in -80.0..80.0f64) {
        let t = compute_targets(&ph, i_ref, i_z_ref, &p);
        let i = step_ac_current(&ph, t.v_up_star, t.v_low_star, ph.v_s, &p);
        let i_z = step_circulating_current(&ph, t.v_up_star, t.v_low_star, &p);
        prop_assert!((i - i_ref).abs() <= 1e-9 * p.v_dc);
        prop_assert!((i_z - i_z_ref).abs() <= 1e-9 * p.v_dc);
    }

    #[test]
    fn target_sum_identity((p, ph, _) in arb_phase(3), i_ref in -800.0..800.0f64) {
        let t = compute_targets(&ph, i_ref, 0.0, &p);
        let expected = ph.v_dc + 2.0 * p.l_arm / p.t_s * ph.i_z;
        prop_assert!(rel_close(t.v_up_star + t.v_low_star, expected, 1e-9));
    }

    #[test]
    fn arm_voltage_sums_inserted_predictions((p, ph, statuses) in arb_phase(5)) {
        let got = arm_voltage(&ph.upper, &statuses[..5], &p).unwrap();
        let want: f64 = ph.upper.submodules.iter().zip(&statuses[..5])
            .filter(|(_, &u)| u)
            .map(|(sm, _)| oracle_cap_voltage(sm.v_c, ph.upper.i_arm, true, p.c_sm, p.t_s))
            .sum();
        prop_assert!(rel_close(got, want, 1e-12));
    }
}
