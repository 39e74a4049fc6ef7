//! Discrete-time plant of one MMC phase leg built from half-bridge submodules.
//!
//! All updates are explicit one-step predictions at the sampling period `t_s`.
//! Arm currents are held at their measured value over a step, so a submodule
//! inserted at `t + t_s` charges by `t_s * i_arm / c_sm` and a bypassed one
//! keeps its voltage exactly.

use crate::controller::SwitchDecision;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Electrical constants of one converter plus the selection weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverterParams<T> {
    /// Submodules per arm.
    pub n_sm: usize,
    /// AC-side series resistance (ohm).
    pub r: T,
    /// AC-side series inductance (henry).
    pub l: T,
    /// Arm inductance (henry).
    pub l_arm: T,
    /// Submodule capacitance (farad).
    pub c_sm: T,
    /// Nominal DC-bus voltage (volt).
    pub v_dc: T,
    /// Sampling period (second).
    pub t_s: T,
    /// AC tracking weight.
    pub w: T,
    /// Circulating-current weight.
    pub w_z: T,
}

impl<T: Scalar> ConverterParams<T> {
    /// Effective AC-loop inductance `l + l_arm / 2`.
    pub fn l_prime(&self) -> T {
        self.l + self.l_arm / T::lit(2.0)
    }

    /// Effective one-step impedance `r + l_prime / t_s`.
    pub fn k_prime(&self) -> T {
        self.r + self.l_prime() / self.t_s
    }

    /// Nominal capacitor voltage `v_dc / n_sm`.
    pub fn nominal_cap_voltage(&self) -> T {
        self.v_dc / T::from_count(self.n_sm)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sm == 0 {
            return Err(Error::field("n_sm", "must be at least 1"));
        }
        let positive = [
            ("r", self.r),
            ("l", self.l),
            ("l_arm", self.l_arm),
            ("c_sm", self.c_sm),
            ("v_dc", self.v_dc),
            ("t_s", self.t_s),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > T::zero()) {
                return Err(Error::field(name, format!("must be finite and > 0, got {value}")));
            }
        }
        for (name, value) in [("w", self.w), ("w_z", self.w_z)] {
            if !(value.is_finite() && value >= T::zero()) {
                return Err(Error::field(name, format!("must be finite and >= 0, got {value}")));
            }
        }
        if self.w == T::zero() && self.w_z == T::zero() {
            return Err(Error::field("w", "w and w_z must not both be zero"));
        }
        Ok(())
    }
}

impl ConverterParams<f64> {
    /// Seven-level converter of the back-to-back benchmark.
    pub fn table1() -> Self {
        ConverterParams {
            n_sm: 6,
            r: 0.03,
            l: 5e-3,
            l_arm: 3e-3,
            c_sm: 2.5e-3,
            v_dc: 60e3,
            t_s: 25e-6,
            w: 4.0,
            w_z: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SubmoduleState<T> {
    /// Capacitor voltage (volt).
    pub v_c: T,
    pub inserted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArmSide {
    Upper,
    Lower,
}

/// One arm: submodules in fixed physical order plus the arm current.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmState<T> {
    pub submodules: Vec<SubmoduleState<T>>,
    pub i_arm: T,
    pub side: ArmSide,
}

impl<T: Scalar> ArmState<T> {
    pub fn uniform(side: ArmSide, n_sm: usize, v_c: T) -> Self {
        ArmState {
            submodules: vec![
                SubmoduleState {
                    v_c,
                    inserted: false,
                };
                n_sm
            ],
            i_arm: T::zero(),
            side,
        }
    }

    pub fn len(&self) -> usize {
        self.submodules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.submodules.is_empty()
    }

    pub fn statuses(&self) -> impl Iterator<Item = bool> + '_ {
        self.submodules.iter().map(|sm| sm.inserted)
    }

    pub fn voltages(&self) -> impl Iterator<Item = T> + '_ {
        self.submodules.iter().map(|sm| sm.v_c)
    }

    /// Voltage currently synthesized by the inserted submodules.
    pub fn inserted_voltage(&self) -> T {
        self.submodules
            .iter()
            .filter(|sm| sm.inserted)
            .fold(T::zero(), |acc, sm| acc + sm.v_c)
    }

    pub fn total_voltage(&self) -> T {
        self.voltages().fold(T::zero(), |acc, v| acc + v)
    }
}

/// State of one phase leg at a sampling instant.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState<T> {
    pub upper: ArmState<T>,
    pub lower: ArmState<T>,
    /// AC-side current, positive out of the converter into the grid (ampere).
    pub i: T,
    /// Common-mode arm current `(i_up + i_low) / 2` (ampere).
    pub i_z: T,
    /// Grid phase voltage (volt).
    pub v_s: T,
    /// DC voltage across the leg, measured at this instant (volt).
    pub v_dc: T,
}

impl<T: Scalar> PhaseState<T> {
    /// Quiescent start: every capacitor at `v_dc / n`, all bypassed, no current.
    pub fn nominal(params: &ConverterParams<T>, v_s: T) -> Self {
        let v_c = params.nominal_cap_voltage();
        PhaseState {
            upper: ArmState::uniform(ArmSide::Upper, params.n_sm, v_c),
            lower: ArmState::uniform(ArmSide::Lower, params.n_sm, v_c),
            i: T::zero(),
            i_z: T::zero(),
            v_s,
            v_dc: params.v_dc,
        }
    }

    pub fn n_sm(&self) -> usize {
        self.upper.len()
    }

    pub fn arm(&self, side: ArmSide) -> &ArmState<T> {
        match side {
            ArmSide::Upper => &self.upper,
            ArmSide::Lower => &self.lower,
        }
    }

    /// Sum of all 2n capacitor voltages.
    pub fn total_cap_voltage(&self) -> T {
        self.upper.total_voltage() + self.lower.total_voltage()
    }

    pub fn is_finite(&self) -> bool {
        [self.i, self.i_z, self.v_s, self.v_dc, self.upper.i_arm, self.lower.i_arm]
            .iter()
            .all(|x| x.is_finite())
            && self.upper.voltages().chain(self.lower.voltages()).all(|v| v.is_finite())
    }
}

/// Capacitor voltage one step ahead for a given next-step status.
pub fn predict_capacitor_voltage<T: Scalar>(
    sm: &SubmoduleState<T>,
    i_arm: T,
    inserted_next: bool,
    params: &ConverterParams<T>,
) -> T {
    if inserted_next {
        sm.v_c + params.t_s * i_arm / params.c_sm
    } else {
        sm.v_c
    }
}

/// Predicted arm voltage at `t + t_s` for the given next-step statuses.
pub fn arm_voltage<T: Scalar>(
    arm: &ArmState<T>,
    statuses: &[bool],
    params: &ConverterParams<T>,
) -> Result<T> {
    if statuses.len() != arm.len() {
        return Err(Error::Contract(format!(
            "arm has {} submodules but {} statuses were given",
            arm.len(),
            statuses.len()
        )));
    }
    Ok(arm
        .submodules
        .iter()
        .zip(statuses)
        .filter(|(_, &on)| on)
        .fold(T::zero(), |acc, (sm, _)| {
            acc + predict_capacitor_voltage(sm, arm.i_arm, true, params)
        }))
}

/// AC-side current at `t + t_s`.
pub fn step_ac_current<T: Scalar>(
    phase: &PhaseState<T>,
    v_up_next: T,
    v_low_next: T,
    v_s_next: T,
    params: &ConverterParams<T>,
) -> T {
    let drive = (v_low_next - v_up_next) / T::lit(2.0) - v_s_next
        + params.l_prime() / params.t_s * phase.i;
    drive / params.k_prime()
}

/// Common-mode arm current at `t + t_s`, driven by the leg's DC voltage.
pub fn step_circulating_current<T: Scalar>(
    phase: &PhaseState<T>,
    v_up_next: T,
    v_low_next: T,
    params: &ConverterParams<T>,
) -> T {
    params.t_s / (T::lit(2.0) * params.l_arm) * (phase.v_dc - v_low_next - v_up_next) + phase.i_z
}

/// Splits the AC and common-mode currents into `(i_up, i_low)`.
pub fn decompose_arm_currents<T: Scalar>(i: T, i_z: T) -> (T, T) {
    let half = i / T::lit(2.0);
    (i_z + half, i_z - half)
}

/// Applies one switching decision and returns the state at `t + t_s`.
///
/// The DC voltage is held at `phase.v_dc` over the step; `v_s_next` is the
/// true grid voltage at the end of the step.
pub fn advance_phase<T: Scalar>(
    phase: &PhaseState<T>,
    decision: &SwitchDecision,
    v_s_next: T,
    params: &ConverterParams<T>,
) -> Result<PhaseState<T>> {
    let n = phase.n_sm();
    if decision.statuses.len() != 2 * n {
        return Err(Error::Contract(format!(
            "decision has {} statuses, expected {}",
            decision.statuses.len(),
            2 * n
        )));
    }
    let (up_next, low_next) = decision.statuses.split_at(n);

    let v_up_next = arm_voltage(&phase.upper, up_next, params)?;
    let v_low_next = arm_voltage(&phase.lower, low_next, params)?;

    let advance_arm = |arm: &ArmState<T>, statuses: &[bool]| -> Vec<SubmoduleState<T>> {
        arm.submodules
            .iter()
            .zip(statuses)
            .map(|(sm, &on)| SubmoduleState {
                v_c: predict_capacitor_voltage(sm, arm.i_arm, on, params),
                inserted: on,
            })
            .collect()
    };

    let i_next = step_ac_current(phase, v_up_next, v_low_next, v_s_next, params);
    let i_z_next = step_circulating_current(phase, v_up_next, v_low_next, params);
    let (i_up, i_low) = decompose_arm_currents(i_next, i_z_next);

    Ok(PhaseState {
        upper: ArmState {
            submodules: advance_arm(&phase.upper, up_next),
            i_arm: i_up,
            side: ArmSide::Upper,
        },
        lower: ArmState {
            submodules: advance_arm(&phase.lower, low_next),
            i_arm: i_low,
            side: ArmSide::Lower,
        },
        i: i_next,
        i_z: i_z_next,
        v_s: v_s_next,
        v_dc: phase.v_dc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ConverterParams<f64> {
        ConverterParams::table1()
    }

    fn two_sm_arm(i_arm: f64) -> ArmState<f64> {
        ArmState {
            submodules: vec![
                SubmoduleState { v_c: 10000.0, inserted: false },
                SubmoduleState { v_c: 10020.0, inserted: false },
            ],
            i_arm,
            side: ArmSide::Upper,
        }
    }

    #[test]
    fn derived_constants() {
        let p = params();
        assert!((p.l_prime() - 6.5e-3).abs() < 1e-15);
        assert!((p.k_prime() - 260.03).abs() < 1e-9);
        assert_eq!(p.nominal_cap_voltage(), 10000.0);
    }

    #[test]
    fn capacitor_prediction() {
        let p = params();
        let sm = SubmoduleState { v_c: 10000.0, inserted: false };
        assert!((predict_capacitor_voltage(&sm, 100.0, true, &p) - 10001.0).abs() < 1e-9);
        assert_eq!(predict_capacitor_voltage(&sm, 123.4, false, &p), 10000.0);
        assert!((predict_capacitor_voltage(&sm, -100.0, true, &p) - 9999.0).abs() < 1e-9);
    }

    #[test]
    fn arm_voltage_cases() {
        let p = params();
        assert_eq!(arm_voltage(&two_sm_arm(50.0), &[false, false], &p).unwrap(), 0.0);
        assert_eq!(arm_voltage(&two_sm_arm(0.0), &[true, true], &p).unwrap(), 20020.0);
        let v = arm_voltage(&two_sm_arm(100.0), &[true, false], &p).unwrap();
        assert!((v - 10001.0).abs() < 1e-9);
    }

    #[test]
    fn arm_voltage_length_mismatch() {
        let err = arm_voltage(&two_sm_arm(0.0), &[true], &params()).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn ac_current_cases() {
        let p = params();
        let mut ph = PhaseState::nominal(&p, 0.0);
        assert_eq!(step_ac_current(&ph, 30e3, 30e3, 0.0, &p), 0.0);

        let i = step_ac_current(&ph, 0.0, 2000.0, 0.0, &p);
        assert!((i - 1000.0 / 260.03).abs() < 1e-12);

        ph.i = 250.0;
        let v_s = 1234.0;
        let i = step_ac_current(&ph, 10e3, 10e3 + 2.0 * v_s, v_s, &p);
        let expected = p.l_prime() / p.t_s * 250.0 / p.k_prime();
        assert!((i - expected).abs() < 1e-9);
    }

    #[test]
    fn circulating_current_cases() {
        let p = params();
        let mut ph = PhaseState::nominal(&p, 0.0);
        assert_eq!(step_circulating_current(&ph, 25e3, 35e3, &p), 0.0);
        ph.i_z = 5.0;
        assert_eq!(step_circulating_current(&ph, 25e3, 35e3, &p), 5.0);
        ph.i_z = 0.0;
        let iz = step_circulating_current(&ph, 29e3, 30e3, &p);
        assert!((iz - 25e-6 / 6e-3 * 1000.0).abs() < 1e-9);
    }

    #[test]
    fn decomposition_examples() {
        assert_eq!(decompose_arm_currents(0.0, 0.0), (0.0, 0.0));
        assert_eq!(decompose_arm_currents(100.0, 0.0), (50.0, -50.0));
        assert_eq!(decompose_arm_currents(100.0, 10.0), (60.0, -40.0));
    }

    #[test]
    fn advance_all_bypassed_from_rest() {
        let p = params();
        let ph = PhaseState::nominal(&p, 0.0);
        let decision = SwitchDecision::from_statuses(vec![false; 12], 6);
        let next = advance_phase(&ph, &decision, 0.0, &p).unwrap();
        assert_eq!(next.upper.submodules, ph.upper.submodules);
        assert_eq!(next.lower.submodules, ph.lower.submodules);
        assert_eq!(next.i, 0.0);
        assert!((next.i_z - p.t_s / (2.0 * p.l_arm) * p.v_dc).abs() < 1e-12);
        assert_eq!(next.upper.i_arm, next.i_z);
        assert_eq!(next.lower.i_arm, next.i_z);
    }

    #[test]
    fn advance_with_zero_current_keeps_voltages() {
        let p = params();
        let mut ph = PhaseState::nominal(&p, 0.0);
        for (k, sm) in ph.upper.submodules.iter_mut().enumerate() {
            sm.inserted = k < 3;
        }
        for (k, sm) in ph.lower.submodules.iter_mut().enumerate() {
            sm.inserted = k >= 3;
        }
        let statuses: Vec<bool> = ph.upper.statuses().chain(ph.lower.statuses()).collect();
        let decision = SwitchDecision::from_statuses(statuses, 6);
        let next = advance_phase(&ph, &decision, 0.0, &p).unwrap();
        assert!(next.upper.voltages().all(|v| v == 10000.0));
        assert!(next.lower.voltages().all(|v| v == 10000.0));
    }

    #[test]
    fn advance_rejects_wrong_length() {
        let p = params();
        let ph = PhaseState::nominal(&p, 0.0);
        let decision = SwitchDecision::from_statuses(vec![false; 11], 6);
        assert!(matches!(
            advance_phase(&ph, &decision, 0.0, &p),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn validation_rejects_bad_values() {
        let mut p = params();
        p.n_sm = 0;
        assert!(matches!(p.validate(), Err(Error::InvalidField { field, .. }) if field == "n_sm"));
        let mut p = params();
        p.c_sm = -1.0;
        assert!(matches!(p.validate(), Err(Error::InvalidField { field, .. }) if field == "c_sm"));
        let mut p = params();
        p.w = 0.0;
        p.w_z = 0.0;
        assert!(p.validate().is_err());
        assert!(params().validate().is_ok());
    }

    #[test]
    fn runs_on_f32() {
        let p = ConverterParams::<f32> {
            n_sm: 2,
            r: 0.03,
            l: 5e-3,
            l_arm: 3e-3,
            c_sm: 2.5e-3,
            v_dc: 20e3,
            t_s: 25e-6,
            w: 1.0,
            w_z: 1.0,
        };
        let ph = PhaseState::nominal(&p, 0.0f32);
        let decision = SwitchDecision::from_statuses(vec![true, false, true, false], 2);
        let next = advance_phase(&ph, &decision, 0.0, &p).unwrap();
        assert!(next.is_finite());
    }
}
