//! Closed-loop scenarios: one grid-tied MMC on an ideal DC bus, or two MMCs
//! joined back to back through a lumped HVDC line.
//!
//! Outer loops (not part of the predictive controller itself):
//! - each leg's common-mode current reference is its share of the DC power,
//!   `p_ref / (3 v_dc)`, plus a proportional term on the leg's total
//!   capacitor voltage so the stored energy holds at its nominal value;
//! - in back-to-back mode converter 2 regulates the far-end link voltage with
//!   a PI loop acting on its AC power setpoint (feedforward `-p_1`).

use std::f64::consts::PI;

use crate::controller::{control_step, SortPolicy};
use crate::error::{Error, Result};
use crate::io::sink::{PhaseLabel, Row, TimeSeriesSink};
use crate::metrics::{MetricsCollector, SummaryMetrics, Window};
use crate::model::{advance_phase, ConverterParams, PhaseState};
use crate::scalar::Scalar;

/// Balanced three-phase grid voltage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSource<T> {
    /// Phase peak voltage (volt).
    pub amplitude: T,
    pub frequency: T,
    /// Angle of phase a (radian); b and c follow at -2π/3 and +2π/3.
    pub phase_offset: T,
}

impl<T: Scalar> GridSource<T> {
    pub fn phase_offsets(&self) -> [T; 3] {
        let third = T::lit(2.0 * PI / 3.0);
        [self.phase_offset, self.phase_offset - third, self.phase_offset + third]
    }

    fn angle(&self, phase: usize, t: T) -> T {
        T::lit(2.0 * PI) * self.frequency * t + self.phase_offsets()[phase]
    }

    pub fn voltage(&self, phase: usize, t: T) -> T {
        self.amplitude * self.angle(phase, t).sin()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude > T::zero()) {
            return Err(Error::field("grid.amplitude", "must be > 0"));
        }
        if !(self.frequency.is_finite() && self.frequency > T::zero()) {
            return Err(Error::field("grid.frequency", "must be > 0"));
        }
        if !self.phase_offset.is_finite() {
            return Err(Error::field("grid.phase_offset", "must be finite"));
        }
        Ok(())
    }
}

/// HVDC line as one lumped π-section: half the capacitance at each end and
/// the full inductance in between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcLink<T> {
    pub length_km: T,
    /// Farad per km.
    pub c_per_km: T,
    /// Henry per km.
    pub l_per_km: T,
    /// Voltage at the converter-1 end.
    pub v_near: T,
    /// Voltage at the converter-2 end.
    pub v_far: T,
    /// Line current from converter 2 toward converter 1.
    pub i_link: T,
}

impl<T: Scalar> DcLink<T> {
    pub fn total_capacitance(&self) -> T {
        self.c_per_km * self.length_km
    }

    pub fn total_inductance(&self) -> T {
        self.l_per_km * self.length_km
    }

    /// Advances the line by `dt` given the DC currents drawn at each end.
    ///
    /// Semi-implicit Euler: the inductor current is updated first and the
    /// end capacitors see the new value, which keeps the lossless LC
    /// resonance from growing numerically.
    pub fn step(&mut self, draw_near: T, draw_far: T, dt: T) {
        let c_end = self.total_capacitance() / T::lit(2.0);
        self.i_link = self.i_link + dt / self.total_inductance() * (self.v_far - self.v_near);
        self.v_near = self.v_near + dt / c_end * (self.i_link - draw_near);
        self.v_far = self.v_far + dt / c_end * (-self.i_link - draw_far);
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("dc_link.length_km", self.length_km),
            ("dc_link.c_per_km", self.c_per_km),
            ("dc_link.l_per_km", self.l_per_km),
        ] {
            if !(v.is_finite() && v > T::zero()) {
                return Err(Error::field(name, "must be > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Converter 1 alone on a stiff DC bus at `v_dc`.
    IdealDc,
    /// Converters 1 and 2 joined by the DC link.
    BackToBack,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::IdealDc => "ideal-dc",
            Mode::BackToBack => "back-to-back",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal-dc" => Ok(Mode::IdealDc),
            "back-to-back" => Ok(Mode::BackToBack),
            _ => Err(Error::field("scenario.mode", format!("expected ideal-dc or back-to-back, got `{s}`"))),
        }
    }
}

/// AC setpoint of converter 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference<T> {
    /// Active power injected into grid 1 (watt).
    Power(T),
    /// Peak AC current in phase with the grid voltage (ampere).
    CurrentAmplitude(T),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyEvent<T> {
    pub time: T,
    pub policy: SortPolicy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterLoop<T> {
    /// Common-mode current per volt of total capacitor-voltage error (A/V).
    pub energy_gain: T,
    /// DC-voltage PI on converter 2: watt per volt.
    pub dc_kp: T,
    /// Watt per volt-second.
    pub dc_ki: T,
}

impl OuterLoop<f64> {
    pub fn default_gains() -> Self {
        OuterLoop {
            energy_gain: 0.002,
            dc_kp: 2e4,
            dc_ki: 5e5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub duration: T,
    pub initial_policy: SortPolicy,
    /// Policy switchovers, strictly increasing in time.
    pub events: Vec<PolicyEvent<T>>,
    pub reference: Reference<T>,
    pub mode: Mode,
    pub outer: OuterLoop<T>,
    /// Start of the metrics analysis window.
    pub settle: T,
    /// Tumbling metrics segment length.
    pub segment: T,
    /// Write every k-th step to the sink; metrics always see every step.
    pub record_every: usize,
}

impl<T: Scalar> Scenario<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration >= T::zero()) {
            return Err(Error::field("scenario.duration", "must be >= 0"));
        }
        let mut last: Option<T> = None;
        for ev in &self.events {
            if ev.time < T::zero() || ev.time > self.duration {
                return Err(Error::field(
                    "scenario.policy_schedule",
                    format!("event time {} outside [0, {}]", ev.time, self.duration),
                ));
            }
            if last.is_some_and(|l| ev.time <= l) {
                return Err(Error::field("scenario.policy_schedule", "event times must be strictly increasing"));
            }
            last = Some(ev.time);
        }
        let value = match self.reference {
            Reference::Power(p) => p,
            Reference::CurrentAmplitude(i) => i,
        };
        if !value.is_finite() {
            return Err(Error::field("scenario.power", "must be finite"));
        }
        for (name, v) in [
            ("control.energy_gain", self.outer.energy_gain),
            ("control.dc_kp", self.outer.dc_kp),
            ("control.dc_ki", self.outer.dc_ki),
            ("metrics.settle", self.settle),
        ] {
            if !(v.is_finite() && v >= T::zero()) {
                return Err(Error::field(name, "must be finite and >= 0"));
            }
        }
        if !(self.segment.is_finite() && self.segment > T::zero()) {
            return Err(Error::field("metrics.segment", "must be > 0"));
        }
        if self.record_every == 0 {
            return Err(Error::field("output.decimation", "must be at least 1"));
        }
        Ok(())
    }

    /// Policy active at `t`: the last event with `time <= t`.
    pub fn policy_at(&self, t: T) -> SortPolicy {
        self.events
            .iter()
            .take_while(|ev| ev.time <= t)
            .last()
            .map_or(self.initial_policy, |ev| ev.policy)
    }
}

impl Scenario<f64> {
    /// Benchmark schedule: V1-F2, F1-V2 from 1.2 s, back to V1-F2 at 1.4 s.
    pub fn table1() -> Self {
        Scenario {
            duration: 3.0,
            initial_policy: SortPolicy::V1F2,
            events: vec![
                PolicyEvent { time: 1.2, policy: SortPolicy::F1V2 },
                PolicyEvent { time: 1.4, policy: SortPolicy::V1F2 },
            ],
            reference: Reference::Power(13.18e6),
            mode: Mode::BackToBack,
            outer: OuterLoop::default_gains(),
            settle: 0.2,
            segment: 0.1,
            record_every: 40,
        }
    }

    /// Single converter on a stiff bus running one policy throughout.
    pub fn ideal_dc(policy: SortPolicy, duration: f64) -> Self {
        Scenario {
            duration,
            initial_policy: policy,
            events: Vec::new(),
            mode: Mode::IdealDc,
            ..Scenario::table1()
        }
    }
}

/// Plant-side description shared by every converter in a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSystem<T> {
    pub params: ConverterParams<T>,
    pub grid: GridSource<T>,
    pub dc_link: DcLink<T>,
}

impl<T: Scalar> TestSystem<T> {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.grid.validate()?;
        self.dc_link.validate()
    }
}

impl TestSystem<f64> {
    pub fn table1() -> Self {
        let params = ConverterParams::table1();
        TestSystem {
            params,
            grid: GridSource {
                amplitude: 24.5e3,
                frequency: 60.0,
                phase_offset: 0.0,
            },
            dc_link: DcLink {
                length_km: 5.0,
                c_per_km: 16e-6,
                l_per_km: 50e-6,
                v_near: params.v_dc,
                v_far: params.v_dc,
                i_link: 0.0,
            },
        }
    }
}

/// The benchmark system and schedule.
pub fn build_table1_system() -> (ConverterParams<f64>, GridSource<f64>, DcLink<f64>, Scenario<f64>) {
    let sys = TestSystem::table1();
    (sys.params, sys.grid, sys.dc_link, Scenario::table1())
}

/// Unity power factor phase currents for `setpoint_power`: peak `2P / (3 V_peak)`.
pub fn reference_current<T: Scalar>(setpoint_power: T, grid: &GridSource<T>, t: T) -> Result<[T; 3]> {
    if !(grid.amplitude > T::zero()) {
        return Err(Error::Config("grid amplitude must be > 0 to derive a reference current".into()));
    }
    let peak = T::lit(2.0) * setpoint_power / (T::lit(3.0) * grid.amplitude);
    Ok([0, 1, 2].map(|p| peak * grid.angle(p, t).sin()))
}

fn power_of<T: Scalar>(reference: Reference<T>, grid: &GridSource<T>) -> T {
    match reference {
        Reference::Power(p) => p,
        Reference::CurrentAmplitude(i) => T::lit(1.5) * grid.amplitude * i,
    }
}

struct StepOutput<T> {
    next: PhaseState<T>,
    i_ref: T,
    i_z_ref: T,
}

/// Runs the scenario at the sampling period, streaming rows to `sink`.
pub fn run_scenario<T: Scalar>(
    system: &TestSystem<T>,
    scenario: &Scenario<T>,
    sink: &mut dyn TimeSeriesSink,
) -> Result<SummaryMetrics> {
    system.validate()?;
    scenario.validate()?;
    let params = &system.params;
    let grid = &system.grid;
    let t_s = params.t_s;
    let v_dc_nom = params.v_dc;
    let n_steps = (scenario.duration / t_s).round().to_usize().unwrap_or(0);
    let n_stations = match scenario.mode {
        Mode::IdealDc => 1,
        Mode::BackToBack => 2,
    };

    let mut stations: Vec<Vec<PhaseState<T>>> = (0..n_stations)
        .map(|_| (0..3).map(|p| PhaseState::nominal(params, grid.voltage(p, T::zero()))).collect())
        .collect();
    let mut link = system.dc_link;
    link.v_near = v_dc_nom;
    link.v_far = v_dc_nom;
    link.i_link = T::zero();
    let mut dc_integral = T::zero();

    let mut collector = MetricsCollector::new(
        params.nominal_cap_voltage().to_f64_lossless(),
        // End at the last row's timestamp so a re-read CSV sees the same window.
        Window::new(
            scenario.settle.to_f64_lossless(),
            (T::from_count(n_steps) * t_s).to_f64_lossless(),
        ),
        scenario.segment.to_f64_lossless(),
    )?;

    let p1 = power_of(scenario.reference, grid);
    let three = T::lit(3.0);
    let energy_ref = T::lit(2.0) * v_dc_nom;
    let mut next_event = 0usize;
    let mut policy = scenario.initial_policy;

    for step in 0..n_steps {
        let t = T::from_count(step) * t_s;
        let t_next = T::from_count(step + 1) * t_s;
        while next_event < scenario.events.len() && t >= scenario.events[next_event].time {
            policy = scenario.events[next_event].policy;
            next_event += 1;
        }

        let v_meas = match scenario.mode {
            Mode::IdealDc => [v_dc_nom, v_dc_nom],
            Mode::BackToBack => [link.v_near, link.v_far],
        };
        let mut p_ref = [p1, -p1];
        if scenario.mode == Mode::BackToBack {
            let err = v_dc_nom - link.v_far;
            dc_integral = dc_integral + err * t_s;
            p_ref[1] = -p1 - (scenario.outer.dc_kp * err + scenario.outer.dc_ki * dc_integral);
        }

        let mut outputs: Vec<Vec<StepOutput<T>>> = Vec::with_capacity(n_stations);
        let mut draws = [T::zero(); 2];
        for (s, phases) in stations.iter_mut().enumerate() {
            let i_refs = reference_current(p_ref[s], grid, t_next)?;
            let mut station_out = Vec::with_capacity(3);
            for (p, phase) in phases.iter_mut().enumerate() {
                phase.v_dc = v_meas[s];
                let i_z_ref = p_ref[s] / (three * v_meas[s])
                    + scenario.outer.energy_gain * (energy_ref - phase.total_cap_voltage());
                let decision = control_step(phase, i_refs[p], i_z_ref, policy, params)?;
                let next = advance_phase(phase, &decision, grid.voltage(p, t_next), params)?;
                if !next.is_finite() {
                    return Err(Error::Divergence {
                        step,
                        detail: format!("converter {} phase {} left the finite range", s + 1, p),
                    });
                }
                draws[s] = draws[s] + next.i_z;
                station_out.push(StepOutput { next, i_ref: i_refs[p], i_z_ref });
            }
            outputs.push(station_out);
        }

        let (v_link_row, i_link_row) = match scenario.mode {
            Mode::IdealDc => (v_dc_nom, draws[0]),
            Mode::BackToBack => {
                link.step(draws[0], draws[1], t_s);
                if !(link.v_near.is_finite() && link.v_far.is_finite() && link.i_link.is_finite()) {
                    return Err(Error::Divergence { step, detail: "DC link state left the finite range".into() });
                }
                (link.v_near, link.i_link)
            }
        };

        let record = (step + 1) % scenario.record_every == 0;
        for (s, station_out) in outputs.into_iter().enumerate() {
            for (p, out) in station_out.into_iter().enumerate() {
                let next = &out.next;
                let row = Row {
                    t: t_next.to_f64_lossless(),
                    phase: PhaseLabel::new(s as u8 + 1, p as u8),
                    i: next.i.to_f64_lossless(),
                    i_ref: out.i_ref.to_f64_lossless(),
                    i_z: (next.i_z - out.i_z_ref).to_f64_lossless(),
                    v_up: next.upper.inserted_voltage().to_f64_lossless(),
                    v_low: next.lower.inserted_voltage().to_f64_lossless(),
                    v_c: next.upper.voltages().chain(next.lower.voltages()).map(|v| v.to_f64_lossless()).collect(),
                    u: next.upper.statuses().chain(next.lower.statuses()).collect(),
                    v_dc_link: v_link_row.to_f64_lossless(),
                    i_dc_link: i_link_row.to_f64_lossless(),
                    policy,
                };
                collector.observe(&row);
                if record {
                    sink.write_row(&row)?;
                }
                stations[s][p] = out.next;
            }
        }
    }
    sink.finish()?;
    Ok(collector.finish())
}
