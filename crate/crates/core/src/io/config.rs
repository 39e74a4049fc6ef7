//! Run configuration: TOML with one table per concern.
//!
//! ```toml
//! [converter]
//! n_sm = 6
//! [grid]
//! amplitude = 24.5e3
//! [scenario]
//! mode = "ideal-dc"
//! policy_schedule = [[1.2, "F1V2"], [1.4, "V1F2"]]
//! [output]
//! decimation = 40
//! ```
//!
//! Every key is optional; missing keys take the benchmark defaults and each
//! fallback is logged at info level. Unknown keys are rejected.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::controller::SortPolicy;
use crate::error::{Error, Result};
use crate::model::ConverterParams;
use crate::testbench::{DcLink, GridSource, OuterLoop, PolicyEvent, Reference, Scenario, TestSystem};

pub const DEFAULT_OUTPUT_DIR: &str = "out";

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: TestSystem<f64>,
    pub scenario: Scenario<f64>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            system: TestSystem::table1(),
            scenario: Scenario::table1(),
            output_dir: PathBuf::from(DEFAULT_OUTPUT_DIR),
        }
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    converter: Option<RawConverter>,
    grid: Option<RawGrid>,
    dc_link: Option<RawDcLink>,
    scenario: Option<RawScenario>,
    control: Option<RawControl>,
    metrics: Option<RawMetrics>,
    output: Option<RawOutput>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConverter {
    n_sm: Option<i64>,
    r: Option<f64>,
    l: Option<f64>,
    l_arm: Option<f64>,
    c_sm: Option<f64>,
    v_dc: Option<f64>,
    t_s: Option<f64>,
    w: Option<f64>,
    w_z: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    amplitude: Option<f64>,
    frequency: Option<f64>,
    phase_offset: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDcLink {
    length_km: Option<f64>,
    c_per_km: Option<f64>,
    l_per_km: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    mode: Option<String>,
    duration: Option<f64>,
    initial_policy: Option<String>,
    policy_schedule: Option<Vec<(f64, String)>>,
    power: Option<f64>,
    current_amplitude: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawControl {
    energy_gain: Option<f64>,
    dc_kp: Option<f64>,
    dc_ki: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMetrics {
    settle: Option<f64>,
    segment: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
    decimation: Option<i64>,
}

fn or_default<T: std::fmt::Debug>(value: Option<T>, key: &str, default: T) -> T {
    match value {
        Some(v) => v,
        None => {
            log::info!("{key} not set; using benchmark default {default:?}");
            default
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    let defaults = RunConfig::default();
    let dp = defaults.system.params;
    let dg = defaults.system.grid;
    let dl = defaults.system.dc_link;
    let ds = &defaults.scenario;

    let c = raw.converter.unwrap_or_default();
    let n_sm = or_default(c.n_sm, "converter.n_sm", dp.n_sm as i64);
    if n_sm < 1 {
        return Err(Error::field("n_sm", format!("must be at least 1, got {n_sm}")));
    }
    let params = ConverterParams {
        n_sm: n_sm as usize,
        r: or_default(c.r, "converter.r", dp.r),
        l: or_default(c.l, "converter.l", dp.l),
        l_arm: or_default(c.l_arm, "converter.l_arm", dp.l_arm),
        c_sm: or_default(c.c_sm, "converter.c_sm", dp.c_sm),
        v_dc: or_default(c.v_dc, "converter.v_dc", dp.v_dc),
        t_s: or_default(c.t_s, "converter.t_s", dp.t_s),
        w: or_default(c.w, "converter.w", dp.w),
        w_z: or_default(c.w_z, "converter.w_z", dp.w_z),
    };

    let g = raw.grid.unwrap_or_default();
    let grid = GridSource {
        amplitude: or_default(g.amplitude, "grid.amplitude", dg.amplitude),
        frequency: or_default(g.frequency, "grid.frequency", dg.frequency),
        phase_offset: or_default(g.phase_offset, "grid.phase_offset", dg.phase_offset),
    };

    let l = raw.dc_link.unwrap_or_default();
    let dc_link = DcLink {
        length_km: or_default(l.length_km, "dc_link.length_km", dl.length_km),
        c_per_km: or_default(l.c_per_km, "dc_link.c_per_km", dl.c_per_km),
        l_per_km: or_default(l.l_per_km, "dc_link.l_per_km", dl.l_per_km),
        v_near: params.v_dc,
        v_far: params.v_dc,
        i_link: 0.0,
    };

    let s = raw.scenario.unwrap_or_default();
    let mode = match s.mode {
        Some(m) => m.parse()?,
        None => or_default(None, "scenario.mode", ds.mode),
    };
    let initial_policy = match s.initial_policy {
        Some(p) => p.parse::<SortPolicy>().map_err(|_| Error::field("scenario.initial_policy", format!("unknown policy `{p}`")))?,
        None => or_default(None, "scenario.initial_policy", ds.initial_policy),
    };
    let events = match s.policy_schedule {
        Some(list) => list
            .into_iter()
            .map(|(time, p)| {
                let policy = p
                    .parse::<SortPolicy>()
                    .map_err(|_| Error::field("scenario.policy_schedule", format!("unknown policy `{p}`")))?;
                Ok(PolicyEvent { time, policy })
            })
            .collect::<Result<Vec<_>>>()?,
        None => or_default(None, "scenario.policy_schedule", ds.events.clone()),
    };
    let reference = match (s.power, s.current_amplitude) {
        (Some(_), Some(_)) => {
            return Err(Error::field("scenario.current_amplitude", "give either power or current_amplitude, not both"))
        }
        (Some(p), None) => Reference::Power(p),
        (None, Some(i)) => Reference::CurrentAmplitude(i),
        (None, None) => or_default(None, "scenario.power", ds.reference),
    };

    let k = raw.control.unwrap_or_default();
    let outer = OuterLoop {
        energy_gain: or_default(k.energy_gain, "control.energy_gain", ds.outer.energy_gain),
        dc_kp: or_default(k.dc_kp, "control.dc_kp", ds.outer.dc_kp),
        dc_ki: or_default(k.dc_ki, "control.dc_ki", ds.outer.dc_ki),
    };

    let m = raw.metrics.unwrap_or_default();
    let o = raw.output.unwrap_or_default();
    let decimation = or_default(o.decimation, "output.decimation", ds.record_every as i64);
    if decimation < 1 {
        return Err(Error::field("output.decimation", format!("must be at least 1, got {decimation}")));
    }

    let scenario = Scenario {
        duration: or_default(s.duration, "scenario.duration", ds.duration),
        initial_policy,
        events,
        reference,
        mode,
        outer,
        settle: or_default(m.settle, "metrics.settle", ds.settle),
        segment: or_default(m.segment, "metrics.segment", ds.segment),
        record_every: decimation as usize,
    };
    let output_dir = PathBuf::from(or_default(o.dir, "output.dir", DEFAULT_OUTPUT_DIR.to_string()));

    let config = RunConfig {
        system: TestSystem { params, grid, dc_link },
        scenario,
        output_dir,
    };
    config.system.validate()?;
    config.scenario.validate()?;
    Ok(config)
}

impl RunConfig {
    fn to_raw(&self) -> RawConfig {
        let p = &self.system.params;
        let g = &self.system.grid;
        let l = &self.system.dc_link;
        let s = &self.scenario;
        let (power, current_amplitude) = match s.reference {
            Reference::Power(p) => (Some(p), None),
            Reference::CurrentAmplitude(i) => (None, Some(i)),
        };
        RawConfig {
            converter: Some(RawConverter {
                n_sm: Some(p.n_sm as i64),
                r: Some(p.r),
                l: Some(p.l),
                l_arm: Some(p.l_arm),
                c_sm: Some(p.c_sm),
                v_dc: Some(p.v_dc),
                t_s: Some(p.t_s),
                w: Some(p.w),
                w_z: Some(p.w_z),
            }),
            grid: Some(RawGrid {
                amplitude: Some(g.amplitude),
                frequency: Some(g.frequency),
                phase_offset: Some(g.phase_offset),
            }),
            dc_link: Some(RawDcLink {
                length_km: Some(l.length_km),
                c_per_km: Some(l.c_per_km),
                l_per_km: Some(l.l_per_km),
            }),
            scenario: Some(RawScenario {
                mode: Some(s.mode.as_str().to_string()),
                duration: Some(s.duration),
                initial_policy: Some(s.initial_policy.to_string()),
                policy_schedule: Some(s.events.iter().map(|e| (e.time, e.policy.to_string())).collect()),
                power,
                current_amplitude,
            }),
            control: Some(RawControl {
                energy_gain: Some(s.outer.energy_gain),
                dc_kp: Some(s.outer.dc_kp),
                dc_ki: Some(s.outer.dc_ki),
            }),
            metrics: Some(RawMetrics {
                settle: Some(s.settle),
                segment: Some(s.segment),
            }),
            output: Some(RawOutput {
                dir: Some(self.output_dir.to_string_lossy().into_owned()),
                decimation: Some(s.record_every as i64),
            }),
        }
    }

    /// Serializes every field explicitly; parsing the result yields `self`.
    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_raw()).expect("config serializes to TOML")
    }

    /// Lines on which two configs differ, ignoring the policy schedule and
    /// output location.
    pub fn differences_outside_schedule(&self, other: &RunConfig) -> Vec<String> {
        let normalized = |c: &RunConfig| {
            let mut c = c.clone();
            c.scenario.initial_policy = SortPolicy::V1F2;
            c.scenario.events.clear();
            c.output_dir = PathBuf::new();
            c.to_toml()
        };
        let (a, b) = (normalized(self), normalized(other));
        let mut diffs = Vec::new();
        let mut section = String::new();
        for (la, lb) in a.lines().zip(b.lines()) {
            if la.starts_with('[') {
                section = la.to_string();
            }
            if la != lb {
                diffs.push(format!("{section} - {la}\n{section} + {lb}"));
            }
        }
        if a.lines().count() != b.lines().count() {
            diffs.push("(configs have different key sets)".to_string());
        }
        diffs
    }
}
