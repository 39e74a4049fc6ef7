//! Discrete-time modular multilevel converter (MMC) model with a
//! sorting-based model predictive switching controller.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to one precision for the common cases.

pub mod controller;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod scalar;
pub mod testbench;

pub use controller::{
    compute_targets, control_step, count_objective, cumulative_sums, objective_f, select_submodules, sort_arm,
    SortPolicy, SortedArm, SwitchDecision, TargetVoltages,
};
pub use error::{Error, Result};
pub use metrics::{
    circulating_ratio, effective_switching_frequency, ripple_percent, summarize_rows, tracking_rmse,
    MetricsCollector, PhaseMetrics, Sample, SummaryMetrics, SwitchTrace, Window, WindowMetrics,
};
pub use model::{
    advance_phase, arm_voltage, decompose_arm_currents, predict_capacitor_voltage, step_ac_current,
    step_circulating_current, ArmSide, ArmState, ConverterParams, PhaseState, SubmoduleState,
};
pub use scalar::{approx_eq_rel, Scalar};
pub use testbench::{
    build_table1_system, reference_current, run_scenario, DcLink, GridSource, Mode, OuterLoop, PolicyEvent,
    Reference, Scenario, TestSystem,
};

pub type Params64 = ConverterParams<f64>;
pub type Params32 = ConverterParams<f32>;
pub type PhaseState64 = PhaseState<f64>;
pub type PhaseState32 = PhaseState<f32>;
pub type ArmState64 = ArmState<f64>;
pub type ArmState32 = ArmState<f32>;
pub type Scenario64 = Scenario<f64>;
pub type TestSystem64 = TestSystem<f64>;
