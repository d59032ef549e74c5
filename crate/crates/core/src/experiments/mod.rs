//! Scenario harness: resonator + 2LAL load + drive, sustain verdicts,
//! drive-resistor sweeps and the adiabatic scaling study.

mod sweep;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, NodeId};
use crate::engine::{energy_audit, simulate, EngineError, EnergyReport, SimConfig, Trace};
use crate::logic::{
    self, build_eight_phase_generator, build_shift_register, peak_to_peak, ClockTiming, EightPhase,
    GateParams, LogicError, ShiftRegister,
};
use crate::resonator::{
    self, array_node, attach_drive, build_array, build_quad, eigenmodes, find_quadrature_mode,
    mode_energies, quadrature_ic, ArraySpec, DriveScheme, QuadSpec, ResonatorError,
};

pub use sweep::{
    adiabatic_scaling_study, drive_scheme_comparison, sweep_drive_resistor, table_csv, table_json,
    DriveComparison, ScalingRow, SweepResult, TableRow,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Resonator(#[from] ResonatorError),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Plan(#[from] crate::planner::PlanError),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

impl ExperimentError {
    /// True for failures of the numerical machinery rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            ExperimentError::Engine(EngineError::Singular { .. } | EngineError::NonConvergence { .. })
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResonatorSpec {
    Quad(QuadSpec),
    Array(ArraySpec),
}

impl ResonatorSpec {
    pub fn amplitude(&self) -> f64 {
        match self {
            ResonatorSpec::Quad(q) => q.amplitude,
            ResonatorSpec::Array(a) => a.amplitude,
        }
    }

    pub fn build(&self) -> Result<Circuit, ResonatorError> {
        match self {
            ResonatorSpec::Quad(q) => build_quad(q),
            ResonatorSpec::Array(a) => build_array(a),
        }
    }

    /// Nodes the logic clocks attach to, one per phase class.
    pub fn clock_nodes(&self) -> [NodeId; 4] {
        match self {
            ResonatorSpec::Quad(_) => logic::quad_clock_nodes(),
            ResonatorSpec::Array(_) => {
                let at = [(0, 0), (0, 1), (1, 1), (1, 0)];
                std::array::from_fn(|k| NodeId::new(array_node(at[k].0, at[k].1)))
            }
        }
    }

    /// Per-node load capacitance of the bare resonator (mean for quads).
    pub fn node_load(&self) -> f64 {
        match self {
            ResonatorSpec::Quad(q) => q.phase_loads.iter().sum::<f64>() / 4.0,
            ResonatorSpec::Array(a) => a.load_per_node,
        }
    }

    pub fn with_inductance(&self, l: f64) -> Self {
        let mut s = self.clone();
        match &mut s {
            ResonatorSpec::Quad(q) => q.inductance = l,
            ResonatorSpec::Array(a) => a.inductance = l,
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogicLoad {
    /// Shift-register stage count; 0 for none.
    pub shift_stages: usize,
    pub eight_phase: bool,
    pub gate: GateParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    pub scheme: DriveScheme,
    pub amplitude: f64,
    pub r_drive: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    Quadrature,
    Rest,
}

/// Thresholds of the sustain verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SustainRule {
    /// Minimum final envelope as a fraction of nominal amplitude.
    pub amplitude_fraction: f64,
    /// Trailing fraction of the run the final envelope is averaged over.
    pub final_window_fraction: f64,
    /// Periods at the end of the run examined for DC outputs.
    pub dc_periods: f64,
    /// Output peak-to-peak below this fraction of the nominal `2A` is DC.
    pub dc_fraction: f64,
}

impl Default for SustainRule {
    fn default() -> Self {
        SustainRule {
            amplitude_fraction: 0.7,
            final_window_fraction: 0.1,
            dc_periods: 4.0,
            dc_fraction: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub resonator: ResonatorSpec,
    pub logic: LogicLoad,
    pub drive: Option<DriveSpec>,
    /// Clock (and drive) frequency in hertz.
    pub frequency: f64,
    pub cycles: usize,
    pub steps_per_cycle: usize,
    pub initial: InitialState,
    #[serde(default)]
    pub rule: SustainRule,
}

impl Scenario {
    /// Frozen reference scenario: a quad loaded by an 8-stage shift
    /// register and the eight-phase generator, four-phase drive at 100 MHz.
    pub fn reference(r_drive: f64) -> Self {
        Scenario {
            name: "reference".into(),
            resonator: ResonatorSpec::Quad(QuadSpec::symmetric(REF_INDUCTANCE, REF_NODE_LOAD, 1.0)),
            logic: LogicLoad {
                shift_stages: 8,
                eight_phase: true,
                gate: reference_gate(),
            },
            drive: Some(DriveSpec {
                scheme: DriveScheme::FourPhase,
                amplitude: 1.0,
                r_drive,
            }),
            frequency: REF_FREQUENCY,
            cycles: 120,
            steps_per_cycle: 200,
            initial: InitialState::Quadrature,
            rule: SustainRule::default(),
        }
    }

    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }

    pub fn amplitude(&self) -> f64 {
        self.resonator.amplitude()
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::InvalidScenario(m.into()));
        if !(self.frequency.is_finite() && self.frequency > 0.0) {
            return bad("frequency must be > 0");
        }
        if self.cycles == 0 || self.steps_per_cycle < 8 {
            return bad("need cycles >= 1 and steps_per_cycle >= 8");
        }
        if !(self.amplitude() > 0.0) {
            return bad("amplitude must be > 0");
        }
        if self.logic.shift_stages > 0 || self.logic.eight_phase {
            self.logic.gate.validate()?;
        }
        Ok(())
    }
}

pub const REF_FREQUENCY: f64 = 100e6;
pub const REF_NODE_LOAD: f64 = 10e-12;
pub const REF_INDUCTANCE: f64 = 0.48e-6;

/// Gate parameters of the reference scenario, scaled up so the logic
/// load is a visible fraction of the resonator's energy per cycle.
pub fn reference_gate() -> GateParams {
    GateParams {
        r_on: 1200.0,
        r_off: 1e16,
        v_threshold: 0.49,
        c_gate: 30e-15,
        c_wire: 80e-15,
    }
}

/// A scenario expanded into circuits.
#[derive(Clone, Debug)]
pub struct BuiltScenario {
    pub circuit: Circuit,
    /// Bare resonator (with initial state) used for modal analysis.
    pub resonator: Circuit,
    pub clock_nodes: [NodeId; 4],
    pub shift_register: Option<ShiftRegister>,
    pub eight_phase: Option<EightPhase>,
    pub warnings: Vec<String>,
}

impl BuiltScenario {
    pub fn logic_prefixes(&self) -> Vec<&str> {
        self.shift_register
            .iter()
            .map(|s| s.prefix.as_str())
            .chain(self.eight_phase.iter().map(|e| e.prefix.as_str()))
            .collect()
    }
}

/// Alternating token pattern fed to scenario shift registers.
pub fn scenario_pattern(tokens: usize) -> Vec<bool> {
    (0..tokens).map(|k| k % 2 == 0).collect()
}

pub fn build_scenario(s: &Scenario) -> Result<BuiltScenario, ExperimentError> {
    s.validate()?;
    let mut warnings = Vec::new();
    let bare = s.resonator.build()?;
    let resonator = match s.initial {
        InitialState::Quadrature => quadrature_ic(&bare, s.amplitude())?,
        InitialState::Rest => bare,
    };
    if let Ok(m) = find_quadrature_mode(&resonator) {
        let f_q = m.omega / (2.0 * std::f64::consts::PI);
        if (s.frequency / f_q - 1.0).abs() > 0.1 {
            warnings.push(format!(
                "frequency {:.4e} Hz differs from quadrature eigenfrequency {:.4e} Hz by more than 10%",
                s.frequency, f_q
            ));
        }
    }
    let clock_nodes = s.resonator.clock_nodes();
    let timing = ClockTiming {
        amplitude: s.amplitude(),
        frequency: s.frequency,
        t_end: s.cycles as f64 * s.period(),
    };
    let mut circuit = match &s.drive {
        Some(d) => attach_drive(&resonator, d.scheme, d.amplitude, s.frequency, d.r_drive)?,
        None => resonator.clone(),
    };
    let shift_register = if s.logic.shift_stages > 0 {
        let sr = build_shift_register(
            "sr",
            s.logic.shift_stages,
            &s.logic.gate,
            &clock_nodes,
            &scenario_pattern(s.cycles + 2),
            &timing,
        )?;
        circuit.merge(&sr.circuit);
        Some(sr)
    } else {
        None
    };
    let eight_phase = if s.logic.eight_phase {
        let ep = build_eight_phase_generator("ep", &s.logic.gate, &clock_nodes, &timing)?;
        circuit.merge(&ep.circuit);
        Some(ep)
    } else {
        None
    };
    Ok(BuiltScenario {
        circuit,
        resonator,
        clock_nodes,
        shift_register,
        eight_phase,
        warnings,
    })
}

/// Modal bookkeeping of a run on the bare resonator's LC skeleton.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    /// Total modal energy sampled at the start of every cycle.
    pub energy_per_cycle: Vec<f64>,
    /// Share of modal energy in the quadrature cluster, averaged over the
    /// final ten cycles; `None` without a quadrature mode.
    pub quadrature_fraction_final: Option<f64>,
    /// Final over initial total modal energy.
    pub final_energy_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SustainVerdict {
    pub sustained: bool,
    pub final_amplitude_fraction: f64,
    pub time_of_collapse: Option<f64>,
    /// `Some(true)` when every eight-phase output is still switching.
    pub outputs_alive: Option<bool>,
    /// Mean cycle-peak amplitude over the clock nodes, one entry per cycle.
    pub envelope: Vec<f64>,
    pub modes: ModeSummary,
}

#[derive(Clone, Debug)]
pub struct SustainOutcome {
    pub verdict: SustainVerdict,
    pub trace: Trace,
    pub energy: EnergyReport,
    pub built: BuiltScenario,
}

pub fn simulate_scenario(s: &Scenario) -> Result<(BuiltScenario, Trace), ExperimentError> {
    let built = build_scenario(s)?;
    let dt = s.period() / s.steps_per_cycle as f64;
    let cfg = SimConfig::new(dt, s.cycles as f64 * s.period());
    let tr = simulate(&built.circuit, &cfg)?;
    Ok((built, tr))
}

/// Cycle-peak envelope: for each full cycle, the mean over clock nodes of
/// half the peak-to-peak swing within that cycle (insensitive to charge
/// parked in the ring's DC mode).
pub fn envelope(tr: &Trace, nodes: &[NodeId; 4], period: f64, cycles: usize) -> Vec<f64> {
    (0..cycles)
        .map(|k| {
            let (t0, t1) = (k as f64 * period, (k + 1) as f64 * period);
            nodes
                .iter()
                .map(|n| peak_to_peak(tr, n.as_str(), t0, t1).unwrap_or(0.0) / 2.0)
                .sum::<f64>()
                / 4.0
        })
        .collect()
}

pub fn run_sustain_check(s: &Scenario) -> Result<SustainOutcome, ExperimentError> {
    let (built, tr) = simulate_scenario(s)?;
    let period = s.period();
    let amp = s.amplitude();
    let rule = &s.rule;
    let env = envelope(&tr, &built.clock_nodes, period, s.cycles);

    let window = ((s.cycles as f64 * rule.final_window_fraction).ceil() as usize).clamp(1, s.cycles);
    let tail = &env[env.len() - window..];
    let final_fraction = tail.iter().sum::<f64>() / window as f64 / amp;

    let t_end = s.cycles as f64 * period;
    let t_dc = t_end - rule.dc_periods * period;
    let outputs_alive = built.eight_phase.as_ref().map(|ep| {
        ep.outputs.iter().all(|n| {
            peak_to_peak(&tr, n.as_str(), t_dc, t_end).unwrap_or(0.0) >= rule.dc_fraction * 2.0 * amp
        })
    });
    let sustained = final_fraction >= rule.amplitude_fraction && outputs_alive != Some(false);

    let time_of_collapse = if sustained {
        None
    } else {
        let below = |e: &f64| *e < rule.amplitude_fraction * amp;
        let amp_collapse = env
            .iter()
            .rposition(|e| !below(e))
            .map_or(Some(0), |k| (k + 1 < env.len()).then_some(k + 1))
            .map(|k| k as f64 * period);
        let dc_collapse = built
            .eight_phase
            .as_ref()
            .and_then(|ep| output_death_time(&tr, ep, period, s.cycles, rule.dc_fraction * 2.0 * amp));
        match (amp_collapse, dc_collapse) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    };

    let modes = mode_summary(&built.resonator, &tr, period, s.cycles)?;
    let energy = energy_audit(&built.circuit, &tr).map_err(|e| {
        ExperimentError::InvalidScenario(format!("energy audit failed: {e}"))
    })?;
    Ok(SustainOutcome {
        verdict: SustainVerdict {
            sustained,
            final_amplitude_fraction: final_fraction,
            time_of_collapse,
            outputs_alive,
            envelope: env,
            modes,
        },
        trace: tr,
        energy,
        built,
    })
}

/// Start of the first cycle after which some eight-phase output never
/// again swings by `threshold` within a cycle.
fn output_death_time(tr: &Trace, ep: &EightPhase, period: f64, cycles: usize, threshold: f64) -> Option<f64> {
    ep.outputs
        .iter()
        .filter_map(|n| {
            // Outputs have period 2T, so judge swing over two-cycle windows.
            let alive: Vec<bool> = (0..cycles.saturating_sub(1))
                .map(|k| {
                    peak_to_peak(tr, n.as_str(), k as f64 * period, (k + 2) as f64 * period)
                        .unwrap_or(0.0)
                        >= threshold
                })
                .collect();
            let last_alive = alive.iter().rposition(|&a| a);
            match last_alive {
                Some(k) if k + 1 < alive.len() => Some((k + 1) as f64 * period),
                Some(_) => None,
                None => Some(0.0),
            }
        })
        .min_by(f64::total_cmp)
}

fn mode_summary(resonator: &Circuit, tr: &Trace, period: f64, cycles: usize) -> Result<ModeSummary, ExperimentError> {
    let skel = resonator.lc_skeleton();
    let modes = eigenmodes(&skel)?;
    let me = mode_energies(&skel, tr, &modes)?;
    let total = me.total();
    let sample_at = |t: f64| tr.times.partition_point(|&x| x < t - 1e-6 * period).min(tr.len() - 1);
    let energy_per_cycle: Vec<f64> = (0..=cycles).map(|k| total[sample_at(k as f64 * period)]).collect();
    let quad = resonator::find_quadrature_mode(resonator)
        .ok()
        .filter(|m| m.residual_deg <= resonator::QUADRATURE_TOLERANCE_DEG);
    let quadrature_fraction_final = quad.map(|m| {
        let t_end = cycles as f64 * period;
        let w = tr.window((t_end - 10.0 * period).max(0.0), t_end);
        let (mut q, mut all) = (0.0, 0.0);
        for s in w {
            q += m.modes.iter().map(|&k| me.energies[k][s]).sum::<f64>();
            all += total[s];
        }
        if all > 0.0 {
            q / all
        } else {
            0.0
        }
    });
    let first = total[0];
    Ok(ModeSummary {
        final_energy_fraction: if first > 0.0 { total[total.len() - 1] / first } else { 0.0 },
        energy_per_cycle,
        quadrature_fraction_final,
    })
}
