//! Switch-level 2LAL (two-level adiabatic logic) gates: dual-rail buffers,
//! shift registers and the eight-phase clock generator.
//!
//! Every stage `s` is powered by clock phase `s mod 4`. Each of its two
//! rails connects to that clock through a forward transmission gate,
//! enabled by the same rail of stage `s − 1`, and a backward transmission
//! gate enabled by the same rail of stage `s + 1`. An asserted rail
//! therefore rises with its clock, holds the plateau `√(A² − vth²)` while
//! neither gate conducts, and returns with the clock; an idle rail rests
//! at `−√(A² − vth²)`.

mod clocks;
mod decode;
mod measure;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, Element, NodeId, Polarity, SwitchModel};

pub use clocks::{
    clock_phase, clock_sources, clock_value, ideal_rail, ideal_rail_pwl, rail_plateau, token_at,
    ClockShape,
};
pub use decode::{decode_dual_rail, tick_sample_times, Bit};
pub use measure::{
    charge_per_phase, crosscorr_lag, dissipation_per_cycle, mean_crossing_period, peak_to_peak,
    DissipationReport,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LogicError {
    #[error("invalid gate parameters: {0}")]
    InvalidParams(String),
    #[error("shift register needs at least one stage")]
    NoStages,
    #[error("sample time {0:e} s lies outside the trace")]
    ScheduleOutsideTrace(f64),
    #[error("run not sustained: {0}")]
    NotSustained(String),
    #[error("trace does not match circuit: {0}")]
    Mismatch(String),
}

/// Switch-level device parameters shared by every transistor of a fragment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub r_on: f64,
    pub r_off: f64,
    pub v_threshold: f64,
    pub c_gate: f64,
    pub c_wire: f64,
}

impl Default for GateParams {
    fn default() -> Self {
        GateParams {
            r_on: 10e3,
            r_off: 1e16,
            v_threshold: 0.3,
            c_gate: 1e-15,
            c_wire: 1e-15,
        }
    }
}

impl GateParams {
    pub fn validate(&self) -> Result<(), LogicError> {
        let bad = |m: String| Err(LogicError::InvalidParams(m));
        if !(self.r_on > 0.0 && self.r_on < self.r_off) {
            return bad(format!("need 0 < r_on < r_off, got {} / {}", self.r_on, self.r_off));
        }
        if !(self.c_gate >= 0.0 && self.c_wire >= 0.0) {
            return bad("capacitances must be >= 0".into());
        }
        if self.rail_capacitance() <= 0.0 {
            return bad("rail capacitance 4*c_gate + c_wire must be > 0".into());
        }
        if !(self.v_threshold > 0.0 && self.v_threshold.is_finite()) {
            return bad(format!("v_threshold must be > 0, got {}", self.v_threshold));
        }
        Ok(())
    }

    /// Capacitance of one rail: the four transistor gates it drives (two
    /// transmission gates) plus its interconnect.
    pub fn rail_capacitance(&self) -> f64 {
        4.0 * self.c_gate + self.c_wire
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DualRail {
    pub true_rail: NodeId,
    pub false_rail: NodeId,
}

impl DualRail {
    fn rail(&self, r: Rail) -> &NodeId {
        match r {
            Rail::True => &self.true_rail,
            Rail::False => &self.false_rail,
        }
    }
}

/// Per-phase capacitive load of a fragment.
///
/// Exactly one rail of each stage switches per cycle, so a stage presents
/// one rail capacitance to its clock.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageMap {
    pub phase_loads: [f64; 4],
    pub stage_phases: Vec<usize>,
    pub stage_capacitance: f64,
}

impl StageMap {
    fn new(stages: usize, params: &GateParams) -> Self {
        let c = params.rail_capacitance();
        let stage_phases: Vec<usize> = (0..stages).map(|s| s % 4).collect();
        let mut phase_loads = [0.0; 4];
        for &p in &stage_phases {
            phase_loads[p] += c;
        }
        StageMap {
            phase_loads,
            stage_phases,
            stage_capacitance: c,
        }
    }
}

/// Clock amplitude, frequency and simulation horizon used to lay out
/// initial rail states and virtual stage waveforms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClockTiming {
    pub amplitude: f64,
    pub frequency: f64,
    pub t_end: f64,
}

impl ClockTiming {
    pub fn period(&self) -> f64 {
        1.0 / self.frequency
    }
}

/// PWL samples per clock period for virtual stage sources.
const VIRTUAL_POINTS_PER_PERIOD: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Rail {
    True,
    False,
}

impl Rail {
    fn tag(self) -> char {
        match self {
            Rail::True => 't',
            Rail::False => 'f',
        }
    }

    fn asserted_by(self, bit: Option<bool>) -> bool {
        matches!((self, bit), (Rail::True, Some(true)) | (Rail::False, Some(false)))
    }
}

const RAILS: [Rail; 2] = [Rail::True, Rail::False];

fn stage_rails(prefix: &str, s: usize) -> DualRail {
    DualRail {
        true_rail: NodeId::new(format!("{prefix}_{s}t")),
        false_rail: NodeId::new(format!("{prefix}_{s}f")),
    }
}

/// Adds one transmission gate (n + p switch) between `clock` and `rail`,
/// conducting while `ctrl` is above threshold.
fn transmission_gate(c: &mut Circuit, name: &str, clock: &NodeId, rail: &NodeId, ctrl: &NodeId, p: &GateParams) {
    let ground = NodeId::ground();
    c.add(Element::switch(
        format!("{name}N"),
        clock.as_str(),
        rail.as_str(),
        SwitchModel {
            r_on: p.r_on,
            r_off: p.r_off,
            v_threshold: p.v_threshold,
            polarity: Polarity::N,
            control: (ctrl.clone(), ground.clone()),
        },
    ));
    c.add(Element::switch(
        format!("{name}P"),
        clock.as_str(),
        rail.as_str(),
        SwitchModel {
            r_on: p.r_on,
            r_off: p.r_off,
            v_threshold: -p.v_threshold,
            polarity: Polarity::P,
            control: (ground, ctrl.clone()),
        },
    ));
}

/// Adds the gates and rail capacitors of stage `s` whose rails are
/// enabled by `prev` (forward) and `next` (backward). `bit_at_t0` is the
/// token the stage holds at t = 0.
#[allow(clippy::too_many_arguments)]
fn add_stage(
    c: &mut Circuit,
    prefix: &str,
    s: usize,
    clock: &NodeId,
    prev: &DualRail,
    next: &DualRail,
    params: &GateParams,
    timing: &ClockTiming,
    bit_at_t0: Option<bool>,
) {
    let rails = stage_rails(prefix, s);
    for r in RAILS {
        let node = rails.rail(r);
        let tag = r.tag().to_ascii_uppercase();
        transmission_gate(c, &format!("W{prefix}_{s}{tag}F"), clock, node, prev.rail(r), params);
        transmission_gate(c, &format!("W{prefix}_{s}{tag}B"), clock, node, next.rail(r), params);
        let v0 = ideal_rail(
            s as i64,
            timing.period(),
            timing.amplitude,
            params.v_threshold,
            0.0,
            r.asserted_by(bit_at_t0),
        );
        c.add(Element::new(
            format!("C{prefix}_{s}{tag}"),
            node.as_str(),
            "0",
            crate::circuit::ElementKind::Capacitor {
                farads: params.rail_capacitance(),
                initial_voltage: v0,
            },
        ));
    }
}

/// A dual-rail virtual stage driven by ideal PWL sources carrying `bits`.
fn add_virtual_stage(
    c: &mut Circuit,
    prefix: &str,
    label: &str,
    stage: i64,
    params: &GateParams,
    timing: &ClockTiming,
    bits: &[bool],
) -> DualRail {
    let rails = DualRail {
        true_rail: NodeId::new(format!("{prefix}_{label}t")),
        false_rail: NodeId::new(format!("{prefix}_{label}f")),
    };
    for r in RAILS {
        let bit_of = |k: i64| usize::try_from(k).ok().and_then(|k| bits.get(k).copied());
        let spec = ideal_rail_pwl(
            stage,
            timing.period(),
            timing.amplitude,
            params.v_threshold,
            timing.t_end,
            VIRTUAL_POINTS_PER_PERIOD,
            |k| r.asserted_by(bit_of(k)),
        );
        c.add(Element::vsource(
            format!("V{prefix}_{}{}", label.to_ascii_uppercase(), r.tag().to_ascii_uppercase()),
            rails.rail(r).as_str(),
            "0",
            spec,
        ));
    }
    rails
}

/// A built shift register fragment.
#[derive(Clone, Debug)]
pub struct ShiftRegister {
    pub circuit: Circuit,
    pub stage_map: StageMap,
    pub stages: Vec<DualRail>,
    /// Virtual stage −1 feeding stage 0.
    pub input: DualRail,
    /// Last real stage.
    pub output: DualRail,
    /// Prefix shared by every element name of the fragment (after the
    /// element-type letter).
    pub prefix: String,
}

/// Builds an N-stage dual-rail shift register between `clock_nodes`.
///
/// `input[k]` is the bit of token `k`; one token enters per clock cycle,
/// and token `k` occupies stage `s` during `[T/2 + sT/4 + kT, 3T/2 + sT/4 + kT)`.
/// Tokens beyond `input` are empty (both rails idle). A virtual source
/// stage after the last stage consumes tokens reversibly.
pub fn build_shift_register(
    prefix: &str,
    stages: usize,
    params: &GateParams,
    clock_nodes: &[NodeId; 4],
    input: &[bool],
    timing: &ClockTiming,
) -> Result<ShiftRegister, LogicError> {
    if stages == 0 {
        return Err(LogicError::NoStages);
    }
    params.validate()?;
    let mut c = Circuit::new();
    let vin = add_virtual_stage(&mut c, prefix, "in", -1, params, timing, input);
    let vend = add_virtual_stage(&mut c, prefix, "end", stages as i64, params, timing, input);
    let rails: Vec<DualRail> = (0..stages).map(|s| stage_rails(prefix, s)).collect();
    for s in 0..stages {
        let prev = if s == 0 { &vin } else { &rails[s - 1] };
        let next = if s + 1 == stages { &vend } else { &rails[s + 1] };
        let k = token_at(s as i64, timing.period(), 0.0);
        let bit = usize::try_from(k).ok().and_then(|k| input.get(k).copied());
        add_stage(&mut c, prefix, s, &clock_nodes[s % 4], prev, next, params, timing, bit);
    }
    Ok(ShiftRegister {
        circuit: c,
        stage_map: StageMap::new(stages, params),
        output: rails[stages - 1].clone(),
        stages: rails,
        input: vin,
        prefix: prefix.to_string(),
    })
}

/// A built eight-phase clock generator fragment.
#[derive(Clone, Debug)]
pub struct EightPhase {
    pub circuit: Circuit,
    pub stage_map: StageMap,
    /// True rails of the eight ring stages, in phase order.
    pub outputs: Vec<NodeId>,
    pub prefix: String,
}

/// Eight-stage 2LAL ring holding the alternating token pattern 1, 0. Each
/// true rail is high every other cycle, so the outputs have period 2T
/// and successive offsets of T/4.
pub fn build_eight_phase_generator(
    prefix: &str,
    params: &GateParams,
    clock_nodes: &[NodeId; 4],
    timing: &ClockTiming,
) -> Result<EightPhase, LogicError> {
    params.validate()?;
    let mut c = Circuit::new();
    let rails: Vec<DualRail> = (0..8).map(|s| stage_rails(prefix, s)).collect();
    for s in 0..8 {
        let k = token_at(s as i64, timing.period(), 0.0);
        let bit = Some(k.rem_euclid(2) == 0);
        add_stage(
            &mut c,
            prefix,
            s,
            &clock_nodes[s % 4],
            &rails[(s + 7) % 8],
            &rails[(s + 1) % 8],
            params,
            timing,
            bit,
        );
    }
    Ok(EightPhase {
        circuit: c,
        stage_map: StageMap::new(8, params),
        outputs: rails.into_iter().map(|r| r.true_rail).collect(),
        prefix: prefix.to_string(),
    })
}

/// The quad's clock node labels `P0..P3`.
pub fn quad_clock_nodes() -> [NodeId; 4] {
    std::array::from_fn(|k| NodeId::new(format!("P{k}")))
}
