use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_sustain_check, ExperimentError, Scenario, SustainOutcome, SustainVerdict};
use crate::logic::dissipation_per_cycle;
use crate::planner::{size_inductor, HkiProcess};
use crate::resonator::DriveScheme;

/// One row of a sweep or study table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub parameter: f64,
    pub sustained: bool,
    pub final_amplitude_fraction: f64,
    #[serde(rename = "dissipation_J_per_cycle")]
    pub dissipation_per_cycle: Option<f64>,
    pub efficiency: Option<f64>,
}

/// Logic dissipation and efficiency summed over every fragment of a run.
fn logic_efficiency(s: &Scenario, out: &SustainOutcome) -> Option<(f64, f64)> {
    let (mut diss, mut delivered) = (0.0, 0.0);
    for prefix in out.built.logic_prefixes() {
        let r = dissipation_per_cycle(
            &out.built.circuit,
            &out.trace,
            prefix,
            &out.built.clock_nodes,
            s.frequency,
            s.amplitude(),
        )
        .ok()?;
        diss += r.dissipated_per_cycle;
        delivered += r.delivered_per_cycle;
    }
    (delivered > 0.0).then(|| (diss, 1.0 - diss / delivered))
}

fn row(parameter: f64, s: &Scenario) -> Result<TableRow, ExperimentError> {
    let out = run_sustain_check(s)?;
    let eff = logic_efficiency(s, &out);
    Ok(TableRow {
        parameter,
        sustained: out.verdict.sustained,
        final_amplitude_fraction: out.verdict.final_amplitude_fraction,
        dissipation_per_cycle: eff.map(|e| e.0),
        efficiency: eff.map(|e| e.1),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<TableRow>,
    /// Midpoint between the largest sustaining and the smallest failing
    /// resistance; `None` unless both exist.
    pub r_star: Option<f64>,
    /// False when some failing value lies below a sustaining one.
    pub downward_closed: bool,
}

/// Runs the scenario once per drive resistance (in parallel; rows keep
/// the input order).
pub fn sweep_drive_resistor(s: &Scenario, r_values: &[f64]) -> Result<SweepResult, ExperimentError> {
    if r_values.is_empty() {
        return Err(ExperimentError::InvalidScenario("empty resistance list".into()));
    }
    if r_values.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
        return Err(ExperimentError::InvalidScenario("resistances must be > 0".into()));
    }
    if r_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ExperimentError::InvalidScenario("resistances must be strictly increasing".into()));
    }
    let Some(drive) = &s.drive else {
        return Err(ExperimentError::InvalidScenario("scenario has no drive".into()));
    };
    let rows: Vec<TableRow> = r_values
        .par_iter()
        .map(|&r| {
            let mut sc = s.clone();
            sc.drive = Some(super::DriveSpec { r_drive: r, ..drive.clone() });
            row(r, &sc)
        })
        .collect::<Result<_, _>>()?;
    let max_ok = rows.iter().filter(|r| r.sustained).map(|r| r.parameter).reduce(f64::max);
    let min_fail = rows.iter().filter(|r| !r.sustained).map(|r| r.parameter).reduce(f64::min);
    let downward_closed = match (max_ok, min_fail) {
        (Some(ok), Some(fail)) => ok < fail,
        _ => true,
    };
    let r_star = match (max_ok, min_fail) {
        (Some(ok), Some(fail)) if ok < fail => Some(0.5 * (ok + fail)),
        _ => None,
    };
    Ok(SweepResult {
        rows,
        r_star,
        downward_closed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub frequency: f64,
    pub inductance: f64,
    pub row: TableRow,
}

/// Re-runs the scenario at each frequency with the resonator inductance
/// resized by the planner so the quadrature mode tracks `f`.
pub fn adiabatic_scaling_study(s: &Scenario, freqs: &[f64]) -> Result<Vec<ScalingRow>, ExperimentError> {
    if freqs.is_empty() {
        return Err(ExperimentError::InvalidScenario("empty frequency list".into()));
    }
    let process = HkiProcess::seeqc();
    freqs
        .par_iter()
        .map(|&f| {
            let ind = size_inductor(f, s.resonator.node_load(), &process, s.amplitude())?;
            let mut sc = s.clone();
            sc.frequency = f;
            sc.resonator = s.resonator.with_inductance(ind.inductance);
            Ok(ScalingRow {
                frequency: f,
                inductance: ind.inductance,
                row: row(f, &sc)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveComparison {
    pub two_phase: SustainVerdict,
    pub four_phase: SustainVerdict,
    pub two_phase_sources: usize,
    pub four_phase_sources: usize,
}

/// Runs the scenario under both drive schemes at equal amplitude,
/// frequency and drive resistance.
pub fn drive_scheme_comparison(s: &Scenario) -> Result<DriveComparison, ExperimentError> {
    let Some(drive) = &s.drive else {
        return Err(ExperimentError::InvalidScenario("scenario has no drive".into()));
    };
    let mut out: Vec<(usize, SustainVerdict)> = [DriveScheme::TwoPhase, DriveScheme::FourPhase]
        .par_iter()
        .map(|&scheme| {
            let mut sc = s.clone();
            sc.drive = Some(super::DriveSpec { scheme, ..drive.clone() });
            let o = run_sustain_check(&sc)?;
            let sources = o
                .built
                .circuit
                .elements
                .iter()
                .filter(|e| e.name.starts_with("VDRV"))
                .count();
            Ok((sources, o.verdict))
        })
        .collect::<Result<_, ExperimentError>>()?;
    let (four_sources, four) = out.pop().unwrap();
    let (two_sources, two) = out.pop().unwrap();
    Ok(DriveComparison {
        two_phase: two,
        four_phase: four,
        two_phase_sources: two_sources,
        four_phase_sources: four_sources,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV table: `parameter,sustained,final_amplitude_fraction,dissipation_J_per_cycle,efficiency`.
pub fn table_csv(rows: &[TableRow]) -> String {
    let mut out = String::from("parameter,sustained,final_amplitude_fraction,dissipation_J_per_cycle,efficiency\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.parameter,
            r.sustained,
            r.final_amplitude_fraction,
            opt(r.dissipation_per_cycle),
            opt(r.efficiency)
        ));
    }
    out
}

pub fn table_json(rows: &[TableRow]) -> String {
    serde_json::to_string_pretty(rows).expect("table rows serialize")
}
