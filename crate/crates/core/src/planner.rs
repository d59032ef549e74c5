//! Energy-capacity planning for high-kinetic-inductance (HKI) resonators:
//! energy and power density per layer, layer counts and inductor sizing.
//!
//! All quantities are SI. A layer of HKI film stores at most
//! `½·L□·(d·I_c)²` joules per square metre regardless of how it is cut
//! into wires; `d` derates the critical current.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("invalid process: {0}")]
    InvalidProcess(String),
    #[error("invalid chip profile: {0}")]
    InvalidChip(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("no feasible width: need {required_m:.3e} m, process allows at most {max_m:.3e} m")]
    NoFeasibleWidth { required_m: f64, max_m: f64 },
}

fn default_derate() -> f64 {
    1.0 / 3.0
}

/// An HKI fabrication process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HkiProcess {
    #[serde(rename = "sheet_inductance_h_per_sq")]
    pub sheet_inductance: f64,
    #[serde(rename = "critical_current_a_per_m")]
    pub critical_current_per_width: f64,
    #[serde(rename = "min_width_m")]
    pub min_width: f64,
    #[serde(rename = "min_space_m")]
    pub min_space: f64,
    #[serde(default = "default_derate")]
    pub derate: f64,
    /// Widest wire the layout rules allow, if any.
    #[serde(rename = "max_width_m", default, skip_serializing_if = "Option::is_none")]
    pub max_width: Option<f64>,
}

impl HkiProcess {
    /// SeeQC: 8.5 pH/□, 2.5 mA/µm, 1 µm lines and spaces, d = 1/3.
    pub fn seeqc() -> Self {
        HkiProcess {
            sheet_inductance: 8.5e-12,
            critical_current_per_width: 2500.0,
            min_width: 1e-6,
            min_space: 1e-6,
            derate: default_derate(),
            max_width: None,
        }
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(PlanError::InvalidProcess(format!("{name} must be > 0, got {v}")))
            }
        };
        pos("sheet_inductance", self.sheet_inductance)?;
        pos("critical_current_per_width", self.critical_current_per_width)?;
        pos("min_width", self.min_width)?;
        pos("min_space", self.min_space)?;
        pos("derate", self.derate)?;
        if self.derate > 1.0 {
            return Err(PlanError::InvalidProcess(format!("derate must be <= 1, got {}", self.derate)));
        }
        if let Some(w) = self.max_width {
            pos("max_width", w)?;
        }
        Ok(())
    }

    /// Usable current per metre of width, `d·I_c`.
    pub fn usable_current_per_width(&self) -> f64 {
        self.derate * self.critical_current_per_width
    }
}

/// Power demand of a chip to be converted to resonant clocking.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChipProfile {
    #[serde(rename = "area_m2")]
    pub area: f64,
    #[serde(rename = "power_w", default, skip_serializing_if = "Option::is_none")]
    pub power: Option<f64>,
    #[serde(rename = "power_density_w_per_m2", default, skip_serializing_if = "Option::is_none")]
    pub power_density: Option<f64>,
    #[serde(rename = "clock_frequency_hz")]
    pub clock_frequency: f64,
    #[serde(rename = "supply_amplitude_v")]
    pub supply_amplitude: f64,
}

impl ChipProfile {
    /// A 4 mm × 4 mm cryo-CMOS controller drawing `power` at `frequency`,
    /// 1 V supply amplitude.
    pub fn horse_ridge(power: f64, frequency: f64) -> Self {
        ChipProfile {
            area: 16e-6,
            power: Some(power),
            power_density: None,
            clock_frequency: frequency,
            supply_amplitude: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        let pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(PlanError::InvalidChip(format!("{name} must be > 0, got {v}")))
            }
        };
        pos("area", self.area)?;
        pos("clock_frequency", self.clock_frequency)?;
        pos("supply_amplitude", self.supply_amplitude)?;
        match (self.power, self.power_density) {
            (Some(p), _) => pos("power", p),
            (None, Some(d)) => pos("power_density", d),
            (None, None) => Err(PlanError::InvalidChip("need power or power_density".into())),
        }
    }

    pub fn total_power(&self) -> f64 {
        self.power
            .unwrap_or_else(|| self.power_density.unwrap_or(0.0) * self.area)
    }

    pub fn power_density(&self) -> f64 {
        self.power_density
            .unwrap_or_else(|| self.power.unwrap_or(0.0) / self.area)
    }
}

/// Sized quad inductor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InductorRecord {
    #[serde(rename = "inductance_h")]
    pub inductance: f64,
    /// Whole squares of film needed to reach `inductance`.
    pub squares: u64,
    #[serde(rename = "width_m")]
    pub width: f64,
    #[serde(rename = "footprint_m2")]
    pub footprint: f64,
    #[serde(rename = "peak_current_a")]
    pub peak_current: f64,
    pub current_margin_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerPlan {
    #[serde(rename = "power_density_w_per_m2")]
    pub power_density: f64,
    pub layers_required: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    #[serde(rename = "energy_density_j_per_m2")]
    pub energy_density: f64,
    /// Per-layer power density at the chip's clock frequency.
    #[serde(rename = "power_density_w_per_m2")]
    pub power_density: f64,
    #[serde(rename = "chip_power_density_w_per_m2")]
    pub chip_power_density: f64,
    pub layers_required: u32,
    #[serde(rename = "load_per_phase_f")]
    pub load_per_phase: f64,
    pub inductor: InductorRecord,
}

/// Maximum stored energy per unit area of one HKI layer, J/m².
pub fn energy_density(p: &HkiProcess) -> f64 {
    let i = p.usable_current_per_width();
    0.5 * p.sheet_inductance * i * i
}

pub fn power_density_and_layers(p: &HkiProcess, chip: &ChipProfile) -> Result<LayerPlan, PlanError> {
    p.validate()?;
    chip.validate()?;
    let per_layer = energy_density(p) * chip.clock_frequency;
    let ratio = chip.power_density() / per_layer;
    // Guard against ratios that are integers up to rounding.
    let layers = (ratio - 1e-9).ceil().max(1.0) as u32;
    Ok(LayerPlan {
        power_density: per_layer,
        layers_required: layers,
    })
}

/// Inductance that puts the quad's quadrature mode, `ω = √(2/(L·C))`, at `f`.
pub fn quad_inductance(f: f64, load: f64) -> f64 {
    let w = 2.0 * PI * f;
    2.0 / (w * w * load)
}

pub fn size_inductor(f: f64, load: f64, p: &HkiProcess, amplitude: f64) -> Result<InductorRecord, PlanError> {
    p.validate()?;
    for (name, v) in [("frequency", f), ("load", load), ("amplitude", amplitude)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(PlanError::InvalidInput(format!("{name} must be > 0, got {v}")));
        }
    }
    let inductance = quad_inductance(f, load);
    let squares = (inductance / p.sheet_inductance - 1e-9).ceil().max(1.0);
    let peak_current = 2f64.sqrt() * amplitude / (2.0 * PI * f * inductance);
    let required = peak_current / p.usable_current_per_width();
    let steps = (required / p.min_width - 1e-9).ceil().max(1.0);
    let width = steps * p.min_width;
    if let Some(max) = p.max_width {
        if width > max {
            return Err(PlanError::NoFeasibleWidth {
                required_m: width,
                max_m: max,
            });
        }
    }
    Ok(InductorRecord {
        inductance,
        squares: squares as u64,
        width,
        footprint: squares * width * (width + p.min_space),
        peak_current,
        current_margin_ok: peak_current <= p.usable_current_per_width() * width * (1.0 + 1e-12),
    })
}

/// Per-phase load capacitance equivalent to `power` at `f` and `amplitude`
/// by `P = C·V²·f`, split over four phases.
pub fn inferred_load_per_phase(chip: &ChipProfile) -> f64 {
    chip.total_power() / (chip.clock_frequency * chip.supply_amplitude.powi(2)) / 4.0
}

pub fn plan_report(p: &HkiProcess, chip: &ChipProfile) -> Result<PlanReport, PlanError> {
    let layers = power_density_and_layers(p, chip)?;
    let load = inferred_load_per_phase(chip);
    let inductor = size_inductor(chip.clock_frequency, load, p, chip.supply_amplitude)?;
    Ok(PlanReport {
        energy_density: energy_density(p),
        power_density: layers.power_density,
        chip_power_density: chip.power_density(),
        layers_required: layers.layers_required,
        load_per_phase: load,
        inductor,
    })
}

impl PlanReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan report serializes")
    }

    /// Aligned three-column table: quantity, value, unit.
    pub fn to_table(&self) -> String {
        let rows = [
            ("energy density / layer", self.energy_density * 1e9 / 1e4, "nJ/cm^2"),
            ("power density / layer", self.power_density * 1e3 / 1e4, "mW/cm^2"),
            ("chip power density", self.chip_power_density * 1e3 / 1e4, "mW/cm^2"),
            ("layers required", f64::from(self.layers_required), ""),
            ("load per phase", self.load_per_phase * 1e12, "pF"),
            ("inductance", self.inductor.inductance * 1e9, "nH"),
            ("squares", self.inductor.squares as f64, ""),
            ("width", self.inductor.width * 1e6, "um"),
            ("footprint", self.inductor.footprint * 1e6, "mm^2"),
            ("peak current", self.inductor.peak_current * 1e3, "mA"),
        ];
        let mut out = String::new();
        for (name, value, unit) in rows {
            let _ = writeln!(out, "{name:<24} {value:>14.4} {unit}");
        }
        let _ = writeln!(out, "{:<24} {:>14}", "current margin ok", self.inductor.current_margin_ok);
        out
    }
}

pub fn process_from_json(s: &str) -> Result<HkiProcess, PlanError> {
    let p: HkiProcess = serde_json::from_str(s).map_err(|e| PlanError::InvalidProcess(e.to_string()))?;
    p.validate()?;
    Ok(p)
}

pub fn chip_from_json(s: &str) -> Result<ChipProfile, PlanError> {
    let c: ChipProfile = serde_json::from_str(s).map_err(|e| PlanError::InvalidChip(e.to_string()))?;
    c.validate()?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    const NJ_PER_CM2: f64 = 1e-9 / 1e-4;
    const MW_PER_CM2: f64 = 1e-3 / 1e-4;

    fn round3(x: f64) -> f64 {
        let mag = 10f64.powf(x.abs().log10().floor() - 2.0);
        (x / mag).round() * mag
    }

    #[test]
    fn seeqc_energy_density() {
        let p = HkiProcess::seeqc();
        assert!((round3(energy_density(&p) / NJ_PER_CM2) - 0.295).abs() < 1e-12);
        let raw = HkiProcess { derate: 1.0, ..p };
        // ½ · 8.5e-12 · 2500² J/m² by hand: 2.65625e-5 J/m².
        assert!((energy_density(&raw) - 2.656_25e-5).abs() < 1e-15);
        assert!((energy_density(&raw) / energy_density(&HkiProcess::seeqc()) - 9.0).abs() < 1e-9);
    }

    #[test]
    fn width_does_not_enter() {
        let a = HkiProcess { min_width: 1e-4, ..HkiProcess::seeqc() };
        let b = HkiProcess { min_width: 1e-5, ..HkiProcess::seeqc() };
        assert_eq!(energy_density(&a), energy_density(&b));
    }

    #[test]
    fn power_density_anchors() {
        let p = HkiProcess::seeqc();
        let hr = ChipProfile::horse_ridge(0.140, 1.6e9);
        let plan = power_density_and_layers(&p, &hr).unwrap();
        assert!((round3(plan.power_density / MW_PER_CM2) - 472.0).abs() < 1e-9);
        assert!((hr.power_density() / MW_PER_CM2 - 875.0).abs() < 1e-9);
        assert_eq!(plan.layers_required, 2);
        let low = ChipProfile::horse_ridge(0.010, 100e6);
        let plan = power_density_and_layers(&p, &low).unwrap();
        assert!((low.power_density() / MW_PER_CM2 - 62.5).abs() < 1e-9);
        assert!((round3(plan.power_density / MW_PER_CM2) - 29.5).abs() < 1e-9);
        assert_eq!(plan.layers_required, 3);
    }

    #[test]
    fn zero_frequency_rejected() {
        let chip = ChipProfile { clock_frequency: 0.0, ..ChipProfile::horse_ridge(0.1, 1e9) };
        assert!(power_density_and_layers(&HkiProcess::seeqc(), &chip).is_err());
    }

    #[test]
    fn layers_monotone() {
        let p = HkiProcess::seeqc();
        let mut last = 0;
        for mw in [1.0, 10.0, 50.0, 100.0, 140.0, 300.0, 1000.0] {
            let l = power_density_and_layers(&p, &ChipProfile::horse_ridge(mw * 1e-3, 1e9)).unwrap().layers_required;
            assert!(l >= last);
            last = l;
        }
        let mut last = u32::MAX;
        for f in [1e8, 2e8, 4e8, 8e8, 1.6e9, 3.2e9] {
            let l = power_density_and_layers(&p, &ChipProfile::horse_ridge(0.1, f)).unwrap().layers_required;
            assert!(l <= last);
            last = l;
        }
    }

    #[test]
    fn inductor_sizing_example() {
        let r = size_inductor(1.6e9, 1e-12, &HkiProcess::seeqc(), 1.0).unwrap();
        assert!((r.inductance - 19.79e-9).abs() < 0.005e-9, "{}", r.inductance);
        assert_eq!(r.squares, 2329);
        assert!(r.current_margin_ok);
        let p = HkiProcess::seeqc();
        assert!(r.peak_current <= p.usable_current_per_width() * r.width);
        assert!(r.peak_current > p.usable_current_per_width() * (r.width - p.min_width));
        assert!((r.footprint - r.squares as f64 * r.width * (r.width + p.min_space)).abs() < 1e-24);
    }

    #[test]
    fn sizing_errors() {
        let p = HkiProcess::seeqc();
        assert!(size_inductor(1e9, 0.0, &p, 1.0).is_err());
        let narrow = HkiProcess { max_width: Some(1e-6), ..p };
        assert!(matches!(
            size_inductor(1.6e9, 1e-12, &narrow, 1.0),
            Err(PlanError::NoFeasibleWidth { .. })
        ));
    }

    #[test]
    fn report_and_round_trip() {
        let r = plan_report(&HkiProcess::seeqc(), &ChipProfile::horse_ridge(0.140, 1.6e9)).unwrap();
        assert_eq!(r.layers_required, 2);
        let back: PlanReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        let table = r.to_table();
        assert!(table.contains("layers required"));
        assert_eq!(table.lines().count(), 11);
        let zero = ChipProfile { area: 0.0, ..ChipProfile::horse_ridge(0.1, 1e9) };
        assert!(plan_report(&HkiProcess::seeqc(), &zero).is_err());
    }

    #[test]
    fn json_inputs() {
        let p = process_from_json(
            r#"{"sheet_inductance_h_per_sq":8.5e-12,"critical_current_a_per_m":2500,"min_width_m":1e-6,"min_space_m":1e-6}"#,
        )
        .unwrap();
        assert_eq!(p, HkiProcess::seeqc());
        let c = chip_from_json(
            r#"{"area_m2":1.6e-5,"power_density_w_per_m2":8750,"clock_frequency_hz":1.6e9,"supply_amplitude_v":1}"#,
        )
        .unwrap();
        assert!((c.total_power() - 0.14).abs() < 1e-12);
        assert!(process_from_json(r#"{"sheet_inductance_h_per_sq":-1}"#).is_err());
        assert!(chip_from_json(r#"{"area_m2":1,"clock_frequency_hz":1,"supply_amplitude_v":1}"#).is_err());
    }
}
