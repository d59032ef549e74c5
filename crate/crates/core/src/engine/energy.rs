use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Trace;
use crate::circuit::{Circuit, Element, ElementKind};

#[derive(Debug, Error, PartialEq)]
pub enum AuditError {
    #[error("trace does not match circuit: {0}")]
    Mismatch(String),
}

/// Energy bookkeeping for one run.
///
/// `conservation_residual = source_delivered_total − (stored_final − stored_initial) − dissipated`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub stored_initial: f64,
    pub stored_final: f64,
    pub dissipated: f64,
    pub source_delivered: IndexMap<String, f64>,
    pub source_delivered_total: f64,
    pub conservation_residual: f64,
}

fn branch_voltage(tr: &Trace, e: &Element, k: usize) -> Result<f64, AuditError> {
    let v = |n: &crate::circuit::NodeId| {
        tr.voltage_at(n.as_str(), k)
            .ok_or_else(|| AuditError::Mismatch(format!("node '{n}' missing from trace")))
    };
    Ok(v(&e.pos)? - v(&e.neg)?)
}

fn current<'a>(tr: &'a Trace, e: &Element) -> Result<&'a [f64], AuditError> {
    tr.current(&e.name)
        .ok_or_else(|| AuditError::Mismatch(format!("element '{}' missing from trace", e.name)))
}

fn check_lengths(tr: &Trace) -> Result<(), AuditError> {
    if tr.is_empty() {
        return Err(AuditError::Mismatch("empty trace".into()));
    }
    let n = tr.len();
    if tr
        .node_voltages
        .values()
        .chain(tr.element_currents.values())
        .any(|c| c.len() != n)
    {
        return Err(AuditError::Mismatch("column length differs from time axis".into()));
    }
    Ok(())
}

/// Reactive stored energy (½CV² + ½LI²) at every recorded sample.
pub fn stored_energy_series(c: &Circuit, tr: &Trace) -> Result<Vec<f64>, AuditError> {
    check_lengths(tr)?;
    let mut out = vec![0.0; tr.len()];
    for e in &c.elements {
        match &e.kind {
            ElementKind::Capacitor { farads, .. } => {
                for (k, o) in out.iter_mut().enumerate() {
                    let v = branch_voltage(tr, e, k)?;
                    *o += 0.5 * farads * v * v;
                }
            }
            ElementKind::Inductor { henries, .. } => {
                let i = current(tr, e)?;
                for (o, i) in out.iter_mut().zip(i) {
                    *o += 0.5 * henries * i * i;
                }
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Instantaneous power absorbed by an element at every sample.
pub(crate) fn element_power(tr: &Trace, e: &Element) -> Result<Vec<f64>, AuditError> {
    let i = current(tr, e)?;
    (0..tr.len())
        .map(|k| Ok(branch_voltage(tr, e, k)? * i[k]))
        .collect()
}

fn is_resistive(e: &Element) -> bool {
    matches!(e.kind, ElementKind::Resistor { .. } | ElementKind::Switch(_))
}

/// Cumulative energy dissipated in resistors and switches, trapezoidal
/// quadrature on the recorded grid, aligned with `tr.times`.
pub fn cumulative_dissipation(c: &Circuit, tr: &Trace) -> Result<Vec<f64>, AuditError> {
    check_lengths(tr)?;
    let mut power = vec![0.0; tr.len()];
    for e in c.elements.iter().filter(|e| is_resistive(e)) {
        for (p, q) in power.iter_mut().zip(element_power(tr, e)?) {
            *p += q;
        }
    }
    Ok(cumulative_trapezoid(&tr.times, &power))
}

pub(crate) fn cumulative_trapezoid(t: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(y.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..y.len() {
        acc += 0.5 * (y[k] + y[k - 1]) * (t[k] - t[k - 1]);
        out.push(acc);
    }
    out
}

pub(crate) fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    cumulative_trapezoid(t, y).last().copied().unwrap_or(0.0)
}

/// Audits stored, dissipated and source-delivered energy over a trace.
pub fn energy_audit(c: &Circuit, tr: &Trace) -> Result<EnergyReport, AuditError> {
    let stored = stored_energy_series(c, tr)?;
    let dissipated = *cumulative_dissipation(c, tr)?.last().unwrap();
    let mut source_delivered = IndexMap::new();
    for e in &c.elements {
        if let ElementKind::VSource(_) = e.kind {
            let p: Vec<f64> = element_power(tr, e)?.into_iter().map(|p| -p).collect();
            source_delivered.insert(e.name.clone(), trapezoid(&tr.times, &p));
        }
    }
    let total: f64 = source_delivered.values().sum();
    let stored_initial = stored[0];
    let stored_final = *stored.last().unwrap();
    Ok(EnergyReport {
        stored_initial,
        stored_final,
        dissipated,
        source_delivered,
        source_delivered_total: total,
        conservation_residual: total - (stored_final - stored_initial) - dissipated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::parse_netlist;
    use crate::engine::{simulate, SimConfig};

    #[test]
    fn lossless_lc_conserves() {
        let period = 2.0 * std::f64::consts::PI;
        let c = parse_netlist("C1 a 0 1 ic=1\nL1 a 0 1").unwrap();
        let tr = simulate(&c, &SimConfig::new(period / 2000.0, 10.0 * period)).unwrap();
        let rep = energy_audit(&c, &tr).unwrap();
        assert!((rep.stored_initial - 0.5).abs() < 1e-6);
        assert!(rep.conservation_residual.abs() <= 1e-3 * rep.stored_initial);
        assert_eq!(rep.dissipated, 0.0);
    }

    #[test]
    fn rc_dissipates_initial_energy() {
        let c = parse_netlist("C1 a 0 1 ic=1\nR1 a 0 1").unwrap();
        let tr = simulate(&c, &SimConfig::new(1e-3, 10.0)).unwrap();
        let rep = energy_audit(&c, &tr).unwrap();
        assert!((rep.dissipated - 0.5).abs() < 0.5e-3, "{}", rep.dissipated);
        let cum = cumulative_dissipation(&c, &tr).unwrap();
        assert!(cum.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn source_energy_balances() {
        let c = parse_netlist("V1 s 0 SIN(0 1 1 0 0 0)\nR1 s a 1\nC1 a 0 1").unwrap();
        let tr = simulate(&c, &SimConfig::new(1e-3, 5.0)).unwrap();
        let rep = energy_audit(&c, &tr).unwrap();
        assert!(rep.source_delivered_total > 0.0);
        assert!(rep.conservation_residual.abs() < 1e-5, "{rep:?}");
    }

    #[test]
    fn mismatch_detected() {
        let c = parse_netlist("C1 a 0 1 ic=1\nR1 a 0 1").unwrap();
        let other = parse_netlist("C9 z 0 1 ic=1\nR9 z 0 1").unwrap();
        let tr = simulate(&other, &SimConfig::new(1e-2, 1.0)).unwrap();
        assert!(energy_audit(&c, &tr).is_err());
    }
}
