use serde::{Deserialize, Serialize};

use super::LogicError;
use crate::circuit::{Circuit, ElementKind, NodeId};
use crate::engine::{interp, Trace};

/// Energy per cycle of a logic fragment over the final measured cycles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissipationReport {
    pub dissipated_per_cycle: f64,
    /// Gross energy entering the fragment from the clocks per cycle.
    pub delivered_per_cycle: f64,
    pub efficiency: f64,
    pub cycles_measured: usize,
}

const MIN_CYCLES: f64 = 20.0;
const MEASURED_CYCLES: usize = 10;

fn fragment_switches<'a>(c: &'a Circuit, prefix: &'a str) -> impl Iterator<Item = &'a crate::circuit::Element> + 'a {
    let tag = format!("W{prefix}_");
    c.elements
        .iter()
        .filter(move |e| matches!(e.kind, ElementKind::Switch(_)) && e.name.starts_with(&tag))
}

fn column<'a>(tr: &'a Trace, name: &str) -> Result<&'a [f64], LogicError> {
    tr.current(name)
        .ok_or_else(|| LogicError::Mismatch(format!("element '{name}' missing from trace")))
}

/// Current flowing from `clock` into the fragment at every sample.
fn clock_current(c: &Circuit, tr: &Trace, prefix: &str, clock: &NodeId) -> Result<Vec<f64>, LogicError> {
    let mut out = vec![0.0; tr.len()];
    for e in fragment_switches(c, prefix) {
        let sign = if &e.pos == clock {
            1.0
        } else if &e.neg == clock {
            -1.0
        } else {
            continue;
        };
        for (o, i) in out.iter_mut().zip(column(tr, &e.name)?) {
            *o += sign * i;
        }
    }
    Ok(out)
}

fn integrate_window(t: &[f64], y: &[f64], range: std::ops::Range<usize>) -> f64 {
    let (t, y) = (&t[range.clone()], &y[range]);
    t.windows(2)
        .zip(y.windows(2))
        .map(|(t, y)| 0.5 * (y[0] + y[1]) * (t[1] - t[0]))
        .sum()
}

/// Dissipation and recycling efficiency of the fragment whose switches are
/// named `W{prefix}_...`, averaged over the final ten cycles.
///
/// Efficiency is `1 − dissipated / delivered`, with delivered the gross
/// (positive-part) clock energy flowing into the fragment.
pub fn dissipation_per_cycle(
    c: &Circuit,
    tr: &Trace,
    prefix: &str,
    clock_nodes: &[NodeId; 4],
    frequency: f64,
    amplitude: f64,
) -> Result<DissipationReport, LogicError> {
    let period = 1.0 / frequency;
    let t_last = tr.times.last().copied().unwrap_or(0.0);
    if t_last < MIN_CYCLES * period * (1.0 - 1e-9) {
        return Err(LogicError::NotSustained(format!(
            "run covers {:.1} cycles, need {MIN_CYCLES}",
            t_last / period
        )));
    }
    let t0 = t_last - MEASURED_CYCLES as f64 * period;
    let w = tr.window(t0, t_last);
    for node in clock_nodes {
        let v = tr
            .voltage(node.as_str())
            .ok_or_else(|| LogicError::Mismatch(format!("clock node '{node}' missing")))?;
        let peak = v[w.clone()].iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        if peak < 0.5 * amplitude {
            return Err(LogicError::NotSustained(format!(
                "clock '{node}' peak {peak:.3e} V below half of {amplitude:.3e} V"
            )));
        }
    }

    let mut dissipated = 0.0;
    for e in fragment_switches(c, prefix) {
        let i = column(tr, &e.name)?;
        let p: Vec<f64> = (0..tr.len())
            .map(|k| {
                let v = tr.voltage_at(e.pos.as_str(), k).unwrap_or(0.0)
                    - tr.voltage_at(e.neg.as_str(), k).unwrap_or(0.0);
                v * i[k]
            })
            .collect();
        dissipated += integrate_window(&tr.times, &p, w.clone());
    }
    let mut delivered = 0.0;
    for node in clock_nodes {
        let i = clock_current(c, tr, prefix, node)?;
        let v = tr.voltage(node.as_str()).unwrap();
        let p: Vec<f64> = v.iter().zip(&i).map(|(v, i)| (v * i).max(0.0)).collect();
        delivered += integrate_window(&tr.times, &p, w.clone());
    }
    let cycles = MEASURED_CYCLES as f64;
    Ok(DissipationReport {
        dissipated_per_cycle: dissipated / cycles,
        delivered_per_cycle: delivered / cycles,
        efficiency: if delivered > 0.0 { 1.0 - dissipated / delivered } else { 0.0 },
        cycles_measured: MEASURED_CYCLES,
    })
}

/// Charge each clock pushes into the fragment over `[t0, t1]` (positive
/// part of the current only).
pub fn charge_per_phase(
    c: &Circuit,
    tr: &Trace,
    prefix: &str,
    clock_nodes: &[NodeId; 4],
    t0: f64,
    t1: f64,
) -> Result<[f64; 4], LogicError> {
    let w = tr.window(t0, t1);
    let mut out = [0.0; 4];
    for (k, node) in clock_nodes.iter().enumerate() {
        let i: Vec<f64> = clock_current(c, tr, prefix, node)?
            .into_iter()
            .map(|i| i.max(0.0))
            .collect();
        out[k] = integrate_window(&tr.times, &i, w.clone());
    }
    Ok(out)
}

/// Peak-to-peak voltage of `node` over `[t0, t1]`.
pub fn peak_to_peak(tr: &Trace, node: &str, t0: f64, t1: f64) -> Option<f64> {
    let v = &tr.voltage(node)?[tr.window(t0, t1)];
    if v.is_empty() {
        return None;
    }
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    Some(hi - lo)
}

/// Mean period between upward crossings of the signal's mean level.
pub fn mean_crossing_period(t: &[f64], v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let mut ups = Vec::new();
    for k in 1..v.len() {
        let (a, b) = (v[k - 1] - mean, v[k] - mean);
        if a < 0.0 && b >= 0.0 {
            ups.push(t[k - 1] + (t[k] - t[k - 1]) * (-a) / (b - a));
        }
    }
    if ups.len() < 2 {
        return None;
    }
    Some((ups[ups.len() - 1] - ups[0]) / (ups.len() - 1) as f64)
}

/// Delay (in `[0, max_lag]`) by which `b` best reproduces `a`, from the
/// peak of their cross-correlation on a uniform resampling of `t`.
pub fn crosscorr_lag(t: &[f64], a: &[f64], b: &[f64], max_lag: f64) -> Option<f64> {
    if t.len() < 4 {
        return None;
    }
    let (t0, t1) = (t[0], t[t.len() - 1]);
    let n = t.len().clamp(256, 1 << 16);
    let dt = (t1 - t0) / (n - 1) as f64;
    let sample = |y: &[f64]| -> Vec<f64> {
        let s: Vec<f64> = (0..n).map(|i| interp(t, y, t0 + i as f64 * dt).unwrap()).collect();
        let m = s.iter().sum::<f64>() / n as f64;
        s.into_iter().map(|x| x - m).collect()
    };
    let (sa, sb) = (sample(a), sample(b));
    let lags = ((max_lag / dt).round() as usize).min(n / 2);
    let score = |l: usize| -> f64 {
        let m = n - l;
        (0..m).map(|i| sa[i] * sb[i + l]).sum::<f64>() / m as f64
    };
    let scores: Vec<f64> = (0..=lags).map(score).collect();
    let (best, _) = scores
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))?;
    let mut lag = best as f64;
    if best > 0 && best < lags {
        let (ym, y0, yp) = (scores[best - 1], scores[best], scores[best + 1]);
        let denom = ym - 2.0 * y0 + yp;
        if denom != 0.0 {
            lag += 0.5 * (ym - yp) / denom;
        }
    }
    Some(lag * dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn lag_of_shifted_sine() {
        let t: Vec<f64> = (0..4000).map(|i| i as f64 * 0.005).collect();
        let a: Vec<f64> = t.iter().map(|t| (2.0 * PI * t).sin()).collect();
        let b: Vec<f64> = t.iter().map(|t| (2.0 * PI * (t - 0.25)).sin()).collect();
        let lag = crosscorr_lag(&t, &a, &b, 0.6).unwrap();
        assert!((lag - 0.25).abs() < 0.005, "{lag}");
    }

    #[test]
    fn crossing_period() {
        let t: Vec<f64> = (0..2000).map(|i| i as f64 * 0.01).collect();
        let v: Vec<f64> = t.iter().map(|t| (2.0 * PI * t / 2.0).cos() + 0.3).collect();
        let p = mean_crossing_period(&t, &v).unwrap();
        assert!((p - 2.0).abs() < 1e-3);
    }
}
