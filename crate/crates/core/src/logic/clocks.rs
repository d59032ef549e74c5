use std::f64::consts::PI;

use crate::circuit::{Circuit, Element, NodeId, SourceSpec};
use crate::resonator::drive_phase_deg;

/// Power-clock waveform used by ideal clock sources.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClockShape {
    Sine,
    /// Piecewise-linear triangle with the same peaks and troughs.
    Ramp,
}

/// Phase `ψ ∈ [−π, π)` of clock class `k` at time `t`; ψ = 0 at the peak.
pub fn clock_phase(k: i64, period: f64, t: f64) -> f64 {
    let x = 2.0 * PI * t / period - k as f64 * PI / 2.0;
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// Plateau level `√(A² − vth²)` reached by an active rail; zero when the
/// threshold is at or above the amplitude.
pub fn rail_plateau(amplitude: f64, v_threshold: f64) -> f64 {
    (amplitude * amplitude - v_threshold * v_threshold).max(0.0).sqrt()
}

/// Index of the token occupying stage `s` at time `t`: the token whose
/// window `[T/2 + sT/4 + kT, 3T/2 + sT/4 + kT)` contains `t`.
pub fn token_at(stage: i64, period: f64, t: f64) -> i64 {
    ((t - period / 2.0 - stage as f64 * period / 4.0) / period).floor() as i64
}

/// Ideal voltage of one rail of `stage`, given whether the token present
/// at `t` asserts this rail.
pub fn ideal_rail(stage: i64, period: f64, amplitude: f64, v_threshold: f64, t: f64, asserted: bool) -> f64 {
    let h = rail_plateau(amplitude, v_threshold);
    if !asserted {
        return -h;
    }
    let psi = clock_phase(stage.rem_euclid(4), period, t);
    (amplitude * psi.cos()).clamp(-h, h)
}

/// PWL samples of an ideal rail over `[0, t_end]`, `per_period` points
/// per clock period. `bit_of(k)` gives token `k`'s value on this rail
/// (`None` for an empty slot).
pub fn ideal_rail_pwl(
    stage: i64,
    period: f64,
    amplitude: f64,
    v_threshold: f64,
    t_end: f64,
    per_period: usize,
    asserted: impl Fn(i64) -> bool,
) -> SourceSpec {
    let dt = period / per_period as f64;
    let n = (t_end / dt).ceil() as usize;
    let pts = (0..=n)
        .map(|i| {
            let t = i as f64 * dt;
            let k = token_at(stage, period, t);
            (t, ideal_rail(stage, period, amplitude, v_threshold, t, asserted(k)))
        })
        .collect();
    SourceSpec::Pwl(pts)
}

/// Ideal clock source value for class `k`: `A·cos(ωt − k·90°)` or the
/// triangle through the same extrema.
pub fn clock_value(shape: ClockShape, k: usize, amplitude: f64, period: f64, t: f64) -> f64 {
    let psi = clock_phase(k as i64, period, t);
    match shape {
        ClockShape::Sine => amplitude * psi.cos(),
        ClockShape::Ramp => amplitude * (1.0 - 2.0 * psi.abs() / PI),
    }
}

/// Circuit of four ideal clock sources `VCLK{k}` on `nodes[k]`.
pub fn clock_sources(
    nodes: &[NodeId; 4],
    shape: ClockShape,
    amplitude: f64,
    frequency: f64,
    t_end: f64,
) -> Circuit {
    let mut c = Circuit::new();
    let period = 1.0 / frequency;
    for (k, node) in nodes.iter().enumerate() {
        let spec = match shape {
            ClockShape::Sine => SourceSpec::sine(0.0, amplitude, frequency, drive_phase_deg(k)),
            ClockShape::Ramp => {
                // Vertices at every quarter period.
                let n = (t_end / (period / 4.0)).ceil() as usize + 1;
                SourceSpec::Pwl(
                    (0..=n)
                        .map(|i| {
                            let t = i as f64 * period / 4.0;
                            (t, clock_value(shape, k, amplitude, period, t))
                        })
                        .collect(),
                )
            }
        };
        c.add(Element::vsource(format!("VCLK{k}"), node.as_str(), "0", spec));
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_and_tokens() {
        assert!(clock_phase(0, 1.0, 0.0).abs() < 1e-12);
        assert!(clock_phase(1, 1.0, 0.25).abs() < 1e-12);
        assert_eq!(token_at(0, 1.0, 0.5), 0);
        assert_eq!(token_at(0, 1.0, 0.49), -1);
        assert_eq!(token_at(2, 1.0, 1.0), 0);
        assert_eq!(token_at(-1, 1.0, 0.25), 0);
    }

    #[test]
    fn rail_shape() {
        let (a, vth) = (1.0, 0.3);
        let h = rail_plateau(a, vth);
        assert_eq!(ideal_rail(0, 1.0, a, vth, 1.0, true), h);
        assert_eq!(ideal_rail(0, 1.0, a, vth, 0.5, true), -h);
        assert_eq!(ideal_rail(0, 1.0, a, vth, 1.0, false), -h);
        let edge = ideal_rail(0, 1.0, a, vth, 0.75, true);
        assert!(edge.abs() < 1e-12);
    }

    #[test]
    fn sine_and_ramp_share_extrema() {
        for k in 0..4 {
            let t_peak = k as f64 * 0.25;
            for s in [ClockShape::Sine, ClockShape::Ramp] {
                assert!((clock_value(s, k, 2.0, 1.0, t_peak) - 2.0).abs() < 1e-12);
                assert!((clock_value(s, k, 2.0, 1.0, t_peak + 0.5) + 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ramp_sources_match_values() {
        let nodes = [NodeId::new("P0"), NodeId::new("P1"), NodeId::new("P2"), NodeId::new("P3")];
        let c = clock_sources(&nodes, ClockShape::Ramp, 1.0, 1.0, 3.0);
        let crate::circuit::ElementKind::VSource(s) = &c.element("VCLK1").unwrap().kind else {
            panic!()
        };
        for t in [0.1, 0.8, 2.3] {
            assert!((s.value_at(t) - clock_value(ClockShape::Ramp, 1, 1.0, 1.0, t)).abs() < 1e-12);
        }
    }
}
