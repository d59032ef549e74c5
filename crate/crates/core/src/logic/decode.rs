use std::fmt;

use super::{DualRail, LogicError};
use crate::engine::Trace;

/// A decoded dual-rail sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Bit {
    One,
    Zero,
    Invalid,
}

impl Bit {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Bit::One
        } else {
            Bit::Zero
        }
    }
}

impl fmt::Display for Bit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Bit::One => "1",
            Bit::Zero => "0",
            Bit::Invalid => "x",
        })
    }
}

/// Mid-tick sample times of `stage` for tokens `k` in `tokens`: the
/// clock peak `T + kT + sT/4`.
pub fn tick_sample_times(stage: i64, period: f64, tokens: std::ops::Range<i64>) -> Vec<f64> {
    tokens
        .map(|k| period * (1.0 + k as f64 + stage as f64 / 4.0))
        .collect()
}

/// Decodes `signal` at each sample time. A rail is high at or above 70%
/// of the `−A..A` swing (0.4·A) and low at or below 30% (−0.4·A).
pub fn decode_dual_rail(
    tr: &Trace,
    signal: &DualRail,
    sample_times: &[f64],
    amplitude: f64,
) -> Result<Vec<Bit>, LogicError> {
    let hi = 0.4 * amplitude;
    let lo = -0.4 * amplitude;
    sample_times
        .iter()
        .map(|&t| {
            let v = |n: &crate::circuit::NodeId| {
                tr.voltage_interp(n.as_str(), t)
                    .ok_or(LogicError::ScheduleOutsideTrace(t))
            };
            let (vt, vf) = (v(&signal.true_rail)?, v(&signal.false_rail)?);
            Ok(match (vt >= hi, vt <= lo, vf >= hi, vf <= lo) {
                (true, _, _, true) => Bit::One,
                (_, true, true, _) => Bit::Zero,
                _ => Bit::Invalid,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::NodeId;

    fn trace(vt: f64, vf: f64) -> Trace {
        let mut tr = Trace {
            times: vec![0.0, 1.0],
            ..Default::default()
        };
        tr.node_voltages.insert("t".into(), vec![vt, vt]);
        tr.node_voltages.insert("f".into(), vec![vf, vf]);
        tr
    }

    fn rails() -> DualRail {
        DualRail {
            true_rail: NodeId::new("t"),
            false_rail: NodeId::new("f"),
        }
    }

    #[test]
    fn truth_table() {
        let d = |vt, vf| decode_dual_rail(&trace(vt, vf), &rails(), &[0.5], 1.0).unwrap()[0];
        assert_eq!(d(0.9, -0.9), Bit::One);
        assert_eq!(d(-0.9, 0.9), Bit::Zero);
        assert_eq!(d(-0.9, -0.9), Bit::Invalid);
        assert_eq!(d(0.9, 0.9), Bit::Invalid);
        assert_eq!(d(0.2, -0.9), Bit::Invalid);
    }

    #[test]
    fn outside_trace() {
        let r = decode_dual_rail(&trace(1.0, -1.0), &rails(), &[2.0], 1.0);
        assert_eq!(r, Err(LogicError::ScheduleOutsideTrace(2.0)));
    }

    #[test]
    fn sample_times() {
        assert_eq!(tick_sample_times(2, 4.0, 0..2), vec![6.0, 10.0]);
        assert_eq!(tick_sample_times(-1, 4.0, 0..1), vec![3.0]);
    }
}
