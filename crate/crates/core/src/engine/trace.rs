use std::io::{self, Write};

use indexmap::IndexMap;

use crate::circuit::GROUND;

/// Time-sampled node voltages and element currents from a transient run.
///
/// Element currents are positive from the element's `pos` terminal to its
/// `neg` terminal through the element.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Trace {
    pub times: Vec<f64>,
    pub node_voltages: IndexMap<String, Vec<f64>>,
    pub element_currents: IndexMap<String, Vec<f64>>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Voltage samples of a node; `None` for unknown labels. Ground is not
    /// stored, use [`Trace::voltage_at`] when ground may be involved.
    pub fn voltage(&self, node: &str) -> Option<&[f64]> {
        self.node_voltages.get(node).map(Vec::as_slice)
    }

    pub fn current(&self, element: &str) -> Option<&[f64]> {
        self.element_currents.get(element).map(Vec::as_slice)
    }

    /// Node voltage at sample `idx` (0 for ground).
    pub fn voltage_at(&self, node: &str, idx: usize) -> Option<f64> {
        if node == GROUND {
            return Some(0.0);
        }
        self.node_voltages.get(node).map(|v| v[idx])
    }

    /// Linearly interpolated node voltage at time `t`.
    pub fn voltage_interp(&self, node: &str, t: f64) -> Option<f64> {
        if node == GROUND {
            return Some(0.0);
        }
        let v = self.node_voltages.get(node)?;
        interp(&self.times, v, t)
    }

    /// Index range of samples with `t0 <= t <= t1`.
    pub fn window(&self, t0: f64, t1: f64) -> std::ops::Range<usize> {
        let a = self.times.partition_point(|&t| t < t0);
        let b = self.times.partition_point(|&t| t <= t1);
        a..b.max(a)
    }

    /// A trace restricted to the listed nodes and elements (unknown names
    /// are skipped), in the order given.
    pub fn subset(&self, nodes: &[&str], elements: &[&str]) -> Trace {
        let pick = |m: &IndexMap<String, Vec<f64>>, keys: &[&str]| {
            keys.iter()
                .filter_map(|k| m.get(*k).map(|v| (k.to_string(), v.clone())))
                .collect()
        };
        Trace {
            times: self.times.clone(),
            node_voltages: pick(&self.node_voltages, nodes),
            element_currents: pick(&self.element_currents, elements),
        }
    }

    /// Writes the trace as CSV: `time_s,v(<node>)...,i(<element>)...`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = vec!["time_s".to_string()];
        header.extend(self.node_voltages.keys().map(|n| format!("v({n})")));
        header.extend(self.element_currents.keys().map(|n| format!("i({n})")));
        writeln!(w, "{}", header.join(","))?;
        let mut line = String::new();
        for (k, t) in self.times.iter().enumerate() {
            line.clear();
            line.push_str(&t.to_string());
            for col in self
                .node_voltages
                .values()
                .chain(self.element_currents.values())
            {
                line.push(',');
                line.push_str(&col[k].to_string());
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

/// Linear interpolation of `(xs, ys)` at `x`; `None` outside the range.
pub fn interp(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    if xs.is_empty() || x < xs[0] || x > xs[xs.len() - 1] {
        return None;
    }
    let i = xs.partition_point(|&t| t <= x);
    if i == 0 {
        return Some(ys[0]);
    }
    if i >= xs.len() {
        return Some(ys[xs.len() - 1]);
    }
    let (x0, x1) = (xs[i - 1], xs[i]);
    Some(ys[i - 1] + (ys[i] - ys[i - 1]) * (x - x0) / (x1 - x0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut tr = Trace {
            times: vec![0.0, 0.5],
            ..Default::default()
        };
        tr.node_voltages.insert("a".into(), vec![1.0, 0.25]);
        tr.element_currents.insert("R1".into(), vec![1e-3, -2.5e-4]);
        let csv = tr.to_csv_string();
        assert_eq!(csv, "time_s,v(a),i(R1)\n0,1,0.001\n0.5,0.25,-0.00025\n");
    }

    #[test]
    fn interpolation() {
        let xs = [0.0, 1.0, 2.0];
        let ys = [0.0, 10.0, 0.0];
        assert_eq!(interp(&xs, &ys, 0.5), Some(5.0));
        assert_eq!(interp(&xs, &ys, 2.0), Some(0.0));
        assert_eq!(interp(&xs, &ys, 2.5), None);
    }
}
