use std::collections::{HashMap, HashSet};
use std::fmt;

use super::{Circuit, ElementKind, NodeId, SourceSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

/// A validation finding. `subject` names the offending element or node.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{sev}: {}: {}", self.subject, self.message)
    }
}

fn error(subject: impl Into<String>, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        severity: Severity::Error,
        subject: subject.into(),
        message: message.into(),
    }
}

fn warning(subject: impl Into<String>, message: impl Into<String>) -> Diagnostic {
    Diagnostic {
        severity: Severity::Warning,
        subject: subject.into(),
        message: message.into(),
    }
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

/// Checks every circuit invariant. An empty result means the circuit is
/// well formed.
pub fn validate(c: &Circuit) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if c.elements.is_empty() {
        out.push(error("circuit", "no elements"));
    }
    if !c.nodes().iter().any(NodeId::is_ground) {
        out.push(error("0", "ground node missing"));
    }

    let mut seen = HashSet::new();
    for e in &c.elements {
        if !seen.insert(e.name.as_str()) {
            out.push(error(&e.name, "duplicate element name"));
        }
        let first = e.name.chars().next().map(|ch| ch.to_ascii_uppercase());
        if first != Some(e.kind.letter()) {
            out.push(error(
                &e.name,
                format!("element name must start with '{}'", e.kind.letter()),
            ));
        }
        for t in e.terminals() {
            if !c.has_node(t) {
                out.push(error(&e.name, format!("references unknown node '{t}'")));
            }
        }
        if e.pos == e.neg {
            out.push(warning(&e.name, "both terminals on the same node"));
        }
        match &e.kind {
            ElementKind::Resistor { ohms } if !positive(*ohms) => {
                out.push(error(&e.name, "non-positive value"));
            }
            ElementKind::Inductor {
                henries,
                initial_current,
            } => {
                if !positive(*henries) {
                    out.push(error(&e.name, "non-positive value"));
                }
                if !initial_current.is_finite() {
                    out.push(error(&e.name, "non-finite initial current"));
                }
            }
            ElementKind::Capacitor {
                farads,
                initial_voltage,
            } => {
                if !positive(*farads) {
                    out.push(error(&e.name, "non-positive value"));
                }
                if !initial_voltage.is_finite() {
                    out.push(error(&e.name, "non-finite initial voltage"));
                }
            }
            ElementKind::VSource(spec) => match spec {
                SourceSpec::Dc(v) if !v.is_finite() => {
                    out.push(error(&e.name, "non-finite value"));
                }
                SourceSpec::Sine { frequency, .. } if !positive(*frequency) => {
                    out.push(error(&e.name, "sine frequency must be positive"));
                }
                SourceSpec::Pwl(points) => {
                    if points.is_empty() {
                        out.push(error(&e.name, "empty PWL"));
                    }
                    if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                        out.push(error(&e.name, "PWL times must be strictly increasing"));
                    }
                }
                _ => {}
            },
            ElementKind::Switch(sw) => {
                if !positive(sw.r_on) || !positive(sw.r_off) {
                    out.push(error(&e.name, "non-positive value"));
                } else if sw.r_on >= sw.r_off {
                    out.push(error(&e.name, "r_on must be below r_off"));
                }
                if !sw.v_threshold.is_finite() {
                    out.push(error(&e.name, "non-finite threshold"));
                }
            }
            _ => {}
        }
    }

    for name in c.inductor_ics.keys() {
        if !matches!(
            c.element(name).map(|e| &e.kind),
            Some(ElementKind::Inductor { .. })
        ) {
            out.push(error(name, ".ic i() names no inductor"));
        }
    }

    // Conductive connectivity: union-find over conduction terminals.
    let index: HashMap<&NodeId, usize> = c.nodes().iter().enumerate().map(|(i, n)| (n, i)).collect();
    let mut parent: Vec<usize> = (0..c.nodes().len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut touches: HashMap<&NodeId, (usize, usize)> = HashMap::new(); // (capacitor terminals, other)
    for e in &c.elements {
        let is_cap = matches!(e.kind, ElementKind::Capacitor { .. });
        for t in [&e.pos, &e.neg] {
            let entry = touches.entry(t).or_default();
            if is_cap {
                entry.0 += 1;
            } else {
                entry.1 += 1;
            }
        }
        if let ElementKind::Switch(sw) = &e.kind {
            for t in [&sw.control.0, &sw.control.1] {
                touches.entry(t).or_default().1 += 1;
            }
        }
        if let (Some(&a), Some(&b)) = (index.get(&e.pos), index.get(&e.neg)) {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
    }
    let ground = index.get(&NodeId::ground()).copied();
    for (i, n) in c.nodes().iter().enumerate() {
        if n.is_ground() {
            continue;
        }
        match touches.get(n) {
            None => out.push(warning(n.as_str(), "node not referenced by any element")),
            Some((1, 0)) => out.push(warning(n.as_str(), "floating node")),
            _ => {}
        }
        if let Some(g) = ground {
            if touches.contains_key(n) && find(&mut parent, i) != find(&mut parent, g) {
                out.push(error(n.as_str(), "no conductive path to ground"));
            }
        }
    }
    out
}
