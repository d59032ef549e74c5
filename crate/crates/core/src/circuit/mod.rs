//! Lumped-element circuit representation shared by the netlist front end,
//! the builders, the transient engine and the eigenmode analysis.

mod parse;
mod serialize;
mod validate;

pub use parse::{parse_netlist, parse_value, ParseError};
pub use serialize::serialize_netlist;
pub use validate::{validate, Diagnostic, Severity};

use std::collections::BTreeMap;
use std::fmt;

/// Label of the reserved ground node.
pub const GROUND: &str = "0";

/// Node label. Ground is the reserved label `"0"`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub String);

impl NodeId {
    pub fn new(name: impl Into<String>) -> Self {
        NodeId(name.into())
    }

    pub fn ground() -> Self {
        NodeId(GROUND.to_string())
    }

    pub fn is_ground(&self) -> bool {
        self.0 == GROUND
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

/// Independent voltage source waveform.
#[derive(Clone, Debug, PartialEq)]
pub enum SourceSpec {
    Dc(f64),
    /// SPICE-style sine: `offset + amplitude * exp(-damping*(t-delay)) * sin(2πf(t-delay) + phase)`,
    /// held at `offset + amplitude*sin(phase)` before `delay`.
    Sine {
        offset: f64,
        amplitude: f64,
        frequency: f64,
        delay: f64,
        damping: f64,
        phase_deg: f64,
    },
    /// Piecewise-linear (time, volts) breakpoints, held constant outside the range.
    Pwl(Vec<(f64, f64)>),
}

impl SourceSpec {
    /// A sine with no delay or damping.
    pub fn sine(offset: f64, amplitude: f64, frequency: f64, phase_deg: f64) -> Self {
        SourceSpec::Sine {
            offset,
            amplitude,
            frequency,
            delay: 0.0,
            damping: 0.0,
            phase_deg,
        }
    }

    pub fn value_at(&self, t: f64) -> f64 {
        match self {
            SourceSpec::Dc(v) => *v,
            SourceSpec::Sine {
                offset,
                amplitude,
                frequency,
                delay,
                damping,
                phase_deg,
            } => {
                let phase = phase_deg.to_radians();
                if t < *delay {
                    offset + amplitude * phase.sin()
                } else {
                    let tau = t - delay;
                    offset
                        + amplitude
                            * (-damping * tau).exp()
                            * (2.0 * std::f64::consts::PI * frequency * tau + phase).sin()
                }
            }
            SourceSpec::Pwl(points) => pwl_value(points, t),
        }
    }
}

fn pwl_value(points: &[(f64, f64)], t: f64) -> f64 {
    match points {
        [] => 0.0,
        [(t0, v0), ..] if t <= *t0 => *v0,
        _ => {
            // first breakpoint strictly after t
            let idx = points.partition_point(|&(ti, _)| ti <= t);
            if idx >= points.len() {
                return points[points.len() - 1].1;
            }
            let (ta, va) = points[idx - 1];
            let (tb, vb) = points[idx];
            va + (vb - va) * (t - ta) / (tb - ta)
        }
    }
}

/// Switch polarity. An n-type switch conducts when the control voltage
/// exceeds the threshold; a p-type switch conducts when it is below.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Polarity {
    N,
    P,
}

impl Polarity {
    pub fn conducts(self, v_control: f64, v_threshold: f64) -> bool {
        match self {
            Polarity::N => v_control > v_threshold,
            Polarity::P => v_control < v_threshold,
        }
    }
}

/// Threshold switch: piecewise-constant resistance between the conduction
/// terminals, selected by the voltage across the control pair.
#[derive(Clone, Debug, PartialEq)]
pub struct SwitchModel {
    pub r_on: f64,
    pub r_off: f64,
    pub v_threshold: f64,
    pub polarity: Polarity,
    pub control: (NodeId, NodeId),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ElementKind {
    Resistor { ohms: f64 },
    Inductor { henries: f64, initial_current: f64 },
    Capacitor { farads: f64, initial_voltage: f64 },
    VSource(SourceSpec),
    Switch(SwitchModel),
}

impl ElementKind {
    /// SPICE card letter for this kind.
    pub fn letter(&self) -> char {
        match self {
            ElementKind::Resistor { .. } => 'R',
            ElementKind::Inductor { .. } => 'L',
            ElementKind::Capacitor { .. } => 'C',
            ElementKind::VSource(_) => 'V',
            ElementKind::Switch(_) => 'W',
        }
    }
}

/// A two-terminal element. Positive current flows into `pos` and out of `neg`.
#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    pub name: String,
    pub pos: NodeId,
    pub neg: NodeId,
    pub kind: ElementKind,
}

impl Element {
    pub fn resistor(name: impl Into<String>, pos: &str, neg: &str, ohms: f64) -> Self {
        Self::new(name, pos, neg, ElementKind::Resistor { ohms })
    }

    pub fn inductor(name: impl Into<String>, pos: &str, neg: &str, henries: f64) -> Self {
        Self::new(
            name,
            pos,
            neg,
            ElementKind::Inductor {
                henries,
                initial_current: 0.0,
            },
        )
    }

    pub fn capacitor(name: impl Into<String>, pos: &str, neg: &str, farads: f64) -> Self {
        Self::new(
            name,
            pos,
            neg,
            ElementKind::Capacitor {
                farads,
                initial_voltage: 0.0,
            },
        )
    }

    pub fn vsource(name: impl Into<String>, pos: &str, neg: &str, spec: SourceSpec) -> Self {
        Self::new(name, pos, neg, ElementKind::VSource(spec))
    }

    pub fn switch(name: impl Into<String>, pos: &str, neg: &str, model: SwitchModel) -> Self {
        Self::new(name, pos, neg, ElementKind::Switch(model))
    }

    pub fn new(name: impl Into<String>, pos: &str, neg: &str, kind: ElementKind) -> Self {
        Element {
            name: name.into(),
            pos: NodeId::new(pos),
            neg: NodeId::new(neg),
            kind,
        }
    }

    /// All node references, conduction terminals first.
    pub fn terminals(&self) -> Vec<&NodeId> {
        let mut t = vec![&self.pos, &self.neg];
        if let ElementKind::Switch(sw) = &self.kind {
            t.push(&sw.control.0);
            t.push(&sw.control.1);
        }
        t
    }
}

/// `.tran` card contents.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TranSpec {
    pub dt: f64,
    pub t_stop: f64,
}

/// A circuit: node set (ground first, then first-reference order), elements
/// in insertion order, and global `.ic` overrides.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Circuit {
    nodes: Vec<NodeId>,
    pub elements: Vec<Element>,
    /// `.ic v(node)=...` overrides.
    pub node_ics: BTreeMap<NodeId, f64>,
    /// `.ic i(L)=...` overrides.
    pub inductor_ics: BTreeMap<String, f64>,
    pub tran: Option<TranSpec>,
}

impl Circuit {
    pub fn new() -> Self {
        Circuit {
            nodes: vec![NodeId::ground()],
            ..Default::default()
        }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn has_node(&self, n: &NodeId) -> bool {
        self.nodes.contains(n)
    }

    /// Registers a node label if it is not already present.
    pub fn add_node(&mut self, n: &NodeId) {
        if !self.nodes.contains(n) {
            self.nodes.push(n.clone());
        }
    }

    /// Appends an element, registering any new node labels it references.
    pub fn add(&mut self, e: Element) -> &mut Self {
        for t in e.terminals() {
            let t = t.clone();
            self.add_node(&t);
        }
        self.elements.push(e);
        self
    }

    pub fn element(&self, name: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.name == name)
    }

    pub fn element_mut(&mut self, name: &str) -> Option<&mut Element> {
        self.elements.iter_mut().find(|e| e.name == name)
    }

    /// Appends every element of `other` (and its `.ic` entries).
    pub fn merge(&mut self, other: &Circuit) {
        for n in &other.nodes {
            self.add_node(n);
        }
        for e in &other.elements {
            self.elements.push(e.clone());
        }
        self.node_ics
            .extend(other.node_ics.iter().map(|(k, v)| (k.clone(), *v)));
        self.inductor_ics
            .extend(other.inductor_ics.iter().map(|(k, v)| (k.clone(), *v)));
    }

    /// Effective initial voltage across a capacitor: `.ic` node overrides win
    /// when both terminals are pinned (ground counts as pinned at 0 V).
    pub fn capacitor_initial_voltage(&self, e: &Element) -> Option<f64> {
        let ElementKind::Capacitor {
            initial_voltage, ..
        } = &e.kind
        else {
            return None;
        };
        let pinned = |n: &NodeId| {
            if n.is_ground() {
                Some(0.0)
            } else {
                self.node_ics.get(n).copied()
            }
        };
        let pos = pinned(&e.pos);
        let neg = pinned(&e.neg);
        let overridden = (self.node_ics.contains_key(&e.pos) || self.node_ics.contains_key(&e.neg))
            && pos.is_some()
            && neg.is_some();
        if overridden {
            Some(pos.unwrap() - neg.unwrap())
        } else {
            Some(*initial_voltage)
        }
    }

    /// Effective initial inductor current (`.ic i(L)` wins).
    pub fn inductor_initial_current(&self, e: &Element) -> Option<f64> {
        let ElementKind::Inductor {
            initial_current, ..
        } = &e.kind
        else {
            return None;
        };
        Some(
            self.inductor_ics
                .get(&e.name)
                .copied()
                .unwrap_or(*initial_current),
        )
    }

    /// Sets the initial voltage of every capacitor between `node` and ground.
    pub fn set_node_capacitor_ic(&mut self, node: &NodeId, volts: f64) {
        for e in &mut self.elements {
            if let ElementKind::Capacitor {
                initial_voltage, ..
            } = &mut e.kind
            {
                if &e.pos == node && e.neg.is_ground() {
                    *initial_voltage = volts;
                } else if &e.neg == node && e.pos.is_ground() {
                    *initial_voltage = -volts;
                }
            }
        }
    }

    /// Copy of the circuit keeping only inductors and capacitors.
    pub fn lc_skeleton(&self) -> Circuit {
        let mut out = Circuit::new();
        for e in &self.elements {
            if matches!(
                e.kind,
                ElementKind::Inductor { .. } | ElementKind::Capacitor { .. }
            ) {
                out.add(e.clone());
            }
        }
        out
    }
}
