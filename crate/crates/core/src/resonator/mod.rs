//! Quad (4LC) resonator and checkerboard array builders, quadrature
//! initialization, drive attachment and LC eigenmode analysis.

mod modes;

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{Circuit, Element, ElementKind, NodeId, SourceSpec};

pub use modes::{eigenmodes, mode_energies, modes_to_json, Mode, ModeEnergies, ModeRecord};
use modes::LcNetwork;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResonatorError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("element '{0}' is not an inductor or capacitor")]
    NonLcElement(String),
    #[error("singular capacitance matrix at node '{0}'")]
    SingularCapacitance(String),
    #[error("no quadrature-like mode: best candidate at {omega:.6e} rad/s has phase residual {residual_deg:.2} deg")]
    NoQuadratureMode { omega: f64, residual_deg: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid drive: {0}")]
    InvalidDrive(String),
}

/// Quad resonator: four inductors on the ring P0-P1-P2-P3-P0, one load
/// capacitor per node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    pub inductance: f64,
    pub phase_loads: [f64; 4],
    pub amplitude: f64,
}

impl QuadSpec {
    pub fn symmetric(inductance: f64, load: f64, amplitude: f64) -> Self {
        QuadSpec {
            inductance,
            phase_loads: [load; 4],
            amplitude,
        }
    }

    /// ω of the quadrature mode for symmetric loads, √(2/(L·C)).
    pub fn quadrature_omega(&self) -> f64 {
        let c = self.phase_loads.iter().sum::<f64>() / 4.0;
        (2.0 / (self.inductance * c)).sqrt()
    }
}

/// n×n checkerboard of quads sharing corner nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArraySpec {
    pub n: usize,
    pub inductance: f64,
    pub load_per_node: f64,
    pub amplitude: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveScheme {
    TwoPhase,
    FourPhase,
}

impl DriveScheme {
    pub fn phase_classes(self) -> &'static [usize] {
        match self {
            DriveScheme::TwoPhase => &[0, 1],
            DriveScheme::FourPhase => &[0, 1, 2, 3],
        }
    }
}

fn positive(what: &str, v: f64) -> Result<(), ResonatorError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ResonatorError::InvalidSpec(format!("{what} must be > 0, got {v}")))
    }
}

pub fn build_quad(spec: &QuadSpec) -> Result<Circuit, ResonatorError> {
    positive("inductance", spec.inductance)?;
    for (k, c) in spec.phase_loads.iter().enumerate() {
        positive(&format!("C{k}"), *c)?;
    }
    let mut c = Circuit::new();
    for k in 0..4 {
        let (a, b) = (format!("P{k}"), format!("P{}", (k + 1) % 4));
        c.add(Element::inductor(format!("L{k}{}", (k + 1) % 4), &a, &b, spec.inductance));
    }
    for (k, load) in spec.phase_loads.iter().enumerate() {
        c.add(Element::capacitor(format!("C{k}"), &format!("P{k}"), "0", *load));
    }
    Ok(c)
}

/// Phase class of the checkerboard node at grid position `(r, c)`.
pub fn array_phase(r: usize, c: usize) -> usize {
    [[0, 1], [3, 2]][r % 2][c % 2]
}

/// Label of array node `(r, c)`: `P{phase}_{r}_{c}`.
pub fn array_node(r: usize, c: usize) -> String {
    format!("P{}_{r}_{c}", array_phase(r, c))
}

pub fn build_array(spec: &ArraySpec) -> Result<Circuit, ResonatorError> {
    if spec.n == 0 {
        return Err(ResonatorError::InvalidSpec("n must be >= 1".into()));
    }
    positive("inductance", spec.inductance)?;
    positive("load_per_node", spec.load_per_node)?;
    let n = spec.n;
    let mut c = Circuit::new();
    let edge = |on_perimeter: bool| {
        if on_perimeter {
            2.0 * spec.inductance
        } else {
            spec.inductance
        }
    };
    for r in 0..=n {
        for col in 0..=n {
            if col < n {
                c.add(Element::inductor(
                    format!("LH_{r}_{col}"),
                    &array_node(r, col),
                    &array_node(r, col + 1),
                    edge(r == 0 || r == n),
                ));
            }
            if r < n {
                c.add(Element::inductor(
                    format!("LV_{r}_{col}"),
                    &array_node(r, col),
                    &array_node(r + 1, col),
                    edge(col == 0 || col == n),
                ));
            }
        }
    }
    for r in 0..=n {
        for col in 0..=n {
            c.add(Element::capacitor(
                format!("C_{r}_{col}"),
                &array_node(r, col),
                "0",
                spec.load_per_node,
            ));
        }
    }
    Ok(c)
}

/// Phase class (0..=3) encoded in a node label `P{k}` or `P{k}_...`.
pub fn phase_class(node: &str) -> Option<usize> {
    let rest = node.strip_prefix('P')?;
    let mut chars = rest.chars();
    let k = chars.next()?.to_digit(10)? as usize;
    match chars.next() {
        None | Some('_') if k < 4 => Some(k),
        _ => None,
    }
}

/// Relative ω spread within which modes are treated as one degenerate
/// cluster when matching the quadrature pattern.
const CLUSTER_SPREAD: f64 = 0.05;
/// Largest accepted node phase error, degrees.
pub const QUADRATURE_TOLERANCE_DEG: f64 = 5.0;

/// Result of searching the spectrum for the checkerboard quadrature mode.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureMatch {
    pub omega: f64,
    pub residual_deg: f64,
    /// Indices into the eigenmode list forming the matched cluster.
    pub modes: Vec<usize>,
}

fn wrap_deg(d: f64) -> f64 {
    let r = (d + 180.0).rem_euclid(360.0) - 180.0;
    if r == -180.0 {
        180.0
    } else {
        r
    }
}

/// Finds the eigenmode cluster closest to the quadrature pattern
/// `v_n = cos(ωt − k_n·90°)`, with `k_n` the node's phase class.
pub fn find_quadrature_mode(c: &Circuit) -> Result<QuadratureMatch, ResonatorError> {
    let skel = c.lc_skeleton();
    let modes = eigenmodes(&skel)?;
    let net = LcNetwork::from_circuit(&skel, true)?;
    let theta: Vec<Option<f64>> = net
        .nodes
        .iter()
        .map(|n| phase_class(n).map(|k| k as f64 * PI / 2.0))
        .collect();
    if theta.iter().all(Option::is_none) {
        return Err(ResonatorError::InvalidSpec("no phase-labelled nodes".into()));
    }
    let n = net.nodes.len();
    let target_re = DVector::from_iterator(n, theta.iter().map(|t| t.map_or(0.0, f64::cos)));
    let target_im = DVector::from_iterator(n, theta.iter().map(|t| t.map_or(0.0, |t| -t.sin())));
    let shapes: Vec<DVector<f64>> = modes
        .iter()
        .map(|m| DVector::from_iterator(n, net.nodes.iter().map(|node| m.shape[node])))
        .collect();
    let c_re = &net.cap * &target_re;
    let c_im = &net.cap * &target_im;

    let mut best: Option<QuadratureMatch> = None;
    let mut i = 0;
    while i < modes.len() {
        let mut j = i + 1;
        while j < modes.len() && modes[j].omega - modes[i].omega <= CLUSTER_SPREAD * modes[i].omega {
            j += 1;
        }
        if modes[i].omega > 0.0 {
            let mut p_re = DVector::zeros(n);
            let mut p_im = DVector::zeros(n);
            for x in &shapes[i..j] {
                p_re += x * x.dot(&c_re);
                p_im += x * x.dot(&c_im);
            }
            let residual = theta
                .iter()
                .enumerate()
                .filter_map(|(k, t)| t.map(|t| (k, t)))
                .map(|(k, t)| {
                    let ang = (-p_im[k]).atan2(p_re[k]);
                    wrap_deg((ang - t).to_degrees()).abs()
                })
                .fold(0.0, f64::max);
            let omega = modes[i..j].iter().map(|m| m.omega).sum::<f64>() / (j - i) as f64;
            if best.as_ref().is_none_or(|b| residual < b.residual_deg) {
                best = Some(QuadratureMatch {
                    omega,
                    residual_deg: residual,
                    modes: (i..j).collect(),
                });
            }
        }
        i = j;
    }
    best.ok_or(ResonatorError::NoQuadratureMode {
        omega: 0.0,
        residual_deg: 180.0,
    })
}

/// Sets capacitor voltages to `amplitude·cos(k_n·90°)` and inductor
/// currents to the values the matched quadrature mode carries at t = 0.
pub fn quadrature_ic(c: &Circuit, amplitude: f64) -> Result<Circuit, ResonatorError> {
    let m = find_quadrature_mode(c)?;
    if m.residual_deg > QUADRATURE_TOLERANCE_DEG {
        return Err(ResonatorError::NoQuadratureMode {
            omega: m.omega,
            residual_deg: m.residual_deg,
        });
    }
    let skel = c.lc_skeleton();
    let modes = eigenmodes(&skel)?;
    let net = LcNetwork::from_circuit(&skel, true)?;
    let n = net.nodes.len();
    let sin_t = DVector::from_iterator(
        n,
        net.nodes
            .iter()
            .map(|node| phase_class(node).map_or(0.0, |k| -(k as f64 * PI / 2.0).sin())),
    );
    let c_im = &net.cap * &sin_t;
    // Node flux at t = 0, mode by mode: φ = Σ x_k (x_kᵀ C im) A / ω_k.
    let mut flux = DVector::zeros(n);
    for &k in &m.modes {
        let x = DVector::from_iterator(n, net.nodes.iter().map(|node| modes[k].shape[node]));
        let w = x.dot(&c_im) * amplitude / modes[k].omega;
        flux += x * w;
    }
    let node_flux = |id: &NodeId| -> f64 {
        net.nodes
            .iter()
            .position(|n| n == id.as_str())
            .map_or(0.0, |i| flux[i])
    };

    let mut out = c.clone();
    for node in c.nodes().iter().filter(|n| !n.is_ground()) {
        if let Some(k) = phase_class(node.as_str()) {
            let v = amplitude * (k as f64 * PI / 2.0).cos();
            out.set_node_capacitor_ic(node, if v.abs() < 1e-15 * amplitude.abs() { 0.0 } else { v });
            out.node_ics.remove(node);
        }
    }
    for e in &mut out.elements {
        if let ElementKind::Inductor {
            henries,
            initial_current,
        } = &mut e.kind
        {
            *initial_current = (node_flux(&e.pos) - node_flux(&e.neg)) / *henries;
            out.inductor_ics.remove(&e.name);
        }
    }
    Ok(out)
}

/// SPICE sine phase (degrees) that makes the drive for class `k` equal
/// `amplitude·cos(ωt − k·90°)`.
pub fn drive_phase_deg(k: usize) -> f64 {
    90.0 - 90.0 * k as f64
}

/// Adds one sine source per driven phase class (`VDRV{k}` on node
/// `drv{k}`) and a resistor `RDRV_{node}` from it to every node of that class.
pub fn attach_drive(
    c: &Circuit,
    scheme: DriveScheme,
    amplitude: f64,
    frequency: f64,
    r_drive: f64,
) -> Result<Circuit, ResonatorError> {
    if !(r_drive.is_finite() && r_drive > 0.0) {
        return Err(ResonatorError::InvalidDrive(format!(
            "r_drive must be > 0, got {r_drive}"
        )));
    }
    if !(frequency.is_finite() && frequency > 0.0) {
        return Err(ResonatorError::InvalidDrive(format!(
            "frequency must be > 0, got {frequency}"
        )));
    }
    let mut out = c.clone();
    for &k in scheme.phase_classes() {
        let targets: Vec<NodeId> = c
            .nodes()
            .iter()
            .filter(|n| phase_class(n.as_str()) == Some(k))
            .cloned()
            .collect();
        if targets.is_empty() {
            return Err(ResonatorError::InvalidDrive(format!("no P{k} nodes to drive")));
        }
        let src = format!("drv{k}");
        out.add(Element::vsource(
            format!("VDRV{k}"),
            &src,
            "0",
            SourceSpec::sine(0.0, amplitude, frequency, drive_phase_deg(k)),
        ));
        for t in targets {
            out.add(Element::resistor(format!("RDRV_{t}"), &src, t.as_str(), r_drive));
        }
    }
    Ok(out)
}
