use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::ResonatorError;
use crate::circuit::{Circuit, ElementKind};
use crate::engine::Trace;

/// One free oscillation of an LC network. `shape` is C-orthonormal.
#[derive(Clone, Debug, PartialEq)]
pub struct Mode {
    pub omega: f64,
    pub shape: IndexMap<String, f64>,
}

impl Mode {
    pub fn freq_hz(&self) -> f64 {
        self.omega / (2.0 * std::f64::consts::PI)
    }
}

/// JSON record of a mode: `{ omega_rad_s, freq_hz, shape: {node: value} }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeRecord {
    pub omega_rad_s: f64,
    pub freq_hz: f64,
    pub shape: IndexMap<String, f64>,
}

impl From<&Mode> for ModeRecord {
    fn from(m: &Mode) -> Self {
        ModeRecord {
            omega_rad_s: m.omega,
            freq_hz: m.freq_hz(),
            shape: m.shape.clone(),
        }
    }
}

pub fn modes_to_json(modes: &[Mode]) -> String {
    let records: Vec<ModeRecord> = modes.iter().map(ModeRecord::from).collect();
    serde_json::to_string_pretty(&records).expect("mode records serialize")
}

/// Node-space matrices of an LC network.
pub(crate) struct LcNetwork {
    pub nodes: Vec<String>,
    /// Inverse-inductance node Laplacian.
    pub gamma: DMatrix<f64>,
    /// Node capacitance matrix.
    pub cap: DMatrix<f64>,
    /// (name, pos index, neg index, henries); `None` is ground.
    pub inductors: Vec<(String, Option<usize>, Option<usize>, f64)>,
}

impl LcNetwork {
    /// Builds the network from the inductors and capacitors of `c`. With
    /// `strict`, any other element kind is rejected.
    pub fn from_circuit(c: &Circuit, strict: bool) -> Result<Self, ResonatorError> {
        let nodes: Vec<String> = c
            .nodes()
            .iter()
            .filter(|n| !n.is_ground())
            .map(|n| n.0.clone())
            .collect();
        let index = |name: &str| nodes.iter().position(|n| n == name);
        let n = nodes.len();
        let mut gamma = DMatrix::zeros(n, n);
        let mut cap = DMatrix::zeros(n, n);
        let mut inductors = Vec::new();
        let stamp = |m: &mut DMatrix<f64>, a: Option<usize>, b: Option<usize>, g: f64| {
            if let Some(a) = a {
                m[(a, a)] += g;
            }
            if let Some(b) = b {
                m[(b, b)] += g;
            }
            if let (Some(a), Some(b)) = (a, b) {
                m[(a, b)] -= g;
                m[(b, a)] -= g;
            }
        };
        for e in &c.elements {
            let (a, b) = (index(e.pos.as_str()), index(e.neg.as_str()));
            match &e.kind {
                ElementKind::Inductor { henries, .. } => {
                    stamp(&mut gamma, a, b, 1.0 / henries);
                    inductors.push((e.name.clone(), a, b, *henries));
                }
                ElementKind::Capacitor { farads, .. } => stamp(&mut cap, a, b, *farads),
                _ if strict => return Err(ResonatorError::NonLcElement(e.name.clone())),
                _ => {}
            }
        }
        Ok(LcNetwork {
            nodes,
            gamma,
            cap,
            inductors,
        })
    }
}

/// Solves `Γ x = ω² C x` for a circuit containing only inductors and
/// capacitors. Modes are sorted by ω; shapes are C-orthonormal with the
/// largest-magnitude entry made positive.
pub fn eigenmodes(c: &Circuit) -> Result<Vec<Mode>, ResonatorError> {
    let net = LcNetwork::from_circuit(c, true)?;
    let n = net.nodes.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let chol = net.cap.clone().cholesky().ok_or_else(|| {
        let worst = (0..n)
            .min_by(|&i, &j| net.cap[(i, i)].total_cmp(&net.cap[(j, j)]))
            .unwrap_or(0);
        ResonatorError::SingularCapacitance(net.nodes[worst].clone())
    })?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| ResonatorError::SingularCapacitance(net.nodes[0].clone()))?;
    let reduced = &l_inv * &net.gamma * l_inv.transpose();
    let sym = (&reduced + reduced.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let lam_max = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let floor = 1e-12 * lam_max.max(f64::MIN_POSITIVE);

    let mut modes: Vec<(f64, DVector<f64>)> = (0..n)
        .map(|k| {
            let lam = eig.eigenvalues[k];
            let lam = if lam.abs() <= floor { 0.0 } else { lam.max(0.0) };
            let x = l_inv.transpose() * eig.eigenvectors.column(k);
            (lam.sqrt(), x)
        })
        .collect();
    modes.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(modes
        .into_iter()
        .map(|(omega, mut x)| {
            let imax = x.iamax();
            if x[imax] < 0.0 {
                x.neg_mut();
            }
            Mode {
                omega,
                shape: net.nodes.iter().cloned().zip(x.iter().copied()).collect(),
            }
        })
        .collect())
}

/// Per-mode energy time series.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeEnergies {
    pub times: Vec<f64>,
    /// `energies[k][s]` is mode `k`'s energy at sample `s`.
    pub energies: Vec<Vec<f64>>,
}

impl ModeEnergies {
    pub fn total(&self) -> Vec<f64> {
        let mut t = vec![0.0; self.times.len()];
        for e in &self.energies {
            for (a, b) in t.iter_mut().zip(e) {
                *a += b;
            }
        }
        t
    }
}

/// Projects the recorded state of `c`'s LC skeleton onto `modes`.
///
/// With node-flux coordinates `q_k`, `q̇_k = x_kᵀ C v` and
/// `ω_k² q_k = x_kᵀ A i_L`, so each mode carries `½(q̇_k² + ω_k² q_k²)`.
pub fn mode_energies(c: &Circuit, tr: &Trace, modes: &[Mode]) -> Result<ModeEnergies, ResonatorError> {
    let net = LcNetwork::from_circuit(&c.lc_skeleton(), false)?;
    let n = net.nodes.len();
    for m in modes {
        if m.shape.len() != n || net.nodes.iter().any(|node| !m.shape.contains_key(node)) {
            return Err(ResonatorError::Dimension(
                "mode shape does not match the circuit's LC nodes".into(),
            ));
        }
    }
    let volts: Vec<&[f64]> = net
        .nodes
        .iter()
        .map(|node| {
            tr.voltage(node)
                .ok_or_else(|| ResonatorError::Dimension(format!("node '{node}' not in trace")))
        })
        .collect::<Result<_, _>>()?;
    let currents: Vec<&[f64]> = net
        .inductors
        .iter()
        .map(|(name, ..)| {
            tr.current(name)
                .ok_or_else(|| ResonatorError::Dimension(format!("inductor '{name}' not in trace")))
        })
        .collect::<Result<_, _>>()?;
    // Row vectors x_kᵀ C for the velocity projection.
    let shapes: Vec<DVector<f64>> = modes
        .iter()
        .map(|m| DVector::from_iterator(n, net.nodes.iter().map(|node| m.shape[node])))
        .collect();
    let weighted: Vec<DVector<f64>> = shapes.iter().map(|x| &net.cap * x).collect();

    let samples = tr.len();
    let mut energies = vec![vec![0.0; samples]; modes.len()];
    let mut v = DVector::zeros(n);
    let mut ai = DVector::zeros(n);
    for s in 0..samples {
        for (i, col) in volts.iter().enumerate() {
            v[i] = col[s];
        }
        ai.fill(0.0);
        for ((_, a, b, _), col) in net.inductors.iter().zip(&currents) {
            if let Some(a) = a {
                ai[*a] += col[s];
            }
            if let Some(b) = b {
                ai[*b] -= col[s];
            }
        }
        for (k, m) in modes.iter().enumerate() {
            let qdot = weighted[k].dot(&v);
            let mut e = 0.5 * qdot * qdot;
            if m.omega > 0.0 {
                let p = shapes[k].dot(&ai);
                e += 0.5 * p * p / (m.omega * m.omega);
            }
            energies[k][s] = e;
        }
    }
    Ok(ModeEnergies {
        times: tr.times.clone(),
        energies,
    })
}
