//! Fixed-step transient simulation by modified nodal analysis.
//!
//! Unknowns are the non-ground node voltages followed by one branch current
//! per inductor and per voltage source. Capacitors and inductors use
//! trapezoidal or backward-Euler companion models. Switches are
//! piecewise-constant conductances whose state is re-evaluated each step from
//! the candidate solution and iterated to a fixed point.
//!
//! The system matrix depends only on the step size and the switch states, so
//! factorizations are cached by switch-state pattern.

mod energy;
mod lu;
mod trace;

pub use energy::{
    cumulative_dissipation, energy_audit, stored_energy_series, AuditError, EnergyReport,
};
pub use lu::{DenseMatrix, LuFactors};
pub use trace::{interp, Trace};

use std::collections::HashMap;
use std::rc::Rc;

use indexmap::IndexMap;
use thiserror::Error;

use crate::circuit::{validate, Circuit, Diagnostic, ElementKind, NodeId, Severity, SourceSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Trapezoidal,
    BackwardEuler,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_stop: f64,
    pub method: Method,
    pub switch_iteration_limit: usize,
    pub record_stride: usize,
}

impl SimConfig {
    /// Trapezoidal, iteration limit 10, every step recorded.
    pub fn new(dt: f64, t_stop: f64) -> Self {
        SimConfig {
            dt,
            t_stop,
            method: Method::Trapezoidal,
            switch_iteration_limit: 10,
            record_stride: 1,
        }
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    fn check(&self) -> Result<(), EngineError> {
        let ok = self.dt.is_finite()
            && self.t_stop.is_finite()
            && self.dt > 0.0
            && self.dt < self.t_stop
            && self.switch_iteration_limit >= 1
            && self.record_stride >= 1;
        if ok {
            Ok(())
        } else {
            Err(EngineError::InvalidConfig(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid circuit: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidCircuit(Vec<Diagnostic>),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("singular system matrix at t = {time:e} s (unknown '{unknown}')")]
    Singular { time: f64, unknown: String },
    #[error("switch states did not converge within {limit} iterations at t = {time:e} s")]
    NonConvergence { time: f64, limit: usize },
}

/// Step of the pinning solve used to build a consistent initial state,
/// as a fraction of `dt`.
const PIN_FRACTION: f64 = 1e-6;

struct Switch {
    a: Option<usize>,
    b: Option<usize>,
    ca: Option<usize>,
    cb: Option<usize>,
    g_on: f64,
    g_off: f64,
    vth: f64,
    polarity: crate::circuit::Polarity,
}

enum Stamp {
    Conductance {
        a: Option<usize>,
        b: Option<usize>,
        g: f64,
    },
    Capacitor {
        a: Option<usize>,
        b: Option<usize>,
        c: f64,
        state: usize,
    },
    Inductor {
        a: Option<usize>,
        b: Option<usize>,
        l: f64,
        branch: usize,
        state: usize,
    },
    Source {
        a: Option<usize>,
        b: Option<usize>,
        branch: usize,
        spec: SourceSpec,
    },
    Switch(usize),
}

struct System {
    n_nodes: usize,
    dim: usize,
    stamps: Vec<Stamp>,
    switches: Vec<Switch>,
    unknown_names: Vec<String>,
}

impl System {
    fn build(c: &Circuit) -> Self {
        let node_list: Vec<&NodeId> = c.nodes().iter().filter(|n| !n.is_ground()).collect();
        let index: HashMap<&NodeId, usize> =
            node_list.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let idx = |n: &NodeId| index.get(n).copied();
        let n_nodes = node_list.len();
        let mut unknown_names: Vec<String> = node_list.iter().map(|n| n.0.clone()).collect();
        let mut stamps = Vec::with_capacity(c.elements.len());
        let mut switches = Vec::new();
        let (mut n_caps, mut n_inds) = (0, 0);
        for e in &c.elements {
            let (a, b) = (idx(&e.pos), idx(&e.neg));
            let stamp = match &e.kind {
                ElementKind::Resistor { ohms } => Stamp::Conductance { a, b, g: 1.0 / ohms },
                ElementKind::Capacitor { farads, .. } => {
                    n_caps += 1;
                    Stamp::Capacitor {
                        a,
                        b,
                        c: *farads,
                        state: n_caps - 1,
                    }
                }
                ElementKind::Inductor { henries, .. } => {
                    n_inds += 1;
                    unknown_names.push(format!("i({})", e.name));
                    Stamp::Inductor {
                        a,
                        b,
                        l: *henries,
                        branch: unknown_names.len() - 1,
                        state: n_inds - 1,
                    }
                }
                ElementKind::VSource(spec) => {
                    unknown_names.push(format!("i({})", e.name));
                    Stamp::Source {
                        a,
                        b,
                        branch: unknown_names.len() - 1,
                        spec: spec.clone(),
                    }
                }
                ElementKind::Switch(sw) => {
                    switches.push(Switch {
                        a,
                        b,
                        ca: idx(&sw.control.0),
                        cb: idx(&sw.control.1),
                        g_on: 1.0 / sw.r_on,
                        g_off: 1.0 / sw.r_off,
                        vth: sw.v_threshold,
                        polarity: sw.polarity,
                    });
                    Stamp::Switch(switches.len() - 1)
                }
            };
            stamps.push(stamp);
        }
        let dim = unknown_names.len();
        System {
            n_nodes,
            dim,
            stamps,
            switches,
            unknown_names,
        }
    }

    fn matrix(&self, h: f64, method: Method, states: &[bool]) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.dim);
        let k = match method {
            Method::Trapezoidal => 2.0,
            Method::BackwardEuler => 1.0,
        };
        let conductance = |m: &mut DenseMatrix, a: Option<usize>, b: Option<usize>, g: f64| {
            if let Some(a) = a {
                m.add(a, a, g);
            }
            if let Some(b) = b {
                m.add(b, b, g);
            }
            if let (Some(a), Some(b)) = (a, b) {
                m.add(a, b, -g);
                m.add(b, a, -g);
            }
        };
        let branch = |m: &mut DenseMatrix, a: Option<usize>, b: Option<usize>, br: usize| {
            if let Some(a) = a {
                m.add(a, br, 1.0);
                m.add(br, a, 1.0);
            }
            if let Some(b) = b {
                m.add(b, br, -1.0);
                m.add(br, b, -1.0);
            }
        };
        for s in &self.stamps {
            match s {
                Stamp::Conductance { a, b, g } => conductance(&mut m, *a, *b, *g),
                Stamp::Capacitor { a, b, c, .. } => conductance(&mut m, *a, *b, k * c / h),
                Stamp::Inductor {
                    a, b, l, branch: br, ..
                } => {
                    branch(&mut m, *a, *b, *br);
                    m.add(*br, *br, -k * l / h);
                }
                Stamp::Source { a, b, branch: br, .. } => branch(&mut m, *a, *b, *br),
                Stamp::Switch(si) => {
                    let sw = &self.switches[*si];
                    let g = if states[*si] { sw.g_on } else { sw.g_off };
                    conductance(&mut m, sw.a, sw.b, g);
                }
            }
        }
        m
    }

    fn switch_states(&self, x: &[f64]) -> Vec<bool> {
        let v = |i: Option<usize>| i.map_or(0.0, |i| x[i]);
        self.switches
            .iter()
            .map(|sw| sw.polarity.conducts(v(sw.ca) - v(sw.cb), sw.vth))
            .collect()
    }
}

/// Reactive element history carried between steps.
#[derive(Clone)]
struct ReactiveState {
    cap_v: Vec<f64>,
    cap_i: Vec<f64>,
    ind_i: Vec<f64>,
    ind_v: Vec<f64>,
}

fn rhs(sys: &System, st: &ReactiveState, h: f64, method: Method, t: f64) -> Vec<f64> {
    let mut b = vec![0.0; sys.dim];
    let inject = |b: &mut Vec<f64>, a: Option<usize>, bn: Option<usize>, i: f64| {
        if let Some(a) = a {
            b[a] += i;
        }
        if let Some(bn) = bn {
            b[bn] -= i;
        }
    };
    for s in &sys.stamps {
        match s {
            Stamp::Capacitor { a, b: bn, c, state } => {
                let hist = match method {
                    Method::BackwardEuler => c / h * st.cap_v[*state],
                    Method::Trapezoidal => 2.0 * c / h * st.cap_v[*state] + st.cap_i[*state],
                };
                inject(&mut b, *a, *bn, hist);
            }
            Stamp::Inductor {
                l, branch, state, ..
            } => {
                b[*branch] = match method {
                    Method::BackwardEuler => -l / h * st.ind_i[*state],
                    Method::Trapezoidal => -2.0 * l / h * st.ind_i[*state] - st.ind_v[*state],
                };
            }
            Stamp::Source { branch, spec, .. } => b[*branch] = spec.value_at(t),
            _ => {}
        }
    }
    b
}

struct Stepper<'a> {
    sys: &'a System,
    cache: HashMap<(u8, Vec<bool>), Rc<LuFactors>>,
    limit: usize,
}

const CACHE_CAPACITY: usize = 4096;

impl<'a> Stepper<'a> {
    fn factors(
        &mut self,
        h: f64,
        method: Method,
        tag: u8,
        states: &[bool],
        t: f64,
    ) -> Result<Rc<LuFactors>, EngineError> {
        if let Some(f) = self.cache.get(&(tag, states.to_vec())) {
            return Ok(f.clone());
        }
        let m = self.sys.matrix(h, method, states);
        let f = LuFactors::factor(&m).map_err(|col| EngineError::Singular {
            time: t,
            unknown: self.sys.unknown_names[col].clone(),
        })?;
        if self.cache.len() >= CACHE_CAPACITY {
            self.cache.clear();
        }
        let f = Rc::new(f);
        self.cache.insert((tag, states.to_vec()), f.clone());
        Ok(f)
    }

    /// Solves one step, iterating switch states to a fixed point.
    ///
    /// When the iteration revisits an earlier state vector, the switches
    /// that flip within that cycle are held at their state from the start
    /// of the step and the remaining switches keep iterating.
    fn solve(
        &mut self,
        st: &ReactiveState,
        h: f64,
        method: Method,
        tag: u8,
        t: f64,
        states: &mut Vec<bool>,
    ) -> Result<Vec<f64>, EngineError> {
        let b = rhs(self.sys, st, h, method, t);
        let start = states.clone();
        let mut held = vec![false; states.len()];
        let mut seen: Vec<Vec<bool>> = Vec::new();
        for _ in 0..self.limit {
            let f = self.factors(h, method, tag, states, t)?;
            let x = f.solve(&b);
            let mut next = self.sys.switch_states(&x);
            for (i, h) in held.iter().enumerate() {
                if *h {
                    next[i] = start[i];
                }
            }
            if &next == states {
                return Ok(x);
            }
            if let Some(k) = seen.iter().position(|s| *s == next) {
                for cyc in seen[k..].iter().chain(std::iter::once(&*states)) {
                    for (i, (a, b)) in cyc.iter().zip(&next).enumerate() {
                        held[i] |= a != b;
                    }
                }
                for (i, h) in held.iter().enumerate() {
                    if *h {
                        next[i] = start[i];
                    }
                }
                seen.clear();
            }
            seen.push(std::mem::replace(states, next));
        }
        Err(EngineError::NonConvergence {
            time: t,
            limit: self.limit,
        })
    }
}

fn advance(sys: &System, st: &mut ReactiveState, x: &[f64], h: f64, method: Method) {
    let v = |i: Option<usize>| i.map_or(0.0, |i| x[i]);
    for s in &sys.stamps {
        match s {
            Stamp::Capacitor { a, b, c, state } => {
                let vn = v(*a) - v(*b);
                let i = match method {
                    Method::BackwardEuler => c / h * (vn - st.cap_v[*state]),
                    Method::Trapezoidal => {
                        2.0 * c / h * (vn - st.cap_v[*state]) - st.cap_i[*state]
                    }
                };
                st.cap_v[*state] = vn;
                st.cap_i[*state] = i;
            }
            Stamp::Inductor {
                a, b, branch, state, ..
            } => {
                st.ind_v[*state] = v(*a) - v(*b);
                st.ind_i[*state] = x[*branch];
            }
            _ => {}
        }
    }
}

struct Recorder {
    times: Vec<f64>,
    volts: Vec<Vec<f64>>,
    currents: Vec<Vec<f64>>,
}

impl Recorder {
    fn record(&mut self, sys: &System, st: &ReactiveState, x: &[f64], states: &[bool], t: f64) {
        self.times.push(t);
        for (i, col) in self.volts.iter_mut().enumerate() {
            col.push(x[i]);
        }
        let v = |i: Option<usize>| i.map_or(0.0, |i| x[i]);
        for (k, s) in sys.stamps.iter().enumerate() {
            let i = match s {
                Stamp::Conductance { a, b, g } => g * (v(*a) - v(*b)),
                Stamp::Capacitor { state, .. } => st.cap_i[*state],
                Stamp::Inductor { branch, .. } | Stamp::Source { branch, .. } => x[*branch],
                Stamp::Switch(si) => {
                    let sw = &sys.switches[*si];
                    let g = if states[*si] { sw.g_on } else { sw.g_off };
                    g * (v(sw.a) - v(sw.b))
                }
            };
            self.currents[k].push(i);
        }
    }
}

/// Runs a transient simulation.
///
/// Initial conditions come from capacitor `ic=` values, inductor `ic=`
/// values and `.ic` overrides. A consistent starting point (node voltages,
/// capacitor currents, inductor voltages) is obtained from a short
/// backward-Euler solve that pins every reactive element to its initial value.
pub fn simulate(c: &Circuit, cfg: &SimConfig) -> Result<Trace, EngineError> {
    cfg.check()?;
    let errors: Vec<Diagnostic> = validate(c)
        .into_iter()
        .filter(|d| d.severity == Severity::Error)
        .collect();
    if !errors.is_empty() {
        return Err(EngineError::InvalidCircuit(errors));
    }

    let sys = System::build(c);
    let mut st = ReactiveState {
        cap_v: Vec::new(),
        cap_i: Vec::new(),
        ind_i: Vec::new(),
        ind_v: Vec::new(),
    };
    for e in &c.elements {
        if let Some(v) = c.capacitor_initial_voltage(e) {
            st.cap_v.push(v);
            st.cap_i.push(0.0);
        }
        if let Some(i) = c.inductor_initial_current(e) {
            st.ind_i.push(i);
            st.ind_v.push(0.0);
        }
    }

    let mut stepper = Stepper {
        sys: &sys,
        cache: HashMap::new(),
        limit: cfg.switch_iteration_limit,
    };

    // Consistent initial point.
    let h0 = cfg.dt * PIN_FRACTION;
    let mut states = vec![false; sys.switches.len()];
    let x0 = {
        // seed switch states from the pinned solution with all switches off
        let probe = stepper.solve(&st, h0, Method::BackwardEuler, 0, 0.0, &mut states);
        match probe {
            Ok(x) => x,
            Err(EngineError::NonConvergence { .. }) => {
                states = vec![false; sys.switches.len()];
                stepper.limit = cfg.switch_iteration_limit.max(50);
                let x = stepper.solve(&st, h0, Method::BackwardEuler, 0, 0.0, &mut states)?;
                stepper.limit = cfg.switch_iteration_limit;
                x
            }
            Err(e) => return Err(e),
        }
    };
    advance(&sys, &mut st, &x0, h0, Method::BackwardEuler);
    stepper.cache.clear();

    let steps = (cfg.t_stop / cfg.dt).round() as usize;
    let n_records = steps / cfg.record_stride + 1;
    let mut rec = Recorder {
        times: Vec::with_capacity(n_records),
        volts: vec![Vec::with_capacity(n_records); sys.n_nodes],
        currents: vec![Vec::with_capacity(n_records); sys.stamps.len()],
    };
    rec.record(&sys, &st, &x0, &states, 0.0);

    for n in 1..=steps {
        let t = n as f64 * cfg.dt;
        let x = stepper.solve(&st, cfg.dt, cfg.method, 1, t, &mut states)?;
        advance(&sys, &mut st, &x, cfg.dt, cfg.method);
        if n % cfg.record_stride == 0 {
            rec.record(&sys, &st, &x, &states, t);
        }
    }

    let node_names = c.nodes().iter().filter(|n| !n.is_ground());
    let node_voltages: IndexMap<String, Vec<f64>> = node_names
        .map(|n| n.0.clone())
        .zip(rec.volts)
        .collect();
    let element_currents: IndexMap<String, Vec<f64>> = c
        .elements
        .iter()
        .map(|e| e.name.clone())
        .zip(rec.currents)
        .collect();
    Ok(Trace {
        times: rec.times,
        node_voltages,
        element_currents,
    })
}
