//! Command-line front end. [`dispatch`] parses an argument vector, runs
//! one subcommand, prints a one-line summary and returns the exit code:
//! 0 success, 1 sustain check failed, 2 input error, 3 numerical failure.

mod overrides;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::circuit::{parse_netlist, parse_value, serialize_netlist};
use crate::engine::{energy_audit, simulate, EngineError, Method, SimConfig};
use crate::experiments::{
    adiabatic_scaling_study, run_sustain_check, sweep_drive_resistor, table_csv, table_json, DriveSpec,
    ExperimentError, InitialState, ResonatorSpec, Scenario, TableRow,
};
use crate::logic::GateParams;
use crate::planner::{chip_from_json, plan_report, process_from_json};
use crate::resonator::{eigenmodes, find_quadrature_mode, modes_to_json, ArraySpec, DriveScheme, QuadSpec};

pub use overrides::apply_override;

#[derive(Debug, Parser)]
#[command(name = "hkiclock", version, about = "Resonant power-clock simulation and HKI planning")]
struct Cli {
    /// Also write manifest.json (inputs, overrides, tool version) to the output directory.
    #[arg(long, global = true)]
    seed_manifest: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Transient simulation of a netlist.
    Sim(SimArgs),
    /// Sustain check of a resonator scenario.
    Resonator(ResonatorArgs),
    /// Eigenmodes of an LC netlist.
    Modes(ModesArgs),
    /// HKI layer and inductor plan for a chip.
    Plan(PlanArgs),
    /// Sustain verdicts over a range of drive resistances.
    SweepRdrive(SweepArgs),
    /// Logic dissipation and efficiency across clock frequencies.
    StudyScaling(StudyArgs),
}

fn si(s: &str) -> Result<f64, String> {
    parse_value(s)
}

/// Comma-separated values with scale suffixes.
#[derive(Clone, Debug)]
struct SiList(Vec<f64>);

fn si_list(s: &str) -> Result<SiList, String> {
    s.split(',').map(|t| parse_value(t.trim())).collect::<Result<_, _>>().map(SiList)
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Trap,
    Be,
}

#[derive(Debug, Args)]
struct SimArgs {
    /// SPICE-subset netlist.
    netlist: PathBuf,
    /// Time step in seconds (defaults to the netlist's .tran card).
    #[arg(long, value_parser = si)]
    dt: Option<f64>,
    /// Stop time in seconds (defaults to the netlist's .tran card).
    #[arg(long, value_parser = si)]
    tstop: Option<f64>,
    /// Integration method.
    #[arg(long, value_enum, default_value = "trap")]
    method: MethodArg,
    /// Record every N-th step.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DriveArg {
    Two,
    Four,
    None,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GateArg {
    Reference,
    Default,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum InitialArg {
    Quadrature,
    Rest,
}

/// Scenario selection shared by `resonator`, `sweep-rdrive` and
/// `study-scaling`. Starts from the reference scenario (or `--scenario`),
/// then applies flags, then `--set` overrides.
#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Scenario JSON to start from instead of the reference scenario.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Quad resonator (default).
    #[arg(long, conflicts_with = "array")]
    quad: bool,
    /// N×N array resonator.
    #[arg(long, value_name = "N")]
    array: Option<usize>,
    /// Resonator inductance in henries.
    #[arg(long = "L", value_parser = si)]
    inductance: Option<f64>,
    /// Per-node load capacitance in farads.
    #[arg(long = "C", value_parser = si)]
    capacitance: Option<f64>,
    /// Clock amplitude in volts (resonator and drive).
    #[arg(long, value_parser = si)]
    amplitude: Option<f64>,
    /// Drive scheme.
    #[arg(long, value_enum)]
    drive: Option<DriveArg>,
    /// Drive resistance in ohms.
    #[arg(long, value_parser = si)]
    rdrive: Option<f64>,
    /// Clock and drive frequency in hertz.
    #[arg(long, value_parser = si)]
    freq: Option<f64>,
    /// Simulated clock cycles.
    #[arg(long)]
    cycles: Option<usize>,
    /// Time steps per clock cycle.
    #[arg(long)]
    steps: Option<usize>,
    /// Logic load, repeatable: shift:N, eightphase or none.
    #[arg(long, value_name = "SPEC")]
    logic: Vec<String>,
    /// Gate parameter set.
    #[arg(long, value_enum)]
    gate: Option<GateArg>,
    /// Initial state (arrays larger than 1×1 default to rest).
    #[arg(long, value_enum)]
    initial: Option<InitialArg>,
    /// Dotted override, repeatable, e.g. gate.r_on=5k.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Debug, Args)]
struct ResonatorArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ModesArgs {
    /// LC netlist.
    netlist: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PlanArgs {
    /// HKI process JSON.
    #[arg(long)]
    process: PathBuf,
    /// Chip profile JSON.
    #[arg(long)]
    chip: PathBuf,
    /// Critical-current derate factor (overrides the process file).
    #[arg(long, value_parser = si)]
    derate: Option<f64>,
    /// Clock frequency in hertz (overrides the chip file).
    #[arg(long, value_parser = si)]
    freq: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Explicit comma-separated resistances (overrides --from/--to/--points).
    #[arg(long, value_parser = si_list)]
    values: Option<SiList>,
    /// Smallest resistance.
    #[arg(long, value_parser = si, default_value = "1k")]
    from: f64,
    /// Largest resistance.
    #[arg(long, value_parser = si, default_value = "20k")]
    to: f64,
    /// Number of points.
    #[arg(long, default_value_t = 6)]
    points: usize,
    /// Space points logarithmically.
    #[arg(long)]
    log: bool,
    /// Exit 1 unless every point sustains.
    #[arg(long)]
    check: bool,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct StudyArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Comma-separated clock frequencies in hertz.
    #[arg(long, value_parser = si_list, required = true)]
    freqs: SiList,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

/// A failed invocation: message and exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        Failure {
            code: if e.is_numerical() { 3 } else { 2 },
            message: e.to_string(),
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        ExperimentError::from(e).into()
    }
}

#[derive(Serialize)]
struct InputRecord {
    path: String,
    bytes: usize,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    args: Vec<String>,
    inputs: Vec<InputRecord>,
    overrides: Vec<String>,
}

/// Per-invocation state: inputs read and outputs written.
struct Session {
    out: PathBuf,
    inputs: Vec<InputRecord>,
}

impl Session {
    fn new(out: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(out)
            .map_err(|e| Failure::input(format!("cannot create output directory {}: {e}", out.display())))?;
        Ok(Session {
            out: out.to_path_buf(),
            inputs: Vec::new(),
        })
    }

    fn read(&mut self, path: &Path) -> Result<String, Failure> {
        let bytes = fs::read(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.push(InputRecord {
            path: path.display().to_string(),
            bytes: bytes.len(),
            sha256: format!("{:x}", Sha256::digest(&bytes)),
        });
        String::from_utf8(bytes).map_err(|_| Failure::input(format!("{} is not UTF-8", path.display())))
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), Failure> {
        let path = self.out.join(name);
        fs::write(&path, contents).map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display())))
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("output serializes")
}

/// Runs the command line `argv` (program name first) and returns the
/// process exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let args: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match run(cli, args) {
        Ok((summary, code)) => {
            println!("{summary}");
            code
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

fn run(cli: Cli, args: Vec<String>) -> Result<(String, i32), Failure> {
    let (session, summary, code, overrides) = match cli.command {
        Command::Sim(a) => {
            let mut s = Session::new(&a.out)?;
            let (summary, code) = run_sim(&mut s, &a)?;
            (s, summary, code, Vec::new())
        }
        Command::Resonator(a) => {
            let mut s = Session::new(&a.out)?;
            let (summary, code) = run_resonator(&mut s, &a)?;
            (s, summary, code, a.scenario.overrides)
        }
        Command::Modes(a) => {
            let mut s = Session::new(&a.out)?;
            let (summary, code) = run_modes(&mut s, &a)?;
            (s, summary, code, Vec::new())
        }
        Command::Plan(a) => {
            let mut s = Session::new(&a.out)?;
            let (summary, code) = run_plan(&mut s, &a)?;
            (s, summary, code, Vec::new())
        }
        Command::SweepRdrive(a) => {
            let mut s = Session::new(&a.out)?;
            let (summary, code) = run_sweep(&mut s, &a)?;
            (s, summary, code, a.scenario.overrides)
        }
        Command::StudyScaling(a) => {
            let mut s = Session::new(&a.out)?;
            let (summary, code) = run_study(&mut s, &a)?;
            (s, summary, code, a.scenario.overrides)
        }
    };
    if cli.seed_manifest {
        let m = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            args,
            inputs: session.inputs,
            overrides,
        };
        fs::write(session.out.join("manifest.json"), to_json(&m))
            .map_err(|e| Failure::input(format!("cannot write manifest: {e}")))?;
    }
    Ok((summary, code))
}

fn run_sim(s: &mut Session, a: &SimArgs) -> Result<(String, i32), Failure> {
    let text = s.read(&a.netlist)?;
    let c = parse_netlist(&text).map_err(|e| Failure::input(format!("{}: {e}", a.netlist.display())))?;
    let dt = a.dt.or(c.tran.map(|t| t.dt));
    let t_stop = a.tstop.or(c.tran.map(|t| t.t_stop));
    let (Some(dt), Some(t_stop)) = (dt, t_stop) else {
        return Err(Failure::input("no time step: pass --dt and --tstop or add a .tran card"));
    };
    let method = match a.method {
        MethodArg::Trap => Method::Trapezoidal,
        MethodArg::Be => Method::BackwardEuler,
    };
    let cfg = SimConfig::new(dt, t_stop).with_method(method).with_stride(a.stride);
    let tr = simulate(&c, &cfg)?;
    s.write("trace.csv", &tr.to_csv_string())?;
    let energy = energy_audit(&c, &tr).ok();
    if let Some(e) = &energy {
        s.write("energy.json", &to_json(e))?;
    }
    let mut line = format!("sim: {} samples to {:e} s", tr.len(), t_stop);
    if let Some(e) = energy {
        let _ = write!(line, ", energy conservation residual {:.3e}", e.conservation_residual);
    }
    Ok((line, 0))
}

fn build_scenario_from_args(s: &mut Session, a: &ScenarioArgs) -> Result<Scenario, Failure> {
    let mut sc = match &a.scenario {
        Some(p) => {
            let text = s.read(p)?;
            serde_json::from_str::<Scenario>(&text).map_err(|e| Failure::input(format!("{}: {e}", p.display())))?
        }
        None => Scenario::reference(5e3),
    };
    if let Some(n) = a.array {
        let (l, c) = (current_inductance(&sc.resonator), sc.resonator.node_load());
        sc.resonator = ResonatorSpec::Array(ArraySpec {
            n,
            inductance: l,
            load_per_node: c,
            amplitude: sc.amplitude(),
        });
        if n > 1 && a.initial.is_none() {
            sc.initial = InitialState::Rest;
        }
    }
    if let Some(l) = a.inductance {
        sc.resonator = sc.resonator.with_inductance(l);
    }
    if let Some(c) = a.capacitance {
        match &mut sc.resonator {
            ResonatorSpec::Quad(q) => q.phase_loads = [c; 4],
            ResonatorSpec::Array(arr) => arr.load_per_node = c,
        }
    }
    if let Some(v) = a.amplitude {
        match &mut sc.resonator {
            ResonatorSpec::Quad(q) => q.amplitude = v,
            ResonatorSpec::Array(arr) => arr.amplitude = v,
        }
        if let Some(d) = &mut sc.drive {
            d.amplitude = v;
        }
    }
    match a.drive {
        Some(DriveArg::None) => sc.drive = None,
        Some(d) => {
            let scheme = match d {
                DriveArg::Two => DriveScheme::TwoPhase,
                _ => DriveScheme::FourPhase,
            };
            let amplitude = sc.amplitude();
            let d = sc.drive.get_or_insert(DriveSpec {
                scheme,
                amplitude,
                r_drive: 5e3,
            });
            d.scheme = scheme;
        }
        None => {}
    }
    if let Some(r) = a.rdrive {
        match &mut sc.drive {
            Some(d) => d.r_drive = r,
            None => return Err(Failure::input("--rdrive given but the scenario has no drive")),
        }
    }
    if let Some(f) = a.freq {
        sc.frequency = f;
    }
    if let Some(n) = a.cycles {
        sc.cycles = n;
    }
    if let Some(n) = a.steps {
        sc.steps_per_cycle = n;
    }
    if !a.logic.is_empty() {
        sc.logic.shift_stages = 0;
        sc.logic.eight_phase = false;
        for spec in &a.logic {
            match spec.as_str() {
                "none" => {}
                "eightphase" => sc.logic.eight_phase = true,
                _ => {
                    let n = spec
                        .strip_prefix("shift:")
                        .and_then(|n| n.parse::<usize>().ok())
                        .ok_or_else(|| Failure::input(format!("bad --logic {spec:?}; use shift:N, eightphase or none")))?;
                    sc.logic.shift_stages = n;
                }
            }
        }
    }
    match a.gate {
        Some(GateArg::Default) => sc.logic.gate = GateParams::default(),
        Some(GateArg::Reference) => sc.logic.gate = crate::experiments::reference_gate(),
        None => {}
    }
    match a.initial {
        Some(InitialArg::Quadrature) => sc.initial = InitialState::Quadrature,
        Some(InitialArg::Rest) => sc.initial = InitialState::Rest,
        None => {}
    }
    if !a.overrides.is_empty() {
        let mut doc = serde_json::to_value(&sc).expect("scenario serializes");
        for o in &a.overrides {
            apply_override(&mut doc, o).map_err(Failure::input)?;
        }
        sc = serde_json::from_value(doc).map_err(|e| Failure::input(format!("overrides: {e}")))?;
    }
    sc.validate()?;
    Ok(sc)
}

fn current_inductance(r: &ResonatorSpec) -> f64 {
    match r {
        ResonatorSpec::Quad(QuadSpec { inductance, .. }) | ResonatorSpec::Array(ArraySpec { inductance, .. }) => *inductance,
    }
}

#[derive(Serialize)]
struct ResonatorReport<'a> {
    verdict: &'a crate::experiments::SustainVerdict,
    energy: &'a crate::engine::EnergyReport,
    warnings: &'a [String],
}

fn run_resonator(s: &mut Session, a: &ResonatorArgs) -> Result<(String, i32), Failure> {
    let sc = build_scenario_from_args(s, &a.scenario)?;
    let out = run_sustain_check(&sc)?;
    let b = &out.built;
    let mut nodes: Vec<&str> = b.clock_nodes.iter().map(|n| n.as_str()).collect();
    if let Some(ep) = &b.eight_phase {
        nodes.extend(ep.outputs.iter().map(|n| n.as_str()));
    }
    if let Some(sr) = &b.shift_register {
        nodes.extend([sr.output.true_rail.as_str(), sr.output.false_rail.as_str()]);
    }
    s.write("scenario.json", &to_json(&sc))?;
    s.write("waveforms.csv", &out.trace.subset(&nodes, &[]).to_csv_string())?;
    s.write(
        "verdict.json",
        &to_json(&ResonatorReport {
            verdict: &out.verdict,
            energy: &out.energy,
            warnings: &b.warnings,
        }),
    )?;
    if let Ok(net) = serialize_netlist(&b.circuit) {
        s.write("circuit.cir", &net)?;
    }
    let v = &out.verdict;
    let pct = 100.0 * v.final_amplitude_fraction;
    Ok(if v.sustained {
        (format!("resonator: sustained (final amplitude {pct:.1}% of nominal)"), 0)
    } else {
        let at = v.time_of_collapse.map(|t| format!(", collapse at {t:.4e} s")).unwrap_or_default();
        (format!("resonator: failed (final amplitude {pct:.1}% of nominal{at})"), 1)
    })
}

fn run_modes(s: &mut Session, a: &ModesArgs) -> Result<(String, i32), Failure> {
    let text = s.read(&a.netlist)?;
    let c = parse_netlist(&text).map_err(|e| Failure::input(format!("{}: {e}", a.netlist.display())))?;
    let modes = eigenmodes(&c).map_err(|e| Failure::input(e.to_string()))?;
    s.write("modes.json", &modes_to_json(&modes))?;
    let quad = match find_quadrature_mode(&c) {
        Ok(m) => format!(
            "quadrature mode at {:.6e} Hz (residual {:.2} deg)",
            m.omega / (2.0 * std::f64::consts::PI),
            m.residual_deg
        ),
        Err(_) => "no quadrature mode".into(),
    };
    Ok((format!("modes: {} modes, {quad}", modes.len()), 0))
}

fn run_plan(s: &mut Session, a: &PlanArgs) -> Result<(String, i32), Failure> {
    let input = |e: crate::planner::PlanError| Failure::input(e.to_string());
    let mut process = process_from_json(&s.read(&a.process)?).map_err(input)?;
    let mut chip = chip_from_json(&s.read(&a.chip)?).map_err(input)?;
    if let Some(d) = a.derate {
        process.derate = d;
    }
    if let Some(f) = a.freq {
        chip.clock_frequency = f;
    }
    let report = plan_report(&process, &chip).map_err(input)?;
    s.write("plan.json", &report.to_json())?;
    s.write("plan.txt", &report.to_table())?;
    Ok((
        format!(
            "plan: layers_required = {}, chip {:.1} mW/cm^2 vs {:.1} mW/cm^2 per layer",
            report.layers_required,
            report.chip_power_density * 0.1,
            report.power_density * 0.1
        ),
        0,
    ))
}

fn sweep_values(a: &SweepArgs) -> Result<Vec<f64>, Failure> {
    if let Some(v) = &a.values {
        return Ok(v.0.clone());
    }
    if a.points == 0 || !(a.from > 0.0 && a.to >= a.from) {
        return Err(Failure::input("need 0 < --from <= --to and --points >= 1"));
    }
    if a.points == 1 {
        return Ok(vec![a.from]);
    }
    let n = (a.points - 1) as f64;
    Ok((0..a.points)
        .map(|k| {
            let x = k as f64 / n;
            if a.log {
                a.from * (a.to / a.from).powf(x)
            } else {
                a.from + (a.to - a.from) * x
            }
        })
        .collect())
}

fn run_sweep(s: &mut Session, a: &SweepArgs) -> Result<(String, i32), Failure> {
    let sc = build_scenario_from_args(s, &a.scenario)?;
    let values = sweep_values(a)?;
    let res = sweep_drive_resistor(&sc, &values)?;
    s.write("sweep.csv", &table_csv(&res.rows))?;
    s.write("sweep.json", &to_json(&res))?;
    let ok = res.rows.iter().filter(|r| r.sustained).count();
    let mut line = format!("sweep-rdrive: {ok}/{} sustained", res.rows.len());
    match res.r_star {
        Some(r) => {
            let _ = write!(line, ", R* = {r:.4e} ohm");
        }
        None => line.push_str(", no threshold in range"),
    }
    if !res.downward_closed {
        line.push_str(", non-monotone");
    }
    let code = if a.check && ok < res.rows.len() { 1 } else { 0 };
    Ok((line, code))
}

fn run_study(s: &mut Session, a: &StudyArgs) -> Result<(String, i32), Failure> {
    let sc = build_scenario_from_args(s, &a.scenario)?;
    let rows = adiabatic_scaling_study(&sc, &a.freqs.0)?;
    let table: Vec<TableRow> = rows.iter().map(|r| r.row.clone()).collect();
    s.write("scaling.csv", &table_csv(&table))?;
    s.write("scaling.json", &to_json(&rows))?;
    s.write("scaling_table.json", &table_json(&table))?;
    let eff = |r: &TableRow| r.efficiency.map_or("n/a".to_string(), |e| format!("{e:.4}"));
    let (first, last) = (&table[0], &table[table.len() - 1]);
    Ok((
        format!(
            "study-scaling: {} points, efficiency {} at {:e} Hz, {} at {:e} Hz",
            table.len(),
            eff(first),
            first.parameter,
            eff(last),
            last.parameter
        ),
        0,
    ))
}
