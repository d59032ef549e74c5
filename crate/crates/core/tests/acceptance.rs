//! Acceptance criteria 1-7. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use hkiclock::circuit::{parse_netlist, serialize_netlist, Circuit, Element, ElementKind, TranSpec};
use hkiclock::engine::{energy_audit, simulate, SimConfig};
use hkiclock::experiments::{
    adiabatic_scaling_study, build_scenario, run_sustain_check, sweep_drive_resistor, Scenario,
};
use hkiclock::logic::{
    build_eight_phase_generator, build_shift_register, clock_sources, crosscorr_lag, decode_dual_rail,
    mean_crossing_period, quad_clock_nodes, tick_sample_times, Bit, ClockShape,
    ClockTiming, GateParams,
};
use hkiclock::planner::{
    energy_density, power_density_and_layers, size_inductor, ChipProfile, HkiProcess,
};
use hkiclock::resonator::{
    attach_drive, build_array, build_quad, eigenmodes, find_quadrature_mode, quadrature_ic, ArraySpec,
    DriveScheme, QuadSpec,
};
use proptest::collection::vec;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let p = HkiProcess::seeqc();
    // nJ/cm² from J/m²
    let e = energy_density(&p) * 1e9 / 1e4;
    check(rel(e, 0.295) <= 0.005, || format!("energy density {e} nJ/cm^2"))?;
    let hi = ChipProfile::horse_ridge(0.140, 1.6e9);
    let lo = ChipProfile::horse_ridge(0.010, 1.6e9);
    let plan = power_density_and_layers(&p, &hi).map_err(|e| e.to_string())?;
    let per_layer = plan.power_density * 1e3 / 1e4;
    check(rel(per_layer, 472.0) <= 0.005, || format!("power density {per_layer} mW/cm^2"))?;
    let (d_lo, d_hi) = (lo.power_density(), hi.power_density());
    check(rel(d_lo, 625.0) < 1e-12 && rel(d_hi, 8750.0) < 1e-12, || {
        format!("Horse Ridge range {d_lo}-{d_hi} W/m^2")
    })?;
    check(plan.layers_required == 2, || format!("layers {}", plan.layers_required))?;
    let dt = t0.elapsed();
    check(dt < Duration::from_secs(1), || format!("runtime {dt:?}"))?;
    Ok(format!(
        "{e:.4} nJ/cm^2, {per_layer:.1} mW/cm^2/layer, chip {d_lo:.1}-{d_hi:.1} W/m^2, {} layers, {dt:.1?}",
        plan.layers_required
    ))
}

fn lc_loop(l: f64, c: f64, v0: f64) -> Circuit {
    let mut ckt = Circuit::new();
    ckt.add(Element::inductor("L1", "a", "0", l));
    ckt.add(Element::new(
        "C1",
        "a",
        "0",
        ElementKind::Capacitor {
            farads: c,
            initial_voltage: v0,
        },
    ));
    ckt
}

fn criterion_2() -> Outcome {
    let (l, c) = (1e-6_f64, 1e-9);
    let f0 = 1.0 / (2.0 * PI * (l * c).sqrt());
    let period = 1.0 / f0;
    let ckt = lc_loop(l, c, 1.0);
    let tr = simulate(&ckt, &SimConfig::new(period / 2000.0, 10.0 * period)).map_err(|e| e.to_string())?;
    let p = mean_crossing_period(&tr.times, tr.voltage("a").unwrap()).ok_or("no crossings")?;
    let f_err = rel(1.0 / p, f0);
    check(f_err <= 1e-3, || format!("LC frequency error {f_err:e}"))?;
    let audit = energy_audit(&ckt, &tr).map_err(|e| e.to_string())?;
    let e_err = (audit.stored_final - audit.stored_initial).abs() / audit.stored_initial;
    check(e_err <= 1e-3, || format!("lossless energy residual {e_err:e}"))?;

    let (r, cap) = (1e3, 1e-6);
    let tau = r * cap;
    let mut rc = Circuit::new();
    rc.add(Element::resistor("R1", "a", "0", r));
    rc.add(Element::new(
        "C1",
        "a",
        "0",
        ElementKind::Capacitor {
            farads: cap,
            initial_voltage: 1.0,
        },
    ));
    let tr = simulate(&rc, &SimConfig::new(tau / 1000.0, 5.0 * tau)).map_err(|e| e.to_string())?;
    let v = tr.voltage("a").unwrap();
    let rc_err = tr
        .times
        .iter()
        .zip(v)
        .map(|(t, v)| (v - (-t / tau).exp()).abs())
        .fold(0.0, f64::max);
    check(rc_err <= 1e-4, || format!("RC error {rc_err:e}"))?;
    Ok(format!(
        "LC freq err {f_err:.2e}, RC max err {rc_err:.2e}, energy residual {e_err:.2e}"
    ))
}

fn criterion_3() -> Outcome {
    let ring = build_quad(&QuadSpec::symmetric(1.0, 1.0, 1.0)).map_err(|e| e.to_string())?;
    let mut w: Vec<f64> = eigenmodes(&ring).map_err(|e| e.to_string())?.iter().map(|m| m.omega).collect();
    w.sort_by(f64::total_cmp);
    let want = [0.0, 2f64.sqrt(), 2f64.sqrt(), 2.0];
    let eig_err = w.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    check(w.len() == 4 && eig_err < 1e-9, || format!("eigenfrequencies {w:?}"))?;

    let started = quadrature_ic(&ring, 1.0).map_err(|e| e.to_string())?;
    let period = 2.0 * PI / 2f64.sqrt();
    let tr = simulate(&started, &SimConfig::new(period / 2000.0, 10.0 * period)).map_err(|e| e.to_string())?;
    let p = mean_crossing_period(&tr.times, tr.voltage("P0").unwrap()).ok_or("no crossings")?;
    let td_err = rel(2.0 * PI / p, 2f64.sqrt());
    check(td_err <= 5e-3, || format!("time-domain frequency error {td_err:e}"))?;

    let process = HkiProcess::seeqc();
    let mut worst: f64 = 0.0;
    for f in [100e6, 200e6, 400e6, 800e6, 1.6e9] {
        for load in [1e-12, 10e-12] {
            let rec = size_inductor(f, load, &process, 1.0).map_err(|e| e.to_string())?;
            let drawn = rec.squares as f64 * process.sheet_inductance;
            let quad = build_quad(&QuadSpec::symmetric(drawn, load, 1.0)).map_err(|e| e.to_string())?;
            let m = find_quadrature_mode(&quad).map_err(|e| e.to_string())?;
            worst = worst.max(rel(m.omega / (2.0 * PI), f));
        }
    }
    check(worst <= 0.01, || format!("planner grid worst error {worst:e}"))?;
    Ok(format!(
        "ring eig err {eig_err:.1e}, time-domain err {td_err:.2e}, planner grid worst {worst:.2e} (10 points)"
    ))
}

fn shift_register_64(rng: &mut TestRng) -> Result<usize, String> {
    let freq = 100e6;
    let period = 1.0 / freq;
    let tokens = 64;
    let cycles = tokens as f64 + 6.0;
    let input: Vec<bool> = (0..tokens).map(|_| rng.next_u32() & 1 == 1).collect();
    let timing = ClockTiming {
        amplitude: 1.0,
        frequency: freq,
        t_end: cycles * period,
    };
    let nodes = quad_clock_nodes();
    let sr = build_shift_register("sr", 8, &GateParams::default(), &nodes, &input, &timing).map_err(|e| e.to_string())?;
    let mut c = clock_sources(&nodes, ClockShape::Sine, 1.0, freq, timing.t_end);
    c.merge(&sr.circuit);
    let tr = simulate(&c, &SimConfig::new(period / 200.0, timing.t_end)).map_err(|e| e.to_string())?;
    let range = 0..tokens as i64;
    let t_in = tick_sample_times(-1, period, range.clone());
    let t_out = tick_sample_times(7, period, range);
    let delay = (t_out[0] - t_in[0]) / (period / 4.0);
    check((delay - 8.0).abs() < 1e-9, || format!("delay {delay} ticks"))?;
    let got = decode_dual_rail(&tr, &sr.output, &t_out, 1.0).map_err(|e| e.to_string())?;
    let invalid = got.iter().filter(|b| **b == Bit::Invalid).count();
    let want: Vec<Bit> = input.iter().map(|&b| Bit::from_bool(b)).collect();
    check(invalid == 0 && got == want, || format!("decoded {invalid} invalid, mismatch"))?;
    Ok(tokens)
}

fn criterion_4() -> Outcome {
    let mut rng = TestRng::deterministic_rng(RngAlgorithm::ChaCha);
    let mut patterns = 0;
    for _ in 0..3 {
        shift_register_64(&mut rng)?;
        patterns += 1;
    }

    let freq = 100e6;
    let period = 1.0 / freq;
    let timing = ClockTiming {
        amplitude: 1.0,
        frequency: freq,
        t_end: 14.0 * period,
    };
    let nodes = quad_clock_nodes();
    let ep = build_eight_phase_generator("ep", &GateParams::default(), &nodes, &timing).map_err(|e| e.to_string())?;
    let mut c = clock_sources(&nodes, ClockShape::Sine, 1.0, freq, timing.t_end);
    c.merge(&ep.circuit);
    let tr = simulate(&c, &SimConfig::new(period / 200.0, timing.t_end)).map_err(|e| e.to_string())?;
    let w = tr.window(2.0 * period, 14.0 * period);
    let t = &tr.times[w.clone()];
    let mut worst_lag: f64 = 0.0;
    for k in 1..ep.outputs.len() {
        let a = &tr.voltage(ep.outputs[k - 1].as_str()).unwrap()[w.clone()];
        let b = &tr.voltage(ep.outputs[k].as_str()).unwrap()[w.clone()];
        let lag = crosscorr_lag(t, a, b, period).ok_or("no lag")?;
        worst_lag = worst_lag.max((lag - period / 4.0).abs() / period);
    }
    check(ep.outputs.len() == 8 && worst_lag <= 0.05, || format!("offset error {worst_lag} T"))?;

    let mut s = Scenario::reference(5e3);
    s.logic.gate = GateParams::default();
    let freqs = [6.25e6, 12.5e6, 25e6, 50e6, 100e6];
    let rows = adiabatic_scaling_study(&s, &freqs).map_err(|e| e.to_string())?;
    let diss: Vec<f64> = rows.iter().map(|r| r.row.dissipation_per_cycle.unwrap_or(f64::NAN)).collect();
    let ratio = diss[4] / diss[3];
    check((ratio - 2.0).abs() <= 0.4, || format!("f/(f/2) ratio {ratio}"))?;
    let lowest = rows[0].row.efficiency.unwrap_or(0.0);
    check(lowest >= 0.99, || format!("lowest-frequency efficiency {lowest}"))?;
    Ok(format!(
        "{patterns} random 64-token patterns delayed 8 ticks, offsets within {:.2}% T, ratio {ratio:.3}, efficiency {lowest:.4} at 6.25 MHz",
        100.0 * worst_lag
    ))
}

fn criterion_5() -> Outcome {
    let t0 = Instant::now();
    let ok = run_sustain_check(&Scenario::reference(5e3)).map_err(|e| e.to_string())?.verdict;
    check(ok.sustained, || format!("5k not sustained: {:.3}", ok.final_amplitude_fraction))?;
    let bad = run_sustain_check(&Scenario::reference(15e3)).map_err(|e| e.to_string())?.verdict;
    check(!bad.sustained && bad.time_of_collapse.is_some(), || "15k did not collapse".into())?;
    let sweep = sweep_drive_resistor(&Scenario::reference(5e3), &[1e3, 2e3, 5e3, 10e3, 15e3, 20e3])
        .map_err(|e| e.to_string())?;
    let r_star = sweep.r_star.ok_or("no R*")?;
    check(sweep.downward_closed && r_star > 5e3 && r_star < 15e3, || format!("R* {r_star}"))?;
    let mut worst_q: f64 = 1.0;
    for r in [1e3, 2e3, 5e3, 10e3] {
        let v = run_sustain_check(&Scenario::reference(r)).map_err(|e| e.to_string())?.verdict;
        if v.sustained {
            worst_q = worst_q.min(v.modes.quadrature_fraction_final.unwrap_or(0.0));
        }
    }
    check(worst_q >= 0.9, || format!("quadrature fraction {worst_q}"))?;
    let dt = t0.elapsed();
    check(dt < Duration::from_secs(120), || format!("runtime {dt:?}"))?;
    Ok(format!(
        "5k {:.3}, 15k {:.3} (collapse {:.3e} s), R* = {r_star:.0} ohm, quadrature >= {worst_q:.4}, {dt:.1?}",
        ok.final_amplitude_fraction,
        bad.final_amplitude_fraction,
        bad.time_of_collapse.unwrap()
    ))
}

fn builder_circuits() -> Vec<(String, Circuit)> {
    let mut out = Vec::new();
    let quad = build_quad(&QuadSpec::symmetric(0.48e-6, 10e-12, 1.0)).unwrap();
    out.push(("quad".into(), quad.clone()));
    out.push(("quad+ic".into(), quadrature_ic(&quad, 1.0).unwrap()));
    for scheme in [DriveScheme::TwoPhase, DriveScheme::FourPhase] {
        out.push((format!("quad+{scheme:?}"), attach_drive(&quad, scheme, 1.0, 100e6, 5e3).unwrap()));
    }
    for n in 1..=3 {
        let spec = ArraySpec {
            n,
            inductance: 1e-6,
            load_per_node: 1e-12,
            amplitude: 1.0,
        };
        out.push((format!("array{n}"), build_array(&spec).unwrap()));
    }
    let timing = ClockTiming {
        amplitude: 1.0,
        frequency: 100e6,
        t_end: 8e-8,
    };
    let nodes = quad_clock_nodes();
    let sr = build_shift_register("sr", 5, &GateParams::default(), &nodes, &[true, false, true], &timing).unwrap();
    out.push(("shift".into(), sr.circuit));
    let ep = build_eight_phase_generator("ep", &GateParams::default(), &nodes, &timing).unwrap();
    out.push(("eightphase".into(), ep.circuit));
    out.push(("clocks".into(), clock_sources(&nodes, ClockShape::Ramp, 1.0, 100e6, 8e-8)));
    out.push(("reference".into(), build_scenario(&Scenario::reference(5e3)).unwrap().circuit));
    out
}

fn criterion_6() -> Outcome {
    let circuits = builder_circuits();
    for (name, c) in &circuits {
        let text = serialize_netlist(c).map_err(|e| format!("{name}: {e}"))?;
        let back = parse_netlist(&text).map_err(|e| format!("{name}: {e}"))?;
        check(&back == c, || format!("{name}: round trip differs"))?;
    }
    const ALPHABET: &[u8] = b"RCLVW0123456789.e-+kmunpfg ()=\n\tabxyzPULSESINPWLic.tran.end*";
    let bytes = prop_oneof![
        vec(any::<u8>(), 0..160),
        vec(proptest::sample::select(ALPHABET), 0..160),
    ];
    let config = Config {
        cases: 10_000,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let rejected = std::cell::Cell::new(0usize);
    runner
        .run(&bytes, |b| {
            let text = String::from_utf8_lossy(&b);
            let r = catch_unwind(|| parse_netlist(&text).is_err());
            prop_assert!(r.is_ok(), "parser panicked on {:?}", text);
            rejected.set(rejected.get() + usize::from(r.unwrap()));
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let rejected = rejected.get();
    Ok(format!(
        "{} builder circuits round-trip, 10000 fuzzed inputs without panic ({rejected} rejected)",
        circuits.len()
    ))
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        files.insert(p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap());
    }
    files
}

fn criterion_7() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let profiles = Path::new(env!("CARGO_MANIFEST_DIR")).join("profiles");
    let mut quad = quadrature_ic(&build_quad(&QuadSpec::symmetric(1e-6, 1e-12, 1.0)).unwrap(), 1.0).unwrap();
    quad.tran = Some(TranSpec {
        dt: 1e-12,
        t_stop: 20e-9,
    });
    let net = serialize_netlist(&quad).unwrap();
    let net_path = root.join("quad.cir");
    std::fs::write(&net_path, net).unwrap();
    let out = root.join("out");
    let o = out.to_str().unwrap();
    let n = net_path.to_str().unwrap();
    let seeqc = profiles.join("seeqc.json");
    let hr = profiles.join("horseridge.json");
    let runs: Vec<Vec<&str>> = vec![
        vec!["sim", n, "--out", o, "--seed-manifest"],
        vec!["modes", n, "--out", o],
        vec!["plan", "--process", seeqc.to_str().unwrap(), "--chip", hr.to_str().unwrap(), "--freq", "1.6e9", "--out", o],
        vec!["resonator", "--quad", "--rdrive", "5k", "--out", o],
        vec!["resonator", "--quad", "--rdrive", "15k", "--out", o],
        vec!["sweep-rdrive", "--values", "1k,2k,5k,10k,15k,20k", "--out", o],
        vec!["study-scaling", "--gate", "default", "--freqs", "6.25e6,100e6", "--out", o],
    ];
    for args in &runs {
        let mut snaps = Vec::new();
        let mut codes = Vec::new();
        for _ in 0..2 {
            let _ = std::fs::remove_dir_all(&out);
            let argv = std::iter::once("hkiclock").chain(args.iter().copied());
            codes.push(hkiclock::cli::dispatch(argv));
            snaps.push(snapshot(&out));
        }
        check(codes[0] == codes[1] && codes[0] <= 1, || format!("{}: exit codes {codes:?}", args[0]))?;
        check(!snaps[0].is_empty() && snaps[0] == snaps[1], || format!("{}: outputs differ", args[0]))?;
    }
    Ok(format!("{} subcommand runs byte-identical across repeats", runs.len()))
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("planner anchors", criterion_1),
        ("analytic engine oracles", criterion_2),
        ("eigen/simulation consistency", criterion_3),
        ("2LAL behavior", criterion_4),
        ("sustain/fail phenomenology", criterion_5),
        ("parser robustness", criterion_6),
        ("determinism", criterion_7),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {} ({name}): PASS - {detail} [{:.1?}]", k + 1, t.elapsed()),
            Err(why) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL - {why} [{:.1?}]", k + 1, t.elapsed());
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
