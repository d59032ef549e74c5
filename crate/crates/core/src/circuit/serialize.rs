use std::fmt::Write;

use super::{validate, Circuit, ElementKind, Polarity, Severity, SourceSpec};

fn num(v: f64) -> String {
    format!("{v:e}")
}

/// Writes a circuit back out as netlist text.
///
/// Numbers are written in shortest round-trip exponent form, so
/// `parse_netlist(serialize_netlist(c)?)` reproduces `c` exactly.
pub fn serialize_netlist(c: &Circuit) -> Result<String, String> {
    let errors: Vec<String> = validate(c)
        .into_iter()
        .filter(|d| d.severity == Severity::Error)
        .map(|d| d.to_string())
        .collect();
    if !errors.is_empty() {
        return Err(format!("invalid circuit: {}", errors.join("; ")));
    }

    let mut out = String::new();
    for e in &c.elements {
        let _ = write!(out, "{} {} {}", e.name, e.pos, e.neg);
        match &e.kind {
            ElementKind::Resistor { ohms } => {
                let _ = write!(out, " {}", num(*ohms));
            }
            ElementKind::Capacitor {
                farads: value,
                initial_voltage: ic,
            }
            | ElementKind::Inductor {
                henries: value,
                initial_current: ic,
            } => {
                let _ = write!(out, " {}", num(*value));
                if *ic != 0.0 {
                    let _ = write!(out, " ic={}", num(*ic));
                }
            }
            ElementKind::VSource(spec) => match spec {
                SourceSpec::Dc(v) => {
                    let _ = write!(out, " DC {}", num(*v));
                }
                SourceSpec::Sine {
                    offset,
                    amplitude,
                    frequency,
                    delay,
                    damping,
                    phase_deg,
                } => {
                    let _ = write!(
                        out,
                        " SIN({} {} {} {} {} {})",
                        num(*offset),
                        num(*amplitude),
                        num(*frequency),
                        num(*delay),
                        num(*damping),
                        num(*phase_deg)
                    );
                }
                SourceSpec::Pwl(points) => {
                    let body: Vec<String> = points
                        .iter()
                        .map(|(t, v)| format!("{} {}", num(*t), num(*v)))
                        .collect();
                    let _ = write!(out, " PWL({})", body.join(" "));
                }
            },
            ElementKind::Switch(sw) => {
                let _ = write!(
                    out,
                    " {} {} ron={} roff={} vth={} type={}",
                    sw.control.0,
                    sw.control.1,
                    num(sw.r_on),
                    num(sw.r_off),
                    num(sw.v_threshold),
                    match sw.polarity {
                        Polarity::N => "n",
                        Polarity::P => "p",
                    }
                );
            }
        }
        out.push('\n');
    }
    for (node, v) in &c.node_ics {
        let _ = writeln!(out, ".ic v({node})={}", num(*v));
    }
    for (name, i) in &c.inductor_ics {
        let _ = writeln!(out, ".ic i({name})={}", num(*i));
    }
    if let Some(tran) = c.tran {
        let _ = writeln!(out, ".tran {} {}", num(tran.dt), num(tran.t_stop));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::{parse_netlist, Circuit, Element};
    use super::*;

    #[test]
    fn capacitor_round_trip() {
        let c = parse_netlist("C1 a 0 1p").unwrap();
        let text = serialize_netlist(&c).unwrap();
        assert_eq!(parse_netlist(&text).unwrap(), c);
    }

    #[test]
    fn full_card_round_trip() {
        let src = "V1 d 0 SIN(0 1 1.6g 0 0 90)\nR1 d a 5k\nC1 a 0 1p ic=0.5\nL1 a b 19.79n ic=-1m\nC2 b 0 1p\nVp p 0 PWL(0 0 1n 1)\nW1 a b p 0 ron=10k roff=1e15 vth=0.3 type=n\n.ic v(a)=0.1 i(L1)=2m\n.tran 1p 1n\n";
        let c = parse_netlist(src).unwrap();
        let again = parse_netlist(&serialize_netlist(&c).unwrap()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn invalid_circuit_rejected() {
        let mut c = Circuit::new();
        c.add(Element::capacitor("C1", "a", "0", -1e-12));
        assert!(serialize_netlist(&c).is_err());
    }
}
