use std::collections::HashSet;

use thiserror::Error;

use super::{Circuit, Element, ElementKind, NodeId, Polarity, SourceSpec, SwitchModel, TranSpec};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError {
        line,
        message: message.into(),
    })
}

/// Parses a number with an optional SPICE scale suffix
/// (`f p n u m k meg g`, case-insensitive). Scaling is applied in the decimal
/// exponent so `1.6g` parses to exactly `1.6e9`.
pub fn parse_value(token: &str) -> Result<f64, String> {
    let lower = token.to_ascii_lowercase();
    let bytes = lower.as_bytes();
    let mut i = 0;
    if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
        i += 1;
    }
    let digits_start = i;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
    }
    let mut n_digits = i - digits_start;
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        n_digits += i - frac_start;
    }
    if n_digits == 0 {
        return Err(format!("invalid number '{token}'"));
    }
    let mantissa_end = i;
    let mut exponent: i64 = 0;
    if i < bytes.len() && bytes[i] == b'e' {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        let exp_digits = j;
        while j < bytes.len() && bytes[j].is_ascii_digit() {
            j += 1;
        }
        if j > exp_digits {
            exponent = lower[i + 1..j]
                .parse::<i64>()
                .map_err(|_| format!("invalid exponent in '{token}'"))?;
            i = j;
        }
    }
    let scale = match &lower[i..] {
        "" => 0,
        "f" => -15,
        "p" => -12,
        "n" => -9,
        "u" => -6,
        "m" => -3,
        "k" => 3,
        "meg" => 6,
        "g" => 9,
        other => return Err(format!("unknown unit suffix '{other}' in '{token}'")),
    };
    let text = format!("{}e{}", &lower[..mantissa_end], exponent + scale);
    let v: f64 = text
        .parse()
        .map_err(|_| format!("invalid number '{token}'"))?;
    if !v.is_finite() {
        return Err(format!("number out of range '{token}'"));
    }
    Ok(v)
}

/// Splits a card into tokens, gluing `key = value` into `key=value` and
/// treating parentheses and commas inside source functions as separators.
fn tokenize(line: &str) -> Vec<String> {
    let mut spaced = String::with_capacity(line.len() + 8);
    for ch in line.chars() {
        match ch {
            '(' | ')' | ',' => {
                spaced.push(' ');
                spaced.push(ch);
                spaced.push(' ');
            }
            _ => spaced.push(ch),
        }
    }
    let raw: Vec<&str> = spaced.split_whitespace().collect();
    let mut out: Vec<String> = Vec::with_capacity(raw.len());
    let mut i = 0;
    while i < raw.len() {
        let tok = raw[i];
        if tok == "=" && !out.is_empty() && i + 1 < raw.len() {
            let last = out.pop().unwrap();
            out.push(format!("{last}={}", raw[i + 1]));
            i += 2;
        } else if tok.ends_with('=') && tok.len() > 1 && i + 1 < raw.len() {
            out.push(format!("{tok}{}", raw[i + 1]));
            i += 2;
        } else if tok.starts_with('=') && tok.len() > 1 && !out.is_empty() {
            let last = out.pop().unwrap();
            out.push(format!("{last}{tok}"));
            i += 1;
        } else {
            out.push(tok.to_string());
            i += 1;
        }
    }
    out
}

fn valid_node_name(s: &str) -> bool {
    !s.is_empty() && !s.contains(['(', ')', '=', ','])
}

/// Parses SPICE-subset netlist text into a [`Circuit`].
///
/// One card per line; `*` starts a comment line; keywords are
/// case-insensitive. See the crate README for the grammar.
pub fn parse_netlist(text: &str) -> Result<Circuit, ParseError> {
    let mut circuit = Circuit::new();
    let mut names: HashSet<String> = HashSet::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('*') {
            continue;
        }
        let tokens = tokenize(line);
        if tokens.is_empty() {
            continue;
        }
        let head = &tokens[0];
        if head.starts_with('.') {
            parse_control(&mut circuit, &tokens, line_no)?;
            continue;
        }
        let element = parse_element(&tokens, line_no)?;
        if !names.insert(element.name.clone()) {
            return err(line_no, format!("duplicate element name '{}'", element.name));
        }
        circuit.add(element);
    }
    Ok(circuit)
}

fn value_at(tokens: &[String], idx: usize, line: usize, what: &str) -> Result<f64, ParseError> {
    match tokens.get(idx) {
        Some(t) => parse_value(t).map_err(|m| ParseError { line, message: m }),
        None => err(line, format!("missing {what}")),
    }
}

fn node_at(tokens: &[String], idx: usize, line: usize) -> Result<NodeId, ParseError> {
    match tokens.get(idx) {
        Some(t) if valid_node_name(t) => Ok(NodeId::new(t.as_str())),
        Some(t) => err(line, format!("invalid node name '{t}'")),
        None => err(line, "missing node"),
    }
}

fn split_kv(token: &str) -> Option<(String, &str)> {
    let (k, v) = token.split_once('=')?;
    Some((k.to_ascii_lowercase(), v))
}

fn parse_element(tokens: &[String], line: usize) -> Result<Element, ParseError> {
    let name = tokens[0].clone();
    let letter = name
        .chars()
        .next()
        .map(|c| c.to_ascii_uppercase())
        .unwrap_or(' ');
    if !valid_node_name(&name) {
        return err(line, format!("invalid element name '{name}'"));
    }
    let pos = node_at(tokens, 1, line)?;
    let neg = node_at(tokens, 2, line)?;
    let kind = match letter {
        'R' => {
            let ohms = value_at(tokens, 3, line, "resistance")?;
            expect_end(tokens, 4, line)?;
            ElementKind::Resistor { ohms }
        }
        'C' | 'L' => {
            let value = value_at(tokens, 3, line, "value")?;
            let mut ic = 0.0;
            for tok in &tokens[4..] {
                match split_kv(tok) {
                    Some((k, v)) if k == "ic" => {
                        ic = parse_value(v).map_err(|m| ParseError { line, message: m })?;
                    }
                    _ => return err(line, format!("unexpected token '{tok}'")),
                }
            }
            if letter == 'C' {
                ElementKind::Capacitor {
                    farads: value,
                    initial_voltage: ic,
                }
            } else {
                ElementKind::Inductor {
                    henries: value,
                    initial_current: ic,
                }
            }
        }
        'V' => ElementKind::VSource(parse_source(&tokens[3..], line)?),
        'W' => {
            let nc_pos = node_at(tokens, 3, line)?;
            let nc_neg = node_at(tokens, 4, line)?;
            let (mut r_on, mut r_off, mut vth, mut polarity) = (None, None, None, None);
            for tok in &tokens[5..] {
                let Some((k, v)) = split_kv(tok) else {
                    return err(line, format!("unexpected token '{tok}'"));
                };
                let num = || parse_value(v).map_err(|m| ParseError { line, message: m });
                match k.as_str() {
                    "ron" => r_on = Some(num()?),
                    "roff" => r_off = Some(num()?),
                    "vth" => vth = Some(num()?),
                    "type" => {
                        polarity = Some(match v.to_ascii_lowercase().as_str() {
                            "n" => Polarity::N,
                            "p" => Polarity::P,
                            _ => return err(line, format!("switch type must be n or p, got '{v}'")),
                        })
                    }
                    _ => return err(line, format!("unknown switch parameter '{k}'")),
                }
            }
            let missing = |p: &str| ParseError {
                line,
                message: format!("switch missing {p}="),
            };
            ElementKind::Switch(SwitchModel {
                r_on: r_on.ok_or_else(|| missing("ron"))?,
                r_off: r_off.ok_or_else(|| missing("roff"))?,
                v_threshold: vth.ok_or_else(|| missing("vth"))?,
                polarity: polarity.ok_or_else(|| missing("type"))?,
                control: (nc_pos, nc_neg),
            })
        }
        _ => return err(line, format!("unknown card '{name}'")),
    };
    Ok(Element {
        name,
        pos,
        neg,
        kind,
    })
}

fn expect_end(tokens: &[String], idx: usize, line: usize) -> Result<(), ParseError> {
    match tokens.get(idx) {
        Some(t) => err(line, format!("unexpected token '{t}'")),
        None => Ok(()),
    }
}

/// Collects the numeric arguments of `FUNC ( a b c )`.
fn function_args(rest: &[String], line: usize) -> Result<Vec<f64>, ParseError> {
    if rest.get(1).map(String::as_str) != Some("(") {
        return err(line, format!("expected '(' after {}", rest[0]));
    }
    let mut args = Vec::new();
    let mut closed = false;
    for (i, tok) in rest.iter().enumerate().skip(2) {
        match tok.as_str() {
            ")" => {
                if i + 1 != rest.len() {
                    return err(line, format!("unexpected token '{}'", rest[i + 1]));
                }
                closed = true;
                break;
            }
            "," => {}
            t => args.push(parse_value(t).map_err(|m| ParseError { line, message: m })?),
        }
    }
    if !closed {
        return err(line, "missing ')'");
    }
    Ok(args)
}

fn parse_source(rest: &[String], line: usize) -> Result<SourceSpec, ParseError> {
    let Some(head) = rest.first() else {
        return err(line, "missing source specification");
    };
    match head.to_ascii_uppercase().as_str() {
        "DC" => {
            let v = value_at(rest, 1, line, "DC value")?;
            expect_end(rest, 2, line)?;
            Ok(SourceSpec::Dc(v))
        }
        "SIN" => {
            let a = function_args(rest, line)?;
            if a.len() < 3 || a.len() > 6 {
                return err(line, "SIN takes 3 to 6 arguments");
            }
            Ok(SourceSpec::Sine {
                offset: a[0],
                amplitude: a[1],
                frequency: a[2],
                delay: a.get(3).copied().unwrap_or(0.0),
                damping: a.get(4).copied().unwrap_or(0.0),
                phase_deg: a.get(5).copied().unwrap_or(0.0),
            })
        }
        "PWL" => {
            let a = function_args(rest, line)?;
            if a.is_empty() || a.len() % 2 != 0 {
                return err(line, "PWL needs an even, non-zero number of values");
            }
            Ok(SourceSpec::Pwl(
                a.chunks(2).map(|p| (p[0], p[1])).collect(),
            ))
        }
        _ => {
            let v = value_at(rest, 0, line, "source value")?;
            expect_end(rest, 1, line)?;
            Ok(SourceSpec::Dc(v))
        }
    }
}

fn parse_control(c: &mut Circuit, tokens: &[String], line: usize) -> Result<(), ParseError> {
    match tokens[0].to_ascii_lowercase().as_str() {
        ".end" => Ok(()),
        ".tran" => {
            let dt = value_at(tokens, 1, line, "time step")?;
            let t_stop = value_at(tokens, 2, line, "stop time")?;
            expect_end(tokens, 3, line)?;
            c.tran = Some(TranSpec { dt, t_stop });
            Ok(())
        }
        ".ic" => {
            // tokens look like: v ( node ) =1.0; after tokenize, "=" glues to ")".
            let mut i = 1;
            if tokens.len() == 1 {
                return err(line, ".ic needs at least one assignment");
            }
            while i < tokens.len() {
                let kind = tokens[i].to_ascii_lowercase();
                let (Some(open), Some(target), Some(close)) =
                    (tokens.get(i + 1), tokens.get(i + 2), tokens.get(i + 3))
                else {
                    return err(line, "malformed .ic assignment");
                };
                if open != "(" || !close.starts_with(")=") || !valid_node_name(target) {
                    return err(line, "malformed .ic assignment");
                }
                let value =
                    parse_value(&close[2..]).map_err(|m| ParseError { line, message: m })?;
                match kind.as_str() {
                    "v" => {
                        let node = NodeId::new(target.as_str());
                        c.add_node(&node);
                        c.node_ics.insert(node, value);
                    }
                    "i" => {
                        c.inductor_ics.insert(target.clone(), value);
                    }
                    _ => return err(line, format!(".ic expects v() or i(), got '{kind}'")),
                }
                i += 4;
            }
            Ok(())
        }
        other => err(line, format!("unsupported control card '{other}'")),
    }
}
