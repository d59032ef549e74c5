use serde_json::Value;

use crate::circuit::parse_value;

/// Sections searched, in order, when a dotted key does not resolve from
/// the scenario root (so `gate.r_on` finds `logic.gate.r_on`).
const SEARCH_ROOTS: [&[&str]; 5] = [
    &["logic"],
    &["drive"],
    &["resonator", "quad"],
    &["resonator", "array"],
    &["rule"],
];

fn lookup<'a>(v: &'a mut Value, path: &[&str]) -> Option<&'a mut Value> {
    path.iter().try_fold(v, |v, k| v.as_object_mut()?.get_mut(*k))
}

fn convert(current: &Value, raw: &str) -> Result<Value, String> {
    let number = || {
        parse_value(raw)
            .ok()
            .and_then(serde_json::Number::from_f64)
            .map(Value::Number)
    };
    match current {
        Value::Bool(_) => raw
            .parse::<bool>()
            .map(Value::Bool)
            .map_err(|_| format!("expected true or false, got {raw:?}")),
        Value::Number(n) if n.is_u64() => raw
            .parse::<u64>()
            .map(|u| Value::Number(u.into()))
            .or_else(|_| number().ok_or(()))
            .map_err(|_| format!("expected a number, got {raw:?}")),
        Value::Number(_) => number().ok_or_else(|| format!("expected a number, got {raw:?}")),
        Value::String(_) => Ok(Value::String(raw.to_string())),
        Value::Null => Ok(number().unwrap_or_else(|| Value::String(raw.to_string()))),
        _ => Err("only scalar fields can be overridden".into()),
    }
}

/// Applies one `key=value` override to a JSON document. Numbers accept
/// SPICE scale suffixes (`5k`, `10p`).
pub fn apply_override(doc: &mut Value, spec: &str) -> Result<(), String> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| format!("override {spec:?} is not key=value"))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    let candidates = std::iter::once(Vec::new()).chain(SEARCH_ROOTS.iter().map(|r| r.to_vec()));
    for mut full in candidates {
        full.extend(&path);
        if let Some(slot) = lookup(doc, &full) {
            *slot = convert(slot, raw.trim()).map_err(|e| format!("override {key}: {e}"))?;
            return Ok(());
        }
    }
    Err(format!("unknown override key {key:?}"))
}
