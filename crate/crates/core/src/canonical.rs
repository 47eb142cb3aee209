//! Canonical JSON: object keys sorted, no insignificant whitespace, floats
//! printed with 17 significant digits in exponent form, integers verbatim.
//! Equal values always serialize to equal bytes.

use std::fmt::Write;

use serde::Serialize;
use serde_json::Value;

pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T) -> serde_json::Result<String> {
    let value = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&mut out, &value)?;
    out.push('\n');
    Ok(out)
}

/// 17-significant-digit rendering of a finite float.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        // drop the sign of -0.0
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

fn write_value(out: &mut String, value: &Value) -> serde_json::Result<()> {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                write!(out, "{u}").unwrap();
            } else if let Some(i) = n.as_i64() {
                write!(out, "{i}").unwrap();
            } else {
                let x = n.as_f64().expect("json number is f64");
                out.push_str(&format_float(x));
            }
        }
        Value::String(s) => out.push_str(&serde_json::to_string(s)?),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(out, item)?;
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&serde_json::to_string(key)?);
                out.push(':');
                write_value(out, &map[key])?;
            }
            out.push('}');
        }
    }
    Ok(())
}
