//! Report serialization. All floating-point values are written with 17
//! significant digits (`{:.16e}`), which round-trips `f64` exactly and
//! makes byte-identical reruns a meaningful check, so the JSON is emitted
//! by a small writer with a fixed key order rather than a generic
//! serializer. Reading foreign reports back uses `serde_json`.

use std::fmt::Write as _;

/// 17-significant-digit decimal form; parses back to the identical bits.
pub fn format_float(x: f64) -> String {
    if x == 0.0 && x.is_sign_negative() {
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub enum Json {
    Null,
    Bool(bool),
    Int(i64),
    Num(f64),
    Str(String),
    Arr(Vec<Json>),
    /// Insertion-ordered object; key order is part of the output contract.
    Obj(Vec<(String, Json)>),
}

impl Json {
    pub fn obj() -> Self {
        Json::Obj(Vec::new())
    }

    pub fn push(&mut self, key: &str, value: Json) -> &mut Self {
        match self {
            Json::Obj(entries) => entries.push((key.to_string(), value)),
            _ => panic!("push on a non-object"),
        }
        self
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        self.write(&mut out, 0);
        out.push('\n');
        out
    }

    fn write(&self, out: &mut String, indent: usize) {
        match self {
            Json::Null => out.push_str("null"),
            Json::Bool(b) => {
                let _ = write!(out, "{b}");
            }
            Json::Int(i) => {
                let _ = write!(out, "{i}");
            }
            Json::Num(x) => {
                assert!(x.is_finite(), "refusing to serialize non-finite {x}");
                out.push_str(&format_float(*x));
            }
            Json::Str(s) => {
                out.push('"');
                for c in s.chars() {
                    match c {
                        '"' => out.push_str("\\\""),
                        '\\' => out.push_str("\\\\"),
                        '\n' => out.push_str("\\n"),
                        c if (c as u32) < 0x20 => {
                            let _ = write!(out, "\\u{:04x}", c as u32);
                        }
                        c => out.push(c),
                    }
                }
                out.push('"');
            }
            Json::Arr(items) => {
                if items.is_empty() {
                    out.push_str("[]");
                    return;
                }
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    out.push_str(&"  ".repeat(indent + 1));
                    item.write(out, indent + 1);
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent));
                out.push(']');
            }
            Json::Obj(entries) => {
                if entries.is_empty() {
                    out.push_str("{}");
                    return;
                }
                out.push('{');
                for (i, (k, v)) in entries.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    out.push_str(&"  ".repeat(indent + 1));
                    let _ = write!(out, "\"{k}\": ");
                    v.write(out, indent + 1);
                }
                out.push('\n');
                out.push_str(&"  ".repeat(indent));
                out.push('}');
            }
        }
    }
}

/// CSV with a fixed header; column order is part of the interface.
pub fn write_csv(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Parses a CSV produced by [`write_csv`]; returns (header, numeric rows).
pub fn read_csv(text: &str) -> Option<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header = lines.next()?.split(',').map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row: Option<Vec<f64>> = line.split(',').map(|c| c.trim().parse().ok()).collect();
        rows.push(row?);
    }
    Some((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips_bits() {
        for &x in &[
            0.0,
            1.0,
            -1.5,
            std::f64::consts::PI,
            1.0 / 3.0,
            6.626_070_15e-34,
            1.234_567_890_123_456_7e300,
            -4.9e-324,
        ] {
            let s = format_float(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{x} -> {s} -> {back}");
        }
    }

    #[test]
    fn json_is_valid_and_ordered() {
        let mut obj = Json::obj();
        obj.push("b_second", Json::Num(0.5));
        obj.push("a_first", Json::Arr(vec![Json::Int(1), Json::Bool(true)]));
        obj.push("s", Json::Str("line\n\"quote\"".into()));
        let text = obj.to_text();
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["b_second"], 0.5);
        assert_eq!(parsed["a_first"][0], 1);
        // insertion order preserved in the raw text
        assert!(text.find("b_second").unwrap() < text.find("a_first").unwrap());
    }

    #[test]
    fn csv_round_trip() {
        let text = write_csv(
            &["r", "v"],
            vec![
                vec![format_float(0.5), format_float(1.0 / 7.0)],
                vec![format_float(1.5), format_float(2e-3)],
            ]
            .into_iter(),
        );
        let (header, rows) = read_csv(&text).unwrap();
        assert_eq!(header, vec!["r", "v"]);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0][1], 1.0 / 7.0);
    }
}
