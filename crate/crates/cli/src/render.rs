//! Human-readable view of any JSON report. Every field is shown; rationals
//! get a decimal approximation next to them.

use std::fmt::Write;

use ipir_core::{Rational, Scalar};
use num_traits::ToPrimitive;
use serde_json::Value;

pub fn render(report: &Value) -> String {
    let mut out = String::new();
    match report {
        Value::Object(_) => object(&mut out, report, 0),
        other => writeln!(out, "{}", scalar(other)).unwrap(),
    }
    out
}

fn is_rational(s: &str) -> bool {
    let body = s.strip_prefix('-').unwrap_or(s);
    let mut parts = body.splitn(2, '/');
    let digits = |p: Option<&str>| p.is_some_and(|p| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit()));
    let num = parts.next();
    match parts.next() {
        None => digits(num),
        den => digits(num) && digits(den),
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) if is_rational(s) => match Rational::parse(s).and_then(|q| ToPrimitive::to_f64(&q)) {
            Some(f) => format!("{s} (≈{f:.4})"),
            None => s.clone(),
        },
        Value::String(s) => s.clone(),
        Value::Null => "none".into(),
        other => other.to_string(),
    }
}

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Object(_) | Value::Array(_))
}

fn checks(out: &mut String, checks: &[Value], pad: &str) {
    if checks.is_empty() {
        writeln!(out, "{pad}  no audits run").unwrap();
        return;
    }
    for c in checks {
        let field = |k: &str| c.get(k).map(scalar).unwrap_or_default();
        let status = match c.get("pass") {
            Some(Value::Bool(true)) => "pass",
            _ => "FAIL",
        };
        let mut line = format!("{pad}  [{status}] {} = {} ({}", field("name"), field("value"), field("mode"));
        if let Some(t) = c.get("threshold") {
            write!(line, ", threshold {}", scalar(t)).unwrap();
        }
        writeln!(out, "{line})").unwrap();
        if let Some(w) = c.get("witness") {
            writeln!(out, "{pad}      witness: {}", scalar(w)).unwrap();
        }
    }
}

fn object(out: &mut String, v: &Value, indent: usize) {
    let pad = " ".repeat(indent);
    let Value::Object(map) = v else { return };
    for (k, v) in map {
        match v {
            Value::Object(inner) if inner.get("checks").is_some_and(Value::is_array) && inner.len() == 1 => {
                writeln!(out, "{pad}{k}:").unwrap();
                checks(out, inner["checks"].as_array().unwrap(), &pad);
            }
            Value::Object(_) => {
                writeln!(out, "{pad}{k}:").unwrap();
                object(out, v, indent + 2);
            }
            Value::Array(items) if k == "checks" => {
                writeln!(out, "{pad}{k}:").unwrap();
                checks(out, items, &pad);
            }
            Value::Array(items) if items.iter().all(is_scalar) => {
                let parts: Vec<String> = items.iter().map(scalar).collect();
                writeln!(out, "{pad}{k}: [{}]", parts.join(", ")).unwrap();
            }
            Value::Array(items) => {
                writeln!(out, "{pad}{k}:").unwrap();
                for item in items {
                    match item {
                        Value::Object(_) => {
                            let mut block = String::new();
                            object(&mut block, item, indent + 4);
                            let block = block.replacen(&" ".repeat(indent + 4), &format!("{pad}  - "), 1);
                            out.push_str(&block);
                        }
                        other => writeln!(out, "{pad}  - {}", compact(other)).unwrap(),
                    }
                }
            }
            other => writeln!(out, "{pad}{k}: {}", scalar(other)).unwrap(),
        }
    }
}

fn compact(v: &Value) -> String {
    match v {
        Value::Array(items) => format!("[{}]", items.iter().map(compact).collect::<Vec<_>>().join(", ")),
        other => scalar(other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn rationals_get_approximations() {
        assert_eq!(scalar(&json!("5/4")), "5/4 (≈1.2500)");
        assert_eq!(scalar(&json!("-1/3")), "-1/3 (≈-0.3333)");
        assert_eq!(scalar(&json!("2")), "2 (≈2.0000)");
        assert_eq!(scalar(&json!("5/")), "5/");
        assert_eq!(scalar(&json!("lp")), "lp");
        assert_eq!(scalar(&json!(null)), "none");
    }

    #[test]
    fn audits() {
        let empty = render(&json!({"cost": "5/4", "audits": {"checks": []}}));
        assert_eq!(empty, "cost: 5/4 (≈1.2500)\naudits:\n  no audits run\n");
        let failing = render(&json!({"checks": [
            {"name": "I(S;U)", "mode": "exact", "value": 0.5, "pass": false, "witness": "s = 1"},
            {"name": "TV", "mode": "empirical", "value": 0.001, "threshold": 0.01, "pass": true}
        ]}));
        assert!(failing.contains("[FAIL] I(S;U) = 0.5 (exact)\n      witness: s = 1"), "{failing}");
        assert!(failing.contains("[pass] TV = 0.001 (empirical, threshold 0.01)"));
    }

    #[test]
    fn nested_values_are_all_shown() {
        let text = render(&json!({
            "pairs": [{"s": 1, "x": 2, "mean": "16/3"}],
            "size_law": ["1/2", "1/2"],
            "u": [[1, 2], [3]],
            "inner": {"a": true}
        }));
        assert!(text.contains("pairs:\n  - s: 1\n    x: 2\n    mean: 16/3 (≈5.3333)\n"), "{text}");
        assert!(text.contains("size_law: [1/2 (≈0.5000), 1/2 (≈0.5000)]"));
        assert!(text.contains("u:\n  - [1, 2]\n  - [3]\n"));
        assert!(text.contains("inner:\n  a: true\n"));
    }
}
