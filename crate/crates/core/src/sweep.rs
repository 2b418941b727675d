//! Parameter scans over a templated profile.
//!
//! A sweep file names a profile template whose strings may contain
//! `{name}` placeholders, plus a value list or linspace per parameter:
//!
//! ```json
//! {
//!   "template": {"kind": "pseudo_null", "domain": [0, 2], "tau": "1",
//!                "sigma": "-s^2/2 + {a}*s + {b}"},
//!   "parameters": {"a": [0, 0.5, 1], "b": {"from": 0, "to": 1, "count": 3}}
//! }
//! ```
//!
//! Rows follow the cartesian product with parameters in name order and the
//! last name varying fastest.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::classifier::{classify, k_key, ClassificationReport, ClassifyOptions};
use crate::error::{Error, Result};
use crate::profile::ProfileDoc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamRange {
    List(Vec<f64>),
    Linspace { from: f64, to: f64, count: usize },
}

impl ParamRange {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            ParamRange::List(ref v) => v.clone(),
            ParamRange::Linspace { from, to, count } => match count {
                0 => Vec::new(),
                1 => vec![from],
                _ => (0..count)
                    .map(|i| from + (to - from) * i as f64 / (count - 1) as f64)
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub template: Value,
    pub parameters: BTreeMap<String, ParamRange>,
}

impl SweepSpec {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let spec: SweepSpec = serde_json::from_str(text).map_err(|e| Error::Malformed(format!("sweep spec: {e}")))?;
        spec.check()?;
        Ok(spec)
    }

    fn check(&self) -> Result<()> {
        if !self.template.is_object() {
            return Err(Error::Malformed("sweep template must be a JSON object".into()));
        }
        for (name, range) in &self.parameters {
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(Error::Malformed(format!("bad parameter name {name:?}")));
            }
            let vals = range.values();
            if vals.is_empty() {
                return Err(Error::Malformed(format!("parameter {name} has no values")));
            }
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::Malformed(format!("parameter {name} has a non-finite value")));
            }
        }
        Ok(())
    }

    /// All parameter tuples in output order.
    pub fn tuples(&self) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new()];
        for range in self.parameters.values() {
            let vals = range.values();
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    vals.iter().map(move |&v| {
                        let mut t = prefix.clone();
                        t.push(v);
                        t
                    })
                })
                .collect();
        }
        out
    }

    /// The profile for one tuple. Placeholders left unresolved are an error.
    pub fn instantiate(&self, tuple: &[f64]) -> Result<ProfileDoc> {
        let names: Vec<&String> = self.parameters.keys().collect();
        let mut value = self.template.clone();
        substitute(&mut value, &names, tuple);
        let mut doc: ProfileDoc =
            serde_json::from_value(value).map_err(|e| Error::Malformed(format!("sweep template: {e}")))?;
        if doc.label.is_none() {
            let parts: Vec<String> = names.iter().zip(tuple).map(|(n, v)| format!("{n}={v}")).collect();
            doc.label = Some(format!("sweep({})", parts.join(";")));
        }
        let text = serde_json::to_string(&doc)?;
        if let Some(i) = unresolved(&text) {
            return Err(Error::Malformed(format!(
                "unresolved placeholder {i} in sweep template"
            )));
        }
        Ok(doc)
    }
}

fn format_value(v: f64) -> String {
    if v < 0.0 {
        format!("({v})")
    } else {
        format!("{v}")
    }
}

fn substitute(value: &mut Value, names: &[&String], tuple: &[f64]) {
    match value {
        Value::String(s) => {
            for (n, v) in names.iter().zip(tuple) {
                *s = s.replace(&format!("{{{n}}}"), &format_value(*v));
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|x| substitute(x, names, tuple)),
        Value::Object(map) => map.values_mut().for_each(|x| substitute(x, names, tuple)),
        _ => {}
    }
}

/// First `{identifier}` left in serialized JSON, skipping the JSON braces.
fn unresolved(text: &str) -> Option<String> {
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let rest = &text[i + 1..];
            let end = rest.find('}')?;
            let inner = &rest[..end];
            if !inner.is_empty() && inner.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Some(format!("{{{inner}}}"));
            }
        }
        i += 1;
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub parameters: Vec<f64>,
    pub outcome: std::result::Result<ClassificationReport, String>,
}

/// Classifies every tuple (in parallel), keeping the tuple order.
pub fn run_sweep(spec: &SweepSpec, opts: &ClassifyOptions) -> Result<Vec<SweepRow>> {
    let tuples = spec.tuples();
    let docs = tuples.iter().map(|t| spec.instantiate(t)).collect::<Result<Vec<_>>>()?;
    Ok(tuples
        .into_par_iter()
        .zip(docs)
        .map(|(parameters, doc)| {
            let outcome = doc
                .into_profile()
                .and_then(|p| classify(&p, opts))
                .map_err(|e| e.to_string());
            SweepRow { parameters, outcome }
        })
        .collect())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn float(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

pub fn write_sweep_csv<W: Write>(spec: &SweepSpec, rows: &[SweepRow], mut out: W) -> Result<()> {
    let mut header: Vec<String> = spec.parameters.keys().cloned().collect();
    header.push("label".into());
    header.extend((0..4).map(k_key));
    header.extend((0..4).map(|k| format!("residual_{}", k_key(k))));
    header.extend((0..4).map(|k| format!("oracle_sigma_min_{}", k_key(k))));
    header.push("max_gram_residual".into());
    header.push("error".into());
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let mut fields: Vec<String> = row.parameters.iter().map(|v| format!("{v:.16e}")).collect();
        match &row.outcome {
            Ok(r) => {
                fields.push(csv_field(&r.label));
                fields.extend((0..4).map(|k| r.verdict(k).to_string()));
                fields.extend((0..4).map(|k| float(r.check(k).condition_residual)));
                fields.extend((0..4).map(|k| float(Some(r.check(k).oracle.sigma_min))));
                fields.push(float(Some(r.max_gram_residual)));
                fields.push(String::new());
            }
            Err(e) => {
                fields.push(String::new());
                fields.extend(std::iter::repeat_n(String::new(), 13));
                fields.push(csv_field(e));
            }
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::Verdict;

    #[test]
    fn tuples_follow_name_order() {
        let spec = SweepSpec::from_json_str(
            r#"{"template":{"kind":"pseudo_null","domain":[0,1],"tau":"1","sigma":"{b}+{a}"},
                "parameters":{"b":[1,2],"a":{"from":0,"to":1,"count":3}}}"#,
        )
        .unwrap();
        let t = spec.tuples();
        assert_eq!(t.len(), 6);
        assert_eq!(t[0], vec![0.0, 1.0]);
        assert_eq!(t[1], vec![0.0, 2.0]);
        assert_eq!(t[5], vec![1.0, 2.0]);
        let doc = spec.instantiate(&[-0.5, 2.0]).unwrap();
        assert_eq!(doc.sigma, Some(crate::profile::ScalarSpec::Expr("2+(-0.5)".into())));
        assert_eq!(doc.label.as_deref(), Some("sweep(a=-0.5;b=2)"));
    }

    #[test]
    fn malformed_specs_are_rejected() {
        for text in [
            "{",
            r#"{"template":[],"parameters":{}}"#,
            r#"{"template":{},"parameters":{"a b":[1]}}"#,
            r#"{"template":{},"parameters":{"a":[]}}"#,
            r#"{"template":{},"parameters":{},"extra":1}"#,
        ] {
            assert!(
                matches!(SweepSpec::from_json_str(text), Err(Error::Malformed(_))),
                "{text}"
            );
        }
        let spec = SweepSpec::from_json_str(
            r#"{"template":{"kind":"pseudo_null","domain":[0,1],"tau":"1","sigma":"{z}"},"parameters":{"a":[1]}}"#,
        )
        .unwrap();
        assert!(matches!(spec.instantiate(&[1.0]), Err(Error::Malformed(_))));
    }

    #[test]
    fn quadratic_family_sweep() {
        let spec = SweepSpec::from_json_str(
            r#"{"template":{"kind":"pseudo_null","domain":[0,2],"tau":"1","sigma":"-s^2/2 + {a}*s + {b}"},
                "parameters":{"a":[0,0.5,1],"b":[0]}}"#,
        )
        .unwrap();
        let rows = run_sweep(&spec, &ClassifyOptions::default()).unwrap();
        assert_eq!(rows.len(), 3);
        for r in &rows {
            assert_eq!(r.outcome.as_ref().unwrap().verdict(1), Verdict::Yes);
        }
        let mut buf = Vec::new();
        write_sweep_csv(&spec, &rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        let cols = text.lines().next().unwrap().split(',').count();
        assert!(text.lines().all(|l| l.split(',').count() == cols));
    }
}
