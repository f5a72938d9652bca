//! Report envelope and output formatting.

use std::fmt::Write as _;

use mimoloc::gdop::GdopGrid;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Serialize)]
pub struct Report<T: Serialize> {
    pub command: &'static str,
    pub version: &'static str,
    pub config_digest: String,
    pub result: T,
}

impl<T: Serialize> Report<T> {
    pub fn new(command: &'static str, config_digest: String, result: T) -> Self {
        Self { command, version: env!("CARGO_PKG_VERSION"), config_digest, result }
    }

    pub fn render(&self, json: bool) -> String {
        let value = serde_json::to_value(self).expect("report serializes");
        if json {
            let mut s = serde_json::to_string_pretty(&value).expect("report serializes");
            s.push('\n');
            s
        } else {
            let mut out = String::new();
            flatten(&mut out, "", &value);
            out
        }
    }
}

fn flatten(out: &mut String, prefix: &str, v: &Value) {
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(out, &key, v);
            }
        }
        Value::String(s) => {
            let _ = writeln!(out, "{prefix}: {s}");
        }
        other => {
            let _ = writeln!(out, "{prefix}: {other}");
        }
    }
}

/// `v` rounded to 9 significant digits, printed in shortest form.
pub fn sig9(v: f64) -> String {
    let rounded: f64 = format!("{v:.8e}").parse().expect("round trip");
    format!("{rounded}")
}

/// `x,y,gdop` rows, `y` outer. Degenerate cells leave the last field empty.
pub fn gdop_csv(grid: &GdopGrid) -> String {
    let mut out = String::from("x,y,gdop\n");
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let p = grid.cell_center(ix, iy);
            let v = grid.value(ix, iy);
            let g = if v.is_finite() { sig9(v) } else { String::new() };
            let _ = writeln!(out, "{},{},{g}", sig9(p.x), sig9(p.y));
        }
    }
    out
}

/// JSON numbers cannot be infinite; map those to `null`.
pub fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}
