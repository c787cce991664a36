//! Tables, number rendering and the CSV / JSON writers.

use serde_json::{json, Map, Value};

pub const SIGNIFICANT: usize = 12;
/// Probabilities below this are written as 0.
pub const PROBABILITY_FLOOR: f64 = 1e-12;
pub const CLAMP_NOTE: &str = "probabilities below 1e-12 are written as 0";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Num(f64),
    /// Always fixed-point.
    Prob(f64),
    Text(String),
    Bool(bool),
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(command: &'static str, columns: Vec<&'static str>) -> Self {
        Self { command, columns, rows: Vec::new(), notes: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn clamps(&self) -> bool {
        self.rows
            .iter()
            .flatten()
            .any(|c| matches!(c, Cell::Prob(p) if *p != 0.0 && p.abs() < PROBABILITY_FLOOR))
    }
}

/// Run identity written at the top of every output.
#[derive(Debug, Clone, PartialEq)]
pub struct Meta {
    pub version: &'static str,
    pub config_sha256: String,
    pub seed: u64,
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn fixed(x: f64) -> String {
    let exp = x.abs().log10().floor() as i64;
    let decimals = (SIGNIFICANT as i64 - 1 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    let t = trim_fraction(&s);
    if t == "-0" { "0".into() } else { t.to_string() }
}

/// 12 significant digits; fixed-point for exponents in `[-4, 15)`.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let exp = x.abs().log10().floor() as i64;
    if (-4..15).contains(&exp) {
        fixed(x)
    } else {
        let s = format!("{:.*e}", SIGNIFICANT - 1, x);
        let (mantissa, e) = s.split_once('e').expect("exponent form");
        format!("{}e{e}", trim_fraction(mantissa))
    }
}

/// Fixed-point always; values below [`PROBABILITY_FLOOR`] become 0.
pub fn format_probability(p: f64) -> String {
    if p.abs() < PROBABILITY_FLOOR || !p.is_finite() {
        if p.is_nan() { "nan".into() } else { "0".into() }
    } else {
        fixed(p)
    }
}

fn cell_text(c: &Cell) -> String {
    match c {
        Cell::Int(i) => i.to_string(),
        Cell::Num(x) => format_number(*x),
        Cell::Prob(p) => format_probability(*p),
        Cell::Text(t) => t.clone(),
        Cell::Bool(b) => b.to_string(),
        Cell::Empty => String::new(),
    }
}

fn cell_json(c: &Cell) -> Value {
    let number = |s: String| s.parse::<f64>().ok().and_then(serde_json::Number::from_f64).map_or(Value::Null, Value::Number);
    match c {
        Cell::Int(i) => json!(i),
        Cell::Num(x) => number(format_number(*x)),
        Cell::Prob(p) => number(format_probability(*p)),
        Cell::Text(t) => json!(t),
        Cell::Bool(b) => json!(b),
        Cell::Empty => Value::Null,
    }
}

pub fn header(meta: &Meta) -> String {
    format!(
        "# nfl {}\n# config-sha256 {}\n# seed {}\n",
        meta.version, meta.config_sha256, meta.seed
    )
}

pub fn render_csv(report: &Report, meta: &Meta) -> String {
    let mut out = header(meta);
    out.push_str(&report.columns.join(","));
    out.push('\n');
    for row in &report.rows {
        let line: Vec<String> = row.iter().map(cell_text).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    for note in notes(report) {
        out.push_str("# note: ");
        out.push_str(&note);
        out.push('\n');
    }
    out
}

fn notes(report: &Report) -> Vec<String> {
    let mut all = report.notes.clone();
    if report.clamps() {
        all.push(CLAMP_NOTE.to_string());
    }
    all
}

pub fn render_json(report: &Report, meta: &Meta) -> String {
    let rows: Vec<Value> = report
        .rows
        .iter()
        .map(|row| {
            let mut m = Map::new();
            for (col, cell) in report.columns.iter().zip(row) {
                m.insert((*col).to_string(), cell_json(cell));
            }
            Value::Object(m)
        })
        .collect();
    let envelope = json!({
        "meta": {
            "tool": "nfl",
            "version": meta.version,
            "command": report.command,
            "config_sha256": meta.config_sha256,
            "seed": meta.seed,
            "columns": report.columns,
            "notes": notes(report),
        },
        "rows": rows,
    });
    let mut s = serde_json::to_string_pretty(&envelope).expect("json serializes");
    s.push('\n');
    s
}

/// Two-column `x,value` dump of a density grid.
pub fn render_density(meta: &Meta, stage: usize, grid: &nfl_core::Density) -> String {
    let mut out = header(meta);
    out.push_str(&format!("# stage {stage}\nx,value\n"));
    for (i, v) in grid.values().iter().enumerate() {
        out.push_str(&format_number(grid.point(i)));
        out.push(',');
        out.push_str(&format_number(*v));
        out.push('\n');
    }
    out
}
