//! Field files and structured-text reports.

use std::fmt::{self, Display, Write as _};
use std::fs;
use std::io;
use std::path::Path;

pub const FIELD_HEADER: &str = "# columns: x y u w d residual";

/// One row per node; the last column of the file flags boundary nodes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FieldTable {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub d: Vec<f64>,
    pub residual: Vec<f64>,
    pub boundary: Vec<bool>,
}

impl FieldTable {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn push(&mut self, p: [f64; 2], u: f64, w: f64, d: f64, residual: f64, boundary: bool) {
        self.x.push(p[0]);
        self.y.push(p[1]);
        self.u.push(u);
        self.w.push(w);
        self.d.push(d);
        self.residual.push(residual);
        self.boundary.push(boundary);
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(160 * (self.len() + 1));
        s.push_str(FIELD_HEADER);
        s.push('\n');
        for i in 0..self.len() {
            let row = [
                self.x[i],
                self.y[i],
                self.u[i],
                self.w[i],
                self.d[i],
                self.residual[i],
            ];
            for v in row {
                let _ = write!(s, "{v:.16e} ");
            }
            s.push(if self.boundary[i] { '1' } else { '0' });
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, FieldFileError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == FIELD_HEADER => {}
            _ => {
                return Err(FieldFileError {
                    line: 1,
                    message: "missing column header".into(),
                })
            }
        }
        let mut t = FieldTable::default();
        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 7 {
                return Err(FieldFileError {
                    line: line_no,
                    message: format!("expected 7 columns, found {}", cols.len()),
                });
            }
            let mut v = [0.0; 6];
            for (k, c) in cols[..6].iter().enumerate() {
                v[k] = c.parse().map_err(|_| FieldFileError {
                    line: line_no,
                    message: format!("malformed number '{c}'"),
                })?;
            }
            let flag = match cols[6] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(FieldFileError {
                        line: line_no,
                        message: format!("boundary flag must be 0 or 1, found '{other}'"),
                    })
                }
            };
            t.push([v[0], v[1]], v[2], v[3], v[4], v[5], flag);
        }
        Ok(t)
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        fs::write(path, self.to_text())
    }

    pub fn read(path: &Path) -> Result<Self, FieldFileError> {
        let text = fs::read_to_string(path).map_err(|e| FieldFileError {
            line: 0,
            message: format!("{}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldFileError {
    pub line: usize,
    pub message: String,
}

impl Display for FieldFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for FieldFileError {}

/// Nested `key: value` document with two-space indentation.
#[derive(Debug, Clone, Default)]
pub struct Report {
    text: String,
    depth: usize,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&mut self, key: &str, value: impl Display) -> &mut Self {
        let _ = writeln!(
            self.text,
            "{:indent$}{key}: {value}",
            "",
            indent = 2 * self.depth
        );
        self
    }

    pub fn number(&mut self, key: &str, value: f64) -> &mut Self {
        self.value(key, fmt_num(value))
    }

    pub fn open(&mut self, key: &str) -> &mut Self {
        let _ = writeln!(self.text, "{:indent$}{key}:", "", indent = 2 * self.depth);
        self.depth += 1;
        self
    }

    pub fn close(&mut self) -> &mut Self {
        self.depth = self.depth.saturating_sub(1);
        self
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

/// Shortest representation that reads back to the same value.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 || (1e-4..1e6).contains(&v.abs()) {
        format!("{v:?}")
    } else {
        format!("{v:e}")
    }
}

/// Value of `key` inside the nested section path of a report.
pub fn report_lookup(text: &str, path: &[&str]) -> Option<String> {
    let mut depth = 0;
    let mut lines = text.lines();
    for (k, part) in path.iter().enumerate() {
        let last = k + 1 == path.len();
        loop {
            let line = lines.next()?;
            let indent = line.len() - line.trim_start().len();
            if indent < 2 * depth {
                return None;
            }
            if indent != 2 * depth {
                continue;
            }
            let (key, value) = line.trim_start().split_once(':')?;
            if key == *part {
                if last {
                    return Some(value.trim().to_string());
                }
                break;
            }
        }
        depth += 1;
    }
    None
}
