//! IMU windows and their block-CSV file format.
//!
//! Each window is a block: a header line `id,label,n,d` followed by `n`
//! lines of `d` comma-separated values. Blocks are separated by a blank
//! line. An empty label field means the window is unlabelled.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Tensor2;

#[derive(Debug, Clone, PartialEq)]
pub struct ImuWindow {
    pub id: String,
    /// `n` time steps × `d` features.
    pub values: Tensor2,
    pub label: Option<String>,
}

impl ImuWindow {
    pub fn new(id: impl Into<String>, values: Tensor2, label: Option<String>) -> Result<Self> {
        let w = Self {
            id: id.into(),
            values,
            label,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn steps(&self) -> usize {
        self.values.rows()
    }

    pub fn features(&self) -> usize {
        self.values.cols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps() == 0 || self.features() == 0 {
            return Err(Error::Data(format!(
                "window {} has empty shape {}",
                self.id,
                self.values.shape_str()
            )));
        }
        if !self.values.is_finite() {
            return Err(Error::Data(format!("window {} has non-finite values", self.id)));
        }
        Ok(())
    }
}

pub fn parse_imu(text: &str, path: &Path) -> Result<Vec<ImuWindow>> {
    let mut windows = Vec::new();
    let mut lines = text.lines().enumerate().peekable();
    while let Some((lineno, header)) = lines.next() {
        if header.trim().is_empty() {
            continue;
        }
        let at = |msg: String| Error::file(path, format!("line {}: {msg}", lineno + 1));
        let fields: Vec<&str> = header.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(at(format!("expected header `id,label,n,d`, got `{header}`")));
        }
        let id = fields[0].to_string();
        if id.is_empty() {
            return Err(at("empty window id".into()));
        }
        let label = (!fields[1].is_empty()).then(|| fields[1].to_string());
        let n: usize = fields[2]
            .parse()
            .map_err(|_| at(format!("window {id}: bad step count `{}`", fields[2])))?;
        let d: usize = fields[3]
            .parse()
            .map_err(|_| at(format!("window {id}: bad feature count `{}`", fields[3])))?;

        let mut data = Vec::with_capacity(n * d);
        for _ in 0..n {
            let (row_no, row) = lines
                .next()
                .filter(|(_, l)| !l.trim().is_empty())
                .ok_or_else(|| at(format!("window {id}: expected {n} rows")))?;
            let before = data.len();
            for v in row.split(',') {
                let v: f64 = v.trim().parse().map_err(|_| {
                    Error::file(path, format!("line {}: window {id}: bad value `{v}`", row_no + 1))
                })?;
                data.push(v);
            }
            if data.len() - before != d {
                return Err(Error::file(
                    path,
                    format!(
                        "line {}: window {id}: expected {d} values, got {}",
                        row_no + 1,
                        data.len() - before
                    ),
                ));
            }
        }
        let values = Tensor2::from_vec(n, d, data)?;
        let window = ImuWindow { id, values, label };
        window
            .validate()
            .map_err(|e| Error::file(path, e.to_string()))?;
        windows.push(window);
    }
    Ok(windows)
}

pub fn format_imu(windows: &[ImuWindow]) -> String {
    let mut out = String::new();
    for (i, w) in windows.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "{},{},{},{}",
            w.id,
            w.label.as_deref().unwrap_or(""),
            w.steps(),
            w.features()
        );
        for r in 0..w.steps() {
            let row: Vec<String> = w.values.row(r).iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
    }
    out
}

pub fn read_imu(path: &Path) -> Result<Vec<ImuWindow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_imu(&text, path)
}

pub fn write_imu(path: &Path, windows: &[ImuWindow]) -> Result<()> {
    std::fs::write(path, format_imu(windows)).map_err(|e| Error::io(path, e))
}
