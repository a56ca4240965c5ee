//! Curve containers, validation and CSV persistence.
//!
//! Two layouts are supported on disk:
//!
//! * **wide** (shared grid): a header `x,<x1>,...,<xm>` followed by one row of
//!   responses per curve. When the header's first cell is `label_x` every row
//!   starts with a 1-based class label.
//! * **long** (ragged grids): header `curve_id,x,y[,label]`, rows grouped by
//!   curve with abscissae ascending inside each group.
//!
//! Labels are 1-based in files and 0-based in memory.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("no curves")]
    Empty,
    #[error("curve {curve}: x has {x_len} values but y has {y_len}")]
    LengthMismatch {
        curve: usize,
        x_len: usize,
        y_len: usize,
    },
    #[error("curve {curve}: empty curve")]
    EmptyCurve { curve: usize },
    #[error("curve {curve}: non-increasing abscissae at position {position}")]
    NonIncreasing { curve: usize, position: usize },
    #[error("curve {curve}: non-finite value at position {position}")]
    NonFinite { curve: usize, position: usize },
    #[error("label vector has {labels} entries for {curves} curves")]
    LabelCount { labels: usize, curves: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("wide layout needs a shared abscissa grid (curve {curve} differs)")]
    NotSharedGrid { curve: usize },
    #[error("unknown layout `{0}` (expected `wide` or `long`)")]
    UnknownLayout(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One observed curve: abscissae `x` and responses `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Curve {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { x, y }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn check(&self, curve: usize) -> Result<(), DataError> {
        if self.x.len() != self.y.len() {
            return Err(DataError::LengthMismatch {
                curve,
                x_len: self.x.len(),
                y_len: self.y.len(),
            });
        }
        if self.x.is_empty() {
            return Err(DataError::EmptyCurve { curve });
        }
        for (position, (x, y)) in self.x.iter().zip(&self.y).enumerate() {
            if !x.is_finite() || !y.is_finite() {
                return Err(DataError::NonFinite { curve, position });
            }
        }
        if let Some(position) = self.x.windows(2).position(|w| w[1] <= w[0]) {
            return Err(DataError::NonIncreasing {
                curve,
                position: position + 1,
            });
        }
        Ok(())
    }
}

/// An ordered set of curves with optional ground-truth labels (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub curves: Vec<Curve>,
    pub labels: Option<Vec<usize>>,
}

impl Dataset {
    /// Builds a dataset and validates it.
    pub fn new(curves: Vec<Curve>, labels: Option<Vec<usize>>) -> Result<Self, DataError> {
        let dataset = Self { curves, labels };
        dataset.validate()?;
        Ok(dataset)
    }

    /// Checks every curve invariant, reporting the first violation.
    pub fn validate(&self) -> Result<(), DataError> {
        if self.curves.is_empty() {
            return Err(DataError::Empty);
        }
        for (i, curve) in self.curves.iter().enumerate() {
            curve.check(i)?;
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.curves.len() {
                return Err(DataError::LabelCount {
                    labels: labels.len(),
                    curves: self.curves.len(),
                });
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.curves.len()
    }

    /// Shortest curve length.
    pub fn min_len(&self) -> usize {
        self.curves.iter().map(Curve::len).min().unwrap_or(0)
    }

    /// Total number of observed points.
    pub fn total_points(&self) -> usize {
        self.curves.iter().map(Curve::len).sum()
    }

    /// The common abscissa grid, if every curve shares it exactly.
    pub fn shared_grid(&self) -> Option<&[f64]> {
        let first = &self.curves.first()?.x;
        self.curves
            .iter()
            .all(|c| &c.x == first)
            .then_some(first.as_slice())
    }

    /// Smallest and largest abscissa over all curves.
    pub fn x_range(&self) -> (f64, f64) {
        self.curves
            .iter()
            .flat_map(|c| [c.x[0], c.x[c.x.len() - 1]])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Population variance of all responses pooled together.
    pub fn response_variance(&self) -> f64 {
        let count = self.total_points() as f64;
        let mean = self.curves.iter().flat_map(|c| &c.y).sum::<f64>() / count;
        self.curves
            .iter()
            .flat_map(|c| &c.y)
            .map(|y| (y - mean).powi(2))
            .sum::<f64>()
            / count
    }

    /// Number of distinct classes implied by the labels (max label + 1).
    pub fn n_classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().copied().max().map_or(0, |m| m + 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Layout {
    #[default]
    Wide,
    Long,
}

impl FromStr for Layout {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wide" => Ok(Layout::Wide),
            "long" => Ok(Layout::Long),
            other => Err(DataError::UnknownLayout(other.to_string())),
        }
    }
}

/// Formats a number with 17 significant digits so text round-trips exactly.
pub(crate) fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_num(cell: &str, line: usize) -> Result<f64, DataError> {
    cell.trim().parse::<f64>().map_err(|_| DataError::Parse {
        line,
        message: format!("cannot parse `{}` as a number", cell.trim()),
    })
}

fn parse_label(cell: &str, line: usize) -> Result<usize, DataError> {
    match cell.trim().parse::<usize>() {
        Ok(l) if l >= 1 => Ok(l - 1),
        _ => Err(DataError::Parse {
            line,
            message: format!("label `{}` is not a positive integer", cell.trim()),
        }),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn records(text: &str) -> Result<Vec<(usize, Vec<String>)>, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| DataError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        out.push((line, record.iter().map(str::to_string).collect()));
    }
    Ok(out)
}

/// Parses a dataset from CSV text.
pub fn parse_csv(text: &str, layout: Layout) -> Result<Dataset, DataError> {
    let rows = records(text)?;
    match layout {
        Layout::Wide => parse_wide(&rows),
        Layout::Long => parse_long(&rows),
    }
}

fn parse_wide(rows: &[(usize, Vec<String>)]) -> Result<Dataset, DataError> {
    let Some(((header_line, header), body)) = rows.split_first() else {
        return Err(DataError::Empty);
    };
    let with_labels = match header[0].as_str() {
        "x" => false,
        "label_x" => true,
        other => {
            return Err(DataError::Parse {
                line: *header_line,
                message: format!("wide header must start with `x` or `label_x`, got `{other}`"),
            })
        }
    };
    let grid = header[1..]
        .iter()
        .map(|c| parse_num(c, *header_line))
        .collect::<Result<Vec<_>, _>>()?;
    let m = grid.len();
    let mut curves = Vec::with_capacity(body.len());
    let mut labels = Vec::new();
    for (line, row) in body {
        let values = if with_labels {
            labels.push(parse_label(&row[0], *line)?);
            &row[1..]
        } else if row.len() == m + 1 && row[0].is_empty() {
            &row[1..]
        } else {
            &row[..]
        };
        if values.len() != m {
            return Err(DataError::Parse {
                line: *line,
                message: format!("expected {m} responses, found {}", values.len()),
            });
        }
        let y = values
            .iter()
            .map(|c| parse_num(c, *line))
            .collect::<Result<Vec<_>, _>>()?;
        curves.push(Curve::new(grid.clone(), y));
    }
    Dataset::new(curves, with_labels.then_some(labels))
}

fn parse_long(rows: &[(usize, Vec<String>)]) -> Result<Dataset, DataError> {
    let Some(((header_line, header), body)) = rows.split_first() else {
        return Err(DataError::Empty);
    };
    let with_labels = match header.iter().map(String::as_str).collect::<Vec<_>>()[..] {
        ["curve_id", "x", "y"] => false,
        ["curve_id", "x", "y", "label"] => true,
        _ => {
            return Err(DataError::Parse {
                line: *header_line,
                message: "long header must be `curve_id,x,y[,label]`".into(),
            })
        }
    };
    let width = if with_labels { 4 } else { 3 };
    let mut ids: Vec<String> = Vec::new();
    let mut curves: Vec<Curve> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    for (line, row) in body {
        if row.len() != width {
            return Err(DataError::Parse {
                line: *line,
                message: format!("expected {width} fields, found {}", row.len()),
            });
        }
        let x = parse_num(&row[1], *line)?;
        let y = parse_num(&row[2], *line)?;
        let label = if with_labels {
            Some(parse_label(&row[3], *line)?)
        } else {
            None
        };
        if ids.last() != Some(&row[0]) {
            if ids.contains(&row[0]) {
                return Err(DataError::Parse {
                    line: *line,
                    message: format!("rows of curve `{}` are not contiguous", row[0]),
                });
            }
            ids.push(row[0].clone());
            curves.push(Curve::new(Vec::new(), Vec::new()));
            if let Some(l) = label {
                labels.push(l);
            }
        } else if let Some(l) = label {
            if labels.last() != Some(&l) {
                return Err(DataError::Parse {
                    line: *line,
                    message: format!("curve `{}` has inconsistent labels", row[0]),
                });
            }
        }
        let curve = curves.last_mut().expect("pushed above");
        curve.x.push(x);
        curve.y.push(y);
    }
    Dataset::new(curves, with_labels.then_some(labels))
}

/// Renders a dataset as CSV text.
pub fn format_csv(dataset: &Dataset, layout: Layout) -> Result<String, DataError> {
    let mut out = String::new();
    match layout {
        Layout::Wide => {
            let grid = dataset.shared_grid().ok_or_else(|| {
                let curve = dataset
                    .curves
                    .iter()
                    .position(|c| c.x != dataset.curves[0].x)
                    .unwrap_or(0);
                DataError::NotSharedGrid { curve }
            })?;
            out.push_str(if dataset.labels.is_some() { "label_x" } else { "x" });
            for x in grid {
                let _ = write!(out, ",{}", fmt_num(*x));
            }
            out.push('\n');
            for (i, curve) in dataset.curves.iter().enumerate() {
                let cells: Vec<String> = curve.y.iter().map(|v| fmt_num(*v)).collect();
                match &dataset.labels {
                    Some(labels) => {
                        let _ = writeln!(out, "{},{}", labels[i] + 1, cells.join(","));
                    }
                    None => {
                        let _ = writeln!(out, "{}", cells.join(","));
                    }
                }
            }
        }
        Layout::Long => {
            out.push_str(if dataset.labels.is_some() {
                "curve_id,x,y,label\n"
            } else {
                "curve_id,x,y\n"
            });
            for (i, curve) in dataset.curves.iter().enumerate() {
                for (x, y) in curve.x.iter().zip(&curve.y) {
                    let _ = write!(out, "{},{},{}", i + 1, fmt_num(*x), fmt_num(*y));
                    if let Some(labels) = &dataset.labels {
                        let _ = write!(out, ",{}", labels[i] + 1);
                    }
                    out.push('\n');
                }
            }
        }
    }
    Ok(out)
}

pub fn read_csv(path: impl AsRef<Path>, layout: Layout) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_csv(&text, layout)
}

pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>, layout: Layout) -> Result<(), DataError> {
    let path = path.as_ref();
    let text = format_csv(dataset, layout)?;
    fs::write(path, text).map_err(io_err(path))
}
