//! Tabular stream input.
//!
//! Comma-separated rows with an optional header. Feature columns are picked
//! by name or zero-based index; a `label` column supplies ground truth and a
//! `t` column supplies timestamps when present. Malformed rows are reported
//! individually and never stop the reader.

use std::collections::HashMap;
use std::io::Read;

use crate::bench::Truth;
use crate::error::{Error, Result};

pub const DEFAULT_LABEL_COLUMN: &str = "label";
pub const DEFAULT_TIME_COLUMN: &str = "t";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl ColumnRef {
    /// All-digit text is an index, anything else a name.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::Input("empty column reference".into()));
        }
        if s.bytes().all(|b| b.is_ascii_digit()) {
            s.parse()
                .map(ColumnRef::Index)
                .map_err(|_| Error::Input(format!("column index {s} is too large")))
        } else {
            Ok(ColumnRef::Name(s.to_string()))
        }
    }

    fn resolve(&self, header: Option<&[String]>, width: usize) -> Result<usize> {
        match self {
            ColumnRef::Index(i) if *i < width => Ok(*i),
            ColumnRef::Index(i) => Err(Error::Input(format!(
                "column index {i} is out of range for {width} columns"
            ))),
            ColumnRef::Name(n) => header
                .and_then(|h| h.iter().position(|c| c == n))
                .ok_or_else(|| Error::Input(format!("no column named {n:?}"))),
        }
    }
}

/// Comma-separated list of column references, e.g. `x,y,4`.
pub fn parse_column_list(s: &str) -> Result<Vec<ColumnRef>> {
    let refs = s.split(',').map(ColumnRef::parse).collect::<Result<Vec<_>>>()?;
    if refs.is_empty() {
        return Err(Error::Input("empty column list".into()));
    }
    Ok(refs)
}

/// Which columns carry features, truth and time. Unset entries fall back to
/// the defaults described in the module docs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ColumnSpec {
    pub features: Option<Vec<ColumnRef>>,
    pub label: Option<ColumnRef>,
    pub time: Option<ColumnRef>,
    /// Treat the input as having no truth column even if one is present.
    pub ignore_label: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedColumns {
    pub features: Vec<usize>,
    pub label: Option<usize>,
    pub time: Option<usize>,
    pub width: usize,
}

impl ColumnSpec {
    pub fn resolve(&self, header: Option<&[String]>, width: usize) -> Result<ResolvedColumns> {
        let by_default_name = |name: &str| header.and_then(|h| h.iter().position(|c| c == name));
        let label = if self.ignore_label {
            None
        } else {
            match &self.label {
                Some(r) => Some(r.resolve(header, width)?),
                None => by_default_name(DEFAULT_LABEL_COLUMN),
            }
        };
        let time = match &self.time {
            Some(r) => Some(r.resolve(header, width)?),
            None => by_default_name(DEFAULT_TIME_COLUMN),
        };
        let features = match &self.features {
            Some(refs) => refs
                .iter()
                .map(|r| r.resolve(header, width))
                .collect::<Result<Vec<_>>>()?,
            None => {
                let skip_label = label.or_else(|| by_default_name(DEFAULT_LABEL_COLUMN));
                (0..width)
                    .filter(|&i| Some(i) != skip_label && Some(i) != time)
                    .collect()
            }
        };
        if features.is_empty() {
            return Err(Error::Input("no feature columns selected".into()));
        }
        for &f in &features {
            if Some(f) == label || Some(f) == time {
                return Err(Error::Input(format!(
                    "column {f} cannot be both a feature and the label or time column"
                )));
            }
        }
        Ok(ResolvedColumns {
            features,
            label,
            time,
            width,
        })
    }
}

/// One parsed data row.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    /// Zero-based position among data rows, counting malformed ones.
    pub row: u64,
    pub features: Vec<f64>,
    pub truth: Option<Truth>,
    pub t: Option<f64>,
}

/// A data row that could not be used.
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    pub row: u64,
    pub reason: String,
}

/// Maps truth strings to [`Truth`] values; `NOISE` is reserved, every other
/// distinct string gets the next cluster id.
#[derive(Debug, Clone, Default)]
pub struct TruthInterner {
    ids: HashMap<String, u32>,
    names: Vec<String>,
}

impl TruthInterner {
    pub fn intern(&mut self, s: &str) -> Truth {
        let s = s.trim();
        if s == "NOISE" {
            return Truth::Noise;
        }
        if let Some(&id) = self.ids.get(s) {
            return Truth::Cluster(id);
        }
        let id = self.names.len() as u32;
        self.names.push(s.to_string());
        self.ids.insert(s.to_string(), id);
        Truth::Cluster(id)
    }

    pub fn name(&self, truth: Truth) -> Option<&str> {
        match truth {
            Truth::Noise => Some("NOISE"),
            Truth::Cluster(id) => self.names.get(id as usize).map(String::as_str),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Streaming CSV reader producing [`Record`]s.
pub struct RecordReader<R: Read> {
    inner: csv::Reader<R>,
    spec: ColumnSpec,
    header: Option<Vec<String>>,
    columns: Option<ResolvedColumns>,
    truths: TruthInterner,
    row: u64,
    buf: csv::StringRecord,
}

impl<R: Read> RecordReader<R> {
    /// Reads the header (when `has_header`) and, if it is present, resolves
    /// the column spec against it immediately.
    pub fn new(source: R, has_header: bool, spec: ColumnSpec) -> Result<Self> {
        let mut inner = csv::ReaderBuilder::new()
            .has_headers(has_header)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(source);
        let (header, columns) = if has_header {
            let h: Vec<String> = inner
                .headers()
                .map_err(|e| {
                    if e.is_io_error() {
                        Error::Io(e.to_string())
                    } else {
                        Error::Input(format!("unreadable header: {e}"))
                    }
                })?
                .iter()
                .map(str::to_string)
                .collect();
            if h.is_empty() || (h.len() == 1 && h[0].is_empty()) {
                (None, None)
            } else {
                let cols = spec.resolve(Some(&h), h.len())?;
                (Some(h), Some(cols))
            }
        } else {
            (None, None)
        };
        Ok(RecordReader {
            inner,
            spec,
            header,
            columns,
            truths: TruthInterner::default(),
            row: 0,
            buf: csv::StringRecord::new(),
        })
    }

    pub fn header(&self) -> Option<&[String]> {
        self.header.as_deref()
    }

    /// Column layout, known after the header or the first data row.
    pub fn columns(&self) -> Option<&ResolvedColumns> {
        self.columns.as_ref()
    }

    pub fn truths(&self) -> &TruthInterner {
        &self.truths
    }

    /// Next row: `Ok(Ok(..))` for a usable record, `Ok(Err(RowError))` for a
    /// malformed one. The outer `Err` is fatal: a read failure, or a column
    /// spec that cannot be resolved against the first headerless row.
    pub fn next_record(&mut self) -> Option<Result<std::result::Result<Record, RowError>>> {
        match self.inner.read_record(&mut self.buf) {
            Ok(false) => return None,
            Ok(true) => {}
            Err(e) => {
                let row = self.row;
                self.row += 1;
                if e.is_io_error() {
                    return Some(Err(Error::Io(e.to_string())));
                }
                return Some(Ok(Err(RowError {
                    row,
                    reason: e.to_string(),
                })));
            }
        }
        let row = self.row;
        self.row += 1;
        if self.columns.is_none() {
            match self.spec.resolve(None, self.buf.len()) {
                Ok(c) => self.columns = Some(c),
                Err(e) => return Some(Err(e)),
            }
        }
        let cols = self.columns.as_ref().expect("resolved above");
        Some(Ok(parse_row(&self.buf, cols, &mut self.truths, row)))
    }
}

impl<R: Read> Iterator for RecordReader<R> {
    type Item = Result<std::result::Result<Record, RowError>>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_record()
    }
}

fn parse_row(
    rec: &csv::StringRecord,
    cols: &ResolvedColumns,
    truths: &mut TruthInterner,
    row: u64,
) -> std::result::Result<Record, RowError> {
    let fail = |reason: String| RowError { row, reason };
    if rec.len() != cols.width {
        return Err(fail(format!("expected {} fields, found {}", cols.width, rec.len())));
    }
    let features = cols
        .features
        .iter()
        .map(|&i| {
            let field = &rec[i];
            field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| fail(format!("field {i} ({field:?}) is not a finite number")))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let t = match cols.time {
        Some(i) => Some(
            rec[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| fail(format!("timestamp {:?} is not a finite number", &rec[i])))?,
        ),
        None => None,
    };
    let truth = cols.label.map(|i| truths.intern(&rec[i]));
    Ok(Record {
        row,
        features,
        truth,
        t,
    })
}

/// Streaming min-max scaling to `[0, 1]`. Bounds widen as values arrive;
/// constant columns map to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxNormalizer {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl MinMaxNormalizer {
    pub fn new(dims: usize) -> Self {
        MinMaxNormalizer {
            min: vec![f64::INFINITY; dims],
            max: vec![f64::NEG_INFINITY; dims],
        }
    }

    pub fn observe(&mut self, x: &[f64]) {
        for ((lo, hi), &v) in self.min.iter_mut().zip(&mut self.max).zip(x) {
            *lo = lo.min(v);
            *hi = hi.max(v);
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| {
                let span = hi - lo;
                if span > 0.0 && span.is_finite() {
                    ((v - lo) / span).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }
}
