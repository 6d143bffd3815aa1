use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::PathBuf;

use clap::Args;

use bloomstream::bench::{HorizonEvaluator, WindowMetrics};
use bloomstream::io::{parse_column_list, ColumnRef, ColumnSpec, MinMaxNormalizer, Record, RecordReader};
use bloomstream::{BloomStreamModel, ParamsConfig, SketchParams};

use crate::error::CliError;
use crate::params::SketchArgs;

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Input CSV; standard input when omitted.
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    /// The input has no header row.
    #[arg(long)]
    pub no_header: bool,
    /// Feature columns by name or zero-based index, comma-separated.
    /// Defaults to every column except the label and time columns.
    #[arg(long)]
    pub features: Option<String>,
    /// Ground-truth column (default: `label` if present).
    #[arg(long)]
    pub label_column: Option<String>,
    /// Ignore any ground-truth column.
    #[arg(long)]
    pub no_label: bool,
    /// Timestamp column (default: `t` if present, else the row index).
    #[arg(long)]
    pub time_column: Option<String>,
    #[command(flatten)]
    pub sketch: SketchArgs,
    /// Grid cell width.
    #[arg(long, default_value_t = 1.5)]
    pub resolution: f64,
    /// Grid origin, comma-separated; zero when omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub origin: Option<Vec<f64>>,
    /// Expected dimensionality; must match the selected feature columns.
    #[arg(long)]
    pub dims: Option<usize>,
    /// Instances per evaluation window.
    #[arg(long, default_value_t = 1000)]
    pub horizon: usize,
    /// Hash seeds, comma-separated pair.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub seeds: Option<Vec<u64>>,
    /// Min-max scale features using bounds seen so far, after buffering
    /// this many rows to seed the bounds. An approximation: later values
    /// outside the seen range are clipped.
    #[arg(long)]
    pub normalize_warmup: Option<usize>,
    /// Assignments CSV; standard output when omitted.
    #[arg(short, long)]
    pub assignments: Option<PathBuf>,
    /// Per-window metrics as JSON lines.
    #[arg(short, long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Default)]
struct Summary {
    rows: u64,
    malformed: u64,
    rejected: u64,
    windows: usize,
}

struct Driver<'a> {
    args: &'a RunArgs,
    model: Option<BloomStreamModel>,
    eval: HorizonEvaluator,
    assignments: csv::Writer<Box<dyn Write>>,
    metrics: Option<BufWriter<File>>,
    summary: Summary,
}

impl Driver<'_> {
    fn process(&mut self, rec: &Record, x: &[f64]) -> Result<(), CliError> {
        if self.model.is_none() {
            self.model = Some(build_model(self.args, x.len())?);
        }
        let model = self.model.as_mut().expect("built above");
        let t = rec.t.unwrap_or(rec.row as f64);
        match self.eval.observe(model, x, t, rec.truth) {
            Ok((pred, window)) => {
                self.assignments
                    .write_record([rec.row.to_string(), pred.to_string()])
                    .map_err(|e| CliError::io("writing assignments", e))?;
                if let Some(w) = window {
                    self.emit(&w)?;
                }
            }
            Err(_) => self.summary.rejected += 1,
        }
        Ok(())
    }

    fn emit(&mut self, w: &WindowMetrics) -> Result<(), CliError> {
        self.summary.windows += 1;
        if let Some(out) = &mut self.metrics {
            serde_json::to_writer(&mut *out, w).map_err(|e| CliError::io("writing metrics", e))?;
            writeln!(out).map_err(|e| CliError::io("writing metrics", e))?;
        }
        Ok(())
    }

    fn finish(mut self) -> Result<Summary, CliError> {
        if let Some(model) = self.model.as_mut() {
            if let Some(w) = self.eval.finish(model) {
                self.emit(&w)?;
            }
        }
        self.assignments
            .flush()
            .map_err(|e| CliError::io("writing assignments", e))?;
        if let Some(m) = &mut self.metrics {
            m.flush().map_err(|e| CliError::io("writing metrics", e))?;
        }
        if let Some(model) = &self.model {
            let s = model.snapshot_stats(0.0);
            eprintln!(
                "clusters created {}, expansions {}, mergers {}, expired {}",
                s.clusters_created, s.expansions, s.mergers, s.clusters_expired
            );
        }
        Ok(self.summary)
    }
}

fn build_model(args: &RunArgs, dims: usize) -> Result<BloomStreamModel, CliError> {
    if let Some(expected) = args.dims {
        if expected != dims {
            return Err(CliError::Config(format!(
                "--dims {expected} does not match the {dims} selected feature columns"
            )));
        }
    }
    let cfg = ParamsConfig {
        capacity: args.sketch.capacity,
        fp: args.sketch.fp,
        lambda: args.sketch.lambda,
        density_threshold: args.sketch.density_threshold,
        dims,
        resolution: args.resolution,
        origin: args.origin.clone(),
    };
    let params = SketchParams::derive(&cfg)?;
    Ok(match &args.seeds {
        Some(s) => BloomStreamModel::with_seeds(params, s[0], s[1])?,
        None => BloomStreamModel::new(params)?,
    })
}

fn column_spec(args: &RunArgs) -> Result<ColumnSpec, CliError> {
    let usage = |e: bloomstream::Error| CliError::Usage(e.to_string());
    Ok(ColumnSpec {
        features: args.features.as_deref().map(parse_column_list).transpose().map_err(usage)?,
        label: args.label_column.as_deref().map(ColumnRef::parse).transpose().map_err(usage)?,
        time: args.time_column.as_deref().map(ColumnRef::parse).transpose().map_err(usage)?,
        ignore_label: args.no_label,
    })
}

fn create(path: &PathBuf) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path.display(), e))
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    if args.normalize_warmup == Some(0) {
        return Err(CliError::Usage("normalize-warmup must be at least 1".into()));
    }
    let eval = HorizonEvaluator::new(args.horizon)?;
    let spec = column_spec(args)?;
    // parameters are checked up front so bad values fail even on empty input
    let probe_dims = args
        .dims
        .or(args.origin.as_ref().map(Vec::len))
        .unwrap_or(1);
    build_model(args, probe_dims).map(drop)?;

    let source: Box<dyn Read> = match &args.input {
        Some(path) => Box::new(File::open(path).map_err(|e| CliError::io(path.display(), e))?),
        None => Box::new(io::stdin().lock()),
    };
    let sink: Box<dyn Write> = match &args.assignments {
        Some(path) => Box::new(create(path)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let metrics = args.metrics.as_ref().map(create).transpose()?;
    let mut assignments = csv::Writer::from_writer(sink);
    assignments
        .write_record(["row_id", "predicted_label"])
        .map_err(|e| CliError::io("writing assignments", e))?;

    let mut reader = RecordReader::new(BufReader::new(source), !args.no_header, spec)?;
    let mut driver = Driver {
        args,
        model: None,
        eval,
        assignments,
        metrics,
        summary: Summary::default(),
    };
    let mut normalizer: Option<MinMaxNormalizer> = None;
    let mut warmup: Vec<Record> = Vec::new();

    while let Some(next) = reader.next_record() {
        driver.summary.rows += 1;
        let rec = match next? {
            Ok(rec) => rec,
            Err(bad) => {
                driver.summary.malformed += 1;
                eprintln!("row {}: skipped, {}", bad.row, bad.reason);
                continue;
            }
        };
        let Some(n) = args.normalize_warmup else {
            driver.process(&rec, &rec.features)?;
            continue;
        };
        let norm = normalizer.get_or_insert_with(|| MinMaxNormalizer::new(rec.features.len()));
        norm.observe(&rec.features);
        if warmup.len() < n {
            warmup.push(rec);
            if warmup.len() == n {
                for w in warmup.drain(..) {
                    driver.process(&w, &norm.apply(&w.features))?;
                }
            }
        } else {
            driver.process(&rec, &norm.apply(&rec.features))?;
        }
    }
    // input ended inside the warm-up
    if let Some(norm) = &normalizer {
        for w in std::mem::take(&mut warmup) {
            driver.process(&w, &norm.apply(&w.features))?;
        }
    }

    let s = driver.finish()?;
    eprintln!(
        "rows {}, malformed {}, rejected {}, windows {}",
        s.rows, s.malformed, s.rejected, s.windows
    );
    Ok(())
}
