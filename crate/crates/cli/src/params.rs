use clap::Args;
use serde::Serialize;

use bloomstream::params::predicted_fp;
use bloomstream::{ParamsConfig, SketchParams};

use crate::error::CliError;

#[derive(Debug, Clone, Args)]
pub struct SketchArgs {
    /// Expected number of distinct cells (filter capacity).
    #[arg(long, default_value_t = 6935)]
    pub capacity: u64,
    /// Target false-positive rate, in (0, 1).
    #[arg(long, default_value_t = 0.0078)]
    pub fp: f64,
    /// Decay rate per time unit, in (0, 1).
    #[arg(long, default_value_t = 0.001)]
    pub lambda: f64,
    /// Density above which a cell is dense.
    #[arg(long, default_value_t = 3.0)]
    pub density_threshold: f64,
}

#[derive(Debug, Args)]
pub struct ParamsArgs {
    #[command(flatten)]
    pub sketch: SketchArgs,
    /// Stream dimensionality.
    #[arg(long, default_value_t = 5)]
    pub dims: usize,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Serialize)]
pub struct ParamsReport {
    pub k: usize,
    pub p: u64,
    pub m: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub fragment_capacity: u64,
    pub predicted_fp: f64,
    /// One cluster signature.
    pub filter_bytes: u64,
    pub filter_kb: f64,
    /// Counters plus timestamps of the count-min sketch.
    pub sketch_bytes: u64,
}

impl ParamsReport {
    pub fn new(params: &SketchParams) -> Result<Self, CliError> {
        let g = params.geometry;
        let filter_bytes = (g.m() as u64).div_ceil(8);
        Ok(ParamsReport {
            k: g.k(),
            p: g.p(),
            m: g.m(),
            epsilon: params.guarantees.epsilon,
            delta: params.guarantees.delta,
            fragment_capacity: params.fragment_capacity()?,
            predicted_fp: predicted_fp(g.m(), g.k(), params.capacity),
            filter_bytes,
            // rounded up to two decimals
            filter_kb: (filter_bytes as f64 / 1024.0 * 100.0).ceil() / 100.0,
            sketch_bytes: g.m() as u64 * 16,
        })
    }
}

pub fn cmd_params(args: &ParamsArgs) -> Result<(), CliError> {
    let cfg = ParamsConfig {
        capacity: args.sketch.capacity,
        fp: args.sketch.fp,
        lambda: args.sketch.lambda,
        density_threshold: args.sketch.density_threshold,
        dims: args.dims,
        ..ParamsConfig::default()
    };
    let report = ParamsReport::new(&SketchParams::derive(&cfg)?)?;
    if args.json {
        let s = serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::io("serializing report", e))?;
        println!("{s}");
    } else {
        println!("k                  {}", report.k);
        println!("p                  {}", report.p);
        println!("m                  {}", report.m);
        println!("epsilon            {:.6e}", report.epsilon);
        println!("delta              {:.6e}", report.delta);
        println!("fragment capacity  {}", report.fragment_capacity);
        println!("predicted fp       {:.6}", report.predicted_fp);
        println!(
            "filter memory      {} bytes ({:.2} KB)",
            report.filter_bytes, report.filter_kb
        );
        println!("sketch memory      {} bytes", report.sketch_bytes);
    }
    Ok(())
}
