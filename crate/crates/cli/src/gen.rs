use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::Args;

use bloomstream::bench::SyntheticStream;
use bloomstream::SyntheticStreamConfig;

use crate::error::CliError;

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 5)]
    pub dims: usize,
    #[arg(long, default_value_t = 5)]
    pub clusters: usize,
    /// Fraction of uniform noise instances, in [0, 1).
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    /// Minimum distance between cluster centers.
    #[arg(long, default_value_t = 4.0)]
    pub separation: f64,
    /// Per-dimension standard deviation of each cluster.
    #[arg(long, default_value_t = 1.0)]
    pub sd: f64,
    /// Side of the cube centers are drawn from; derived from the cluster
    /// count and separation when omitted.
    #[arg(long)]
    pub center_domain: Option<f64>,
    #[arg(long, default_value_t = 2000)]
    pub window: usize,
    #[arg(long, default_value_t = 10_000)]
    pub instances: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; standard output when omitted.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
}

impl GenArgs {
    pub fn config(&self) -> SyntheticStreamConfig {
        SyntheticStreamConfig {
            dims: self.dims,
            clusters: self.clusters,
            noise_fraction: self.noise,
            min_center_separation: self.separation,
            cluster_sd: self.sd,
            window_length: self.window,
            total_instances: self.instances,
            seed: self.seed,
            center_domain: self.center_domain,
        }
    }
}

pub fn cmd_gen(args: &GenArgs) -> Result<(), CliError> {
    let cfg = args.config();
    let stream = SyntheticStream::new(cfg.clone())?;
    let sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(File::create(path).map_err(|e| CliError::io(path.display(), e))?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(BufWriter::new(sink));
    let io_err = |e: csv::Error| CliError::io("writing stream", e);

    let mut header: Vec<String> = (1..=cfg.dims).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(io_err)?;
    let mut row = Vec::with_capacity(cfg.dims + 1);
    for lp in stream {
        row.clear();
        row.extend(lp.point.iter().map(f64::to_string));
        row.push(lp.truth.to_string());
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::io("writing stream", e))?;
    Ok(())
}
