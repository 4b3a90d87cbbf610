use std::path::PathBuf;

use clap::Args;
use longrun_npc::simulate::sample_stationary;
use serde::Serialize;
use serde_json::json;

use crate::error::CliResult;
use crate::io::{self, SampleMeta};

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Model spec JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Samples CSV; metadata goes to the matching `.meta.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Sampling interval s.
    #[arg(long, default_value_t = 0.1)]
    pub interval: f64,
    #[arg(long, default_value_t = 20)]
    pub substeps: usize,
    /// Recorded states discarded before the path starts.
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    /// Number of recorded states T.
    #[arg(long, default_value_t = 10_000)]
    pub length: usize,
    /// Initial state `x1,...,xn`, needed when the density has no sampler.
    #[arg(long)]
    pub x0: Option<String>,
}

pub fn run(args: &SimulateArgs) -> CliResult<()> {
    let (_, model) = io::read_model(&args.model)?;
    let x0 = match &args.x0 {
        Some(text) => Some(io::parse_point(text, model.dimension())?),
        None => None,
    };
    let path = sample_stationary(
        &model,
        args.interval,
        args.length,
        args.burn_in,
        args.substeps,
        args.seed,
        x0.as_deref(),
    )?;
    io::write_samples(&args.out, &path)?;
    let meta = SampleMeta {
        dimension: path.dimension(),
        length: path.len(),
        interval: path.interval,
        seed: path.seed,
        substeps: path.substeps,
        burn_in: path.burn_in,
        boundary_policy: path.boundary_policy,
    };
    let value = io::with_config(json!(meta), "simulate", args);
    io::write_json(&io::sidecar_path(&args.out), &value)
}
