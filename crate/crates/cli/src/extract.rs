use std::path::PathBuf;

use clap::Args;
use longrun_npc::extract::{assemble_population, assemble_sample, solve_gevp, NpcSet, RidgePolicy};
use longrun_npc::sieve::{SieveBasis, SieveFamily};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::io;

#[derive(Debug, Args, Serialize)]
pub struct ExtractArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Sieve basis spec JSON.
    #[arg(long)]
    pub basis: PathBuf,
    /// Samples CSV; without it the population forms are assembled by
    /// quadrature.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// NpcSet JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of components kept (default: all).
    #[arg(long)]
    pub k: Option<usize>,
    /// Basis size for polynomial families, setting the degree to m - 1.
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub interval: Option<f64>,
    /// Fixed ridge in units of trace(W)/m; adaptive when absent.
    #[arg(long)]
    pub ridge: Option<f64>,
    /// Quadrature order for population forms.
    #[arg(long)]
    pub order: Option<usize>,
    /// Recorded in the output; the sample seed is taken from its metadata.
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV of the components on a plotting grid.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long, default_value_t = 201)]
    pub grid_points: usize,
}

/// Applies `--m` to polynomial families.
pub fn resize(basis: SieveBasis, m: Option<usize>) -> CliResult<SieveBasis> {
    let Some(m) = m else { return Ok(basis) };
    if m == 0 {
        return Err(CliError::Usage("--m must be at least 1".into()));
    }
    let mut spec = basis.spec().clone();
    match &mut spec.family {
        SieveFamily::HermiteTensor { max_degree, .. } | SieveFamily::Laguerre { max_degree, .. } => {
            *max_degree = m - 1;
        }
        _ => {
            return Err(CliError::Usage(
                "--m applies to hermite_tensor and laguerre bases only".into(),
            ))
        }
    }
    Ok(SieveBasis::from_spec(spec)?)
}

pub fn ridge_policy(ridge: Option<f64>) -> RidgePolicy {
    ridge.map_or(RidgePolicy::Auto, RidgePolicy::Fixed)
}

pub fn run(args: &ExtractArgs) -> CliResult<()> {
    let (_, model) = io::read_model(&args.model)?;
    let basis = resize(io::read_basis(&args.basis)?, args.m)?;
    let n = model.dimension();
    if basis.dimension() != n {
        return Err(CliError::Usage(format!(
            "basis dimension {} does not match model dimension {n}",
            basis.dimension()
        )));
    }
    let policy = ridge_policy(args.ridge);
    let (forms, extent) = match &args.samples {
        Some(path) => {
            let samples = io::read_samples(path, n, args.interval)?;
            let basis = basis.fit_transform(samples.states())?;
            let forms = assemble_sample(&basis, model.diffusion(), &samples, policy)?;
            (forms, bounds(samples.states(), n))
        }
        None => {
            let order = args.order.unwrap_or(2 * basis.len() + 8);
            let rule = io::population_rule(model.density(), order)?;
            let forms = assemble_population(&basis, model.density(), model.diffusion(), &rule, policy)?;
            let nodes: Vec<f64> = rule.iter().flat_map(|(x, _)| x.to_vec()).collect();
            (forms, bounds(&nodes, n))
        }
    };
    let k = args.k.unwrap_or(forms.basis.len());
    let npcs = solve_gevp(&forms, k)?;
    let mut value = serde_json::to_value(&npcs).expect("components serialize");
    value = io::with_config(value, "extract", args);
    io::write_json(&args.out, &value)?;
    if let Some(grid) = &args.grid {
        write_grid(grid, &npcs, &extent, args.grid_points)?;
    }
    Ok(())
}

fn bounds(states: &[f64], n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            states
                .iter()
                .skip(i)
                .step_by(n)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
        })
        .collect()
}

/// `x1..xn, psi_0..psi_{k-1}` on an even grid; tensor grid in two
/// dimensions.
pub fn write_grid(path: &std::path::Path, npcs: &NpcSet, extent: &[(f64, f64)], points: usize) -> CliResult<()> {
    let n = extent.len();
    if n > 2 {
        return Err(CliError::Usage("grid output supports dimensions 1 and 2".into()));
    }
    if points < 2 {
        return Err(CliError::Usage("--grid-points must be at least 2".into()));
    }
    let per = if n == 1 { points } else { ((points as f64).sqrt().ceil() as usize).max(2) };
    let axis = |i: usize| -> Vec<f64> {
        let (lo, hi) = extent[i];
        (0..per).map(|j| lo + (hi - lo) * j as f64 / (per - 1) as f64).collect()
    };
    let mut grid: Vec<Vec<f64>> = axis(0).into_iter().map(|x| vec![x]).collect();
    if n == 2 {
        let ys = axis(1);
        grid = grid
            .into_iter()
            .flat_map(|x| ys.iter().map(move |&y| vec![x[0], y]))
            .collect();
    }
    let mut out = String::new();
    let header: Vec<String> = (1..=n)
        .map(|i| format!("x{i}"))
        .chain((0..npcs.len()).map(|j| format!("psi_{j}")))
        .collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for x in &grid {
        let row: Vec<String> = x
            .iter()
            .map(|v| format!("{v}"))
            .chain(npcs.evaluate_all(x).iter().map(|v| format!("{v}")))
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    io::write_text(path, &out)
}
