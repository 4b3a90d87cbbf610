use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use longrun_npc::extract::{NpcSet, Provenance};
use longrun_npc::sieve::SieveFamily;
use longrun_npc::validate::ValidationReport;
use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};
use crate::extract::write_grid;
use crate::io;

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// NpcSet JSON written by `extract`.
    #[arg(long)]
    pub npcs: PathBuf,
    /// Reports written by `validate`.
    #[arg(long)]
    pub validation: Option<PathBuf>,
    /// Human-readable summary.
    #[arg(long)]
    pub out: PathBuf,
    /// Plot data CSV; defaults to the summary path with a `.csv` extension.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    #[arg(long, default_value_t = 201)]
    pub grid_points: usize,
    /// Plot range per coordinate `lo1,...,lon`; defaults from the basis.
    #[arg(long, value_delimiter = ',')]
    pub lower: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub upper: Option<Vec<f64>>,
}

/// Scientific notation outside `[1e-4, 1e6)`.
fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e6).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn family_name(f: &SieveFamily) -> &'static str {
    match f {
        SieveFamily::HermiteTensor { .. } => "hermite_tensor",
        SieveFamily::Laguerre { .. } => "laguerre",
        SieveFamily::GaussianRbf { .. } => "gaussian_rbf",
        SieveFamily::BsplineTensor { .. } => "bspline_tensor",
    }
}

/// Plot range suggested by the basis.
fn default_extent(npcs: &NpcSet) -> Vec<(f64, f64)> {
    let b = &npcs.basis;
    let n = b.dimension();
    (0..n)
        .map(|i| match b.family() {
            SieveFamily::HermiteTensor { .. } => (b.shift()[i] - 4.0 * b.scale()[i], b.shift()[i] + 4.0 * b.scale()[i]),
            SieveFamily::Laguerre { max_degree, alpha, .. } => {
                let top = 4.0 * (*max_degree as f64 + alpha + 1.0);
                (b.shift()[i] + 1e-3 * b.scale()[i], b.shift()[i] + top * b.scale()[i])
            }
            SieveFamily::GaussianRbf { centers, .. } => {
                let (lo, hi) = centers
                    .iter()
                    .map(|c| c[i])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
                let pad = 0.25 * (hi - lo).max(1.0);
                (lo - pad, hi + pad)
            }
            SieveFamily::BsplineTensor { lower, upper, .. } => (lower[i], upper[i]),
        })
        .collect()
}

pub fn run(args: &ReportArgs) -> CliResult<()> {
    let (npcs, config) = io::read_npcs(&args.npcs)?;
    let reports: Vec<ValidationReport> = match &args.validation {
        Some(path) => {
            let value: Value = io::read_json(path)?;
            let list = value.get("reports").cloned().unwrap_or(value);
            serde_json::from_value(list).map_err(|source| CliError::Json {
                path: path.clone(),
                source,
            })?
        }
        None => Vec::new(),
    };
    let n = npcs.basis.dimension();
    let mut extent = default_extent(&npcs);
    if let Some(lo) = &args.lower {
        if lo.len() != n {
            return Err(CliError::Usage(format!("--lower needs {n} values")));
        }
        extent.iter_mut().zip(lo).for_each(|(e, l)| e.0 = *l);
    }
    if let Some(hi) = &args.upper {
        if hi.len() != n {
            return Err(CliError::Usage(format!("--upper needs {n} values")));
        }
        extent.iter_mut().zip(hi).for_each(|(e, h)| e.1 = *h);
    }
    let plot = args.plot.clone().unwrap_or_else(|| args.out.with_extension("csv"));
    write_grid(&plot, &npcs, &extent, args.grid_points)?;

    let mut s = String::new();
    writeln!(s, "Nonlinear principal components").unwrap();
    writeln!(
        s,
        "basis: {} (dimension {}, m = {})",
        family_name(npcs.basis.family()),
        n,
        npcs.basis.len()
    )
    .unwrap();
    match &npcs.provenance {
        Provenance::Sample { t, interval, seed } => {
            let seed = seed.map_or("none".to_string(), |s| s.to_string());
            writeln!(s, "forms: sample, T = {t}, s = {interval}, seed = {seed}").unwrap();
        }
        Provenance::Population { quadrature, nodes } => {
            writeln!(s, "forms: population, {quadrature} quadrature with {nodes} nodes").unwrap();
        }
    }
    if let Some(model) = config.get("model").and_then(Value::as_str) {
        writeln!(s, "model: {model}").unwrap();
    }
    writeln!(s, "ridge: {}", num(npcs.ridge)).unwrap();
    writeln!(s, "\n  j  delta").unwrap();
    for (j, d) in npcs.delta.iter().enumerate() {
        writeln!(s, "{j:>3}  {}", num(*d)).unwrap();
    }
    if !npcs.clusters.is_empty() {
        writeln!(s, "clusters: {:?}", npcs.clusters).unwrap();
    }
    for w in &npcs.warnings {
        writeln!(s, "warning: {w}").unwrap();
    }
    if !reports.is_empty() {
        writeln!(s, "\nvalidation:").unwrap();
        for r in &reports {
            let status = if r.pass { "PASS" } else { "FAIL" };
            let role = if r.required { "required" } else { "info" };
            let se = r.standard_error.map_or(String::new(), |e| format!(" (se {})", num(e)));
            writeln!(s, "  {:<18} {status} [{role}] statistic {}{se}", r.test, num(r.statistic)).unwrap();
        }
        let failed = reports.iter().filter(|r| r.required && !r.pass).count();
        writeln!(s, "overall: {}", if failed == 0 { "PASS" } else { "FAIL" }).unwrap();
    }
    writeln!(s, "\nplot data: {}", plot.display()).unwrap();
    io::write_text(&args.out, &s)
}
