use std::path::PathBuf;

use clap::{Args, ValueEnum};
use longrun_npc::criteria::{
    check_algebraic_tail, check_core, check_divergent_potential, check_scalar, check_thin_tail, RadialGrid,
};
use longrun_npc::model::{Penalty, PenaltySpec};
use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Which {
    Scalar,
    Core,
    DivergentPotential,
    ThinTail,
    AlgebraicTail,
}

#[derive(Debug, Args, Serialize)]
pub struct CriteriaArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Penalty spec JSON for varsigma = exp(v); varsigma = 1 when absent.
    #[arg(long)]
    pub penalty: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Seed of the Monte Carlo sphere rule (dimension above 3).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Radius ladder `r1,r2,...`; default 2,4,...,1024.
    #[arg(long, value_delimiter = ',')]
    pub ladder: Option<Vec<f64>>,
    /// Checks to run; default every applicable one.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub criterion: Option<Vec<Which>>,
    /// Lower bound on varsigma^2 (algebraic tail) and on the smallest
    /// eigenvalue of Sigma (divergent potential).
    #[arg(long)]
    pub lower_bound: Option<f64>,
}

fn penalty_floor(penalty: &Penalty) -> Option<f64> {
    match penalty {
        Penalty::Constant(c) => Some(c * c),
        Penalty::Polynomial { lower_bound, .. } => Some(*lower_bound),
        Penalty::ExpQuadratic { a } if *a >= 0.0 => Some(1.0),
        _ => None,
    }
}

pub fn run(args: &CriteriaArgs) -> CliResult<()> {
    let (_, model) = io::read_model(&args.model)?;
    let n = model.dimension();
    let penalty = match &args.penalty {
        Some(path) => io::read_json::<PenaltySpec>(path)?.build(n)?,
        None => Penalty::Constant(1.0),
    };
    let ladder = args.ladder.clone().unwrap_or_else(RadialGrid::default_ladder);
    let grid = RadialGrid::new(n, ladder, args.seed)?;
    let which = args.criterion.clone().unwrap_or_else(|| {
        let mut all = vec![Which::Core, Which::DivergentPotential, Which::ThinTail, Which::AlgebraicTail];
        if n == 1 {
            all.insert(0, Which::Scalar);
        }
        all
    });
    let density = model.density();
    let diffusion = model.diffusion();
    let mut reports = Vec::new();
    for w in which {
        let report = match w {
            Which::Scalar => check_scalar(density, &penalty, &grid)?,
            Which::Core => check_core(density, diffusion, &grid)?,
            Which::DivergentPotential => {
                let bound = match args.lower_bound {
                    Some(b) => b,
                    None => {
                        // Probe result: the smallest eigenvalue of Sigma along the rays.
                        let mut low = f64::INFINITY;
                        for ray in grid.rays_in(density.space())? {
                            for &r in grid.radii() {
                                let x: Vec<f64> = ray.iter().map(|c| c * r).collect();
                                low = low.min(diffusion.min_eigenvalue(&x));
                            }
                        }
                        low.max(f64::MIN_POSITIVE)
                    }
                };
                check_divergent_potential(density, diffusion, bound, &grid)?
            }
            Which::ThinTail => check_thin_tail(density, &penalty, &grid)?,
            Which::AlgebraicTail => {
                let bound = args.lower_bound.or_else(|| penalty_floor(&penalty)).ok_or_else(|| {
                    CliError::Usage("the algebraic tail check needs --lower-bound for this penalty".into())
                })?;
                check_algebraic_tail(density, &penalty, bound, &grid)?
            }
        };
        reports.push(report);
    }
    let value = io::with_config(json!({ "reports": reports }), "criteria", args);
    io::write_json(&args.out, &value)
}
