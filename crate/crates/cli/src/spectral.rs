use std::path::PathBuf;

use clap::{Args, ValueEnum};
use longrun_npc::quadrature::QuadratureRule;
use longrun_npc::spectral::{self, SpectralFunction};
use longrun_npc::Expr;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    /// Coefficients only.
    Project,
    /// `exp(-t F) phi`.
    Transition,
    /// `(alpha + F)^{-1} phi`.
    Resolvent,
    /// Long-run variance of `phi(x_t)`.
    Longrun,
}

#[derive(Debug, Args, Serialize)]
pub struct SpectralArgs {
    /// NpcSet JSON.
    #[arg(long)]
    pub npcs: PathBuf,
    /// Function of `x1..xn`, projected onto the components.
    #[arg(long)]
    pub function: String,
    #[arg(long, value_enum)]
    pub op: Operation,
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Model whose density supplies the projection measure.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Samples giving an empirical projection measure instead.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    #[arg(long)]
    pub interval: Option<f64>,
    #[arg(long)]
    pub order: Option<usize>,
    /// Points `x1,...,xn` at which the result is evaluated.
    #[arg(long)]
    pub at: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Recorded only.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(args: &SpectralArgs) -> CliResult<()> {
    let (npcs, _) = io::read_npcs(&args.npcs)?;
    let n = npcs.basis.dimension();
    let expr = Expr::parse(&args.function, n)?;
    let measure = match (&args.samples, &args.model) {
        (Some(path), _) => {
            let samples = io::read_samples(path, n, args.interval)?;
            QuadratureRule::empirical(samples.states(), n)?
        }
        (None, Some(model)) => {
            let (_, model) = io::read_model(model)?;
            io::population_rule(model.density(), args.order.unwrap_or(2 * npcs.basis.len() + 8))?
        }
        (None, None) => return Err(CliError::Usage("pass --model or --samples for the projection measure".into())),
    };
    let sf = spectral::project(|x| expr.eval(x), &npcs, &measure)?;
    let result: Value = match args.op {
        Operation::Project => json!(sf),
        Operation::Transition => {
            let t = args.t.ok_or_else(|| CliError::Usage("--t is required for transition".into()))?;
            json!(spectral::transition_apply(&sf, t, &npcs)?)
        }
        Operation::Resolvent => {
            let a = args.alpha.ok_or_else(|| CliError::Usage("--alpha is required for resolvent".into()))?;
            json!(spectral::resolvent_apply(&sf, a, &npcs)?)
        }
        Operation::Longrun => json!(spectral::longrun_variance(&sf, &npcs)?),
    };
    let mut values = Vec::new();
    if !args.at.is_empty() {
        let image: SpectralFunction = match args.op {
            Operation::Longrun => {
                return Err(CliError::Usage("--at does not apply to the long-run variance".into()))
            }
            _ => serde_json::from_value(result.clone()).expect("spectral functions round-trip"),
        };
        for p in &args.at {
            let x = io::parse_point(p, n)?;
            values.push(json!({ "x": x, "value": spectral::evaluate(&image, &npcs, &x)? }));
        }
    }
    let mut body = json!({ "projection": sf, "result": result });
    if !values.is_empty() {
        body["values"] = json!(values);
    }
    io::write_json(&args.out, &io::with_config(body, "spectral", args))
}
