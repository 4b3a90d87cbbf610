use std::fs;
use std::path::{Path, PathBuf};

use longrun_npc::extract::NpcSet;
use longrun_npc::model::{DensityFamily, DensityModel, DiffusionModel, ModelSpec};
use longrun_npc::quadrature::QuadratureRule;
use longrun_npc::sieve::SieveBasis;
use longrun_npc::simulate::{BoundaryPolicy, SamplePath};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_model(path: &Path) -> CliResult<(ModelSpec, DiffusionModel)> {
    let spec: ModelSpec = read_json(path)?;
    let model = spec.build()?;
    Ok((spec, model))
}

pub fn read_basis(path: &Path) -> CliResult<SieveBasis> {
    read_json(path)
}

/// Components plus the config block of the run that produced them, if any.
pub fn read_npcs(path: &Path) -> CliResult<(NpcSet, Value)> {
    let mut value: Value = read_json(path)?;
    let config = value
        .as_object_mut()
        .and_then(|o| o.remove("config"))
        .unwrap_or(Value::Null);
    let npcs = serde_json::from_value(value).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    Ok((npcs, config))
}

/// Metadata written next to a samples CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleMeta {
    pub dimension: usize,
    pub length: usize,
    pub interval: f64,
    pub seed: Option<u64>,
    pub substeps: usize,
    pub burn_in: usize,
    pub boundary_policy: BoundaryPolicy,
}

pub fn sidecar_path(samples: &Path) -> PathBuf {
    samples.with_extension("meta.json")
}

/// Reads a `t,x1,...,xn` CSV. The interval comes from `interval`, else the
/// sidecar, else the spacing of the first two `t` values.
pub fn read_samples(path: &Path, dimension: usize, interval: Option<f64>) -> CliResult<SamplePath> {
    let csv_err = |message: String| CliError::Csv {
        path: path.to_path_buf(),
        message,
    };
    let file = fs::File::open(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers().map_err(|e| csv_err(e.to_string()))?.clone();
    let expected: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=dimension).map(|i| format!("x{i}")))
        .collect();
    if headers.iter().map(str::trim).ne(expected.iter().map(String::as_str)) {
        return Err(csv_err(format!(
            "line 1: expected header {}, found {}",
            expected.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut times = Vec::new();
    let mut states = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_err(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                csv_err(format!("line {line}, column {}: cannot parse {field:?} as a number", col + 1))
            })?;
            if col == 0 {
                times.push(v);
            } else {
                states.push(v);
            }
        }
    }
    let sidecar = sidecar_path(path);
    let meta: Option<SampleMeta> = if sidecar.exists() { Some(read_json(&sidecar)?) } else { None };
    let interval = match (interval, &meta, times.len()) {
        (Some(s), _, _) => s,
        (None, Some(m), _) => m.interval,
        (None, None, len) if len >= 2 => times[1] - times[0],
        _ => {
            return Err(CliError::Usage(
                "cannot infer the sampling interval; pass --interval".into(),
            ))
        }
    };
    let mut samples = SamplePath::from_states(states, dimension, interval)?;
    if let Some(m) = meta {
        samples.seed = m.seed;
        samples.substeps = m.substeps;
        samples.burn_in = m.burn_in;
        samples.boundary_policy = m.boundary_policy;
    }
    Ok(samples)
}

/// Shortest round-trip formatting keeps reruns byte-identical.
pub fn write_samples(path: &Path, samples: &SamplePath) -> CliResult<()> {
    let write_err = |e: csv::Error| CliError::Write {
        path: path.to_path_buf(),
        source: e.into(),
    };
    let mut writer = csv::Writer::from_path(path).map_err(write_err)?;
    let n = samples.dimension();
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=n).map(|i| format!("x{i}")))
        .collect();
    writer.write_record(&header).map_err(write_err)?;
    for (i, x) in samples.iter().enumerate() {
        let row: Vec<String> = std::iter::once(format!("{}", i as f64 * samples.interval))
            .chain(x.iter().map(|v| format!("{v}")))
            .collect();
        writer.write_record(&row).map_err(write_err)?;
    }
    writer.flush().map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json(path: &Path, value: &Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("values serialize");
    text.push('\n');
    write_text(path, &text)
}

/// Inserts the resolved run configuration under `"config"`.
pub fn with_config<C: Serialize>(mut value: Value, subcommand: &str, config: &C) -> Value {
    let mut cfg = serde_json::to_value(config).expect("configs serialize");
    if let Value::Object(map) = &mut cfg {
        map.insert("subcommand".into(), Value::String(subcommand.into()));
    }
    if let Value::Object(map) = &mut value {
        map.insert("config".into(), cfg);
    }
    value
}

/// Exact quadrature for the Gaussian and Gamma families.
pub fn population_rule(density: &DensityModel, order: usize) -> CliResult<QuadratureRule> {
    match density.family() {
        DensityFamily::Gaussian => Ok(QuadratureRule::gauss_hermite(density, order)?),
        DensityFamily::Gamma => Ok(QuadratureRule::gauss_laguerre(density, order)?),
        _ => Err(CliError::Usage(
            "population forms need a Gaussian or Gamma density; pass --samples".into(),
        )),
    }
}

/// Parses `"x1,x2,..."`.
pub fn parse_point(text: &str, dimension: usize) -> CliResult<Vec<f64>> {
    let point: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("cannot parse point {text:?}")))?;
    if point.len() != dimension {
        return Err(CliError::Usage(format!(
            "point {text:?} has {} coordinates, expected {dimension}",
            point.len()
        )));
    }
    Ok(point)
}
