//! Text formats on disk. Every float is written with 17 significant digits,
//! so loading reproduces the in-memory values exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use hamkoop::decoders::QuadDecoder;
use hamkoop::presets::{Dataset, Preset};
use hamkoop::training::{EmbeddingModel, TrainingConfig, Variant};
use hamkoop::{PodBasis, SystemName, Trajectory};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn write_json_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |out: &mut String, k: usize| out.extend(std::iter::repeat_n(' ', k));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&fmt_f64(n.as_f64().expect("f64 number")));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) if items.iter().all(|i| i.is_number()) => {
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                write_json_value(out, item, indent);
            }
            out.push(']');
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                pad(out, indent + 2);
                write_json_value(out, item, indent + 2);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (k, (key, item)) in map.iter().enumerate() {
                pad(out, indent + 2);
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_json_value(out, item, indent + 2);
                out.push_str(if k + 1 < map.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push('}');
        }
    }
}

/// Pretty JSON with fixed 17-digit floats and sorted keys.
pub fn to_json_text<S: Serialize>(value: &S) -> CliResult<String> {
    let v = serde_json::to_value(value)
        .map_err(|e| CliError::Numerical(format!("cannot serialize: {e}")))?;
    let mut out = String::new();
    write_json_value(&mut out, &v, 0);
    out.push('\n');
    Ok(out)
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn save_json<S: Serialize>(path: &Path, value: &S) -> CliResult<()> {
    write_text(path, &to_json_text(value)?)
}

pub fn load_json<D: DeserializeOwned>(path: &Path) -> CliResult<D> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

/// Per-trajectory CSV: `t,x0..x{d-1}[,d0..d{d-1}]`.
pub fn trajectory_csv(traj: &Trajectory<f64>) -> String {
    let dim = traj.dim();
    let mut out = String::from("t");
    for i in 0..dim {
        let _ = write!(out, ",x{i}");
    }
    if traj.derivs.is_some() {
        for i in 0..dim {
            let _ = write!(out, ",d{i}");
        }
    }
    out.push('\n');
    for (k, t) in traj.times.iter().enumerate() {
        out.push_str(&fmt_f64(*t));
        for v in &traj.states[k] {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        if let Some(d) = &traj.derivs {
            for v in &d[k] {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
        }
        out.push('\n');
    }
    out
}

fn parse_f64(s: &str, path: &Path) -> CliResult<f64> {
    s.trim()
        .parse()
        .map_err(|_| CliError::invalid(format!("{}: bad number '{s}'", path.display())))
}

pub fn load_trajectory(path: &Path, id: &str) -> CliResult<Trajectory<f64>> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    let header = rdr
        .headers()
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?
        .clone();
    let xs = header.iter().filter(|h| h.starts_with('x')).count();
    let ds = header.iter().filter(|h| h.starts_with('d')).count();
    if header.get(0) != Some("t") || xs == 0 || (ds != 0 && ds != xs) || header.len() != 1 + xs + ds {
        return Err(CliError::invalid(format!(
            "{}: header must be t,x0..[,d0..]",
            path.display()
        )));
    }
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut derivs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
        let vals = rec
            .iter()
            .map(|s| parse_f64(s, path))
            .collect::<CliResult<Vec<f64>>>()?;
        times.push(vals[0]);
        states.push(vals[1..1 + xs].to_vec());
        if ds > 0 {
            derivs.push(vals[1 + xs..].to_vec());
        }
    }
    if times.is_empty() {
        return Err(CliError::invalid(format!("{}: no samples", path.display())));
    }
    Trajectory::new(times, states, (ds > 0).then_some(derivs), id)
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryEntry {
    pub file: String,
    pub split: Split,
    pub id: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub system: SystemName,
    pub n: usize,
    pub seed: u64,
    pub preset: Preset,
    pub trajectories: Vec<TrajectoryEntry>,
}

pub const MANIFEST: &str = "manifest.toml";

/// Writes `manifest.toml` plus one CSV per trajectory into `dir`.
pub fn save_dataset(dir: &Path, preset: &Preset, ds: &Dataset<f64>) -> CliResult<()> {
    let mut entries = Vec::new();
    for (split, trajs) in [(Split::Train, &ds.train), (Split::Test, &ds.test)] {
        for (k, t) in trajs.iter().enumerate() {
            let file = match split {
                Split::Train => format!("train-{k:03}.csv"),
                Split::Test => format!("test-{k:03}.csv"),
            };
            write_text(&dir.join(&file), &trajectory_csv(t))?;
            entries.push(TrajectoryEntry {
                file,
                split,
                id: t.ic_id.clone(),
            });
        }
    }
    let manifest = Manifest {
        system: ds.system,
        n: ds.n,
        seed: ds.seed,
        preset: preset.clone(),
        trajectories: entries,
    };
    let text = toml::to_string(&manifest)
        .map_err(|e| CliError::invalid(format!("cannot write manifest: {e}")))?;
    write_text(&dir.join(MANIFEST), &text)
}

pub fn load_dataset(dir: &Path) -> CliResult<(Manifest, Dataset<f64>)> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let manifest: Manifest =
        toml::from_str(&text).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for e in &manifest.trajectories {
        let t = load_trajectory(&dir.join(&e.file), &e.id)?;
        if t.dim() != 2 * manifest.n {
            return Err(CliError::invalid(format!(
                "{}: state dimension {} does not match n = {}",
                e.file,
                t.dim(),
                manifest.n
            )));
        }
        match e.split {
            Split::Train => train.push(t),
            Split::Test => test.push(t),
        }
    }
    let ds = Dataset {
        system: manifest.system,
        n: manifest.n,
        seed: manifest.seed,
        train,
        test,
    };
    Ok((manifest, ds))
}

/// Trained model with the settings that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub system: SystemName,
    pub variant: Variant,
    /// POD rank of the coordinates the model was trained on, if any.
    pub pod_rank: Option<usize>,
    pub training: TrainingConfig<f64>,
    pub model: EmbeddingModel<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PodFile {
    pub system: SystemName,
    pub basis: PodBasis<f64>,
    /// Cumulative energy fraction for ranks `1..`.
    pub energy: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DecoderFile {
    /// The POD lift itself; nothing to store beyond the basis.
    Linear { r: usize },
    Quadratic { decoder: QuadDecoder<f64>, history: Vec<f64> },
}

/// `name,value` rows of a loss history.
pub fn history_csv(history: &[hamkoop::training::LossBreakdown<f64>]) -> String {
    let mut out = String::from("epoch,total,encdec,symp,deri,l1\n");
    for (k, h) in history.iter().enumerate() {
        let _ = writeln!(
            out,
            "{k},{},{},{},{},{}",
            fmt_f64(h.total),
            fmt_f64(h.encdec),
            fmt_f64(h.symp),
            fmt_f64(h.deri),
            fmt_f64(h.l1)
        );
    }
    out
}

pub fn require(path: &Path, what: &str) -> CliResult<PathBuf> {
    if path.exists() {
        Ok(path.to_path_buf())
    } else {
        Err(CliError::invalid(format!(
            "{} not found at {} (run the producing command first)",
            what,
            path.display()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_roundtrip_exactly() {
        let values = vec![0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.0];
        let text = to_json_text(&values).unwrap();
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, values);
        assert!(text.contains("1.0000000000000001e-1"));
    }

    #[test]
    fn trajectory_csv_roundtrip() {
        let t = Trajectory::new(
            vec![0.0, 0.1, 0.2],
            vec![vec![1.0 / 7.0, 2.0], vec![3.0, -4.5], vec![1e-12, 0.3]],
            Some(vec![vec![0.1, 0.2]; 3]),
            "a",
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_text(&path, &trajectory_csv(&t)).unwrap();
        assert!(trajectory_csv(&t).starts_with("t,x0,x1,d0,d1\n"));
        assert_eq!(load_trajectory(&path, "a").unwrap(), t);
    }
}
