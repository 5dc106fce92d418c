//! Experiment files.
//!
//! ```toml
//! [system]
//! period = 1
//! reliabilities = [0.5, 0.5]
//! throughputs = [0.25, 0.25]     # or: split_weights = [0.5, 0.5]
//! debt_weights = [1.0, 1.0]      # optional
//!
//! [[policies]]
//! kind = "mwdf"
//!
//! [[policies]]
//! kind = "fixed_order"
//! order = [1, 2]
//!
//! [run]
//! frames = 1000000
//! seed_count = 20                # or: seeds = [0, 7, 9]
//! t_min = 1000
//! record_stride = 64             # optional
//! initial_debts = [0.0, 0.0]     # optional
//! drift_kappa = 3.0              # optional, two clients only
//!
//! [output]
//! dir = "out"
//! ```
//!
//! Unknown keys anywhere are errors.

use std::path::{Path, PathBuf};

use debtsim::engine::DEFAULT_T_MIN;
use debtsim::feasibility::boundary_throughputs;
use debtsim::model::{Channel, ClientId, SystemConfig};
use debtsim::policy::{PolicyKind, PolicySpec, TieBreak};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub system: SystemSection,
    #[serde(default)]
    pub policies: Vec<PolicyEntry>,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub period: usize,
    pub reliabilities: Vec<f64>,
    pub throughputs: Option<Vec<f64>>,
    /// Shares of the full-set boundary, `q_j = w_j p_j τ (1 - I_full)`.
    pub split_weights: Option<Vec<f64>>,
    pub debt_weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyEntry {
    pub kind: String,
    pub order: Option<Vec<u32>>,
    pub weights: Option<Vec<f64>>,
    pub tie_break: Option<TieBreak>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub frames: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub seed_count: Option<u64>,
    pub t_min: Option<u64>,
    pub record_stride: Option<u64>,
    pub initial_debts: Option<Vec<f64>>,
    pub drift_kappa: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seeds: Option<Vec<u64>>,
    pub frames: Option<u64>,
    pub policies: Vec<String>,
    pub t_min: Option<u64>,
    pub stride: Option<u64>,
}

/// Fully resolved and validated experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Experiment {
    pub system: SystemConfig<f64>,
    pub policies: Vec<PolicySpec<f64>>,
    pub frames: u64,
    pub seeds: Vec<u64>,
    pub t_min: u64,
    pub record_stride: Option<u64>,
    pub initial_debts: Option<Vec<f64>>,
    pub drift_kappa: Option<f64>,
    pub out_dir: PathBuf,
}

pub const DEFAULT_FRAMES: u64 = 100_000;
pub const DEFAULT_OUT_DIR: &str = "out";

impl ExperimentFile {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Builds the system: explicit throughputs, or a point on the full-set
    /// face when split weights are given.
    pub fn system(&self) -> CliResult<SystemConfig<f64>> {
        let s = &self.system;
        let throughputs = match (&s.throughputs, &s.split_weights) {
            (Some(q), None) => q.clone(),
            (None, Some(w)) => {
                let ch = Channel::new(s.period, s.reliabilities.clone())?;
                boundary_throughputs(&ch, w)?.throughputs
            }
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "system: throughputs and split_weights are mutually exclusive".into(),
                ))
            }
            (None, None) => {
                return Err(CliError::Config(
                    "system: one of throughputs or split_weights is required".into(),
                ))
            }
        };
        let n = s.reliabilities.len();
        let weights = s.debt_weights.clone().unwrap_or_else(|| vec![1.0; n]);
        Ok(SystemConfig::with_weights(
            s.period,
            s.reliabilities.clone(),
            throughputs,
            weights,
        )?)
    }

    pub fn resolve(&self, overrides: &Overrides) -> CliResult<Experiment> {
        let system = self.system()?;
        let n = system.n_clients();
        let policies = if overrides.policies.is_empty() {
            if self.policies.is_empty() {
                return Err(CliError::Config("policies: at least one policy is required".into()));
            }
            self.policies
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    p.to_spec(n)
                        .map_err(|e| CliError::Config(format!("policies[{i}]: {e}")))
                })
                .collect::<CliResult<Vec<_>>>()?
        } else {
            overrides
                .policies
                .iter()
                .map(|s| parse_policy(s, n).map_err(CliError::Usage))
                .collect::<CliResult<Vec<_>>>()?
        };
        for p in &policies {
            p.validate(&system)?;
        }
        let mut names: Vec<String> = policies.iter().map(|p| p.to_string()).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::Config("policies: duplicate policy names".into()));
        }

        let r = &self.run;
        let seeds = match (&overrides.seeds, &r.seeds, r.seed_count) {
            (Some(s), _, _) => s.clone(),
            (None, Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "run: seeds and seed_count are mutually exclusive".into(),
                ))
            }
            (None, Some(s), None) => s.clone(),
            (None, None, Some(k)) => (0..k).collect(),
            (None, None, None) => vec![0],
        };
        if seeds.is_empty() {
            return Err(CliError::Config("run: at least one seed is required".into()));
        }
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != seeds.len() {
            return Err(CliError::Config("run.seeds: duplicate seeds".into()));
        }
        let frames = overrides.frames.or(r.frames).unwrap_or(DEFAULT_FRAMES);
        if frames == 0 {
            return Err(CliError::Config("run.frames: must be at least 1".into()));
        }
        let t_min = overrides.t_min.or(r.t_min).unwrap_or(DEFAULT_T_MIN);
        if t_min < debtsim::analysis::MIN_T_MIN {
            return Err(CliError::Config(format!(
                "run.t_min: must be at least {}",
                debtsim::analysis::MIN_T_MIN
            )));
        }
        let record_stride = overrides.stride.or(r.record_stride);
        if record_stride == Some(0) {
            return Err(CliError::Config("run.record_stride: must be at least 1".into()));
        }
        if let Some(d) = &r.initial_debts {
            debtsim::model::DebtState::with_initial_debts(&system, d.clone())
                .map_err(|e| CliError::Config(format!("run.initial_debts: {e}")))?;
        }
        if let Some(k) = r.drift_kappa {
            if n != 2 || !(k > 0.0) {
                return Err(CliError::Config(
                    "run.drift_kappa: needs two clients and a positive value".into(),
                ));
            }
        }
        let out_dir = overrides
            .out
            .clone()
            .or_else(|| self.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
        Ok(Experiment {
            system,
            policies,
            frames,
            seeds,
            t_min,
            record_stride,
            initial_debts: r.initial_debts.clone(),
            drift_kappa: r.drift_kappa,
            out_dir,
        })
    }
}

impl PolicyEntry {
    pub fn to_spec(&self, n: usize) -> Result<PolicySpec<f64>, String> {
        let kind = match self.kind.as_str() {
            "mwdf" => PolicyKind::Mwdf,
            "mdf" => PolicyKind::Mdf,
            "round_robin" => PolicyKind::RoundRobin,
            "uniform_random" => PolicyKind::UniformRandom,
            "weighted_debt" => PolicyKind::WeightedDebt {
                weights: self
                    .weights
                    .clone()
                    .ok_or("weighted_debt needs weights")?,
            },
            "fixed_order" => PolicyKind::FixedOrder {
                order: self
                    .order
                    .clone()
                    .unwrap_or_else(|| (1..=n as u32).collect())
                    .into_iter()
                    .map(|i| if i == 0 { Err("client ids start at 1") } else { Ok(ClientId::new(i)) })
                    .collect::<Result<_, _>>()?,
            },
            other => return Err(format!("unknown policy kind {other:?}")),
        };
        let has_weights = matches!(kind, PolicyKind::WeightedDebt { .. });
        let has_order = matches!(kind, PolicyKind::FixedOrder { .. });
        if self.weights.is_some() && !has_weights {
            return Err(format!("{} takes no weights", self.kind));
        }
        if self.order.is_some() && !has_order {
            return Err(format!("{} takes no order", self.kind));
        }
        Ok(PolicySpec::new(kind).with_tie_break(self.tie_break.unwrap_or_default()))
    }
}

/// Parses `--policy` values: `mwdf`, `mdf`, `round_robin`, `uniform_random`,
/// `fixed_order[:2,1,3]`, `weighted_debt:1,0.5`; a `+random_ties` suffix
/// selects random tie-breaking.
pub fn parse_policy(text: &str, n: usize) -> Result<PolicySpec<f64>, String> {
    let (body, tie_break) = match text.strip_suffix("+random_ties") {
        Some(b) => (b, Some(TieBreak::Random)),
        None => (text, None),
    };
    let (kind, args) = match body.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (body, None),
    };
    let list = |a: &str| -> Result<Vec<f64>, String> {
        a.split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}")))
            .collect()
    };
    let mut entry = PolicyEntry {
        kind: kind.to_string(),
        order: None,
        weights: None,
        tie_break,
    };
    match (kind, args) {
        ("fixed_order", Some(a)) => {
            entry.order = Some(
                a.split(',')
                    .map(|x| x.trim().parse::<u32>().map_err(|e| format!("{x:?}: {e}")))
                    .collect::<Result<_, _>>()?,
            )
        }
        ("weighted_debt", Some(a)) => entry.weights = Some(list(a)?),
        (_, Some(_)) => return Err(format!("{kind} takes no arguments")),
        _ => {}
    }
    entry.to_spec(n).map_err(|e| format!("--policy {text}: {e}"))
}

/// Seeds given on the command line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedList(pub Vec<u64>);

/// Parses `--seeds`: a range `a..b`, or a comma-separated list.
pub fn parse_seed_list(text: &str) -> Result<SeedList, String> {
    parse_seeds(text).map(SeedList)
}

pub fn parse_seeds(text: &str) -> Result<Vec<u64>, String> {
    let num = |s: &str| s.trim().parse::<u64>().map_err(|e| format!("{s:?}: {e}"));
    if let Some((a, b)) = text.split_once("..") {
        let (a, b) = (num(a)?, num(b)?);
        if a >= b {
            return Err(format!("empty seed range {text}"));
        }
        return Ok((a..b).collect());
    }
    text.split(',').map(num).collect()
}

/// SHA-256 (hex) of the compact JSON form of `value`.
pub fn hash_value<T: Serialize>(value: &T) -> String {
    let text = serde_json::to_string(value).expect("value serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl Experiment {
    pub fn record_stride(&self) -> u64 {
        self.record_stride
            .unwrap_or_else(|| debtsim::engine::RunConfig::<f64>::default_stride(self.frames))
    }

    /// SHA-256 of the resolved experiment, excluding the output location.
    pub fn config_hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("experiment serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("out_dir");
        }
        hash_value(&v)
    }

    pub fn run_config(&self, policy: &PolicySpec<f64>, seed: u64) -> debtsim::engine::RunConfig<f64> {
        let mut rc = debtsim::engine::RunConfig::new(self.system.clone(), policy.clone(), self.frames, seed)
            .with_stride(self.record_stride())
            .with_t_min(self.t_min);
        rc.initial_debts = self.initial_debts.clone();
        rc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[system]
period = 1
reliabilities = [0.5, 0.5]
throughputs = [0.25, 0.25]

[[policies]]
kind = "mwdf"

[[policies]]
kind = "fixed_order"
order = [2, 1]

[run]
frames = 100
seed_count = 3
"#;

    #[test]
    fn parses_and_resolves() {
        let f = ExperimentFile::parse(BASE).unwrap();
        let e = f.resolve(&Overrides::default()).unwrap();
        assert_eq!(e.seeds, vec![0, 1, 2]);
        assert_eq!(e.policies[1].to_string(), "fixed_order_2_1");
        assert_eq!(e.t_min, DEFAULT_T_MIN);
        assert_eq!(e.record_stride(), 1);
        assert_eq!(e.config_hash().len(), 64);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = BASE.replace("period = 1", "period = 1\nperoid = 2");
        let err = ExperimentFile::parse(&text).unwrap_err().to_string();
        assert!(err.contains("peroid"), "{err}");
        let text = BASE.replace("frames = 100", "frame = 100");
        assert!(ExperimentFile::parse(&text).is_err());
    }

    #[test]
    fn throughputs_and_split_weights_exclusive() {
        let text = BASE.replace("throughputs = [0.25, 0.25]", "throughputs = [0.25, 0.25]\nsplit_weights = [0.5, 0.5]");
        let f = ExperimentFile::parse(&text).unwrap();
        assert!(matches!(f.system(), Err(CliError::Config(_))));
        let text = BASE.replace("throughputs = [0.25, 0.25]", "split_weights = [0.5, 0.5]");
        let s = ExperimentFile::parse(&text).unwrap().system().unwrap();
        assert_eq!(s.throughputs, vec![0.25, 0.25]);
    }

    #[test]
    fn overrides_take_precedence() {
        let f = ExperimentFile::parse(BASE).unwrap();
        let o = Overrides {
            seeds: Some(vec![5]),
            frames: Some(7),
            policies: vec!["mdf+random_ties".into()],
            stride: Some(2),
            ..Default::default()
        };
        let e = f.resolve(&o).unwrap();
        assert_eq!(e.seeds, vec![5]);
        assert_eq!(e.frames, 7);
        assert_eq!(e.policies.len(), 1);
        assert_eq!(e.policies[0].to_string(), "mdf+random_ties");
        assert_eq!(e.record_stride(), 2);
    }

    #[test]
    fn policy_and_seed_syntax() {
        assert_eq!(parse_policy("fixed_order", 3).unwrap().to_string(), "fixed_order_1_2_3");
        assert_eq!(parse_policy("fixed_order:3,1,2", 3).unwrap().to_string(), "fixed_order_3_1_2");
        assert!(parse_policy("weighted_debt:1,2", 2).is_ok());
        assert!(parse_policy("weighted_debt", 2).is_err());
        assert!(parse_policy("mwdf:1", 2).is_err());
        assert!(parse_policy("lifo", 2).is_err());
        assert_eq!(parse_seeds("3..6").unwrap(), vec![3, 4, 5]);
        assert_eq!(parse_seeds("4,9").unwrap(), vec![4, 9]);
        assert!(parse_seeds("5..5").is_err());
    }

    #[test]
    fn invalid_values_are_reported_by_field() {
        let text = BASE.replace("reliabilities = [0.5, 0.5]", "reliabilities = [0.5, 1.5]");
        let err = ExperimentFile::parse(&text).unwrap().system().unwrap_err().to_string();
        assert!(err.contains("reliabilities"), "{err}");
        let text = BASE.replace("seed_count = 3", "seed_count = 3\nseeds = [1]");
        assert!(ExperimentFile::parse(&text).unwrap().resolve(&Overrides::default()).is_err());
        let text = BASE.replace("order = [2, 1]", "order = [2, 2]");
        assert!(ExperimentFile::parse(&text).unwrap().resolve(&Overrides::default()).is_err());
    }
}
