//! Experiment configuration (TOML).
//!
//! Precedence: command-line flags override keys in the file, which override
//! built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use greenpool::ensemble::{Member, PoolSpec};
use greenpool::par::Execution;
use greenpool::policies::{PolicyKind, PolicySpec};
use greenpool::streams::{presets, DriftSchedule, FileOptions, GeneratorSpec, StreamSpec};
use serde::{Deserialize, Serialize};

/// Raised for anything wrong with the configuration itself (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StreamEntry {
    Preset {
        preset: String,
        length: u64,
    },
    File {
        file: PathBuf,
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        length: Option<u64>,
        #[serde(flatten)]
        options: FileOptions,
    },
    Spec(StreamSpec),
}

impl StreamEntry {
    pub fn resolve(&self, base: &Path) -> Result<StreamSpec> {
        let spec = match self {
            StreamEntry::Preset { preset, length } => presets::by_name(preset, *length)
                .ok_or_else(|| {
                    invalid(format!(
                        "unknown stream preset `{preset}` (known: {})",
                        presets::NAMES.join(", ")
                    ))
                })?,
            StreamEntry::File {
                file,
                name,
                length,
                options,
            } => {
                let path = if file.is_relative() {
                    base.join(file)
                } else {
                    file.clone()
                };
                let name = name.clone().unwrap_or_else(|| {
                    file.file_stem()
                        .map_or_else(|| "file".to_string(), |s| s.to_string_lossy().into_owned())
                });
                let generator = GeneratorSpec::File {
                    path,
                    options: options.clone(),
                };
                StreamSpec {
                    name,
                    length: length.unwrap_or(u64::MAX),
                    schedule: DriftSchedule::single(generator),
                }
            }
            StreamEntry::Spec(s) => s.clone(),
        };
        spec.validate()
            .map_err(|e| invalid(format!("stream `{}`: {e}", spec.name)))?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolEntry {
    /// `paper-mini`, `mlp`, `mlp-padded` or `ht`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub members: Option<Vec<Member>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracker_window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warm_start: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub execution: Option<Execution>,
}

impl PoolEntry {
    /// Pool template; the policy is filled in per grid cell.
    pub fn resolve(&self) -> Result<PoolSpec> {
        let placeholder = PolicySpec::new(PolicyKind::Random);
        let mut spec = match (&self.preset, &self.members) {
            (Some(_), Some(_)) => {
                return Err(invalid("pool: give either `preset` or `members`, not both"))
            }
            (None, None) => return Err(invalid("pool: `preset` or `members` is required")),
            (Some(p), None) => match p.as_str() {
                "paper-mini" => PoolSpec::paper_mini(placeholder),
                "mlp" => PoolSpec::mlp_default(30, placeholder),
                "mlp-padded" => PoolSpec::mlp_padded(30, placeholder),
                "ht" => PoolSpec::ht_grid(5, placeholder),
                other => return Err(invalid(format!("unknown pool preset `{other}`"))),
            },
            (None, Some(members)) => PoolSpec::new(members.clone(), 1, placeholder),
        };
        if let Some(k) = self.k {
            spec.k = k;
        } else if self.members.is_some() {
            return Err(invalid("pool: `k` is required with explicit members"));
        }
        spec.tracker_window = self.tracker_window.unwrap_or(spec.tracker_window);
        spec.warm_start = self.warm_start.unwrap_or(spec.warm_start);
        spec.execution = self.execution.unwrap_or(spec.execution);
        spec.validate().map_err(|e| invalid(format!("pool: {e}")))?;
        Ok(spec)
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    /// Also write a JSON-lines step log per run.
    #[serde(default)]
    pub step_logs: bool,
    #[serde(default)]
    pub streams: Vec<StreamEntry>,
    pub pool: PoolEntry,
    #[serde(default)]
    pub policies: Vec<PolicySpec>,
}

/// Everything needed to execute a grid.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub streams: Vec<StreamSpec>,
    pub pool: PoolSpec,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| invalid(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))
    }

    /// Desk-scale preset: six synthetic drifting streams of 10⁵ instances,
    /// the 20-network pool with budget 12 and seeds 1, 2, 3.
    pub fn paper_mini() -> Self {
        Self {
            output: PathBuf::from("results/paper-mini"),
            seeds: vec![1, 2, 3],
            jobs: None,
            step_logs: false,
            streams: presets::NAMES
                .iter()
                .map(|n| StreamEntry::Preset {
                    preset: n.to_string(),
                    length: 100_000,
                })
                .collect(),
            pool: PoolEntry {
                preset: Some("paper-mini".into()),
                ..Default::default()
            },
            policies: benchmark_policies(),
        }
    }

    pub fn resolve(self, base: &Path) -> Result<Resolved> {
        if self.streams.is_empty() {
            bail!(invalid("config declares no streams"));
        }
        if self.policies.is_empty() {
            bail!(invalid("config declares no policies"));
        }
        if self.seeds.is_empty() {
            bail!(invalid("config declares no seeds"));
        }
        if self.jobs == Some(0) {
            bail!(invalid("jobs must be at least 1"));
        }
        for p in &self.policies {
            p.validate()
                .map_err(|e| invalid(format!("policy {}: {e}", p.label())))?;
        }
        let streams = self
            .streams
            .iter()
            .map(|s| s.resolve(base))
            .collect::<Result<Vec<_>>>()?;
        let pool = self.pool.resolve()?;
        Ok(Resolved {
            config: self,
            streams,
            pool,
        })
    }
}

/// The comparison set: plain random and CAND, the four sorting policies with
/// ε = 0.1, and ζ ∈ {0.01, 0.05} × ε ∈ {0.1, 0.2}.
pub fn benchmark_policies() -> Vec<PolicySpec> {
    let mut out = vec![PolicySpec::new(PolicyKind::Random)];
    for kind in [
        PolicyKind::PerformBest,
        PolicyKind::PerformWorst,
        PolicyKind::Cheapest,
        PolicyKind::Expensive,
    ] {
        out.push(PolicySpec::new(kind).with_epsilon(0.1));
    }
    out.push(PolicySpec::new(PolicyKind::Cand));
    for zeta in [0.01, 0.05] {
        for eps in [0.1, 0.2] {
            out.push(PolicySpec::zeta(zeta, eps));
        }
    }
    out
}

impl Resolved {
    /// Fully explicit config that reproduces this grid when loaded again.
    pub fn effective(&self) -> ExperimentConfig {
        let pool = PoolEntry {
            preset: None,
            members: Some(self.pool.members.clone()),
            k: Some(self.pool.k),
            tracker_window: Some(self.pool.tracker_window),
            warm_start: Some(self.pool.warm_start),
            execution: Some(self.pool.execution),
        };
        ExperimentConfig {
            streams: self
                .streams
                .iter()
                .cloned()
                .map(StreamEntry::Spec)
                .collect(),
            pool,
            ..self.config.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seeds = [1]
output = "out"

[[streams]]
preset = "AGR_a"
length = 1000

[pool]
preset = "paper-mini"

[[policies]]
kind = "cheapest"

[[policies]]
kind = "zeta"
zeta = 0.01
epsilon = 0.1
"#;

    #[test]
    fn minimal_config_resolves() {
        let r = ExperimentConfig::from_toml(MINIMAL)
            .unwrap()
            .resolve(Path::new("."))
            .unwrap();
        assert_eq!(r.streams.len(), 1);
        assert_eq!(r.pool.members.len(), 20);
        assert_eq!(r.pool.k, 12);
        assert_eq!(r.config.policies.len(), 2);
    }

    #[test]
    fn missing_policies_is_config_error() {
        let text = MINIMAL.split("[[policies]]").next().unwrap();
        let err = ExperimentConfig::from_toml(text)
            .unwrap()
            .resolve(Path::new("."))
            .unwrap_err();
        assert!(err.downcast_ref::<ConfigError>().is_some());
    }

    #[test]
    fn syntax_errors_name_the_line() {
        let err = ExperimentConfig::from_toml("seeds = [1]\n[pool\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn effective_config_round_trips() {
        let r = ExperimentConfig::from_toml(MINIMAL)
            .unwrap()
            .resolve(Path::new("."))
            .unwrap();
        let echo = toml::to_string(&r.effective()).unwrap();
        let again = ExperimentConfig::from_toml(&echo)
            .unwrap()
            .resolve(Path::new("."))
            .unwrap();
        assert_eq!(again.streams, r.streams);
        assert_eq!(again.pool, r.pool);
        assert_eq!(again.config.policies, r.config.policies);
    }

    #[test]
    fn paper_mini_preset() {
        let r = ExperimentConfig::paper_mini()
            .resolve(Path::new("."))
            .unwrap();
        assert_eq!(r.streams.len(), 6);
        assert_eq!(r.config.seeds, vec![1, 2, 3]);
        assert_eq!(r.config.policies.len(), 10);
        assert!(r.streams.iter().all(|s| s.length == 100_000));
    }
}
