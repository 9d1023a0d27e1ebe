//! Run configuration: a strict TOML file with profile-based defaults.
//!
//! Unknown keys are fatal; a typo in an experiment configuration should
//! never silently fall back to a default. The `desk` profile keeps runs in
//! the seconds-to-minutes range; `paper` is the full-size grid (hours with
//! forests and networks); `custom` starts from the desk defaults and
//! relies on the file to override.
//!
//! Every run writes a `manifest.toml` into the output directory: the fully
//! resolved configuration plus seed and tool version. A manifest is itself
//! a valid `--config` input and reproduces the run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use serde::{Deserialize, Serialize};

use coinp::analyze::AnalyzeConfig;
use coinp::cit::Method;
use coinp::data::EncodingSpec;
use coinp::harness::ExperimentGrid;
use coinp::learners::{ForestParams, LearnerSpec, MlpParams};
use coinp::scenarios::{ScenarioId, ScenarioOverrides};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Desk,
    Paper,
    Custom,
}

impl Profile {
    pub fn parse(s: &str) -> anyhow::Result<Profile> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            "custom" => Ok(Profile::Custom),
            other => bail!("unknown profile `{other}` (expected desk, paper, or custom)"),
        }
    }
}

/// The on-disk configuration. Every field is optional; [`RunConfig::resolve`]
/// fills in profile defaults.
#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<Profile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holdout_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replications: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smoothed_pvalue: Option<bool>,
    /// Recorded in manifests; accepted (and ignored) when re-reading one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tool_version: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenarios: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_s_values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_values: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learners: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forest: Option<ForestConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mlp: Option<MlpConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario_overrides: Option<OverridesConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analyze: Option<AnalyzeSection>,
    /// Ordinal encodings for categorical CSV columns: column -> ordered
    /// category list. Defaults cover the cut/color/clarity columns of the
    /// classic diamonds layout.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub encoding: Option<BTreeMap<String, Vec<String>>>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ForestConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_trees: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_features: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_samples_leaf: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<bool>,
}

impl ForestConfig {
    fn apply(&self, mut base: ForestParams) -> ForestParams {
        if let Some(v) = self.n_trees {
            base.n_trees = v;
        }
        if let Some(v) = self.max_features {
            base.max_features = v;
        }
        if let Some(v) = self.min_samples_leaf {
            base.min_samples_leaf = v;
        }
        if let Some(v) = self.max_depth {
            base.max_depth = Some(v);
        }
        if let Some(v) = self.bootstrap {
            base.bootstrap = v;
        }
        base
    }

    fn from_params(p: &ForestParams) -> ForestConfig {
        ForestConfig {
            n_trees: Some(p.n_trees),
            max_features: Some(p.max_features),
            min_samples_leaf: Some(p.min_samples_leaf),
            max_depth: p.max_depth,
            bootstrap: Some(p.bootstrap),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct MlpConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden_layers: Option<Vec<usize>>,
    /// Only `"elu"` is supported.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub activation: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_epochs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patience: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dropout_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_norm: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
}

impl MlpConfig {
    fn apply(&self, mut base: MlpParams) -> anyhow::Result<MlpParams> {
        if let Some(v) = &self.hidden_layers {
            base.hidden_layers = v.clone();
        }
        if let Some(a) = &self.activation {
            if a != "elu" {
                bail!("mlp.activation: only `elu` is supported, got `{a}`");
            }
        }
        if let Some(v) = self.learning_rate {
            base.learning_rate = v;
        }
        if let Some(v) = self.max_epochs {
            base.max_epochs = v;
        }
        if let Some(v) = self.patience {
            base.patience = v;
        }
        if let Some(v) = self.validation_fraction {
            base.validation_fraction = v;
        }
        if let Some(v) = self.dropout_rate {
            base.dropout_rate = v;
        }
        if let Some(v) = self.batch_norm {
            base.batch_norm = v;
        }
        if let Some(v) = self.batch_size {
            base.batch_size = v;
        }
        Ok(base)
    }

    fn from_params(p: &MlpParams) -> MlpConfig {
        MlpConfig {
            hidden_layers: Some(p.hidden_layers.clone()),
            activation: Some("elu".into()),
            learning_rate: Some(p.learning_rate),
            max_epochs: Some(p.max_epochs),
            patience: Some(p.patience),
            validation_fraction: Some(p.validation_fraction),
            dropout_rate: Some(p.dropout_rate),
            batch_norm: Some(p.batch_norm),
            batch_size: Some(p.batch_size),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OverridesConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dist1_observed: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dist3_noise_is_variance: Option<bool>,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label_column: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub learners: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holdout_fraction: Option<f64>,
}

/// Everything a run needs, with no optional field left.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub profile: Profile,
    pub output_dir: PathBuf,
    pub grid: ExperimentGrid,
    pub analyze_label: Option<String>,
    pub analyze: AnalyzeConfig,
    pub encoding: EncodingSpec,
    pub forest_params: ForestParams,
    pub mlp_params: MlpParams,
}

pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config `{}`", path.display()))?;
    let cfg: RunConfig = toml::from_str(&text)
        .map_err(|e| anyhow!("invalid config `{}`: {e}", path.display()))?;
    Ok(cfg)
}

fn parse_methods(names: &[String]) -> anyhow::Result<Vec<Method>> {
    let methods = names
        .iter()
        .map(|m| Method::parse(m))
        .collect::<Result<Vec<_>, _>>()?;
    if methods.is_empty() {
        bail!("methods list is empty");
    }
    Ok(methods)
}

fn parse_scenarios(names: &[String]) -> anyhow::Result<Vec<ScenarioId>> {
    let ids = names
        .iter()
        .map(|s| ScenarioId::parse(s))
        .collect::<Result<Vec<_>, _>>()?;
    if ids.is_empty() {
        bail!("scenarios list is empty");
    }
    Ok(ids)
}

fn parse_learners(
    names: &[String],
    forest: &ForestParams,
    mlp: &MlpParams,
) -> anyhow::Result<Vec<LearnerSpec>> {
    let mut specs = Vec::with_capacity(names.len());
    for name in names {
        let spec = match name.as_str() {
            "ols" => LearnerSpec::Ols,
            "random_forest" => LearnerSpec::RandomForest(forest.clone()),
            "mlp" => LearnerSpec::Mlp(mlp.clone()),
            other => bail!("unknown learner `{other}` (expected ols, random_forest, or mlp)"),
        };
        if specs.contains(&spec) {
            bail!("learner `{name}` listed twice");
        }
        specs.push(spec);
    }
    Ok(specs)
}

/// The shipped orderings for the categorical columns of the classic
/// diamonds layout, worst to best.
pub fn default_encoding() -> EncodingSpec {
    let mut enc = EncodingSpec::new();
    enc.insert(
        "cut".into(),
        ["Fair", "Good", "Very Good", "Premium", "Ideal"].map(String::from).to_vec(),
    );
    enc.insert(
        "color".into(),
        ["J", "I", "H", "G", "F", "E", "D"].map(String::from).to_vec(),
    );
    enc.insert(
        "clarity".into(),
        ["I1", "SI2", "SI1", "VS2", "VS1", "VVS2", "VVS1", "IF"].map(String::from).to_vec(),
    );
    enc
}

impl RunConfig {
    /// Applies profile defaults and validates names. `profile_override`
    /// (from `--profile`) wins over the file's own `profile` key.
    pub fn resolve(&self, profile_override: Option<Profile>) -> anyhow::Result<Resolved> {
        let profile = profile_override.or(self.profile).unwrap_or(Profile::Desk);
        let (def_reps, def_b, def_n, def_learners): (usize, usize, Vec<usize>, Vec<&str>) =
            match profile {
                Profile::Desk | Profile::Custom => (100, 50, vec![500], vec!["ols"]),
                Profile::Paper => (
                    200,
                    100,
                    vec![1000, 10_000],
                    vec!["ols", "random_forest", "mlp"],
                ),
            };
        let forest_base = match profile {
            Profile::Desk | Profile::Custom => ForestParams {
                n_trees: 50,
                ..ForestParams::default()
            },
            Profile::Paper => ForestParams::default(),
        };
        let mlp_base = match profile {
            Profile::Desk | Profile::Custom => MlpParams::default(),
            Profile::Paper => MlpParams::large(),
        };
        let forest_params = self.forest.clone().unwrap_or_default().apply(forest_base);
        let mlp_params = self.mlp.clone().unwrap_or_default().apply(mlp_base)?;

        let scenario_names: Vec<String> = self
            .scenarios
            .clone()
            .unwrap_or_else(|| ScenarioId::ALL.iter().map(|s| s.as_str().to_string()).collect());
        let method_names: Vec<String> = self
            .methods
            .clone()
            .unwrap_or_else(|| Method::ALL.iter().map(|m| m.as_str().to_string()).collect());
        let learner_names: Vec<String> = self
            .learners
            .clone()
            .unwrap_or_else(|| def_learners.iter().map(|s| s.to_string()).collect());

        let overrides = {
            let o = self.scenario_overrides.clone().unwrap_or_default();
            ScenarioOverrides {
                dist1_observed: o.dist1_observed,
                dist3_noise_is_variance: o.dist3_noise_is_variance.unwrap_or(false),
            }
        };

        let grid = ExperimentGrid {
            scenarios: parse_scenarios(&scenario_names)?,
            beta_s_values: self
                .beta_s_values
                .clone()
                .unwrap_or_else(|| vec![0.0, 0.01, 0.1, 0.6]),
            n_values: self.n_values.clone().unwrap_or(def_n),
            methods: parse_methods(&method_names)?,
            learners: parse_learners(&learner_names, &forest_params, &mlp_params)?,
            replications: self.replications.unwrap_or(def_reps),
            b: self.b.unwrap_or(def_b),
            alpha: self.alpha.unwrap_or(0.05),
            master_seed: self.master_seed.unwrap_or(42),
            holdout_fraction: self.holdout_fraction.unwrap_or(0.5),
            smoothed_pvalue: self.smoothed_pvalue.unwrap_or(false),
            overrides,
        };

        let analyze_section = self.analyze.clone().unwrap_or_default();
        let analyze_defaults = AnalyzeConfig::default();
        let analyze = AnalyzeConfig {
            methods: match &analyze_section.methods {
                Some(m) => parse_methods(m)?,
                None => analyze_defaults.methods,
            },
            learners: match &analyze_section.learners {
                Some(l) => parse_learners(l, &forest_params, &mlp_params)?,
                None => parse_learners(
                    &["ols".to_string(), "random_forest".to_string()],
                    &forest_params,
                    &mlp_params,
                )?,
            },
            b: analyze_section.b.or(self.b).unwrap_or(def_b),
            alpha: self.alpha.unwrap_or(0.05),
            holdout_fraction: analyze_section
                .holdout_fraction
                .or(self.holdout_fraction)
                .unwrap_or(0.5),
            seed: self.master_seed.unwrap_or(42),
            smoothed_pvalue: self.smoothed_pvalue.unwrap_or(false),
        };

        let mut encoding = default_encoding();
        if let Some(user) = &self.encoding {
            for (column, categories) in user {
                encoding.insert(column.clone(), categories.clone());
            }
        }

        Ok(Resolved {
            profile,
            output_dir: self
                .output_dir
                .clone()
                .unwrap_or_else(|| PathBuf::from("coinp-out")),
            grid,
            analyze_label: analyze_section.label_column,
            analyze,
            encoding,
            forest_params,
            mlp_params,
        })
    }
}

impl Resolved {
    /// Renders the fully resolved configuration as a manifest that is
    /// itself a valid `--config` file reproducing this run.
    pub fn manifest(&self) -> anyhow::Result<String> {
        let cfg = RunConfig {
            profile: Some(Profile::Custom),
            output_dir: Some(self.output_dir.clone()),
            master_seed: Some(self.grid.master_seed),
            holdout_fraction: Some(self.grid.holdout_fraction),
            replications: Some(self.grid.replications),
            b: Some(self.grid.b),
            alpha: Some(self.grid.alpha),
            smoothed_pvalue: Some(self.grid.smoothed_pvalue),
            tool_version: Some(env!("CARGO_PKG_VERSION").to_string()),
            scenarios: Some(
                self.grid
                    .scenarios
                    .iter()
                    .map(|s| s.as_str().to_string())
                    .collect(),
            ),
            beta_s_values: Some(self.grid.beta_s_values.clone()),
            n_values: Some(self.grid.n_values.clone()),
            methods: Some(
                self.grid
                    .methods
                    .iter()
                    .map(|m| m.as_str().to_string())
                    .collect(),
            ),
            learners: Some(
                self.grid
                    .learners
                    .iter()
                    .map(|l| {
                        use coinp::learners::Learner;
                        l.name().to_string()
                    })
                    .collect(),
            ),
            forest: Some(ForestConfig::from_params(&self.forest_params)),
            mlp: Some(MlpConfig::from_params(&self.mlp_params)),
            scenario_overrides: Some(OverridesConfig {
                dist1_observed: self.grid.overrides.dist1_observed.clone(),
                dist3_noise_is_variance: Some(self.grid.overrides.dist3_noise_is_variance),
            }),
            analyze: Some(AnalyzeSection {
                label_column: self.analyze_label.clone(),
                methods: Some(
                    self.analyze
                        .methods
                        .iter()
                        .map(|m| m.as_str().to_string())
                        .collect(),
                ),
                learners: Some(
                    self.analyze
                        .learners
                        .iter()
                        .map(|l| {
                            use coinp::learners::Learner;
                            l.name().to_string()
                        })
                        .collect(),
                ),
                b: Some(self.analyze.b),
                holdout_fraction: Some(self.analyze.holdout_fraction),
            }),
            encoding: Some(self.encoding.clone().into_iter().collect()),
        };
        Ok(toml::to_string(&cfg)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_fatal() {
        let err = toml::from_str::<RunConfig>("betaS = [0.1]\n").unwrap_err();
        assert!(err.to_string().contains("betaS"), "{err}");
    }

    #[test]
    fn desk_defaults() {
        let cfg: RunConfig = toml::from_str("").unwrap();
        let resolved = cfg.resolve(None).unwrap();
        assert_eq!(resolved.grid.replications, 100);
        assert_eq!(resolved.grid.b, 50);
        assert_eq!(resolved.grid.n_values, vec![500]);
        assert_eq!(resolved.grid.beta_s_values, vec![0.0, 0.01, 0.1, 0.6]);
        assert_eq!(resolved.grid.methods.len(), 4);
        assert_eq!(resolved.grid.learners, vec![LearnerSpec::Ols]);
    }

    #[test]
    fn paper_profile_scales_up() {
        let cfg: RunConfig = toml::from_str("profile = \"paper\"").unwrap();
        let resolved = cfg.resolve(None).unwrap();
        assert_eq!(resolved.grid.replications, 200);
        assert_eq!(resolved.grid.b, 100);
        assert_eq!(resolved.grid.n_values, vec![1000, 10_000]);
        assert_eq!(resolved.grid.learners.len(), 3);
        assert_eq!(resolved.forest_params.n_trees, 300);
        assert_eq!(resolved.mlp_params.hidden_layers, vec![100; 5]);
    }

    #[test]
    fn manifest_round_trips() {
        let cfg: RunConfig =
            toml::from_str("scenarios = [\"dist3\"]\nlearners = [\"ols\"]\nmaster_seed = 7")
                .unwrap();
        let resolved = cfg.resolve(None).unwrap();
        let manifest = resolved.manifest().unwrap();
        let back: RunConfig = toml::from_str(&manifest).unwrap();
        let resolved2 = back.resolve(None).unwrap();
        assert_eq!(resolved2.grid.master_seed, 7);
        assert_eq!(resolved2.grid.scenarios, resolved.grid.scenarios);
        assert_eq!(resolved2.grid.replications, resolved.grid.replications);
        assert_eq!(resolved2.manifest().unwrap(), manifest);
    }

    #[test]
    fn bad_names_are_rejected() {
        for text in [
            "methods = [\"coinpx\"]",
            "learners = [\"boost\"]",
            "scenarios = [\"dist9\"]",
            "learners = [\"ols\", \"ols\"]",
            "[mlp]\nactivation = \"relu\"",
        ] {
            let cfg: RunConfig = toml::from_str(text).unwrap();
            assert!(cfg.resolve(None).is_err(), "{text}");
        }
    }

    #[test]
    fn encoding_defaults_cover_diamonds_columns() {
        let enc = default_encoding();
        assert_eq!(enc["cut"].len(), 5);
        assert_eq!(enc["color"].len(), 7);
        assert_eq!(enc["clarity"].len(), 8);
    }
}
