//! Experiment configuration. Unknown fields are rejected; every section is
//! optional and falls back to the defaults below.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stablewalk::acceptance::Scale;
use stablewalk::stable::WalkObservable;
use stablewalk::tail::TailHypothesis;
use stablewalk::walk::StartRule;
use stablewalk::{MatrixSampler, SamplerSpec, SimplexPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub sampler: SamplerSpec,
    /// Defaults to the tail parameters of the sampler's scalar law.
    #[serde(default)]
    pub hypothesis: Option<TailHypothesis>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub simulate: SimulateParams,
    #[serde(default)]
    pub observables: ObservableParams,
    #[serde(default)]
    pub stationary: StationaryParams,
    #[serde(default)]
    pub tails: TailParams,
    #[serde(default)]
    pub convergence: ConvergenceParams,
    #[serde(default)]
    pub spectral: SpectralParams,
    #[serde(default)]
    pub acceptance: AcceptanceParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateParams {
    pub n: usize,
    pub n_paths: usize,
    /// Defaults to the barycenter.
    pub start: Option<StartRule>,
}

impl Default for SimulateParams {
    fn default() -> Self {
        Self {
            n: 100,
            n_paths: 1000,
            start: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Directions {
    Barycenter,
    Alternating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObservableParams {
    pub n_max: usize,
    pub n_paths: usize,
    pub n_probes: usize,
    pub directions: Directions,
}

impl Default for ObservableParams {
    fn default() -> Self {
        Self {
            n_max: 200,
            n_paths: 100,
            n_probes: 8,
            directions: Directions::Barycenter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StationaryParams {
    pub n_samples: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub kappa_steps: usize,
    pub kappa_paths: usize,
    pub min_p_value: f64,
}

impl Default for StationaryParams {
    fn default() -> Self {
        Self {
            n_samples: 10_000,
            tol: 1e-8,
            max_iter: 100_000,
            kappa_steps: 200,
            kappa_paths: 1000,
            min_p_value: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TailParams {
    pub n_samples: usize,
    pub u_grid: Vec<f64>,
    /// Number of `Ξ` samples for the transfer check; 0 skips it.
    pub xi_samples: usize,
    pub tol: f64,
}

impl Default for TailParams {
    fn default() -> Self {
        Self {
            n_samples: 1_000_000,
            u_grid: vec![4.0, 8.0, 16.0, 32.0],
            xi_samples: 200_000,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceParams {
    pub n: usize,
    pub n_paths: usize,
    /// Defaults to `n_paths`.
    pub n_sums: Option<usize>,
    /// Defaults to `ln ‖Y⁽ⁿ⁾ y‖` from the barycenter.
    pub observable: Option<WalkObservable>,
    pub t_max: f64,
    pub t_points: usize,
    pub stationary_tol: f64,
    pub cf_cap: f64,
    pub ks_allowance: f64,
    pub ks_cap: Option<f64>,
}

impl Default for ConvergenceParams {
    fn default() -> Self {
        Self {
            n: 256,
            n_paths: 20_000,
            n_sums: None,
            observable: None,
            t_max: 5.0,
            t_points: 200,
            stationary_tol: 1e-8,
            cf_cap: 0.03,
            ks_allowance: 1.5,
            ks_cap: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralParams {
    pub grid_m: usize,
    pub n_max: usize,
    pub kappa_paths: usize,
    pub ergodic_slack: f64,
    pub t_grid: Vec<f64>,
    pub xi_samples: usize,
    pub expansion_cap: f64,
    pub min_slope: f64,
    pub identity_t: Vec<f64>,
    pub identity_n_max: usize,
    pub identity_paths: usize,
}

impl Default for SpectralParams {
    fn default() -> Self {
        Self {
            grid_m: 512,
            n_max: 60,
            kappa_paths: 2000,
            ergodic_slack: 0.05,
            t_grid: (3..=10).map(|k| 2f64.powi(-k)).collect(),
            xi_samples: 200_000,
            expansion_cap: 1.0,
            min_slope: 1.7,
            identity_t: vec![0.1, 0.5],
            identity_n_max: 8,
            identity_paths: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcceptanceParams {
    pub scale: Scale,
    /// Criterion ids to run; empty runs all.
    pub only: Vec<u8>,
}

impl Default for AcceptanceParams {
    fn default() -> Self {
        Self {
            scale: Scale::Full,
            only: Vec::new(),
        }
    }
}

/// A configuration that failed to load or validate.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn require(ok: bool, msg: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError(msg.into()))
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let sampler = self.build_sampler()?;
        if let Some(h) = &self.hypothesis {
            h.validate().map_err(|e| ConfigError(e.to_string()))?;
        }
        let q = sampler.dim();
        for rule in [&self.simulate.start, &self.convergence.observable.as_ref().and_then(start_of)] {
            if let Some(StartRule::Fixed { point }) = rule {
                require(point.dim() == q, "start point dimension differs from the sampler dimension")?;
            }
        }
        require(self.simulate.n >= 1 && self.simulate.n_paths >= 1, "simulate needs n >= 1 and n_paths >= 1")?;
        require(self.observables.n_max >= 1 && self.observables.n_paths >= 1, "observables needs n_max >= 1 and n_paths >= 1")?;
        let st = &self.stationary;
        require(st.tol > 0.0 && st.max_iter >= 1 && st.n_samples >= 1, "stationary needs tol > 0 and positive counts")?;
        require((0.0..1.0).contains(&st.min_p_value), "stationary.min_p_value must lie in [0, 1)")?;
        let tl = &self.tails;
        require(
            tl.u_grid.len() >= 2 && tl.u_grid[0] > 0.0 && tl.u_grid.windows(2).all(|w| w[0] < w[1]),
            "tails.u_grid must be positive, increasing, with at least two points",
        )?;
        require(tl.tol > 0.0, "tails.tol must be positive")?;
        let cv = &self.convergence;
        require(cv.n >= 1 && cv.n_paths >= 2 && cv.n_sums.unwrap_or(2) >= 2, "convergence needs n >= 1 and at least two paths and sums")?;
        require(cv.t_max > 0.0 && cv.t_points >= 1 && cv.stationary_tol > 0.0, "convergence needs t_max, t_points and stationary_tol positive")?;
        let sp = &self.spectral;
        require(sp.grid_m >= 2, "spectral.grid_m must be at least 2")?;
        require(!sp.t_grid.is_empty() && sp.t_grid.iter().all(|&t| t > 0.0), "spectral.t_grid must hold positive values")?;
        require(self.acceptance.only.iter().all(|&i| (1..=13).contains(&i)), "acceptance.only holds criterion ids 1..13")?;
        Ok(())
    }

    pub fn build_sampler(&self) -> Result<MatrixSampler, ConfigError> {
        MatrixSampler::new(self.sampler.clone()).map_err(|e| ConfigError(e.to_string()))
    }

    /// The configured hypothesis, else the one implied by the scalar law.
    pub fn resolved_hypothesis(&self, sampler: &MatrixSampler) -> Result<TailHypothesis, ConfigError> {
        if let Some(h) = self.hypothesis {
            return Ok(h);
        }
        sampler
            .scalar_law()
            .map(|law| TailHypothesis {
                alpha: law.alpha,
                slowly_varying: law.slowly_varying,
                c_plus: law.c_plus,
                c_minus: law.c_minus,
            })
            .ok_or_else(|| ConfigError("no tail hypothesis given and the sampler has no scalar law".into()))
    }

    /// Fills every defaulted field so the report records what actually ran.
    pub fn resolve(&mut self, sampler: &MatrixSampler) {
        let q = sampler.dim();
        if self.simulate.start.is_none() {
            self.simulate.start = Some(StartRule::Fixed {
                point: SimplexPoint::barycenter(q),
            });
        }
        if self.convergence.observable.is_none() {
            self.convergence.observable = Some(WalkObservable::barycenter(q));
        }
        if self.convergence.n_sums.is_none() {
            self.convergence.n_sums = Some(self.convergence.n_paths);
        }
        if self.hypothesis.is_none() {
            self.hypothesis = self.resolved_hypothesis(sampler).ok();
        }
    }
}

fn start_of(obs: &WalkObservable) -> Option<StartRule> {
    match obs {
        WalkObservable::LogNorm { start } => Some(start.clone()),
        WalkObservable::LogPerron => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"sampler": {"kind": "finite_mixture", "atoms": [{"weight": 1.0, "matrix": [[2.0, 1.0], [1.0, 2.0]]}]}}"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.convergence.n, 256);
        assert_eq!(cfg.spectral.t_grid.len(), 8);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = MINIMAL.replace("\"sampler\"", "\"smapler\": 1, \"sampler\"");
        assert!(ExperimentConfig::parse(&text).is_err());
        let text = MINIMAL.replace('}', r#", "stationary": {"tolerance": 1e-8}}"#);
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    #[test]
    fn bad_values_are_rejected() {
        let text = MINIMAL.replace("2.0, 1.0", "-2.0, 1.0");
        assert!(ExperimentConfig::parse(&text).is_err());
        let text = format!("{}, \"tails\": {{\"u_grid\": [4.0, 2.0]}}}}", &MINIMAL[..MINIMAL.len() - 1]);
        assert!(ExperimentConfig::parse(&text).is_err());
    }

    fn keys(v: &serde_json::Value) -> Vec<String> {
        let mut k: Vec<String> = v.as_object().unwrap().keys().cloned().collect();
        k.sort();
        k
    }

    #[test]
    fn shipped_schema_lists_every_field() {
        let schema: serde_json::Value = serde_json::from_str(include_str!("../../../schema/config.schema.json")).unwrap();
        let mut cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        cfg.resolve(&cfg.build_sampler().unwrap());
        let value = serde_json::to_value(&cfg).unwrap();
        let props = &schema["properties"];
        assert_eq!(keys(&value), keys(props));
        for section in ["simulate", "observables", "stationary", "tails", "convergence", "spectral", "acceptance"] {
            assert_eq!(keys(&value[section]), keys(&props[section]["properties"]), "{section}");
        }
    }

    #[test]
    fn resolve_fills_defaults() {
        let mut cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        let s = cfg.build_sampler().unwrap();
        cfg.resolve(&s);
        assert!(cfg.simulate.start.is_some());
        assert_eq!(cfg.convergence.n_sums, Some(20_000));
        assert!(cfg.hypothesis.is_none());
    }
}
