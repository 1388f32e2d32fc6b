//! Named experiments. Each one reads an [`ExperimentConfig`], runs with
//! defaults for anything left out, and returns an [`ExperimentReport`] whose
//! verdicts decide the exit status of `anisoharm experiment run`.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dilation::DilationGroup;
use crate::error::{invalid_param, Error, Result};
use crate::grid::GridSpec;
use crate::report::ExperimentReport;

mod basics;
mod cz;
mod decay;
mod scaling;
mod square;

/// Configuration document of an experiment. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Group exponents `a_j`; experiments covering several groups use only
    /// this one when it is given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponents: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub root_tolerance: Option<f64>,
    /// Sample counts `N_j` (powers of two).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counts: Option<Vec<usize>>,
    /// Box extents `L_j`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extents: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    /// Scales `t` for experiments that sweep one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_values: Option<Vec<f64>>,
    /// Inclusive index range, for `j` or `m` sweeps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<[i32; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    pub seed: u64,
    /// Overrides of named verdict tolerances.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub(crate) fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub(crate) fn tol(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }

    pub(crate) fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(stream);
        r
    }

    /// The configured group, or `defaults` when none is given.
    pub(crate) fn groups(&self, defaults: &[&[f64]]) -> Result<Vec<DilationGroup>> {
        match &self.exponents {
            Some(a) => Ok(vec![self.group_of(a.clone())?]),
            None => defaults.iter().map(|a| self.group_of(a.to_vec())).collect(),
        }
    }

    fn group_of(&self, a: Vec<f64>) -> Result<DilationGroup> {
        match self.root_tolerance {
            Some(t) => DilationGroup::with_tolerance(a, t),
            None => DilationGroup::new(a),
        }
    }

    /// The configured grid, or `default` when neither counts nor extents are
    /// given.
    pub(crate) fn grid(&self, default: (Vec<usize>, Vec<f64>)) -> Result<GridSpec> {
        let (n, l) = default;
        GridSpec::new(self.counts.clone().unwrap_or(n), self.extents.clone().unwrap_or(l))
    }

    pub(crate) fn has_grid(&self) -> bool {
        self.counts.is_some() || self.extents.is_some()
    }

    pub(crate) fn alpha_or(&self, default: f64) -> f64 {
        self.alpha.unwrap_or(default)
    }

    pub(crate) fn range_or(&self, lo: i32, hi: i32) -> Result<(i32, i32)> {
        match self.range {
            Some([a, b]) if a > b => Err(invalid_param(format!("empty range [{a}, {b}]"))),
            Some([a, b]) => Ok((a, b)),
            None => Ok((lo, hi)),
        }
    }
}

type Runner = fn(&ExperimentConfig) -> Result<ExperimentReport>;

/// Experiment name, one-line description, runner.
const REGISTRY: &[(&str, &str, Runner)] = &[
    ("rho-axioms", "homogeneity, triangle inequality, unit-ball and isotropic properties of rho", basics::rho_axioms),
    ("polar-volume", "unit-ball volume and the integral of the polar weight", basics::polar_volume),
    ("transform", "Parseval identity and transform round trip", basics::transform),
    ("semigroup-law", "K_t K_s = K_{t+s}", basics::semigroup_law),
    ("subordination", "subordinated semigroup against K_t I_alpha", basics::subordination),
    ("kernel-decay", "decay profiles of K, Q and the derivative kernels", decay::kernel_decay),
    ("rho-tilde-decay", "decay profiles of the dyadic Riesz pieces, uniformly in m", decay::rho_tilde_decay),
    ("d-alpha-l2", "D_alpha on plane waves and the L^2 bound", square::d_alpha_l2),
    ("d-alpha-covariance", "dilation covariance of D_alpha", square::d_alpha_covariance),
    ("tj-decay", "decay of ||T_j f|| in j", square::tj_decay),
    ("gq-domination", "g_Q / D_alpha under grid refinement", square::gq_domination),
    ("w-alpha", "integrability of W_alpha(t, 1) dt / t", basics::w_alpha_integrability),
    ("cz-suite", "Whitney covers and Calderon-Zygmund decompositions", cz::cz_suite),
    ("weak-type", "weak type (p0, p0) of D_alpha on focusing bumps", scaling::weak_type),
    ("sharpness", "failure of weak type below p0 on dilated band-limited bumps", scaling::sharpness),
];

/// Names and descriptions of every experiment.
pub fn list() -> Vec<(&'static str, &'static str)> {
    REGISTRY.iter().map(|(n, d, _)| (*n, *d)).collect()
}

pub fn run_experiment(name: &str, config: &ExperimentConfig) -> Result<ExperimentReport> {
    let (_, _, run) = REGISTRY
        .iter()
        .find(|(n, _, _)| *n == name)
        .ok_or_else(|| Error::UnknownExperiment(name.to_string()))?;
    run(config)
}

/// Relative `L^2` distance `||a - b|| / ||b||`.
pub(crate) fn rel_l2(a: &crate::SampledField, b: &crate::SampledField) -> Result<f64> {
    let d = a.sub(b)?.lp_norm(2.0)?;
    let n = b.lp_norm(2.0)?;
    Ok(if n > 0.0 { d / n } else { d })
}

pub(crate) fn group_tag(g: &DilationGroup) -> String {
    let parts: Vec<String> = g.exponents().iter().map(|a| format!("{a}")).collect();
    format!("a=({})", parts.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parses_and_rejects_unknown_keys() {
        let c = ExperimentConfig::from_json(r#"{"exponents": [1, 2], "root_tolerance": 1e-13, "seed": 3}"#).unwrap();
        assert_eq!(c.exponents, Some(vec![1.0, 2.0]));
        assert_eq!(c.groups(&[&[1.0, 1.0]]).unwrap().len(), 1);
        assert!(ExperimentConfig::from_json(r#"{"exponent": [1, 2]}"#).is_err());
        assert_eq!(c.echo()["seed"], 3);
        assert!(c.echo().get("alpha").is_none());
    }

    #[test]
    fn registry_names_are_unique() {
        let names: Vec<_> = list().into_iter().map(|(n, _)| n).collect();
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
        assert!(matches!(run_experiment("nope", &ExperimentConfig::default()), Err(Error::UnknownExperiment(_))));
    }
}
