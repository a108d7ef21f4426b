//! Calibrated generator constants and cached oracle targets.
//!
//! The shipped values live in `data/constants.toml` and are regenerated by
//! `cargo run --release --example derive_constants`; tests recompute the
//! calibrations and check them against the file.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::loss::Family;
use crate::simulation::calibration::{calibrate_alpha, calibrate_slope, case_rate, prob_at_most_one, prob_within};
use crate::simulation::oracle::{mega_sample_target, OracleTarget};
use crate::simulation::scenario::{Generator, Response};

pub const CONSTANTS_VERSION: u32 = 1;
pub const ORACLE_N: usize = 10_000_000;
pub const ORACLE_SEED: u64 = 7_340_021;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub version: u32,
    pub generators: BTreeMap<String, Generator>,
    #[serde(default)]
    pub targets: BTreeMap<String, OracleTarget>,
}

static SHIPPED: OnceLock<Constants> = OnceLock::new();

impl Constants {
    pub fn get() -> &'static Constants {
        SHIPPED.get_or_init(|| {
            toml::from_str(include_str!("../../data/constants.toml")).expect("shipped constants parse")
        })
    }

    fn generator(&self, key: &str) -> Generator {
        self.generators.get(key).unwrap_or_else(|| panic!("missing generator `{key}` in constants")).clone()
    }

    pub fn sim1_desk(&self) -> Generator {
        self.generator("sim1_desk")
    }
    pub fn sim1_full(&self) -> Generator {
        self.generator("sim1_full")
    }
    pub fn sim2(&self) -> Generator {
        self.generator("sim2")
    }
    pub fn sim5_correct(&self) -> Generator {
        self.generator("sim5_correct")
    }
    pub fn sim5_incorrect(&self) -> Generator {
        self.generator("sim5_incorrect")
    }
    pub fn sim6_correct(&self) -> Generator {
        self.generator("sim6_correct")
    }
    pub fn sim6_incorrect(&self) -> Generator {
        self.generator("sim6_incorrect")
    }

    /// Cached oracle target for a generator key.
    pub fn target(&self, key: &str) -> Option<&OracleTarget> {
        self.targets.get(key)
    }
}

/// Generators whose working model is misspecified, with that model's family.
pub const MISSPECIFIED: [(&str, Family); 3] =
    [("sim2", Family::Logistic), ("sim5_incorrect", Family::PoissonLog), ("sim6_incorrect", Family::GaussianLinear)];

fn half_ones(q: usize) -> Vec<f64> {
    (0..q).map(|j| if j < q / 2 { 1.0 } else { 0.0 }).collect()
}

/// Solve every calibration from the stated marginal targets.
pub fn derive_generators() -> BTreeMap<String, Generator> {
    let mut out = BTreeMap::new();
    let logistic = |beta: Vec<f64>, quad: f64, rate: f64| {
        let g = Generator { response: Response::Bernoulli, alpha: 0.0, beta, quad, x_sd: 1.0 };
        let alpha = calibrate_alpha(&g, rate, case_rate).expect("case rate bracketed");
        Generator { alpha, ..g }
    };
    out.insert("sim1_desk".into(), logistic(half_ones(20), 0.0, 0.10));
    out.insert("sim1_full".into(), logistic(half_ones(50), 0.0, 0.10));
    out.insert("sim2".into(), logistic(vec![0.75, 0.5, 0.5, 0.5, 0.5], 0.5, 0.01));

    let poisson = |quad: f64| {
        let g = Generator { response: Response::Poisson, alpha: 0.0, beta: vec![1.0, 1.0], quad, x_sd: 1.0 };
        let alpha = calibrate_alpha(&g, 0.93, prob_at_most_one).expect("P(Y<=1) bracketed");
        Generator { alpha, ..g }
    };
    out.insert("sim5_correct".into(), poisson(0.0));
    out.insert("sim5_incorrect".into(), poisson(0.05));

    let gaussian = |quad: f64| {
        let g = Generator {
            response: Response::Gaussian { noise_sd: 0.1 },
            alpha: 0.0,
            beta: vec![1.0, 1.0],
            quad,
            x_sd: 0.1,
        };
        let b = calibrate_slope(&g, 0.996, |g| prob_within(g, 0.5)).expect("P(|Y|<0.5) bracketed");
        Generator { beta: vec![b, b], ..g }
    };
    out.insert("sim6_correct".into(), gaussian(0.0));
    out.insert("sim6_incorrect".into(), gaussian(5.0));
    out
}

/// Mega-sample oracle targets for the misspecified generators.
pub fn derive_targets(generators: &BTreeMap<String, Generator>, n: usize, seed: u64) -> BTreeMap<String, OracleTarget> {
    MISSPECIFIED
        .iter()
        .map(|(key, family)| (key.to_string(), mega_sample_target(&generators[*key], *family, n, seed)))
        .collect()
}

pub fn derive_all() -> Constants {
    let generators = derive_generators();
    let targets = derive_targets(&generators, ORACLE_N, ORACLE_SEED);
    Constants { version: CONSTANTS_VERSION, generators, targets }
}

pub fn to_toml(c: &Constants) -> String {
    let header = "# Calibrated scenario constants; regenerate with\n\
                  #   cargo run --release -p surprise-sampling --example derive_constants > crates/core/data/constants.toml\n";
    format!("{header}{}", toml::to_string(c).expect("constants serialize"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_file_parses_and_is_current() {
        let c = Constants::get();
        assert_eq!(c.version, CONSTANTS_VERSION);
        let fresh = derive_generators();
        assert_eq!(c.generators.len(), fresh.len());
        for (k, g) in &fresh {
            let s = &c.generators[k];
            assert!((s.alpha - g.alpha).abs() < 1e-9, "{k}: alpha {} vs {}", s.alpha, g.alpha);
            for (a, b) in s.beta.iter().zip(&g.beta) {
                assert!((a - b).abs() < 1e-9, "{k}");
            }
        }
        for (key, _) in MISSPECIFIED {
            assert!(c.target(key).is_some(), "oracle target for {key}");
        }
    }

    #[test]
    fn calibrated_marginals() {
        let g = derive_generators();
        assert!((case_rate(&g["sim1_desk"]) - 0.10).abs() < 1e-10);
        assert!((case_rate(&g["sim2"]) - 0.01).abs() < 1e-10);
        assert!((prob_at_most_one(&g["sim5_correct"]) - 0.93).abs() < 1e-10);
        assert!((prob_within(&g["sim6_incorrect"], 0.5) - 0.996).abs() < 1e-10);
    }
}
