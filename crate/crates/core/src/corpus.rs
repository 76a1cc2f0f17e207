//! The standard test corpus: generator families crossed with a δ grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::GeneratorSpec;
use crate::plfn::PLFunction;
use crate::structure::Side;

/// δ grid of the standard corpus.
pub const CORPUS_DELTAS: [f64; 3] = [0.009, 0.005, 0.001];
/// Level count of every corpus function.
pub const CORPUS_M: i64 = 128;

/// Families and parameter grids of a corpus. Every function ends at `Mδ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    pub deltas: Vec<f64>,
    pub m: i64,
    pub linear: bool,
    /// Steepness parameters of the log-boundary family, each used with
    /// `ln β = -M·K` on both sides.
    pub log_ks: Vec<f64>,
    pub log_segments: usize,
    pub bumps: usize,
    pub bump_ks: Vec<f64>,
    pub random_count: u64,
    pub random_segments: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            deltas: CORPUS_DELTAS.to_vec(),
            m: CORPUS_M,
            linear: true,
            log_ks: vec![3.0, 4.0, 5.0, 6.0],
            log_segments: 64,
            bumps: 10,
            bump_ks: vec![0.25, 5.0],
            random_count: 1000,
            random_segments: 30,
        }
    }
}

/// One corpus function at one δ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub delta: f64,
    pub spec: GeneratorSpec,
}

impl CorpusEntry {
    pub fn generate(&self) -> Result<PLFunction> {
        self.spec.generate()
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.deltas.is_empty() || self.deltas.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidParameter("corpus deltas must be a nonempty list of positive numbers".into()));
        }
        if self.m < 1 {
            return Err(Error::InvalidParameter(format!("corpus M must be at least 1, got {}", self.m)));
        }
        Ok(())
    }

    /// Entries ordered by δ, then family, then parameter.
    pub fn entries(&self) -> Vec<CorpusEntry> {
        let m = self.m;
        let mut out = Vec::new();
        for &delta in &self.deltas {
            let mut push = |id: String, spec| out.push(CorpusEntry { id, delta, spec });
            if self.linear {
                push(format!("linear_m{m}"), GeneratorSpec::Linear { m, delta });
            }
            for &k in &self.log_ks {
                for (side, name) in [(Side::Left, "left"), (Side::Right, "right")] {
                    let spec = GeneratorSpec::LogBoundary {
                        k,
                        beta_log: -(m as f64) * k,
                        delta,
                        side,
                        segments: self.log_segments,
                    };
                    push(format!("log_{name}_k{k}"), spec);
                }
            }
            for &bump_k in &self.bump_ks {
                let spec = GeneratorSpec::Multibump { bumps: self.bumps, m, delta, bump_k };
                push(format!("multibump{}_k{bump_k}", self.bumps), spec);
            }
            for seed in 0..self.random_count {
                let spec = GeneratorSpec::Random { seed, segments: self.random_segments, m, delta };
                push(format!("random_{seed}"), spec);
            }
        }
        out
    }
}

/// The default corpus.
pub fn standard_corpus() -> Vec<CorpusEntry> {
    CorpusSpec::default().entries()
}
