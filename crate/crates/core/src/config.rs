//! Run configuration: a TOML file, optional example presets and command line
//! overrides, validated into a [`RunConfig`].

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::assembly::CouplingRule;
use crate::geometry::{Profile, SurfacePair};
use crate::par::Parallelism;
use crate::quasigrid::Cutoff;
use crate::{Error, Result};

/// A number, or a formula such as `"math::sqrt(2)"`.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Formula(String),
}

impl Scalar {
    fn eval(&self, key: &str) -> Result<f64> {
        match self {
            Scalar::Number(v) => Ok(*v),
            Scalar::Formula(src) => evalexpr::eval_number_with_context(src, &crate::geometry::formula_context()?)
                .map_err(|e| Error::Config(format!("key `{key}`: cannot evaluate {src:?}: {e}"))),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// The file schema. Every key is optional.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub example: Option<u8>,
    pub k: Option<OneOrMany<Scalar>>,
    #[serde(rename = "N")]
    pub n_nodes: Option<OneOrMany<usize>>,
    #[serde(rename = "L")]
    pub half_width: Option<usize>,
    pub h: Option<f64>,
    pub n: Option<usize>,
    #[serde(rename = "Lambda")]
    pub lambda: Option<Scalar>,
    #[serde(rename = "H")]
    pub h_top: Option<f64>,
    #[serde(rename = "H0")]
    pub h_blend: Option<f64>,
    #[serde(rename = "M_dtn")]
    pub dtn_order: Option<usize>,
    pub tol: Option<f64>,
    pub zeta: Option<String>,
    pub perturbation: Option<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    #[serde(rename = "reference_N")]
    pub reference_nodes: Option<usize>,
    pub cutoff: Option<Cutoff>,
    pub coupling_rule: Option<CouplingRule>,
    pub dump_fields: Option<bool>,
    pub factor_cache_mb: Option<usize>,
    pub krylov_max_vectors: Option<usize>,
    pub max_iterations: Option<usize>,
    /// Write measured wall times; `false` writes zeros so reruns are
    /// byte-identical.
    pub timing: Option<bool>,
    /// Reuse node systems across the sweep.
    pub cache: Option<bool>,
    pub parallelism: Option<Parallelism>,
}

impl ConfigFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string() + &span_note(&e)))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

fn span_note(e: &toml::de::Error) -> String {
    e.span().map(|s| format!(" (at byte {})", s.start)).unwrap_or_default()
}

/// Command line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub example: Option<u8>,
    pub k: Option<f64>,
    pub n_nodes: Option<usize>,
    pub out: Option<PathBuf>,
}

/// How the error column is measured.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Reference {
    /// Closed form: both surfaces flat.
    ExactFlat,
    /// A run of the same pipeline with this many nodes.
    Numerical(usize),
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    /// `example1`, `example2`, `example3` or `custom`.
    pub label: String,
    pub ks: Vec<f64>,
    pub n_nodes: Vec<usize>,
    /// `None`: `N / 2` for each `N`.
    pub half_width: Option<usize>,
    pub h: f64,
    pub n: usize,
    pub lambda: f64,
    pub h_top: f64,
    pub h_blend: f64,
    pub dtn_order: Option<usize>,
    pub tol: f64,
    pub zeta: Profile,
    pub perturbation: Profile,
    pub out: PathBuf,
    pub seed: u64,
    pub reference: Reference,
    pub cutoff: Cutoff,
    pub coupling_rule: CouplingRule,
    pub dump_fields: bool,
    pub factor_budget_bytes: usize,
    pub krylov_max_vectors: usize,
    pub max_iterations: usize,
    pub timing: bool,
    pub cache: bool,
    pub par: Parallelism,
}

struct Preset {
    label: &'static str,
    zeta: &'static str,
    perturbation: &'static str,
    h: f64,
    ks: [f64; 2],
}

fn preset(example: u8) -> Result<Preset> {
    let sqrt2 = std::f64::consts::SQRT_2;
    match example {
        1 => Ok(Preset { label: "example1", zeta: "flat:1", perturbation: "flat:0.1", h: 0.025, ks: [1.0, sqrt2] }),
        2 => Ok(Preset { label: "example2", zeta: "example2-zeta", perturbation: "example2-p", h: 0.1, ks: [1.0, sqrt2] }),
        3 => Ok(Preset { label: "example3", zeta: "example2-zeta", perturbation: "example3-p", h: 0.1, ks: [1.0, 1.5] }),
        e => Err(Error::Config(format!("key `example`: unknown example {e}, expected 1, 2 or 3"))),
    }
}

const DEFAULT_SWEEP: [usize; 4] = [8, 16, 32, 64];

impl RunConfig {
    pub fn resolve(file: ConfigFile, cli: &Overrides) -> Result<Self> {
        let example = cli.example.or(file.example);
        let preset = example.map(preset).transpose()?;
        let ks = match (cli.k, &file.k, &preset) {
            (Some(k), _, _) => vec![k],
            (None, Some(k), _) => k.to_vec().iter().map(|s| s.eval("k")).collect::<Result<_>>()?,
            (None, None, Some(p)) => p.ks.to_vec(),
            (None, None, None) => return Err(Error::Config("key `k`: missing (no example preset given)".into())),
        };
        let n_nodes = match (cli.n_nodes, &file.n_nodes) {
            (Some(n), _) => vec![n],
            (None, Some(n)) => n.to_vec(),
            (None, None) => DEFAULT_SWEEP.to_vec(),
        };
        let zeta_id = file.zeta.clone().or(preset.as_ref().map(|p| p.zeta.to_string())).unwrap_or("flat:1".into());
        let p_id = file
            .perturbation
            .clone()
            .or(preset.as_ref().map(|p| p.perturbation.to_string()))
            .unwrap_or("zero".into());
        let zeta = Profile::parse(&zeta_id).map_err(|e| Error::Config(format!("key `zeta`: {e}")))?;
        let perturbation =
            Profile::parse(&p_id).map_err(|e| Error::Config(format!("key `perturbation`: {e}")))?;
        let flat = zeta.constant().is_some() && perturbation.constant().is_some();
        let reference = match (file.reference_nodes, flat) {
            (None, true) => Reference::ExactFlat,
            (r, _) => Reference::Numerical(r.unwrap_or(128)),
        };
        let cfg = RunConfig {
            label: preset.as_ref().map(|p| p.label).unwrap_or("custom").to_string(),
            ks,
            n_nodes,
            half_width: file.half_width,
            h: file.h.or(preset.as_ref().map(|p| p.h)).unwrap_or(0.1),
            n: file.n.unwrap_or(5),
            lambda: file.lambda.map(|l| l.eval("Lambda")).transpose()?.unwrap_or(2.0 * std::f64::consts::PI),
            h_top: file.h_top.unwrap_or(3.0),
            h_blend: file.h_blend.unwrap_or(2.9),
            dtn_order: file.dtn_order,
            tol: file.tol.unwrap_or(1e-10),
            zeta,
            perturbation,
            out: cli.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("out")),
            seed: file.seed.unwrap_or(0),
            reference,
            cutoff: file.cutoff.unwrap_or_default(),
            coupling_rule: file.coupling_rule.unwrap_or_default(),
            dump_fields: file.dump_fields.unwrap_or(false),
            factor_budget_bytes: file.factor_cache_mb.map(|m| m << 20).unwrap_or(1_500_000_000),
            krylov_max_vectors: file.krylov_max_vectors.unwrap_or(60),
            max_iterations: file.max_iterations.unwrap_or(200),
            timing: file.timing.unwrap_or(true),
            cache: file.cache.unwrap_or(true),
            par: file.parallelism.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Preset configuration of example 1, 2 or 3.
    pub fn example(example: u8) -> Result<Self> {
        Self::resolve(ConfigFile::default(), &Overrides { example: Some(example), ..Default::default() })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, msg: String| Err(Error::Config(format!("key `{key}`: {msg}")));
        if self.ks.is_empty() || self.ks.iter().any(|k| !(*k > 0.0 && k.is_finite())) {
            return bad("k", format!("wavenumbers must be positive, got {:?}", self.ks));
        }
        if self.n_nodes.is_empty() || self.n_nodes.iter().any(|&n| n < 2 || n % 2 != 0) {
            return bad("N", format!("node counts must be even and at least 2, got {:?}", self.n_nodes));
        }
        if let Reference::Numerical(r) = self.reference {
            if r < 2 || r % 2 != 0 {
                return bad("reference_N", format!("must be even and at least 2, got {r}"));
            }
        }
        if self.half_width == Some(0) {
            return bad("L", "must be at least 1".into());
        }
        if !(self.h > 0.0) {
            return bad("h", format!("must be positive, got {}", self.h));
        }
        if self.n < 1 {
            return bad("n", "must be at least 1".into());
        }
        if !(self.lambda > 0.0) {
            return bad("Lambda", format!("must be positive, got {}", self.lambda));
        }
        if !(self.h_blend < self.h_top) {
            return bad("H0", format!("H0 = {} must be below H = {}", self.h_blend, self.h_top));
        }
        if !(self.tol > 0.0) {
            return bad("tol", format!("must be positive, got {}", self.tol));
        }
        if self.krylov_max_vectors < 2 {
            return bad("krylov_max_vectors", "must be at least 2".into());
        }
        if self.max_iterations < 1 {
            return bad("max_iterations", "must be at least 1".into());
        }
        Ok(())
    }

    /// `L` used with `N` nodes.
    pub fn half_width_for(&self, n_nodes: usize) -> usize {
        self.half_width.unwrap_or((n_nodes / 2).max(1))
    }

    pub fn surfaces(&self) -> Result<SurfacePair> {
        SurfacePair::new(self.zeta.clone(), self.perturbation.clone(), self.lambda, self.h_top, self.h_blend)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_wavenumber() {
        let f = ConfigFile::from_toml("k = [1, \"math::sqrt(2)\"]").unwrap();
        let c = RunConfig::resolve(f, &Overrides::default()).unwrap();
        assert_eq!(c.ks[1], std::f64::consts::SQRT_2);
    }

    #[test]
    fn unknown_key_named() {
        let e = ConfigFile::from_toml("k = 1\nwavenumber = 2").unwrap_err();
        assert!(e.to_string().contains("wavenumber"), "{e}");
    }
}
