//! Run configuration: a single JSON document describing the domain, model,
//! landscape, boundary data, initial vortices, time schedule and studies.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::elliptic::SolverSettings;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{EdgeValues, Grid, ScalarField};
use crate::landscape::{PinningLandscape, Well};
use crate::law::{ConfinementSpec, OdeSystem, VectorSource};
use crate::pinning::BoundaryData;
use crate::sim::{Flavor, ModelParams, VortexSpec};
use crate::studies::{BatteryTarget, Forcing, PdeCase};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    pub eps: f64,
    #[serde(default = "one")]
    pub lambda: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PinningSpec {
    Constant {
        value: f64,
    },
    GaussianWell {
        center: [f64; 2],
        depth: f64,
        width: f64,
    },
    MultiWell {
        wells: Vec<Well>,
    },
    Expression {
        b: String,
    },
    /// Nodal samples in row-major order.
    Sampled {
        values: Vec<f64>,
    },
}

/// Boundary values as an expression over `(x, y)` or as samples per edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EdgeSpec {
    Expression(String),
    Sampled(EdgeValues),
}

impl Default for EdgeSpec {
    fn default() -> Self {
        EdgeSpec::Expression("0".into())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    #[serde(default)]
    pub h: EdgeSpec,
    #[serde(default)]
    pub jx: EdgeSpec,
    #[serde(default)]
    pub jy: EdgeSpec,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForcingSpec {
    None,
    /// `Z` from the boundary data through the auxiliary fields.
    #[default]
    Boundary,
    /// A prescribed unit-current field given by two expressions.
    Prescribed {
        z: [String; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub horizon: f64,
    #[serde(default)]
    pub dt: Option<f64>,
    pub frame_interval: f64,
    /// Write the order parameter every this many frames.
    #[serde(default)]
    pub snapshot_every: Option<usize>,
    #[serde(default = "default_law_dt")]
    pub law_dt: f64,
}

fn default_law_dt() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSpec {
    /// The `eps` ladder, run from largest to smallest.
    pub eps: Vec<f64>,
    /// Time trimmed from the end of the common window.
    #[serde(default)]
    pub guard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticalSpec {
    pub lambdas: Vec<f64>,
    pub minima: Vec<[f64; 2]>,
    pub radius: f64,
    pub horizon: f64,
    #[serde(default = "default_law_dt")]
    pub dt: f64,
    #[serde(default)]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatterySpec {
    pub target: BatteryTarget,
    pub ladder: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudiesSpec {
    #[serde(default)]
    pub compare: Option<CompareSpec>,
    #[serde(default)]
    pub critical: Option<CriticalSpec>,
    #[serde(default)]
    pub convergence: Vec<BatterySpec>,
    /// Record the energy identity and continuity residuals during simulation.
    #[serde(default)]
    pub record_identities: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    #[serde(default = "default_identity_threshold")]
    pub identity_residual: f64,
}

fn default_identity_threshold() -> f64 {
    1e-3
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            identity_residual: default_identity_threshold(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub params: ParamsSpec,
    #[serde(default = "default_flavor")]
    pub flavor: Flavor,
    pub pinning: PinningSpec,
    #[serde(default)]
    pub boundary: BoundarySpec,
    #[serde(default)]
    pub forcing: ForcingSpec,
    #[serde(default)]
    pub vortices: Vec<VortexSpec>,
    pub time: Option<TimeSpec>,
    #[serde(default)]
    pub studies: StudiesSpec,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

fn default_flavor() -> Flavor {
    Flavor::ForcedGl
}

fn parse_expr(field: &str, src: &str) -> Result<Expr> {
    Expr::parse(src).map_err(|e| Error::config(field, e.to_string()))
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(
            field,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

fn edge_values(field: &str, spec: &EdgeSpec, grid: &Grid) -> Result<EdgeValues> {
    match spec {
        EdgeSpec::Expression(src) => {
            let e = parse_expr(field, src)?;
            Ok(EdgeValues::from_fn(grid, |_, x, y| e.eval(x, y)))
        }
        EdgeSpec::Sampled(v) => {
            if !v.matches(grid) {
                return Err(Error::config(
                    field,
                    "edge sample counts do not match the grid",
                ));
            }
            Ok(v.clone())
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// SHA-256 of the canonical JSON form (sorted keys, no output directory).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let value = serde_json::to_value(&c).expect("config serializes");
        let digest = Sha256::digest(value.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Every module precondition that can be checked without computing.
    pub fn validate(&self) -> Result<()> {
        let d = &self.domain;
        positive("domain.lx", d.lx)?;
        positive("domain.ly", d.ly)?;
        let grid = self.grid()?;
        let p = &self.params;
        positive("params.alpha", p.alpha)?;
        positive("params.sigma", p.sigma)?;
        positive("params.eps", p.eps)?;
        if !(p.eps < 1.0) {
            return Err(Error::config("params.eps", "must be below 1"));
        }
        if !(p.lambda >= 0.0 && p.lambda.is_finite()) {
            return Err(Error::config("params.lambda", "must be nonnegative"));
        }
        if !p.beta.is_finite() {
            return Err(Error::config("params.beta", "must be finite"));
        }
        self.landscape()?;
        self.boundary_data(&grid)?;
        if let ForcingSpec::Prescribed { z } = &self.forcing {
            parse_expr("forcing.z[0]", &z[0])?;
            parse_expr("forcing.z[1]", &z[1])?;
        }
        for (k, v) in self.vortices.iter().enumerate() {
            if v.degree.abs() != 1 {
                return Err(Error::config(
                    format!("vortices[{k}].degree"),
                    "must be +1 or -1",
                ));
            }
            if !grid.contains(v.position[0], v.position[1]) {
                return Err(Error::config(
                    format!("vortices[{k}].position"),
                    "outside the domain",
                ));
            }
        }
        if let Some(t) = &self.time {
            positive("time.horizon", t.horizon)?;
            positive("time.frame_interval", t.frame_interval)?;
            positive("time.law_dt", t.law_dt)?;
            if let Some(dt) = t.dt {
                positive("time.dt", dt)?;
            }
            if t.snapshot_every == Some(0) {
                return Err(Error::config("time.snapshot_every", "must be at least 1"));
            }
        }
        let s = &self.studies;
        if let Some(c) = &s.compare {
            if c.eps.is_empty() || c.eps.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
                return Err(Error::config(
                    "studies.compare.eps",
                    "needs values in (0, 1)",
                ));
            }
            if !(c.guard >= 0.0) {
                return Err(Error::config(
                    "studies.compare.guard",
                    "must be nonnegative",
                ));
            }
        }
        if let Some(c) = &s.critical {
            if c.lambdas.is_empty() || c.lambdas.windows(2).any(|w| !(w[1] >= w[0])) {
                return Err(Error::config(
                    "studies.critical.lambdas",
                    "must be nonempty and increasing",
                ));
            }
            if c.minima.len() != self.vortices.len() {
                return Err(Error::config(
                    "studies.critical.minima",
                    "needs one minimum per vortex",
                ));
            }
            positive("studies.critical.radius", c.radius)?;
            positive("studies.critical.horizon", c.horizon)?;
            positive("studies.critical.dt", c.dt)?;
        }
        for (k, b) in s.convergence.iter().enumerate() {
            if b.ladder.len() < 3 {
                return Err(Error::config(
                    format!("studies.convergence[{k}].ladder"),
                    "needs at least three rungs",
                ));
            }
        }
        positive(
            "thresholds.identity_residual",
            self.thresholds.identity_residual,
        )?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        let d = &self.domain;
        Grid::new(d.nx, d.ny, d.lx, d.ly).map_err(|e| Error::config("domain", e.to_string()))
    }

    pub fn model_params(&self) -> ModelParams {
        let p = &self.params;
        ModelParams {
            alpha: p.alpha,
            beta: p.beta,
            sigma: p.sigma,
            eps: p.eps,
            lambda: p.lambda,
            flavor: self.flavor,
        }
    }

    pub fn landscape(&self) -> Result<PinningLandscape> {
        let l = match &self.pinning {
            PinningSpec::Constant { value } => PinningLandscape::Constant(*value),
            PinningSpec::GaussianWell {
                center,
                depth,
                width,
            } => PinningLandscape::GaussianWell(Well {
                center: *center,
                depth: *depth,
                width: *width,
            }),
            PinningSpec::MultiWell { wells } => PinningLandscape::MultiWell(wells.clone()),
            PinningSpec::Expression { b } => PinningLandscape::expression(b)
                .map_err(|e| Error::config("pinning.b", e.to_string()))?,
            PinningSpec::Sampled { values } => {
                let g = self.grid()?;
                let f = ScalarField::from_vec(g, values.clone())
                    .map_err(|e| Error::config("pinning.values", e.to_string()))?;
                PinningLandscape::sampled(f)
            }
        };
        l.realize(self.grid()?)
            .map_err(|e| Error::config("pinning", e.to_string()))?;
        Ok(l)
    }

    pub fn boundary_data(&self, grid: &Grid) -> Result<BoundaryData> {
        let b = &self.boundary;
        BoundaryData::new(
            grid,
            edge_values("boundary.h", &b.h, grid)?,
            edge_values("boundary.jx", &b.jx, grid)?,
            edge_values("boundary.jy", &b.jy, grid)?,
        )
    }

    fn time(&self) -> Result<&TimeSpec> {
        self.time
            .as_ref()
            .ok_or_else(|| Error::config("time", "required for this command"))
    }

    fn forcing(&self, grid: &Grid) -> Result<Forcing> {
        Ok(match &self.forcing {
            ForcingSpec::None => Forcing::None,
            ForcingSpec::Boundary => Forcing::Boundary {
                data: self.boundary_data(grid)?,
                settings: SolverSettings::default(),
            },
            ForcingSpec::Prescribed { z } => Forcing::Prescribed(VectorSource::Expression {
                x: parse_expr("forcing.z[0]", &z[0])?,
                y: parse_expr("forcing.z[1]", &z[1])?,
            }),
        })
    }

    /// The PDE experiment, optionally at another `eps`.
    pub fn pde_case(&self, eps: Option<f64>) -> Result<PdeCase> {
        self.case_with(eps, self.time()?)
    }

    fn case_with(&self, eps: Option<f64>, t: &TimeSpec) -> Result<PdeCase> {
        let grid = self.grid()?;
        let mut params = self.model_params();
        if let Some(e) = eps {
            params.eps = e;
        }
        Ok(PdeCase {
            grid,
            params,
            landscape: self.landscape()?,
            forcing: self.forcing(&grid)?,
            vortices: self.vortices.clone(),
            horizon: t.horizon,
            dt: t.dt,
            frame_interval: t.frame_interval,
            snapshot_every: t.snapshot_every,
            record_identities: self.studies.record_identities,
        })
    }

    pub fn law_dt(&self) -> Result<f64> {
        Ok(self.time()?.law_dt)
    }

    /// The law as a template; gridded `Z` is solved for when the forcing
    /// comes from boundary data.
    pub fn ode_system(&self) -> Result<OdeSystem> {
        // The law does not depend on the time schedule.
        let unit = TimeSpec {
            horizon: 1.0,
            dt: None,
            frame_interval: 1.0,
            snapshot_every: None,
            law_dt: default_law_dt(),
        };
        Ok(self
            .case_with(None, self.time.as_ref().unwrap_or(&unit))?
            .prepare()?
            .law)
    }

    pub fn confinement(&self) -> Result<Option<ConfinementSpec>> {
        Ok(self.studies.critical.as_ref().map(|c| ConfinementSpec {
            minima: c.minima.clone(),
            radius: c.radius,
            horizon: c.horizon,
            dt: c.dt,
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "domain": {"lx": 1.0, "ly": 1.0, "nx": 17, "ny": 17},
        "params": {"alpha": 1.0, "beta": 0.0, "sigma": 1.0, "eps": 0.05, "lambda": 1.0},
        "pinning": {"kind": "gaussian_well", "center": [0.5, 0.5], "depth": 0.5, "width": 0.2},
        "boundary": {"h": "0.3 * sin(pi * x)^2 * sin(pi * y)^2", "jx": "1", "jy": "0"},
        "vortices": [{"position": [0.5, 0.5], "degree": 1}],
        "time": {"horizon": 0.1, "frame_interval": 0.01}
    }"#;

    #[test]
    fn parses_sample_with_defaults() {
        let c = RunConfig::from_json(SAMPLE).unwrap();
        assert_eq!(c.flavor, Flavor::ForcedGl);
        assert_eq!(c.forcing, ForcingSpec::Boundary);
        assert_eq!(c.time.as_ref().unwrap().law_dt, 1e-3);
        assert_eq!(c.thresholds.identity_residual, 1e-3);
        let bd = c.boundary_data(&c.grid().unwrap()).unwrap();
        assert!((bd.jx.south[3] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hash_ignores_key_order_and_output_dir() {
        let a = RunConfig::from_json(SAMPLE).unwrap();
        let permuted = r#"{
            "time": {"frame_interval": 0.01, "horizon": 0.1},
            "vortices": [{"degree": 1, "position": [0.5, 0.5]}],
            "boundary": {"jy": "0", "jx": "1", "h": "0.3 * sin(pi * x)^2 * sin(pi * y)^2"},
            "pinning": {"width": 0.2, "depth": 0.5, "center": [0.5, 0.5], "kind": "gaussian_well"},
            "params": {"lambda": 1.0, "eps": 0.05, "sigma": 1.0, "beta": 0.0, "alpha": 1.0},
            "domain": {"ny": 17, "nx": 17, "ly": 1.0, "lx": 1.0},
            "output_dir": "elsewhere"
        }"#;
        let b = RunConfig::from_json(permuted).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let mut c = a.clone();
        c.params.eps = 0.04;
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn malformed_expression_names_the_field() {
        let bad = SAMPLE.replace("\"jx\": \"1\"", "\"jx\": \"1 + * x\"");
        match RunConfig::from_json(&bad) {
            Err(Error::ConfigError { field, .. }) => assert_eq!(field, "boundary.jx"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_values() {
        for (from, to, field) in [
            ("\"eps\": 0.05", "\"eps\": -0.05", "params.eps"),
            ("\"degree\": 1", "\"degree\": 2", "vortices[0].degree"),
            ("\"depth\": 0.5", "\"depth\": 1.5", "pinning"),
            ("\"nx\": 17", "\"nx\": 2", "domain"),
        ] {
            match RunConfig::from_json(&SAMPLE.replace(from, to)) {
                Err(Error::ConfigError { field: f, .. }) => assert_eq!(f, field),
                other => panic!("{from}: unexpected {other:?}"),
            }
        }
        assert!(matches!(
            RunConfig::from_json(
                &SAMPLE
                    .replace("\"seed\"", "x")
                    .replace("\"time\"", "\"tme\"")
            ),
            Err(Error::ConfigError { .. })
        ));
    }

    #[test]
    fn sampled_edges_must_match_the_grid() {
        let c = RunConfig::from_json(SAMPLE).unwrap();
        let g = c.grid().unwrap();
        let mut cfg = c.clone();
        cfg.boundary.h = EdgeSpec::Sampled(EdgeValues::zeros(&g));
        assert!(cfg.validate().is_ok());
        let mut short = EdgeValues::zeros(&g);
        short.north.pop();
        cfg.boundary.h = EdgeSpec::Sampled(short);
        assert!(matches!(cfg.validate(), Err(Error::ConfigError { .. })));
    }
}
