//! JSON scenario files and initial-condition specs.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "name": "two-patch",
//!   "domain": { "patches": { "count": 2, "edges": [[0, 1, 1.0]] } },
//!   "diffusivity": 1.0,
//!   "input": 1.0,
//!   "resource_mortality": 1.0,
//!   "species": [
//!     { "mortality": [0.1, 0.9], "consumption": { "linear": { "c": 1.0 } } }
//!   ]
//! }
//! ```
//!
//! Any coefficient may be a scalar (constant in space) or one value per site.

use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{build_interval_operator, build_patch_operator, DomainKind, SpatialDomain};
use crate::error::{Error, Result};
use crate::model::{CompetitionModel, Consumption, Species, State};
use crate::simulate::{IntegratorConfig, Scheme};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Field {
    Scalar(f64),
    Sites(Vec<f64>),
}

impl Field {
    fn expand(&self, sites: usize, name: &str) -> Result<Vec<f64>> {
        match self {
            Field::Scalar(v) => Ok(vec![*v; sites]),
            Field::Sites(v) if v.len() == sites => Ok(v.clone()),
            Field::Sites(v) => Err(Error::Scenario(format!(
                "{name}: expected {sites} site values, got {}",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Patches {
        count: usize,
        /// `[from, to, weight]`; symmetric.
        #[serde(default)]
        edges: Vec<(usize, usize, f64)>,
        /// Full symmetric weight matrix, alternative to `edges`.
        #[serde(default)]
        adjacency: Option<Vec<Vec<f64>>>,
        /// Site volumes; uniform when absent.
        #[serde(default)]
        weights: Option<Vec<f64>>,
    },
    Interval {
        length: f64,
        cells: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ConsumptionSpec {
    Linear {
        c: Field,
    },
    Monod {
        c: Field,
        k: Field,
    },
    /// `scale * shared_consumption`
    Scaled {
        scale: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub mortality: Field,
    pub consumption: ConsumptionSpec,
    #[serde(rename = "yield", default = "one")]
    pub yield_coefficient: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    #[serde(default)]
    pub scheme: Option<String>,
    #[serde(default)]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub record_every: Option<f64>,
    #[serde(default)]
    pub dt_init: Option<f64>,
    #[serde(default)]
    pub dt_min: Option<f64>,
    #[serde(default)]
    pub dt_max: Option<f64>,
    #[serde(default)]
    pub rel_tol: Option<f64>,
    #[serde(default)]
    pub abs_tol: Option<f64>,
}

/// `[base, factor, count]`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec(pub f64, pub f64, pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub seed: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CepSpec {
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub t_end: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub description: Option<String>,
    pub domain: DomainSpec,
    /// One value for all rows or one per row `R, U_1, .., U_N`.
    pub diffusivity: Field,
    pub input: Field,
    pub resource_mortality: Field,
    #[serde(default)]
    pub shared_consumption: Option<ConsumptionSpec>,
    pub species: Vec<SpeciesSpec>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub initial: Option<InitialSpec>,
    #[serde(default)]
    pub integrator: Option<IntegratorSpec>,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub cep: Option<CepSpec>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| {
            Error::Scenario(format!("line {} column {}: {e}", e.line(), e.column()))
        })?;
        if s.schema_version != SCHEMA_VERSION {
            return Err(Error::Scenario(format!(
                "schema_version: expected {SCHEMA_VERSION}, got {}",
                s.schema_version
            )));
        }
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Scenario(m) => Error::Scenario(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or("scenario")
    }

    pub fn build_domain(&self) -> Result<SpatialDomain> {
        match &self.domain {
            DomainSpec::Patches { count, weights, .. } => match weights {
                None => SpatialDomain::patches(*count),
                Some(w) if w.len() == *count => {
                    SpatialDomain::with_weights(DomainKind::PatchNetwork, w.clone())
                }
                Some(w) => Err(Error::Scenario(format!(
                    "domain.patches.weights: expected {count} values, got {}",
                    w.len()
                ))),
            },
            DomainSpec::Interval { length, cells } => SpatialDomain::interval(*length, *cells),
        }
    }

    fn edge_matrix(&self, count: usize) -> Result<DMatrix<f64>> {
        let DomainSpec::Patches {
            edges, adjacency, ..
        } = &self.domain
        else {
            unreachable!("patch domain");
        };
        let mut w = DMatrix::zeros(count, count);
        if let Some(adj) = adjacency {
            if !edges.is_empty() {
                return Err(Error::Scenario(
                    "domain.patches: give either edges or adjacency, not both".into(),
                ));
            }
            if adj.len() != count || adj.iter().any(|r| r.len() != count) {
                return Err(Error::Scenario(format!(
                    "domain.patches.adjacency: expected a {count}x{count} matrix"
                )));
            }
            for (j, row) in adj.iter().enumerate() {
                for (k, v) in row.iter().enumerate() {
                    w[(j, k)] = *v;
                }
            }
        }
        for (e, &(a, b, v)) in edges.iter().enumerate() {
            if a >= count || b >= count || a == b {
                return Err(Error::Scenario(format!(
                    "domain.patches.edges[{e}]: invalid sites ({a}, {b}) for {count} patches"
                )));
            }
            w[(a, b)] += v;
            w[(b, a)] += v;
        }
        Ok(w)
    }

    fn consumption(&self, spec: &ConsumptionSpec, sites: usize, name: &str) -> Result<Consumption> {
        Ok(match spec {
            ConsumptionSpec::Linear { c } => {
                Consumption::linear(c.expand(sites, &format!("{name}.c"))?)
            }
            ConsumptionSpec::Monod { c, k } => {
                let ks = k.expand(sites, &format!("{name}.k"))?;
                if ks.iter().any(|v| *v != ks[0]) {
                    return Err(Error::Scenario(format!(
                        "{name}.k: the half-saturation constant must be the same at every site"
                    )));
                }
                Consumption::monod(c.expand(sites, &format!("{name}.c"))?, ks[0])
            }
            ConsumptionSpec::Scaled { scale } => {
                let base = match &self.shared_consumption {
                    None => {
                        return Err(Error::Scenario(format!(
                            "{name}: scaled consumption needs a top-level shared_consumption"
                        )))
                    }
                    Some(ConsumptionSpec::Scaled { .. }) => {
                        return Err(Error::Scenario(
                            "shared_consumption: must be linear or monod".into(),
                        ))
                    }
                    Some(b) => self.consumption(b, sites, "shared_consumption")?,
                };
                Consumption::scaled(*scale, Arc::new(base))
            }
        })
    }

    /// Validates every field and assembles the model.
    pub fn build_model(&self) -> Result<CompetitionModel> {
        if self.species.is_empty() {
            return Err(Error::Scenario(
                "species: at least one species is required".into(),
            ));
        }
        let domain = self.build_domain()?;
        let p = domain.site_count();
        let rows = self.species.len() + 1;
        let diff = match &self.diffusivity {
            Field::Scalar(v) => vec![*v; rows],
            Field::Sites(v) if v.len() == rows => v.clone(),
            Field::Sites(v) => {
                return Err(Error::Scenario(format!(
                    "diffusivity: expected 1 or {rows} values (R then each species), got {}",
                    v.len()
                )))
            }
        };
        let migration = match &self.domain {
            DomainSpec::Patches { count, .. } => {
                build_patch_operator(&self.edge_matrix(*count)?, &diff)?
            }
            DomainSpec::Interval { length, cells } => {
                if let Some((i, v)) = diff.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
                    return Err(Error::NonPositiveDiffusivity {
                        value: *v,
                        context: format!("diffusivity[{i}]"),
                    });
                }
                build_interval_operator(*length, *cells, rows, |i, _| diff[i])?
            }
        };
        let species = self
            .species
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let name = format!("species[{i}]");
                Ok(Species::new(
                    s.mortality.expand(p, &format!("{name}.mortality"))?,
                    self.consumption(&s.consumption, p, &format!("{name}.consumption"))?,
                )
                .with_yield(s.yield_coefficient))
            })
            .collect::<Result<Vec<_>>>()?;
        CompetitionModel::new(
            domain,
            migration,
            self.input.expand(p, "input")?,
            self.resource_mortality.expand(p, "resource_mortality")?,
            species,
        )
    }

    /// Scenario integrator settings on top of the defaults.
    pub fn integrator_config(&self) -> Result<IntegratorConfig> {
        let mut cfg = IntegratorConfig::default();
        if let Some(s) = &self.integrator {
            if let Some(name) = &s.scheme {
                cfg.scheme = parse_scheme(name)?;
            }
            let set = |slot: &mut f64, v: Option<f64>| {
                if let Some(v) = v {
                    *slot = v;
                }
            };
            set(&mut cfg.t_end, s.t_end);
            set(&mut cfg.record_every, s.record_every);
            set(&mut cfg.dt_init, s.dt_init);
            set(&mut cfg.dt_min, s.dt_min);
            set(&mut cfg.dt_max, s.dt_max);
            set(&mut cfg.rel_tol, s.rel_tol);
            set(&mut cfg.abs_tol, s.abs_tol);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn parse_scheme(name: &str) -> Result<Scheme> {
    match name {
        "exp_imex" | "exp-imex" => Ok(Scheme::ExpImex),
        "implicit" | "fully_implicit" | "fully-implicit" => Ok(Scheme::FullyImplicit),
        other => Err(Error::Scenario(format!(
            "integrator.scheme: unknown scheme {other:?} (exp_imex or implicit)"
        ))),
    }
}

/// Initial data in output units (`V = lambda U` on species rows).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSpec {
    Uniform { uniform: (f64, f64), seed: u64 },
    Constant { constant: Vec<f64> },
    Sites { sites: Vec<Vec<f64>> },
}

impl InitialSpec {
    /// Inline JSON when `text` starts with `{`, otherwise a file path.
    pub fn parse(text: &str) -> Result<Self> {
        let body = if text.trim_start().starts_with('{') {
            text.to_string()
        } else {
            std::fs::read_to_string(text).map_err(|e| Error::Io(format!("{text}: {e}")))?
        };
        serde_json::from_str(&body).map_err(|e| {
            Error::Scenario(format!(
                "initial: {e}; expected {{\"uniform\": [lo, hi], \"seed\": n}}, {{\"constant\": [..]}} or {{\"sites\": [[..]]}}"
            ))
        })
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            InitialSpec::Uniform { seed, .. } => Some(*seed),
            _ => None,
        }
    }

    /// Model-unit state for `model`.
    pub fn build(&self, model: &CompetitionModel) -> Result<State> {
        let rows = model.species_count() + 1;
        let cols = model.site_count();
        let out = match self {
            InitialSpec::Uniform {
                uniform: (lo, hi),
                seed,
            } => {
                if !(0.0 <= *lo && lo < hi) || !hi.is_finite() {
                    return Err(Error::Scenario(format!(
                        "initial.uniform: need 0 <= lo < hi, got [{lo}, {hi}]"
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                State::from_fn(rows, cols, |_, _| rng.gen_range(*lo..*hi))
            }
            InitialSpec::Constant { constant } => model.constant_state(constant)?,
            InitialSpec::Sites { sites } => {
                if sites.len() != rows || sites.iter().any(|r| r.len() != cols) {
                    return Err(Error::Scenario(format!(
                        "initial.sites: expected {rows} rows of {cols} values"
                    )));
                }
                State::from_fn(rows, cols, |i, j| sites[i][j])
            }
        };
        if let Some(v) = out.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::Scenario(format!(
                "initial: values must be finite and nonnegative, got {v}"
            )));
        }
        Ok(model.to_model_units(&out))
    }
}
