//! Biological parameters and the site-local reaction map.
//!
//! Species densities are stored in yield-rescaled units `U_i = V_i / lambda_i`,
//! so the resource row reads `I - m_0 R - sum_i f_i(R) U_i` and species rows
//! `(f_i(R) - m_i) U_i`. Conversion to and from the original units happens at
//! the boundary through [`CompetitionModel::to_model_units`] and
//! [`CompetitionModel::to_output_units`].

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::domain::{MigrationOperator, SpatialDomain};
use crate::error::{Error, Result};

/// `(N+1) x P` matrix: row 0 the resource, row `i` the density of species `i`.
pub type State = DMatrix<f64>;

/// Uptake rate `f_i(x, R)`; all variants vanish at `R = 0` and increase strictly in `R`.
#[derive(Debug, Clone, PartialEq)]
pub enum Consumption {
    /// `C(x) R`
    Linear { c: Vec<f64> },
    /// `C(x) R / (k + R)`, half-saturation shared by all sites.
    Monod { c: Vec<f64>, k: f64 },
    /// `scale * base(x, R)` for a base function shared between species.
    ScaledCommon { scale: f64, base: Arc<Consumption> },
}

/// Functional form of an averaged uptake curve, up to its amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UptakeShape {
    Linear,
    Monod { k: f64 },
}

/// `f~(r) = amplitude * shape(r)`, the weighted site average of a [`Consumption`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedUptake {
    pub amplitude: f64,
    pub shape: UptakeShape,
}

impl AveragedUptake {
    pub fn eval(&self, r: f64) -> f64 {
        match self.shape {
            UptakeShape::Linear => self.amplitude * r,
            UptakeShape::Monod { k } => self.amplitude * r / (k + r),
        }
    }

    pub fn deriv(&self, r: f64) -> f64 {
        match self.shape {
            UptakeShape::Linear => self.amplitude,
            UptakeShape::Monod { k } => self.amplitude * k / ((k + r) * (k + r)),
        }
    }

    pub fn supremum(&self) -> f64 {
        match self.shape {
            UptakeShape::Linear => f64::INFINITY,
            UptakeShape::Monod { .. } => self.amplitude,
        }
    }

    /// Solution of `f~(r) = level`, or `+inf` when the curve never reaches it.
    pub fn inverse(&self, level: f64) -> f64 {
        match self.shape {
            UptakeShape::Linear => level / self.amplitude,
            UptakeShape::Monod { k } => {
                if level < self.amplitude {
                    k * level / (self.amplitude - level)
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

impl Consumption {
    pub fn linear(c: Vec<f64>) -> Self {
        Consumption::Linear { c }
    }

    pub fn monod(c: Vec<f64>, k: f64) -> Self {
        Consumption::Monod { c, k }
    }

    pub fn scaled(scale: f64, base: Arc<Consumption>) -> Self {
        Consumption::ScaledCommon { scale, base }
    }

    pub fn eval(&self, site: usize, r: f64) -> f64 {
        match self {
            Consumption::Linear { c } => c[site] * r,
            Consumption::Monod { c, k } => c[site] * r / (k + r),
            Consumption::ScaledCommon { scale, base } => scale * base.eval(site, r),
        }
    }

    /// `d f / d R` at `(site, r)`.
    pub fn deriv(&self, site: usize, r: f64) -> f64 {
        match self {
            Consumption::Linear { c } => c[site],
            Consumption::Monod { c, k } => c[site] * k / ((k + r) * (k + r)),
            Consumption::ScaledCommon { scale, base } => scale * base.deriv(site, r),
        }
    }

    /// Local break-even `f(site, .)^{-1}(level)`, `+inf` if unreachable.
    pub fn local_inverse(&self, site: usize, level: f64) -> f64 {
        match self {
            Consumption::Linear { c } => level / c[site],
            Consumption::Monod { c, k } => {
                if level < c[site] {
                    k * level / (c[site] - level)
                } else {
                    f64::INFINITY
                }
            }
            Consumption::ScaledCommon { scale, base } => base.local_inverse(site, level / scale),
        }
    }

    /// Per-site linear coefficients, when the function is linear in `R`.
    pub fn linear_coefficients(&self) -> Option<Vec<f64>> {
        match self {
            Consumption::Linear { c } => Some(c.clone()),
            Consumption::Monod { .. } => None,
            Consumption::ScaledCommon { scale, base } => base
                .linear_coefficients()
                .map(|c| c.into_iter().map(|v| scale * v).collect()),
        }
    }

    pub fn averaged(&self, domain: &SpatialDomain) -> AveragedUptake {
        match self {
            Consumption::Linear { c } => AveragedUptake {
                amplitude: domain.mean(c),
                shape: UptakeShape::Linear,
            },
            Consumption::Monod { c, k } => AveragedUptake {
                amplitude: domain.mean(c),
                shape: UptakeShape::Monod { k: *k },
            },
            Consumption::ScaledCommon { scale, base } => {
                let b = base.averaged(domain);
                AveragedUptake {
                    amplitude: scale * b.amplitude,
                    shape: b.shape,
                }
            }
        }
    }

    fn validate(&self, sites: usize, field: &str) -> Result<()> {
        let err = |reason: String| Error::InvalidModel {
            field: field.to_string(),
            reason,
        };
        let check_c = |c: &[f64]| -> Result<()> {
            if c.len() != sites {
                return Err(err(format!(
                    "expected {sites} site values, got {}",
                    c.len()
                )));
            }
            if let Some(j) = c.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(err(format!(
                    "consumption coefficient C(x) must be positive (site {j}, got {}); f_i(x, .) has to be increasing",
                    c[j]
                )));
            }
            Ok(())
        };
        match self {
            Consumption::Linear { c } => check_c(c),
            Consumption::Monod { c, k } => {
                check_c(c)?;
                if !(*k > 0.0) || !k.is_finite() {
                    return Err(err(format!("half-saturation k must be positive, got {k}")));
                }
                Ok(())
            }
            Consumption::ScaledCommon { scale, base } => {
                if !(*scale > 0.0) || !scale.is_finite() {
                    return Err(err(format!("scale must be positive, got {scale}")));
                }
                base.validate(sites, field)
            }
        }
    }
}

/// Parameters of one competing species.
#[derive(Debug, Clone, PartialEq)]
pub struct Species {
    pub mortality: Vec<f64>,
    pub consumption: Consumption,
    pub yield_coefficient: f64,
}

impl Species {
    pub fn new(mortality: Vec<f64>, consumption: Consumption) -> Self {
        Self {
            mortality,
            consumption,
            yield_coefficient: 1.0,
        }
    }

    pub fn with_yield(mut self, y: f64) -> Self {
        self.yield_coefficient = y;
        self
    }
}

/// Input field, mortalities, uptake functions and migration, validated together.
#[derive(Debug, Clone, PartialEq)]
pub struct CompetitionModel {
    domain: SpatialDomain,
    migration: MigrationOperator,
    input: Vec<f64>,
    /// `mortality[0]` is `m_0`, `mortality[i]` belongs to species `i`.
    mortality: Vec<Vec<f64>>,
    consumption: Vec<Consumption>,
    yields: Vec<f64>,
}

impl CompetitionModel {
    pub fn new(
        domain: SpatialDomain,
        migration: MigrationOperator,
        input: Vec<f64>,
        resource_mortality: Vec<f64>,
        species: Vec<Species>,
    ) -> Result<Self> {
        let p = domain.site_count();
        let n = species.len();
        migration.check_conservation(&domain)?;
        if migration.species_count() != n + 1 {
            return Err(Error::DimensionMismatch {
                expected: format!("{} migration matrices", n + 1),
                got: migration.species_count().to_string(),
                context: "one matrix for the resource and each species".into(),
            });
        }
        check_len(&input, p, "input")?;
        if let Some(j) = input.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidModel {
                field: format!("input[{j}]"),
                reason: format!("I(x)>=0 violated (got {})", input[j]),
            });
        }
        if input.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidModel {
                field: "input".into(),
                reason: "I must not vanish identically (I(x)>0 somewhere)".into(),
            });
        }
        let mut mortality = Vec::with_capacity(n + 1);
        mortality.push(resource_mortality);
        let mut consumption = Vec::with_capacity(n);
        let mut yields = Vec::with_capacity(n);
        for s in species {
            mortality.push(s.mortality);
            consumption.push(s.consumption);
            yields.push(s.yield_coefficient);
        }
        for (i, m) in mortality.iter().enumerate() {
            let name = if i == 0 {
                "resource_mortality".to_string()
            } else {
                format!("species[{}].mortality", i - 1)
            };
            check_len(m, p, &name)?;
            if let Some(j) = m.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::InvalidModel {
                    field: format!("{name}[{j}]"),
                    reason: format!("m_i(x)>0 violated (got {})", m[j]),
                });
            }
        }
        for (i, f) in consumption.iter().enumerate() {
            f.validate(p, &format!("species[{i}].consumption"))?;
        }
        for (i, y) in yields.iter().enumerate() {
            if !(*y > 0.0) || !y.is_finite() {
                return Err(Error::InvalidModel {
                    field: format!("species[{i}].yield"),
                    reason: format!("yield must be positive, got {y}"),
                });
            }
        }
        Ok(Self {
            domain,
            migration,
            input,
            mortality,
            consumption,
            yields,
        })
    }

    pub fn domain(&self) -> &SpatialDomain {
        &self.domain
    }

    pub fn migration(&self) -> &MigrationOperator {
        &self.migration
    }

    /// Number of competing species `N`.
    pub fn species_count(&self) -> usize {
        self.consumption.len()
    }

    pub fn site_count(&self) -> usize {
        self.domain.site_count()
    }

    /// Length of the flattened state, `(N+1) P`.
    pub fn dimension(&self) -> usize {
        (self.species_count() + 1) * self.site_count()
    }

    pub fn input(&self) -> &[f64] {
        &self.input
    }

    /// `m_0` for `i = 0`, otherwise the mortality of species `i`.
    pub fn mortality(&self, i: usize) -> &[f64] {
        &self.mortality[i]
    }

    /// Uptake function of species `i >= 1`.
    pub fn consumption(&self, i: usize) -> &Consumption {
        &self.consumption[i - 1]
    }

    pub fn yields(&self) -> &[f64] {
        &self.yields
    }

    pub fn zero_state(&self) -> State {
        State::zeros(self.species_count() + 1, self.site_count())
    }

    /// Spatially constant state with row values `values`.
    pub fn constant_state(&self, values: &[f64]) -> Result<State> {
        if values.len() != self.species_count() + 1 {
            return Err(Error::DimensionMismatch {
                expected: (self.species_count() + 1).to_string(),
                got: values.len().to_string(),
                context: "constant state values".into(),
            });
        }
        Ok(State::from_fn(values.len(), self.site_count(), |i, _| {
            values[i]
        }))
    }

    /// `V -> U = V / lambda` on species rows.
    pub fn to_model_units(&self, state: &State) -> State {
        let mut s = state.clone();
        for (i, y) in self.yields.iter().enumerate() {
            s.row_mut(i + 1).unscale_mut(*y);
        }
        s
    }

    /// `U -> V = lambda U` on species rows.
    pub fn to_output_units(&self, state: &State) -> State {
        let mut s = state.clone();
        for (i, y) in self.yields.iter().enumerate() {
            s.row_mut(i + 1).scale_mut(*y);
        }
        s
    }

    pub(crate) fn check_state(&self, state: &State) -> Result<()> {
        if state.nrows() != self.species_count() + 1 || state.ncols() != self.site_count() {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.species_count() + 1, self.site_count()),
                got: format!("{}x{}", state.nrows(), state.ncols()),
                context: "state vs model".into(),
            });
        }
        Ok(())
    }

    /// Site-local reaction map `F(x, W(x))`.
    pub fn reaction(&self, state: &State) -> Result<State> {
        self.check_state(state)?;
        let mut out = self.zero_state();
        self.reaction_into(state, &mut out);
        Ok(out)
    }

    pub(crate) fn reaction_into(&self, state: &State, out: &mut State) {
        let n = self.species_count();
        for j in 0..self.site_count() {
            let r = state[(0, j)];
            let mut res = self.input[j] - self.mortality[0][j] * r;
            for i in 1..=n {
                let u = state[(i, j)];
                let f = self.consumption[i - 1].eval(j, r);
                res -= u * f;
                out[(i, j)] = (f - self.mortality[i][j]) * u;
            }
            out[(0, j)] = res;
        }
    }

    /// Analytic Jacobian of the reaction map, flattened species-major
    /// (`index = i * P + j`). Entries couple only rows at the same site.
    pub fn reaction_jacobian(&self, state: &State) -> Result<DMatrix<f64>> {
        self.check_state(state)?;
        Ok(self.reaction_jacobian_unchecked(state))
    }

    pub(crate) fn reaction_jacobian_unchecked(&self, state: &State) -> DMatrix<f64> {
        let n = self.species_count();
        let p = self.site_count();
        let mut jac = DMatrix::zeros((n + 1) * p, (n + 1) * p);
        for j in 0..p {
            let r = state[(0, j)];
            let mut drr = -self.mortality[0][j];
            for i in 1..=n {
                let u = state[(i, j)];
                let f = self.consumption[i - 1].eval(j, r);
                let df = self.consumption[i - 1].deriv(j, r);
                drr -= df * u;
                jac[(j, i * p + j)] = -f;
                jac[(i * p + j, j)] = df * u;
                jac[(i * p + j, i * p + j)] = f - self.mortality[i][j];
            }
            jac[(j, j)] = drr;
        }
        jac
    }

    /// `F(W) + K W / eps`.
    pub fn full_vector_field(&self, epsilon: f64, state: &State) -> Result<State> {
        check_epsilon(epsilon)?;
        let mut out = self.reaction(state)?;
        self.migration.apply_into(state, 1.0 / epsilon, &mut out);
        Ok(out)
    }

    /// Jacobian of the full vector field, same ordering as [`Self::reaction_jacobian`].
    pub fn full_jacobian(&self, epsilon: f64, state: &State) -> Result<DMatrix<f64>> {
        check_epsilon(epsilon)?;
        let mut jac = self.reaction_jacobian(state)?;
        jac += self.migration.assembled() / epsilon;
        Ok(jac)
    }
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::NonPositiveEpsilon(epsilon));
    }
    Ok(())
}

fn check_len(v: &[f64], p: usize, field: &str) -> Result<()> {
    if v.len() != p {
        return Err(Error::InvalidModel {
            field: field.to_string(),
            reason: format!("expected {p} site values, got {}", v.len()),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::build_patch_operator;

    fn two_patch(n: usize) -> (SpatialDomain, MigrationOperator) {
        let w = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        (
            SpatialDomain::patches(2).unwrap(),
            build_patch_operator(&w, &vec![1.0; n + 1]).unwrap(),
        )
    }

    fn sec51() -> CompetitionModel {
        let (dom, op) = two_patch(3);
        let lin = || Consumption::linear(vec![1.0, 1.0]);
        CompetitionModel::new(
            dom,
            op,
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            vec![
                Species::new(vec![0.1, 0.9], lin()),
                Species::new(vec![0.9, 0.1], lin()),
                Species::new(vec![0.4, 0.4], lin()),
            ],
        )
        .unwrap()
    }

    #[test]
    fn zero_state_reaction_is_input() {
        let m = sec51();
        let f = m.reaction(&m.zero_state()).unwrap();
        assert_eq!(f.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 1.0]);
        assert!(f.rows(1, 3).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn resource_balance_at_unit_resource() {
        let m = sec51();
        let s = m.constant_state(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        let f = m.reaction(&s).unwrap();
        assert_eq!(f[(0, 0)], 0.0);
        assert_eq!(f[(0, 1)], 0.0);
    }

    #[test]
    fn monod_break_even_point() {
        let dom = SpatialDomain::patches(1).unwrap();
        let op = MigrationOperator::new(vec![DMatrix::zeros(1, 1); 2]).unwrap();
        let m = CompetitionModel::new(
            dom,
            op,
            vec![1.0],
            vec![1.0],
            vec![Species::new(vec![0.5], Consumption::monod(vec![1.0], 1.0))],
        )
        .unwrap();
        let s = m.constant_state(&[1.0, 2.0]).unwrap();
        assert_eq!(m.reaction(&s).unwrap()[(1, 0)], 0.0);
    }

    #[test]
    fn linear_single_site_jacobian_closed_form() {
        let dom = SpatialDomain::patches(1).unwrap();
        let op = MigrationOperator::new(vec![DMatrix::zeros(1, 1); 3]).unwrap();
        let m = CompetitionModel::new(
            dom,
            op,
            vec![2.0],
            vec![0.7],
            vec![
                Species::new(vec![0.3], Consumption::linear(vec![1.5])),
                Species::new(vec![0.2], Consumption::linear(vec![0.5])),
            ],
        )
        .unwrap();
        let (r, u1, u2) = (0.8, 1.1, 2.3);
        let s = m.constant_state(&[r, u1, u2]).unwrap();
        let jac = m.reaction_jacobian(&s).unwrap();
        let expected = DMatrix::from_row_slice(
            3,
            3,
            &[
                -0.7 - u1 * 1.5 - u2 * 0.5,
                -1.5 * r,
                -0.5 * r,
                1.5 * u1,
                1.5 * r - 0.3,
                0.0,
                0.5 * u2,
                0.0,
                0.5 * r - 0.2,
            ],
        );
        assert!((jac - expected).amax() < 1e-15);
    }

    #[test]
    fn diagonal_block_on_invariant_plane() {
        let m = sec51();
        let s = m.constant_state(&[0.7, 0.0, 0.0, 0.0]).unwrap();
        let jac = m.reaction_jacobian(&s).unwrap();
        for i in 1..=3 {
            for j in 0..2 {
                let expected = m.consumption(i).eval(j, 0.7) - m.mortality(i)[j];
                assert_eq!(jac[(i * 2 + j, i * 2 + j)], expected);
            }
        }
    }

    #[test]
    fn constant_state_sees_no_migration() {
        let m = sec51();
        let s = m.constant_state(&[0.3, 1.0, 2.0, 0.5]).unwrap();
        assert_eq!(
            m.full_vector_field(1e-3, &s).unwrap(),
            m.reaction(&s).unwrap()
        );
        assert!(matches!(
            m.full_vector_field(0.0, &s),
            Err(Error::NonPositiveEpsilon(_))
        ));
    }

    #[test]
    fn halving_epsilon_doubles_migration_term() {
        let m = sec51();
        let s = State::from_row_slice(4, 2, &[0.3, 0.9, 1.0, 0.2, 2.0, 2.5, 0.5, 0.1]);
        let f = m.reaction(&s).unwrap();
        let a = m.full_vector_field(0.1, &s).unwrap() - &f;
        let b = m.full_vector_field(0.05, &s).unwrap() - &f;
        assert!((b - a * 2.0).amax() < 1e-12);
    }

    #[test]
    fn validation_names_the_assumption() {
        let (dom, op) = two_patch(1);
        let err = CompetitionModel::new(
            dom.clone(),
            op.clone(),
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            vec![Species::new(
                vec![0.0, 0.5],
                Consumption::linear(vec![1.0, 1.0]),
            )],
        )
        .unwrap_err();
        assert!(err.to_string().contains("m_i(x)>0"), "{err}");
        assert!(err.to_string().contains("species[0].mortality[0]"), "{err}");

        let err = CompetitionModel::new(
            dom,
            op,
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![Species::new(
                vec![0.2, 0.5],
                Consumption::linear(vec![1.0, 1.0]),
            )],
        )
        .unwrap_err();
        assert!(err.is_validation());
    }

    #[test]
    fn yields_round_trip() {
        let (dom, op) = two_patch(1);
        let m = CompetitionModel::new(
            dom,
            op,
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            vec![Species::new(vec![0.2, 0.5], Consumption::linear(vec![1.0, 1.0])).with_yield(4.0)],
        )
        .unwrap();
        let v = State::from_row_slice(2, 2, &[1.0, 2.0, 8.0, 4.0]);
        let u = m.to_model_units(&v);
        assert_eq!(u.row(1).iter().copied().collect::<Vec<_>>(), vec![2.0, 1.0]);
        assert_eq!(m.to_output_units(&u), v);
    }

    #[test]
    fn averaged_uptakes() {
        let dom = SpatialDomain::patches(2).unwrap();
        let base = Arc::new(Consumption::monod(vec![1.0, 3.0], 0.5));
        let f = Consumption::scaled(2.0, base.clone());
        let avg = f.averaged(&dom);
        assert_eq!(avg.amplitude, 4.0);
        assert_eq!(avg.shape, UptakeShape::Monod { k: 0.5 });
        let r = 1.3;
        let direct = 0.5 * (f.eval(0, r) + f.eval(1, r));
        assert!((avg.eval(r) - direct).abs() < 1e-15);
        assert!((avg.eval(avg.inverse(3.0)) - 3.0).abs() < 1e-14);
        assert_eq!(avg.inverse(4.0), f64::INFINITY);
        assert!((f.eval(1, f.local_inverse(1, 2.5)) - 2.5).abs() < 1e-14);
    }
}
