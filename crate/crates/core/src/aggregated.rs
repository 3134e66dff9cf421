//! The averaged chemostat obtained in the fast-migration limit.
//!
//! ```text
//! r'   = I~ - m~_0 r - sum_i f~_i(r) u_i
//! u_i' = (f~_i(r) - m~_i) u_i
//! ```
//!
//! Coefficients are weighted site averages of the heterogeneous fields. The
//! species minimizing the break-even value `r_i*` (with `f~_i(r_i*) = m~_i`)
//! is the one predicted to exclude all others.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::domain::SpatialDomain;
use crate::error::{Error, Result};
use crate::model::{AveragedUptake, CompetitionModel, UptakeShape};

/// Relative band inside which two break-even values count as tied.
pub const TOL_HYP: f64 = 1e-9;

/// Which sufficient condition for exclusion in the averaged model holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CepCase {
    /// `m~_i = m~_0` for every species.
    EqualMortality,
    /// Every `f~_i` is a positive multiple of one common increasing function.
    CommonShape,
    /// Every `f~_i` is of Monod form `c_i r / (k_i + r)`.
    Monod,
}

impl CepCase {
    pub fn label(&self) -> &'static str {
        match self {
            CepCase::EqualMortality => "equal-mortality",
            CepCase::CommonShape => "common-shape",
            CepCase::Monod => "monod",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedModel {
    /// `I~`
    pub input: f64,
    /// `m~_0 .. m~_N`
    pub mortality: Vec<f64>,
    /// `f~_1 .. f~_N`, stored at index `i - 1`.
    pub uptake: Vec<AveragedUptake>,
    /// `r_0* .. r_N*`, `+inf` when a species can never break even.
    pub r_star: Vec<f64>,
    pub cep_case: Option<CepCase>,
}

impl AggregatedModel {
    /// Builds the averaged model directly from its scalar coefficients.
    pub fn from_parts(
        input: f64,
        mortality: Vec<f64>,
        uptake: Vec<AveragedUptake>,
    ) -> Result<Self> {
        if !(input > 0.0) {
            return Err(Error::InvalidModel {
                field: "input".into(),
                reason: format!("averaged input must be positive, got {input}"),
            });
        }
        if mortality.len() != uptake.len() + 1 {
            return Err(Error::DimensionMismatch {
                expected: (uptake.len() + 1).to_string(),
                got: mortality.len().to_string(),
                context: "averaged mortalities".into(),
            });
        }
        if let Some(i) = mortality.iter().position(|m| !(*m > 0.0)) {
            return Err(Error::InvalidModel {
                field: format!("mortality[{i}]"),
                reason: "averaged mortality must be positive".into(),
            });
        }
        let mut agg = Self {
            input,
            mortality,
            uptake,
            r_star: Vec::new(),
            cep_case: None,
        };
        agg.r_star = (0..=agg.species_count())
            .map(|i| break_even(&agg, i))
            .collect();
        agg.cep_case = detect_case(&agg);
        Ok(agg)
    }

    pub fn species_count(&self) -> usize {
        self.uptake.len()
    }

    pub fn uptake(&self, i: usize) -> &AveragedUptake {
        &self.uptake[i - 1]
    }

    /// Washout level `r_0* = I~ / m~_0`.
    pub fn washout_level(&self) -> f64 {
        self.input / self.mortality[0]
    }

    pub fn vector_field(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.vector_field_into(x, &mut out);
        out
    }

    pub(crate) fn vector_field_into(&self, x: &[f64], out: &mut [f64]) {
        let r = x[0];
        let mut dr = self.input - self.mortality[0] * r;
        for i in 1..=self.species_count() {
            let f = self.uptake[i - 1].eval(r);
            dr -= f * x[i];
            out[i] = (f - self.mortality[i]) * x[i];
        }
        out[0] = dr;
    }

    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.species_count();
        let r = x[0];
        let mut jac = DMatrix::zeros(n + 1, n + 1);
        jac[(0, 0)] = -self.mortality[0];
        for i in 1..=n {
            let g = &self.uptake[i - 1];
            jac[(0, 0)] -= g.deriv(r) * x[i];
            jac[(0, i)] = -g.eval(r);
            jac[(i, 0)] = g.deriv(r) * x[i];
            jac[(i, i)] = g.eval(r) - self.mortality[i];
        }
        jac
    }

    /// Closed-form equilibrium where only species `i` survives (`i = 0`: washout).
    pub fn equilibrium_point(&self, i: usize) -> Vec<f64> {
        let n = self.species_count();
        let mut p = vec![0.0; n + 1];
        let r0 = self.washout_level();
        if i == 0 {
            p[0] = r0;
        } else {
            p[0] = self.r_star[i];
            p[i] = self.mortality[0] / self.mortality[i] * (r0 - self.r_star[i]);
        }
        p
    }
}

/// Averages the heterogeneous coefficients of `model`.
pub fn aggregate(model: &CompetitionModel) -> AggregatedModel {
    let dom = model.domain();
    let n = model.species_count();
    let input = dom.mean(model.input());
    let mortality = (0..=n).map(|i| dom.mean(model.mortality(i))).collect();
    let uptake = (1..=n)
        .map(|i| model.consumption(i).averaged(dom))
        .collect();
    // Validation of the model guarantees positivity of all averages.
    AggregatedModel::from_parts(input, mortality, uptake).expect("validated model")
}

fn detect_case(agg: &AggregatedModel) -> Option<CepCase> {
    let m0 = agg.mortality[0];
    if agg.mortality[1..]
        .iter()
        .all(|m| (m - m0).abs() <= TOL_HYP * m0)
    {
        return Some(CepCase::EqualMortality);
    }
    let first = agg.uptake.first()?.shape;
    if agg.uptake.iter().all(|u| same_shape(u.shape, first)) {
        return Some(CepCase::CommonShape);
    }
    if agg
        .uptake
        .iter()
        .all(|u| matches!(u.shape, UptakeShape::Monod { .. }))
    {
        return Some(CepCase::Monod);
    }
    None
}

fn same_shape(a: UptakeShape, b: UptakeShape) -> bool {
    match (a, b) {
        (UptakeShape::Linear, UptakeShape::Linear) => true,
        (UptakeShape::Monod { k: ka }, UptakeShape::Monod { k: kb }) => ka == kb,
        _ => false,
    }
}

/// `r_i*`; `r_0*` is the washout level. Returns `+inf` when
/// `sup_r f~_i(r) <= m~_i`.
pub fn break_even(agg: &AggregatedModel, i: usize) -> f64 {
    if i == 0 {
        return agg.washout_level();
    }
    let g = agg.uptake(i);
    let m = agg.mortality[i];
    if g.supremum() <= m {
        return f64::INFINITY;
    }
    let mut r = g.inverse(m);
    // one Newton polish on the closed form
    let d = g.deriv(r);
    if d > 0.0 && r.is_finite() {
        let next = r - (g.eval(r) - m) / d;
        if next > 0.0 && (g.eval(next) - m).abs() < (g.eval(r) - m).abs() {
            r = next;
        }
    }
    r
}

fn tied(a: f64, b: f64) -> bool {
    a.is_finite() && b.is_finite() && (a - b).abs() <= TOL_HYP * a.abs().max(b.abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedEquilibrium {
    /// `(r, u_1, .., u_N)`
    pub point: Vec<f64>,
    /// 0 for washout, otherwise the only species present.
    pub surviving_index: usize,
    pub hyperbolic: bool,
    pub stable: bool,
    pub eigenvalues: Vec<Complex64>,
    /// `max |vector field|` at the point.
    pub residual: f64,
}

/// Nonnegative equilibria: washout plus one per species with `r_i* < r_0*`.
pub fn equilibria(agg: &AggregatedModel) -> Vec<AggregatedEquilibrium> {
    let r0 = agg.washout_level();
    std::iter::once(0)
        .chain((1..=agg.species_count()).filter(|&i| agg.r_star[i] < r0))
        .map(|i| classify(agg, i))
        .collect()
}

fn classify(agg: &AggregatedModel, i: usize) -> AggregatedEquilibrium {
    let point = agg.equilibrium_point(i);
    let residual = agg
        .vector_field(&point)
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    let eigenvalues: Vec<Complex64> = agg
        .jacobian(&point)
        .complex_eigenvalues()
        .iter()
        .copied()
        .collect();
    let scale = eigenvalues.iter().fold(1.0_f64, |m, z| m.max(z.norm()));
    let stable = eigenvalues.iter().all(|z| z.re < 0.0);
    let any_tie = (0..agg.r_star.len()).any(|j| j != i && tied(agg.r_star[i], agg.r_star[j]));
    let hyperbolic = !any_tie && eigenvalues.iter().all(|z| z.re.abs() > TOL_HYP * scale);
    AggregatedEquilibrium {
        point,
        surviving_index: i,
        hyperbolic,
        stable,
        eigenvalues,
        residual,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CepPrediction {
    /// `{0} U {j : u_j(0) > 0, r_j* < r_0*}`
    pub j_set: Vec<usize>,
    pub r_hat: f64,
    /// Index of the surviving species, 0 for washout.
    pub winner: usize,
    pub limit: Vec<f64>,
}

/// Long-time outcome of the averaged model from `initial = (r, u_1, .., u_N)`.
pub fn predict_cep(agg: &AggregatedModel, initial: &[f64]) -> Result<CepPrediction> {
    if initial.len() != agg.species_count() + 1 {
        return Err(Error::DimensionMismatch {
            expected: (agg.species_count() + 1).to_string(),
            got: initial.len().to_string(),
            context: "initial slow vector".into(),
        });
    }
    if agg.cep_case.is_none() {
        return Err(Error::CepAssumptionUnmet);
    }
    let r0 = agg.washout_level();
    let j_set: Vec<usize> = std::iter::once(0)
        .chain((1..=agg.species_count()).filter(|&j| initial[j] > 0.0 && agg.r_star[j] < r0))
        .collect();
    let winner = j_set
        .iter()
        .copied()
        .min_by(|&a, &b| agg.r_star[a].total_cmp(&agg.r_star[b]))
        .expect("J contains 0");
    let r_hat = agg.r_star[winner];
    if let Some(&other) = j_set
        .iter()
        .find(|&&j| j != winner && tied(agg.r_star[j], r_hat))
    {
        return Err(Error::TiedRStar {
            a: winner.min(other),
            b: winner.max(other),
            value: r_hat,
        });
    }
    Ok(CepPrediction {
        j_set,
        r_hat,
        winner,
        limit: agg.equilibrium_point(winner),
    })
}

/// `r_i* = E(R_i*) + J_i + H_i` for one species.
#[derive(Debug, Clone, PartialEq)]
pub struct StrengthDecomposition {
    pub species: usize,
    /// Local break-even `R_i*(x)` at each site.
    pub local_break_even: Vec<f64>,
    /// `E(R_i*)`, the averaged local strength.
    pub mean_local: f64,
    /// `J_i`, the nonlinear (Jensen) term.
    pub nonlinear: f64,
    /// `H_i`, the consumption-heterogeneity term.
    pub heterogeneity: f64,
    pub r_star: f64,
    pub residual: f64,
}

/// Splits each `r_i*` into mean local strength, nonlinearity and heterogeneity.
///
/// Requires every local break-even `R_i*(x)` to be finite. When
/// `f~_i^{-1}(m_i(x))` is unreachable at some site the two correction terms
/// are infinite and the residual is NaN.
pub fn decompose_strength(
    model: &CompetitionModel,
    agg: &AggregatedModel,
) -> Result<Vec<StrengthDecomposition>> {
    let dom = model.domain();
    (1..=model.species_count())
        .map(|i| {
            let f = model.consumption(i);
            let m = model.mortality(i);
            let g = agg.uptake(i);
            let local: Vec<f64> = (0..dom.site_count())
                .map(|j| f.local_inverse(j, m[j]))
                .collect();
            if let Some(site) = local.iter().position(|r| !r.is_finite()) {
                return Err(Error::LocalBreakEvenInfinite { species: i, site });
            }
            let mean_local = dom.mean(&local);
            let mean_avg_inverse = dom.mean_by(|j| g.inverse(m[j]));
            let nonlinear = g.inverse(dom.mean(m)) - mean_avg_inverse;
            let heterogeneity = mean_avg_inverse - mean_local;
            let r_star = agg.r_star[i];
            Ok(StrengthDecomposition {
                species: i,
                local_break_even: local,
                mean_local,
                nonlinear,
                heterogeneity,
                r_star,
                residual: r_star - (mean_local + nonlinear + heterogeneity),
            })
        })
        .collect()
}

/// `r_i* = E(R_i*) + cov(C_i / E(C_i), R_i*)` for linear uptake.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceReport {
    pub species: usize,
    pub local_break_even: Vec<f64>,
    pub mean_local: f64,
    pub covariance: f64,
    pub r_star: f64,
    pub residual: f64,
}

/// `cov(f, g) = E(fg) - E(f)E(g)` under the domain weights.
pub fn covariance(domain: &SpatialDomain, f: &[f64], g: &[f64]) -> f64 {
    let fg: Vec<f64> = f.iter().zip(g).map(|(a, b)| a * b).collect();
    domain.mean(&fg) - domain.mean(f) * domain.mean(g)
}

pub fn covariance_check(
    model: &CompetitionModel,
    agg: &AggregatedModel,
) -> Result<Vec<CovarianceReport>> {
    let dom = model.domain();
    (1..=model.species_count())
        .map(|i| {
            let c = model
                .consumption(i)
                .linear_coefficients()
                .ok_or(Error::NotLinear { species: i })?;
            let m = model.mortality(i);
            let local: Vec<f64> = m.iter().zip(&c).map(|(m, c)| m / c).collect();
            let c_mean = dom.mean(&c);
            let relative: Vec<f64> = c.iter().map(|v| v / c_mean).collect();
            let cov = covariance(dom, &relative, &local);
            let mean_local = dom.mean(&local);
            let r_star = agg.r_star[i];
            Ok(CovarianceReport {
                species: i,
                local_break_even: local,
                mean_local,
                covariance: cov,
                r_star,
                residual: r_star - (mean_local + cov),
            })
        })
        .collect()
}

/// Pairwise comparison behind the covariance criterion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceComparison {
    /// `cov_b - cov_a < E(R_a*) - E(R_b*)`
    pub covariance_inequality: bool,
    /// `r_b* < r_a*`
    pub b_beats_a: bool,
    /// `R_a*(x) < R_b*(x)` at every site.
    pub a_locally_dominant: bool,
}

pub fn compare_covariance(a: &CovarianceReport, b: &CovarianceReport) -> CovarianceComparison {
    CovarianceComparison {
        covariance_inequality: b.covariance - a.covariance < a.mean_local - b.mean_local,
        b_beats_a: b.r_star < a.r_star,
        a_locally_dominant: a
            .local_break_even
            .iter()
            .zip(&b.local_break_even)
            .all(|(ra, rb)| ra < rb),
    }
}

/// Linear uptake coefficients concentrated on one site.
#[derive(Debug, Clone, PartialEq)]
pub struct Concentration {
    /// Site where the first species' coefficient is concentrated (argmax of its break-even).
    pub site_first: usize,
    /// Site where the second species' coefficient is concentrated (argmin of its break-even).
    pub site_second: usize,
    pub c_first: Vec<f64>,
    pub c_second: Vec<f64>,
    /// Mortalities `m_i = C_i R_i*` that keep the local break-evens fixed.
    pub m_first: Vec<f64>,
    pub m_second: Vec<f64>,
    /// `max R_1* > min R_2*`, the condition under which the reversal is reachable.
    pub reversal_possible: bool,
}

/// Keeps local break-evens `R_1*`, `R_2*` fixed and weights the uptake of
/// species 1 onto its worst site and species 2 onto its best site, with
/// weight `ratio` against 1 elsewhere. Then `r_1*` tends to `max R_1*` and
/// `r_2*` to `min R_2*`, so the second species wins on average whenever
/// `min R_2* < max R_1*`, even if it loses at every site.
pub fn concentrate_consumption(
    local_first: &[f64],
    local_second: &[f64],
    ratio: f64,
) -> Concentration {
    let argmax = |v: &[f64]| {
        (0..v.len())
            .max_by(|&a, &b| v[a].total_cmp(&v[b]))
            .unwrap_or(0)
    };
    let argmin = |v: &[f64]| {
        (0..v.len())
            .min_by(|&a, &b| v[a].total_cmp(&v[b]))
            .unwrap_or(0)
    };
    let site_first = argmax(local_first);
    let site_second = argmin(local_second);
    let peak = |p: usize, at: usize| -> Vec<f64> {
        (0..p).map(|j| if j == at { ratio } else { 1.0 }).collect()
    };
    let c_first = peak(local_first.len(), site_first);
    let c_second = peak(local_second.len(), site_second);
    let m_first = c_first
        .iter()
        .zip(local_first)
        .map(|(c, r)| c * r)
        .collect();
    let m_second = c_second
        .iter()
        .zip(local_second)
        .map(|(c, r)| c * r)
        .collect();
    Concentration {
        site_first,
        site_second,
        c_first,
        c_second,
        m_first,
        m_second,
        reversal_possible: local_second[site_second] < local_first[site_first],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::build_patch_operator;
    use crate::model::{Consumption, Species};
    use approx::assert_relative_eq;

    fn two_patch_model(input: f64, species: Vec<(Vec<f64>, Consumption)>) -> CompetitionModel {
        let w = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let op = build_patch_operator(&w, &vec![1.0; species.len() + 1]).unwrap();
        CompetitionModel::new(
            SpatialDomain::patches(2).unwrap(),
            op,
            vec![input; 2],
            vec![1.0; 2],
            species
                .into_iter()
                .map(|(m, f)| Species::new(m, f))
                .collect(),
        )
        .unwrap()
    }

    fn sec51() -> CompetitionModel {
        let lin = || Consumption::linear(vec![1.0, 1.0]);
        two_patch_model(
            1.0,
            vec![
                (vec![0.1, 0.9], lin()),
                (vec![0.9, 0.1], lin()),
                (vec![0.4, 0.4], lin()),
            ],
        )
    }

    fn sec52() -> CompetitionModel {
        two_patch_model(
            10.0,
            vec![
                (
                    vec![0.38, 34.0 / 41.0],
                    Consumption::monod(vec![1.0, 1.0], 1.0),
                ),
                (
                    vec![0.75, 20.0 / 21.0],
                    Consumption::monod(vec![1.0, 1.0], 0.25),
                ),
            ],
        )
    }

    #[test]
    fn sec52_averages_and_break_evens() {
        let agg = aggregate(&sec52());
        assert_relative_eq!(agg.mortality[1], 0.604634, epsilon = 1e-6);
        assert_relative_eq!(agg.mortality[2], 0.851190, epsilon = 1e-6);
        assert!((agg.r_star[1] - 1.5293).abs() < 5e-5);
        assert!((agg.r_star[2] - 1.43).abs() < 1e-6);
        assert_eq!(agg.r_star[0], 10.0);
        assert_eq!(agg.cep_case, Some(CepCase::Monod));
        for i in 1..=2 {
            let m = agg.mortality[i];
            assert!((agg.uptake(i).eval(agg.r_star[i]) - m).abs() <= 1e-12 * m);
        }
    }

    #[test]
    fn sec51_averages_and_case() {
        let agg = aggregate(&sec51());
        assert_eq!(agg.mortality[1..].to_vec(), vec![0.5, 0.5, 0.4]);
        assert_eq!(agg.cep_case, Some(CepCase::CommonShape));
    }

    #[test]
    fn homogeneous_average_is_identity() {
        let m = two_patch_model(
            2.0,
            vec![(vec![0.3, 0.3], Consumption::monod(vec![1.5, 1.5], 0.7))],
        );
        let agg = aggregate(&m);
        assert_eq!(agg.input, 2.0);
        assert_eq!(agg.mortality, vec![1.0, 0.3]);
        for r in [0.0, 0.4, 3.0] {
            assert_relative_eq!(
                agg.uptake(1).eval(r),
                m.consumption(1).eval(0, r),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn saturating_below_mortality_has_infinite_break_even() {
        let m = two_patch_model(
            1.0,
            vec![(vec![0.9, 1.3], Consumption::monod(vec![1.0, 1.0], 1.0))],
        );
        let agg = aggregate(&m);
        assert_eq!(agg.r_star[1], f64::INFINITY);
        let eq = equilibria(&agg);
        assert_eq!(eq.len(), 1);
        assert!(eq[0].stable);
    }

    #[test]
    fn sec51_equilibria_and_winner() {
        let agg = aggregate(&sec51());
        let eq = equilibria(&agg);
        assert_eq!(eq.len(), 4);
        let winner = eq.iter().find(|e| e.surviving_index == 3).unwrap();
        // direct substitution: 0 = 1 - 0.4 - 0.4 u  =>  u = 1.5
        assert_relative_eq!(winner.point[0], 0.4, epsilon = 1e-15);
        assert_relative_eq!(winner.point[3], 1.5, epsilon = 1e-14);
        assert!(winner.stable && winner.hyperbolic);
        assert_eq!(eq.iter().filter(|e| e.stable).count(), 1);
        // species 1 and 2 tie at 0.5: their equilibria lose hyperbolicity
        for e in eq.iter().filter(|e| matches!(e.surviving_index, 1 | 2)) {
            assert!(!e.hyperbolic);
        }
        for e in &eq {
            assert!(e.residual <= 1e-12);
        }
        let pred = predict_cep(&agg, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(pred.j_set, vec![0, 1, 2, 3]);
        assert_eq!(pred.winner, 3);
        assert_relative_eq!(pred.r_hat, 0.4);
    }

    #[test]
    fn washout_only_equilibrium() {
        let m = two_patch_model(
            1.0,
            vec![(vec![1.5, 1.5], Consumption::linear(vec![1.0, 1.0]))],
        );
        let agg = aggregate(&m);
        let eq = equilibria(&agg);
        assert_eq!(eq.len(), 1);
        assert!(eq[0].stable && eq[0].hyperbolic);
    }

    #[test]
    fn single_species_linear_closed_form() {
        let agg = AggregatedModel::from_parts(
            1.0,
            vec![1.0, 0.5],
            vec![AveragedUptake {
                amplitude: 1.0,
                shape: UptakeShape::Linear,
            }],
        )
        .unwrap();
        let eq = equilibria(&agg);
        let p1 = &eq[1];
        // 0 = 1 - r - r u with r = 0.5 gives u = 1
        assert_eq!(p1.point, vec![0.5, 1.0]);
        // trace -2, determinant 1/2
        let mut re: Vec<f64> = p1.eigenvalues.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        assert_relative_eq!(re[0], -1.0 - 0.5_f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(re[1], -1.0 + 0.5_f64.sqrt(), epsilon = 1e-12);
        assert!(p1.stable);
    }

    #[test]
    fn absent_species_are_not_in_j() {
        let agg = aggregate(&sec51());
        let pred = predict_cep(&agg, &[0.5, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(pred.j_set, vec![0]);
        assert_eq!(pred.winner, 0);
        assert_eq!(pred.limit, vec![1.0, 0.0, 0.0, 0.0]);
        // with only the tied pair present the minimizer is not unique
        let err = predict_cep(&agg, &[0.5, 1.0, 1.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::TiedRStar { a: 1, b: 2, .. }));
    }

    #[test]
    fn mixed_shapes_violate_assumption() {
        let m = two_patch_model(
            2.0,
            vec![
                (vec![0.2, 0.4], Consumption::linear(vec![1.0, 1.0])),
                (vec![0.3, 0.3], Consumption::monod(vec![1.0, 1.0], 1.0)),
            ],
        );
        let agg = aggregate(&m);
        assert_eq!(agg.cep_case, None);
        assert!(matches!(
            predict_cep(&agg, &[1.0, 1.0, 1.0]),
            Err(Error::CepAssumptionUnmet)
        ));
    }

    #[test]
    fn sec52_decomposition() {
        let model = sec52();
        let agg = aggregate(&model);
        let d = decompose_strength(&model, &agg).unwrap();
        assert!((d[0].local_break_even[0] - 0.6129).abs() < 5e-5);
        assert!((d[0].local_break_even[1] - 4.8571).abs() < 5e-5);
        assert!((d[0].mean_local - 2.7350).abs() < 1e-4);
        assert!((d[0].nonlinear - (-1.2057)).abs() < 1e-4);
        assert_eq!(d[0].heterogeneity, 0.0);
        assert_relative_eq!(d[1].local_break_even[0], 0.75, epsilon = 1e-14);
        assert_relative_eq!(d[1].local_break_even[1], 5.0, epsilon = 1e-13);
        // J = k [m~/(1-m~) - E(m/(1-m))]
        let mt = agg.mortality[2];
        let jensen = 0.25 * (mt / (1.0 - mt) - 0.5 * (3.0 + 20.0));
        assert_relative_eq!(d[1].nonlinear, jensen, epsilon = 1e-12);
        assert!((d[1].nonlinear - (-1.445)).abs() < 1e-3);
        assert_relative_eq!(d[1].mean_local, 2.875, epsilon = 1e-13);
        for s in &d {
            assert!(s.residual.abs() <= 1e-10);
            assert!(s.nonlinear <= 0.0);
        }
    }

    #[test]
    fn linear_constant_uptake_has_no_corrections() {
        let model = sec51();
        let agg = aggregate(&model);
        for s in decompose_strength(&model, &agg).unwrap() {
            assert!(s.nonlinear.abs() < 1e-15 && s.heterogeneity.abs() < 1e-15);
            assert_relative_eq!(s.r_star, s.mean_local, epsilon = 1e-15);
        }
    }

    #[test]
    fn infinite_local_break_even_reported() {
        let model = two_patch_model(
            5.0,
            vec![(vec![0.5, 1.5], Consumption::monod(vec![1.0, 2.0], 1.0))],
        );
        let agg = aggregate(&model);
        // local break-evens finite, but the averaged curve never reaches m(1) = 1.5
        let d = decompose_strength(&model, &agg).unwrap();
        assert!(d[0].mean_local.is_finite());
        assert_eq!(d[0].nonlinear, f64::NEG_INFINITY);
        assert!(d[0].residual.is_nan());
        let model = two_patch_model(
            5.0,
            vec![(vec![1.5, 0.5], Consumption::monod(vec![1.0, 1.0], 1.0))],
        );
        let agg = aggregate(&model);
        assert_eq!(
            decompose_strength(&model, &agg).unwrap_err(),
            Error::LocalBreakEvenInfinite {
                species: 1,
                site: 0
            }
        );
    }

    #[test]
    fn covariance_example() {
        let model = two_patch_model(
            1.0,
            vec![(vec![0.3, 0.3], Consumption::linear(vec![1.0, 3.0]))],
        );
        let agg = aggregate(&model);
        let rep = covariance_check(&model, &agg).unwrap();
        let r = &rep[0];
        assert_relative_eq!(r.local_break_even[0], 0.3, epsilon = 1e-15);
        assert_relative_eq!(r.local_break_even[1], 0.1, epsilon = 1e-15);
        assert_relative_eq!(r.mean_local, 0.2, epsilon = 1e-15);
        assert_relative_eq!(r.r_star, 0.15, epsilon = 1e-15);
        assert_relative_eq!(r.covariance, -0.05, epsilon = 1e-15);
        assert!(r.residual.abs() <= 1e-12);
    }

    #[test]
    fn covariance_requires_linear() {
        let model = sec52();
        let agg = aggregate(&model);
        assert_eq!(
            covariance_check(&model, &agg).unwrap_err(),
            Error::NotLinear { species: 1 }
        );
    }

    #[test]
    fn concentration_drives_break_even_to_target() {
        // species 1 better everywhere, yet min R_2* < max R_1*
        let r1 = [0.2, 0.5, 0.3];
        let r2 = [0.25, 0.7, 0.45];
        let c = concentrate_consumption(&r1, &r2, 1e3);
        assert!(c.reversal_possible);
        let w = DMatrix::from_row_slice(3, 3, &[0., 1., 0., 1., 0., 1., 0., 1., 0.]);
        let model = CompetitionModel::new(
            SpatialDomain::patches(3).unwrap(),
            build_patch_operator(&w, &[1.0; 3]).unwrap(),
            vec![1.0; 3],
            vec![1.0; 3],
            vec![
                Species::new(c.m_first.clone(), Consumption::linear(c.c_first.clone())),
                Species::new(c.m_second.clone(), Consumption::linear(c.c_second.clone())),
            ],
        )
        .unwrap();
        let agg = aggregate(&model);
        assert!((agg.r_star[1] - 0.5).abs() / 0.5 < 0.01);
        assert!((agg.r_star[2] - 0.25).abs() / 0.25 < 0.01);
        let rep = covariance_check(&model, &agg).unwrap();
        let cmp = compare_covariance(&rep[0], &rep[1]);
        assert!(cmp.a_locally_dominant && cmp.b_beats_a && cmp.covariance_inequality);
    }
}
