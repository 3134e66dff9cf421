//! Spatial domains, migration operators and the slow/fast split of a state.
//!
//! A state is an `(N+1) x P` matrix: row 0 is the resource, rows `1..=N`
//! the species, columns the sites. Every species `i` migrates with its own
//! `P x P` matrix `A_i`; the block-diagonal collection is the operator `K`.
//! All operators built here have both row and column sums equal to zero, so
//! constants span the kernel and the weighted site average is conserved.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum DomainKind {
    PatchNetwork,
    Interval1D { length: f64, cells: usize },
}

/// Sites plus the averaging weights used for every spatial mean.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialDomain {
    weights: Vec<f64>,
    kind: DomainKind,
}

impl SpatialDomain {
    /// Patch network with uniform weights.
    pub fn patches(sites: usize) -> Result<Self> {
        if sites == 0 {
            return Err(Error::InvalidDomain(
                "a domain needs at least one site".into(),
            ));
        }
        Ok(Self {
            weights: vec![1.0 / sites as f64; sites],
            kind: DomainKind::PatchNetwork,
        })
    }

    /// Uniform finite-volume grid on `(0, length)`.
    pub fn interval(length: f64, cells: usize) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidDomain(format!(
                "interval length must be positive, got {length}"
            )));
        }
        if cells < 2 {
            return Err(Error::InvalidDomain(format!(
                "interval needs at least 2 cells, got {cells}"
            )));
        }
        Ok(Self {
            weights: vec![1.0 / cells as f64; cells],
            kind: DomainKind::Interval1D { length, cells },
        })
    }

    /// Arbitrary positive weights, renormalized to sum to one.
    pub fn with_weights(kind: DomainKind, weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDomain(
                "a domain needs at least one site".into(),
            ));
        }
        if let DomainKind::Interval1D { cells, .. } = kind {
            if cells != weights.len() {
                return Err(Error::DimensionMismatch {
                    expected: cells.to_string(),
                    got: weights.len().to_string(),
                    context: "interval weights".into(),
                });
            }
        }
        if let Some(j) = weights.iter().position(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidDomain(format!(
                "weight of site {j} must be positive, got {}",
                weights[j]
            )));
        }
        let total: f64 = weights.iter().sum();
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { weights, kind })
    }

    pub fn site_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> &DomainKind {
        &self.kind
    }

    pub fn is_uniform(&self) -> bool {
        let w0 = self.weights[0];
        self.weights.iter().all(|w| (w - w0).abs() <= 1e-15)
    }

    /// Weighted average `E(v)`.
    pub fn mean(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.weights.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Weighted average of `g(site)` over all sites.
    pub fn mean_by(&self, mut g: impl FnMut(usize) -> f64) -> f64 {
        self.weights.iter().enumerate().map(|(j, w)| w * g(j)).sum()
    }
}

/// Per-species spectral gaps and their minimum `mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralGap {
    pub per_species: Vec<f64>,
    pub overall: f64,
}

/// The collection `K = diag(A_0, ..., A_N)` of migration matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MigrationOperator {
    matrices: Vec<DMatrix<f64>>,
}

impl MigrationOperator {
    /// Validates the Metzler / zero-sum / irreducibility structure of each matrix.
    pub fn new(matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        let Some(first) = matrices.first() else {
            return Err(Error::InvalidOperator {
                species: 0,
                reason: "at least the resource matrix is required".into(),
            });
        };
        let p = first.nrows();
        for (i, a) in matrices.iter().enumerate() {
            validate_matrix(i, a, p)?;
        }
        Ok(Self { matrices })
    }

    /// Number of rows of the state (`N + 1`).
    pub fn species_count(&self) -> usize {
        self.matrices.len()
    }

    pub fn site_count(&self) -> usize {
        self.matrices[0].nrows()
    }

    pub fn matrix(&self, species: usize) -> &DMatrix<f64> {
        &self.matrices[species]
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    /// Multiplies every matrix by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            matrices: self.matrices.iter().map(|a| a * factor).collect(),
        }
    }

    /// `K * state`, row `i` mapped by `A_i`.
    pub fn apply(&self, state: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_state(state)?;
        let mut out = DMatrix::zeros(state.nrows(), state.ncols());
        self.apply_into(state, 1.0, &mut out);
        Ok(out)
    }

    /// `out += scale * K * state` without dimension checks.
    pub(crate) fn apply_into(&self, state: &DMatrix<f64>, scale: f64, out: &mut DMatrix<f64>) {
        let p = state.ncols();
        for (i, a) in self.matrices.iter().enumerate() {
            for j in 0..p {
                let mut acc = 0.0;
                for k in 0..p {
                    acc += a[(j, k)] * state[(i, k)];
                }
                out[(i, j)] += scale * acc;
            }
        }
    }

    /// Block-diagonal matrix of size `(N+1)P`, species-major ordering.
    pub fn assembled(&self) -> DMatrix<f64> {
        let p = self.site_count();
        let n = self.species_count() * p;
        let mut k = DMatrix::zeros(n, n);
        for (i, a) in self.matrices.iter().enumerate() {
            k.view_mut((i * p, i * p), (p, p)).copy_from(a);
        }
        k
    }

    /// `gap_i = -max{Re(lambda) : lambda in spec(A_i) minus the zero eigenvalue}`.
    ///
    /// A single-site domain has no fast subspace; its gap is reported as infinity.
    pub fn spectral_gaps(&self) -> SpectralGap {
        let per_species: Vec<f64> = self.matrices.iter().map(matrix_gap).collect();
        let overall = per_species.iter().cloned().fold(f64::INFINITY, f64::min);
        SpectralGap {
            per_species,
            overall,
        }
    }

    /// Checks that the weighted mean of `K * v` vanishes, i.e. `w^T A_i = 0`.
    pub fn check_conservation(&self, domain: &SpatialDomain) -> Result<()> {
        if domain.site_count() != self.site_count() {
            return Err(Error::DimensionMismatch {
                expected: domain.site_count().to_string(),
                got: self.site_count().to_string(),
                context: "operator sites vs domain sites".into(),
            });
        }
        let w = domain.weights();
        for (i, a) in self.matrices.iter().enumerate() {
            let scale = a.amax().max(1.0);
            for k in 0..a.ncols() {
                let s: f64 = (0..a.nrows()).map(|j| w[j] * a[(j, k)]).sum();
                if s.abs() > SUM_TOL * scale {
                    return Err(Error::InvalidOperator {
                        species: i,
                        reason: format!(
                            "weighted column {k} sums to {s}; the domain weights are not conserved"
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    fn check_state(&self, state: &DMatrix<f64>) -> Result<()> {
        if state.nrows() != self.species_count() || state.ncols() != self.site_count() {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.species_count(), self.site_count()),
                got: format!("{}x{}", state.nrows(), state.ncols()),
                context: "state vs migration operator".into(),
            });
        }
        Ok(())
    }
}

fn validate_matrix(species: usize, a: &DMatrix<f64>, p: usize) -> Result<()> {
    let bad = |reason: String| Error::InvalidOperator { species, reason };
    if a.nrows() != p || a.ncols() != p {
        return Err(bad(format!(
            "expected a {p}x{p} matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(bad("non-finite entry".into()));
    }
    let scale = a.amax().max(1.0);
    for j in 0..p {
        for k in 0..p {
            if j != k && a[(j, k)] < 0.0 {
                return Err(bad(format!("negative off-diagonal entry at ({j}, {k})")));
            }
        }
        let col: f64 = a.column(j).sum();
        let row: f64 = a.row(j).sum();
        if col.abs() > SUM_TOL * scale * p as f64 {
            return Err(bad(format!("column {j} sums to {col}, expected 0")));
        }
        if row.abs() > SUM_TOL * scale * p as f64 {
            return Err(bad(format!("row {j} sums to {row}, expected 0")));
        }
    }
    if let Some(site) = unreachable_site(p, |j, k| a[(j, k)] > 0.0) {
        return Err(bad(format!("reducible: site {site} is not reachable")));
    }
    Ok(())
}

/// First site not strongly connected to site 0 in the directed graph `edge(j, k)`.
fn unreachable_site(p: usize, edge: impl Fn(usize, usize) -> bool) -> Option<usize> {
    for forward in [true, false] {
        let mut seen = vec![false; p];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(j) = stack.pop() {
            #[allow(clippy::needless_range_loop)]
            for k in 0..p {
                let linked = if forward { edge(j, k) } else { edge(k, j) };
                if k != j && linked && !seen[k] {
                    seen[k] = true;
                    stack.push(k);
                }
            }
        }
        if let Some(site) = seen.iter().position(|s| !s) {
            return Some(site);
        }
    }
    None
}

fn matrix_gap(a: &DMatrix<f64>) -> f64 {
    if a.nrows() < 2 {
        return f64::INFINITY;
    }
    let mut re: Vec<f64> = if is_symmetric(a) {
        a.clone().symmetric_eigenvalues().iter().copied().collect()
    } else {
        a.clone()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.re)
            .collect()
    };
    re.sort_by(|x, y| y.total_cmp(x));
    // re[0] is the simple zero eigenvalue
    -re[1]
}

fn is_symmetric(a: &DMatrix<f64>) -> bool {
    let scale = a.amax().max(1.0);
    (0..a.nrows()).all(|j| (0..j).all(|k| (a[(j, k)] - a[(k, j)]).abs() <= 1e-14 * scale))
}

/// Graph operator `a_i * (W - diag(row sums of W))` for each diffusivity `a_i`.
pub fn build_patch_operator(
    edge_weights: &DMatrix<f64>,
    diffusivities: &[f64],
) -> Result<MigrationOperator> {
    let p = edge_weights.nrows();
    if edge_weights.ncols() != p || p == 0 {
        return Err(Error::DimensionMismatch {
            expected: "square non-empty matrix".into(),
            got: format!("{}x{}", edge_weights.nrows(), edge_weights.ncols()),
            context: "edge weights".into(),
        });
    }
    for j in 0..p {
        for k in 0..p {
            let w = edge_weights[(j, k)];
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidDomain(format!(
                    "edge weight ({j}, {k}) must be a nonnegative number, got {w}"
                )));
            }
            if (w - edge_weights[(k, j)]).abs() > 1e-14 * w.abs().max(1.0) {
                return Err(Error::NonSymmetric { row: j, col: k });
            }
        }
        if edge_weights[(j, j)] != 0.0 {
            return Err(Error::InvalidDomain(format!(
                "edge weight diagonal must be zero (site {j})"
            )));
        }
    }
    if let Some(site) = unreachable_site(p, |j, k| edge_weights[(j, k)] > 0.0) {
        return Err(Error::DisconnectedGraph { site });
    }
    if diffusivities.is_empty() {
        return Err(Error::InvalidOperator {
            species: 0,
            reason: "no diffusivities given".into(),
        });
    }
    let mut laplacian = edge_weights.clone();
    for j in 0..p {
        laplacian[(j, j)] = -edge_weights.row(j).sum();
    }
    let matrices = diffusivities
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            if !(a > 0.0) || !a.is_finite() {
                Err(Error::NonPositiveDiffusivity {
                    value: a,
                    context: format!("species {i}"),
                })
            } else {
                Ok(&laplacian * a)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    MigrationOperator::new(matrices)
}

/// Finite-volume `d/dx(a(x) d/dx)` with zero-flux ends on a uniform grid.
///
/// Interior face `k` sits at `x = k h`, `h = length / cells`; the flux
/// coefficient between cells `k-1` and `k` is `a(x_k) / h^2`.
pub fn interval_matrix(length: f64, cells: usize, a: impl Fn(f64) -> f64) -> Result<DMatrix<f64>> {
    if cells < 2 {
        return Err(Error::InvalidDomain(format!(
            "interval needs at least 2 cells, got {cells}"
        )));
    }
    if !(length > 0.0) || !length.is_finite() {
        return Err(Error::InvalidDomain(format!(
            "interval length must be positive, got {length}"
        )));
    }
    let h = length / cells as f64;
    let mut m = DMatrix::zeros(cells, cells);
    for k in 1..cells {
        let x = k as f64 * h;
        let ak = a(x);
        if !(ak > 0.0) || !ak.is_finite() {
            return Err(Error::NonPositiveDiffusivity {
                value: ak,
                context: format!("face x = {x}"),
            });
        }
        let c = ak / (h * h);
        m[(k - 1, k)] += c;
        m[(k, k - 1)] += c;
        m[(k - 1, k - 1)] -= c;
        m[(k, k)] -= c;
    }
    Ok(m)
}

/// One interval matrix per species; `a(species, x)` gives the face diffusivity.
pub fn build_interval_operator(
    length: f64,
    cells: usize,
    species: usize,
    a: impl Fn(usize, f64) -> f64,
) -> Result<MigrationOperator> {
    let matrices = (0..species)
        .map(|i| interval_matrix(length, cells, |x| a(i, x)))
        .collect::<Result<Vec<_>>>()?;
    MigrationOperator::new(matrices)
}

/// Slow (mean) and fast (zero-mean fluctuation) parts of a state.
#[derive(Debug, Clone, PartialEq)]
pub struct SlowFastSplit {
    pub slow: DVector<f64>,
    pub fast: DMatrix<f64>,
}

impl SlowFastSplit {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut w = self.fast.clone();
        for (i, mut row) in w.row_iter_mut().enumerate() {
            row.add_scalar_mut(self.slow[i]);
        }
        w
    }
}

fn check_domain(state: &DMatrix<f64>, domain: &SpatialDomain) -> Result<()> {
    if state.ncols() != domain.site_count() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} sites", domain.site_count()),
            got: format!("{} columns", state.ncols()),
            context: "state vs domain".into(),
        });
    }
    Ok(())
}

/// Weighted row averages.
pub fn project_slow(state: &DMatrix<f64>, domain: &SpatialDomain) -> Result<DVector<f64>> {
    check_domain(state, domain)?;
    Ok(slow_unchecked(state, domain.weights()))
}

pub(crate) fn slow_unchecked(state: &DMatrix<f64>, weights: &[f64]) -> DVector<f64> {
    DVector::from_iterator(
        state.nrows(),
        state
            .row_iter()
            .map(|row| row.iter().zip(weights).map(|(v, w)| v * w).sum::<f64>()),
    )
}

/// `state` minus the broadcast of its row averages.
pub fn project_fast(state: &DMatrix<f64>, domain: &SpatialDomain) -> Result<DMatrix<f64>> {
    Ok(split(state, domain)?.fast)
}

pub fn split(state: &DMatrix<f64>, domain: &SpatialDomain) -> Result<SlowFastSplit> {
    let slow = project_slow(state, domain)?;
    let mut fast = state.clone();
    for (i, mut row) in fast.row_iter_mut().enumerate() {
        row.add_scalar_mut(-slow[i]);
    }
    Ok(SlowFastSplit { slow, fast })
}

/// `max |fast entry|`, the sup norm of the fluctuation.
pub(crate) fn fast_sup_norm(state: &DMatrix<f64>, slow: &DVector<f64>) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..state.nrows() {
        for j in 0..state.ncols() {
            m = m.max((state[(i, j)] - slow[i]).abs());
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_patch() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])
    }

    #[test]
    fn two_patch_operator_matches_reference_matrix() {
        let op = build_patch_operator(&two_patch(), &[1.0]).unwrap();
        assert_eq!(
            op.matrix(0),
            &DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0])
        );
        assert_relative_eq!(op.spectral_gaps().overall, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_diffusivity_rejected() {
        let err = build_patch_operator(&two_patch(), &[0.0]).unwrap_err();
        assert!(matches!(err, Error::NonPositiveDiffusivity { .. }));
    }

    #[test]
    fn path_graph_spectrum() {
        let w = DMatrix::from_row_slice(3, 3, &[0., 1., 0., 1., 0., 1., 0., 1., 0.]);
        let op = build_patch_operator(&w, &[1.0]).unwrap();
        let mut ev: Vec<f64> = op
            .matrix(0)
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        assert_relative_eq!(ev[0], -3.0, epsilon = 1e-12);
        assert_relative_eq!(ev[1], -1.0, epsilon = 1e-12);
        assert_relative_eq!(ev[2], 0.0, epsilon = 1e-12);
        assert_relative_eq!(op.spectral_gaps().overall, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn disconnected_and_asymmetric_graphs_rejected() {
        let w = DMatrix::from_row_slice(3, 3, &[0., 1., 0., 1., 0., 0., 0., 0., 0.]);
        assert!(matches!(
            build_patch_operator(&w, &[1.0]),
            Err(Error::DisconnectedGraph { site: 2 })
        ));
        let w = DMatrix::from_row_slice(2, 2, &[0., 1., 2., 0.]);
        assert!(matches!(
            build_patch_operator(&w, &[1.0]),
            Err(Error::NonSymmetric { .. })
        ));
    }

    #[test]
    fn gap_scales_linearly_and_takes_species_minimum() {
        let op = build_patch_operator(&two_patch(), &[1.0, 3.0]).unwrap();
        let gaps = op.spectral_gaps();
        assert_relative_eq!(gaps.per_species[1], 6.0, epsilon = 1e-13);
        assert_relative_eq!(gaps.overall, 2.0, epsilon = 1e-13);
        let scaled = op.scaled(2.5).spectral_gaps();
        assert_relative_eq!(scaled.overall, 5.0, epsilon = 1e-13);
    }

    #[test]
    fn nonsymmetric_doubly_balanced_gap() {
        // directed 3-cycle: row and column sums vanish, eigenvalues 0, -3/2 +- i sqrt(3)/2
        let a = DMatrix::from_row_slice(3, 3, &[-1., 1., 0., 0., -1., 1., 1., 0., -1.]);
        let op = MigrationOperator::new(vec![a]).unwrap();
        assert_relative_eq!(op.spectral_gaps().overall, 1.5, epsilon = 1e-12);
    }

    #[test]
    fn invalid_matrices_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[-1., 1., 2., -2.]);
        assert!(MigrationOperator::new(vec![a]).is_err());
        let a = DMatrix::from_row_slice(2, 2, &[0., 0., 0., 0.]);
        assert!(MigrationOperator::new(vec![a]).is_err());
        let a = DMatrix::from_row_slice(2, 2, &[1., -1., -1., 1.]);
        assert!(MigrationOperator::new(vec![a]).is_err());
    }

    #[test]
    fn two_cell_interval_is_scaled_two_patch() {
        let m = interval_matrix(1.0, 2, |_| 1.0).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[-4.0, 4.0, 4.0, -4.0]));
    }

    #[test]
    fn interval_kernel_is_constants() {
        for cells in [2, 5, 17, 64] {
            let m = interval_matrix(2.0, cells, |x| 1.0 + x * x).unwrap();
            let ones = DVector::from_element(cells, 1.0);
            assert!((&m * ones).amax() <= 1e-13 * m.amax().max(1.0));
        }
        assert!(matches!(
            interval_matrix(1.0, 4, |x| x - 0.5),
            Err(Error::NonPositiveDiffusivity { .. })
        ));
    }

    #[test]
    fn interval_gap_approaches_continuum() {
        let op = build_interval_operator(1.0, 32, 1, |_, _| 1.0).unwrap();
        let gap = op.spectral_gaps().overall;
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((gap - pi2).abs() / pi2 < 0.05, "gap {gap}");
        assert!(gap < pi2);
    }

    #[test]
    fn projections_on_simple_rows() {
        let dom = SpatialDomain::patches(2).unwrap();
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 4.0, 4.0]);
        let sf = split(&s, &dom).unwrap();
        assert_eq!(sf.slow.as_slice(), &[2.0, 4.0]);
        assert_eq!(
            sf.fast,
            DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, 0.0])
        );
        assert_eq!(sf.reconstruct(), s);
        let bad = DMatrix::zeros(2, 3);
        assert!(matches!(
            project_slow(&bad, &dom),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn nonuniform_weights_are_normalized() {
        let dom = SpatialDomain::with_weights(DomainKind::PatchNetwork, vec![1.0, 3.0]).unwrap();
        assert_eq!(dom.weights(), &[0.25, 0.75]);
        assert!(!dom.is_uniform());
        assert!(SpatialDomain::with_weights(DomainKind::PatchNetwork, vec![1.0, 0.0]).is_err());
    }
}
