//! Mean-centered PCA with a Gram-matrix route for the wide case.
//!
//! Feature matrices here are typically 800 rows by 65 536 columns. Building
//! the 65 536² covariance is out of the question, so when rows < columns the
//! eigenproblem is solved on the N×N Gram matrix `Yc Ycᵀ` and the principal
//! axes are recovered as `Ycᵀ u / ‖Ycᵀ u‖`.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SrgaError};

/// Rows per block when projecting, bounding the f64 working copy.
const PROJECT_BLOCK_ROWS: usize = 128;

/// Which data the projection basis is fitted on when two datasets are
/// compared.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PcaMode {
    /// Basis and mean come from the reference dataset and are applied
    /// unchanged to every test dataset.
    #[default]
    Ref,
    /// Basis is fitted on the union of reference and test.
    Joint,
    /// Each dataset is projected onto its own basis.
    PerDataset,
}

impl PcaMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            PcaMode::Ref => "ref",
            PcaMode::Joint => "joint",
            PcaMode::PerDataset => "per-dataset",
        }
    }
}

impl std::str::FromStr for PcaMode {
    type Err = SrgaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ref" => Ok(PcaMode::Ref),
            "joint" => Ok(PcaMode::Joint),
            "per-dataset" => Ok(PcaMode::PerDataset),
            other => Err(SrgaError::Parameter(format!(
                "unknown PCA mode '{other}' (expected ref, joint or per-dataset)"
            ))),
        }
    }
}

impl std::fmt::Display for PcaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which eigenproblem produced a projection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PcaRoute {
    Gram,
    Covariance,
}

/// A fitted projection onto the leading principal axes.
#[derive(Clone, Debug)]
pub struct PcaProjection {
    mean: Array1<f64>,
    /// Columns are orthonormal principal axes, descending explained variance.
    basis: Array2<f64>,
    /// Sample variance (N−1 denominator) along each axis.
    variances: Array1<f64>,
    fitted_on: String,
    route: PcaRoute,
}

/// Coordinates of a dataset in a projection basis.
#[derive(Clone, Debug)]
pub struct ProjectedFeatures {
    pub coords: Array2<f64>,
    pub projection_id: String,
}

impl ProjectedFeatures {
    /// The pooled scalar values of every coordinate.
    pub fn pooled(&self) -> &[f64] {
        self.coords
            .as_slice()
            .expect("projection output is standard-layout")
    }

    pub fn rows(&self) -> usize {
        self.coords.nrows()
    }
}

/// Fits a `dim`-component PCA to the rows of `y`.
///
/// Uses the Gram route when rows < columns, the covariance route otherwise.
/// Each axis is sign-normalized so its largest-magnitude entry is positive.
pub fn fit_pca<T>(y: ArrayView2<'_, T>, dim: usize, fitted_on: &str) -> Result<PcaProjection>
where
    T: Copy + Into<f64>,
{
    let (n, m) = y.dim();
    if n < 2 {
        return Err(SrgaError::Parameter(format!(
            "PCA needs at least 2 rows, got {n}"
        )));
    }
    if dim == 0 || dim > (n - 1).min(m) {
        return Err(SrgaError::Parameter(format!(
            "PCA dimension {dim} must be in 1..={} for a {n}x{m} matrix",
            (n - 1).min(m)
        )));
    }
    let route = if n < m {
        PcaRoute::Gram
    } else {
        PcaRoute::Covariance
    };
    fit_pca_with_route(y, dim, fitted_on, route)
}

/// Same as [`fit_pca`] but with the eigenproblem route forced. Exposed so
/// the two routes can be checked against each other.
pub fn fit_pca_with_route<T>(
    y: ArrayView2<'_, T>,
    dim: usize,
    fitted_on: &str,
    route: PcaRoute,
) -> Result<PcaProjection>
where
    T: Copy + Into<f64>,
{
    let (n, m) = y.dim();
    if n < 2 || dim == 0 || dim > (n - 1).min(m) {
        return Err(SrgaError::Parameter(format!(
            "PCA dimension {dim} invalid for a {n}x{m} matrix"
        )));
    }
    let mut centered: Array2<f64> = y.mapv(Into::into);
    let mean = centered
        .mean_axis(Axis(0))
        .expect("matrix has at least one row");
    centered -= &mean;

    let (eigvals, mut basis) = match route {
        PcaRoute::Gram => {
            let gram = centered.dot(&centered.t());
            let (vals, vecs) = sorted_eigen(&gram);
            check_rank(&vals, dim, n.max(m))?;
            let lead = vecs.slice(s![.., ..dim]);
            let mut axes = centered.t().dot(&lead);
            for mut col in axes.columns_mut() {
                let norm = col.dot(&col).sqrt();
                col /= norm;
            }
            (vals, axes)
        }
        PcaRoute::Covariance => {
            let scatter = centered.t().dot(&centered);
            let (vals, vecs) = sorted_eigen(&scatter);
            check_rank(&vals, dim, n.max(m))?;
            (vals, vecs.slice(s![.., ..dim]).to_owned())
        }
    };

    for mut col in basis.columns_mut() {
        let pivot = col
            .iter()
            .copied()
            .fold(0.0_f64, |best, v| if v.abs() > best.abs() { v } else { best });
        if pivot < 0.0 {
            col.mapv_inplace(|v| -v);
        }
    }

    let denom = (n - 1) as f64;
    let variances = Array1::from_iter(eigvals.iter().take(dim).map(|&l| l.max(0.0) / denom));
    Ok(PcaProjection {
        mean,
        basis,
        variances,
        fitted_on: fitted_on.to_string(),
        route,
    })
}

/// Eigen-decomposition of a symmetric matrix, eigenpairs sorted by
/// descending eigenvalue. Returns (values, vectors-as-columns).
fn sorted_eigen(sym: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let k = sym.nrows();
    let mat = DMatrix::from_fn(k, k, |i, j| sym[(i, j)]);
    let eig = SymmetricEigen::new(mat);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Array2::from_shape_fn((k, k), |(r, c)| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn check_rank(sorted_vals: &[f64], dim: usize, size: usize) -> Result<()> {
    let top = sorted_vals.first().copied().unwrap_or(0.0).max(0.0);
    let tol = top * size as f64 * f64::EPSILON * 16.0;
    let rank = sorted_vals.iter().filter(|&&v| v > tol).count();
    if top == 0.0 || rank < dim {
        return Err(SrgaError::Rank {
            requested: dim,
            achievable: if top == 0.0 { 0 } else { rank },
        });
    }
    Ok(())
}

impl PcaProjection {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Length of the input vectors this projection accepts.
    pub fn input_len(&self) -> usize {
        self.basis.nrows()
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub fn basis(&self) -> &Array2<f64> {
        &self.basis
    }

    /// Explained variance per retained axis.
    pub fn variances(&self) -> &Array1<f64> {
        &self.variances
    }

    pub fn fitted_on(&self) -> &str {
        &self.fitted_on
    }

    pub fn route(&self) -> PcaRoute {
        self.route
    }

    /// Maps rows of `y` to `(y − mean) · basis`.
    pub fn project<T>(&self, y: ArrayView2<'_, T>) -> Result<ProjectedFeatures>
    where
        T: Copy + Into<f64>,
    {
        let (n, m) = y.dim();
        if m != self.input_len() {
            return Err(SrgaError::Dimension(format!(
                "projection expects {} columns, got {m}",
                self.input_len()
            )));
        }
        let mut coords = Array2::<f64>::zeros((n, self.dim()));
        let mut start = 0;
        while start < n {
            let end = (start + PROJECT_BLOCK_ROWS).min(n);
            let mut block: Array2<f64> = y.slice(s![start..end, ..]).mapv(Into::into);
            block -= &self.mean;
            coords
                .slice_mut(s![start..end, ..])
                .assign(&block.dot(&self.basis));
            start = end;
        }
        Ok(ProjectedFeatures {
            coords,
            projection_id: self.fitted_on.clone(),
        })
    }
}
