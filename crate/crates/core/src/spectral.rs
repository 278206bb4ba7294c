//! Eigenstructure of the consensus Laplacian.
//!
//! The zero eigenvalue is counted with `tol_zero = 1e-9 * max(1, ||L||_inf)`.
//! Kernels come from one SVD of `L`: right singular vectors with vanishing
//! singular values span `ker L`, left ones span `ker L^T`.

use nalgebra::{Complex, DMatrix, DVector, Schur, SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LaplacianMatrix;

#[derive(Debug, Clone)]
pub struct SpectralSummary {
    /// Sorted by real part, then imaginary part.
    pub eigenvalues: Vec<Complex<f64>>,
    pub zero_multiplicity: usize,
    /// Smallest real part among nonzero eigenvalues; `None` when `L = 0`.
    pub lambda2: Option<f64>,
    pub is_symmetric_case: bool,
    /// Basis of `ker L`, one vector per entry.
    pub kernel_right: Vec<Vec<f64>>,
    /// Basis of `ker L^T`.
    pub kernel_left: Vec<Vec<f64>>,
    pub tol_zero: f64,
    symmetric_basis: Option<SymmetricEigen<f64, nalgebra::Dyn>>,
}

/// JSON shape: eigenvalues as `[re, im]`, kernels as row-major arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<[f64; 2]>,
    pub zero_multiplicity: usize,
    pub lambda2: Option<f64>,
    pub is_symmetric_case: bool,
    pub kernel_right: Vec<Vec<f64>>,
    pub kernel_left: Vec<Vec<f64>>,
    pub tol_zero: f64,
}

impl SpectralSummary {
    pub fn report(&self) -> SpectrumReport {
        SpectrumReport {
            eigenvalues: self.eigenvalues.iter().map(|z| [z.re, z.im]).collect(),
            zero_multiplicity: self.zero_multiplicity,
            lambda2: self.lambda2,
            is_symmetric_case: self.is_symmetric_case,
            kernel_right: self.kernel_right.clone(),
            kernel_left: self.kernel_left.clone(),
            tol_zero: self.tol_zero,
        }
    }

    /// Real eigenpairs, only in the symmetric case.
    pub fn symmetric_eigen(&self) -> Option<&SymmetricEigen<f64, nalgebra::Dyn>> {
        self.symmetric_basis.as_ref()
    }
}

pub fn tol_zero(l: &LaplacianMatrix) -> f64 {
    1e-9 * l.norm_inf().max(1.0)
}

/// Eigenvalues of an arbitrary square matrix, sorted by real then imaginary part.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 1000 * n.max(10)).ok_or_else(|| {
        Error::EigenSolver {
            n,
            norm_inf: m.row_iter().map(|r| r.abs().sum()).fold(0.0, f64::max),
            min_row_sum: m.row_iter().map(|r| r.sum()).fold(f64::INFINITY, f64::min),
        }
    })?;
    let mut eig: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().copied().collect();
    sort_complex(&mut eig);
    Ok(eig)
}

fn sort_complex(v: &mut [Complex<f64>]) {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

pub fn spectrum(l: &LaplacianMatrix) -> Result<SpectralSummary> {
    let n = l.n();
    let tol = tol_zero(l);
    let symmetric = l.is_symmetric();

    let (eigs, symmetric_basis) = if symmetric {
        let se = SymmetricEigen::try_new(l.matrix().clone(), f64::EPSILON, 1000 * n.max(10))
            .ok_or_else(|| Error::EigenSolver {
                n,
                norm_inf: l.norm_inf(),
                min_row_sum: l.row_sums().into_iter().fold(f64::INFINITY, f64::min),
            })?;
        let mut eigs: Vec<Complex<f64>> = se.eigenvalues.iter().map(|&x| Complex::new(x, 0.0)).collect();
        sort_complex(&mut eigs);
        (eigs, Some(se))
    } else {
        (eigenvalues(l.matrix())?, None)
    };

    let zero_multiplicity = eigs.iter().filter(|z| z.norm() < tol).count();
    let lambda2 = eigs.iter().filter(|z| z.norm() >= tol).map(|z| z.re).reduce(f64::min);

    let (kernel_right, kernel_left) = match &symmetric_basis {
        Some(se) => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| se.eigenvalues[a].abs().total_cmp(&se.eigenvalues[b].abs()));
            let basis: Vec<Vec<f64>> = idx[..zero_multiplicity]
                .iter()
                .map(|&k| se.eigenvectors.column(k).iter().copied().collect())
                .collect();
            (basis.clone(), basis)
        }
        None => null_spaces(l.matrix(), zero_multiplicity),
    };

    Ok(SpectralSummary {
        eigenvalues: eigs,
        zero_multiplicity,
        lambda2,
        is_symmetric_case: symmetric,
        kernel_right,
        kernel_left,
        tol_zero: tol,
        symmetric_basis,
    })
}

/// Right and left null spaces of dimension `m` from the `m` smallest singular triplets.
fn null_spaces(m: &DMatrix<f64>, dim: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = m.nrows();
    let svd = SVD::new(m.clone(), true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let right = idx[..dim].iter().map(|&k| v_t.row(k).iter().copied().collect()).collect();
    let left = idx[..dim].iter().map(|&k| u.column(k).iter().copied().collect()).collect();
    (right, left)
}

/// Second-smallest eigenvalue of a symmetric Laplacian; zero iff disconnected.
pub fn algebraic_connectivity(l: &LaplacianMatrix) -> Result<f64> {
    if !l.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    if l.n() < 2 {
        return Err(Error::InvalidInput("algebraic connectivity needs at least 2 nodes".into()));
    }
    let s = spectrum(l)?;
    let lambda = s.eigenvalues[1].re;
    Ok(if lambda.abs() < s.tol_zero { 0.0 } else { lambda })
}

/// Every eigenvalue lies in some disc `B(sigma_i, sigma_i)`, up to `slack`.
pub fn gershgorin_contains(l: &LaplacianMatrix, eigenvalues: &[Complex<f64>], slack: f64) -> bool {
    let sig: Vec<f64> = l.matrix().diagonal().iter().copied().collect();
    eigenvalues
        .iter()
        .all(|z| sig.iter().any(|&s| (z - Complex::new(s, 0.0)).norm() <= s + slack))
}

/// Spectral projection of `s0` onto `ker L` along the range of `L`.
///
/// With right basis `R` and left basis `W`, the projector is
/// `R (W R)^-1 W`. For a single isolated block the result is constant.
pub fn predict_limit(summary: &SpectralSummary, s0: &[f64]) -> Result<Vec<f64>> {
    let m = summary.zero_multiplicity;
    let n = summary.eigenvalues.len();
    if s0.len() != n {
        return Err(Error::Dimension { expected: n, actual: s0.len() });
    }
    if m == 0 {
        return Ok(vec![0.0; n]);
    }
    let r = DMatrix::from_fn(n, m, |i, k| summary.kernel_right[k][i]);
    let w = DMatrix::from_fn(m, n, |k, i| summary.kernel_left[k][i]);
    let wr = &w * &r;
    let sv = SVD::new(wr.clone(), false, false).singular_values;
    let (smin, smax) = sv.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    if smin <= 1e-10 * smax.max(1.0) {
        return Err(Error::KernelSingular(smin));
    }
    let coeffs = wr
        .lu()
        .solve(&(&w * DVector::from_column_slice(s0)))
        .ok_or(Error::KernelSingular(smin))?;
    Ok((&r * coeffs).iter().copied().collect())
}

/// Convenience wrapper computing the spectrum first.
pub fn predict_limit_for(l: &LaplacianMatrix, s0: &[f64]) -> Result<Vec<f64>> {
    predict_limit(&spectrum(l)?, s0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::WeightedDigraph;
    use approx::assert_abs_diff_eq;

    fn lap(n: usize, edges: &[(usize, usize, f64)]) -> LaplacianMatrix {
        LaplacianMatrix::from_graph(&WeightedDigraph::new(n, edges.iter().copied()).unwrap()).unwrap()
    }

    fn undirected(n: usize, pairs: &[(usize, usize)]) -> LaplacianMatrix {
        let e: Vec<_> = pairs.iter().flat_map(|&(a, b)| [(a, b, 1.0), (b, a, 1.0)]).collect();
        lap(n, &e)
    }

    #[test]
    fn two_node_spectrum() {
        let s = spectrum(&undirected(2, &[(0, 1)])).unwrap();
        assert!(s.is_symmetric_case);
        assert_abs_diff_eq!(s.eigenvalues[0].re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.eigenvalues[1].re, 2.0, epsilon = 1e-12);
        assert_eq!(s.zero_multiplicity, 1);
        assert_abs_diff_eq!(s.lambda2.unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn fan_in_spectrum_reads_off_diagonal() {
        let s = spectrum(&lap(3, &[(2, 0, 1.0), (2, 1, 1.0)])).unwrap();
        assert!(!s.is_symmetric_case);
        assert_eq!(s.zero_multiplicity, 2);
        assert_abs_diff_eq!(s.eigenvalues[2].re, 2.0, epsilon = 1e-12);
        assert_eq!(s.kernel_right.len(), 2);
        assert_eq!(s.kernel_left.len(), 2);
    }

    #[test]
    fn ring_lambda2_matches_circulant_formula() {
        let n = 20;
        let pairs: Vec<_> = (0..n).flat_map(|i| [(i, (i + 1) % n), (i, (i + 2) % n)]).collect();
        let l2 = algebraic_connectivity(&undirected(n, &pairs)).unwrap();
        let pi = std::f64::consts::PI;
        let expected = (2.0 - 2.0 * (pi / 10.0).cos()) + (2.0 - 2.0 * (pi / 5.0).cos());
        assert_abs_diff_eq!(l2, expected, epsilon = 1e-10);
        assert_abs_diff_eq!(l2, 0.4798, epsilon = 1e-4);
    }

    #[test]
    fn algebraic_connectivity_cases() {
        let split = undirected(4, &[(0, 1), (2, 3)]);
        assert_eq!(algebraic_connectivity(&split).unwrap(), 0.0);
        let k5: Vec<_> = (0..5).flat_map(|i| (i + 1..5).map(move |j| (i, j))).collect();
        assert_abs_diff_eq!(algebraic_connectivity(&undirected(5, &k5)).unwrap(), 5.0, epsilon = 1e-10);
        let directed = lap(2, &[(0, 1, 1.0)]);
        assert!(matches!(algebraic_connectivity(&directed), Err(Error::NotSymmetric)));
    }

    #[test]
    fn limit_is_mean_on_symmetric_graph() {
        let l = undirected(4, &[(0, 1), (1, 2), (2, 3)]);
        let u = predict_limit_for(&l, &[1.0, 2.0, 3.0, 10.0]).unwrap();
        for x in u {
            assert_abs_diff_eq!(x, 4.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn fan_in_limit_averages_sources() {
        let l = lap(3, &[(2, 0, 1.0), (2, 1, 1.0)]);
        let u = predict_limit_for(&l, &[3.0, -1.0, 7.0]).unwrap();
        assert_abs_diff_eq!(u[0], 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(u[1], -1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(u[2], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn balanced_cycle_limit_is_mean() {
        let l = lap(3, &[(1, 0, 2.0), (2, 1, 2.0), (0, 2, 2.0)]);
        let u = predict_limit_for(&l, &[0.0, 1.0, 5.0]).unwrap();
        for x in u {
            assert_abs_diff_eq!(x, 2.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn gershgorin_check() {
        let l = lap(3, &[(1, 0, 2.0), (2, 1, 0.5), (0, 2, 1.0), (0, 1, 0.3)]);
        let s = spectrum(&l).unwrap();
        assert!(gershgorin_contains(&l, &s.eigenvalues, 1e-8));
        assert!(!gershgorin_contains(&l, &[Complex::new(-1.0, 0.0)], 1e-8));
    }

    #[test]
    fn report_serializes_pairs() {
        let s = spectrum(&undirected(2, &[(0, 1)])).unwrap();
        let json = serde_json::to_value(s.report()).unwrap();
        assert_eq!(json["eigenvalues"].as_array().unwrap().len(), 2);
        assert_eq!(json["eigenvalues"][1].as_array().unwrap().len(), 2);
    }
}
