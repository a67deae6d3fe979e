//! Determinant ratios without zero modes.
//!
//! The secular determinant `det(M + N E_λ(b))` vanishes exactly at the
//! eigenvalues. At `λ = 0` it plays the role of the Gel'fand–Yaglom
//! determinant, and the ratio of two operators sharing a metric is the ratio
//! of their secular determinants.

use alloc::string::String;
use alloc::vec::Vec;

use crate::linalg::CMatrix;
use crate::model::{BoundaryConditions, Problem, SolverSettings};
use crate::propagate::{fundamental_matrix, propagate_solution, FundamentalMatrix, SolutionPath};
use crate::{Error, Result, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RatioMethod {
    /// Quotient of secular determinants at `λ = 0`.
    Result1,
    /// Quotient of the last boundary row applied to normalized solutions.
    Result2,
    /// Zero mode of the first operator extracted.
    ZeroMode,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RatioResult {
    pub value: C64,
    /// Numerator: `det(M + N Y_1(b))`, or `-B ⟨y_1|y_1⟩` with a zero mode.
    pub det1: C64,
    /// Denominator `det(M + N Y_2(b))`.
    pub det2: C64,
    pub method: RatioMethod,
    pub warnings: Vec<String>,
}

/// Solution obeying the first `2r - 1` boundary conditions, normalized so
/// that the last residual entry is the secular determinant.
#[derive(Clone, Debug)]
pub struct NormalizedSolution {
    pub lambda: C64,
    /// `(u(a), v(a))`: column `2r` of `adj(M + N E_λ(b))`.
    pub coeffs: Vec<C64>,
    /// `M (u(a), v(a)) + N (u(b), v(b))`, ideally `(0, …, 0, det)`.
    pub residual: Vec<C64>,
    pub determinant: C64,
    pub path: SolutionPath,
}

pub const METRIC_MISMATCH_WARNING: &str =
    "metric mismatch: P1 and P2 differ, so the boundary determinants do not form a regularized determinant ratio";

/// `M + N E`.
pub fn secular_matrix(bc: &BoundaryConditions, e: &CMatrix) -> CMatrix {
    bc.m().add(&bc.n().matmul(e))
}

/// `det(M + N E_λ(b))`.
pub fn bc_determinant(bc: &BoundaryConditions, fm: &FundamentalMatrix) -> C64 {
    secular_matrix(bc, &fm.matrix()).det()
}

/// Guard for "this determinant is zero": `zero_mode_tol · (max row norm)^{2r}`.
pub fn zero_guard(secular: &CMatrix, zero_mode_tol: f64) -> f64 {
    zero_mode_tol * libm::pow(secular.max_row_norm(), secular.rows() as f64)
}

/// Shape checks shared by all two-operator computations; returns warnings.
pub(crate) fn check_pair(
    p1: &Problem,
    p2: &Problem,
    bc: &BoundaryConditions,
    settings: &SolverSettings,
) -> Result<Vec<String>> {
    if p1.r() != p2.r() || bc.r() != p1.r() {
        return Err(Error::Dimension(alloc::format!(
            "component counts differ: p1 r = {}, p2 r = {}, boundary r = {}",
            p1.r(),
            p2.r(),
            bc.r()
        )));
    }
    if p1.interval() != p2.interval() {
        return Err(Error::InvalidProblem("the two problems live on different intervals".into()));
    }
    let mut warnings = Vec::new();
    if !p1.same_metric(p2, settings.samples) {
        warnings.push(String::from(METRIC_MISMATCH_WARNING));
    }
    Ok(warnings)
}

fn check_single(p: &Problem, bc: &BoundaryConditions) -> Result<()> {
    if bc.r() != p.r() {
        return Err(Error::Dimension(alloc::format!(
            "boundary matrices are for r = {}, problem has r = {}",
            bc.r(),
            p.r()
        )));
    }
    Ok(())
}

/// `det L1 / det L2 = det(M + N Y_1(b)) / det(M + N Y_2(b))`.
pub fn ratio_no_zero_mode(
    p1: &Problem,
    p2: &Problem,
    bc: &BoundaryConditions,
    settings: &SolverSettings,
) -> Result<RatioResult> {
    let warnings = check_pair(p1, p2, bc, settings)?;
    let zero = C64::new(0.0, 0.0);
    let mut dets = [zero; 2];
    for (k, p) in [p1, p2].into_iter().enumerate() {
        let fm = fundamental_matrix(p, zero, settings)?;
        let a = secular_matrix(bc, &fm.matrix());
        let det = a.det();
        let guard = zero_guard(&a, settings.zero_mode_tol);
        if det.norm() <= guard {
            return Err(if k == 0 {
                Error::ZeroModeDetected {
                    det_abs: det.norm(),
                    guard,
                }
            } else {
                Error::ReferenceZeroMode
            });
        }
        dets[k] = det;
    }
    Ok(RatioResult {
        value: dets[0] / dets[1],
        det1: dets[0],
        det2: dets[1],
        method: RatioMethod::Result1,
        warnings,
    })
}

/// Solution at `λ` with coefficients from the adjugate of the secular
/// matrix, propagated to `b` with its norm.
pub fn normalized_solution(
    p: &Problem,
    bc: &BoundaryConditions,
    lambda: C64,
    settings: &SolverSettings,
) -> Result<NormalizedSolution> {
    check_single(p, bc)?;
    let fm = fundamental_matrix(p, lambda, settings)?;
    let a = secular_matrix(bc, &fm.matrix());
    normalized_from_secular(p, bc, lambda, &a, settings)
}

pub(crate) fn normalized_from_secular(
    p: &Problem,
    bc: &BoundaryConditions,
    lambda: C64,
    secular: &CMatrix,
    settings: &SolverSettings,
) -> Result<NormalizedSolution> {
    let n2 = 2 * p.r();
    let coeffs = secular.adjugate_column(n2 - 1);
    let path = propagate_solution(p, lambda, &coeffs, settings)?;
    let end = path.end_state();
    let residual: Vec<C64> = bc
        .m()
        .mul_vec(&coeffs)
        .iter()
        .zip(bc.n().mul_vec(&end))
        .map(|(x, y)| x + y)
        .collect();
    Ok(NormalizedSolution {
        lambda,
        coeffs,
        residual,
        determinant: secular.det(),
        path,
    })
}

/// Scalar problems: the last boundary row evaluated on each normalized
/// homogeneous solution, `m21 y(a) + m22 v(a) + n21 y(b) + n22 v(b)`.
pub fn ratio_via_bc_row(
    p1: &Problem,
    p2: &Problem,
    bc: &BoundaryConditions,
    settings: &SolverSettings,
) -> Result<RatioResult> {
    if p1.r() != 1 {
        return Err(Error::NotApplicable("the boundary-row formula is for scalar problems"));
    }
    let warnings = check_pair(p1, p2, bc, settings)?;
    let zero = C64::new(0.0, 0.0);
    let mut rows = [zero; 2];
    for (k, p) in [p1, p2].into_iter().enumerate() {
        let fm = fundamental_matrix(p, zero, settings)?;
        let a = secular_matrix(bc, &fm.matrix());
        let guard = zero_guard(&a, settings.zero_mode_tol);
        let det = a.det();
        if det.norm() <= guard {
            return Err(if k == 0 {
                Error::ZeroModeDetected {
                    det_abs: det.norm(),
                    guard,
                }
            } else {
                Error::ReferenceZeroMode
            });
        }
        let y = normalized_from_secular(p, bc, zero, &a, settings)?;
        let (m, n) = (bc.m(), bc.n());
        rows[k] = m[(1, 0)] * y.path.ua[0] + m[(1, 1)] * y.path.va[0] + n[(1, 0)] * y.path.ub[0] + n[(1, 1)] * y.path.vb[0];
    }
    Ok(RatioResult {
        value: rows[0] / rows[1],
        det1: rows[0],
        det2: rows[1],
        method: RatioMethod::Result2,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn s() -> SolverSettings {
        SolverSettings::default()
    }

    fn zero() -> C64 {
        C64::new(0.0, 0.0)
    }

    #[test]
    fn secular_determinants() {
        let d = BoundaryConditions::dirichlet(1);
        let p = Problem::scalar("1", "1", 0.0, 1.0).unwrap();
        let fm = fundamental_matrix(&p, zero(), &s()).unwrap();
        assert_relative_eq!(bc_determinant(&d, &fm).re, libm::sinh(1.0), max_relative = 1e-12);

        let per = BoundaryConditions::periodic(1);
        assert_relative_eq!(
            bc_determinant(&per, &fm).re,
            2.0 - 2.0 * libm::cosh(1.0),
            max_relative = 1e-12
        );
    }

    #[test]
    fn dirichlet_ratios() {
        let d = BoundaryConditions::dirichlet(1);
        let p1 = Problem::scalar("1", "1", 0.0, 1.0).unwrap();
        let p2 = Problem::scalar("1", "0", 0.0, 1.0).unwrap();
        let r1 = ratio_no_zero_mode(&p1, &p2, &d, &s()).unwrap();
        let r2 = ratio_via_bc_row(&p1, &p2, &d, &s()).unwrap();
        assert_relative_eq!(r1.value.re, libm::sinh(1.0), max_relative = 1e-12);
        assert_relative_eq!(r2.value.re, r1.value.re, max_relative = 1e-10);
        assert!(r1.warnings.is_empty());

        let same = ratio_no_zero_mode(&p1, &p1, &d, &s()).unwrap();
        assert_eq!(same.value, C64::new(1.0, 0.0));
    }

    #[test]
    fn zero_mode_is_refused() {
        let per = BoundaryConditions::periodic(1);
        let p1 = Problem::scalar("1", "0", 0.0, 1.0).unwrap();
        let p2 = Problem::scalar("1", "1", 0.0, 1.0).unwrap();
        assert!(matches!(
            ratio_no_zero_mode(&p1, &p2, &per, &s()),
            Err(Error::ZeroModeDetected { .. })
        ));
        assert_eq!(ratio_no_zero_mode(&p2, &p1, &per, &s()), Err(Error::ReferenceZeroMode));
    }

    #[test]
    fn normalized_solutions() {
        let p = Problem::scalar("1", "0", 0.0, 1.0).unwrap();
        let y = normalized_solution(&p, &BoundaryConditions::dirichlet(1), zero(), &s()).unwrap();
        assert_eq!(y.coeffs, alloc::vec![zero(), C64::new(1.0, 0.0)]);
        assert!(y.residual[0].norm() < 1e-12);
        assert!((y.residual[1] - 1.0).norm() < 1e-12);

        let y = normalized_solution(&p, &BoundaryConditions::periodic(1), zero(), &s()).unwrap();
        assert_eq!(y.coeffs, alloc::vec![C64::new(-1.0, 0.0), zero()]);
        assert!(y.residual.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn metric_mismatch_warns() {
        let d = BoundaryConditions::dirichlet(1);
        let p1 = Problem::scalar("1", "0", 0.0, 1.0).unwrap();
        let p2 = Problem::scalar("4", "0", 0.0, 1.0).unwrap();
        let r = ratio_no_zero_mode(&p1, &p2, &d, &s()).unwrap();
        assert_eq!(r.warnings.len(), 1);
        // det = E_12 = ∫ 1/P: 1 versus 1/4
        assert_relative_eq!(r.value.re, 4.0, max_relative = 1e-12);
    }
}
