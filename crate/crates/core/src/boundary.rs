//! Boundary-condition classification and self-adjointness.
//!
//! Conditions are *separated* when `det M = det N = 0` (each condition lives
//! at one endpoint after row operations) and *non-separated* when `N` is
//! invertible. Self-adjointness is decided from the boundary form
//!
//! ```text
//! ⟨Lf|g⟩ - ⟨f|Lg⟩ = [f^H v_g - v_f^H g]_a^b
//! ```
//!
//! which must vanish on the `2r`-dimensional kernel of `[M | N]`.

use alloc::vec::Vec;

use crate::linalg::CMatrix;
use crate::model::BoundaryConditions;
use crate::{Error, Result, C64};

/// Relative tolerance of the self-adjointness residuals.
pub const SELF_ADJOINT_TOL: f64 = 1e-10;
/// `|det| < DET_TOL · (max row norm)^{2r}` counts as singular.
pub const DET_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BcKind {
    Separated,
    NonSeparated,
}

/// Numbers behind the classification and self-adjointness verdicts.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BcDiagnostics {
    pub det_m_abs: f64,
    pub det_n_abs: f64,
    /// Threshold the two determinants were compared against.
    pub det_threshold: f64,
    /// Residual of the test that decided `self_adjoint`.
    pub self_adjoint_residual: f64,
    /// `max |K^H Ĵ K|` over an orthonormal basis `K` of `ker [M | N]`.
    pub lagrangian_residual: f64,
    /// For `r > 1` non-separated conditions: residual of the entrywise test
    /// `N^{-1} M = R e^{iα}`, `det R = 1`. Only a heuristic extension of the
    /// scalar criterion; the verdict comes from the boundary form.
    pub entrywise_residual: Option<f64>,
    pub heuristic_extension: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BcClassification {
    pub kind: BcKind,
    /// Canonical `(A, B, C, D)` of `A u(a) + B v(a) = 0`, `C u(b) + D v(b) = 0`
    /// for scalar separated conditions.
    pub robin: Option<[C64; 4]>,
    /// Filled by [`check_self_adjoint`]; `false` straight out of [`classify`].
    pub self_adjoint: bool,
    /// Phase `α ∈ [0, π)` of `N^{-1} M = R e^{iα}` for non-separated
    /// conditions.
    pub phase_alpha: Option<f64>,
    pub diagnostics: BcDiagnostics,
}

fn det_threshold(bc: &BoundaryConditions) -> f64 {
    let scale = bc.stacked().max_row_norm();
    DET_TOL * libm::pow(scale, bc.m().rows() as f64)
}

/// Separated or non-separated; errors for the remaining class
/// (`det N = 0`, `det M ≠ 0`).
pub fn classify(bc: &BoundaryConditions) -> Result<BcClassification> {
    let det_m_abs = bc.m().det().norm();
    let det_n_abs = bc.n().det().norm();
    let det_threshold = det_threshold(bc);
    let kind = if det_n_abs >= det_threshold {
        BcKind::NonSeparated
    } else if det_m_abs < det_threshold {
        BcKind::Separated
    } else {
        return Err(Error::UnsupportedBoundary);
    };
    let robin = if kind == BcKind::Separated && bc.r() == 1 {
        Some(canonical_robin(bc)?.into())
    } else {
        None
    };
    Ok(BcClassification {
        kind,
        robin,
        self_adjoint: false,
        phase_alpha: None,
        diagnostics: BcDiagnostics {
            det_m_abs,
            det_n_abs,
            det_threshold,
            ..Default::default()
        },
    })
}

/// Scales `v` so its largest-magnitude entry is exactly 1.
fn normalize_max(v: &mut [C64]) {
    let (idx, _) = v
        .iter()
        .enumerate()
        .fold((0, -1.0), |b, (i, z)| if z.norm() > b.1 { (i, z.norm()) } else { b });
    let pivot = v[idx];
    if pivot.norm() > 0.0 {
        for z in v.iter_mut() {
            *z /= pivot;
        }
        v[idx] = C64::new(1.0, 0.0);
    }
}

fn rank(m: &CMatrix) -> usize {
    let s = m.singular_values();
    let smax = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&x| x > 1e-12 * smax && x > 0.0).count()
}

/// `(A, B, C, D)` of scalar separated conditions: the single nontrivial row
/// of `M` and of `N`, each scaled so its largest-magnitude entry is 1.
pub fn canonical_robin(bc: &BoundaryConditions) -> Result<(C64, C64, C64, C64)> {
    if bc.r() != 1 {
        return Err(Error::NotApplicable("Robin form needs a scalar problem"));
    }
    let pick = |m: &CMatrix| -> Result<[C64; 2]> {
        if rank(m) != 1 {
            return Err(Error::NotApplicable(
                "Robin form needs M and N of rank exactly one",
            ));
        }
        let row = if m.row(0).iter().map(|z| z.norm_sqr()).sum::<f64>()
            >= m.row(1).iter().map(|z| z.norm_sqr()).sum::<f64>()
        {
            0
        } else {
            1
        };
        let mut v = [m[(row, 0)], m[(row, 1)]];
        normalize_max(&mut v);
        Ok(v)
    };
    let [a, b] = pick(bc.m())?;
    let [c, d] = pick(bc.n())?;
    Ok((a, b, c, d))
}

/// Row-equivalent form of separated conditions: the first `r` rows involve
/// only `x = a`, the last `r` only `x = b`, each row scaled so its
/// largest-magnitude entry is 1. For `r = 1` this is the Robin form.
pub fn separated_canonical(bc: &BoundaryConditions) -> Result<BoundaryConditions> {
    let r = bc.r();
    let n2 = 2 * r;
    let stacked = bc.stacked();
    // left null vectors of N give the rows free of x = b data, and vice versa
    let left_null = |x: &CMatrix| x.conj_transpose().kernel(1e-12);
    let kn = left_null(bc.n());
    let km = left_null(bc.m());
    if kn.cols() != r || km.cols() != r {
        return Err(Error::NotApplicable(
            "separated form needs r conditions at each endpoint",
        ));
    }
    let mut rows: Vec<Vec<C64>> = Vec::with_capacity(n2);
    for kernel in [&kn, &km] {
        for j in 0..r {
            let l: Vec<C64> = kernel.column(j).iter().map(|z| z.conj()).collect();
            let mut row: Vec<C64> = (0..2 * n2).map(|c| (0..n2).map(|i| l[i] * stacked[(i, c)]).sum()).collect();
            normalize_max(&mut row);
            rows.push(row);
        }
    }
    let mut m = CMatrix::zeros(n2, n2);
    let mut n = CMatrix::zeros(n2, n2);
    for (i, row) in rows.iter().enumerate() {
        for j in 0..n2 {
            // exact zeros where the other endpoint dropped out
            m[(i, j)] = if i < r { row[j] } else { C64::new(0.0, 0.0) };
            n[(i, j)] = if i < r { C64::new(0.0, 0.0) } else { row[n2 + j] };
        }
    }
    BoundaryConditions::new(m, n)
}

/// Orthonormal basis of the admissible boundary data `ker [M | N]`, ordered
/// `(u(a), v(a), u(b), v(b))`.
fn admissible_data(bc: &BoundaryConditions) -> CMatrix {
    bc.stacked().kernel(1e-12)
}

/// `max |K^H Ĵ K|` with `Ĵ = diag(-J, J)`, `J = [[0, I], [-I, 0]]`.
pub fn lagrangian_residual(bc: &BoundaryConditions) -> f64 {
    let r = bc.r();
    let k = admissible_data(bc);
    let mut jk = CMatrix::zeros(4 * r, k.cols());
    for c in 0..k.cols() {
        for i in 0..r {
            // -J on the x = a block, +J on the x = b block
            jk[(i, c)] = -k[(r + i, c)];
            jk[(r + i, c)] = k[(i, c)];
            jk[(2 * r + i, c)] = k[(3 * r + i, c)];
            jk[(3 * r + i, c)] = -k[(2 * r + i, c)];
        }
    }
    k.conj_transpose().matmul(&jk).max_abs()
}

/// `α ∈ [0, π)` and the residual of `D = R e^{iα}`, `det R = 1` for
/// `D = N^{-1} M`.
fn phase_test(bc: &BoundaryConditions) -> Option<(f64, f64)> {
    let d = bc.n().inverse()?.matmul(bc.m());
    let big = d
        .as_slice()
        .iter()
        .fold(C64::new(0.0, 0.0), |b, z| if z.norm() > b.norm() { *z } else { b });
    let scale = big.norm();
    if scale == 0.0 {
        return Some((0.0, f64::INFINITY));
    }
    let pi = core::f64::consts::PI;
    let mut alpha = big.arg();
    if alpha < 0.0 {
        alpha += pi;
    }
    if alpha >= pi - 1e-15 {
        alpha = 0.0;
    }
    let rot = d.scale(C64::from_polar(1.0, -alpha));
    let imag = rot.as_slice().iter().fold(0.0, |m: f64, z| m.max(z.im.abs())) / scale;
    let det_res = (rot.det() - 1.0).norm();
    Some((alpha, imag.max(det_res)))
}

/// Classification plus self-adjointness verdict.
///
/// * scalar separated: `A/B` and `C/D` real (`Im(A B̄) = Im(C D̄) = 0`);
/// * scalar non-separated: `N^{-1} M = R e^{iα}` with `R` real, `det R = 1`;
/// * systems: the boundary form vanishes on `ker [M | N]`. For non-separated
///   systems the entrywise phase test is reported as a flagged heuristic.
pub fn check_self_adjoint(bc: &BoundaryConditions) -> Result<BcClassification> {
    let mut cls = classify(bc)?;
    let lag = lagrangian_residual(bc);
    cls.diagnostics.lagrangian_residual = lag;
    match (cls.kind, bc.r()) {
        (BcKind::Separated, 1) => {
            let [a, b, c, d] = cls.robin.expect("scalar separated conditions have a Robin form");
            let res = (a * b.conj()).im.abs().max((c * d.conj()).im.abs());
            cls.diagnostics.self_adjoint_residual = res;
            cls.self_adjoint = res <= SELF_ADJOINT_TOL;
        }
        (BcKind::NonSeparated, 1) => {
            let (alpha, res) = phase_test(bc).ok_or(Error::UnsupportedBoundary)?;
            cls.phase_alpha = Some(alpha);
            cls.diagnostics.self_adjoint_residual = res;
            cls.self_adjoint = res <= SELF_ADJOINT_TOL;
        }
        (BcKind::NonSeparated, _) => {
            let (alpha, res) = phase_test(bc).ok_or(Error::UnsupportedBoundary)?;
            cls.phase_alpha = Some(alpha);
            cls.diagnostics.entrywise_residual = Some(res);
            cls.diagnostics.heuristic_extension = true;
            cls.diagnostics.self_adjoint_residual = lag;
            cls.self_adjoint = lag <= SELF_ADJOINT_TOL;
        }
        (BcKind::Separated, _) => {
            cls.diagnostics.self_adjoint_residual = lag;
            cls.self_adjoint = lag <= SELF_ADJOINT_TOL;
        }
    }
    Ok(cls)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn bc(m: &[f64], n: &[f64]) -> BoundaryConditions {
        BoundaryConditions::new(CMatrix::from_real(2, 2, m).unwrap(), CMatrix::from_real(2, 2, n).unwrap()).unwrap()
    }

    #[test]
    fn classes() {
        assert_eq!(classify(&BoundaryConditions::dirichlet(1)).unwrap().kind, BcKind::Separated);
        assert_eq!(classify(&BoundaryConditions::periodic(1)).unwrap().kind, BcKind::NonSeparated);
        let bad = bc(&[1.0, 0.0, 0.0, 1.0], &[0.0; 4]);
        assert_eq!(classify(&bad), Err(Error::UnsupportedBoundary));
    }

    #[test]
    fn robin_reduction() {
        let d = canonical_robin(&BoundaryConditions::dirichlet(1)).unwrap();
        assert_eq!(d, (c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)));
        let n = canonical_robin(&BoundaryConditions::neumann(1)).unwrap();
        assert_eq!(n, (c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)));
        let g = canonical_robin(&bc(&[2.0, 1.0, 4.0, 2.0], &[0.0, 0.0, 3.0, 0.0])).unwrap();
        assert_eq!(g, (c(1.0, 0.0), c(0.5, 0.0), c(1.0, 0.0), c(0.0, 0.0)));
    }

    #[test]
    fn separated_canonical_undoes_row_mixing() {
        let base = BoundaryConditions::robin(c(1.0, 0.0), c(2.0, 0.0), c(-0.5, 0.0), c(1.0, 0.0)).unwrap();
        let s = CMatrix::from_vec(2, 2, alloc::vec![c(1.0, 1.0), c(2.0, 0.0), c(0.0, -3.0), c(1.0, 0.0)]).unwrap();
        let mixed = base.left_multiplied(&s).unwrap();
        let canon = separated_canonical(&mixed).unwrap();
        assert!(canon.m().sub(&CMatrix::from_real(2, 2, &[0.5, 1.0, 0.0, 0.0]).unwrap()).max_abs() < 1e-12);
        assert!(canon.n().sub(&CMatrix::from_real(2, 2, &[0.0, 0.0, -0.5, 1.0]).unwrap()).max_abs() < 1e-12);
    }

    #[test]
    fn verdicts() {
        assert!(check_self_adjoint(&BoundaryConditions::dirichlet(1)).unwrap().self_adjoint);
        let p = check_self_adjoint(&BoundaryConditions::periodic(1)).unwrap();
        assert!(p.self_adjoint);
        assert_eq!(p.phase_alpha, Some(0.0));
        let bad = bc(&[-2.0, 0.0, 0.0, -1.0], &[1.0, 0.0, 0.0, 1.0]);
        let v = check_self_adjoint(&bad).unwrap();
        assert!(!v.self_adjoint);
        assert!(v.diagnostics.lagrangian_residual > 1e-3);
        let complex_robin = BoundaryConditions::robin(c(1.0, 0.0), c(0.0, 1.0), c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        assert!(!check_self_adjoint(&complex_robin).unwrap().self_adjoint);
    }

    #[test]
    fn twisted_system_passes_boundary_form_test() {
        let mu_l = 2.0;
        let ph = [
            C64::from_polar(1.0, mu_l),
            C64::from_polar(1.0, -mu_l),
            C64::from_polar(1.0, mu_l),
            C64::from_polar(1.0, -mu_l),
        ];
        let v = check_self_adjoint(&BoundaryConditions::twisted(&ph).unwrap()).unwrap();
        assert!(v.self_adjoint);
        assert!(v.diagnostics.heuristic_extension);
        assert!(v.diagnostics.entrywise_residual.unwrap() > 0.1);
    }

    #[test]
    fn scalar_criteria_agree_with_boundary_form() {
        for b in [
            BoundaryConditions::dirichlet(1),
            BoundaryConditions::neumann(1),
            BoundaryConditions::periodic(1),
            BoundaryConditions::antiperiodic(1),
            BoundaryConditions::twisted(&[C64::from_polar(1.0, 0.7), C64::from_polar(1.0, 0.7)]).unwrap(),
        ] {
            assert!(lagrangian_residual(&b) < 1e-12);
        }
    }
}
