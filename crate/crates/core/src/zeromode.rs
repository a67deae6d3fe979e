//! Zero modes: detection, the proportionality constant `B`, and the ratio
//! with the zero mode extracted,
//!
//! ```text
//! det' L1 / det L2 = -B ⟨y1|y1⟩ / det(M + N Y2(b)).
//! ```
//!
//! `B` links the secular determinant near `λ = 0` to the overlap with the
//! normalized zero mode: `det(M + N E_λ(b)) = B λ ⟨y1|u_λ⟩`. It follows
//! from the boundary data of `y1` alone. Three formulas are provided: one
//! for scalar separated conditions, one for scalar non-separated
//! conditions, and a general one for systems that solves `2r` boundary data
//! in terms of the other `2r` through an invertible column selection `Z` of
//! `[M | N]` (the data split).
//!
//! `B` and `y1` depend on how the rows of `[M | N]` are written; the ratio
//! does not, as long as numerator and denominator use the same rows.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::boundary::{check_self_adjoint, separated_canonical, BcKind};
use crate::detratio::{check_pair, normalized_from_secular, secular_matrix, zero_guard, NormalizedSolution, RatioMethod, RatioResult};
use crate::linalg::CMatrix;
use crate::model::{BoundaryConditions, Problem, SolverSettings};
use crate::propagate::{fundamental_matrix, inner_product};
use crate::{Error, Result, C64};

/// Largest condition number accepted for `Z`.
pub const MAX_SPLIT_CONDITION: f64 = 1e12;
/// Relative agreement required between overlapping `B` formulas.
pub const REGIME_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitChoice {
    /// `Z = N`: solve for the data at `x = b`.
    N,
    /// `Z = M`: solve for the data at `x = a`.
    M,
    /// Columns picked by pivoted Gram–Schmidt on `[M | N]`.
    Greedy,
}

/// Partition of the `4r` columns of `[M | N]` (equivalently of the data
/// `(u(a), v(a), u(b), v(b))`) into `Z` and its complement `Z_c`.
#[derive(Clone, Debug, PartialEq)]
pub struct DataSplit {
    pub choice: SplitChoice,
    /// Increasing column indices of `[M | N]` forming `Z`.
    pub columns: Vec<usize>,
    /// The remaining columns, forming `Z_c`.
    pub complement: Vec<usize>,
    /// How many of `columns` fall in the `u(a)`, `v(a)`, `u(b)`, `v(b)`
    /// groups.
    pub counts: [usize; 4],
    pub z: CMatrix,
    pub z_c: CMatrix,
    pub condition_number: f64,
}

impl DataSplit {
    /// Builds the split for the given columns; errors when `Z` is
    /// numerically singular.
    pub fn from_columns(bc: &BoundaryConditions, choice: SplitChoice, mut columns: Vec<usize>) -> Result<Self> {
        let r = bc.r();
        columns.sort_unstable();
        columns.dedup();
        if columns.len() != 2 * r || columns.iter().any(|&c| c >= 4 * r) {
            return Err(Error::Dimension(format!("a data split needs {} distinct columns below {}", 2 * r, 4 * r)));
        }
        let stacked = bc.stacked();
        let complement: Vec<usize> = (0..4 * r).filter(|c| !columns.contains(c)).collect();
        let z = stacked.select_columns(&columns);
        let z_c = stacked.select_columns(&complement);
        let condition_number = z.condition_number();
        if condition_number.is_nan() || condition_number >= MAX_SPLIT_CONDITION {
            return Err(Error::NoInvertibleSplit);
        }
        let mut counts = [0; 4];
        for &c in &columns {
            counts[c / r] += 1;
        }
        Ok(DataSplit {
            choice,
            columns,
            complement,
            counts,
            z,
            z_c,
            condition_number,
        })
    }

    pub fn with_choice(bc: &BoundaryConditions, choice: SplitChoice) -> Result<Self> {
        let r = bc.r();
        let columns = match choice {
            SplitChoice::N => (2 * r..4 * r).collect(),
            SplitChoice::M => (0..2 * r).collect(),
            SplitChoice::Greedy => bc.stacked().greedy_columns(2 * r),
        };
        Self::from_columns(bc, choice, columns)
    }
}

/// `Z = N`, then `Z = M`, then a greedy column selection; the first with
/// condition number below [`MAX_SPLIT_CONDITION`].
pub fn choose_data_split(bc: &BoundaryConditions) -> Result<DataSplit> {
    [SplitChoice::N, SplitChoice::M, SplitChoice::Greedy]
        .into_iter()
        .find_map(|c| DataSplit::with_choice(bc, c).ok())
        .ok_or(Error::NoInvertibleSplit)
}

/// Boundary data of the zero mode.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryData {
    pub ua: Vec<C64>,
    pub va: Vec<C64>,
    pub ub: Vec<C64>,
    pub vb: Vec<C64>,
}

impl BoundaryData {
    fn from_solution(y: &NormalizedSolution) -> Self {
        BoundaryData {
            ua: y.path.ua.clone(),
            va: y.path.va.clone(),
            ub: y.path.ub.clone(),
            vb: y.path.vb.clone(),
        }
    }
}

/// Separated scalar conditions with the second row at `x = b`:
/// `B = n21 / v(b)*`, or `B = -n22 / u(b)*` when `n21 = 0`. With both
/// nonzero the two forms are computed and must agree.
pub fn b_constant_separated(bc: &BoundaryConditions, y: &BoundaryData) -> Result<C64> {
    if bc.r() != 1 {
        return Err(Error::NotApplicable("separated B formula is for scalar problems"));
    }
    let (n21, n22) = (bc.n()[(1, 0)], bc.n()[(1, 1)]);
    let scale = n21.norm().max(n22.norm());
    if scale == 0.0 {
        return Err(Error::DegenerateData("second boundary row has no x = b content"));
    }
    let from_v = (n21.norm() > 1e-14 * scale).then(|| n21 / y.vb[0].conj());
    let from_u = (n22.norm() > 1e-14 * scale).then(|| -n22 / y.ub[0].conj());
    match (from_v, from_u) {
        (Some(a), Some(b)) => {
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::DegenerateData("zero mode vanishes at x = b"));
            }
            if (a - b).norm() > REGIME_TOL.max(1e-6) * a.norm().max(b.norm()) {
                return Err(Error::RegimeMismatch(format!("separated B forms disagree: {a} vs {b}")));
            }
            Ok(a)
        }
        (Some(v), None) | (None, Some(v)) if v.is_finite() => Ok(v),
        _ => Err(Error::DegenerateData("zero mode boundary value vanishes")),
    }
}

/// Non-separated scalar conditions:
/// `B = (n12 n21 - n11 n22) / (n11 u(b)* + n12 v(b)*)`.
pub fn b_constant_nonseparated(bc: &BoundaryConditions, y: &BoundaryData) -> Result<C64> {
    if bc.r() != 1 {
        return Err(Error::NotApplicable("non-separated B formula is for scalar problems"));
    }
    let n = bc.n();
    let (n11, n12, n21, n22) = (n[(0, 0)], n[(0, 1)], n[(1, 0)], n[(1, 1)]);
    let den = n11 * y.ub[0].conj() + n12 * y.vb[0].conj();
    let size = (n11.norm() + n12.norm()) * (y.ub[0].norm() + y.vb[0].norm());
    if den.norm() <= 1e-12 * size || size == 0.0 {
        return Err(Error::DegenerateData("denominator of the non-separated B formula vanishes"));
    }
    Ok((n12 * n21 - n11 * n22) / den)
}

/// General formula through a data split:
/// `B^{-1} = Σ_β (Z^{-1})_{β, 2r} g(c_β)` over the columns `c_β` of `Z`,
/// with `g = -v(a)*, u(a)*, v(b)*, -u(b)*` on the four data groups.
pub fn b_constant_system(bc: &BoundaryConditions, split: &DataSplit, y: &BoundaryData) -> Result<C64> {
    let r = bc.r();
    let zinv = split.z.inverse().ok_or(Error::NoInvertibleSplit)?;
    let last = 2 * r - 1;
    let mut sum = C64::new(0.0, 0.0);
    let mut size = 0.0;
    for (beta, &col) in split.columns.iter().enumerate() {
        let q = col % r;
        let g = match col / r {
            0 => -y.va[q].conj(),
            1 => y.ua[q].conj(),
            2 => y.vb[q].conj(),
            _ => -y.ub[q].conj(),
        };
        let term = zinv[(beta, last)] * g;
        size += term.norm();
        sum += term;
    }
    if sum.norm() <= 1e-12 * size || size == 0.0 {
        return Err(Error::DegenerateData("B^-1 vanishes for this data split"));
    }
    Ok(C64::new(1.0, 0.0) / sum)
}

/// Everything known about the zero mode of one operator.
#[derive(Clone, Debug)]
pub struct ZeroModeResult {
    /// Dimension of the kernel of `M + N Y(b)`.
    pub multiplicity: usize,
    /// Singular values of `M + N Y(b)`, descending.
    pub singular_values: Vec<f64>,
    /// Row representation of the boundary conditions that `y1`, `B` and the
    /// ratio refer to.
    pub bc: BoundaryConditions,
    pub kind: BcKind,
    pub self_adjoint: bool,
    /// Normalized zero mode, present for multiplicity 1.
    pub y1: Option<NormalizedSolution>,
    pub norm_sq: f64,
    /// The constant of the applicable regime (`None` until computed).
    pub b: Option<C64>,
    pub b_separated: Option<C64>,
    pub b_nonseparated: Option<C64>,
    pub b_system: Option<C64>,
    /// `f_{1,0} = -B ⟨y1|y1⟩`.
    pub f10: Option<C64>,
    pub split: Option<DataSplit>,
    pub warnings: Vec<String>,
}

impl ZeroModeResult {
    pub fn boundary_data(&self) -> Option<BoundaryData> {
        self.y1.as_ref().map(BoundaryData::from_solution)
    }
}

/// Rows written so that the last one carries the normalization: canonical
/// endpoint rows for separated conditions, then, if the left null vector of
/// the secular matrix misses the last row, a row swap that puts its largest
/// component last.
fn working_representation(bc: &BoundaryConditions, kind: BcKind) -> Result<BoundaryConditions> {
    if kind == BcKind::Separated {
        separated_canonical(bc)
    } else {
        Ok(bc.clone())
    }
}

fn reorder_for_zero_mode(bc: BoundaryConditions, secular: &CMatrix) -> Result<(BoundaryConditions, CMatrix)> {
    let n2 = secular.rows();
    let ker = secular.conj_transpose().kernel(1e-8);
    if ker.cols() == 0 {
        return Ok((bc, secular.clone()));
    }
    let l = ker.column(0);
    let (best, best_abs) = l
        .iter()
        .enumerate()
        .fold((0, 0.0), |b, (i, z)| if z.norm() > b.1 { (i, z.norm()) } else { b });
    if l[n2 - 1].norm() >= 1e-6 * best_abs || best == n2 - 1 {
        return Ok((bc, secular.clone()));
    }
    let mut m = bc.m().clone();
    let mut n = bc.n().clone();
    m.swap_rows(best, n2 - 1);
    n.swap_rows(best, n2 - 1);
    let mut s = secular.clone();
    s.swap_rows(best, n2 - 1);
    // a swap flips the sign of the determinant; negate the row to keep the
    // orientation of the original conditions
    let neg = C64::new(-1.0, 0.0);
    for j in 0..n2 {
        m[(best, j)] *= neg;
        n[(best, j)] *= neg;
        s[(best, j)] *= neg;
    }
    Ok((BoundaryConditions::new(m, n)?, s))
}

/// Multiplicity of the zero eigenvalue from the singular values of
/// `M + N Y(b)`, and for a single zero mode the normalized `y1` with its
/// norm. Multiplicities above one are reported, not refused.
pub fn detect_zero_mode(p: &Problem, bc: &BoundaryConditions, settings: &SolverSettings) -> Result<ZeroModeResult> {
    if bc.r() != p.r() {
        return Err(Error::Dimension(format!(
            "boundary matrices are for r = {}, problem has r = {}",
            bc.r(),
            p.r()
        )));
    }
    let cls = check_self_adjoint(bc)?;
    let rep = working_representation(bc, cls.kind)?;
    let zero = C64::new(0.0, 0.0);
    let fm = fundamental_matrix(p, zero, settings)?;
    let secular = secular_matrix(&rep, &fm.matrix());
    let singular_values = secular.singular_values();
    // measured against the size of the terms: with a kernel of dimension
    // 2r every singular value of the sum vanishes
    let terms = [rep.m().clone(), rep.n().matmul(&fm.matrix())];
    let scale = terms
        .iter()
        .map(|t| t.singular_values().first().copied().unwrap_or(0.0))
        .fold(singular_values.first().copied().unwrap_or(0.0), f64::max);
    let multiplicity = singular_values.iter().filter(|&&s| s <= settings.zero_mode_tol * scale).count();
    let mut warnings = Vec::new();
    if !cls.self_adjoint {
        warnings.push(String::from(
            "boundary conditions are not self-adjoint; B and the zero-mode ratio are unvalidated",
        ));
    }
    let mut out = ZeroModeResult {
        multiplicity,
        singular_values,
        bc: rep.clone(),
        kind: cls.kind,
        self_adjoint: cls.self_adjoint,
        y1: None,
        norm_sq: 0.0,
        b: None,
        b_separated: None,
        b_nonseparated: None,
        b_system: None,
        f10: None,
        split: None,
        warnings,
    };
    if multiplicity == 1 {
        let (rep, secular) = reorder_for_zero_mode(rep, &secular)?;
        let y1 = normalized_from_secular(p, &rep, zero, &secular, settings)?;
        out.norm_sq = y1.path.norm_sq;
        out.y1 = Some(y1);
        out.bc = rep;
    }
    Ok(out)
}

/// Zero-mode analysis of one operator: detection plus `B` in every
/// applicable regime. With `split` set, the system formula uses that split
/// instead of the automatic choice.
pub fn zero_mode_analysis(
    p: &Problem,
    bc: &BoundaryConditions,
    settings: &SolverSettings,
    split: Option<SplitChoice>,
) -> Result<ZeroModeResult> {
    let mut zm = detect_zero_mode(p, bc, settings)?;
    match zm.multiplicity {
        0 => return Err(Error::NoZeroMode),
        1 => {}
        m => return Err(Error::DegenerateZeroMode { multiplicity: m }),
    }
    let data = zm.boundary_data().expect("multiplicity one has y1");
    let rep = zm.bc.clone();
    let ds = match split {
        Some(choice) => DataSplit::with_choice(&rep, choice)?,
        None => choose_data_split(&rep)?,
    };
    let b_system = b_constant_system(&rep, &ds, &data)?;
    zm.b_system = Some(b_system);
    zm.split = Some(ds);
    let mut b = b_system;
    if rep.r() == 1 {
        let scalar = match zm.kind {
            BcKind::Separated => {
                let v = b_constant_separated(&rep, &data)?;
                zm.b_separated = Some(v);
                v
            }
            BcKind::NonSeparated => {
                let v = b_constant_nonseparated(&rep, &data)?;
                zm.b_nonseparated = Some(v);
                v
            }
        };
        if (scalar - b_system).norm() > REGIME_TOL * scalar.norm().max(b_system.norm()) {
            return Err(Error::RegimeMismatch(format!(
                "scalar B = {scalar}, system B = {b_system}"
            )));
        }
        b = scalar;
    }
    zm.b = Some(b);
    zm.f10 = Some(-b * zm.norm_sq);
    Ok(zm)
}

/// `det' L1 / det L2 = -B ⟨y1|y1⟩ / det(M + N Y2(b))` for `p1` with a single
/// zero mode and `p2` without.
pub fn ratio_zero_mode(
    p1: &Problem,
    p2: &Problem,
    bc: &BoundaryConditions,
    settings: &SolverSettings,
) -> Result<RatioResult> {
    ratio_zero_mode_detailed(p1, p2, bc, settings, None).map(|(r, _)| r)
}

/// [`ratio_zero_mode`] together with the zero-mode analysis, optionally
/// forcing the data split.
pub fn ratio_zero_mode_detailed(
    p1: &Problem,
    p2: &Problem,
    bc: &BoundaryConditions,
    settings: &SolverSettings,
    split: Option<SplitChoice>,
) -> Result<(RatioResult, ZeroModeResult)> {
    let mut warnings = check_pair(p1, p2, bc, settings)?;
    let zm = zero_mode_analysis(p1, bc, settings, split)?;
    let fm2 = fundamental_matrix(p2, C64::new(0.0, 0.0), settings)?;
    let a2 = secular_matrix(&zm.bc, &fm2.matrix());
    let det2 = a2.det();
    if det2.norm() <= zero_guard(&a2, settings.zero_mode_tol) {
        return Err(Error::ReferenceZeroMode);
    }
    let f10 = zm.f10.expect("analysis fills f10");
    warnings.extend(zm.warnings.iter().cloned());
    Ok((
        RatioResult {
            value: f10 / det2,
            det1: f10,
            det2,
            method: RatioMethod::ZeroMode,
            warnings,
        },
        zm,
    ))
}

/// Both sides of `det(M + N E_λ(b)) = B λ ⟨y1|u_λ⟩` with `u_λ` the
/// normalized solution at `λ` in the same row representation as `zm`.
pub fn proportionality_sides(
    p: &Problem,
    zm: &ZeroModeResult,
    lambda: C64,
    settings: &SolverSettings,
) -> Result<(C64, C64)> {
    let y1 = zm.y1.as_ref().ok_or(Error::NoZeroMode)?;
    let b = zm.b.ok_or(Error::NoZeroMode)?;
    let fm = fundamental_matrix(p, lambda, settings)?;
    let a = secular_matrix(&zm.bc, &fm.matrix());
    let coeffs = a.adjugate_column(a.rows() - 1);
    let overlap = inner_product(p, (C64::new(0.0, 0.0), &y1.coeffs), (lambda, &coeffs), settings)?;
    Ok((a.det(), b * lambda * overlap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn s() -> SolverSettings {
        SolverSettings::default()
    }

    #[test]
    fn periodic_free_operator() {
        let p = Problem::scalar("1", "0", 0.0, 1.0).unwrap();
        let zm = zero_mode_analysis(&p, &BoundaryConditions::periodic(1), &s(), None).unwrap();
        assert_eq!(zm.multiplicity, 1);
        let y = zm.y1.as_ref().unwrap();
        assert!((y.coeffs[0] + 1.0).norm() < 1e-12);
        assert_relative_eq!(zm.norm_sq, 1.0, max_relative = 1e-12);
        let b = zm.b.unwrap();
        assert!((b - 1.0).norm() < 1e-10);
        assert_eq!(zm.split.as_ref().unwrap().choice, SplitChoice::N);
    }

    #[test]
    fn dirichlet_sine_zero_mode() {
        let p = Problem::scalar("1", "-pi^2", 0.0, 1.0).unwrap();
        let zm = zero_mode_analysis(&p, &BoundaryConditions::dirichlet(1), &s(), None).unwrap();
        assert!((zm.b_separated.unwrap() + 1.0).norm() < 1e-10);
        assert_eq!(zm.split.as_ref().unwrap().choice, SplitChoice::Greedy);
    }

    #[test]
    fn doubled_row_doubles_b_not_ratio() {
        let p1 = Problem::scalar("1", "0", 0.0, 1.0).unwrap();
        let p2 = Problem::scalar("1", "1", 0.0, 1.0).unwrap();
        let per = BoundaryConditions::periodic(1);
        let scaled = per.row_scaled(1, C64::new(2.0, 0.0)).unwrap();
        let (r1, z1) = ratio_zero_mode_detailed(&p1, &p2, &per, &s(), None).unwrap();
        let (r2, z2) = ratio_zero_mode_detailed(&p1, &p2, &scaled, &s(), None).unwrap();
        assert!((z2.b.unwrap() - z1.b.unwrap() * 2.0).norm() < 1e-10);
        assert!((r1.value - r2.value).norm() < 1e-10 * r1.value.norm());
    }

    #[test]
    fn decoupled_periodic_pair_is_degenerate() {
        let p = Problem::system(2, "1", &["0", "0", "0", "0"], &[], 0.0, 1.0).unwrap();
        let per = BoundaryConditions::periodic(2);
        let zm = detect_zero_mode(&p, &per, &s()).unwrap();
        assert_eq!(zm.multiplicity, 2);
        assert!(zm.y1.is_none());
        assert!(matches!(
            zero_mode_analysis(&p, &per, &s(), None),
            Err(Error::DegenerateZeroMode { multiplicity: 2 })
        ));
    }

    #[test]
    fn no_zero_mode() {
        let p = Problem::scalar("1", "0", 0.0, 1.0).unwrap();
        let zm = detect_zero_mode(&p, &BoundaryConditions::dirichlet(1), &s()).unwrap();
        assert_eq!(zm.multiplicity, 0);
    }
}
