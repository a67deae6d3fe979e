//! Problem data: coefficient expressions, boundary matrices and solver knobs.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::expr::{parse_expression, Expression};
use crate::linalg::CMatrix;
use crate::{Error, Result, C64};

/// One operator `L = -d/dx (P d/dx) + R(x)` acting on `r`-component
/// functions on `[a, b]`. `P` is scalar; `R` is an `r × r` matrix whose
/// entries are given as real and imaginary part expressions.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem {
    r: usize,
    a: f64,
    b: f64,
    metric: Expression,
    potential_re: Vec<Expression>,
    potential_im: Vec<Expression>,
}

impl Problem {
    /// `potential_re` and `potential_im` are row-major with `r²` entries;
    /// pass an empty `potential_im` for a real potential.
    pub fn new(
        r: usize,
        interval: (f64, f64),
        metric: Expression,
        potential_re: Vec<Expression>,
        potential_im: Vec<Expression>,
    ) -> Result<Self> {
        let (a, b) = interval;
        if r == 0 {
            return Err(Error::InvalidProblem("component count r must be at least 1".into()));
        }
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidProblem(format!("interval [{a}, {b}] must satisfy a < b")));
        }
        if potential_re.len() != r * r {
            return Err(Error::Dimension(format!(
                "R has {} entries, expected r^2 = {}",
                potential_re.len(),
                r * r
            )));
        }
        let potential_im = if potential_im.is_empty() {
            (0..r * r).map(|_| Expression::Number(0.0)).collect()
        } else if potential_im.len() == r * r {
            potential_im
        } else {
            return Err(Error::Dimension(format!(
                "R_im has {} entries, expected r^2 = {}",
                potential_im.len(),
                r * r
            )));
        };
        Ok(Problem {
            r,
            a,
            b,
            metric,
            potential_re,
            potential_im,
        })
    }

    /// Scalar problem from source strings.
    pub fn scalar(metric: &str, potential: &str, a: f64, b: f64) -> Result<Self> {
        Self::new(
            1,
            (a, b),
            parse_expression(metric)?,
            alloc::vec![parse_expression(potential)?],
            Vec::new(),
        )
    }

    /// System problem from source strings; `im` may be empty.
    pub fn system(r: usize, metric: &str, re: &[&str], im: &[&str], a: f64, b: f64) -> Result<Self> {
        let parse_all = |v: &[&str]| v.iter().map(|s| parse_expression(s)).collect::<Result<Vec<_>>>();
        Self::new(r, (a, b), parse_expression(metric)?, parse_all(re)?, parse_all(im)?)
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn metric(&self) -> &Expression {
        &self.metric
    }

    pub fn potential_re(&self) -> &[Expression] {
        &self.potential_re
    }

    pub fn potential_im(&self) -> &[Expression] {
        &self.potential_im
    }

    /// `P(x)`.
    pub fn p_at(&self, x: f64) -> f64 {
        self.metric.eval(x)
    }

    /// `R(x)` row-major.
    pub fn r_at(&self, x: f64) -> Vec<C64> {
        self.potential_re
            .iter()
            .zip(&self.potential_im)
            .map(|(re, im)| C64::new(re.eval(x), im.eval(x)))
            .collect()
    }

    /// `R(x)` as a matrix.
    pub fn potential_matrix(&self, x: f64) -> CMatrix {
        CMatrix::from_vec(self.r, self.r, self.r_at(x)).expect("r*r entries")
    }

    /// Same operator with `R` replaced by `R + shift·I`.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.r {
            let e = &mut out.potential_re[i * self.r + i];
            *e = Expression::Binary(
                crate::expr::BinOp::Add,
                alloc::boxed::Box::new(e.clone()),
                alloc::boxed::Box::new(Expression::constant(shift)),
            );
        }
        out
    }

    /// Whether `P` is constant (and real coefficients are constant) so that
    /// cheap shortcuts apply. Only used for heuristics.
    pub fn has_constant_coefficients(&self) -> bool {
        self.metric.is_constant()
            && self.potential_re.iter().all(Expression::is_constant)
            && self.potential_im.iter().all(Expression::is_constant)
    }

    /// True when every potential entry has a literal zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.potential_im.iter().all(Expression::is_zero_literal)
    }

    /// Symbolic equality of the metrics, falling back to sampled equality
    /// within `1e-12` relative at Chebyshev points.
    pub fn same_metric(&self, other: &Problem, samples: usize) -> bool {
        if self.metric == other.metric {
            return true;
        }
        if self.interval() != other.interval() {
            return false;
        }
        chebyshev_points(self.a, self.b, samples).into_iter().all(|x| {
            let (p, q) = (self.p_at(x), other.p_at(x));
            (p - q).abs() <= 1e-12 * p.abs().max(q.abs())
        })
    }
}

/// Chebyshev–Lobatto points on `[a, b]`, endpoints included.
pub fn chebyshev_points(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![(a + b) / 2.0],
        _ => (0..n)
            .map(|k| {
                let t = libm::cos(core::f64::consts::PI * k as f64 / (n - 1) as f64);
                if k == 0 {
                    a
                } else if k == n - 1 {
                    b
                } else {
                    (a + b) / 2.0 - (b - a) / 2.0 * t
                }
            })
            .collect(),
    }
}

/// Sampled validity checks of a [`Problem`].
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub samples: usize,
    /// `(x, P(x))` wherever `P(x) <= 0` or is not finite.
    pub positivity_violations: Vec<(f64, f64)>,
    /// Sample points where some entry of `R` is not finite.
    pub non_finite_potential: Vec<f64>,
    /// `max |R_pq(x) - conj(R_qp(x))|` over samples and entries.
    pub hermiticity_residual: f64,
    /// Residuals above this count as violations.
    pub hermiticity_tolerance: f64,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.positivity_violations.is_empty()
            && self.non_finite_potential.is_empty()
            && self.hermiticity_residual <= self.hermiticity_tolerance
    }

    /// Human-readable list of violations.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (x, p) in &self.positivity_violations {
            out.push(format!("P({x}) = {p} is not positive"));
        }
        for x in &self.non_finite_potential {
            out.push(format!("R({x}) is not finite"));
        }
        if self.hermiticity_residual > self.hermiticity_tolerance {
            out.push(format!(
                "R is not Hermitian: residual {:e} exceeds {:e}",
                self.hermiticity_residual, self.hermiticity_tolerance
            ));
        }
        out
    }
}

/// Samples `P` and `R` at `n_samples` Chebyshev points and reports every
/// positivity and Hermiticity violation. Never fails.
pub fn validate_problem(p: &Problem, n_samples: usize) -> ValidationReport {
    let (a, b) = p.interval();
    let r = p.r();
    let mut report = ValidationReport {
        samples: n_samples,
        positivity_violations: Vec::new(),
        non_finite_potential: Vec::new(),
        hermiticity_residual: 0.0,
        hermiticity_tolerance: 0.0,
    };
    let mut scale: f64 = 0.0;
    for x in chebyshev_points(a, b, n_samples) {
        let pv = p.p_at(x);
        if !(pv.is_finite() && pv > 0.0) {
            report.positivity_violations.push((x, pv));
        }
        let rv = p.r_at(x);
        if rv.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            report.non_finite_potential.push(x);
            continue;
        }
        for i in 0..r {
            for j in i..r {
                let d = (rv[i * r + j] - rv[j * r + i].conj()).norm();
                report.hermiticity_residual = report.hermiticity_residual.max(d);
                scale = scale.max(rv[i * r + j].norm()).max(rv[j * r + i].norm());
            }
        }
    }
    report.hermiticity_tolerance = 1e-12 * scale.max(1.0);
    report
}

/// Boundary conditions `M (u(a), v(a)) + N (u(b), v(b)) = 0` with
/// `v = P u'`; `M` and `N` are `2r × 2r`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryConditions {
    m: CMatrix,
    n: CMatrix,
}

impl BoundaryConditions {
    /// Rejects mismatched shapes and a rank-deficient `[M | N]`.
    pub fn new(m: CMatrix, n: CMatrix) -> Result<Self> {
        if !m.is_square() || !m.rows().is_multiple_of(2) || m.rows() == 0 {
            return Err(Error::Dimension(format!(
                "M is {}x{}, expected 2r x 2r",
                m.rows(),
                m.cols()
            )));
        }
        if n.rows() != m.rows() || n.cols() != m.cols() {
            return Err(Error::Dimension(format!(
                "N is {}x{} but M is {}x{}",
                n.rows(),
                n.cols(),
                m.rows(),
                m.cols()
            )));
        }
        if !m.is_finite() || !n.is_finite() {
            return Err(Error::InvalidProblem("boundary matrices contain non-finite entries".into()));
        }
        let stacked = m.hstack(&n);
        let s = stacked.singular_values();
        let smax = s.first().copied().unwrap_or(0.0);
        let rank = s.iter().filter(|&&x| x > 1e-12 * smax).count();
        if rank < m.rows() {
            return Err(Error::RankDeficient {
                rank,
                needed: m.rows(),
            });
        }
        Ok(BoundaryConditions { m, n })
    }

    /// Requires the boundary matrices to be `2r × 2r` for the given `r`.
    pub fn for_components(r: usize, m: CMatrix, n: CMatrix) -> Result<Self> {
        if m.rows() != 2 * r || n.rows() != 2 * r {
            return Err(Error::Dimension(format!(
                "boundary matrices must be {0}x{0} for r = {r}, got {1}x{2}",
                2 * r,
                m.rows(),
                m.cols()
            )));
        }
        Self::new(m, n)
    }

    pub fn m(&self) -> &CMatrix {
        &self.m
    }

    pub fn n(&self) -> &CMatrix {
        &self.n
    }

    pub fn r(&self) -> usize {
        self.m.rows() / 2
    }

    /// `[M | N]`, `2r × 4r`.
    pub fn stacked(&self) -> CMatrix {
        self.m.hstack(&self.n)
    }

    /// `u(a) = 0`, `u(b) = 0` componentwise.
    pub fn dirichlet(r: usize) -> Self {
        let mut m = CMatrix::zeros(2 * r, 2 * r);
        let mut n = CMatrix::zeros(2 * r, 2 * r);
        for i in 0..r {
            m[(i, i)] = C64::new(1.0, 0.0);
            n[(r + i, i)] = C64::new(1.0, 0.0);
        }
        BoundaryConditions { m, n }
    }

    /// `v(a) = 0`, `v(b) = 0` componentwise.
    pub fn neumann(r: usize) -> Self {
        let mut m = CMatrix::zeros(2 * r, 2 * r);
        let mut n = CMatrix::zeros(2 * r, 2 * r);
        for i in 0..r {
            m[(i, r + i)] = C64::new(1.0, 0.0);
            n[(r + i, r + i)] = C64::new(1.0, 0.0);
        }
        BoundaryConditions { m, n }
    }

    /// Scalar Robin conditions `A u(a) + B v(a) = 0`, `C u(b) + D v(b) = 0`.
    pub fn robin(a: C64, b: C64, c: C64, d: C64) -> Result<Self> {
        let z = C64::new(0.0, 0.0);
        Self::new(
            CMatrix::from_vec(2, 2, alloc::vec![a, b, z, z])?,
            CMatrix::from_vec(2, 2, alloc::vec![z, z, c, d])?,
        )
    }

    /// `u(a) = u(b)`, `v(a) = v(b)`.
    pub fn periodic(r: usize) -> Self {
        BoundaryConditions {
            m: CMatrix::identity(2 * r).scale(C64::new(-1.0, 0.0)),
            n: CMatrix::identity(2 * r),
        }
    }

    /// `u(a) = -u(b)`, `v(a) = -v(b)`.
    pub fn antiperiodic(r: usize) -> Self {
        BoundaryConditions {
            m: CMatrix::identity(2 * r),
            n: CMatrix::identity(2 * r),
        }
    }

    /// `(u, v)(b) = diag(phases) (u, v)(a)`: `M = -diag(phases)`, `N = I`.
    pub fn twisted(phases: &[C64]) -> Result<Self> {
        let neg: Vec<C64> = phases.iter().map(|z| -z).collect();
        Self::new(CMatrix::diag(&neg), CMatrix::identity(phases.len()))
    }

    /// Same conditions with `S M`, `S N`.
    pub fn left_multiplied(&self, s: &CMatrix) -> Result<Self> {
        Self::new(s.matmul(&self.m), s.matmul(&self.n))
    }

    /// Same conditions with row `row` of `[M | N]` multiplied by `c`.
    pub fn row_scaled(&self, row: usize, c: C64) -> Result<Self> {
        let mut s = CMatrix::identity(self.m.rows());
        s[(row, row)] = c;
        self.left_multiplied(&s)
    }
}

/// Integration tolerances and oracle/validation sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub zero_mode_tol: f64,
    pub oracle_terms: usize,
    pub samples: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            zero_mode_tol: 1e-8,
            oracle_terms: 2000,
            samples: 257,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_problem_is_valid() {
        let p = Problem::scalar("1", "0", 0.0, 1.0).unwrap();
        assert!(validate_problem(&p, 257).is_valid());
    }

    #[test]
    fn sign_changing_metric_is_flagged() {
        let p = Problem::scalar("x-0.5", "0", 0.0, 1.0).unwrap();
        let rep = validate_problem(&p, 257);
        assert!(!rep.is_valid());
        assert!(rep.positivity_violations.iter().all(|&(x, _)| x <= 0.5));
        assert!(rep.positivity_violations.iter().any(|&(x, _)| x < 0.5));
    }

    #[test]
    fn asymmetric_potential_residual() {
        let p = Problem::system(2, "1", &["0", "1", "2", "0"], &[], 0.0, 1.0).unwrap();
        let rep = validate_problem(&p, 17);
        assert_eq!(rep.hermiticity_residual, 1.0);
        assert!(!rep.is_valid());
    }

    #[test]
    fn complex_hermitian_potential_passes() {
        let p = Problem::system(2, "1", &["1", "cos(x)", "cos(x)", "2"], &["0", "sin(x)", "-sin(x)", "0"], -2.0, 2.0)
            .unwrap();
        assert!(validate_problem(&p, 257).is_valid());
    }

    #[test]
    fn chebyshev_endpoints() {
        let pts = chebyshev_points(-1.0, 3.0, 5);
        assert_eq!(pts[0], -1.0);
        assert_eq!(pts[4], 3.0);
        assert!((pts[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rank_deficient_bc_rejected() {
        let m = CMatrix::from_real(2, 2, &[1.0, 0.0, 2.0, 0.0]).unwrap();
        let n = CMatrix::zeros(2, 2);
        assert!(matches!(
            BoundaryConditions::new(m, n),
            Err(Error::RankDeficient { rank: 1, needed: 2 })
        ));
        let bad = BoundaryConditions::for_components(1, CMatrix::identity(3), CMatrix::identity(3));
        assert!(matches!(bad, Err(Error::Dimension(_))));
    }
}
