//! Fundamental matrices and individual solutions of the first-order system
//!
//! ```text
//! d/dx (u, v) = D_λ(x) (u, v),   D_λ = [[0, I/P], [R - λ, 0]],   v = P u'.
//! ```
//!
//! `λ` enters `D` directly, so no square root (and no branch choice) is ever
//! taken.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::CMatrix;
use crate::model::{Problem, SolverSettings};
use crate::ode::{dopri5, magnus_fundamental, Coeffs, Tolerances};
use crate::{Error, Result, C64};

/// Number of equal segments between determinant checkpoints.
const CHECKPOINT_SEGMENTS: usize = 8;

/// `E_λ(x1)` for the system started from `E(x0) = I`.
#[derive(Clone, Debug)]
pub struct FundamentalMatrix {
    /// `E(x1)` divided by `e^{log_scale}`.
    pub value: CMatrix,
    /// Zero unless the entries grew past `1e100`, in which case
    /// `E = value · e^{log_scale}`.
    pub log_scale: f64,
    pub lambda: C64,
    pub interval: (f64, f64),
    /// `(x, det E(x))` at equally spaced checkpoints including both ends.
    pub checkpoints: Vec<(f64, C64)>,
    /// `max |det E(x) - 1|` over the checkpoints.
    pub wronskian_drift: f64,
    /// Drift divided by the Hadamard bound `∏ ||column||` (at least 1),
    /// the deviation that rounding alone can explain.
    pub scaled_drift: f64,
    pub steps: usize,
}

impl FundamentalMatrix {
    /// `E(x1)` with the scale folded back in. Overflows to infinity when
    /// `log_scale` is large.
    pub fn matrix(&self) -> CMatrix {
        if self.log_scale == 0.0 {
            self.value.clone()
        } else {
            self.value.scale(C64::new(libm::exp(self.log_scale), 0.0))
        }
    }

    /// Companion matrix `H` holding `(u, u')` instead of `(u, v)`: the lower
    /// block rows of `E` divided by `P(x1)`.
    pub fn h_matrix(&self, p: &Problem) -> CMatrix {
        let r = p.r();
        let inv_p = 1.0 / p.p_at(self.interval.1);
        let mut h = self.matrix();
        for i in r..2 * r {
            for j in 0..2 * r {
                h[(i, j)] *= inv_p;
            }
        }
        h
    }
}

/// Boundary data and norm of one solution.
#[derive(Clone, Debug)]
pub struct SolutionPath {
    pub coeffs: Vec<C64>,
    pub ua: Vec<C64>,
    pub va: Vec<C64>,
    pub ub: Vec<C64>,
    pub vb: Vec<C64>,
    /// `⟨u|u⟩ = ∫ u^H u dx`.
    pub norm_sq: f64,
}

impl SolutionPath {
    /// `(u(b), v(b))` stacked.
    pub fn end_state(&self) -> Vec<C64> {
        self.ub.iter().chain(&self.vb).copied().collect()
    }
}

fn tolerances(s: &SolverSettings) -> Tolerances {
    Tolerances {
        rel: s.rel_tol,
        abs: s.abs_tol,
    }
}

/// Explicit Runge–Kutta error control is local; two orders of margin keep
/// the global error of single solutions at the level of `E`.
fn solution_tolerances(s: &SolverSettings) -> Tolerances {
    Tolerances {
        rel: 1e-2 * s.rel_tol,
        abs: 1e-2 * s.abs_tol,
    }
}

/// Coefficient evaluation `(1/P, R - λ)` with sanity checks.
pub(crate) fn coefficients(p: &Problem, lambda: C64) -> impl Fn(f64) -> Result<Coeffs> + '_ {
    let r = p.r();
    move |x| {
        let pv = p.p_at(x);
        if !pv.is_finite() {
            return Err(Error::NonFinite { x });
        }
        if pv <= 0.0 {
            return Err(Error::InvalidProblem(alloc::format!("P({x}) = {pv} is not positive")));
        }
        let mut q = p.r_at(x);
        if q.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite { x });
        }
        for i in 0..r {
            q[i * r + i] -= lambda;
        }
        Ok((1.0 / pv, q))
    }
}

/// `E_λ(b)` over the problem's interval.
pub fn fundamental_matrix(p: &Problem, lambda: C64, settings: &SolverSettings) -> Result<FundamentalMatrix> {
    let (a, b) = p.interval();
    fundamental_matrix_on(p, lambda, a, b, settings)
}

/// `E_λ` over `[x0, x1] ⊆ [a, b]`, started from the identity at `x0`.
pub fn fundamental_matrix_on(
    p: &Problem,
    lambda: C64,
    x0: f64,
    x1: f64,
    settings: &SolverSettings,
) -> Result<FundamentalMatrix> {
    let r = p.r();
    let stops: Vec<f64> = (1..CHECKPOINT_SEGMENTS)
        .map(|k| x0 + (x1 - x0) * k as f64 / CHECKPOINT_SEGMENTS as f64)
        .collect();
    let mut checkpoints = Vec::with_capacity(CHECKPOINT_SEGMENTS + 1);
    let mut scaled_drift: f64 = 0.0;
    let out = magnus_fundamental(
        r,
        x0,
        x1,
        &stops,
        tolerances(settings),
        coefficients(p, lambda),
        |x, e, log_scale| {
            let mut det = e.det();
            if log_scale != 0.0 {
                det *= libm::exp(2.0 * r as f64 * log_scale);
            }
            let hadamard: f64 = (0..2 * r)
                .map(|j| libm::sqrt(e.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>()))
                .product::<f64>()
                * libm::exp(2.0 * r as f64 * log_scale);
            scaled_drift = scaled_drift.max((det - 1.0).norm() / hadamard.max(1.0));
            checkpoints.push((x, det));
        },
    )?;
    let wronskian_drift = checkpoints.iter().map(|(_, d)| (d - 1.0).norm()).fold(0.0, f64::max);
    Ok(FundamentalMatrix {
        value: out.value,
        log_scale: out.log_scale,
        lambda,
        interval: (x0, x1),
        checkpoints,
        wronskian_drift,
        scaled_drift,
        steps: out.steps,
    })
}

/// `max |det E(x) - 1|` over the recorded checkpoints.
pub fn wronskian_drift(fm: &FundamentalMatrix) -> f64 {
    fm.wronskian_drift
}

/// Right-hand side for `k` stacked solutions `(u, v)` of the same problem at
/// possibly different `λ`, followed by `extra` quadrature components filled
/// by `quad(x, states, out)`.
fn stacked_rhs<'a, Q>(
    p: &'a Problem,
    lambdas: &'a [C64],
    quad: Q,
) -> impl FnMut(f64, &[C64], &mut [C64]) -> Result<()> + 'a
where
    Q: Fn(&[C64], &mut [C64]) + 'a,
{
    let r = p.r();
    move |x, y, dy| {
        let pv = p.p_at(x);
        if !pv.is_finite() {
            return Err(Error::NonFinite { x });
        }
        if pv <= 0.0 {
            return Err(Error::InvalidProblem(alloc::format!("P({x}) = {pv} is not positive")));
        }
        let rm = p.r_at(x);
        if rm.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite { x });
        }
        let inv_p = 1.0 / pv;
        let k = lambdas.len();
        for (s, &lambda) in lambdas.iter().enumerate() {
            let off = 2 * r * s;
            for i in 0..r {
                dy[off + i] = y[off + r + i] * inv_p;
                let mut acc = -lambda * y[off + i];
                for j in 0..r {
                    acc += rm[i * r + j] * y[off + j];
                }
                dy[off + r + i] = acc;
            }
        }
        quad(&y[..2 * r * k], &mut dy[2 * r * k..]);
        Ok(())
    }
}

fn check_coeffs(p: &Problem, coeffs: &[C64]) -> Result<()> {
    if coeffs.len() != 2 * p.r() {
        return Err(Error::Dimension(alloc::format!(
            "{} coefficients for r = {}",
            coeffs.len(),
            p.r()
        )));
    }
    Ok(())
}

/// Integrates the solution with initial data `(u(a), v(a)) = coeffs`
/// together with `∫ u^H u dx`.
pub fn propagate_solution(p: &Problem, lambda: C64, coeffs: &[C64], settings: &SolverSettings) -> Result<SolutionPath> {
    check_coeffs(p, coeffs)?;
    let r = p.r();
    let (a, b) = p.interval();
    let mut y0 = coeffs.to_vec();
    y0.push(C64::new(0.0, 0.0));
    let lambdas = [lambda];
    let rhs = stacked_rhs(p, &lambdas, move |s, out| {
        out[0] = C64::new(s[..r].iter().map(|z| z.norm_sqr()).sum(), 0.0);
    });
    let y = dopri5(a, b, y0, &[], solution_tolerances(settings), rhs, |_, _| {})?;
    Ok(SolutionPath {
        coeffs: coeffs.to_vec(),
        ua: coeffs[..r].to_vec(),
        va: coeffs[r..].to_vec(),
        ub: y[..r].to_vec(),
        vb: y[r..2 * r].to_vec(),
        norm_sq: y[2 * r].re,
    })
}

/// `⟨f|g⟩ = ∫ f^H g dx` for `f` with data `coeffs_f` at `lambda_f` and `g`
/// with data `coeffs_g` at `lambda_g`, both integrated in one augmented
/// system so a single error control governs the product.
pub fn inner_product(
    p: &Problem,
    (lambda_f, coeffs_f): (C64, &[C64]),
    (lambda_g, coeffs_g): (C64, &[C64]),
    settings: &SolverSettings,
) -> Result<C64> {
    check_coeffs(p, coeffs_f)?;
    check_coeffs(p, coeffs_g)?;
    let r = p.r();
    let (a, b) = p.interval();
    let mut y0: Vec<C64> = coeffs_f.iter().chain(coeffs_g).copied().collect();
    y0.push(C64::new(0.0, 0.0));
    let lambdas = [lambda_f, lambda_g];
    let rhs = stacked_rhs(p, &lambdas, move |s, out| {
        out[0] = (0..r).map(|i| s[i].conj() * s[2 * r + i]).sum();
    });
    let y = dopri5(a, b, y0, &[], solution_tolerances(settings), rhs, |_, _| {})?;
    Ok(y[4 * r])
}

/// `(u(x), v(x))` at each of `xs` (any order, inside `[a, b]`).
pub fn solution_values(
    p: &Problem,
    lambda: C64,
    coeffs: &[C64],
    xs: &[f64],
    settings: &SolverSettings,
) -> Result<Vec<Vec<C64>>> {
    check_coeffs(p, coeffs)?;
    let (a, b) = p.interval();
    if xs.iter().any(|&x| !(a..=b).contains(&x)) {
        return Err(Error::InvalidProblem("evaluation point outside the interval".into()));
    }
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let stops: Vec<f64> = order.iter().map(|&i| xs[i]).collect();
    let mut out = vec![Vec::new(); xs.len()];
    let lambdas = [lambda];
    let rhs = stacked_rhs(p, &lambdas, |_, _| {});
    let end = stops.last().copied().unwrap_or(a);
    dopri5(a, end.max(a), coeffs.to_vec(), &stops, solution_tolerances(settings), rhs, |k, y| {
        out[order[k]] = y.to_vec();
    })?;
    Ok(out)
}
