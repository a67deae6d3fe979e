//! Adaptive integrators for the first-order system `u' = v/P`, `v' = (R - λ) u`.
//!
//! Two schemes live here:
//!
//! * a fourth-order Magnus integrator for the fundamental matrix. Every step
//!   multiplies by the exponential of a traceless matrix, so `det E = 1` is
//!   kept to rounding error no matter how fast the solutions grow;
//! * Dormand–Prince 5(4) with PI step control for individual solutions with
//!   extra quadrature components riding along.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::CMatrix;
use crate::{Error, Result, C64};

const MAX_STEPS: usize = 2_000_000;
/// Largest growth exponent allowed in a single Magnus step.
const MAX_OMEGA: f64 = 8.0;
const RESCALE_AT: f64 = 1e100;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Tolerances {
    pub rel: f64,
    pub abs: f64,
}

/// `(1/P(x), R(x) - λ)` at a point; `R - λ` is `r × r` row-major.
pub(crate) type Coeffs = (f64, Vec<C64>);

/// Propagator `exp(Ω)` for the step `[x, x + h]` from the two-point Gauss
/// Magnus expansion.
fn magnus_step<F>(r: usize, x: f64, h: f64, eval: &mut F) -> Result<(CMatrix, f64)>
where
    F: FnMut(f64) -> Result<Coeffs>,
{
    let s3 = libm::sqrt(3.0);
    let (p1, q1) = eval(x + h * (0.5 - s3 / 6.0))?;
    let (p2, q2) = eval(x + h * (0.5 + s3 / 6.0))?;
    let c = s3 * h * h / 12.0;
    if r == 1 {
        let alpha = (q1[0] * p2 - q2[0] * p1) * c;
        let beta = C64::new(h * (p1 + p2) / 2.0, 0.0);
        let gamma = (q1[0] + q2[0]) * (h / 2.0);
        let s2 = alpha * alpha + beta * gamma;
        // the closed form is exact for any oscillatory step; only growth
        // (real part of s) needs bounding
        let s = s2.sqrt();
        let big = s.re.abs().max(s.norm() / 250.0);
        let (ch, shc) = cosh_sinhc(s2);
        let m = CMatrix::from_vec(
            2,
            2,
            vec![ch + shc * alpha, shc * beta, shc * gamma, ch - shc * alpha],
        )?;
        return Ok((m, big));
    }
    let n = 2 * r;
    let mut omega = CMatrix::zeros(n, n);
    for i in 0..r {
        omega[(i, r + i)] = C64::new(h * (p1 + p2) / 2.0, 0.0);
        for j in 0..r {
            let comm = q1[i * r + j] * p2 - q2[i * r + j] * p1;
            omega[(i, j)] = comm * c;
            omega[(r + i, r + j)] = -comm * c;
            omega[(r + i, j)] = (q1[i * r + j] + q2[i * r + j]) * (h / 2.0);
        }
    }
    // growth rate of the step: roughly h sqrt(|R - λ| / P) plus the
    // commutator correction
    let pmax = libm::fabs(h * (p1 + p2) / 2.0);
    let mut qmax: f64 = 0.0;
    let mut cmax: f64 = 0.0;
    for i in 0..r {
        for j in 0..r {
            qmax = qmax.max(omega[(r + i, j)].norm());
            cmax = cmax.max(omega[(i, j)].norm());
        }
    }
    let big = r as f64 * libm::sqrt(pmax * qmax) + cmax;
    Ok((omega.expm(), big))
}

/// `(cosh s, sinh s / s)` as functions of `s²`; both are even in `s`, so the
/// branch of the square root is irrelevant.
fn cosh_sinhc(s2: C64) -> (C64, C64) {
    if s2.norm() < 1e-3 {
        // Taylor to s^8 is below rounding for |s²| < 1e-3
        let ch = C64::new(1.0, 0.0) + s2 / 2.0 * (C64::new(1.0, 0.0) + s2 / 12.0 * (C64::new(1.0, 0.0) + s2 / 30.0 * (C64::new(1.0, 0.0) + s2 / 56.0)));
        let sh = C64::new(1.0, 0.0) + s2 / 6.0 * (C64::new(1.0, 0.0) + s2 / 20.0 * (C64::new(1.0, 0.0) + s2 / 42.0 * (C64::new(1.0, 0.0) + s2 / 72.0)));
        return (ch, sh);
    }
    let s = s2.sqrt();
    (s.cosh(), s.sinh() / s)
}

/// Output of [`magnus_fundamental`]: `E(x1)` as `value · e^{log_scale}`.
pub(crate) struct MagnusOutput {
    pub value: CMatrix,
    pub log_scale: f64,
    pub steps: usize,
}

/// Integrates `E' = D E`, `E(x0) = I` from `x0` to `x1` through the
/// (increasing) `stops`, calling `at_stop(x, E, log_scale)` at each.
pub(crate) fn magnus_fundamental<F, G>(
    r: usize,
    x0: f64,
    x1: f64,
    stops: &[f64],
    tol: Tolerances,
    mut eval: F,
    mut at_stop: G,
) -> Result<MagnusOutput>
where
    F: FnMut(f64) -> Result<Coeffs>,
    G: FnMut(f64, &CMatrix, f64),
{
    let n = 2 * r;
    let mut e = CMatrix::identity(n);
    let mut log_scale = 0.0;
    let span = x1 - x0;
    let mut h = span / 100.0;
    let mut x = x0;
    let mut steps = 0;
    at_stop(x0, &e, 0.0);
    for &target in stops.iter().chain(core::iter::once(&x1)) {
        if target <= x {
            continue;
        }
        while x < target {
            if steps >= MAX_STEPS {
                return Err(Error::ToleranceNotMet { steps });
            }
            let last = h >= target - x;
            let hh = if last { target - x } else { h };
            if hh < 1e-14 * span.abs().max(1e-300) && !last {
                return Err(Error::StepUnderflow { x });
            }
            let (big, wbig) = magnus_step(r, x, hh, &mut eval)?;
            if wbig > MAX_OMEGA {
                h = hh * 0.9 * MAX_OMEGA / wbig;
                continue;
            }
            let (half1, _) = magnus_step(r, x, hh / 2.0, &mut eval)?;
            let (half2, _) = magnus_step(r, x + hh / 2.0, hh / 2.0, &mut eval)?;
            let fine = half2.matmul(&half1);
            if !fine.is_finite() {
                return Err(Error::NonFinite { x });
            }
            let scale = fine.max_abs();
            let diff = fine.sub(&big).max_abs() / 15.0;
            // error per unit length, so the global error stays near `tol`
            let share = (hh / span).abs().max(0.01);
            let err = diff / ((tol.abs + tol.rel * scale) * share);
            steps += 1;
            if err <= 1.0 {
                // local Richardson extrapolation
                let step = fine.add(&fine.sub(&big).scale(C64::new(1.0 / 15.0, 0.0)));
                e = step.matmul(&e);
                x = if last { target } else { x + hh };
                let m = e.max_abs();
                if m > RESCALE_AT {
                    e = e.scale(C64::new(1.0 / m, 0.0));
                    log_scale += libm::log(m);
                }
                let fac = if err == 0.0 { 5.0 } else { (0.9 * libm::pow(err, -0.25)).clamp(0.2, 5.0) };
                // keep the nominal step when the last one was shortened to land
                // on a stop
                h = if last { h.max(hh * fac) } else { hh * fac };
            } else {
                h = hh * (0.9 * libm::pow(err, -0.25)).clamp(0.1, 0.9);
                if h < 1e-14 * span.abs() {
                    return Err(Error::StepUnderflow { x });
                }
            }
        }
        at_stop(target, &e, log_scale);
    }
    Ok(MagnusOutput {
        value: e,
        log_scale,
        steps,
    })
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrates `y' = f(x, y)` from `x0` to `x1` with Dormand–Prince 5(4),
/// landing exactly on each of the increasing `stops` and reporting the state
/// there through `at_stop(index, y)`.
pub(crate) fn dopri5<F, G>(
    x0: f64,
    x1: f64,
    y0: Vec<C64>,
    stops: &[f64],
    tol: Tolerances,
    mut f: F,
    mut at_stop: G,
) -> Result<Vec<C64>>
where
    F: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
    G: FnMut(usize, &[C64]),
{
    let dim = y0.len();
    let span = x1 - x0;
    let mut y = y0;
    let mut k: Vec<Vec<C64>> = vec![vec![C64::new(0.0, 0.0); dim]; 7];
    let mut tmp = vec![C64::new(0.0, 0.0); dim];
    let mut ynew = vec![C64::new(0.0, 0.0); dim];
    let mut x = x0;
    let mut h = span / 100.0;
    let mut err_prev: f64 = 1e-4;
    let mut steps = 0;
    f(x, &y, &mut k[0])?;
    let mut stop_idx = 0;
    while stop_idx < stops.len() && stops[stop_idx] <= x0 {
        at_stop(stop_idx, &y);
        stop_idx += 1;
    }
    while x < x1 {
        let target = if stop_idx < stops.len() { stops[stop_idx].min(x1) } else { x1 };
        if steps >= MAX_STEPS {
            return Err(Error::ToleranceNotMet { steps });
        }
        let last = h >= target - x;
        let hh = if last { target - x } else { h };
        for s in 1..7 {
            for i in 0..dim {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..s {
                    if A[s][j] != 0.0 {
                        acc += k[j][i] * A[s][j];
                    }
                }
                tmp[i] = y[i] + acc * hh;
            }
            let (done, rest) = k.split_at_mut(s);
            let _ = done;
            f(x + C[s] * hh, &tmp, &mut rest[0])?;
            if s == 6 {
                ynew.copy_from_slice(&tmp);
            }
        }
        steps += 1;
        let mut sum = 0.0;
        for i in 0..dim {
            let mut e = C64::new(0.0, 0.0);
            for j in 0..7 {
                if E[j] != 0.0 {
                    e += k[j][i] * E[j];
                }
            }
            let sc = tol.abs + tol.rel * y[i].norm().max(ynew[i].norm());
            sum += (e * hh).norm_sqr() / (sc * sc);
        }
        let err = libm::sqrt(sum / dim as f64);
        if !err.is_finite() {
            if ynew.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) && hh < 1e-14 * span.abs() {
                return Err(Error::NonFinite { x });
            }
            h = hh * 0.2;
            continue;
        }
        if err <= 1.0 {
            x = if last { target } else { x + hh };
            y.copy_from_slice(&ynew);
            let (first, rest) = k.split_at_mut(1);
            first[0].copy_from_slice(&rest[5]);
            let fac = if err == 0.0 {
                10.0
            } else {
                (0.9 * libm::pow(err, -0.17) * libm::pow(err_prev, 0.04)).clamp(0.2, 10.0)
            };
            err_prev = err.max(1e-4);
            h = if last { h.max(hh * fac.min(1.0)) } else { hh * fac };
            if last {
                while stop_idx < stops.len() && stops[stop_idx] <= x {
                    at_stop(stop_idx, &y);
                    stop_idx += 1;
                }
            }
        } else {
            h = hh * (0.9 * libm::pow(err, -0.2)).clamp(0.1, 0.9);
            if h < 1e-14 * span.abs() {
                return Err(Error::StepUnderflow { x });
            }
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: Tolerances = Tolerances {
        rel: 1e-12,
        abs: 1e-14,
    };

    #[test]
    fn magnus_harmonic_oscillator() {
        // u'' = -4 u on [0, 1]
        let out = magnus_fundamental(
            1,
            0.0,
            1.0,
            &[],
            TOL,
            |_| Ok((1.0, vec![C64::new(-4.0, 0.0)])),
            |_, _, _| {},
        )
        .unwrap();
        let e = out.value;
        assert!((e[(0, 0)].re - libm::cos(2.0)).abs() < 1e-13);
        assert!((e[(0, 1)].re - libm::sin(2.0) / 2.0).abs() < 1e-13);
        assert!((e[(1, 0)].re + 2.0 * libm::sin(2.0)).abs() < 1e-13);
    }

    #[test]
    fn magnus_variable_metric_matches_generic_path() {
        // the r = 1 closed form and the expm path must agree
        let eval1 = |x: f64| Ok((1.0 / (1.0 + x * x), vec![C64::new(x, 0.5)]));
        let eval2 = |x: f64| {
            let q = C64::new(x, 0.5);
            Ok((1.0 / (1.0 + x * x), vec![q, C64::new(0.0, 0.0), C64::new(0.0, 0.0), q]))
        };
        let a = magnus_fundamental(1, 0.0, 2.0, &[], TOL, eval1, |_, _, _| {}).unwrap();
        let b = magnus_fundamental(2, 0.0, 2.0, &[], TOL, eval2, |_, _, _| {}).unwrap();
        assert!((a.value[(0, 0)] - b.value[(0, 0)]).norm() < 1e-10);
        assert!((a.value[(1, 0)] - b.value[(2, 0)]).norm() < 1e-10);
        assert!((a.value.det() - 1.0).norm() < 1e-12);
    }

    #[test]
    fn dopri5_exponential_with_stops() {
        let mut seen = Vec::new();
        let y = dopri5(
            0.0,
            1.0,
            vec![C64::new(1.0, 0.0)],
            &[0.25, 0.5],
            TOL,
            |_, y, dy| {
                dy[0] = y[0];
                Ok(())
            },
            |i, y| seen.push((i, y[0].re)),
        )
        .unwrap();
        assert!((y[0].re - core::f64::consts::E).abs() < 1e-11);
        assert_eq!(seen.len(), 2);
        assert!((seen[0].1 - libm::exp(0.25)).abs() < 1e-12);
        assert!((seen[1].1 - libm::exp(0.5)).abs() < 1e-12);
    }
}
