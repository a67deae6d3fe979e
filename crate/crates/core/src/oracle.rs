//! Independent checks from the spectrum: eigenvalues located as roots of the
//! secular determinant, truncated eigenvalue products, Weyl growth, the
//! leading heat-kernel coefficient and the large-`|λ|` decay of the
//! logarithmic derivative of a determinant ratio.
//!
//! Nothing here uses the homogeneous-solution formulas, so agreement with
//! [`crate::detratio`] and [`crate::zeromode`] is a genuine cross-check.

use alloc::vec::Vec;

use crate::boundary::check_self_adjoint;
use crate::detratio::{check_pair, secular_matrix};
use crate::linalg::CMatrix;
use crate::model::{chebyshev_points, BoundaryConditions, Problem, SolverSettings};
use crate::propagate::fundamental_matrix;
use crate::quad::integrate;
use crate::zeromode::detect_zero_mode;
use crate::{Error, Result, C64};

/// Samples per expected eigenvalue spacing in `√λ`.
const SAMPLES_PER_SPACING: f64 = 4.0;
/// Integration tolerance for locating sign changes; roots are polished with
/// the caller's settings.
const SCAN_REL_TOL: f64 = 1e-8;
/// Relative imaginary part tolerated after phase normalization.
const IMAG_TOL: f64 = 1e-6;
/// Above this the spectrum is not real and the scan gives up.
const IMAG_GROSS: f64 = 1e-2;
/// Singular values below this fraction of the largest count as null.
const NULLITY_TOL: f64 = 1e-8;
/// Ceiling for the λ-dependent integration tolerance.
const MAX_TUNED_TOL: f64 = 1e-7;

/// One distinct eigenvalue.
#[derive(Clone, Debug, PartialEq)]
pub struct Eigenvalue {
    pub value: f64,
    pub multiplicity: usize,
    /// `|det(M + N E_λ(b))|` at the accepted root.
    pub residual: f64,
    /// Largest `|det|` at the neighbouring scan points.
    pub local_scale: f64,
    /// Singular values of the balanced `M + N E_λ(b)`, descending.
    pub singular_values: Vec<f64>,
    /// Number of those singular values that vanish at the root; should equal
    /// `multiplicity`.
    pub nullity: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<Eigenvalue>,
    /// Lower end of the scan.
    pub lambda_min: f64,
    /// Upper end actually reached.
    pub lambda_max: f64,
    /// Largest relative imaginary part of the phase-normalized secular
    /// function along the scan.
    pub max_imag_ratio: f64,
    /// Whether roots were polished on eigenphases because the secular
    /// function was not real.
    pub fallback: bool,
    pub evaluations: usize,
}

impl Spectrum {
    /// Eigenvalues repeated by multiplicity, ascending.
    pub fn values(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .flat_map(|e| core::iter::repeat_n(e.value, e.multiplicity))
            .collect()
    }

    pub fn total_multiplicity(&self) -> usize {
        self.eigenvalues.iter().map(|e| e.multiplicity).sum()
    }
}

/// `∫ dx / √P`.
pub fn metric_length(p: &Problem) -> f64 {
    let (a, b) = p.interval();
    integrate(&|x| 1.0 / libm::sqrt(p.p_at(x)), a, b, 1e-13 * (b - a))
}

/// Heuristic lower bound for the spectrum: Gershgorin bound of `R` over
/// sample points, minus a Robin allowance for scalar separated conditions,
/// minus one.
pub fn default_lambda_min(p: &Problem, bc: &BoundaryConditions) -> f64 {
    let (a, b) = p.interval();
    let r = p.r();
    let mut lo = f64::INFINITY;
    for x in chebyshev_points(a, b, 65) {
        let rm = p.r_at(x);
        for i in 0..r {
            let off: f64 = (0..r).filter(|&j| j != i).map(|j| rm[i * r + j].norm()).sum();
            lo = lo.min(rm[i * r + i].re - off);
        }
    }
    let mut margin = 0.0;
    if let Ok((ca, cb, cc, cd)) = crate::boundary::canonical_robin(bc) {
        // u'/u = -A/(B P) at a Robin end; kappa^2 bounds the boundary state
        let kappa = |u: C64, v: C64, x: f64| if v.norm() > 0.0 { (u / v).norm() / p.p_at(x) } else { 0.0 };
        let k = kappa(ca, cb, a).max(kappa(cc, cd, b));
        margin = k * k * p.p_at(a).max(p.p_at(b)) + 2.0 * k * p.p_at(a).max(p.p_at(b)) / (b - a);
    }
    lo - margin - 1.0
}

/// Maps the Lagrangian frame `(u_a, v_a, u_b, v_b)` (columns) to its unitary
/// `W = B A^{-1}`, where `A`, `B` are the components along the `±1`
/// eigenspaces of `i Ĵ`, `Ĵ = diag(-J, J)`.
fn lagrangian_unitary(frame: &CMatrix, r: usize) -> Option<CMatrix> {
    let n = 2 * r;
    let i = C64::new(0.0, 1.0);
    let mut a = CMatrix::zeros(n, frame.cols());
    let mut b = CMatrix::zeros(n, frame.cols());
    for c in 0..frame.cols() {
        for k in 0..r {
            let (ua, va) = (frame[(k, c)], frame[(r + k, c)]);
            let (ub, vb) = (frame[(n + k, c)], frame[(n + r + k, c)]);
            a[(k, c)] = ua - i * va;
            a[(r + k, c)] = ub + i * vb;
            b[(k, c)] = ua + i * va;
            b[(r + k, c)] = ub - i * vb;
        }
    }
    Some(b.matmul(&a.inverse()?))
}

/// Eigenphases of a unitary matrix in `(-π, π]`, ascending, through the
/// Cayley transform about the reference direction farthest from the
/// spectrum.
fn unitary_phases(u: &CMatrix) -> Vec<f64> {
    let n = u.rows();
    let pi = core::f64::consts::PI;
    let id = CMatrix::identity(n);
    let mut best = (0.0, -1.0);
    for k in 0..=n {
        let phi = 2.0 * pi * k as f64 / (n + 1) as f64;
        let d = id.scale(C64::from_polar(1.0, phi)).add(u).det().norm();
        if d > best.1 {
            best = (phi, d);
        }
    }
    let rot = C64::from_polar(1.0, best.0);
    let plus = id.scale(rot).add(u);
    let minus = id.scale(rot).sub(u);
    let inv = plus.inverse().expect("reference direction avoids the spectrum");
    // i (e^{iφ} - U)(e^{iφ} + U)^{-1} has eigenvalues tan((θ - φ)/2)
    let h = minus.matmul(&inv).scale(C64::new(0.0, 1.0));
    let mut out: Vec<f64> = h
        .hermitian_eigenvalues()
        .into_iter()
        .map(|t| {
            let th = best.0 + 2.0 * libm::atan(t);
            libm::remainder(th, 2.0 * pi)
        })
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// One evaluation of the boundary problem at real `λ`.
struct Sample {
    /// `√(λ - λ_lo)`.
    t: f64,
    /// Phase-normalized `det(M + N E)`.
    g: C64,
    /// Eigenphases of `W_K^H W_Γ(λ)`, in `(-π, π]`.
    phases: Vec<f64>,
}

impl Sample {
    fn arg_det(&self) -> f64 {
        self.phases.iter().sum()
    }
}

struct Secular<'a> {
    p: &'a Problem,
    bc: &'a BoundaryConditions,
    settings: &'a SolverSettings,
    scan: SolverSettings,
    /// `W_K^H` for the admissible boundary data `K`, balanced.
    wk_h: CMatrix,
    /// Frequency scale of the balancing, a power of 4.
    band: f64,
    /// `∫ dx/√P`.
    len: f64,
    lambda_lo: f64,
    phase: C64,
    evaluations: usize,
}

impl Secular<'_> {
    fn lambda(&self, t: f64) -> f64 {
        self.lambda_lo + t * t
    }

    /// An error `ε` in `E` moves a root by about `ε / (√λ ∫dx/√P)` in `√λ`,
    /// so the relative accuracy of large eigenvalues survives a looser
    /// integration tolerance.
    fn tuned(&self, base: &SolverSettings, lambda: f64) -> SolverSettings {
        let mut s = base.clone();
        let gain = (libm::sqrt(lambda.abs()) * self.len / 2.0).max(1.0);
        s.rel_tol = (base.rel_tol * gain).min(MAX_TUNED_TOL).max(base.rel_tol);
        s
    }

    /// Singular values below this fraction of the term size count as null.
    fn nullity_tol(&self, lambda: f64) -> f64 {
        NULLITY_TOL.max(100.0 * self.tuned(self.settings, lambda).rel_tol)
    }

    fn sample(&mut self, t: f64, fine: bool) -> Result<Sample> {
        self.evaluations += 1;
        let lambda = self.lambda(t);
        let base = if fine { self.settings } else { &self.scan };
        let fm = fundamental_matrix(self.p, C64::new(lambda, 0.0), &self.tuned(base, lambda))?;
        let e = fm.matrix();
        let g = secular_matrix(self.bc, &e).det() * self.phase;
        let n = e.rows();
        // frame [e^{-L} I; V] of the solution graph
        let shrink = libm::exp(-fm.log_scale);
        let mut frame = CMatrix::zeros(2 * n, n);
        for i in 0..n {
            frame[(i, i)] = C64::new(shrink, 0.0);
            for j in 0..n {
                frame[(n + i, j)] = fm.value[(i, j)];
            }
        }
        let w = lagrangian_unitary(&self.balance(frame), n / 2).ok_or(Error::NonFinite { x: lambda })?;
        let u = self.wk_h.matmul(&w);
        Ok(Sample {
            t,
            g,
            phases: unitary_phases(&u),
        })
    }

    /// Applies `(u, v) -> (u √ω, v / √ω)` at each end, `ω = √(Λ P)` with the
    /// frequency scale `Λ` of the current band. Without it the phases idle
    /// and then turn through `2π` in a window that narrows like `1/√λ`.
    fn balance(&self, mut frame: CMatrix) -> CMatrix {
        let r = self.p.r();
        let (a, b) = self.p.interval();
        for (end, x) in [(0, a), (2 * r, b)] {
            let s = libm::sqrt(libm::sqrt(self.band * self.p.p_at(x)));
            for c in 0..frame.cols() {
                for k in 0..r {
                    frame[(end + k, c)] *= s;
                    frame[(end + r + k, c)] /= s;
                }
            }
        }
        frame
    }

    /// Switches to the band of `λ`; returns whether it changed.
    fn set_band(&mut self, lambda: f64) -> Result<bool> {
        let band = band_of(lambda);
        if band == self.band {
            return Ok(false);
        }
        self.band = band;
        let kernel = self.balance(self.bc.stacked().kernel(1e-12));
        let wk = lagrangian_unitary(&kernel, self.p.r()).ok_or(Error::NotSelfAdjoint)?;
        self.wk_h = wk.conj_transpose();
        Ok(true)
    }

    fn g(&mut self, t: f64) -> Result<C64> {
        Ok(self.sample(t, true)?.g)
    }

    /// `M + N E` in balanced variables `(u, v/ω)`, `ω² ~ |λ| / P`, with rows
    /// normalized, and the size of its terms as the reference for a
    /// vanishing singular value (all of them vanish at a maximally
    /// degenerate root). Without balancing, a double root at large `λ` shows
    /// one singular value inflated by `ω`.
    fn matrix_scaled(&mut self, t: f64) -> Result<(CMatrix, f64)> {
        self.evaluations += 1;
        let lambda = self.lambda(t);
        let fm = fundamental_matrix(self.p, C64::new(lambda, 0.0), &self.tuned(self.settings, lambda))?;
        let (a, b) = self.p.interval();
        let pm = 0.5 * (self.p.p_at(a) + self.p.p_at(b));
        let omega = libm::sqrt(lambda.abs().max(1.0) / pm);
        let n = self.bc.m().rows();
        let r = n / 2;
        let mut sc = CMatrix::identity(n);
        for i in r..n {
            sc[(i, i)] = C64::new(omega, 0.0);
        }
        let ms = self.bc.m().matmul(&sc);
        let ns = self.bc.n().matmul(&sc);
        let nes = self.bc.n().matmul(&fm.matrix()).matmul(&sc);
        let mut out = ms.add(&nes);
        let mut scale: f64 = 0.0;
        for i in 0..n {
            let w: f64 = (0..n).map(|j| ms[(i, j)].norm_sqr() + ns[(i, j)].norm_sqr()).sum();
            let w = libm::sqrt(w);
            let mut terms = (0.0, 0.0);
            for j in 0..n {
                out[(i, j)] /= w;
                terms.0 += ms[(i, j)].norm() / w;
                terms.1 += nes[(i, j)].norm() / w;
            }
            scale = scale.max(terms.0).max(terms.1);
        }
        Ok((out, scale))
    }
}

/// Brent's root finder on a sign-changing bracket.
fn brent_root<F: FnMut(f64) -> Result<f64>>(mut f: F, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64) -> Result<f64> {
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 1e-300;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
    }
    Ok(b)
}

/// Locates the lowest `count` eigenvalues (counting multiplicity) at or
/// above `lambda_min` (a heuristic lower bound when `None`).
///
/// For self-adjoint conditions both the admissible boundary data and the
/// graph of solutions are Lagrangian subspaces, each the graph of a unitary
/// map. Eigenvalues are the `λ` where the relative unitary `U(λ)` has
/// eigenvalue 1, with multiplicity equal to the number of eigenphases
/// passing through zero. The eigenphases turn monotonically, so the count of
/// eigenvalues up to `λ` follows from the continuously tracked `arg det U`
/// and the phases at `λ`. Intervals holding more than one eigenvalue are
/// bisected until they isolate a single crossing or shrink onto a degenerate
/// root; simple roots are polished on the secular determinant, degenerate
/// ones on the crossing phases.
pub fn find_eigenvalues(
    p: &Problem,
    bc: &BoundaryConditions,
    count: usize,
    lambda_min: Option<f64>,
    settings: &SolverSettings,
) -> Result<Spectrum> {
    if bc.r() != p.r() {
        return Err(Error::Dimension(alloc::format!(
            "boundary matrices are for r = {}, problem has r = {}",
            bc.r(),
            p.r()
        )));
    }
    if !check_self_adjoint(bc)?.self_adjoint {
        return Err(Error::NotSelfAdjoint);
    }
    let r = p.r();
    let len = metric_length(p);
    let lambda_lo = lambda_min.unwrap_or_else(|| default_lambda_min(p, bc));
    let dt = core::f64::consts::PI / (len * r as f64 * SAMPLES_PER_SPACING);
    let weyl = |n: usize| {
        let s = core::f64::consts::PI * (n as f64 + 2.0) / (r as f64 * len);
        s * s
    };
    let mut t_max = libm::sqrt(weyl(count) + 2.0 * lambda_lo.abs() + 1.0);
    let t_budget = 4.0 * t_max + 10.0 * dt;

    let mut scan = settings.clone();
    scan.rel_tol = scan.rel_tol.max(SCAN_REL_TOL);
    let mut sec = Secular {
        p,
        bc,
        settings,
        scan,
        wk_h: CMatrix::zeros(2 * r, 2 * r),
        band: 0.0,
        len,
        lambda_lo,
        phase: C64::new(1.0, 0.0),
        evaluations: 0,
    };
    sec.set_band(lambda_lo)?;
    let first = sec.sample(0.0, false)?;
    sec.phase = if first.g.norm() > 0.0 { (first.g / first.g.norm()).conj() } else { C64::new(1.0, 0.0) };
    let first = Sample {
        g: first.g * sec.phase,
        ..first
    };

    let mut scanner = Scanner {
        lift: first.arg_det(),
        base: count_offset(&first.phases, first.arg_det()),
        prev: first,
        max_imag: 0.0,
    };
    let mut eigen: Vec<Eigenvalue> = Vec::new();
    let mut total = 0;
    let mut t = 0.0;
    while total < count {
        t += dt;
        if t > t_max {
            if t > t_budget {
                return Err(Error::CountNotReached {
                    found: total,
                    requested: count,
                    lambda_max: sec.lambda(t - dt),
                });
            }
            t_max = (t_max * 1.25).min(t_budget);
        }
        for (lo, hi, crossings) in scanner.advance(&mut sec, t)? {
            for e in isolate(&mut sec, &lo, &hi, crossings, dt)? {
                total += e.multiplicity;
                eigen.push(e);
            }
        }
    }
    eigen.sort_by(|a, b| a.value.total_cmp(&b.value));
    Ok(Spectrum {
        eigenvalues: eigen,
        lambda_min: lambda_lo,
        lambda_max: sec.lambda(t),
        max_imag_ratio: scanner.max_imag,
        fallback: scanner.max_imag > IMAG_TOL,
        evaluations: sec.evaluations,
    })
}

/// `(lift - Σ θ_j) / 2π` with phases taken in `[0, 2π)`: the number of
/// completed turns, offset by a constant.
fn count_offset(phases: &[f64], lift: f64) -> i64 {
    let two_pi = 2.0 * core::f64::consts::PI;
    let sum: f64 = phases.iter().map(|&th| if th < 0.0 { th + two_pi } else { th }).sum();
    libm::round((lift - sum) / two_pi) as i64
}

/// `4^k ≤ max(|λ|, 1)`, rounded down.
fn band_of(lambda: f64) -> f64 {
    let e = libm::floor(libm::log2(lambda.abs().max(1.0)) / 2.0);
    libm::exp2(2.0 * e)
}

/// Largest change of `arg det U` accepted between neighbouring samples.
const MAX_PHASE_STEP: f64 = core::f64::consts::FRAC_PI_2;
const BACKWARD_NOISE: f64 = 1e-6;

struct Scanner {
    /// Continuous `arg det U` at `prev`.
    lift: f64,
    base: i64,
    prev: Sample,
    max_imag: f64,
}

impl Scanner {
    fn count(&self, s: &Sample, lift: f64) -> i64 {
        count_offset(&s.phases, lift) - self.base
    }

    /// Moves the scan to `t`, refining where the phase turns fast, and
    /// returns the sample intervals that contain eigenvalues with their
    /// number.
    fn advance(&mut self, sec: &mut Secular<'_>, t: f64) -> Result<Vec<(Tracked, Tracked, usize)>> {
        let mut out = Vec::new();
        if sec.set_band(sec.lambda(t))? {
            // same count, new gauge
            let count = self.count(&self.prev, self.lift);
            self.prev = sec.sample(self.prev.t, false)?;
            self.lift = self.prev.arg_det();
            self.base = count_offset(&self.prev.phases, self.lift) - count;
        }
        let mut pending = alloc::vec![t];
        while let Some(target) = pending.pop() {
            let s = sec.sample(target, false)?;
            let step = libm::remainder(s.arg_det() - self.prev.arg_det(), 2.0 * core::f64::consts::PI);
            // the phases only turn forward, so a backward step hides a turn
            if !(-BACKWARD_NOISE..=MAX_PHASE_STEP).contains(&step) && target - self.prev.t > 1e-9 * (1.0 + target) {
                pending.push(target);
                pending.push(0.5 * (self.prev.t + target));
                continue;
            }
            let local = self.prev.g.norm().max(s.g.norm());
            if local > 0.0 {
                let ratio = s.g.im.abs() / local;
                self.max_imag = self.max_imag.max(ratio);
                if ratio > IMAG_GROSS {
                    return Err(Error::ImaginaryResidue { ratio });
                }
            }
            let lift = self.lift + step;
            let before = self.count(&self.prev, self.lift);
            let after = self.count(&s, lift);
            if after < before {
                return Err(Error::NonFinite { x: sec.lambda(target) });
            }
            if after > before {
                let lo = Tracked::new(&self.prev, self.lift, before);
                let hi = Tracked::new(&s, lift, after);
                out.push((lo, hi, (after - before) as usize));
            }
            self.lift = lift;
            self.prev = s;
        }
        Ok(out)
    }
}

/// A sample together with its continuous phase and eigenvalue count.
#[derive(Clone)]
struct Tracked {
    t: f64,
    g: C64,
    lift: f64,
    count: i64,
    phases: Vec<f64>,
}

impl Tracked {
    fn new(s: &Sample, lift: f64, count: i64) -> Self {
        Self {
            t: s.t,
            g: s.g,
            lift,
            count,
            phases: s.phases.clone(),
        }
    }
}

/// Splits `(lo, hi]` holding `crossings` eigenvalues into single roots or a
/// degenerate cluster and polishes each.
fn isolate(sec: &mut Secular<'_>, lo: &Tracked, hi: &Tracked, crossings: usize, dt: f64) -> Result<Vec<Eigenvalue>> {
    let local = lo.g.norm().max(hi.g.norm());
    let narrow = hi.t - lo.t <= 1e-7 * dt;
    if crossings == 1 || narrow {
        let (fl, fr) = (sec.g(lo.t)?.re, sec.g(hi.t)?.re);
        let root = if crossings % 2 == 1 && (fl > 0.0) != (fr > 0.0) && sec.phase_is_real(local, lo, hi) {
            brent_root(|t| Ok(sec.g(t)?.re), lo.t, hi.t, fl, fr)?
        } else {
            polish_on_phases(sec, lo, hi, crossings)?
        };
        return Ok(alloc::vec![accept(sec, root, crossings, local)?]);
    }
    let tm = 0.5 * (lo.t + hi.t);
    let s = sec.sample(tm, false)?;
    // arg det U moves by less than the refinement bound inside a scan step
    let step = libm::remainder(s.arg_det() - lo.phases.iter().sum::<f64>(), 2.0 * core::f64::consts::PI);
    let lift = lo.lift + step;
    let count = lo.count + count_offset(&s.phases, lift) - count_offset(&lo.phases, lo.lift);
    let mid = Tracked::new(&s, lift, count);
    let mut out = Vec::new();
    if mid.count > lo.count {
        out.extend(isolate(sec, lo, &mid, (mid.count - lo.count) as usize, dt)?);
    }
    if hi.count > mid.count {
        out.extend(isolate(sec, &mid, hi, (hi.count - mid.count) as usize, dt)?);
    }
    Ok(out)
}

impl Secular<'_> {
    fn phase_is_real(&self, local: f64, lo: &Tracked, hi: &Tracked) -> bool {
        local > 0.0 && lo.g.im.abs().max(hi.g.im.abs()) <= IMAG_TOL * local
    }
}

/// Root of the sum of the `m` eigenphases nearest zero, which cross zero
/// together at a degenerate root.
fn polish_on_phases(sec: &mut Secular<'_>, lo: &Tracked, hi: &Tracked, m: usize) -> Result<f64> {
    fn crossing_sum(phases: &[f64], m: usize) -> f64 {
        let mut v: Vec<f64> = phases.to_vec();
        v.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
        v.iter().take(m).sum()
    }
    let (fl, fr) = (crossing_sum(&lo.phases, m), crossing_sum(&hi.phases, m));
    if (fl > 0.0) == (fr > 0.0) {
        return Ok(0.5 * (lo.t + hi.t));
    }
    brent_root(|t| Ok(crossing_sum(&sec.sample(t, true)?.phases, m)), lo.t, hi.t, fl, fr)
}

fn accept(sec: &mut Secular<'_>, t: f64, multiplicity: usize, local_scale: f64) -> Result<Eigenvalue> {
    let (a, scale) = sec.matrix_scaled(t)?;
    let singular_values = a.singular_values();
    let tol = sec.nullity_tol(sec.lambda(t)) * scale;
    let fm = fundamental_matrix(sec.p, C64::new(sec.lambda(t), 0.0), &sec.tuned(sec.settings, sec.lambda(t)))?;
    Ok(Eigenvalue {
        value: sec.lambda(t),
        multiplicity,
        residual: secular_matrix(sec.bc, &fm.matrix()).det().norm(),
        local_scale,
        nullity: singular_values.iter().filter(|&&x| x <= tol).count(),
        singular_values,
    })
}

/// Truncated eigenvalue-product estimate of a determinant ratio.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedRatio {
    pub estimate: f64,
    /// Bound on the neglected tail of the product.
    pub tail_bound: f64,
    pub terms: usize,
    /// Whether a zero eigenvalue of the first operator was dropped.
    pub zero_mode_skipped: bool,
    pub warnings: Vec<alloc::string::String>,
}

/// Interval average of `tr R / r` in the Liouville variable `dt = dx/√P`.
fn mean_potential(p: &Problem) -> f64 {
    let (a, b) = p.interval();
    let r = p.r();
    let f = |x: f64| {
        let rm = p.r_at(x);
        let tr: f64 = (0..r).map(|i| rm[i * r + i].re).sum();
        tr / r as f64 / libm::sqrt(p.p_at(x))
    };
    integrate(&f, a, b, 1e-12 * (b - a)) / metric_length(p)
}

/// `∏_{n<terms} λ_{1,n} / λ_{2,n}` pairing eigenvalues by sorted index. With
/// `skip_zero_mode`, the zero eigenvalue of `p1` is dropped and its partner
/// contributes `1/λ_{2,n}`. The tail bound comes from
/// `Σ_{n>terms} |R̄1 - R̄2| / λ_{2,n}` with Weyl-law eigenvalues.
pub fn truncated_ratio(
    p1: &Problem,
    p2: &Problem,
    bc: &BoundaryConditions,
    terms: usize,
    skip_zero_mode: bool,
    settings: &SolverSettings,
) -> Result<TruncatedRatio> {
    let warnings = check_pair(p1, p2, bc, settings)?;
    if terms < 2 {
        return Err(Error::InvalidProblem("truncated product needs at least two terms".into()));
    }
    let z1 = detect_zero_mode(p1, bc, settings)?;
    let z2 = detect_zero_mode(p2, bc, settings)?;
    if z2.multiplicity > 0 {
        return Err(Error::ReferenceZeroMode);
    }
    let has_zero = z1.multiplicity > 0;
    if has_zero && !skip_zero_mode {
        let a = z1.singular_values.last().copied().unwrap_or(0.0);
        return Err(Error::ZeroModeDetected {
            det_abs: a,
            guard: settings.zero_mode_tol * z1.singular_values.first().copied().unwrap_or(0.0),
        });
    }
    if z1.multiplicity > 1 {
        return Err(Error::DegenerateZeroMode {
            multiplicity: z1.multiplicity,
        });
    }
    let lo = default_lambda_min(p1, bc).min(default_lambda_min(p2, bc));
    let s1 = find_eigenvalues(p1, bc, terms, Some(lo), settings)?.values();
    let s2 = find_eigenvalues(p2, bc, terms, Some(lo), settings)?.values();
    let zero_idx = if has_zero {
        Some(
            (0..terms)
                .min_by(|&i, &j| s1[i].abs().total_cmp(&s1[j].abs()))
                .expect("terms >= 2"),
        )
    } else {
        None
    };
    let mut log_abs = 0.0;
    let mut negative = false;
    for n in 0..terms {
        let num = if Some(n) == zero_idx { 1.0 } else { s1[n] };
        let q = num / s2[n];
        log_abs += libm::log(q.abs());
        negative ^= q < 0.0;
    }
    let estimate = if negative { -libm::exp(log_abs) } else { libm::exp(log_abs) };
    let r = p1.r() as f64;
    let len = metric_length(p2);
    let dr = (mean_potential(p1) - mean_potential(p2)).abs();
    let w = r * len / core::f64::consts::PI;
    let tail_sum = dr * w * w / (terms as f64 - 1.0);
    // 1.5 covers the subleading corrections to the Weyl estimate
    let tail_bound = estimate.abs() * (libm::exp(1.5 * tail_sum) - 1.0);
    Ok(TruncatedRatio {
        estimate,
        tail_bound,
        terms,
        zero_mode_skipped: has_zero,
        warnings,
    })
}

/// `a0 = (4π)^{-1/2} ∫ dx / √P`.
pub fn heat_a0(p: &Problem) -> f64 {
    metric_length(p) / libm::sqrt(4.0 * core::f64::consts::PI)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeylVerdict {
    Consistent,
    Inconsistent,
    Insufficient,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeylFit {
    pub slope: f64,
    /// `π / (r ∫ dx/√P)`.
    pub expected: f64,
    /// Standard error of the slope (infinite with fewer than three points).
    pub stderr: f64,
    pub points: usize,
    pub verdict: WeylVerdict,
}

/// Least-squares slope of `√λ_l` against `l` over the upper half of the
/// spectrum, compared with the Weyl rate.
pub fn weyl_slope(spec: &Spectrum, p: &Problem) -> WeylFit {
    let expected = core::f64::consts::PI / (p.r() as f64 * metric_length(p));
    let vals = spec.values();
    let pts: Vec<(f64, f64)> = vals
        .iter()
        .enumerate()
        .skip(vals.len() / 2)
        .filter(|(_, &v)| v > 0.0)
        .map(|(i, &v)| ((i + 1) as f64, libm::sqrt(v)))
        .collect();
    let fit = linear_fit(&pts);
    let (slope, stderr) = fit.map_or((f64::NAN, f64::INFINITY), |f| (f.slope, f.stderr));
    let verdict = if vals.len() < 10 || pts.len() < 3 {
        WeylVerdict::Insufficient
    } else if (slope / expected - 1.0).abs() <= 0.02 {
        WeylVerdict::Consistent
    } else {
        WeylVerdict::Inconsistent
    };
    WeylFit {
        slope,
        expected,
        stderr,
        points: pts.len(),
        verdict,
    }
}

struct LineFit {
    slope: f64,
    stderr: f64,
}

fn linear_fit(pts: &[(f64, f64)]) -> Option<LineFit> {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let stderr = if pts.len() > 2 {
        let ssr: f64 = pts
            .iter()
            .map(|p| {
                let d = p.1 - my - slope * (p.0 - mx);
                d * d
            })
            .sum();
        libm::sqrt(ssr / (n - 2.0) / sxx)
    } else {
        f64::INFINITY
    };
    Some(LineFit { slope, stderr })
}

/// Large-`|λ|` behaviour of `h(t) = ln|det_1(-t)| - ln|det_2(-t)|`.
#[derive(Clone, Debug, PartialEq)]
pub struct AsymptoticsReport {
    /// Fitted exponent `k` in `|dh/dt| ~ t^k`.
    pub exponent: f64,
    pub stderr: f64,
    /// 95% confidence interval of the exponent.
    pub ci: (f64, f64),
    /// `(t, dh/dt)` at the fitted points.
    pub points: Vec<(f64, f64)>,
    pub a0_1: f64,
    pub a0_2: f64,
}

/// Determinant of the submatrix on the given rows and columns.
fn sub_det(a: &CMatrix, rows: &[usize], cols: &[usize]) -> C64 {
    if rows.is_empty() {
        return C64::new(1.0, 0.0);
    }
    let data = rows.iter().flat_map(|&i| cols.iter().map(move |&j| a[(i, j)])).collect();
    CMatrix::from_vec(rows.len(), cols.len(), data).expect("square selection").det()
}

fn bits(mask: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| mask & (1 << i) != 0).collect()
}

fn index_sum(v: &[usize]) -> usize {
    v.iter().sum()
}

/// `ln |det(M + N E_λ(b))|` at real `λ`, for entries of `E` far beyond the
/// floating-point range and without the cancellation a direct determinant
/// suffers when the result is much smaller than the products of entries.
///
/// With `E = e^L V`, Cauchy–Binet on `[M | N] [I; E]` expands the
/// determinant in minors of `E`. A `k × k` minor grows like `e^{min(k, 2r-k) L}`;
/// those with `k > r` are recovered from minors of `E^{-1} = J^{-1} E^H J`
/// (Jacobi's identity, `det E = 1`) since direct evaluation loses them to
/// cancellation.
fn log_abs_secular(p: &Problem, bc: &BoundaryConditions, lambda: f64, settings: &SolverSettings) -> Result<f64> {
    let fm = fundamental_matrix(p, C64::new(lambda, 0.0), settings)?;
    let n = bc.m().rows();
    let r = n / 2;
    let v = &fm.value;
    let mut j = CMatrix::zeros(n, n);
    for i in 0..r {
        j[(i, i + r)] = C64::new(1.0, 0.0);
        j[(i + r, i)] = C64::new(-1.0, 0.0);
    }
    let w = j.scale(C64::new(-1.0, 0.0)).matmul(&v.conj_transpose()).matmul(&j);
    let ab = bc.stacked();
    let mut terms: Vec<(usize, C64)> = Vec::new();
    for mask in 0u32..(1 << (2 * n)) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let cols = bits(mask, 2 * n);
        let coef = sub_det(&ab, &(0..n).collect::<Vec<_>>(), &cols);
        if coef == C64::new(0.0, 0.0) {
            continue;
        }
        let s1: Vec<usize> = cols.iter().copied().filter(|&c| c < n).collect();
        let s2: Vec<usize> = cols.iter().filter(|&&c| c >= n).map(|&c| c - n).collect();
        let comp: Vec<usize> = (0..n).filter(|c| !s1.contains(c)).collect();
        let perm_sign = (0..s1.len()).map(|i| s1[i] - i).sum::<usize>() % 2;
        let k = s2.len();
        let (minor, grow) = if k <= r {
            (sub_det(v, &s2, &comp), k)
        } else {
            let rows_c: Vec<usize> = (0..n).filter(|c| !comp.contains(c)).collect();
            let cols_c: Vec<usize> = (0..n).filter(|c| !s2.contains(c)).collect();
            let sign = (index_sum(&s2) + index_sum(&comp)) % 2;
            let m = sub_det(&w, &rows_c, &cols_c);
            (if sign == 1 { -m } else { m }, n - k)
        };
        let val = coef * if perm_sign == 1 { -minor } else { minor };
        terms.push((grow, val));
    }
    let top = terms.iter().filter(|t| t.1.norm() > 0.0).map(|t| t.0).max().unwrap_or(0);
    let total: C64 = terms
        .iter()
        .map(|&(g, c)| c * libm::exp(-((top - g) as f64) * fm.log_scale))
        .sum();
    Ok(top as f64 * fm.log_scale + libm::log(total.norm()))
}

/// Fits the decay exponent of `|dh/dt|` on a geometric grid of `t_points`
/// values spanning `[t_lo, t_hi]` (central differences in `ln t`). When the
/// two metrics agree the leading behaviour is `t^{-3/2}`.
pub fn decay_exponent(
    p1: &Problem,
    p2: &Problem,
    bc: &BoundaryConditions,
    (t_lo, t_hi): (f64, f64),
    t_points: usize,
    settings: &SolverSettings,
) -> Result<AsymptoticsReport> {
    if p1.r() != p2.r() || bc.r() != p1.r() || p1.interval() != p2.interval() {
        return Err(Error::Dimension("problems and boundary conditions do not match".into()));
    }
    if t_points < 8 || !(t_lo > 0.0 && t_hi > t_lo) {
        return Err(Error::FitDegenerate("need at least 8 points on a positive range"));
    }
    let delta = 0.01;
    let h = |t: f64| -> Result<(f64, f64)> {
        let l1 = log_abs_secular(p1, bc, -t, settings)?;
        let l2 = log_abs_secular(p2, bc, -t, settings)?;
        Ok((l1 - l2, l1.abs().max(l2.abs())))
    };
    let step = libm::log(t_hi / t_lo) / (t_points - 1) as f64;
    let mut raw = Vec::with_capacity(t_points);
    let mut noise_scale: f64 = 0.0;
    for i in 0..t_points {
        let t = t_lo * libm::exp(step * i as f64);
        let (hp, sp) = h(t * libm::exp(delta))?;
        let (hm, sm) = h(t * libm::exp(-delta))?;
        noise_scale = noise_scale.max(sp).max(sm);
        raw.push((t, (hp - hm) / (2.0 * delta) / t, (hp - hm).abs()));
    }
    // differences at rounding level carry no information
    let floor = 1e-11 * noise_scale.max(1.0);
    let points: Vec<(f64, f64)> = raw.iter().filter(|p| p.2 > floor).map(|p| (p.0, p.1)).collect();
    if points.len() < 8 {
        return Err(Error::FitDegenerate("identical problems: derivative below the noise floor"));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(t, d)| (libm::log(t), libm::log(d.abs()))).collect();
    let fit = linear_fit(&logs).ok_or(Error::FitDegenerate("grid has no spread"))?;
    let half = 1.96 * fit.stderr;
    Ok(AsymptoticsReport {
        exponent: fit.slope,
        stderr: fit.stderr,
        ci: (fit.slope - half, fit.slope + half),
        points,
        a0_1: heat_a0(p1),
        a0_2: heat_a0(p2),
    })
}
