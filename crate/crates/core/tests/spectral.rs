use std::f64::consts::PI;

use funcdet_core::corpus::{self, Case};
use funcdet_core::detratio::{ratio_no_zero_mode, secular_matrix};
use funcdet_core::oracle::{decay_exponent, find_eigenvalues, heat_a0, truncated_ratio, weyl_slope, WeylVerdict};
use funcdet_core::propagate::{fundamental_matrix, inner_product};
use funcdet_core::zeromode::{detect_zero_mode, proportionality_sides, ratio_zero_mode_detailed, zero_mode_analysis, SplitChoice};
use funcdet_core::{BoundaryConditions, Error, Problem, SolverSettings, C64};

fn s() -> SolverSettings {
    SolverSettings::default()
}

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

fn exact_ratio(c: &Case) -> f64 {
    if c.zero_mode {
        ratio_zero_mode_detailed(&c.p1, &c.p2, &c.bc, &s(), None).unwrap().0.value.re
    } else {
        ratio_no_zero_mode(&c.p1, &c.p2, &c.bc, &s()).unwrap().value.re
    }
}

/// Spectrum of the two-component example from its constant-coefficient
/// form: `u = (e^{iμx} a, e^{-iμx} b)` with `a`, `b` periodic, so each
/// Fourier mode `k = 2πn/l` gives a 2×2 Hermitian block.
fn start2_exact(count: usize) -> Vec<f64> {
    let mu = corpus::START2_MU;
    let l = corpus::START2_L;
    let mut out = Vec::new();
    for n in -40i32..=40 {
        let k = 2.0 * PI * n as f64 / l;
        let d1 = (k + mu) * (k + mu) + 1.0 - 2.0 * mu * mu;
        let d2 = (k - mu) * (k - mu) + 1.0 - 2.0 * mu * mu;
        let off = 1.0 - mu * mu;
        let mid = 0.5 * (d1 + d2);
        let rad = (0.25 * (d1 - d2) * (d1 - d2) + off * off).sqrt();
        out.push(mid - rad);
        out.push(mid + rad);
    }
    out.sort_by(f64::total_cmp);
    out.truncate(count);
    out
}

#[test]
fn start2_spectrum_matches_fourier_blocks() {
    let p = corpus::start2_problem();
    let spec = find_eigenvalues(&p, &corpus::start2_bc(), 20, None, &s()).unwrap();
    let got = spec.values();
    let want = start2_exact(got.len());
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() <= 1e-8 * (1.0 + w.abs()), "{g} vs {w}");
    }
    for e in &spec.eigenvalues {
        assert_eq!(e.multiplicity, e.nullity, "at {}", e.value);
    }
}

#[test]
fn self_adjoint_spectra_are_real_and_null() {
    for c in corpus::all_cases() {
        for p in [&c.p1, &c.p2] {
            let spec = find_eigenvalues(p, &c.bc, 12, None, &s()).unwrap();
            assert!(spec.max_imag_ratio <= 1e-6, "{}: {:e}", c.name, spec.max_imag_ratio);
            assert!(!spec.fallback, "{}", c.name);
            for e in &spec.eigenvalues {
                assert!(e.nullity >= 1, "{} at {}: {:?}", c.name, e.value, e.singular_values);
                assert_eq!(e.multiplicity, e.nullity, "{} at {}", c.name, e.value);
            }
        }
    }
}

#[test]
fn antiperiodic_double_zero_mode() {
    let p = Problem::scalar("1", "-pi^2", 0.0, 1.0).unwrap();
    let bc = BoundaryConditions::antiperiodic(1);
    assert_eq!(detect_zero_mode(&p, &bc, &s()).unwrap().multiplicity, 2);
    let spec = find_eigenvalues(&p, &bc, 4, None, &s()).unwrap();
    assert!(spec.eigenvalues[0].value.abs() < 1e-8);
    assert_eq!(spec.eigenvalues[0].multiplicity, 2);
}

#[test]
fn truncated_products_within_tail_bound() {
    for c in corpus::all_cases() {
        if c.name == "mismatched_metric" {
            continue;
        }
        let terms = match c.name.as_str() {
            "start2_pair" => 60,
            "variable_metric" => 200,
            _ => 400,
        };
        let t = truncated_ratio(&c.p1, &c.p2, &c.bc, terms, c.zero_mode, &s()).unwrap();
        let exact = exact_ratio(&c);
        assert!(
            (t.estimate - exact).abs() <= t.tail_bound,
            "{}: {} vs {exact}, bound {:e}",
            c.name,
            t.estimate,
            t.tail_bound
        );
        assert_eq!(t.zero_mode_skipped, c.zero_mode);
    }
}

#[test]
fn truncated_product_converges_monotonically() {
    let c = corpus::dirichlet_mass(1.0);
    let exact = exact_ratio(&c);
    let mut prev = f64::INFINITY;
    for terms in [25, 50, 100, 200, 400] {
        let t = truncated_ratio(&c.p1, &c.p2, &c.bc, terms, false, &s()).unwrap();
        let gap = exact - t.estimate;
        assert!(gap > 0.0 && gap < prev, "{terms} terms: gap {gap:e}, previous {prev:e}");
        prev = gap;
    }
}

#[test]
fn identical_operators() {
    let c = corpus::variable_metric();
    let t = truncated_ratio(&c.p1, &c.p1, &c.bc, 50, false, &s()).unwrap();
    assert_eq!(t.estimate, 1.0);
    assert_eq!(t.tail_bound, 0.0);
    assert!(matches!(
        decay_exponent(&c.p1, &c.p1, &c.bc, (1e2, 1e6), 16, &s()),
        Err(Error::FitDegenerate(_))
    ));
}

#[test]
fn zero_mode_needs_skipping() {
    let c = corpus::periodic_pair();
    assert!(truncated_ratio(&c.p1, &c.p2, &c.bc, 50, false, &s()).is_err());
    assert_eq!(
        truncated_ratio(&c.p2, &c.p1, &c.bc, 50, true, &s()),
        Err(Error::ReferenceZeroMode)
    );
}

#[test]
fn weyl_and_heat_coefficients() {
    let free = Problem::scalar("1", "0", 0.0, 1.0).unwrap();
    let spec = find_eigenvalues(&free, &BoundaryConditions::dirichlet(1), 40, None, &s()).unwrap();
    let fit = weyl_slope(&spec, &free);
    assert_eq!(fit.verdict, WeylVerdict::Consistent);
    assert!((fit.slope / PI - 1.0).abs() < 0.02);

    let stiff = Problem::scalar("4", "0", 0.0, 1.0).unwrap();
    let spec = find_eigenvalues(&stiff, &BoundaryConditions::dirichlet(1), 20, None, &s()).unwrap();
    let fit = weyl_slope(&spec, &stiff);
    assert!((fit.expected - 2.0 * PI).abs() < 1e-9);
    assert_eq!(fit.verdict, WeylVerdict::Consistent);

    let start2 = find_eigenvalues(&corpus::start2_problem(), &corpus::start2_bc(), 30, None, &s()).unwrap();
    assert_eq!(weyl_slope(&start2, &corpus::start2_problem()).verdict, WeylVerdict::Consistent);

    let inv = 1.0 / (4.0 * PI).sqrt();
    assert!((heat_a0(&free) - inv).abs() < 1e-12);
    assert!((heat_a0(&stiff) - 0.5 * inv).abs() < 1e-12);
    assert!((heat_a0(&corpus::variable_metric().p1) - inv * 2f64.ln()).abs() < 1e-10);
}

#[test]
fn decay_exponents() {
    for c in [corpus::dirichlet_mass(1.0), corpus::neumann_pair(), corpus::periodic_pair(), corpus::variable_metric()] {
        let rep = decay_exponent(&c.p1, &c.p2, &c.bc, (1e2, 1e6), 16, &s()).unwrap();
        assert!((rep.exponent + 1.5).abs() <= 0.15, "{}: {}", c.name, rep.exponent);
        assert!(rep.ci.0 <= rep.exponent && rep.exponent <= rep.ci.1);
    }
}

/// Eigenfunctions of `p1` at nonzero eigenvalues.
fn eigenfunctions(c: &Case, count: usize) -> Vec<(f64, Vec<C64>)> {
    let spec = find_eigenvalues(&c.p1, &c.bc, count + 2, None, &s()).unwrap();
    let mut out = Vec::new();
    for e in spec.eigenvalues.iter().filter(|e| e.value.abs() > 1e-6) {
        let l = C64::new(e.value, 0.0);
        let a = secular_matrix(&c.bc, &fundamental_matrix(&c.p1, l, &s()).unwrap().matrix());
        let ker = a.kernel(1e-6);
        for j in 0..ker.cols() {
            out.push((e.value, ker.column(j)));
        }
        if out.len() >= count {
            break;
        }
    }
    out.truncate(count);
    out
}

#[test]
fn zero_mode_is_orthogonal_to_other_eigenfunctions() {
    for c in [
        corpus::dirichlet_zero_mode(),
        corpus::robin_zero_mode(),
        corpus::twisted_scalar(),
        corpus::periodic_pair(),
        corpus::start2_pair(),
    ] {
        let zm = detect_zero_mode(&c.p1, &c.bc, &s()).unwrap();
        let y = zm.y1.as_ref().unwrap();
        let yy = zm.norm_sq;
        for (l, v) in eigenfunctions(&c, 5) {
            let lam = C64::new(l, 0.0);
            let overlap = inner_product(&c.p1, (zero(), &y.coeffs), (lam, &v), &s()).unwrap();
            let uu = inner_product(&c.p1, (lam, &v), (lam, &v), &s()).unwrap().re;
            assert!(
                overlap.norm() <= 1e-6 * (yy * uu).sqrt(),
                "{} at {l}: {:e}",
                c.name,
                overlap.norm()
            );
        }
    }
}

#[test]
fn proportionality_law_on_all_zero_mode_cases() {
    let lambdas = [-4.7, -3.1, -2.2, -1.4, -0.6, 0.3, 1.1, 2.5, 3.8, 4.9];
    for c in corpus::all_cases().into_iter().filter(|c| c.zero_mode) {
        let zm = zero_mode_analysis(&c.p1, &c.bc, &s(), None).unwrap();
        for l in lambdas {
            let (lhs, rhs) = proportionality_sides(&c.p1, &zm, C64::new(l, 0.0), &s()).unwrap();
            assert!((lhs - rhs).norm() <= 1e-7 * lhs.norm(), "{} at {l}: {lhs} vs {rhs}", c.name);
        }
    }
}

#[test]
fn split_invariance() {
    let c = corpus::start2_pair();
    let base = ratio_zero_mode_detailed(&c.p1, &c.p2, &c.bc, &s(), Some(SplitChoice::N)).unwrap();
    for choice in [SplitChoice::M, SplitChoice::Greedy] {
        let other = ratio_zero_mode_detailed(&c.p1, &c.p2, &c.bc, &s(), Some(choice)).unwrap();
        let (b0, b1) = (base.1.b.unwrap(), other.1.b.unwrap());
        assert!((b0 - b1).norm() <= 1e-8 * b0.norm(), "{choice:?}");
        assert!((base.0.value - other.0.value).norm() <= 1e-8 * base.0.value.norm(), "{choice:?}");
    }
    let expected = c.expected.unwrap();
    assert!((base.0.value.re - expected).abs() <= 1e-8 * expected);
    assert!(base.0.value.im.abs() <= 1e-10 * expected);
}
