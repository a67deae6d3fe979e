//! Subcommands and their text and JSON renderings.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};
use funcdet_core::boundary::check_self_adjoint;
use funcdet_core::detratio::{ratio_no_zero_mode, ratio_via_bc_row};
use funcdet_core::model::validate_problem;
use funcdet_core::oracle::{find_eigenvalues, heat_a0, truncated_ratio, weyl_slope, WeylVerdict};
use funcdet_core::zeromode::{detect_zero_mode, ratio_zero_mode_detailed, zero_mode_analysis, SplitChoice};
use funcdet_core::{BcKind, Error, RatioMethod, ZeroModeResult};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{load_problem_pair, Config, ConfigError};
use crate::report::{complex_vec, error_kind, exit_code, nums, Complex, ErrorInfo, Num, RunReport, Status};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_COMPUTATION: i32 = 2;
pub const EXIT_VERIFY_FAIL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "funcdet", version, about = "Ratios of functional determinants of Sturm-Liouville operators")]
pub struct Cli {
    /// Emit a JSON report instead of text
    #[arg(long, global = true)]
    pub json: bool,
    /// Print only the headline result
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Include wall-clock time in the output
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// det L1 / det L2, or det' L1 / det L2 when L1 has a zero mode
    Ratio { config: PathBuf },
    /// Classify the boundary conditions and validate both problems
    Check { config: PathBuf },
    /// Lowest eigenvalues of one of the operators
    Eigenvalues {
        config: PathBuf,
        #[arg(long)]
        count: usize,
        /// Lower end of the search; defaults to a bound from the potential
        #[arg(long, allow_negative_numbers = true)]
        lambda_min: Option<f64>,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        problem: u8,
    },
    /// Zero-mode multiplicity, boundary data of y1, its norm and B
    ZeroMode {
        config: PathBuf,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
        problem: u8,
    },
    /// Compare the boundary formula with a truncated eigenvalue product
    Verify {
        config: PathBuf,
        /// Number of eigenvalue pairs; defaults to `oracle_terms`
        #[arg(long)]
        terms: Option<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ratio { .. } => "ratio",
            Command::Check { .. } => "check",
            Command::Eigenvalues { .. } => "eigenvalues",
            Command::ZeroMode { .. } => "zero-mode",
            Command::Verify { .. } => "verify",
        }
    }

    fn config(&self) -> &PathBuf {
        match self {
            Command::Ratio { config }
            | Command::Check { config }
            | Command::Eigenvalues { config, .. }
            | Command::ZeroMode { config, .. }
            | Command::Verify { config, .. } => config,
        }
    }
}

/// What a finished command hands back to `main`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

struct Failure {
    code: i32,
    info: ErrorInfo,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(&e),
            info: ErrorInfo {
                kind: error_kind(&e).into(),
                message: capitalize(&e.to_string()),
            },
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        let code = match &e {
            ConfigError::Problem(inner) => exit_code(inner),
            _ => EXIT_VALIDATION,
        };
        Failure {
            code,
            info: ErrorInfo {
                kind: e.kind().into(),
                message: e.to_string(),
            },
        }
    }
}

/// A command's outcome before rendering.
struct Done<T> {
    status: Status,
    code: i32,
    result: Option<T>,
    error: Option<ErrorInfo>,
    text: String,
    headline: String,
}

impl<T> Done<T> {
    fn ok(result: T, headline: String, text: String) -> Self {
        Done {
            status: Status::Ok,
            code: EXIT_OK,
            result: Some(result),
            error: None,
            text,
            headline,
        }
    }
}

fn num(x: f64) -> String {
    if x != 0.0 && !(1e-4..1e16).contains(&x.abs()) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn complex_text(z: funcdet_core::C64) -> String {
    if z.im == 0.0 {
        num(z.re)
    } else if z.im > 0.0 {
        format!("{}+{}i", num(z.re), num(z.im))
    } else {
        format!("{}-{}i", num(z.re), num(-z.im))
    }
}

fn kind_name(k: BcKind) -> &'static str {
    match k {
        BcKind::Separated => "separated",
        BcKind::NonSeparated => "non_separated",
    }
}

// ---- ratio ----

#[derive(Serialize)]
pub struct ZeroModeSummary {
    pub multiplicity: usize,
    pub norm_sq: Num,
    pub b: Option<Complex>,
    pub f10: Option<Complex>,
}

#[derive(Serialize)]
pub struct CrossCheck {
    pub method: &'static str,
    pub ratio: Complex,
    pub rel_diff: Num,
}

#[derive(Serialize)]
pub struct RatioPayload {
    pub method: &'static str,
    pub ratio: Complex,
    pub det1: Complex,
    pub det2: Complex,
    pub zero_mode: Option<ZeroModeSummary>,
    pub cross_check: Option<CrossCheck>,
}

fn method_name(m: RatioMethod) -> &'static str {
    match m {
        RatioMethod::Result1 => "secular_determinant",
        RatioMethod::Result2 => "boundary_row",
        RatioMethod::ZeroMode => "zero_mode",
    }
}

/// Shown per problem in text output and error messages.
const SHOWN_VIOLATIONS: usize = 3;

fn summarize(problem: usize, violations: &[String]) -> String {
    let shown = violations.iter().take(SHOWN_VIOLATIONS).cloned().collect::<Vec<_>>().join("; ");
    match violations.len().saturating_sub(SHOWN_VIOLATIONS) {
        0 => format!("problem.{problem}: {shown}"),
        more => format!("problem.{problem}: {shown}; {more} more"),
    }
}

fn require_valid(cfg: &Config) -> Result<(), Failure> {
    let mut problems = Vec::new();
    for (k, p) in [&cfg.p1, &cfg.p2].into_iter().enumerate() {
        let v = validate_problem(p, cfg.settings.samples).violations();
        if !v.is_empty() {
            problems.push(summarize(k + 1, &v));
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_VALIDATION,
            info: ErrorInfo {
                kind: "invalid_problem".into(),
                message: problems.join("; "),
            },
        })
    }
}

fn ratio(cfg: &Config, warnings: &mut Vec<String>) -> Result<Done<RatioPayload>, Failure> {
    require_valid(cfg)?;
    let s = &cfg.settings;
    let zm = detect_zero_mode(&cfg.p1, &cfg.bc, s)?;
    match zm.multiplicity {
        0 => {
            let r = ratio_no_zero_mode(&cfg.p1, &cfg.p2, &cfg.bc, s)?;
            warnings.extend(r.warnings.iter().cloned());
            let cross_check = if cfg.p1.r() == 1 {
                let other = ratio_via_bc_row(&cfg.p1, &cfg.p2, &cfg.bc, s)?;
                Some(CrossCheck {
                    method: method_name(other.method),
                    ratio: other.value.into(),
                    rel_diff: Num((other.value - r.value).norm() / r.value.norm()),
                })
            } else {
                None
            };
            let headline = format!("det L1/det L2 = {}", complex_text(r.value));
            let mut text = format!("{headline}\ndet(M + N Y1(b)) = {}\ndet(M + N Y2(b)) = {}\n", complex_text(r.det1), complex_text(r.det2));
            if let Some(cc) = &cross_check {
                let _ = writeln!(text, "boundary-row formula agrees to {:.2e} relative", cc.rel_diff.0);
            }
            Ok(Done::ok(
                RatioPayload {
                    method: method_name(r.method),
                    ratio: r.value.into(),
                    det1: r.det1.into(),
                    det2: r.det2.into(),
                    zero_mode: None,
                    cross_check,
                },
                headline,
                text,
            ))
        }
        1 => {
            let (r, zm) = ratio_zero_mode_detailed(&cfg.p1, &cfg.p2, &cfg.bc, s, None)?;
            warnings.extend(r.warnings.iter().cloned());
            let headline = format!(
                "zero mode detected (multiplicity 1); det' L1/det L2 = {}",
                complex_text(r.value)
            );
            let b = zm.b.expect("analysis fills B");
            let text = format!(
                "{headline}\nB = {}\n<y1|y1> = {}\ndet(M + N Y2(b)) = {}\n",
                complex_text(b),
                num(zm.norm_sq),
                complex_text(r.det2)
            );
            Ok(Done::ok(
                RatioPayload {
                    method: method_name(r.method),
                    ratio: r.value.into(),
                    det1: r.det1.into(),
                    det2: r.det2.into(),
                    zero_mode: Some(ZeroModeSummary {
                        multiplicity: 1,
                        norm_sq: Num(zm.norm_sq),
                        b: zm.b.map(Into::into),
                        f10: zm.f10.map(Into::into),
                    }),
                    cross_check: None,
                },
                headline,
                text,
            ))
        }
        m => Err(Error::DegenerateZeroMode { multiplicity: m }.into()),
    }
}

// ---- check ----

#[derive(Serialize)]
pub struct Diagnostics {
    pub det_m_abs: Num,
    pub det_n_abs: Num,
    pub det_threshold: Num,
    pub self_adjoint_residual: Num,
    pub lagrangian_residual: Num,
    pub entrywise_residual: Option<Num>,
    pub heuristic_extension: bool,
}

#[derive(Serialize)]
pub struct ProblemValidation {
    pub problem: usize,
    pub valid: bool,
    pub violations: Vec<String>,
    pub hermiticity_residual: Num,
}

#[derive(Serialize)]
pub struct CheckPayload {
    pub r: usize,
    pub interval: [Num; 2],
    pub kind: &'static str,
    pub self_adjoint: bool,
    pub phase_alpha: Option<Num>,
    pub robin: Option<Vec<Complex>>,
    pub diagnostics: Diagnostics,
    pub validation: Vec<ProblemValidation>,
}

fn check(cfg: &Config) -> Result<Done<CheckPayload>, Failure> {
    let cls = check_self_adjoint(&cfg.bc)?;
    let validation: Vec<ProblemValidation> = [&cfg.p1, &cfg.p2]
        .into_iter()
        .enumerate()
        .map(|(k, p)| {
            let rep = validate_problem(p, cfg.settings.samples);
            ProblemValidation {
                problem: k + 1,
                valid: rep.is_valid(),
                violations: rep.violations(),
                hermiticity_residual: Num(rep.hermiticity_residual),
            }
        })
        .collect();
    let d = &cls.diagnostics;
    let (a, b) = cfg.p1.interval();
    let payload = CheckPayload {
        r: cfg.p1.r(),
        interval: [Num(a), Num(b)],
        kind: kind_name(cls.kind),
        self_adjoint: cls.self_adjoint,
        phase_alpha: cls.phase_alpha.map(Num),
        robin: cls.robin.map(|v| complex_vec(&v)),
        diagnostics: Diagnostics {
            det_m_abs: Num(d.det_m_abs),
            det_n_abs: Num(d.det_n_abs),
            det_threshold: Num(d.det_threshold),
            self_adjoint_residual: Num(d.self_adjoint_residual),
            lagrangian_residual: Num(d.lagrangian_residual),
            entrywise_residual: d.entrywise_residual.map(Num),
            heuristic_extension: d.heuristic_extension,
        },
        validation,
    };
    let headline = format!(
        "{} boundary conditions, {}",
        kind_name(cls.kind).replace('_', "-"),
        if cls.self_adjoint { "self-adjoint" } else { "not self-adjoint" }
    );
    let mut text = format!("{headline}\n");
    if let Some(alpha) = cls.phase_alpha {
        let _ = writeln!(text, "phase alpha = {}", num(alpha));
    }
    if let Some(rb) = cls.robin {
        let _ = writeln!(
            text,
            "Robin form: ({}) u(a) + ({}) v(a) = 0, ({}) u(b) + ({}) v(b) = 0",
            complex_text(rb[0]),
            complex_text(rb[1]),
            complex_text(rb[2]),
            complex_text(rb[3])
        );
    }
    let _ = writeln!(text, "|det M| = {:e}, |det N| = {:e}, threshold {:e}", d.det_m_abs, d.det_n_abs, d.det_threshold);
    let _ = writeln!(text, "self-adjointness residual {:e}", d.self_adjoint_residual);
    if d.heuristic_extension {
        let _ = writeln!(text, "note: entrywise test for r > 1 is a heuristic extension of the scalar criterion");
    }
    let mut invalid = Vec::new();
    for v in &payload.validation {
        if v.valid {
            let _ = writeln!(text, "problem.{}: valid", v.problem);
        } else {
            for msg in v.violations.iter().take(SHOWN_VIOLATIONS) {
                let _ = writeln!(text, "problem.{}: {msg}", v.problem);
            }
            if v.violations.len() > SHOWN_VIOLATIONS {
                let _ = writeln!(text, "problem.{}: {} more violations", v.problem, v.violations.len() - SHOWN_VIOLATIONS);
            }
            invalid.push(summarize(v.problem, &v.violations));
        }
    }
    let mut done = Done::ok(payload, headline, text);
    if !invalid.is_empty() {
        done.status = Status::Error;
        done.code = EXIT_VALIDATION;
        done.error = Some(ErrorInfo {
            kind: "invalid_problem".into(),
            message: invalid.join("; "),
        });
    }
    Ok(done)
}

// ---- eigenvalues ----

#[derive(Serialize)]
pub struct EigenvalueEntry {
    pub value: Num,
    pub multiplicity: usize,
    pub nullity: usize,
    pub residual: Num,
}

#[derive(Serialize)]
pub struct WeylSummary {
    pub slope: Num,
    pub expected: Num,
    pub stderr: Num,
    pub points: usize,
    pub verdict: &'static str,
}

#[derive(Serialize)]
pub struct EigenvaluesPayload {
    pub problem: u8,
    pub requested: usize,
    pub lambda_min: Num,
    pub lambda_max: Num,
    pub eigenvalues: Vec<EigenvalueEntry>,
    pub max_imag_ratio: Num,
    pub fallback: bool,
    pub evaluations: usize,
    pub weyl: WeylSummary,
    pub heat_a0: Num,
}

fn eigenvalues(cfg: &Config, count: usize, lambda_min: Option<f64>, problem: u8) -> Result<Done<EigenvaluesPayload>, Failure> {
    let p = cfg.problem(problem as usize);
    let rep = validate_problem(p, cfg.settings.samples);
    if !rep.is_valid() {
        return Err(Failure {
            code: EXIT_VALIDATION,
            info: ErrorInfo {
                kind: "invalid_problem".into(),
                message: summarize(problem as usize, &rep.violations()),
            },
        });
    }
    let spec = find_eigenvalues(p, &cfg.bc, count, lambda_min, &cfg.settings)?;
    let fit = weyl_slope(&spec, p);
    let verdict = match fit.verdict {
        WeylVerdict::Consistent => "consistent",
        WeylVerdict::Inconsistent => "inconsistent",
        WeylVerdict::Insufficient => "insufficient",
    };
    let values = spec.values();
    let headline = values.iter().map(|v| num(*v)).collect::<Vec<_>>().join(" ");
    let mut text = String::new();
    for (i, e) in spec.eigenvalues.iter().enumerate() {
        let _ = write!(text, "{:>4}  {}", i + 1, num(e.value));
        if e.multiplicity > 1 {
            let _ = write!(text, "  (multiplicity {})", e.multiplicity);
        }
        text.push('\n');
    }
    let _ = writeln!(text, "Weyl slope {:.6} vs expected {:.6}: {verdict}", fit.slope, fit.expected);
    let payload = EigenvaluesPayload {
        problem,
        requested: count,
        lambda_min: Num(spec.lambda_min),
        lambda_max: Num(spec.lambda_max),
        eigenvalues: spec
            .eigenvalues
            .iter()
            .map(|e| EigenvalueEntry {
                value: Num(e.value),
                multiplicity: e.multiplicity,
                nullity: e.nullity,
                residual: Num(e.residual),
            })
            .collect(),
        max_imag_ratio: Num(spec.max_imag_ratio),
        fallback: spec.fallback,
        evaluations: spec.evaluations,
        weyl: WeylSummary {
            slope: Num(fit.slope),
            expected: Num(fit.expected),
            stderr: Num(fit.stderr),
            points: fit.points,
            verdict,
        },
        heat_a0: Num(heat_a0(p)),
    };
    Ok(Done::ok(payload, headline, text))
}

// ---- zero-mode ----

#[derive(Serialize)]
pub struct BoundaryValues {
    pub coefficients: Vec<Complex>,
    pub u_a: Vec<Complex>,
    pub v_a: Vec<Complex>,
    pub u_b: Vec<Complex>,
    pub v_b: Vec<Complex>,
}

#[derive(Serialize)]
pub struct SplitSummary {
    pub choice: &'static str,
    pub columns: Vec<usize>,
    pub condition_number: Num,
}

#[derive(Serialize)]
pub struct ZeroModePayload {
    pub problem: u8,
    pub multiplicity: usize,
    pub singular_values: Vec<Num>,
    pub kind: &'static str,
    pub self_adjoint: bool,
    pub y1: Option<BoundaryValues>,
    pub norm_sq: Option<Num>,
    pub b: Option<Complex>,
    pub b_separated: Option<Complex>,
    pub b_nonseparated: Option<Complex>,
    pub b_system: Option<Complex>,
    pub f10: Option<Complex>,
    pub split: Option<SplitSummary>,
}

fn zero_mode_payload(problem: u8, zm: &ZeroModeResult) -> ZeroModePayload {
    let y1 = zm.y1.as_ref().zip(zm.boundary_data()).map(|(y, d)| BoundaryValues {
        coefficients: complex_vec(&y.coeffs),
        u_a: complex_vec(&d.ua),
        v_a: complex_vec(&d.va),
        u_b: complex_vec(&d.ub),
        v_b: complex_vec(&d.vb),
    });
    ZeroModePayload {
        problem,
        multiplicity: zm.multiplicity,
        singular_values: nums(&zm.singular_values),
        kind: kind_name(zm.kind),
        self_adjoint: zm.self_adjoint,
        norm_sq: y1.as_ref().map(|_| Num(zm.norm_sq)),
        y1,
        b: zm.b.map(Into::into),
        b_separated: zm.b_separated.map(Into::into),
        b_nonseparated: zm.b_nonseparated.map(Into::into),
        b_system: zm.b_system.map(Into::into),
        f10: zm.f10.map(Into::into),
        split: zm.split.as_ref().map(|s| SplitSummary {
            choice: match s.choice {
                SplitChoice::N => "N",
                SplitChoice::M => "M",
                SplitChoice::Greedy => "greedy",
            },
            columns: s.columns.clone(),
            condition_number: Num(s.condition_number),
        }),
    }
}

fn zero_mode(cfg: &Config, problem: u8, warnings: &mut Vec<String>) -> Result<Done<ZeroModePayload>, Failure> {
    let p = cfg.problem(problem as usize);
    let detected = detect_zero_mode(p, &cfg.bc, &cfg.settings)?;
    let zm = if detected.multiplicity == 1 {
        zero_mode_analysis(p, &cfg.bc, &cfg.settings, None)?
    } else {
        detected
    };
    warnings.extend(zm.warnings.iter().cloned());
    if zm.multiplicity > 1 {
        warnings.push("B and y1 are only defined for a single zero mode".into());
    }
    let headline = match zm.multiplicity {
        0 => "no zero mode".to_string(),
        m => format!("zero mode detected (multiplicity {m})"),
    };
    let mut text = format!("{headline}\n");
    let sv = zm.singular_values.iter().map(|s| format!("{s:e}")).collect::<Vec<_>>().join(" ");
    let _ = writeln!(text, "singular values of M + N Y(b): {sv}");
    if let Some(d) = zm.boundary_data() {
        let list = |v: &[funcdet_core::C64]| v.iter().map(|z| complex_text(*z)).collect::<Vec<_>>().join(", ");
        let _ = writeln!(text, "y1(a) = [{}], P y1'(a) = [{}]", list(&d.ua), list(&d.va));
        let _ = writeln!(text, "y1(b) = [{}], P y1'(b) = [{}]", list(&d.ub), list(&d.vb));
        let _ = writeln!(text, "<y1|y1> = {}", num(zm.norm_sq));
    }
    if let Some(b) = zm.b {
        let _ = writeln!(text, "B = {}", complex_text(b));
    }
    Ok(Done::ok(zero_mode_payload(problem, &zm), headline, text))
}

// ---- verify ----

#[derive(Serialize)]
pub struct VerifyPayload {
    pub terms: usize,
    pub method: &'static str,
    pub boundary_formula: Complex,
    pub estimate: Num,
    pub tail_bound: Num,
    pub difference: Num,
    pub zero_mode_skipped: bool,
    pub verdict: &'static str,
}

fn verify(cfg: &Config, terms: Option<usize>, warnings: &mut Vec<String>) -> Result<Done<VerifyPayload>, Failure> {
    require_valid(cfg)?;
    let s = &cfg.settings;
    let terms = terms.unwrap_or(s.oracle_terms);
    let zm = detect_zero_mode(&cfg.p1, &cfg.bc, s)?;
    let exact = match zm.multiplicity {
        0 => ratio_no_zero_mode(&cfg.p1, &cfg.p2, &cfg.bc, s)?,
        1 => ratio_zero_mode_detailed(&cfg.p1, &cfg.p2, &cfg.bc, s, None)?.0,
        m => return Err(Error::DegenerateZeroMode { multiplicity: m }.into()),
    };
    warnings.extend(exact.warnings.iter().cloned());
    let t = truncated_ratio(&cfg.p1, &cfg.p2, &cfg.bc, terms, zm.multiplicity == 1, s)?;
    warnings.extend(t.warnings.iter().cloned());
    let difference = (exact.value - funcdet_core::C64::new(t.estimate, 0.0)).norm();
    let pass = difference <= t.tail_bound;
    let verdict = if pass { "PASS" } else { "FAIL" };
    let headline = format!(
        "{verdict}: boundary formula {} vs {}-term product {} (difference {:.3e}, tail bound {:.3e})",
        complex_text(exact.value),
        t.terms,
        num(t.estimate),
        difference,
        t.tail_bound
    );
    let text = format!("{headline}\n");
    let mut done = Done::ok(
        VerifyPayload {
            terms: t.terms,
            method: method_name(exact.method),
            boundary_formula: exact.value.into(),
            estimate: Num(t.estimate),
            tail_bound: Num(t.tail_bound),
            difference: Num(difference),
            zero_mode_skipped: t.zero_mode_skipped,
            verdict,
        },
        headline,
        text,
    );
    if !pass {
        done.status = Status::Fail;
        done.code = EXIT_VERIFY_FAIL;
    }
    Ok(done)
}

// ---- driver ----

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn render<T: Serialize>(
    cli: &Cli,
    sha: Option<String>,
    mut warnings: Vec<String>,
    outcome: Result<Done<T>, Failure>,
    started: Instant,
) -> Output {
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
    let done = outcome.unwrap_or_else(|f| Done {
        status: Status::Error,
        code: f.code,
        result: None,
        error: Some(f.info),
        text: String::new(),
        headline: String::new(),
    });
    let mut seen = Vec::new();
    warnings.retain(|w| {
        let fresh = !seen.contains(w);
        seen.push(w.clone());
        fresh
    });
    if cli.json {
        let report = RunReport {
            command: Some(cli.command.name()),
            config_sha256: sha,
            status: done.status,
            exit_code: done.code,
            result: done.result,
            warnings,
            error: done.error,
            timing_ms: cli.timing.then_some(Num(elapsed_ms)),
        };
        let mut stdout = serde_json::to_string_pretty(&report).expect("reports serialize");
        stdout.push('\n');
        return Output {
            code: done.code,
            stdout,
            stderr: String::new(),
        };
    }
    let mut stdout = if cli.quiet {
        if done.headline.is_empty() {
            String::new()
        } else {
            format!("{}\n", done.headline)
        }
    } else {
        done.text
    };
    if cli.timing && !cli.quiet {
        let _ = writeln!(stdout, "time: {elapsed_ms:.1} ms");
    }
    let mut stderr = String::new();
    if !cli.quiet {
        for w in &warnings {
            let _ = writeln!(stderr, "warning: {w}");
        }
    }
    if let Some(e) = done.error {
        let _ = writeln!(stderr, "error: {}", e.message);
    }
    Output {
        code: done.code,
        stdout,
        stderr,
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> Output {
    let started = Instant::now();
    let path = cli.command.config();
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) => {
            let failure = Failure {
                code: EXIT_VALIDATION,
                info: ErrorInfo {
                    kind: "io".into(),
                    message: format!("cannot read {}: {e}", path.display()),
                },
            };
            return render::<()>(cli, None, Vec::new(), Err(failure), started);
        }
    };
    let sha = Some(sha256_hex(&bytes));
    let cfg = match std::str::from_utf8(&bytes)
        .map_err(|_| ConfigError::Syntax {
            line: 0,
            message: "config is not UTF-8".into(),
        })
        .and_then(load_problem_pair)
    {
        Ok(c) => c,
        Err(e) => return render::<()>(cli, sha, Vec::new(), Err(e.into()), started),
    };
    let mut warnings = cfg.warnings.clone();
    match &cli.command {
        Command::Ratio { .. } => {
            let out = ratio(&cfg, &mut warnings);
            render(cli, sha, warnings, out, started)
        }
        Command::Check { .. } => render(cli, sha, warnings, check(&cfg), started),
        Command::Eigenvalues {
            count,
            lambda_min,
            problem,
            ..
        } => render(cli, sha, warnings, eigenvalues(&cfg, *count, *lambda_min, *problem), started),
        Command::ZeroMode { problem, .. } => {
            let out = zero_mode(&cfg, *problem, &mut warnings);
            render(cli, sha, warnings, out, started)
        }
        Command::Verify { terms, .. } => {
            let out = verify(&cfg, *terms, &mut warnings);
            render(cli, sha, warnings, out, started)
        }
    }
}

/// Parses `argv` and runs it. Usage errors exit with 1.
pub fn run<I, T>(argv: I) -> Output
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<T> = argv.into_iter().collect();
    match Cli::try_parse_from(args.iter().cloned()) {
        Ok(cli) => execute(&cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() && args.iter().any(|a| a.clone().into() == "--json") {
                let report = RunReport::<()> {
                    command: None,
                    config_sha256: None,
                    status: Status::Error,
                    exit_code: code,
                    result: None,
                    warnings: Vec::new(),
                    error: Some(ErrorInfo {
                        kind: "usage".into(),
                        message: text.trim_end().to_string(),
                    }),
                    timing_ms: None,
                };
                let mut stdout = serde_json::to_string_pretty(&report).expect("reports serialize");
                stdout.push('\n');
                return Output {
                    code,
                    stdout,
                    stderr: String::new(),
                };
            }
            if e.use_stderr() {
                Output {
                    code,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                Output {
                    code,
                    stdout: text,
                    stderr: String::new(),
                }
            }
        }
    }
}
