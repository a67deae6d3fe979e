//! JSON reports. Field order is fixed by the struct definitions and numbers
//! are written with 17 significant digits, so the same config on the same
//! build always yields the same bytes.

use funcdet_core::{Error, C64};
use serde::ser::{Serialize, Serializer};
use serde_json::value::RawValue;

/// A double written as `d.dddddddddddddddde±x`; `null` when not finite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Complex {
    pub re: Num,
    pub im: Num,
}

impl From<C64> for Complex {
    fn from(z: C64) -> Self {
        Complex {
            re: Num(z.re),
            im: Num(z.im),
        }
    }
}

pub fn complex_vec(v: &[C64]) -> Vec<Complex> {
    v.iter().copied().map(Complex::from).collect()
}

pub fn nums(v: &[f64]) -> Vec<Num> {
    v.iter().copied().map(Num).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Fail,
    Error,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ErrorInfo {
    pub kind: String,
    pub message: String,
}

#[derive(Debug, serde::Serialize)]
pub struct RunReport<T: Serialize> {
    pub command: Option<&'static str>,
    pub config_sha256: Option<String>,
    pub status: Status,
    pub exit_code: i32,
    pub result: Option<T>,
    pub warnings: Vec<String>,
    pub error: Option<ErrorInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<Num>,
}

/// Exit code for a core error: 1 for invalid input, 2 for failed
/// computations.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Syntax { .. }
        | Error::UnknownIdentifier { .. }
        | Error::Arity { .. }
        | Error::Dimension(_)
        | Error::InvalidProblem(_)
        | Error::RankDeficient { .. }
        | Error::UnsupportedBoundary
        | Error::NotSelfAdjoint => 1,
        _ => 2,
    }
}

pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Syntax { .. } => "expression_syntax",
        Error::UnknownIdentifier { .. } => "unknown_identifier",
        Error::Arity { .. } => "arity",
        Error::Dimension(_) => "dimension",
        Error::InvalidProblem(_) => "invalid_problem",
        Error::RankDeficient { .. } => "rank_deficient",
        Error::UnsupportedBoundary => "unsupported_boundary",
        Error::NotApplicable(_) => "not_applicable",
        Error::StepUnderflow { .. } => "step_underflow",
        Error::NonFinite { .. } => "non_finite",
        Error::ToleranceNotMet { .. } => "tolerance_not_met",
        Error::ZeroModeDetected { .. } => "zero_mode_detected",
        Error::DegenerateZeroMode { .. } => "degenerate_zero_mode",
        Error::NoZeroMode => "no_zero_mode",
        Error::ReferenceZeroMode => "reference_zero_mode",
        Error::NoInvertibleSplit => "no_invertible_split",
        Error::DegenerateData(_) => "degenerate_data",
        Error::RegimeMismatch(_) => "regime_mismatch",
        Error::NotSelfAdjoint => "not_self_adjoint",
        Error::ImaginaryResidue { .. } => "imaginary_residue",
        Error::CountNotReached { .. } => "count_not_reached",
        Error::FitDegenerate(_) => "fit_degenerate",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [1.0, std::f64::consts::PI, -1.1752011936438014, 1e-300, 6.02214076e23, 0.1] {
            let s = serde_json::to_string(&Num(x)).unwrap();
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
            let digits = s.trim_start_matches('-').split('e').next().unwrap().replace('.', "");
            assert_eq!(digits.len(), 17, "{s}");
        }
    }

    #[test]
    fn non_finite_is_null() {
        assert_eq!(serde_json::to_string(&Num(f64::NAN)).unwrap(), "null");
        assert_eq!(serde_json::to_string(&Num(f64::INFINITY)).unwrap(), "null");
    }

    #[test]
    fn complex_field_order() {
        let s = serde_json::to_string(&Complex::from(C64::new(1.0, -0.5))).unwrap();
        assert_eq!(s, r#"{"re":1.0000000000000000e0,"im":-5.0000000000000000e-1}"#);
    }

    #[test]
    fn validation_errors_exit_with_one() {
        assert_eq!(exit_code(&Error::UnsupportedBoundary), 1);
        assert_eq!(exit_code(&Error::DegenerateZeroMode { multiplicity: 2 }), 2);
        assert_eq!(exit_code(&Error::NoInvertibleSplit), 2);
    }
}
