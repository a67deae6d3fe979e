//! Canned problem pairs with known answers, shared by tests, the acceptance
//! suite and examples.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::model::{BoundaryConditions, Problem};
use crate::C64;

/// Two operators on the same interval with common boundary conditions.
#[derive(Clone, Debug)]
pub struct Case {
    pub name: String,
    pub p1: Problem,
    pub p2: Problem,
    pub bc: BoundaryConditions,
    /// Closed-form `det L1 / det L2` (or `det' L1 / det L2`), when known.
    pub expected: Option<f64>,
    /// Whether `p1` has a single zero mode.
    pub zero_mode: bool,
}

fn scalar(metric: &str, potential: &str) -> Problem {
    Problem::scalar(metric, potential, 0.0, 1.0).expect("corpus expressions parse")
}

/// `-d²/dx² + m²` against `-d²/dx²`, Dirichlet on `[0, 1]`: `sinh(m)/m`.
pub fn dirichlet_mass(m: f64) -> Case {
    Case {
        name: alloc::format!("dirichlet_mass_{m}"),
        p1: scalar("1", &alloc::format!("{}", m * m)),
        p2: scalar("1", "0"),
        bc: BoundaryConditions::dirichlet(1),
        expected: Some(libm::sinh(m) / m),
        zero_mode: false,
    }
}

/// `-d²/dx² - 16` against `-d²/dx²`, Dirichlet: one negative eigenvalue,
/// ratio `sin(4)/4`.
pub fn dirichlet_negative() -> Case {
    Case {
        name: "dirichlet_negative".into(),
        p1: scalar("1", "-16"),
        p2: scalar("1", "0"),
        bc: BoundaryConditions::dirichlet(1),
        expected: Some(libm::sin(4.0) / 4.0),
        zero_mode: false,
    }
}

/// `-d²/dx² + 4` against `-d²/dx² + 1`, Neumann: `2 sinh 2 / sinh 1`.
pub fn neumann_pair() -> Case {
    Case {
        name: "neumann_pair".into(),
        p1: scalar("1", "4"),
        p2: scalar("1", "1"),
        bc: BoundaryConditions::neumann(1),
        expected: Some(2.0 * libm::sinh(2.0) / libm::sinh(1.0)),
        zero_mode: false,
    }
}

/// Variable metric `P = (1+x)²` with a smooth potential; no closed form.
pub fn variable_metric() -> Case {
    Case {
        name: "variable_metric".into(),
        p1: scalar("(1+x)^2", "1 + sin(pi*x)"),
        p2: scalar("(1+x)^2", "0"),
        bc: BoundaryConditions::dirichlet(1),
        expected: None,
        zero_mode: false,
    }
}

/// Real Robin conditions `u(0) - v(0)/2 = 0`, `u(1) + v(1) = 0`; no closed
/// form.
pub fn robin_pair() -> Case {
    Case {
        name: "robin_pair".into(),
        p1: scalar("1", "2*x"),
        p2: scalar("1", "0"),
        bc: BoundaryConditions::robin(
            C64::new(1.0, 0.0),
            C64::new(-0.5, 0.0),
            C64::new(1.0, 0.0),
            C64::new(1.0, 0.0),
        )
        .expect("full rank"),
        expected: None,
        zero_mode: false,
    }
}

/// `-d²/dx²` against `-d²/dx² + 1`, periodic: zero mode `y = const`,
/// ratio `1 / (4 sinh²(1/2))`.
pub fn periodic_pair() -> Case {
    let sh = libm::sinh(0.5);
    Case {
        name: "periodic_pair".into(),
        p1: scalar("1", "0"),
        p2: scalar("1", "1"),
        bc: BoundaryConditions::periodic(1),
        expected: Some(1.0 / (4.0 * sh * sh)),
        zero_mode: true,
    }
}

/// `-d²/dx² - π²` against `-d²/dx²`, Dirichlet: zero mode `sin(πx)`,
/// ratio `1 / (2π²)`.
pub fn dirichlet_zero_mode() -> Case {
    let pi = core::f64::consts::PI;
    Case {
        name: "dirichlet_zero_mode".into(),
        p1: scalar("1", "-pi^2"),
        p2: scalar("1", "0"),
        bc: BoundaryConditions::dirichlet(1),
        expected: Some(1.0 / (2.0 * pi * pi)),
        zero_mode: true,
    }
}

/// `-d²/dx² + 1` with `u + v = 0` at both ends has the zero mode `e^{-x}`;
/// reference `-d²/dx² + 2`.
pub fn robin_zero_mode() -> Case {
    let one = C64::new(1.0, 0.0);
    Case {
        name: "robin_zero_mode".into(),
        p1: scalar("1", "1"),
        p2: scalar("1", "2"),
        bc: BoundaryConditions::robin(one, one, one, one).expect("full rank"),
        expected: None,
        zero_mode: true,
    }
}

/// `(u, v)(1) = e^{i} (u, v)(0)` with `-d²/dx² - 1`: zero mode `e^{ix}`;
/// reference `-d²/dx²`.
pub fn twisted_scalar() -> Case {
    let ph = C64::from_polar(1.0, 1.0);
    Case {
        name: "twisted_scalar".into(),
        p1: scalar("1", "-1"),
        p2: scalar("1", "0"),
        bc: BoundaryConditions::twisted(&[ph, ph]).expect("full rank"),
        expected: None,
        zero_mode: true,
    }
}

/// Parameters of the coupled two-component example.
pub const START2_MU: f64 = 0.5;
pub const START2_L: f64 = 4.0;

/// Two-component operator on `[-l/2, l/2]` with
/// `R = [[1 - 2μ², (1 - μ²) e^{2iμx}], [(1 - μ²) e^{-2iμx}, 1 - 2μ²]]`
/// and twisted conditions `(u, v)(l/2) = diag(e^{iμl}, e^{-iμl}, e^{iμl},
/// e^{-iμl}) (u, v)(-l/2)`. Its zero mode is `(e^{iμx}, -e^{-iμx})`.
pub fn start2_problem() -> Problem {
    let mu = START2_MU;
    let diag = alloc::format!("{}", 1.0 - 2.0 * mu * mu);
    let off = 1.0 - mu * mu;
    let re12 = alloc::format!("{off}*cos({}*x)", 2.0 * mu);
    let im12 = alloc::format!("{off}*sin({}*x)", 2.0 * mu);
    let im21 = alloc::format!("-{off}*sin({}*x)", 2.0 * mu);
    Problem::system(
        2,
        "1",
        &[&diag, &re12, &re12, &diag],
        &["0", &im12, &im21, "0"],
        -START2_L / 2.0,
        START2_L / 2.0,
    )
    .expect("corpus expressions parse")
}

pub fn start2_bc() -> BoundaryConditions {
    let t = START2_MU * START2_L;
    let p = C64::from_polar(1.0, t);
    let m = C64::from_polar(1.0, -t);
    BoundaryConditions::twisted(&[p, m, p, m]).expect("full rank")
}

/// The two-component example against itself shifted by `+1`.
///
/// With constant-coefficient reduction the closed form is
/// `(1.5/2.5) [S(1/2) / (S(a) S(b))]²`, `S(z) = sinh(2√z)/(2√z)`,
/// `a, b = 5/4 ± i √(15/16)`.
pub fn start2_pair() -> Case {
    let p1 = start2_problem();
    Case {
        name: "start2_pair".into(),
        p2: p1.shifted(1.0),
        p1,
        bc: start2_bc(),
        expected: Some(0.052_732_126_711_132_33),
        zero_mode: true,
    }
}

/// `P = 1` against `P = 4`, Dirichlet, `R = 0`: a deliberate metric
/// mismatch.
pub fn mismatched_metric() -> Case {
    Case {
        name: "mismatched_metric".into(),
        p1: scalar("1", "0"),
        p2: scalar("4", "0"),
        bc: BoundaryConditions::dirichlet(1),
        expected: None,
        zero_mode: false,
    }
}

/// Every case above.
pub fn all_cases() -> Vec<Case> {
    vec![
        dirichlet_mass(1.0),
        dirichlet_mass(2.0),
        dirichlet_mass(5.0),
        dirichlet_negative(),
        neumann_pair(),
        variable_metric(),
        robin_pair(),
        periodic_pair(),
        dirichlet_zero_mode(),
        robin_zero_mode(),
        twisted_scalar(),
        start2_pair(),
        mismatched_metric(),
    ]
}
