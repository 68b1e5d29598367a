//! Game parameters, their validation, and the JSON configuration format.

use std::fmt;
use std::ops::Deref;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{is_symmetric, min_eigenvalue};

/// Absolute tolerance for the symmetry and definiteness checks.
pub const VALIDATION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::One, Player::Two];

    pub fn index(self) -> usize {
        match self {
            Player::One => 0,
            Player::Two => 1,
        }
    }

    pub fn other(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "player {}", self.index() + 1)
    }
}

/// All parameters of a switched two-player LQ game.
///
/// Matrices are dense `f64`. The state is `n`-dimensional, each player's
/// control is `m`-dimensional and the horizon runs over stages `0..=horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    pub n: usize,
    pub m: usize,
    pub horizon: usize,
    pub a: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    /// Process-noise covariance.
    pub s: DMatrix<f64>,
    /// Covariance of the initial state, which has zero mean.
    pub sigma0: DMatrix<f64>,
    pub q1: DMatrix<f64>,
    pub q2: DMatrix<f64>,
    pub q11: DMatrix<f64>,
    pub q22: DMatrix<f64>,
    /// Weight on player 2's control in player 1's cost.
    pub q12: DMatrix<f64>,
    /// Weight on player 1's control in player 2's cost.
    pub q21: DMatrix<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl GameSpec {
    pub fn b(&self, p: Player) -> &DMatrix<f64> {
        match p {
            Player::One => &self.b1,
            Player::Two => &self.b2,
        }
    }

    /// State weight `Q^i`.
    pub fn q_state(&self, p: Player) -> &DMatrix<f64> {
        match p {
            Player::One => &self.q1,
            Player::Two => &self.q2,
        }
    }

    /// Own-control weight `Q^{ii}`.
    pub fn q_own(&self, p: Player) -> &DMatrix<f64> {
        match p {
            Player::One => &self.q11,
            Player::Two => &self.q22,
        }
    }

    /// Weight `Q^{ij}` that player `p` puts on the opponent's control.
    pub fn q_cross(&self, p: Player) -> &DMatrix<f64> {
        match p {
            Player::One => &self.q12,
            Player::Two => &self.q21,
        }
    }

    pub fn lambda(&self, p: Player) -> f64 {
        match p {
            Player::One => self.lambda1,
            Player::Two => self.lambda2,
        }
    }

    /// Same game with different switching costs.
    pub fn with_lambdas(&self, lambda1: f64, lambda2: f64) -> GameSpec {
        GameSpec {
            lambda1,
            lambda2,
            ..self.clone()
        }
    }

    /// Serializes back into the configuration document format.
    pub fn to_document(&self) -> String {
        let doc = GameDocument {
            n: self.n,
            m: self.m,
            horizon: self.horizon,
            a: to_rows(&self.a),
            b1: to_rows(&self.b1),
            b2: to_rows(&self.b2),
            s: to_rows(&self.s),
            sigma0: to_rows(&self.sigma0),
            q1: to_rows(&self.q1),
            q2: to_rows(&self.q2),
            q11: to_rows(&self.q11),
            q22: to_rows(&self.q22),
            q12: to_rows(&self.q12),
            q21: to_rows(&self.q21),
            lambda1: self.lambda1,
            lambda2: self.lambda2,
        };
        serde_json::to_string_pretty(&doc).expect("plain numeric document always serializes")
    }
}

/// A [`GameSpec`] that passed [`validate_spec`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedSpec(GameSpec);

impl ValidatedSpec {
    pub fn into_inner(self) -> GameSpec {
        self.0
    }
}

impl Deref for ValidatedSpec {
    type Target = GameSpec;

    fn deref(&self) -> &GameSpec {
        &self.0
    }
}

/// One failed invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DimensionMismatch {
        field: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },
    ZeroDimension(&'static str),
    NotSymmetric(&'static str),
    NotPositiveSemidefinite {
        field: &'static str,
        min_eigenvalue: f64,
    },
    NotPositiveDefinite {
        field: &'static str,
        min_eigenvalue: f64,
    },
    NonpositiveSwitchCost {
        player: Player,
        value: f64,
    },
    NonFinite(&'static str),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DimensionMismatch {
                field,
                expected,
                got,
            } => write!(
                f,
                "{field}: expected {}x{}, got {}x{}",
                expected.0, expected.1, got.0, got.1
            ),
            Violation::ZeroDimension(field) => write!(f, "{field} must be positive"),
            Violation::NotSymmetric(field) => write!(f, "{field} is not symmetric"),
            Violation::NotPositiveSemidefinite {
                field,
                min_eigenvalue,
            } => write!(
                f,
                "{field} is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})"
            ),
            Violation::NotPositiveDefinite {
                field,
                min_eigenvalue,
            } => write!(
                f,
                "{field} is not positive definite (smallest eigenvalue {min_eigenvalue:e})"
            ),
            Violation::NonpositiveSwitchCost { player, value } => {
                write!(f, "nonpositive switch cost {value} for {player}")
            }
            Violation::NonFinite(field) => write!(f, "{field} has non-finite entries"),
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("malformed configuration: {0}")]
    Parse(String),
    #[error("matrix {field} declared {rows}x{cols} but has {entries} entries")]
    Shape {
        field: &'static str,
        rows: usize,
        cols: usize,
        entries: usize,
    },
    #[error("invalid game: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

impl ModelError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            ModelError::Invalid(v) => v,
            _ => &[],
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GameDocument {
    n: usize,
    m: usize,
    #[serde(rename = "T")]
    horizon: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B1")]
    b1: Vec<Vec<f64>>,
    #[serde(rename = "B2")]
    b2: Vec<Vec<f64>>,
    #[serde(rename = "S")]
    s: Vec<Vec<f64>>,
    #[serde(rename = "Sigma0")]
    sigma0: Vec<Vec<f64>>,
    #[serde(rename = "Q1")]
    q1: Vec<Vec<f64>>,
    #[serde(rename = "Q2")]
    q2: Vec<Vec<f64>>,
    #[serde(rename = "Q11")]
    q11: Vec<Vec<f64>>,
    #[serde(rename = "Q22")]
    q22: Vec<Vec<f64>>,
    #[serde(rename = "Q12")]
    q12: Vec<Vec<f64>>,
    #[serde(rename = "Q21")]
    q21: Vec<Vec<f64>>,
    lambda1: f64,
    lambda2: f64,
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(
    field: &'static str,
    rows: &[Vec<f64>],
    nrows: usize,
    ncols: usize,
) -> Result<DMatrix<f64>, ModelError> {
    let entries: usize = rows.iter().map(Vec::len).sum();
    let shape_err = ModelError::Shape {
        field,
        rows: nrows,
        cols: ncols,
        entries,
    };
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(shape_err);
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(nrows, ncols, &flat))
}

/// Parses a JSON configuration document. Shapes are checked against the
/// declared `n` and `m`; numerical invariants are left to [`validate_spec`].
pub fn load_spec(text: &str) -> Result<GameSpec, ModelError> {
    let doc: GameDocument =
        serde_json::from_str(text).map_err(|e| ModelError::Parse(e.to_string()))?;
    let (n, m) = (doc.n, doc.m);
    Ok(GameSpec {
        n,
        m,
        horizon: doc.horizon,
        a: from_rows("A", &doc.a, n, n)?,
        b1: from_rows("B1", &doc.b1, n, m)?,
        b2: from_rows("B2", &doc.b2, n, m)?,
        s: from_rows("S", &doc.s, n, n)?,
        sigma0: from_rows("Sigma0", &doc.sigma0, n, n)?,
        q1: from_rows("Q1", &doc.q1, n, n)?,
        q2: from_rows("Q2", &doc.q2, n, n)?,
        q11: from_rows("Q11", &doc.q11, m, m)?,
        q22: from_rows("Q22", &doc.q22, m, m)?,
        q12: from_rows("Q12", &doc.q12, m, m)?,
        q21: from_rows("Q21", &doc.q21, m, m)?,
        lambda1: doc.lambda1,
        lambda2: doc.lambda2,
    })
}

/// Checks every standing assumption and reports all violations at once.
pub fn validate_spec(spec: GameSpec) -> Result<ValidatedSpec, ModelError> {
    let mut violations = Vec::new();
    if spec.n == 0 {
        violations.push(Violation::ZeroDimension("n"));
    }
    if spec.m == 0 {
        violations.push(Violation::ZeroDimension("m"));
    }

    let (n, m) = (spec.n, spec.m);
    let shapes: [(&'static str, &DMatrix<f64>, (usize, usize)); 11] = [
        ("A", &spec.a, (n, n)),
        ("B1", &spec.b1, (n, m)),
        ("B2", &spec.b2, (n, m)),
        ("S", &spec.s, (n, n)),
        ("Sigma0", &spec.sigma0, (n, n)),
        ("Q1", &spec.q1, (n, n)),
        ("Q2", &spec.q2, (n, n)),
        ("Q11", &spec.q11, (m, m)),
        ("Q22", &spec.q22, (m, m)),
        ("Q12", &spec.q12, (m, m)),
        ("Q21", &spec.q21, (m, m)),
    ];
    let mut shapes_ok = true;
    for (field, mat, expected) in shapes.iter() {
        let got = (mat.nrows(), mat.ncols());
        if got != *expected {
            shapes_ok = false;
            violations.push(Violation::DimensionMismatch {
                field,
                expected: *expected,
                got,
            });
        }
        if mat.iter().any(|v| !v.is_finite()) {
            violations.push(Violation::NonFinite(field));
        }
    }

    if shapes_ok {
        let psd: [(&'static str, &DMatrix<f64>); 6] = [
            ("S", &spec.s),
            ("Sigma0", &spec.sigma0),
            ("Q1", &spec.q1),
            ("Q2", &spec.q2),
            ("Q12", &spec.q12),
            ("Q21", &spec.q21),
        ];
        for (field, mat) in psd {
            if !is_symmetric(mat, VALIDATION_TOL) {
                violations.push(Violation::NotSymmetric(field));
                continue;
            }
            let min_eig = min_eigenvalue(mat);
            if min_eig < -VALIDATION_TOL {
                violations.push(Violation::NotPositiveSemidefinite {
                    field,
                    min_eigenvalue: min_eig,
                });
            }
        }
        for (field, mat) in [("Q11", &spec.q11), ("Q22", &spec.q22)] {
            if !is_symmetric(mat, VALIDATION_TOL) {
                violations.push(Violation::NotSymmetric(field));
                continue;
            }
            let min_eig = min_eigenvalue(mat);
            if min_eig <= VALIDATION_TOL {
                violations.push(Violation::NotPositiveDefinite {
                    field,
                    min_eigenvalue: min_eig,
                });
            }
        }
    }

    for p in Player::BOTH {
        let value = spec.lambda(p);
        if value.is_nan() || value <= 0.0 || value.is_infinite() {
            violations.push(Violation::NonpositiveSwitchCost { player: p, value });
        }
    }

    if violations.is_empty() {
        Ok(ValidatedSpec(spec))
    } else {
        Err(ModelError::Invalid(violations))
    }
}
