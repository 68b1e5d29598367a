//! State estimate and error covariance under the switched observation link.
//!
//! When the switch is closed the players see the exact state, so the filtered
//! estimate jumps to it and the filtered covariance becomes exactly zero.
//! Otherwise the estimate is the open-loop prediction.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::symmetrize;
use crate::model::GameSpec;

/// What the link delivers at a stage.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    State(DVector<f64>),
    Erasure,
}

impl Observation {
    pub fn is_erasure(&self) -> bool {
        matches!(self, Observation::Erasure)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    #[error("switch closed but the link delivered an erasure")]
    MissingState,
    #[error("switch open but the link delivered a state")]
    UnexpectedState,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    pub t: usize,
    pub xhat: DVector<f64>,
    pub xhat_pred: DVector<f64>,
    pub m: DMatrix<f64>,
    pub m_pred: DMatrix<f64>,
}

impl EstimatorState {
    /// Stage-0 state before any observation: zero prior mean, prior
    /// covariance `Sigma0` as the predicted covariance.
    pub fn initial(spec: &GameSpec) -> Self {
        EstimatorState {
            t: 0,
            xhat: DVector::zeros(spec.n),
            xhat_pred: DVector::zeros(spec.n),
            m: spec.sigma0.clone(),
            m_pred: spec.sigma0.clone(),
        }
    }

    /// Applies the stage's switch outcome to the current prediction.
    pub fn observe(&mut self, delta: bool, y: &Observation) -> Result<(), EstimatorError> {
        self.xhat = update_state(&self.xhat_pred, delta, y)?;
        self.m = update_cov(&self.m_pred, delta);
        Ok(())
    }

    /// Advances to the next stage's prediction under the applied controls.
    pub fn advance(
        &mut self,
        u1: &DVector<f64>,
        u2: &DVector<f64>,
        spec: &GameSpec,
    ) -> Result<(), EstimatorError> {
        self.xhat_pred = predict_state(&self.xhat, u1, u2, spec)?;
        self.m_pred = predict_cov(&self.m, spec);
        self.t += 1;
        Ok(())
    }
}

fn check_len(v: &DVector<f64>, expected: usize) -> Result<(), EstimatorError> {
    if v.len() != expected {
        return Err(EstimatorError::Dimension {
            expected,
            got: v.len(),
        });
    }
    Ok(())
}

/// `A x̂ + B1 u1 + B2 u2`.
pub fn predict_state(
    xhat: &DVector<f64>,
    u1: &DVector<f64>,
    u2: &DVector<f64>,
    spec: &GameSpec,
) -> Result<DVector<f64>, EstimatorError> {
    check_len(xhat, spec.n)?;
    check_len(u1, spec.m)?;
    check_len(u2, spec.m)?;
    Ok(&spec.a * xhat + &spec.b1 * u1 + &spec.b2 * u2)
}

pub fn update_state(
    xhat_pred: &DVector<f64>,
    delta: bool,
    y: &Observation,
) -> Result<DVector<f64>, EstimatorError> {
    match (delta, y) {
        (true, Observation::State(x)) => {
            check_len(x, xhat_pred.len())?;
            Ok(x.clone())
        }
        (true, Observation::Erasure) => Err(EstimatorError::MissingState),
        (false, Observation::State(_)) => Err(EstimatorError::UnexpectedState),
        (false, Observation::Erasure) => Ok(xhat_pred.clone()),
    }
}

/// `A M Aᵀ + S`, symmetrized.
pub fn predict_cov(m: &DMatrix<f64>, spec: &GameSpec) -> DMatrix<f64> {
    symmetrize(&(&spec.a * m * spec.a.transpose() + &spec.s))
}

/// Exact zero after a closure, the prediction otherwise.
pub fn update_cov(m_pred: &DMatrix<f64>, delta: bool) -> DMatrix<f64> {
    if delta {
        DMatrix::zeros(m_pred.nrows(), m_pred.ncols())
    } else {
        m_pred.clone()
    }
}
