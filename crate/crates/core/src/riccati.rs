//! Coupled Riccati recursion for the equilibrium feedback gains.
//!
//! Each stage solves the two mutual best-response conditions as one stacked
//! `2m x 2m` linear system, then propagates both players' cost matrices.
//! Nothing here depends on the switching policy.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg::{max_abs, min_eigenvalue, symmetrize};
use crate::model::{GameSpec, Player, ValidatedSpec};

/// Smallest acceptable reciprocal condition number of the stacked system.
pub const MIN_RCOND: f64 = 1e-14;

/// Tolerance on the smallest eigenvalue of each cost matrix.
pub const PSD_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum RiccatiError {
    #[error("stacked best-response system is singular (rcond {rcond:e}){}", stage_suffix(.stage))]
    Singular { stage: Option<usize>, rcond: f64 },
    #[error("cost matrix of {player} at stage {stage} is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd {
        stage: usize,
        player: Player,
        min_eigenvalue: f64,
    },
}

fn stage_suffix(stage: &Option<usize>) -> String {
    stage.map(|s| format!(" at stage {s}")).unwrap_or_default()
}

/// Cost matrices `P^i_t` for `t = 0..=T` and gains `L^i_t` for `t = 0..T`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub p1: Vec<DMatrix<f64>>,
    pub p2: Vec<DMatrix<f64>>,
    pub l1: Vec<DMatrix<f64>>,
    pub l2: Vec<DMatrix<f64>>,
}

impl RiccatiSolution {
    pub fn horizon(&self) -> usize {
        self.p1.len() - 1
    }

    pub fn p(&self, player: Player, t: usize) -> &DMatrix<f64> {
        match player {
            Player::One => &self.p1[t],
            Player::Two => &self.p2[t],
        }
    }

    /// Gain applied at stage `t < T`; the control is `u = -L x̂`.
    pub fn l(&self, player: Player, t: usize) -> &DMatrix<f64> {
        match player {
            Player::One => &self.l1[t],
            Player::Two => &self.l2[t],
        }
    }
}

/// Equilibrium gains for one stage given next-stage cost matrices.
pub fn solve_gains_at(
    p1_next: &DMatrix<f64>,
    p2_next: &DMatrix<f64>,
    spec: &GameSpec,
) -> Result<(DMatrix<f64>, DMatrix<f64>), RiccatiError> {
    let m = spec.m;
    let (b1, b2, a) = (&spec.b1, &spec.b2, &spec.a);
    let b1t_p1 = b1.transpose() * p1_next;
    let b2t_p2 = b2.transpose() * p2_next;

    let mut lhs = DMatrix::zeros(2 * m, 2 * m);
    lhs.view_mut((0, 0), (m, m))
        .copy_from(&(&spec.q11 + &b1t_p1 * b1));
    lhs.view_mut((0, m), (m, m)).copy_from(&(&b1t_p1 * b2));
    lhs.view_mut((m, 0), (m, m)).copy_from(&(&b2t_p2 * b1));
    lhs.view_mut((m, m), (m, m))
        .copy_from(&(&spec.q22 + &b2t_p2 * b2));

    let mut rhs = DMatrix::zeros(2 * m, spec.n);
    rhs.view_mut((0, 0), (m, spec.n)).copy_from(&(&b1t_p1 * a));
    rhs.view_mut((m, 0), (m, spec.n)).copy_from(&(&b2t_p2 * a));

    let sv = lhs.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let rcond = if smax > 0.0 { smin / smax } else { 0.0 };
    if rcond.is_nan() || rcond < MIN_RCOND {
        return Err(RiccatiError::Singular { stage: None, rcond });
    }
    let gains = lhs
        .lu()
        .solve(&rhs)
        .ok_or(RiccatiError::Singular { stage: None, rcond })?;
    let l1 = gains.rows(0, m).into_owned();
    let l2 = gains.rows(m, m).into_owned();
    Ok((l1, l2))
}

/// One backward step of the cost-matrix recursion, symmetrized.
pub fn riccati_step(
    p1_next: &DMatrix<f64>,
    p2_next: &DMatrix<f64>,
    l1: &DMatrix<f64>,
    l2: &DMatrix<f64>,
    spec: &GameSpec,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let closed = &spec.a - &spec.b1 * l1 - &spec.b2 * l2;
    let closed_t = closed.transpose();
    let p1 = &spec.q1
        + l1.transpose() * &spec.q11 * l1
        + l2.transpose() * &spec.q12 * l2
        + &closed_t * p1_next * &closed;
    let p2 = &spec.q2
        + l2.transpose() * &spec.q22 * l2
        + l1.transpose() * &spec.q21 * l1
        + &closed_t * p2_next * &closed;
    (symmetrize(&p1), symmetrize(&p2))
}

/// Full backward pass `t = T-1, ..., 0` from `P^i_T = Q^i`.
pub fn solve_riccati(spec: &ValidatedSpec) -> Result<RiccatiSolution, RiccatiError> {
    let horizon = spec.horizon;
    let mut p1 = vec![DMatrix::zeros(spec.n, spec.n); horizon + 1];
    let mut p2 = p1.clone();
    let mut l1 = vec![DMatrix::zeros(spec.m, spec.n); horizon];
    let mut l2 = l1.clone();
    p1[horizon] = spec.q1.clone();
    p2[horizon] = spec.q2.clone();

    for t in (0..horizon).rev() {
        let (g1, g2) = solve_gains_at(&p1[t + 1], &p2[t + 1], spec).map_err(|e| match e {
            RiccatiError::Singular { rcond, .. } => RiccatiError::Singular {
                stage: Some(t),
                rcond,
            },
            other => other,
        })?;
        let (n1, n2) = riccati_step(&p1[t + 1], &p2[t + 1], &g1, &g2, spec);
        for (player, mat) in [(Player::One, &n1), (Player::Two, &n2)] {
            let min_eig = min_eigenvalue(mat);
            if min_eig < -PSD_TOL {
                return Err(RiccatiError::NotPsd {
                    stage: t,
                    player,
                    min_eigenvalue: min_eig,
                });
            }
        }
        p1[t] = n1;
        p2[t] = n2;
        l1[t] = g1;
        l2[t] = g2;
    }
    Ok(RiccatiSolution { p1, p2, l1, l2 })
}

/// Max-norm residual of the single-player form of the coupling relation,
/// in which the opponent's best response has been eliminated:
///
/// `(Q^ii + B^i' P^i (I - B^j G^j) B^i) L^i = B^i' P^i (I - B^j G^j) A`,
/// `G^j = (Q^jj + B^j' P^j B^j)^{-1} B^j' P^j`.
pub fn coupled_relation_residual(
    p1_next: &DMatrix<f64>,
    p2_next: &DMatrix<f64>,
    gain: &DMatrix<f64>,
    player: Player,
    spec: &GameSpec,
) -> Option<f64> {
    let other = player.other();
    let (p_own, p_other) = match player {
        Player::One => (p1_next, p2_next),
        Player::Two => (p2_next, p1_next),
    };
    let b_own = spec.b(player);
    let b_other = spec.b(other);
    let inner = spec.q_own(other) + b_other.transpose() * p_other * b_other;
    let g_other = inner.lu().solve(&(b_other.transpose() * p_other))?;
    let proj = DMatrix::identity(spec.n, spec.n) - b_other * g_other;
    let weighted = b_own.transpose() * p_own * &proj;
    let lhs = (spec.q_own(player) + &weighted * b_own) * gain;
    let rhs = &weighted * &spec.a;
    Some(max_abs(&(lhs - rhs)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{paper_spec, scalar_spec};
    use crate::model::validate_spec;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn scalar_gains_are_one_third() {
        let spec = scalar_spec();
        let (l1, l2) = solve_gains_at(&scalar(1.0), &scalar(1.0), &spec).unwrap();
        assert!((l1[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
        assert!((l2[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_future_cost_means_zero_gain() {
        let spec = paper_spec();
        let z = DMatrix::zeros(2, 2);
        let (l1, l2) = solve_gains_at(&z, &z, &spec).unwrap();
        assert_eq!(max_abs(&l1), 0.0);
        assert_eq!(max_abs(&l2), 0.0);
    }

    #[test]
    fn scalar_step_gives_eleven_ninths() {
        let spec = scalar_spec();
        let third = scalar(1.0 / 3.0);
        let (p1, p2) = riccati_step(&scalar(1.0), &scalar(1.0), &third, &third, &spec);
        assert!((p1[(0, 0)] - 11.0 / 9.0).abs() < 1e-15);
        assert!((p2[(0, 0)] - 11.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn step_with_no_control_and_no_future_is_state_weight() {
        let spec = paper_spec();
        let z = DMatrix::zeros(2, 2);
        let zl = DMatrix::zeros(2, 2);
        let (p1, p2) = riccati_step(&z, &z, &zl, &zl, &spec);
        assert_eq!(p1, spec.q1);
        assert_eq!(p2, spec.q2);
    }

    #[test]
    fn scalar_full_solve() {
        let spec = validate_spec(scalar_spec()).unwrap();
        let ric = solve_riccati(&spec).unwrap();
        assert_eq!(ric.horizon(), 1);
        assert_eq!(ric.p1[1], spec.q1);
        assert!((ric.p1[0][(0, 0)] - 11.0 / 9.0).abs() < 1e-15);
        assert!((ric.l2[0][(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_horizon_has_no_gains() {
        let mut raw = paper_spec();
        raw.horizon = 0;
        let ric = solve_riccati(&validate_spec(raw.clone()).unwrap()).unwrap();
        assert_eq!(ric.p1, vec![raw.q1.clone()]);
        assert_eq!(ric.p2, vec![raw.q2.clone()]);
        assert!(ric.l1.is_empty() && ric.l2.is_empty());
    }

    #[test]
    fn paper_closed_form_gain_agrees() {
        // B1 = I, B2 = -I, Q11 = Q22 = I: L^i_{t-1} = ±P^i_t (I + P^1_t + P^2_t)^{-1} A
        let spec = validate_spec(paper_spec()).unwrap();
        let ric = solve_riccati(&spec).unwrap();
        for t in 1..=spec.horizon {
            let big = DMatrix::identity(2, 2) + &ric.p1[t] + &ric.p2[t];
            let x = big.lu().solve(&spec.a).unwrap();
            let c1 = &ric.p1[t] * &x;
            let c2 = -(&ric.p2[t] * &x);
            assert!(max_abs(&(c1 - &ric.l1[t - 1])) < 1e-12, "stage {t}");
            assert!(max_abs(&(c2 - &ric.l2[t - 1])) < 1e-12, "stage {t}");
        }
    }

    #[test]
    fn paper_reduced_recursion_agrees() {
        // with Q12 = Q21 = 0: P^i_t = Q^i + A' P^{-1} P^i (P^i + I) P^{-1} A
        let spec = validate_spec(paper_spec()).unwrap();
        let ric = solve_riccati(&spec).unwrap();
        let eye = DMatrix::identity(2, 2);
        for t in 0..spec.horizon {
            let big = &eye + &ric.p1[t + 1] + &ric.p2[t + 1];
            let inv = big.try_inverse().unwrap();
            for (p_now, p_next, q) in [
                (&ric.p1[t], &ric.p1[t + 1], &spec.q1),
                (&ric.p2[t], &ric.p2[t + 1], &spec.q2),
            ] {
                let reduced =
                    q + spec.a.transpose() * &inv * p_next * (p_next + &eye) * &inv * &spec.a;
                assert!(max_abs(&(reduced - p_now)) < 1e-10, "stage {t}");
            }
        }
    }

    #[test]
    fn coupled_relation_holds() {
        let spec = validate_spec(paper_spec()).unwrap();
        let ric = solve_riccati(&spec).unwrap();
        for t in 0..spec.horizon {
            for p in Player::BOTH {
                let r = coupled_relation_residual(
                    &ric.p1[t + 1],
                    &ric.p2[t + 1],
                    ric.l(p, t),
                    p,
                    &spec,
                )
                .unwrap();
                assert!(r <= 1e-9, "stage {t} {p}: {r}");
            }
        }
    }

    #[test]
    fn singular_system_is_reported() {
        // B1 = B2 with P chosen so that both rows coincide and Q^ii is tiny
        let mut spec = scalar_spec();
        spec.q11 = scalar(1e-300);
        spec.q22 = scalar(1e-300);
        let err = solve_gains_at(&scalar(1.0), &scalar(1.0), &spec).unwrap_err();
        assert!(matches!(err, RiccatiError::Singular { stage: None, .. }));
    }
}
