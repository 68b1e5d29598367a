//! Seeded closed-loop roll-outs of the game.
//!
//! Every run draws its noise from its own ChaCha20 stream, selected by the run
//! index, so a run's trajectory depends only on `(seed, run)`. Runs execute
//! in parallel (with the `parallel` feature) and are reduced in run-index order, which keeps summaries
//! bit-identical regardless of scheduling.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use thiserror::Error;

use crate::estimator::{EstimatorError, EstimatorState, Observation};
use crate::linalg::{psd_factor, quad_form};
use crate::model::{GameSpec, Player, ValidatedSpec};
use crate::riccati::RiccatiSolution;
use crate::switching_dp::{backward_induction, evaluate_schedule, DpError, ObsAge, SwitchPolicy};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("at least 2 runs are needed, got {0}")]
    TooFewRuns(usize),
    #[error("policy covers horizon {got} but the game has horizon {expected}")]
    HorizonMismatch { expected: usize, got: usize },
    #[error("closure count differs between runs ({first} vs {other})")]
    InconsistentSchedule { first: usize, other: usize },
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Dp(#[from] DpError),
}

/// Source of the initial state and the process noise of one roll-out.
pub trait NoiseStream {
    fn initial_state(&mut self) -> DVector<f64>;
    fn process_noise(&mut self) -> DVector<f64>;
}

/// Square-root factors of `Sigma0` and `S`, shared by all runs.
#[derive(Debug, Clone)]
pub struct NoiseFactors {
    sigma0: DMatrix<f64>,
    s: DMatrix<f64>,
}

impl NoiseFactors {
    pub fn new(spec: &GameSpec) -> Self {
        NoiseFactors {
            sigma0: psd_factor(&spec.sigma0),
            s: psd_factor(&spec.s),
        }
    }
}

/// Gaussian noise from ChaCha20, stream id = run index.
pub struct GaussianNoise<'a> {
    factors: &'a NoiseFactors,
    rng: ChaCha20Rng,
}

impl<'a> GaussianNoise<'a> {
    pub fn new(factors: &'a NoiseFactors, seed: u64, run: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(run);
        GaussianNoise { factors, rng }
    }

    fn draw(&mut self, factor: &DMatrix<f64>) -> DVector<f64> {
        let z = DVector::from_iterator(
            factor.ncols(),
            (0..factor.ncols()).map(|_| StandardNormal.sample(&mut self.rng)),
        );
        factor * z
    }
}

impl NoiseStream for GaussianNoise<'_> {
    fn initial_state(&mut self) -> DVector<f64> {
        let f = self.factors;
        self.draw(&f.sigma0)
    }

    fn process_noise(&mut self) -> DVector<f64> {
        let f = self.factors;
        self.draw(&f.s)
    }
}

/// Replays given draws; used for hand-checked trajectories.
#[derive(Debug, Clone)]
pub struct FixedNoise {
    pub x0: DVector<f64>,
    pub w: Vec<DVector<f64>>,
    next: usize,
}

impl FixedNoise {
    pub fn new(x0: DVector<f64>, w: Vec<DVector<f64>>) -> Self {
        FixedNoise { x0, w, next: 0 }
    }
}

impl NoiseStream for FixedNoise {
    fn initial_state(&mut self) -> DVector<f64> {
        self.x0.clone()
    }

    fn process_noise(&mut self) -> DVector<f64> {
        let w = self.w[self.next].clone();
        self.next += 1;
        w
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub t: usize,
    pub x: DVector<f64>,
    pub xhat: DVector<f64>,
    pub xhat_pred: DVector<f64>,
    pub u1: DVector<f64>,
    pub u2: DVector<f64>,
    pub delta: bool,
    pub y: Observation,
    pub c1: f64,
    pub c2: f64,
    /// Noise driving the transition out of this stage; `None` at `T`.
    pub w: Option<DVector<f64>>,
}

impl StageRecord {
    pub fn cost(&self, player: Player) -> f64 {
        match player {
            Player::One => self.c1,
            Player::Two => self.c2,
        }
    }

    /// Estimation error `x - x̂`.
    pub fn error(&self) -> DVector<f64> {
        &self.x - &self.xhat
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub stages: Vec<StageRecord>,
}

impl TrajectoryRecord {
    pub fn total_cost(&self, player: Player) -> f64 {
        self.stages.iter().map(|s| s.cost(player)).sum()
    }

    pub fn schedule(&self) -> Vec<bool> {
        self.stages.iter().map(|s| s.delta).collect()
    }

    pub fn closures(&self) -> usize {
        self.stages.iter().filter(|s| s.delta).count()
    }
}

/// One closed-loop roll-out. At each stage the switch decision is read
/// first, then the observation is formed, the estimate updated, the controls
/// `u^i = -L^i x̂` applied, costs accrued and the state advanced.
pub fn rollout(
    spec: &GameSpec,
    ric: &RiccatiSolution,
    policy: &SwitchPolicy,
    noise: &mut impl NoiseStream,
) -> Result<TrajectoryRecord, SimError> {
    let horizon = spec.horizon;
    if policy.horizon() != horizon {
        return Err(SimError::HorizonMismatch {
            expected: horizon,
            got: policy.horizon(),
        });
    }
    if ric.horizon() != horizon {
        return Err(SimError::HorizonMismatch {
            expected: horizon,
            got: ric.horizon(),
        });
    }
    let mut x = noise.initial_state();
    let mut est = EstimatorState::initial(spec);
    let mut age = ObsAge::Init;
    let mut stages = Vec::with_capacity(horizon + 1);

    for t in 0..=horizon {
        let delta = t < horizon && policy.decision(t, age).unwrap_or(false);
        let y = if delta {
            Observation::State(x.clone())
        } else {
            Observation::Erasure
        };
        est.observe(delta, &y)?;
        let xhat = est.xhat.clone();
        let xhat_pred = est.xhat_pred.clone();

        let record = if t < horizon {
            let u1 = -(ric.l(Player::One, t) * &xhat);
            let u2 = -(ric.l(Player::Two, t) * &xhat);
            let fee = if delta { 1.0 } else { 0.0 };
            let c1 = quad_form(&x, &spec.q1)
                + quad_form(&u1, &spec.q11)
                + quad_form(&u2, &spec.q12)
                + spec.lambda1 * fee;
            let c2 = quad_form(&x, &spec.q2)
                + quad_form(&u2, &spec.q22)
                + quad_form(&u1, &spec.q21)
                + spec.lambda2 * fee;
            let w = noise.process_noise();
            let x_next = &spec.a * &x + &spec.b1 * &u1 + &spec.b2 * &u2 + &w;
            est.advance(&u1, &u2, spec)?;
            let rec = StageRecord {
                t,
                x: x.clone(),
                xhat,
                xhat_pred,
                u1,
                u2,
                delta,
                y,
                c1,
                c2,
                w: Some(w),
            };
            x = x_next;
            rec
        } else {
            StageRecord {
                t,
                c1: quad_form(&x, &spec.q1),
                c2: quad_form(&x, &spec.q2),
                x: x.clone(),
                xhat,
                xhat_pred,
                u1: DVector::zeros(spec.m),
                u2: DVector::zeros(spec.m),
                delta,
                y,
                w: None,
            }
        };
        stages.push(record);
        age = age.successor(delta);
    }
    Ok(TrajectoryRecord { stages })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSummary {
    pub n_runs: usize,
    pub mean_cost1: f64,
    pub mean_cost2: f64,
    pub se1: f64,
    pub se2: f64,
    pub closure_count: usize,
    /// Expected costs of the simulated schedule from the covariance
    /// recursion.
    pub analytic1: f64,
    pub analytic2: f64,
}

impl SimSummary {
    pub fn mean(&self, player: Player) -> f64 {
        match player {
            Player::One => self.mean_cost1,
            Player::Two => self.mean_cost2,
        }
    }

    pub fn se(&self, player: Player) -> f64 {
        match player {
            Player::One => self.se1,
            Player::Two => self.se2,
        }
    }

    pub fn analytic(&self, player: Player) -> f64 {
        match player {
            Player::One => self.analytic1,
            Player::Two => self.analytic2,
        }
    }
}

/// Neumaier-compensated sum in slice order.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Sample mean and standard error of the mean.
pub(crate) fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    let var = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs `n_runs` independent roll-outs and summarizes realized total costs.
pub fn monte_carlo(
    spec: &ValidatedSpec,
    ric: &RiccatiSolution,
    policy: &SwitchPolicy,
    seed: u64,
    n_runs: usize,
) -> Result<SimSummary, SimError> {
    if n_runs < 2 {
        return Err(SimError::TooFewRuns(n_runs));
    }
    let factors = NoiseFactors::new(spec);
    #[cfg(feature = "parallel")]
    let runs = (0..n_runs).into_par_iter();
    #[cfg(not(feature = "parallel"))]
    let runs = 0..n_runs;
    let per_run: Vec<(f64, f64, usize)> = runs
        .map(|r| {
            let mut noise = GaussianNoise::new(&factors, seed, r as u64);
            rollout(spec, ric, policy, &mut noise).map(|rec| {
                (
                    rec.total_cost(Player::One),
                    rec.total_cost(Player::Two),
                    rec.closures(),
                )
            })
        })
        .collect::<Result<_, _>>()?;

    let closure_count = per_run[0].2;
    if let Some(&(_, _, other)) = per_run.iter().find(|r| r.2 != closure_count) {
        return Err(SimError::InconsistentSchedule {
            first: closure_count,
            other,
        });
    }
    let costs1: Vec<f64> = per_run.iter().map(|r| r.0).collect();
    let costs2: Vec<f64> = per_run.iter().map(|r| r.1).collect();
    let (mean_cost1, se1) = mean_and_se(&costs1);
    let (mean_cost2, se2) = mean_and_se(&costs2);
    let analytic = evaluate_schedule(spec, ric, &policy.replay())?;
    Ok(SimSummary {
        n_runs,
        mean_cost1,
        mean_cost2,
        se1,
        se2,
        closure_count,
        analytic1: analytic[0],
        analytic2: analytic[1],
    })
}

/// Equilibrium policy against the never-close baseline, on common noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub finite: SimSummary,
    pub open: SimSummary,
}

impl Comparison {
    /// Analytic cost with switching over cost without, per player.
    pub fn analytic_ratio(&self, player: Player) -> f64 {
        self.finite.analytic(player) / self.open.analytic(player)
    }

    pub fn empirical_ratio(&self, player: Player) -> f64 {
        self.finite.mean(player) / self.open.mean(player)
    }
}

pub fn compare_baselines(
    spec: &ValidatedSpec,
    ric: &RiccatiSolution,
    seed: u64,
    n_runs: usize,
) -> Result<Comparison, SimError> {
    let (_, policy) = backward_induction(spec, ric)?;
    let finite = monte_carlo(spec, ric, &policy, seed, n_runs)?;
    let open = monte_carlo(
        spec,
        ric,
        &SwitchPolicy::never_close(spec.horizon),
        seed,
        n_runs,
    )?;
    Ok(Comparison { finite, open })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{paper_spec, scalar_spec};
    use crate::model::validate_spec;
    use crate::riccati::solve_riccati;
    use nalgebra::dvector;

    #[test]
    fn noiseless_open_loop_stays_at_zero() {
        let mut raw = paper_spec();
        raw.s = DMatrix::zeros(2, 2);
        let spec = validate_spec(raw).unwrap();
        let ric = solve_riccati(&spec).unwrap();
        let policy = SwitchPolicy::never_close(spec.horizon);
        let factors = NoiseFactors::new(&spec);
        let rec = rollout(
            &spec,
            &ric,
            &policy,
            &mut GaussianNoise::new(&factors, 7, 0),
        )
        .unwrap();
        for s in &rec.stages {
            assert_eq!(s.x, s.xhat);
            assert_eq!(s.x, DVector::zeros(2));
        }
        assert_eq!(rec.total_cost(Player::One), 0.0);
        assert_eq!(rec.total_cost(Player::Two), 0.0);

        let summary = monte_carlo(&spec, &ric, &policy, 3, 5).unwrap();
        assert_eq!((summary.mean_cost1, summary.se1), (0.0, 0.0));
        assert_eq!((summary.mean_cost2, summary.se2), (0.0, 0.0));
    }

    #[test]
    fn scalar_hand_trajectory() {
        let spec = validate_spec(scalar_spec()).unwrap();
        let ric = solve_riccati(&spec).unwrap();
        let policy = SwitchPolicy::from_schedule(&[true, false]);
        let mut noise = FixedNoise::new(dvector![2.0], vec![dvector![1.0]]);
        let rec = rollout(&spec, &ric, &policy, &mut noise).unwrap();
        let s0 = &rec.stages[0];
        assert!(s0.delta);
        assert_eq!(s0.xhat, dvector![2.0]);
        assert_eq!(s0.y, Observation::State(dvector![2.0]));
        assert!((s0.u1[0] + 2.0 / 3.0).abs() < 1e-15);
        assert!((s0.u2[0] + 2.0 / 3.0).abs() < 1e-15);
        // 4 + 4/9 + 0 + 1
        assert!((s0.c1 - (5.0 + 4.0 / 9.0)).abs() < 1e-14);
        let s1 = &rec.stages[1];
        assert!((s1.x[0] - 5.0 / 3.0).abs() < 1e-15);
        assert!(!s1.delta && s1.y.is_erasure());
        assert!((s1.xhat[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((s1.c2 - 25.0 / 9.0).abs() < 1e-14);
        assert!(s1.w.is_none());
    }

    #[test]
    fn too_few_runs() {
        let spec = validate_spec(scalar_spec()).unwrap();
        let ric = solve_riccati(&spec).unwrap();
        let policy = SwitchPolicy::never_close(1);
        assert_eq!(
            monte_carlo(&spec, &ric, &policy, 0, 1),
            Err(SimError::TooFewRuns(1))
        );
    }

    #[test]
    fn horizon_mismatch() {
        let spec = validate_spec(scalar_spec()).unwrap();
        let ric = solve_riccati(&spec).unwrap();
        let policy = SwitchPolicy::never_close(3);
        let mut noise = FixedNoise::new(dvector![0.0], vec![]);
        assert!(matches!(
            rollout(&spec, &ric, &policy, &mut noise),
            Err(SimError::HorizonMismatch { .. })
        ));
    }

    #[test]
    fn huge_fees_make_both_arms_identical() {
        let spec = validate_spec(paper_spec().with_lambdas(1e12, 1e12)).unwrap();
        let ric = solve_riccati(&spec).unwrap();
        let cmp = compare_baselines(&spec, &ric, 1, 50).unwrap();
        assert_eq!(cmp.finite, cmp.open);
        for p in Player::BOTH {
            assert_eq!(cmp.analytic_ratio(p), 1.0);
            assert_eq!(cmp.empirical_ratio(p), 1.0);
        }
    }

    #[test]
    fn scalar_comparison_ratio() {
        let spec = validate_spec(scalar_spec()).unwrap();
        let ric = solve_riccati(&spec).unwrap();
        let cmp = compare_baselines(&spec, &ric, 0, 100).unwrap();
        for p in Player::BOTH {
            assert!((cmp.analytic_ratio(p) - (40.0 / 9.0) / 5.0).abs() < 1e-14);
        }
    }

    #[test]
    fn compensated_sum_is_accurate() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v), 2.0);
    }
}
