#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use switchgame::model::{load_spec, validate_spec, GameSpec, Player, ValidatedSpec};
use switchgame::riccati::RiccatiSolution;

pub fn paper() -> ValidatedSpec {
    validate_spec(load_spec(include_str!("../../examples/paper_sim.json")).unwrap()).unwrap()
}

pub fn scalar() -> ValidatedSpec {
    validate_spec(load_spec(include_str!("../../examples/scalar.json")).unwrap()).unwrap()
}

fn uniform(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

/// `G Gᵀ` with a random inner dimension, so rank-deficient matrices occur.
fn psd(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let rank = rng.random_range(0..=n);
    if rank == 0 {
        return DMatrix::zeros(n, n);
    }
    let g = uniform(rng, n, rank, 1.0);
    let m = &g * g.transpose();
    (&m + m.transpose()) * 0.5
}

fn pd(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let g = uniform(rng, n, n, 1.0);
    let m = &g * g.transpose() + DMatrix::identity(n, n) * rng.random_range(0.2..2.0);
    (&m + m.transpose()) * 0.5
}

/// Random valid game with `n, m <= max_dim` and horizon `<= max_horizon`.
pub fn random_spec(seed: u64, max_dim: usize, max_horizon: usize) -> ValidatedSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_dim);
    let m = rng.random_range(1..=max_dim);
    let horizon = rng.random_range(1..=max_horizon);
    let a = uniform(&mut rng, n, n, 1.1);
    let spec = GameSpec {
        n,
        m,
        horizon,
        b1: uniform(&mut rng, n, m, 1.0),
        b2: uniform(&mut rng, n, m, 1.0),
        s: psd(&mut rng, n),
        sigma0: if rng.random_bool(0.5) {
            DMatrix::zeros(n, n)
        } else {
            psd(&mut rng, n)
        },
        q1: psd(&mut rng, n),
        q2: psd(&mut rng, n),
        q11: pd(&mut rng, m),
        q22: pd(&mut rng, m),
        q12: if rng.random_bool(0.5) {
            DMatrix::zeros(m, m)
        } else {
            psd(&mut rng, m)
        },
        q21: if rng.random_bool(0.5) {
            DMatrix::zeros(m, m)
        } else {
            psd(&mut rng, m)
        },
        lambda1: rng.random_range(0.05..3.0),
        lambda2: rng.random_range(0.05..3.0),
        a,
    };
    validate_spec(spec).expect("generator only builds valid games")
}

/// Symmetric players: equal inputs, weights and fees.
pub fn symmetric_spec(seed: u64, max_dim: usize, max_horizon: usize) -> ValidatedSpec {
    let base = random_spec(seed, max_dim, max_horizon).into_inner();
    let spec = GameSpec {
        b2: base.b1.clone(),
        q2: base.q1.clone(),
        q22: base.q11.clone(),
        q12: base.q11.clone(),
        q21: base.q11.clone(),
        lambda2: base.lambda1,
        ..base
    };
    validate_spec(spec).unwrap()
}

/// Per-stage sample statistics of the estimation error over many roll-outs.
pub struct ErrorStats {
    pub runs: usize,
    /// Sample covariance of `E_t = x_t - x̂_t`, per stage.
    pub cov: Vec<DMatrix<f64>>,
    /// Filtered covariance `M_t` from the deterministic recursion, per stage.
    pub m: Vec<DMatrix<f64>>,
    /// Mean and standard error of `‖x‖²_Q - ‖x̂‖²_Q - ‖E‖²_Q`, per stage and player.
    pub orth: Vec<[(f64, f64); 2]>,
}

/// Rolls out `runs` trajectories under a fixed schedule and gathers
/// [`ErrorStats`].
pub fn error_stats(spec: &ValidatedSpec, schedule: &[bool], seed: u64, runs: usize) -> ErrorStats {
    use switchgame::estimator::{predict_cov, update_cov};
    use switchgame::simulator::{GaussianNoise, NoiseFactors};
    use switchgame::{rollout, solve_riccati, SwitchPolicy};

    let ric = solve_riccati(spec).unwrap();
    let policy = SwitchPolicy::from_schedule(schedule);
    let factors = NoiseFactors::new(spec);
    let (n, stages) = (spec.n, spec.horizon + 1);
    let q = [&spec.q1, &spec.q2];

    // per run and stage: E (n), then E Eᵀ (n²), then the orthogonality gap per player
    let width = n + n * n + 2;
    let per_run: Vec<Vec<f64>> = (0..runs as u64)
        .map(|r| {
            let rec = rollout(
                spec,
                &ric,
                &policy,
                &mut GaussianNoise::new(&factors, seed, r),
            )
            .unwrap();
            let mut row = Vec::with_capacity(width * stages);
            for s in &rec.stages {
                let e = s.error();
                row.extend(e.iter());
                row.extend((&e * e.transpose()).transpose().iter());
                for qi in q {
                    let quad = |v: &nalgebra::DVector<f64>| (v.transpose() * qi * v)[(0, 0)];
                    row.push(quad(&s.x) - quad(&s.xhat) - quad(&e));
                }
            }
            row
        })
        .collect();

    let nf = runs as f64;
    let mut sum = vec![0.0; width * stages];
    for row in &per_run {
        for (acc, v) in sum.iter_mut().zip(row) {
            *acc += v;
        }
    }
    let mut sq = vec![[0.0; 2]; stages];
    for row in &per_run {
        for (t, acc) in sq.iter_mut().enumerate() {
            for (p, a) in acc.iter_mut().enumerate() {
                let i = t * width + n + n * n + p;
                let d = row[i] - sum[i] / nf;
                *a += d * d;
            }
        }
    }

    let mut cov = Vec::with_capacity(stages);
    let mut orth = Vec::with_capacity(stages);
    for (t, sq) in sq.iter().enumerate() {
        let base = t * width;
        let mean = nalgebra::DVector::from_column_slice(&sum[base..base + n]) / nf;
        let second = DMatrix::from_row_slice(n, n, &sum[base + n..base + n + n * n]);
        cov.push((second - &mean * mean.transpose() * nf) / (nf - 1.0));
        orth.push([0, 1].map(|p| {
            let mean = sum[base + n + n * n + p] / nf;
            (mean, (sq[p] / (nf - 1.0) / nf).sqrt())
        }));
    }

    let mut m = Vec::with_capacity(stages);
    let mut m_pred = spec.sigma0.clone();
    for &delta in schedule {
        let filtered = update_cov(&m_pred, delta);
        m_pred = predict_cov(&filtered, spec);
        m.push(filtered);
    }
    ErrorStats { runs, cov, m, orth }
}

/// Explicit single-player best response to the opponent's gain, applied to
/// the basis vectors of the estimate:
/// `L^i = (Q^ii + B^i' P^i B^i)^{-1} B^i' P^i (A - B^j L^j)`.
pub fn best_response(
    spec: &GameSpec,
    ric: &RiccatiSolution,
    t: usize,
    player: Player,
) -> DMatrix<f64> {
    let other = player.other();
    let p = ric.p(player, t + 1);
    let b = spec.b(player);
    let inv = (spec.q_own(player) + b.transpose() * p * b)
        .try_inverse()
        .unwrap();
    let opponent_drift = &spec.a - spec.b(other) * ric.l(other, t);
    let mut gain = DMatrix::zeros(spec.m, spec.n);
    for j in 0..spec.n {
        let mut e = nalgebra::DVector::zeros(spec.n);
        e[j] = 1.0;
        // u^i = -(...)^{-1} B' P (A e + B^j u^j), u^j = -L^j e, and u^i = -L^i e
        let col = &inv * b.transpose() * p * (&opponent_drift * e);
        gain.set_column(j, &col);
    }
    gain
}
