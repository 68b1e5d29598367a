//! Browser front end for the solver. The plain functions return JSON strings
//! so they can be tested natively; the `wasm_bindgen` exports are thin
//! wrappers that turn errors into JS exceptions.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use switchgame::model::{load_spec, validate_spec, Player, ValidatedSpec};
use switchgame::simulator::{GaussianNoise, NoiseFactors};
use switchgame::switching_dp::{evaluate_schedule, stage_cost};
use switchgame::{
    backward_induction, monte_carlo, rollout, solve_riccati, ObsAge, RiccatiSolution,
};

/// Upper bound on roll-outs per call, to keep the page responsive.
pub const MAX_RUNS: usize = 20_000;
pub const MAX_SWEEP_STEPS: usize = 40;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn configure(
    config_json: &str,
    lambda1: f64,
    lambda2: f64,
) -> Result<(ValidatedSpec, RiccatiSolution), String> {
    let spec = load_spec(config_json).map_err(err)?;
    let spec = validate_spec(spec.with_lambdas(lambda1, lambda2)).map_err(err)?;
    let ric = solve_riccati(&spec).map_err(err)?;
    Ok((spec, ric))
}

fn json(value: &impl Serialize) -> Result<String, String> {
    serde_json::to_string(value).map_err(err)
}

#[derive(Serialize)]
struct Curves {
    v1: Vec<f64>,
    v2: Vec<f64>,
}

#[derive(Serialize)]
struct GameView {
    horizon: usize,
    schedule: Vec<u8>,
    closures: Vec<usize>,
    /// Cost-to-go along the equilibrium path.
    equilibrium: Curves,
    /// Welfare value along the equilibrium path.
    welfare: Vec<f64>,
    /// Cost-to-go when the switch is never closed.
    open: Curves,
    ratio: [f64; 2],
    social_loss: f64,
}

/// Solves the game for the given fees and returns the schedule and value
/// curves.
pub fn solve_game(config_json: &str, lambda1: f64, lambda2: f64) -> Result<String, String> {
    let (spec, ric) = configure(config_json, lambda1, lambda2)?;
    let (tables, policy) = backward_induction(&spec, &ric).map_err(err)?;
    let schedule = policy.replay();
    let path = tables.equilibrium_path();

    // suffix sums of the open-branch stage costs from the prior
    let mut open = Curves {
        v1: vec![0.0; spec.horizon + 1],
        v2: vec![0.0; spec.horizon + 1],
    };
    let mut m_pred = spec.sigma0.clone();
    let mut stage = Vec::with_capacity(spec.horizon + 1);
    for t in 0..=spec.horizon {
        let cost = |p| stage_cost(&m_pred, false, t, p, &ric, &spec).map_err(err);
        stage.push([cost(Player::One)?, cost(Player::Two)?]);
        m_pred = switchgame::estimator::predict_cov(&m_pred, &spec);
    }
    let mut acc = [0.0; 2];
    for t in (0..=spec.horizon).rev() {
        acc[0] += stage[t][0];
        acc[1] += stage[t][1];
        open.v1[t] = acc[0];
        open.v2[t] = acc[1];
    }

    let root = tables.node(0, ObsAge::Init).ok_or("empty value table")?;
    let view = GameView {
        horizon: spec.horizon,
        schedule: schedule.iter().map(|&d| d as u8).collect(),
        closures: schedule
            .iter()
            .enumerate()
            .filter(|(_, &d)| d)
            .map(|(k, _)| k)
            .collect(),
        equilibrium: Curves {
            v1: path.iter().map(|n| n.v1).collect(),
            v2: path.iter().map(|n| n.v2).collect(),
        },
        welfare: path.iter().map(|n| n.vw).collect(),
        ratio: [root.v1 / open.v1[0], root.v2 / open.v2[0]],
        social_loss: root.poa,
        open,
    };
    json(&view)
}

#[derive(Serialize)]
struct Trajectory {
    x: Vec<Vec<f64>>,
    xhat: Vec<Vec<f64>>,
    delta: Vec<u8>,
    c1: Vec<f64>,
    c2: Vec<f64>,
}

#[derive(Serialize)]
struct Simulation {
    trajectory: Trajectory,
    runs: usize,
    mean: [f64; 2],
    se: [f64; 2],
    analytic: [f64; 2],
    closures: usize,
}

/// Runs `runs` seeded roll-outs under the equilibrium policy and returns the
/// first trajectory plus the cost summary.
pub fn simulate(
    config_json: &str,
    lambda1: f64,
    lambda2: f64,
    seed: u64,
    runs: usize,
) -> Result<String, String> {
    if runs > MAX_RUNS {
        return Err(format!("at most {MAX_RUNS} runs"));
    }
    let (spec, ric) = configure(config_json, lambda1, lambda2)?;
    let (_, policy) = backward_induction(&spec, &ric).map_err(err)?;
    let summary = monte_carlo(&spec, &ric, &policy, seed, runs).map_err(err)?;
    let factors = NoiseFactors::new(&spec);
    let rec = rollout(
        &spec,
        &ric,
        &policy,
        &mut GaussianNoise::new(&factors, seed, 0),
    )
    .map_err(err)?;
    let trajectory = Trajectory {
        x: rec
            .stages
            .iter()
            .map(|s| s.x.iter().copied().collect())
            .collect(),
        xhat: rec
            .stages
            .iter()
            .map(|s| s.xhat.iter().copied().collect())
            .collect(),
        delta: rec.stages.iter().map(|s| s.delta as u8).collect(),
        c1: rec.stages.iter().map(|s| s.c1).collect(),
        c2: rec.stages.iter().map(|s| s.c2).collect(),
    };
    json(&Simulation {
        trajectory,
        runs: summary.n_runs,
        mean: [summary.mean_cost1, summary.mean_cost2],
        se: [summary.se1, summary.se2],
        analytic: [summary.analytic1, summary.analytic2],
        closures: summary.closure_count,
    })
}

#[derive(Serialize)]
struct Sweep {
    lambdas: Vec<f64>,
    /// `closures[i][j]`: closure count at `(lambdas[i], lambdas[j])`.
    closures: Vec<Vec<usize>>,
    ratio1: Vec<Vec<f64>>,
    ratio2: Vec<Vec<f64>>,
}

/// Closure counts and cost ratios on an evenly spaced `steps × steps` grid of
/// fees in `(0, lambda_max]`.
pub fn lambda_sweep(config_json: &str, lambda_max: f64, steps: usize) -> Result<String, String> {
    if !(lambda_max > 0.0 && lambda_max.is_finite()) {
        return Err("lambda_max must be positive".into());
    }
    if steps == 0 || steps > MAX_SWEEP_STEPS {
        return Err(format!("steps must be in 1..={MAX_SWEEP_STEPS}"));
    }
    let lambdas: Vec<f64> = (1..=steps)
        .map(|i| lambda_max * i as f64 / steps as f64)
        .collect();
    let (base, ric) = configure(config_json, lambdas[0], lambdas[0])?;
    let never = evaluate_schedule(&base, &ric, &vec![false; base.horizon + 1]).map_err(err)?;
    let mut sweep = Sweep {
        closures: Vec::with_capacity(steps),
        ratio1: Vec::with_capacity(steps),
        ratio2: Vec::with_capacity(steps),
        lambdas: lambdas.clone(),
    };
    for &l1 in &lambdas {
        let (mut counts, mut r1, mut r2) = (Vec::new(), Vec::new(), Vec::new());
        for &l2 in &lambdas {
            // the gains do not depend on the fees, so the Riccati pass is reused
            let spec = validate_spec(base.with_lambdas(l1, l2)).map_err(err)?;
            let (tables, policy) = backward_induction(&spec, &ric).map_err(err)?;
            let root = tables.node(0, ObsAge::Init).ok_or("empty value table")?;
            counts.push(policy.replay().iter().filter(|&&d| d).count());
            r1.push(root.v1 / never[0]);
            r2.push(root.v2 / never[1]);
        }
        sweep.closures.push(counts);
        sweep.ratio1.push(r1);
        sweep.ratio2.push(r2);
    }
    json(&sweep)
}

#[wasm_bindgen(js_name = solveGame)]
pub fn solve_game_js(config_json: &str, lambda1: f64, lambda2: f64) -> Result<String, JsError> {
    solve_game(config_json, lambda1, lambda2).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = simulate)]
pub fn simulate_js(
    config_json: &str,
    lambda1: f64,
    lambda2: f64,
    seed: u32,
    runs: u32,
) -> Result<String, JsError> {
    simulate(config_json, lambda1, lambda2, seed as u64, runs as usize)
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = lambdaSweep)]
pub fn lambda_sweep_js(config_json: &str, lambda_max: f64, steps: u32) -> Result<String, JsError> {
    lambda_sweep(config_json, lambda_max, steps as usize).map_err(|e| JsError::new(&e))
}
