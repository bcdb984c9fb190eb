use rayon::prelude::*;

use super::simulate::{simulate_trajectory, SimConfig};
use super::{IntegrateError, MomentAccumulator, Sink};
use crate::analysis::MomentCurve;
use crate::model::ModelSpec;

/// Runs `n_traj` independent trajectories to `t_final` and accumulates
/// `‖X_t‖^{2p}` at the final time. Trajectory `i` uses the noise streams
/// keyed by `(config.seed, i)`, so two models run with the same seed share
/// their hidden paths trajectory by trajectory.
pub fn ensemble_accumulate(
    model: &ModelSpec,
    config: &SimConfig,
    p_grid: &[f64],
    t_final: f64,
    n_traj: u64,
) -> Result<MomentAccumulator, IntegrateError> {
    if n_traj < 2 {
        return Err(IntegrateError::Config("n_traj must be >= 2".into()));
    }
    let n_steps = (t_final / config.dt).round() as u64;
    if n_steps == 0 {
        return Err(IntegrateError::Config("t_final shorter than one step".into()));
    }
    let cfg = SimConfig {
        n_steps,
        burn_in: n_steps - 1,
        thinning: 1,
        ..config.clone()
    };
    cfg.validate()?;
    type Partial = (MomentAccumulator, Option<(u64, IntegrateError)>);
    let keep_first = |a: Option<(u64, IntegrateError)>, b: Option<(u64, IntegrateError)>| match (a, b) {
        (Some(x), Some(y)) => Some(if x.0 <= y.0 { x } else { y }),
        (x, y) => x.or(y),
    };
    let (acc, err): Partial = (0..n_traj)
        .into_par_iter()
        .fold(
            || (MomentAccumulator::new(p_grid), None),
            |(mut acc, err): Partial, i| {
                if err.is_some() {
                    return (acc, err);
                }
                let mut sinks: [&mut dyn Sink; 1] = [&mut acc];
                match simulate_trajectory(model, &cfg, i, &mut sinks, None) {
                    Ok(_) => (acc, None),
                    Err(e) => (acc, Some((i, e))),
                }
            },
        )
        .reduce(
            || (MomentAccumulator::new(p_grid), None),
            |(mut a, ea), (b, eb)| {
                a.merge(&b);
                (a, keep_first(ea, eb))
            },
        );
    match err {
        Some((_, e)) => Err(e),
        None => Ok(acc),
    }
}

/// `E‖X_t‖^{2p}` over the p-grid with standard errors of the log estimates.
pub fn ensemble_expectation(
    model: &ModelSpec,
    config: &SimConfig,
    p_grid: &[f64],
    t_final: f64,
    n_traj: u64,
) -> Result<MomentCurve, IntegrateError> {
    let acc = ensemble_accumulate(model, config, p_grid, t_final, n_traj)?;
    Ok(MomentCurve::from_accumulator(&acc))
}
