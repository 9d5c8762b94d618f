//! Rolling link-forecasting protocol: for each target timestep `t`, fit a
//! network to snapshots `1..t-1` (warm-started from the previous target's
//! network), forecast `t` and score the forecast.

use crate::error::{Error, Result};
use crate::eval::{bas_baseline, evaluate_forecast, AucReport};
use crate::inference::{forecast, train, InferenceNetwork, TrainConfig};
use crate::model::{Hyperparams, SnapshotSequence};

#[derive(Debug, Clone)]
pub struct RollingResult {
    pub model: AucReport,
    pub baseline: Option<AucReport>,
    /// Target timesteps whose truth snapshot has only one class of dyad,
    /// so AUC is undefined; they are left out of both reports.
    pub skipped: Vec<usize>,
    pub networks_trained: usize,
    pub warm_starts: usize,
    /// Network fitted for the last target.
    pub last_network: InferenceNetwork,
}

/// Runs the protocol for targets `first..=last` (1-based, `first >= 2`).
pub fn rolling_forecast(
    snapshots: &SnapshotSequence,
    hp: &Hyperparams,
    config: &TrainConfig,
    first: usize,
    last: usize,
    with_baseline: bool,
) -> Result<RollingResult> {
    if first < 2 || last < first || last > snapshots.horizon() {
        return Err(Error::InvalidConfig(format!(
            "forecast targets must satisfy 2 <= first <= last <= {}, got {first}..={last}",
            snapshots.horizon()
        )));
    }
    let mut model = AucReport { rows: Vec::new() };
    let mut baseline = with_baseline.then(|| AucReport { rows: Vec::new() });
    let mut skipped = Vec::new();
    let mut prev: Option<InferenceNetwork> = None;
    let mut warm_starts = 0;
    let mut trained = 0;

    for target in first..=last {
        let history = snapshots.truncated(target - 1);
        if prev.is_some() {
            warm_starts += 1;
        }
        let report = train(&history, hp, config, prev.as_ref())?;
        trained += 1;
        let probs = forecast(&report.network, target - 1)?;
        let truth = snapshots.get(target - 1);
        match evaluate_forecast(&probs, truth, snapshots.directed()) {
            Ok(a) => {
                model.rows.push((target, a));
                if let Some(b) = baseline.as_mut() {
                    let bas = bas_baseline(&history)?;
                    b.rows.push((target, evaluate_forecast(&bas, truth, snapshots.directed())?));
                }
            }
            Err(Error::UndefinedAuc { .. }) => skipped.push(target),
            Err(e) => return Err(e),
        }
        prev = Some(report.network);
    }
    Ok(RollingResult {
        model,
        baseline,
        skipped,
        networks_trained: trained,
        warm_starts,
        last_network: prev.expect("at least one target"),
    })
}
