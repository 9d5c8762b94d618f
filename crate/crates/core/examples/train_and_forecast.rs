//! Fit the inference network to the first T-1 snapshots of a synthetic
//! sequence, forecast snapshot T and compare against the BAS baseline.

use dlaim::eval::{bas_baseline, evaluate_forecast};
use dlaim::inference::{forecast, full_elbo, train, InferenceNetwork, TrainConfig};
use dlaim::model::{sample_network, Hyperparams};

fn main() -> dlaim::Result<()> {
    let (n, k, horizon) = (30, 4, 10);
    let hp = Hyperparams::from_scales(k, 0.1, 0.1, 1.0, 1.0, false)?;
    let (snaps, latent) = sample_network(&hp, n, horizon, 2)?;
    let history = snaps.truncated(horizon - 1);
    let cfg = TrainConfig {
        n_batches: 1500,
        seed: 2,
        ..Default::default()
    };

    let before = full_elbo(&InferenceNetwork::new(n, k, false, cfg.seed)?, &history, &hp)?;
    let report = train(&history, &hp, &cfg, None)?;
    let after = full_elbo(&report.network, &history, &hp)?;
    println!("ELBO {before:.1} -> {after:.1}");

    let truth = snaps.get(horizon - 1);
    let model = evaluate_forecast(&forecast(&report.network, horizon - 1)?, truth, false)?;
    let bas = evaluate_forecast(&bas_baseline(&history)?, truth, false)?;
    let oracle = evaluate_forecast(&latent.probability_matrix(horizon - 1), truth, false)?;
    println!("AUC at t={horizon}: model {model:.4}  BAS {bas:.4}  true probabilities {oracle:.4}");
    Ok(())
}
