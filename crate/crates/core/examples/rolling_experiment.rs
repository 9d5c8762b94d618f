//! The rolling forecasting protocol: for every target step, refit on the
//! history (warm-starting from the previous fit) and score the forecast.

use dlaim::experiment::rolling_forecast;
use dlaim::inference::TrainConfig;
use dlaim::model::{sample_network, Hyperparams};

fn main() -> dlaim::Result<()> {
    let hp = Hyperparams::from_scales(3, 0.1, 0.1, 1.0, 1.0, false)?;
    let (snaps, _) = sample_network(&hp, 25, 8, 4)?;
    let cfg = TrainConfig {
        n_batches: 400,
        seed: 4,
        ..Default::default()
    };
    let result = rolling_forecast(&snaps, &hp, &cfg, 4, 8, true)?;
    let baseline = result.baseline.as_ref().expect("requested");
    println!("{:>4} {:>8} {:>8}", "t", "model", "BAS");
    for ((t, m), (_, b)) in result.model.rows.iter().zip(&baseline.rows) {
        println!("{t:>4} {m:>8.4} {b:>8.4}");
    }
    println!("mean {:>8.4} {:>8.4}", result.model.mean(), baseline.mean());
    println!(
        "{} fits, {} warm-started, skipped {:?}",
        result.networks_trained, result.warm_starts, result.skipped
    );
    Ok(())
}
