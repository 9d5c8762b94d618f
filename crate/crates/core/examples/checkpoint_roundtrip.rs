//! Save a trained network to a JSON checkpoint, reload it, and confirm the
//! restored network forecasts bit-for-bit the same probabilities.

use dlaim::inference::{forecast, train};
use dlaim::io::{Checkpoint, RunConfig};
use dlaim::model::sample_network;

fn main() -> dlaim::Result<()> {
    let cfg = RunConfig {
        k: 3,
        sigma_psi: 1.0,
        sigma_theta: 1.0,
        n_batches: 200,
        ..Default::default()
    };
    let hp = cfg.hyperparams()?;
    let (snaps, _) = sample_network(&hp, 15, 5, 8)?;
    let net = train(&snaps, &hp, &cfg.train_config(), None)?.network;

    let dir = std::env::temp_dir().join("dlaim-checkpoint-example");
    let path = dir.join("model.json");
    Checkpoint::new(&cfg, &net, snaps.horizon()).save(&path)?;
    let restored = Checkpoint::load(&path)?;
    let back = restored.network()?;

    let a = forecast(&net, snaps.horizon())?;
    let b = forecast(&back, restored.trained_horizon)?;
    let identical = a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits());
    println!("wrote {} ({} bytes)", path.display(), std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0));
    println!("restored forecast identical: {identical}");
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}
