//! Check the reverse-mode gradient of the mini-batch ELBO against central
//! finite differences, on a small directed problem.

use dlaim::autodiff::{finite_diff_check, FiniteDiffConfig};
use dlaim::inference::{elbo_on_tape, unroll_on_tape, InferenceNetwork, Noise};
use dlaim::model::{sample_network, Hyperparams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> dlaim::Result<()> {
    let (n, k, horizon) = (6, 3, 4);
    let hp = Hyperparams::from_scales(k, 0.1, 0.1, 1.0, 1.0, true)?;
    let (snaps, _) = sample_network(&hp, n, horizon, 5)?;
    let net = InferenceNetwork::new(n, k, true, 5)?;

    // frozen noise so the loss is a deterministic function of the parameters
    let batch = [0, 2, 3, 5];
    let noise = Noise::sample(&mut ChaCha8Rng::seed_from_u64(1), horizon, batch.len(), k, net.theta_dim());

    let err = finite_diff_check(
        |tape, store| {
            let vars = unroll_on_tape(tape, store, horizon, Some(&batch))?;
            Ok(elbo_on_tape(tape, &snaps, &vars, &noise, &batch, &hp)?.total)
        },
        net.store(),
        FiniteDiffConfig {
            max_coords: usize::MAX,
            ..Default::default()
        },
    )?;
    println!("{} parameters, max relative error {err:.3e}", net.store().num_scalars());
    Ok(())
}
