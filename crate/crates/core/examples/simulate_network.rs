//! Draw a dynamic network from the generative model and look at how its
//! density and latent attributes drift over time.

use dlaim::model::{sample_network, Hyperparams};

fn main() -> dlaim::Result<()> {
    let hp = Hyperparams::from_scales(3, 0.1, 0.1, 1.0, 1.0, false)?;
    let (snaps, latent) = sample_network(&hp, 40, 8, 11)?;

    let pairs = (snaps.n_nodes() * (snaps.n_nodes() - 1) / 2) as f64;
    for t in 0..snaps.horizon() {
        let a = snaps.get(t);
        let edges = a.iter().map(|&v| v as usize).sum::<usize>() / 2;
        let z = latent.attributes(t);
        println!(
            "t={:<2} edges={:<4} density={:.3}  mean z={:.3}  mean p={:.3}",
            t + 1,
            edges,
            edges as f64 / pairs,
            z.mean(),
            latent.probability_matrix(t).sum() / (2.0 * pairs),
        );
    }
    let theta = latent.interaction_matrices(snaps.horizon() - 1);
    println!("attribute 1 interaction matrix at the last step:{}", theta[0]);
    Ok(())
}
