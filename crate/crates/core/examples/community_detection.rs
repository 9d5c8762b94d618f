//! Spectral community detection on fitted logits, checked against a
//! planted partition.

use dlaim::eval::{adjusted_rand_index, community_detect};
use dlaim::inference::{extract_embeddings, train, TrainConfig};
use dlaim::model::{logit_matrix, Hyperparams, SnapshotSequence};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> dlaim::Result<()> {
    // two dense blocks with sparse cross links, stable over time
    let (n, horizon) = (24, 6);
    let planted: Vec<usize> = (0..n).map(|i| i * 2 / n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let snapshots = (0..horizon)
        .map(|_| {
            let mut a = DMatrix::<u8>::zeros(n, n);
            for i in 0..n {
                for j in i + 1..n {
                    let p = if planted[i] == planted[j] { 0.6 } else { 0.05 };
                    if rng.random_bool(p) {
                        a[(i, j)] = 1;
                        a[(j, i)] = 1;
                    }
                }
            }
            a
        })
        .collect();
    let snaps = SnapshotSequence::new(n, false, snapshots)?;

    let hp = Hyperparams::from_scales(2, 0.1, 0.1, 1.0, 1.0, false)?;
    let cfg = TrainConfig {
        n_batches: 3000,
        ..Default::default()
    };
    let net = train(&snaps, &hp, &cfg, None)?.network;
    let emb = extract_embeddings(&net, horizon)?;
    let t = horizon - 1;
    let logits = logit_matrix(&emb.z[t], &emb.theta[t], false);

    let found = community_detect(&logits, 2, t + 1, 0)?;
    println!("labels: {:?}", found.labels);
    println!("ARI against planted partition: {:.3}", adjusted_rand_index(&found.labels, &planted));
    Ok(())
}
