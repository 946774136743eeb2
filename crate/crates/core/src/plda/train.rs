use crate::corpus::{Document, Vocabulary};
use crate::error::{Error, Result};
use crate::rng;

use super::state::{init_state, ModelState};
use super::{LabelSpace, PldaConfig, TrainedModel};

/// Train on `docs`, each restricted to its own labels (which should already
/// include the background label). Returns the snapshot-averaged model.
pub fn train(docs: &[Document], vocabulary: &Vocabulary, space: &LabelSpace, config: &PldaConfig) -> Result<TrainedModel> {
    train_with_state(docs, vocabulary, space, config).map(|(m, _)| m)
}

/// As [`train`], also returning the final sampler state.
pub fn train_with_state(
    docs: &[Document],
    vocabulary: &Vocabulary,
    space: &LabelSpace,
    config: &PldaConfig,
) -> Result<(TrainedModel, ModelState)> {
    config.validate()?;
    let v = vocabulary.len();
    let t = space.total_topics();
    if v == 0 {
        return Err(Error::Data("empty vocabulary".into()));
    }
    let cells = v as u128 * t as u128;
    let mut sums: Vec<u64> = Vec::new();
    sums.try_reserve_exact(cells as usize).map_err(|_| Error::Resource {
        what: "snapshot accumulator".into(),
        dims: format!("{v} terms x {t} topics"),
        bytes: cells * 8,
    })?;
    sums.resize(cells as usize, 0);
    let mut total_sums = vec![0u64; t];

    let mut init_rng = rng::derived(config.seed, &["train", "init"]);
    let mut state = init_state(docs, None, space, v, &mut init_rng)?;
    log::info!(
        "training: {} documents, {} terms, {} topics, {} sweeps on {} thread(s)",
        docs.len(),
        v,
        t,
        config.sweeps,
        config.threads
    );

    let shards = config.threads.min(docs.len().max(1));
    let mut rngs: Vec<rng::Rng> = (0..shards)
        .map(|i| rng::derived(config.seed, &["train", "shard", &i.to_string(), &shards.to_string()]))
        .collect();
    let pool = if shards > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(shards)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {shards} worker threads: {e}")))?,
        )
    } else {
        None
    };

    let mut snapshots = 0u64;
    for s in 1..=config.sweeps {
        match &pool {
            Some(pool) => state.parallel_sweep(config.alpha, config.eta, &mut rngs, pool),
            None => state.gibbs_sweep(config.alpha, config.eta, &mut rngs[0]),
        }
        if config.is_snapshot_sweep(s) {
            for (acc, &n) in sums.iter_mut().zip(&state.word_topic) {
                *acc += n as u64;
            }
            for (acc, &n) in total_sums.iter_mut().zip(&state.topic_total) {
                *acc += n as u64;
            }
            snapshots += 1;
        }
        if s % 100 == 0 {
            log::debug!("sweep {s}/{}", config.sweeps);
        }
    }
    debug_assert_eq!(snapshots as usize, config.snapshot_count());

    let model = TrainedModel {
        config: config.clone(),
        vocabulary: vocabulary.terms().to_vec(),
        space: space.clone(),
        snapshots,
        word_topic: sums,
        topic_total: total_sums,
        provenance: None,
    };
    Ok((model, state))
}
