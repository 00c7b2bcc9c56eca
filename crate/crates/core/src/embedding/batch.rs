use rand::seq::index;
use rand::Rng;

use super::EmbeddingHyperparams;
use crate::error::{Error, Result};
use crate::vocab::OOV_ID;

/// Parallel arrays of (target, context) ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Batch {
    pub targets: Vec<u32>,
    pub contexts: Vec<u32>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.targets
            .iter()
            .copied()
            .zip(self.contexts.iter().copied())
    }
}

/// Draws `batch_size / num_skips` consecutive windows starting at `cursor`.
///
/// Only positions with a full window on both sides are centres; the cursor
/// wraps from the last centre back to the first. Centres holding the OOV id
/// are skipped. For each centre, `num_skips` distinct neighbours within
/// `skip_window` are sampled as contexts. Returns the batch and the cursor
/// for the next call.
pub fn generate_batch<R: Rng + ?Sized>(
    stream: &[u32],
    cursor: usize,
    h: &EmbeddingHyperparams,
    rng: &mut R,
) -> Result<(Batch, usize)> {
    let sw = h.skip_window;
    let span = 2 * sw + 1;
    if stream.len() < span {
        return Err(Error::NoTrainableWindows(format!(
            "stream of {} tokens is shorter than one window of {span}",
            stream.len()
        )));
    }
    let first = sw;
    let end = stream.len() - sw;
    let centres = end - first;
    let advance = |c: usize| if c + 1 >= end { first } else { c + 1 };
    let mut cursor = if (first..end).contains(&cursor) {
        cursor
    } else {
        first
    };

    let windows = h.batch_size / h.num_skips;
    let mut batch = Batch {
        targets: Vec::with_capacity(h.batch_size),
        contexts: Vec::with_capacity(h.batch_size),
    };
    for _ in 0..windows {
        let mut scanned = 0;
        while stream[cursor] == OOV_ID {
            cursor = advance(cursor);
            scanned += 1;
            if scanned >= centres {
                return Err(Error::NoTrainableWindows(
                    "every window centre is out of vocabulary".into(),
                ));
            }
        }
        let target = stream[cursor];
        for pick in index::sample(rng, 2 * sw, h.num_skips) {
            // picks 0..sw are left neighbours, sw..2sw right neighbours
            let pos = if pick < sw {
                cursor - sw + pick
            } else {
                cursor + pick - sw + 1
            };
            batch.targets.push(target);
            batch.contexts.push(stream[pos]);
        }
        cursor = advance(cursor);
    }
    Ok((batch, cursor))
}
