use rand::Rng;

use crate::error::{Error, Result};

/// Zipfian noise over ids `1..=max_id`: `P(k) = ln((k + 1) / k) / ln(max_id + 1)`.
/// Low ids are the frequent n-grams, so they are drawn most often.
#[derive(Debug, Clone, Copy)]
pub struct LogUniformSampler {
    max_id: u32,
    log_range: f64,
}

impl LogUniformSampler {
    pub fn new(max_id: u32) -> Result<Self> {
        if max_id == 0 {
            return Err(Error::InvalidParameter(
                "noise distribution needs at least one in-vocabulary id".into(),
            ));
        }
        Ok(Self {
            max_id,
            log_range: (f64::from(max_id) + 1.0).ln(),
        })
    }

    pub fn max_id(&self) -> u32 {
        self.max_id
    }

    pub fn probability(&self, k: u32) -> f64 {
        if k == 0 || k > self.max_id {
            return 0.0;
        }
        let k = f64::from(k);
        ((k + 1.0) / k).ln() / self.log_range
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        // exp(U * ln(V + 1)) is uniform in log space over [1, V + 1)
        let u: f64 = rng.random();
        let k = (u * self.log_range).exp().floor() as u64;
        k.clamp(1, u64::from(self.max_id)) as u32
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<u32>, count: usize) {
        out.clear();
        out.extend((0..count).map(|_| self.sample(rng)));
    }
}
