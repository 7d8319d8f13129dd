//! Seeded rejection sampling inside a chart's box.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::poisson::Chart;
use crate::{Error, Result};

/// Draws per requested point before giving up.
const MAX_DRAWS_PER_POINT: usize = 1000;

#[derive(Debug, Clone)]
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// One uniform draw in the box, ignoring any guard.
    pub fn uniform(&mut self, bounds: &[(f64, f64)]) -> Vec<f64> {
        bounds
            .iter()
            .map(|&(lo, hi)| lo + (hi - lo) * self.rng.random::<f64>())
            .collect()
    }

    /// `count` points in the chart box that satisfy the chart guard and the
    /// extra acceptance test. Guard evaluation errors count as rejections.
    pub fn points(
        &mut self,
        chart: &Chart,
        count: usize,
        mut accept: impl FnMut(&[f64]) -> bool,
    ) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(count);
        let budget = count.max(10) * MAX_DRAWS_PER_POINT;
        let mut draws = 0;
        while out.len() < count {
            if draws >= budget {
                return Err(Error::SamplingExhausted {
                    wanted: count,
                    accepted: out.len(),
                    draws,
                });
            }
            draws += 1;
            let z = self.uniform(chart.bounds());
            if chart.admits(&z) && accept(&z) {
                out.push(z);
            }
        }
        Ok(out)
    }
}
