use std::ops::Range;

use crate::error::{invalid, Result};
use crate::rng::{chunk_stream, CHUNK_LEN};
use crate::scenario::{ProposalMode, Scenario};

/// How many samples to draw, from which proposal, under which master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplePlan {
    pub samples: usize,
    pub mode: ProposalMode,
    pub seed: u64,
}

impl SamplePlan {
    pub fn new(samples: usize, mode: ProposalMode, seed: u64) -> Result<Self> {
        if samples == 0 {
            return Err(invalid("sample count must be at least 1"));
        }
        Ok(Self { samples, mode, seed })
    }

    pub fn chunk_count(&self) -> usize {
        self.samples.div_ceil(CHUNK_LEN)
    }

    pub fn chunk_len(&self, k: usize) -> usize {
        CHUNK_LEN.min(self.samples - k * CHUNK_LEN)
    }

    /// Draw chunk `k`; chunk `k` always uses random stream `k` of the master seed.
    pub fn draw_chunk(&self, scenario: &Scenario, k: usize) -> Result<SampleBatch> {
        let len = self.chunk_len(k);
        let dims = scenario.joint_dims();
        let mut rng = chunk_stream(self.seed, k as u64);
        let mut batch = SampleBatch {
            seed: self.seed,
            mode: self.mode,
            dims,
            h: Vec::with_capacity(len),
            a: vec![0.0; len * dims],
            w: Vec::with_capacity(len),
        };
        let offsets = scenario.offsets();
        for l in 0..len {
            let (h, w) = scenario.prior().sample_proposal(self.mode, &mut rng)?;
            let row = &mut batch.a[l * dims..(l + 1) * dims];
            for (s, &o) in scenario.sensors().iter().zip(&offsets) {
                s.sample_into(h, &mut rng, &mut row[o..o + s.dims()])?;
            }
            batch.h.push(h);
            batch.w.push(w);
        }
        Ok(batch)
    }

    /// Concatenation of a contiguous range of chunks.
    pub fn draw_chunks(&self, scenario: &Scenario, chunks: Range<usize>) -> Result<SampleBatch> {
        let mut out = SampleBatch::empty(self.seed, self.mode, scenario.joint_dims());
        for k in chunks {
            out.append(self.draw_chunk(scenario, k)?);
        }
        Ok(out)
    }
}

/// Draws `(h_l, a_l)` with importance weights `w_l = d_H(h_l) / d_{H'}(h_l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub seed: u64,
    pub mode: ProposalMode,
    dims: usize,
    h: Vec<f64>,
    a: Vec<f64>,
    w: Vec<f64>,
}

impl SampleBatch {
    pub fn empty(seed: u64, mode: ProposalMode, dims: usize) -> Self {
        Self { seed, mode, dims, h: Vec::new(), a: Vec::new(), w: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn objects(&self) -> &[f64] {
        &self.h
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn features(&self, l: usize) -> &[f64] {
        &self.a[l * self.dims..(l + 1) * self.dims]
    }

    pub fn append(&mut self, other: SampleBatch) {
        self.h.extend(other.h);
        self.a.extend(other.a);
        self.w.extend(other.w);
    }

    /// Samples `range` as a new batch.
    pub fn slice(&self, range: Range<usize>) -> SampleBatch {
        SampleBatch {
            seed: self.seed,
            mode: self.mode,
            dims: self.dims,
            h: self.h[range.clone()].to_vec(),
            a: self.a[range.start * self.dims..range.end * self.dims].to_vec(),
            w: self.w[range].to_vec(),
        }
    }
}

/// `L` i.i.d. draws from the proposal, reproducible from `seed`.
pub fn draw_batch(scenario: &Scenario, samples: usize, mode: ProposalMode, seed: u64) -> Result<SampleBatch> {
    scenario.prior().check_proposal(mode)?;
    let plan = SamplePlan::new(samples, mode, seed)?;
    plan.draw_chunks(scenario, 0..plan.chunk_count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{CostFunction, DecisionSpace, ObjectSpace, Prior, SensorModel};

    fn gauss() -> Scenario {
        Scenario::new(
            Prior::standard_normal(),
            vec![SensorModel::gaussian_iid(1, 1.0, 1.0).unwrap(); 2],
            DecisionSpace::real_line(),
            CostFunction::Quadratic,
        )
        .unwrap()
    }

    #[test]
    fn prior_mode_mean_and_unit_weights() {
        let b = draw_batch(&gauss(), 100_000, ProposalMode::Prior, 1).unwrap();
        let mean = b.objects().iter().sum::<f64>() / b.len() as f64;
        assert!(mean.abs() < 0.02);
        assert!(b.weights().iter().all(|w| *w == 1.0));
    }

    #[test]
    fn point_mass_prior() {
        let s = Scenario::new(
            Prior::discrete(ObjectSpace::points(vec![0.0, 1.0, 2.0, 3.0]).unwrap(), vec![1.0, 0.0, 0.0, 0.0]).unwrap(),
            vec![SensorModel::gaussian_iid(1, 1.0, 1.0).unwrap()],
            DecisionSpace::real_line(),
            CostFunction::Quadratic,
        )
        .unwrap();
        let b = draw_batch(&s, 5000, ProposalMode::Prior, 9).unwrap();
        assert!(b.objects().iter().all(|h| *h == 0.0));
    }

    #[test]
    fn sub_batches_concatenate_to_full_batch() {
        let s = gauss();
        let plan = SamplePlan::new(5000, ProposalMode::Prior, 77).unwrap();
        let full = draw_batch(&s, 5000, ProposalMode::Prior, 77).unwrap();
        let mut parts = plan.draw_chunks(&s, 0..2).unwrap();
        parts.append(plan.draw_chunks(&s, 2..plan.chunk_count()).unwrap());
        assert_eq!(full, parts);
        assert_eq!(full.len(), 5000);
        assert_ne!(full, draw_batch(&s, 5000, ProposalMode::Prior, 78).unwrap());
    }

    #[test]
    fn uniform_mode_needs_bounded_object_space() {
        assert!(draw_batch(&gauss(), 10, ProposalMode::Uniform, 0).is_err());
    }
}
