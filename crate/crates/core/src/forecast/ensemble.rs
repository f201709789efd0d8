use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DisturbanceSample, ForecastError, MomentSet};

/// Eigenvalues of a covariance below this (relative to its largest) are
/// treated as exactly zero when the Cholesky factorization fails.
pub const COVARIANCE_FLOOR: f64 = 1e-12;

/// `m` disturbance trajectories over the prediction horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSet {
    pub seed: u64,
    pub members: Vec<Vec<DisturbanceSample>>,
}

impl EnsembleSet {
    /// A single member equal to `nominal`.
    pub fn nominal(nominal: &[DisturbanceSample], seed: u64) -> Self {
        Self {
            seed,
            members: vec![nominal.to_vec()],
        }
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn horizon(&self) -> usize {
        self.members.first().map_or(0, Vec::len)
    }

    /// Members restricted to steps `start..start+len`.
    pub fn window(&self, start: usize, len: usize) -> EnsembleSet {
        EnsembleSet {
            seed: self.seed,
            members: self
                .members
                .iter()
                .map(|m| m[start..start + len].to_vec())
                .collect(),
        }
    }
}

/// Mean and square-root factor of one step's error distribution.
struct Sampler {
    mean: Vector4<f64>,
    factor: Matrix4<f64>,
}

impl Sampler {
    fn new(moments: &MomentSet) -> Self {
        let sigma = Matrix4::from_fn(|r, c| moments.covariance[r][c]);
        let factor = match sigma.cholesky() {
            Some(ch) => ch.l(),
            None => {
                let eig = SymmetricEigen::new(sigma);
                let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
                let roots = eig.eigenvalues.map(|v| {
                    if v > COVARIANCE_FLOOR * scale {
                        v.sqrt()
                    } else {
                        0.0
                    }
                });
                eig.eigenvectors * Matrix4::from_diagonal(&roots)
            }
        };
        Self {
            mean: Vector4::from(moments.mean),
            factor,
        }
    }

    fn draw(&self, z: &Vector4<f64>) -> Vector4<f64> {
        self.mean + self.factor * z
    }
}

/// Samples `m` members around a nominal forecast.
///
/// `moments[i]` describes the forecast error `forecast - actual` at step
/// `i`; members are `nominal - w` with `w` drawn independently per step from
/// a normal distribution with those moments, so a member is a plausible
/// realization given the forecast. Steps without moments get `w = 0`.
/// PV and load are floored at zero. With `m = 1` the single member is the
/// nominal forecast. Member `j` uses its own random stream derived from
/// `(seed, j)`, so the result does not depend on thread scheduling.
pub fn generate_ensemble(
    nominal: &[DisturbanceSample],
    moments: &[Option<MomentSet>],
    m: usize,
    seed: u64,
) -> Result<EnsembleSet, ForecastError> {
    if m == 0 {
        return Err(ForecastError::InvalidArgument(
            "ensemble size must be at least 1".into(),
        ));
    }
    if moments.len() != nominal.len() {
        return Err(ForecastError::InvalidArgument(format!(
            "{} moment sets for a horizon of {} steps",
            moments.len(),
            nominal.len()
        )));
    }
    if m == 1 {
        return Ok(EnsembleSet::nominal(nominal, seed));
    }
    let samplers: Vec<Option<Sampler>> = moments.iter().map(|o| o.as_ref().map(Sampler::new)).collect();
    let members = (0..m)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            nominal
                .iter()
                .zip(&samplers)
                .map(|(d, sampler)| {
                    let z = Vector4::from_fn(|_, _| StandardNormal.sample(&mut rng));
                    let Some(sampler) = sampler else { return *d };
                    let w = sampler.draw(&z);
                    DisturbanceSample {
                        p_pv: (d.p_pv - w[0]).max(0.0),
                        p_load: (d.p_load - w[1]).max(0.0),
                        price: d.price - w[2],
                        t_amb: d.t_amb - w[3],
                    }
                })
                .collect()
        })
        .collect();
    Ok(EnsembleSet { seed, members })
}
