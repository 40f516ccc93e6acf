//! JSON instance files: one state and a tuple of observables.
//!
//! ```json
//! { "n": 2,
//!   "density": [[[0.7, 0], [0, 0]], [[0, 0], [0.3, 0]]],
//!   "observables": [ [[[0, 0], [1, 0]], [[1, 0], [0, 0]]] ] }
//! ```
//!
//! Complex entries are `[re, im]` pairs.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::Error;
use crate::states::{sample_density_with, sample_observable_with, CMatrix, DensityMatrix, Observable, ObservableTuple};

pub type RawMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub n: usize,
    pub density: RawMatrix,
    pub observables: Vec<RawMatrix>,
}

/// A validated instance.
#[derive(Debug, Clone)]
pub struct Instance {
    pub density: DensityMatrix,
    pub observables: ObservableTuple,
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error("{path}: {source}")]
    Invalid {
        path: String,
        #[source]
        source: Error,
    },
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<Self, InstanceError> {
        serde_json::from_str(text).map_err(|e| InstanceError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("instance serializes")
    }

    pub fn validate(&self) -> Result<Instance, InstanceError> {
        if self.n == 0 {
            return Err(InstanceError::Schema {
                path: "n".into(),
                message: "dimension must be positive".into(),
            });
        }
        let dm = to_matrix(self.n, &self.density, "density")?;
        let density = DensityMatrix::new(dm).map_err(|source| InstanceError::Invalid {
            path: "density".into(),
            source,
        })?;
        if self.observables.is_empty() {
            return Err(InstanceError::Schema {
                path: "observables".into(),
                message: "at least one observable is required".into(),
            });
        }
        let mut obs = Vec::with_capacity(self.observables.len());
        for (k, raw) in self.observables.iter().enumerate() {
            let path = format!("observables[{k}]");
            let m = to_matrix(self.n, raw, &path)?;
            obs.push(Observable::new(m).map_err(|source| InstanceError::Invalid {
                path: path.clone(),
                source,
            })?);
        }
        let observables = ObservableTuple::new(obs).map_err(|source| InstanceError::Invalid {
            path: "observables".into(),
            source,
        })?;
        Ok(Instance { density, observables })
    }

    pub fn from_parts(density: &DensityMatrix, obs: &ObservableTuple) -> Self {
        InstanceFile {
            n: density.dim(),
            density: from_matrix(density.matrix()),
            observables: obs.iter().map(|a| from_matrix(a.matrix())).collect(),
        }
    }
}

fn to_matrix(n: usize, raw: &RawMatrix, path: &str) -> Result<CMatrix, InstanceError> {
    if raw.len() != n {
        return Err(InstanceError::Schema {
            path: path.into(),
            message: format!("expected {n} rows, found {}", raw.len()),
        });
    }
    for (i, row) in raw.iter().enumerate() {
        if row.len() != n {
            return Err(InstanceError::Schema {
                path: format!("{path}[{i}]"),
                message: format!("expected {n} entries, found {}", row.len()),
            });
        }
        for (j, z) in row.iter().enumerate() {
            if !z[0].is_finite() || !z[1].is_finite() {
                return Err(InstanceError::Schema {
                    path: format!("{path}[{i}][{j}]"),
                    message: "entry is not finite".into(),
                });
            }
        }
    }
    Ok(CMatrix::from_fn(n, n, |i, j| Complex64::new(raw[i][j][0], raw[i][j][1])))
}

fn from_matrix(m: &CMatrix) -> RawMatrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

/// The random instance a sweep uses for one trial: a state followed by
/// `count` observables, all drawn from one generator seeded with `seed`.
pub fn sample_instance(n: usize, count: usize, seed: u64, min_gap: f64) -> crate::Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_instance_with(&mut rng, n, count, min_gap)
}

pub fn sample_instance_with<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    count: usize,
    min_gap: f64,
) -> crate::Result<Instance> {
    let density = sample_density_with(rng, n, min_gap)?;
    let obs = (0..count)
        .map(|_| sample_observable_with(rng, n))
        .collect::<crate::Result<Vec<_>>>()?;
    Ok(Instance {
        density,
        observables: ObservableTuple::new(obs)?,
    })
}
