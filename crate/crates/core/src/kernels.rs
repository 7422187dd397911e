//! Generalized distances over feature matrices: an aggregation mode crossed
//! with a distance function, plus analytic gradients for the policy side.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{argmax_rows, average_rows, frobenius_sq_dist, max_rows, FeatureMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Aggregation {
    None,
    AvgPool,
    MaxPool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistanceFn {
    Euclidean,
    Cosine,
}

/// A distance spec: how rows are aggregated, which distance applies, and the
/// margin coefficient `gamma` used when the distance drives a preference
/// objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub aggregation: Aggregation,
    pub distance: DistanceFn,
    pub gamma: f64,
}

impl KernelSpec {
    pub fn new(aggregation: Aggregation, distance: DistanceFn, gamma: f64) -> Result<Self> {
        let spec = KernelSpec {
            aggregation,
            distance,
            gamma,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "kernel gamma must be positive and finite, got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// All six aggregation x distance combinations at a shared gamma.
    pub fn all_combinations(gamma: f64) -> Vec<KernelSpec> {
        let mut out = Vec::with_capacity(6);
        for agg in [Aggregation::None, Aggregation::AvgPool, Aggregation::MaxPool] {
            for dist in [DistanceFn::Euclidean, DistanceFn::Cosine] {
                out.push(KernelSpec {
                    aggregation: agg,
                    distance: dist,
                    gamma,
                });
            }
        }
        out
    }

    pub fn label(&self) -> String {
        let agg = match self.aggregation {
            Aggregation::None => "None",
            Aggregation::AvgPool => "AvgPool",
            Aggregation::MaxPool => "MaxPool",
        };
        let dist = match self.distance {
            DistanceFn::Euclidean => "Euclidean",
            DistanceFn::Cosine => "Cosine",
        };
        format!("{agg}+{dist}")
    }
}

fn sq_euclid(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(&x, &y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

fn norm(u: &[f64]) -> f64 {
    u.iter().map(|&x| x * x).sum::<f64>().sqrt()
}

/// Cosine distance `1 - cos(u, v)`. Errors on a zero-norm operand instead of
/// inventing a value.
fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNormCosine);
    }
    let dot: f64 = u.iter().zip(v).map(|(&x, &y)| x * y).sum();
    Ok(1.0 - dot / (nu * nv))
}

/// Gradient of `1 - cos(u, v)` with respect to both operands.
fn cosine_distance_grad(u: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNormCosine);
    }
    let dot: f64 = u.iter().zip(v).map(|(&x, &y)| x * y).sum();
    let cos = dot / (nu * nv);
    let gu = u
        .iter()
        .zip(v)
        .map(|(&x, &y)| cos * x / (nu * nu) - y / (nu * nv))
        .collect();
    let gv = v
        .iter()
        .zip(u)
        .map(|(&y, &x)| cos * y / (nv * nv) - x / (nu * nv))
        .collect();
    Ok((gu, gv))
}

fn aggregate(agg: Aggregation, h: &FeatureMatrix) -> Vec<f64> {
    match agg {
        Aggregation::None => unreachable!("aggregate is only called for pooling modes"),
        Aggregation::AvgPool => average_rows(h),
        Aggregation::MaxPool => max_rows(h),
    }
}

/// Distance between two equally shaped feature matrices under `spec`.
pub fn kernel_distance(spec: &KernelSpec, a: &FeatureMatrix, b: &FeatureMatrix) -> Result<f64> {
    a.same_shape(b)?;
    match (spec.aggregation, spec.distance) {
        (Aggregation::None, DistanceFn::Euclidean) => frobenius_sq_dist(a, b),
        (Aggregation::None, DistanceFn::Cosine) => {
            let mut acc = 0.0;
            for (ra, rb) in a.iter_rows().zip(b.iter_rows()) {
                acc += cosine_distance(ra, rb)?;
            }
            Ok(acc / a.rows() as f64)
        }
        (agg, DistanceFn::Euclidean) => {
            let u = aggregate(agg, a);
            let v = aggregate(agg, b);
            Ok(sq_euclid(&u, &v))
        }
        (agg, DistanceFn::Cosine) => {
            let u = aggregate(agg, a);
            let v = aggregate(agg, b);
            cosine_distance(&u, &v)
        }
    }
}

/// Analytic gradient of `kernel_distance(spec, a, b)` with respect to both
/// matrices. MaxPool routes the pooled gradient to the argmax row per column
/// (ties to the lowest row index).
pub fn kernel_distance_grad(
    spec: &KernelSpec,
    a: &FeatureMatrix,
    b: &FeatureMatrix,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    a.same_shape(b)?;
    let (l, d) = a.shape();
    match (spec.aggregation, spec.distance) {
        (Aggregation::None, DistanceFn::Euclidean) => {
            let ga = a.zip_map(b, |x, y| 2.0 * (x - y))?;
            let gb = ga.map(|g| -g);
            Ok((ga, gb))
        }
        (Aggregation::None, DistanceFn::Cosine) => {
            let mut ga = vec![0.0; l * d];
            let mut gb = vec![0.0; l * d];
            let scale = 1.0 / l as f64;
            for i in 0..l {
                let (gu, gv) = cosine_distance_grad(a.row(i), b.row(i))?;
                for j in 0..d {
                    ga[i * d + j] = gu[j] * scale;
                    gb[i * d + j] = gv[j] * scale;
                }
            }
            Ok((
                FeatureMatrix::new(l, d, ga)?,
                FeatureMatrix::new(l, d, gb)?,
            ))
        }
        (agg, dist) => {
            let u = aggregate(agg, a);
            let v = aggregate(agg, b);
            let (gu, gv) = match dist {
                DistanceFn::Euclidean => {
                    let gu: Vec<f64> = u.iter().zip(&v).map(|(&x, &y)| 2.0 * (x - y)).collect();
                    let gv = gu.iter().map(|&g| -g).collect();
                    (gu, gv)
                }
                DistanceFn::Cosine => cosine_distance_grad(&u, &v)?,
            };
            let spread = |h: &FeatureMatrix, g: &[f64]| -> FeatureMatrix {
                let mut out = vec![0.0; l * d];
                match agg {
                    Aggregation::AvgPool => {
                        let scale = 1.0 / l as f64;
                        for i in 0..l {
                            for j in 0..d {
                                out[i * d + j] = g[j] * scale;
                            }
                        }
                    }
                    Aggregation::MaxPool => {
                        let rows = argmax_rows(h);
                        for j in 0..d {
                            out[rows[j] * d + j] = g[j];
                        }
                    }
                    Aggregation::None => unreachable!(),
                }
                FeatureMatrix::new(l, d, out).expect("finite gradient")
            };
            Ok((spread(a, &gu), spread(b, &gv)))
        }
    }
}
