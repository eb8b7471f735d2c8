//! Labeled samples and datasets on the unit cube.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::error::{invalid_input, Error, Result};
use crate::rng::Stream;

/// One observation `(x, y)` with `x ∈ [0,1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub x: Vec<f64>,
    pub y: f64,
}

impl LabeledSample {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Source,
    TargetTrain,
    TargetValidate,
    /// Unsplit target sample, or held-out evaluation data.
    Target,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Source => "source",
            Role::TargetTrain => "target-train",
            Role::TargetValidate => "target-validate",
            Role::Target => "target",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "source" => Ok(Role::Source),
            "target-train" => Ok(Role::TargetTrain),
            "target-validate" => Ok(Role::TargetValidate),
            "target" => Ok(Role::Target),
            other => Err(invalid_input(format!("unknown dataset role `{other}`"))),
        }
    }
}

/// Samples sharing one dimension, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    role: Role,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize, role: Role, samples: Vec<LabeledSample>) -> Result<Self> {
        let mut xs = Vec::with_capacity(dim * samples.len());
        let mut ys = Vec::with_capacity(samples.len());
        for s in samples {
            if s.x.len() != dim {
                return Err(invalid_input(format!(
                    "sample of dimension {} in a dataset of dimension {dim}",
                    s.x.len()
                )));
            }
            xs.extend_from_slice(&s.x);
            ys.push(s.y);
        }
        Self::from_columns(dim, role, xs, ys)
    }

    /// Build from a flat row-major design matrix and response vector.
    pub fn from_columns(dim: usize, role: Role, xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(invalid_input("dimension must be positive"));
        }
        if xs.len() != dim * ys.len() {
            return Err(invalid_input("design matrix does not match response count"));
        }
        if let Some(v) = xs.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid_input(format!("coordinate {v} outside [0,1]")));
        }
        if let Some(v) = ys.iter().find(|v| !v.is_finite()) {
            return Err(invalid_input(format!("non-finite response {v}")));
        }
        Ok(Self { dim, role, xs, ys })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    #[inline]
    pub fn x(&self, i: usize) -> &[f64] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn y(&self, i: usize) -> f64 {
        self.ys[i]
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn xs_flat(&self) -> &[f64] {
        &self.xs
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&[f64], f64)> + '_ {
        self.xs.chunks_exact(self.dim).zip(self.ys.iter().copied())
    }

    pub fn samples(&self) -> Vec<LabeledSample> {
        self.iter().map(|(x, y)| LabeledSample::new(x.to_vec(), y)).collect()
    }

    pub fn mean_response(&self) -> f64 {
        if self.ys.is_empty() {
            return 0.0;
        }
        self.ys.iter().sum::<f64>() / self.ys.len() as f64
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize], role: Role) -> Self {
        let mut xs = Vec::with_capacity(indices.len() * self.dim);
        let mut ys = Vec::with_capacity(indices.len());
        for &i in indices {
            xs.extend_from_slice(self.x(i));
            ys.push(self.ys[i]);
        }
        Self { dim: self.dim, role, xs, ys }
    }

    /// Replace responses, keeping the design.
    pub fn map_responses(&self, mut f: impl FnMut(&[f64], f64) -> f64) -> Self {
        let ys = self.iter().map(|(x, y)| f(x, y)).collect();
        Self { dim: self.dim, role: self.role, xs: self.xs.clone(), ys }
    }
}

/// Split a target sample into training and validation halves by a seeded
/// permutation. The training half has `floor(n/2)` points, the validation
/// half the rest.
pub fn split_target(target: &Dataset, rng: &mut Stream) -> Result<(Dataset, Dataset)> {
    let n = target.len();
    if n < 2 {
        return Err(invalid_input(format!("cannot split a target sample of size {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let n_train = n / 2;
    let train = target.subset(&order[..n_train], Role::TargetTrain);
    let validate = target.subset(&order[n_train..], Role::TargetValidate);
    Ok((train, validate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;

    fn line(n: usize) -> Dataset {
        let samples = (0..n)
            .map(|i| LabeledSample::new(vec![i as f64 / n as f64], i as f64))
            .collect();
        Dataset::new(1, Role::Target, samples).unwrap()
    }

    #[test]
    fn rejects_out_of_cube_and_nonfinite() {
        let bad = vec![LabeledSample::new(vec![1.5], 0.0)];
        assert!(Dataset::new(1, Role::Source, bad).is_err());
        let bad = vec![LabeledSample::new(vec![0.5], f64::NAN)];
        assert!(Dataset::new(1, Role::Source, bad).is_err());
        let bad = vec![LabeledSample::new(vec![0.5, 0.5], 1.0)];
        assert!(Dataset::new(1, Role::Source, bad).is_err());
    }

    #[test]
    fn split_is_disjoint_and_balanced() {
        let d = line(21);
        let (t1, t2) = split_target(&d, &mut RngSeed::new(1, 0).stream()).unwrap();
        assert_eq!(t1.len(), 10);
        assert_eq!(t2.len(), 11);
        assert_eq!(t1.role(), Role::TargetTrain);
        assert_eq!(t2.role(), Role::TargetValidate);
        let mut all: Vec<f64> = t1.ys().iter().chain(t2.ys()).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..21).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn split_needs_two_points() {
        assert!(split_target(&line(1), &mut RngSeed::default().stream()).is_err());
    }
}
