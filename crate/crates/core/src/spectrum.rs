//! Sampled single-photon spectra `S(Delta_k)` in units of `1/omega_m`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// Absolute detuning tolerance (units of omega_m) for matching plan points to
/// spectrum rows.
pub const DETUNING_MATCH_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum<T> {
    detunings: Vec<T>,
    values: Vec<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<Vec<T>>,
}

impl<T: Real> Spectrum<T> {
    pub fn new(detunings: Vec<T>, values: Vec<T>) -> Result<Self> {
        if detunings.len() != values.len() {
            return Err(invalid(format!(
                "{} detunings but {} spectrum values",
                detunings.len(),
                values.len()
            )));
        }
        if detunings.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(invalid("spectrum contains non-finite entries"));
        }
        Ok(Self {
            detunings,
            values,
            sigma: None,
        })
    }

    /// Attaches per-point standard deviations.
    pub fn with_sigma(mut self, sigma: Vec<T>) -> Result<Self> {
        if sigma.len() != self.values.len() {
            return Err(invalid("sigma length does not match spectrum"));
        }
        if sigma.iter().any(|s| !(*s > T::zero()) || !s.is_finite()) {
            return Err(invalid("sigma entries must be finite and > 0"));
        }
        self.sigma = Some(sigma);
        Ok(self)
    }

    pub fn detunings(&self) -> &[T] {
        &self.detunings
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn sigma(&self) -> Option<&[T]> {
        self.sigma.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.detunings.windows(2).all(|w| w[0] < w[1])
    }

    /// Rows reordered by increasing detuning.
    pub fn sorted(&self) -> Self {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.detunings[a].partial_cmp(&self.detunings[b]).unwrap());
        Self {
            detunings: idx.iter().map(|&i| self.detunings[i]).collect(),
            values: idx.iter().map(|&i| self.values[i]).collect(),
            sigma: self
                .sigma
                .as_ref()
                .map(|s| idx.iter().map(|&i| s[i]).collect()),
        }
    }

    fn index_of(&self, detuning: T, tol: T) -> Option<usize> {
        let mut best: Option<(usize, T)> = None;
        for (i, &d) in self.detunings.iter().enumerate() {
            let gap = (d - detuning).abs();
            if gap <= tol && best.map_or(true, |(_, g)| gap < g) {
                best = Some((i, gap));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Values (and sigmas, when present) at the requested detunings. Every
    /// point must match a row within [`DETUNING_MATCH_TOLERANCE`]; no
    /// interpolation is performed.
    pub fn lookup(&self, points: &[T]) -> Result<(Vec<T>, Option<Vec<T>>)> {
        let tol = lit(DETUNING_MATCH_TOLERANCE);
        let mut missing = Vec::new();
        let mut rows = Vec::with_capacity(points.len());
        for &p in points {
            match self.index_of(p, tol) {
                Some(i) => rows.push(i),
                None => missing.push(to_f64(p)),
            }
        }
        if !missing.is_empty() {
            return Err(Error::MissingPoints(missing));
        }
        let values = rows.iter().map(|&i| self.values[i]).collect();
        let sigma = self
            .sigma
            .as_ref()
            .map(|s| rows.iter().map(|&i| s[i]).collect());
        Ok((values, sigma))
    }

    /// Trapezoidal integral over the sampled detunings (must be sorted).
    pub fn integrate(&self) -> T {
        let half: T = lit(0.5);
        self.detunings
            .windows(2)
            .zip(self.values.windows(2))
            .fold(T::zero(), |acc, (d, v)| acc + (d[1] - d[0]) * (v[0] + v[1]) * half)
    }

    /// Restriction to detunings inside `[low, high]`.
    pub fn window(&self, low: T, high: T) -> Self {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| self.detunings[i] >= low && self.detunings[i] <= high)
            .collect();
        Self {
            detunings: keep.iter().map(|&i| self.detunings[i]).collect(),
            values: keep.iter().map(|&i| self.values[i]).collect(),
            sigma: self.sigma.as_ref().map(|s| keep.iter().map(|&i| s[i]).collect()),
        }
    }
}

/// `max |a - b| / max |b|` over matching samples.
pub fn relative_linf<T: Real>(a: &[T], b: &[T]) -> T {
    let scale = b.iter().fold(T::zero(), |acc, &v| acc.max(v.abs()));
    let worst = a
        .iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc.max((x - y).abs()));
    worst / scale
}

/// `sum |a - b| / sum |b|` over matching samples.
pub fn relative_l1<T: Real>(a: &[T], b: &[T]) -> T {
    let scale = b.iter().fold(T::zero(), |acc, &v| acc + v.abs());
    let total = a
        .iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y).abs());
    total / scale
}
