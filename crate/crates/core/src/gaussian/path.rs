use std::io::Write;

use crate::error::{Error, Result};

/// Values of a `d`-dimensional path on a finite time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledPath {
    times: Vec<f64>,
    dim: usize,
    values: Vec<f64>,
}

impl SampledPath {
    pub fn new(times: Vec<f64>, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() != times.len() * dim {
            return Err(Error::Dimension(format!(
                "{} values for {} times of dimension {dim}",
                values.len(),
                times.len()
            )));
        }
        Ok(SampledPath { times, dim, values })
    }

    /// Path from per-time points.
    pub fn from_points(times: Vec<f64>, points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(0, |p| p.len());
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::Dimension("ragged points".into()));
        }
        Self::new(times, dim, points.iter().flatten().copied().collect())
    }

    /// Straight line `t ↦ start + t·velocity`.
    pub fn linear(times: Vec<f64>, start: &[f64], velocity: &[f64]) -> Self {
        let dim = start.len();
        let values = times
            .iter()
            .flat_map(|t| start.iter().zip(velocity).map(move |(a, v)| a + t * v))
            .collect();
        SampledPath { times, dim, values }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn increment(&self, i: usize, j: usize) -> Vec<f64> {
        self.point(j).iter().zip(self.point(i)).map(|(b, a)| b - a).collect()
    }

    /// Component `k` as a scalar series.
    pub fn component(&self, k: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.point(i)[k]).collect()
    }

    /// `⟨φ, X_t⟩` along the path.
    pub fn project(&self, phi: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|i| self.point(i).iter().zip(phi).map(|(x, p)| x * p).sum()).collect()
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        SampledPath { times: self.times.clone(), dim: self.dim, values: self.values.iter().map(|v| v * lambda).collect() }
    }

    /// Index of a grid time, matched to 1e-12 relative.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let scale = self.times.last().map_or(1.0, |x| x.abs().max(1.0));
        let i = self.times.partition_point(|&x| x < t - 1e-12 * scale);
        (i < self.len() && (self.times[i] - t).abs() <= 1e-12 * scale).then_some(i)
    }

    /// Sub-path on `[i, j]`.
    pub fn window(&self, i: usize, j: usize) -> Self {
        SampledPath {
            times: self.times[i..=j].to_vec(),
            dim: self.dim,
            values: self.values[i * self.dim..(j + 1) * self.dim].to_vec(),
        }
    }

    /// Reversed path `t ↦ X_{T+t0-t}` on the same grid spacing.
    pub fn reversed(&self) -> Self {
        let (t0, t1) = (self.times[0], self.times[self.len() - 1]);
        let times = self.times.iter().rev().map(|t| t0 + t1 - t).collect();
        let values = (0..self.len()).rev().flat_map(|i| self.point(i).to_vec()).collect();
        SampledPath { times, dim: self.dim, values }
    }

    /// CSV with header `t,x1,...,xd`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let header: Vec<String> = (1..=self.dim).map(|k| format!("x{k}")).collect();
        writeln!(w, "t,{}", header.join(","))?;
        for i in 0..self.len() {
            let row: Vec<String> = self.point(i).iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(w, "{:.17e},{}", self.times[i], row.join(","))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout_and_lookup() {
        let p = SampledPath::linear(vec![0.0, 0.5, 1.0], &[0.0, 1.0], &[2.0, 0.0]);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x1,x2\n"));
        assert_eq!(text.lines().count(), 4);
        assert_eq!(p.index_of(0.5), Some(1));
        assert_eq!(p.index_of(0.25), None);
        assert_eq!(p.increment(0, 2), vec![2.0, 0.0]);
        assert!(SampledPath::new(vec![0.0], 2, vec![1.0]).is_err());
    }
}
