//! Seeded, reproducible samples of the two Q-Wiener processes
//! `W_j = sum_k beta_k^j (1 + lambda_k)^(-gamma_j / 2) e_k`.
//!
//! Every Brownian increment is a pure function of
//! `(master_seed, path_index, j, k, n, level)`: no sequential generator
//! state is shared, so tables can be built in any order, on any number of
//! threads, and for any truncation `K` without perturbing existing modes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fields::Field;
use crate::spectral_basis::SpectralBasis;

/// Counter-based normal deviates from keyed SplitMix64 mixing.
pub mod keyed {
    use std::f64::consts::PI;

    const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
    const SALT: u64 = 0x6A09_E667_F3BC_C909;

    #[inline]
    pub fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Order-sensitive hash of a key tuple.
    #[inline]
    pub fn hash(words: &[u64]) -> u64 {
        words
            .iter()
            .fold(mix(SALT), |h, &w| mix(h.wrapping_add(GOLDEN) ^ mix(w)))
    }

    /// Uniform on `(0, 1]` from the top 53 bits.
    #[inline]
    fn open_unit(x: u64) -> f64 {
        ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal deviate keyed by `words` (Box-Muller, cosine branch).
    #[inline]
    pub fn normal(words: &[u64]) -> f64 {
        let h = hash(words);
        let u1 = open_unit(mix(h.wrapping_add(GOLDEN)));
        let u2 = open_unit(mix(h.wrapping_add(GOLDEN.wrapping_mul(2))));
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }
}

/// Which of the two independent Wiener processes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseProcess {
    /// Drives the activator.
    W1,
    /// Drives the inhibitor.
    W2,
}

impl NoiseProcess {
    pub const BOTH: [NoiseProcess; 2] = [NoiseProcess::W1, NoiseProcess::W2];

    pub fn index(self) -> usize {
        match self {
            NoiseProcess::W1 => 0,
            NoiseProcess::W2 => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub gamma1: f64,
    pub gamma2: f64,
    pub mode_count: usize,
    pub master_seed: u64,
}

impl NoiseSpec {
    /// `gamma_1 = gamma_2 = d + 1`.
    pub fn with_default_gammas(dim: usize, mode_count: usize, master_seed: u64) -> Self {
        let g = dim as f64 + 1.0;
        NoiseSpec {
            gamma1: g,
            gamma2: g,
            mode_count,
            master_seed,
        }
    }

    pub fn gamma(&self, j: NoiseProcess) -> f64 {
        match j {
            NoiseProcess::W1 => self.gamma1,
            NoiseProcess::W2 => self.gamma2,
        }
    }

    /// Hard errors.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, g) in [("gamma1", self.gamma1), ("gamma2", self.gamma2)] {
            if !(g.is_finite() && g >= 0.0) {
                out.push(format!("{name} must be finite and nonnegative, got {g}"));
            }
        }
        if self.mode_count == 0 {
            out.push("noise mode count must be positive".into());
        }
        out
    }

    /// Trace-class condition `gamma_j > d`; violations are warnings only.
    pub fn warnings(&self, dim: usize) -> Vec<String> {
        [("gamma1", self.gamma1), ("gamma2", self.gamma2)]
            .into_iter()
            .filter(|&(_, g)| g <= dim as f64)
            .map(|(name, g)| format!("{name} = {g} does not satisfy gamma > d = {dim}"))
            .collect()
    }

    /// Per-mode standard deviations `(1 + lambda_k)^(-gamma_j / 2)`.
    pub fn modal_scale(&self, basis: &SpectralBasis, j: NoiseProcess) -> Vec<f64> {
        let g = self.gamma(j);
        basis
            .eigenvalues()
            .iter()
            .map(|&l| (1.0 + l).powf(-g / 2.0))
            .collect()
    }
}

/// Strictly increasing times `0 = t_0 < ... < t_N = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(horizon: f64, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) || !(horizon.is_finite() && horizon >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "time grid needs dt > 0 and T >= 0, got dt = {dt}, T = {horizon}"
            )));
        }
        let steps = (horizon / dt).round();
        if (steps * dt - horizon).abs() > 1e-9 * horizon.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "T / dt = {} is not an integer",
                horizon / dt
            )));
        }
        let steps = steps as usize;
        let times = (0..=steps)
            .map(|i| horizon * i as f64 / steps.max(1) as f64)
            .collect();
        Ok(TimeGrid { times })
    }

    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        if times.first() != Some(&0.0) {
            return Err(Error::InvalidParameter("time grid must start at 0".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidParameter(
                "time grid must be strictly increasing and finite".into(),
            ));
        }
        Ok(TimeGrid { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn dt(&self, n: usize) -> f64 {
        self.times[n + 1] - self.times[n]
    }

    /// Grid with every interval halved.
    pub fn refined(&self) -> TimeGrid {
        let mut times = Vec::with_capacity(2 * self.times.len() - 1);
        for w in self.times.windows(2) {
            times.push(w[0]);
            times.push(0.5 * (w[0] + w[1]));
        }
        times.push(self.horizon());
        TimeGrid { times }
    }
}

/// Table of Brownian increments `dB[j][k][n]` on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    grid: TimeGrid,
    mode_count: usize,
    path_index: u64,
    master_seed: u64,
    level: u32,
    // layout [n][j][k]
    increments: Vec<f64>,
}

/// Draw the increments of path `path_index` on `grid`.
pub fn sample_path(spec: &NoiseSpec, grid: &TimeGrid, path_index: u64) -> NoisePath {
    let k_count = spec.mode_count;
    let mut increments = vec![0.0; grid.steps() * 2 * k_count];
    for n in 0..grid.steps() {
        let sd = grid.dt(n).sqrt();
        for j in 0..2 {
            let row = &mut increments[(n * 2 + j) * k_count..(n * 2 + j + 1) * k_count];
            for (k, slot) in row.iter_mut().enumerate() {
                *slot = sd * keyed::normal(&[spec.master_seed, path_index, j as u64, k as u64, n as u64, 0]);
            }
        }
    }
    NoisePath {
        grid: grid.clone(),
        mode_count: k_count,
        path_index,
        master_seed: spec.master_seed,
        level: 0,
        increments,
    }
}

impl NoisePath {
    /// All-zero increments, for noiseless runs.
    pub fn silent(grid: &TimeGrid, mode_count: usize) -> Self {
        NoisePath {
            grid: grid.clone(),
            mode_count,
            path_index: 0,
            master_seed: 0,
            level: 0,
            increments: vec![0.0; grid.steps() * 2 * mode_count],
        }
    }

    /// Brownian-bridge refinement onto the halved grid. Each coarse
    /// increment splits into two whose sum reproduces it.
    pub fn refine(&self) -> NoisePath {
        let k_count = self.mode_count;
        let level = self.level + 1;
        let steps = self.grid.steps();
        let mut increments = vec![0.0; 2 * steps * 2 * k_count];
        for n in 0..steps {
            let half_sd = 0.5 * self.grid.dt(n).sqrt();
            for j in 0..2 {
                for k in 0..k_count {
                    let coarse = self.increments[(n * 2 + j) * k_count + k];
                    let z = keyed::normal(&[
                        self.master_seed,
                        self.path_index,
                        j as u64,
                        k as u64,
                        n as u64,
                        level as u64,
                    ]);
                    let left = 0.5 * coarse + half_sd * z;
                    increments[((2 * n) * 2 + j) * k_count + k] = left;
                    increments[((2 * n + 1) * 2 + j) * k_count + k] = coarse - left;
                }
            }
        }
        NoisePath {
            grid: self.grid.refined(),
            mode_count: k_count,
            path_index: self.path_index,
            master_seed: self.master_seed,
            level,
            increments,
        }
    }

    pub fn refined(&self, levels: u32) -> NoisePath {
        (0..levels).fold(self.clone(), |p, _| p.refine())
    }

    pub fn time_grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    /// `dB[j][k][n]`
    pub fn increment(&self, j: NoiseProcess, k: usize, n: usize) -> f64 {
        self.increments[(n * 2 + j.index()) * self.mode_count + k]
    }

    /// The K Brownian increments of process `j` over step `n`.
    pub fn step_increments(&self, j: NoiseProcess, n: usize) -> &[f64] {
        let start = (n * 2 + j.index()) * self.mode_count;
        &self.increments[start..start + self.mode_count]
    }

    /// Modal coefficients of `dW_j` over step `n`.
    pub fn increment_modal(&self, n: usize, j: NoiseProcess, scale: &[f64]) -> Vec<f64> {
        self.step_increments(j, n)
            .iter()
            .zip(scale)
            .map(|(b, s)| b * s)
            .collect()
    }

    /// Raw float64 little-endian dump in `[j][k][n]` order.
    pub fn write_raw(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for j in NoiseProcess::BOTH {
            for k in 0..self.mode_count {
                for n in 0..self.steps() {
                    w.write_all(&self.increment(j, k, n).to_le_bytes())
                        .map_err(|e| Error::io(path, e))?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// `dW_j` over step `n` as a field with modal coefficients
/// `(1 + lambda_k)^(-gamma_j / 2) dB[j][k][n]`.
pub fn increment_field(
    path: &NoisePath,
    n: usize,
    j: NoiseProcess,
    basis: &SpectralBasis,
    spec: &NoiseSpec,
) -> Result<Field> {
    if n >= path.steps() {
        return Err(Error::IndexOutOfRange {
            what: "time step",
            index: n,
            limit: path.steps(),
        });
    }
    if basis.mode_count() != path.mode_count() {
        return Err(Error::LengthMismatch {
            what: "noise modes",
            expected: basis.mode_count(),
            found: path.mode_count(),
        });
    }
    let coeffs = path.increment_modal(n, j, &spec.modal_scale(basis, j));
    Field::from_modal(basis, coeffs)?.to_nodal(basis)
}

/// Partial trace `sum_k (1 + lambda_k)^(-gamma_j)` over the truncation.
pub fn trace_of_q(basis: &SpectralBasis, spec: &NoiseSpec, j: NoiseProcess) -> f64 {
    let g = spec.gamma(j);
    basis.eigenvalues().iter().map(|&l| (1.0 + l).powf(-g)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::norm_lp;
    use crate::spectral_basis::{DomainSpec, EigenvalueConvention};
    use std::f64::consts::PI;

    fn spec(k: usize) -> NoiseSpec {
        NoiseSpec::with_default_gammas(1, k, 77)
    }

    #[test]
    fn deterministic_tables() {
        let grid = TimeGrid::uniform(1.0, 0.1).unwrap();
        let a = sample_path(&spec(8), &grid, 3);
        let b = sample_path(&spec(8), &grid, 3);
        assert_eq!(a, b);
        assert_ne!(a, sample_path(&spec(8), &grid, 4));
    }

    #[test]
    fn extending_modes_keeps_prefix() {
        let grid = TimeGrid::uniform(0.5, 0.05).unwrap();
        let small = sample_path(&spec(8), &grid, 1);
        let big = sample_path(&spec(16), &grid, 1);
        for j in NoiseProcess::BOTH {
            for n in 0..grid.steps() {
                assert_eq!(small.step_increments(j, n), &big.step_increments(j, n)[..8]);
            }
        }
    }

    #[test]
    fn moments() {
        let grid = TimeGrid::uniform(1.0, 0.01).unwrap();
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        let mut cross = 0.0;
        let mut count = 0.0;
        for p in 0..10 {
            let path = sample_path(&spec(100), &grid, p);
            for n in 0..100 {
                for k in 0..100 {
                    let a = path.increment(NoiseProcess::W1, k, n) / grid.dt(n).sqrt();
                    let b = path.increment(NoiseProcess::W2, k, n) / grid.dt(n).sqrt();
                    s1 += a;
                    s2 += a * a;
                    cross += a * b;
                    count += 1.0;
                }
            }
        }
        let mean = s1 / count;
        let var = s2 / count - mean * mean;
        assert!(mean.abs() < 0.02, "{mean}");
        assert!((var - 1.0).abs() < 0.02, "{var}");
        assert!((cross / count).abs() < 0.02);
    }

    #[test]
    fn bridge_sums_reproduce_coarse() {
        let grid = TimeGrid::uniform(1.0, 0.25).unwrap();
        let coarse = sample_path(&spec(4), &grid, 9);
        let fine = coarse.refined(2);
        assert_eq!(fine.steps(), 16);
        for j in NoiseProcess::BOTH {
            for k in 0..4 {
                for n in 0..4 {
                    let s: f64 = (0..4).map(|i| fine.increment(j, k, 4 * n + i)).sum();
                    let c = coarse.increment(j, k, n);
                    assert!((s - c).abs() < 1e-14 * c.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn increment_field_scaling() {
        let basis = SpectralBasis::build(&DomainSpec::interval(1.0, 32), 8).unwrap();
        let s = spec(8);
        let grid = TimeGrid::uniform(0.1, 0.01).unwrap();
        let path = sample_path(&s, &grid, 0);
        let f = increment_field(&path, 3, NoiseProcess::W2, &basis, &s).unwrap();
        assert_eq!(f.modal().unwrap()[0], path.increment(NoiseProcess::W2, 0, 3));
        assert!(increment_field(&path, 10, NoiseProcess::W1, &basis, &s).is_err());

        // truncation monotonicity of the increment norm
        let mut last = 0.0;
        for k in 1..=8 {
            let b = SpectralBasis::build(&DomainSpec::interval(1.0, 32), k).unwrap();
            let sk = NoiseSpec { mode_count: k, ..s.clone() };
            let pk = sample_path(&sk, &grid, 0);
            let norm = norm_lp(&b, &increment_field(&pk, 0, NoiseProcess::W1, &b, &sk).unwrap(), 2.0).unwrap();
            assert!(norm >= last - 1e-15);
            last = norm;
        }
    }

    #[test]
    fn partial_traces() {
        let d = DomainSpec::interval(1.0, 256).with_convention(EigenvalueConvention::Paper1d);
        let basis = SpectralBasis::build(&d, 64).unwrap();
        let s = NoiseSpec { gamma1: 2.0, gamma2: 1e6, mode_count: 64, master_seed: 0 };
        let oracle: f64 = (0..64)
            .map(|k| (1.0 + 4.0 * PI * PI * (k * k) as f64).powi(-2))
            .sum();
        assert!((trace_of_q(&basis, &s, NoiseProcess::W1) - oracle).abs() < 1e-14);
        assert_eq!(trace_of_q(&basis, &s, NoiseProcess::W2), 1.0);

        let one = SpectralBasis::build(&DomainSpec::interval(1.0, 8), 1).unwrap();
        assert_eq!(trace_of_q(&one, &s, NoiseProcess::W1), 1.0);

        let lo = NoiseSpec { gamma1: 1.5, ..s.clone() };
        assert!(trace_of_q(&basis, &lo, NoiseProcess::W1) > trace_of_q(&basis, &s, NoiseProcess::W1));
    }

    #[test]
    fn gamma_policy() {
        let s = NoiseSpec { gamma1: 0.5, gamma2: 2.0, mode_count: 4, master_seed: 0 };
        assert!(s.violations().is_empty());
        assert_eq!(s.warnings(1).len(), 1);
        let bad = NoiseSpec { gamma1: -1.0, ..s };
        assert_eq!(bad.violations().len(), 1);
    }

    #[test]
    fn grids() {
        assert!(TimeGrid::uniform(1.0, 0.3).is_err());
        let g = TimeGrid::uniform(0.0, 0.1).unwrap();
        assert_eq!(g.steps(), 0);
        assert!(TimeGrid::from_times(vec![0.0, 0.5, 0.5]).is_err());
        let g = TimeGrid::uniform(1.0, 1e-3).unwrap();
        assert_eq!(g.horizon(), 1.0);
        assert_eq!(g.steps(), 1000);
    }
}
