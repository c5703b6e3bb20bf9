//! Neumann-Laplacian eigenbasis on intervals and rectangles.
//!
//! Eigenfunctions are tensor products of normalized cosines
//! `c_f cos(f pi x / a)` sampled on a cell-centred uniform grid. On that
//! grid the uniform-weight rule is the trapezoidal rule of the even periodic
//! extension, so products of two retained modes integrate exactly and the
//! stored quadrature reproduces orthonormality to rounding.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

static NEXT_BASIS_ID: AtomicU64 = AtomicU64::new(1);

/// How eigenvalues are labelled on a 1D interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EigenvalueConvention {
    /// `lambda_k = 4 pi^2 k^2 / a^2`, realized by the even Neumann cosines
    /// `cos(2 pi k x / a)`. Only valid in one dimension.
    Paper1d,
    /// `lambda_k = (k pi / a)^2` per axis, the full Neumann cosine family.
    NeumannCosine,
}

impl EigenvalueConvention {
    pub fn as_str(self) -> &'static str {
        match self {
            EigenvalueConvention::Paper1d => "paper_1d",
            EigenvalueConvention::NeumannCosine => "neumann_cosine",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "paper_1d" => Some(EigenvalueConvention::Paper1d),
            "neumann_cosine" => Some(EigenvalueConvention::NeumannCosine),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub dim: usize,
    pub lengths: Vec<f64>,
    pub convention: EigenvalueConvention,
    pub grid_points: usize,
}

impl DomainSpec {
    pub fn interval(length: f64, grid_points: usize) -> Self {
        DomainSpec {
            dim: 1,
            lengths: vec![length],
            convention: EigenvalueConvention::NeumannCosine,
            grid_points,
        }
    }

    pub fn rectangle(a: f64, b: f64, grid_points: usize) -> Self {
        DomainSpec {
            dim: 2,
            lengths: vec![a, b],
            convention: EigenvalueConvention::NeumannCosine,
            grid_points,
        }
    }

    pub fn with_convention(mut self, convention: EigenvalueConvention) -> Self {
        self.convention = convention;
        self
    }

    /// Every violated invariant, in a stable order.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.dim != 1 && self.dim != 2 {
            out.push(format!("dim must be 1 or 2, got {}", self.dim));
        } else if self.lengths.len() != self.dim {
            out.push(format!(
                "expected {} domain lengths, got {}",
                self.dim,
                self.lengths.len()
            ));
        }
        for (axis, &len) in self.lengths.iter().enumerate() {
            if !(len.is_finite() && len > 0.0) {
                out.push(format!("domain length on axis {axis} must be positive, got {len}"));
            }
        }
        if self.grid_points < 4 || !self.grid_points.is_multiple_of(2) {
            out.push(format!(
                "grid_points must be even and >= 4, got {}",
                self.grid_points
            ));
        }
        if self.convention == EigenvalueConvention::Paper1d && self.dim != 1 {
            out.push("convention paper_1d is only valid for dim = 1".to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidDomain(v.join("; ")))
        }
    }

    /// Lebesgue measure |O|.
    pub fn measure(&self) -> f64 {
        self.lengths.iter().product()
    }
}

/// One retained eigenmode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    /// Index tuple `(k)` or `(l, m)`; the second entry is 0 in 1D.
    pub label: [usize; 2],
    /// Cosine frequency per axis, `cos(f pi x / a)`.
    pub frequency: [usize; 2],
    pub eigenvalue: f64,
}

#[derive(Debug, Clone)]
struct Axis {
    length: f64,
    nodes: Vec<f64>,
    weight: f64,
    // frequencies x n, row-major by frequency
    cos: Vec<f64>,
    dcos: Vec<f64>,
}

impl Axis {
    fn new(length: f64, n: usize, freq_count: usize) -> Self {
        let h = length / n as f64;
        let nodes: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
        let mut cos = vec![0.0; freq_count * n];
        let mut dcos = vec![0.0; freq_count * n];
        for f in 0..freq_count {
            let c = axis_norm(f, length);
            let w = f as f64 * PI / length;
            for (i, &x) in nodes.iter().enumerate() {
                cos[f * n + i] = c * (w * x).cos();
                dcos[f * n + i] = -c * w * (w * x).sin();
            }
        }
        Axis {
            length,
            nodes,
            weight: h,
            cos,
            dcos,
        }
    }

    fn row(&self, f: usize) -> &[f64] {
        let n = self.nodes.len();
        &self.cos[f * n..(f + 1) * n]
    }

    fn drow(&self, f: usize) -> &[f64] {
        let n = self.nodes.len();
        &self.dcos[f * n..(f + 1) * n]
    }
}

fn axis_norm(f: usize, length: f64) -> f64 {
    if f == 0 {
        1.0 / length.sqrt()
    } else {
        (2.0 / length).sqrt()
    }
}

/// Opaque identity tying fields to the basis that produced them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisId(pub u64);

/// Eigenpairs of the Neumann Laplacian with their quadrature grid.
///
/// Immutable after construction. Nodal arrays are row-major with the
/// x-axis outermost: node `(i, j)` lives at index `i * N + j`.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    id: BasisId,
    domain: DomainSpec,
    modes: Vec<Mode>,
    eigenvalues: Vec<f64>,
    axes: Vec<Axis>,
    node_weight: f64,
    dealias: Vec<bool>,
    // 2D transform bookkeeping: distinct x-frequencies and each mode's row
    x_rows: Vec<usize>,
    mode_row: Vec<usize>,
}

impl SpectralBasis {
    pub fn build(domain: &DomainSpec, mode_count: usize) -> Result<Self> {
        let modes = Self::checked_modes(domain, mode_count)?;

        let n = domain.grid_points;
        let axes: Vec<Axis> = (0..domain.dim)
            .map(|d| {
                let used = modes.iter().map(|m| m.frequency[d]).max().unwrap_or(0) + 1;
                Axis::new(domain.lengths[d], n, used)
            })
            .collect();
        let node_weight = axes.iter().map(|a| a.weight).product();
        let dealias = modes
            .iter()
            .map(|m| m.frequency.iter().take(domain.dim).all(|&f| 3 * f <= n))
            .collect();

        let mut x_rows: Vec<usize> = modes.iter().map(|m| m.frequency[0]).collect();
        x_rows.sort_unstable();
        x_rows.dedup();
        let mode_row = modes
            .iter()
            .map(|m| x_rows.binary_search(&m.frequency[0]).unwrap())
            .collect();

        Ok(SpectralBasis {
            id: BasisId(NEXT_BASIS_ID.fetch_add(1, Ordering::Relaxed)),
            domain: domain.clone(),
            eigenvalues: modes.iter().map(|m| m.eigenvalue).collect(),
            modes,
            axes,
            node_weight,
            dealias,
            x_rows,
            mode_row,
        })
    }

    /// Whether `mode_count` modes fit the grid of `domain`, without
    /// building the transform tables.
    pub fn check_fits(domain: &DomainSpec, mode_count: usize) -> Result<()> {
        Self::checked_modes(domain, mode_count).map(|_| ())
    }

    fn checked_modes(domain: &DomainSpec, mode_count: usize) -> Result<Vec<Mode>> {
        domain.validate()?;
        if mode_count == 0 {
            return Err(Error::InvalidParameter("mode count must be positive".into()));
        }
        let modes = enumerate_modes(domain, mode_count);
        let max_freq = modes
            .iter()
            .map(|m| m.frequency[0].max(m.frequency[1]))
            .max()
            .unwrap_or(0);
        // the highest retained frequency must stay below N/2
        let required_points = (2 * (max_freq + 1)).max(4);
        if domain.grid_points < required_points {
            return Err(Error::TooManyModes {
                requested: mode_count,
                grid_points: domain.grid_points,
                required_points,
            });
        }
        Ok(modes)
    }

    pub fn id(&self) -> BasisId {
        self.id
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn grid_points(&self) -> usize {
        self.domain.grid_points
    }

    pub fn node_count(&self) -> usize {
        self.domain.grid_points.pow(self.domain.dim as u32)
    }

    /// Quadrature weight shared by every node.
    pub fn node_weight(&self) -> f64 {
        self.node_weight
    }

    pub fn measure(&self) -> f64 {
        self.domain.measure()
    }

    /// Modes whose per-axis frequency lies inside the 2/3 band `f <= N/3`.
    pub fn dealias_mask(&self) -> &[bool] {
        &self.dealias
    }

    pub fn node(&self, index: usize) -> Vec<f64> {
        let n = self.grid_points();
        match self.dim() {
            1 => vec![self.axes[0].nodes[index]],
            _ => vec![self.axes[0].nodes[index / n], self.axes[1].nodes[index % n]],
        }
    }

    /// Quadrature sum `sum_i w f_i`.
    pub fn integrate(&self, nodal: &[f64]) -> f64 {
        self.node_weight * nodal.iter().sum::<f64>()
    }

    /// Galerkin projection of nodal samples onto the retained modes.
    pub fn project(&self, nodal: &[f64], modal: &mut [f64]) {
        let n = self.grid_points();
        debug_assert_eq!(nodal.len(), self.node_count());
        debug_assert_eq!(modal.len(), self.mode_count());
        if self.dim() == 1 {
            let axis = &self.axes[0];
            for (c, mode) in modal.iter_mut().zip(&self.modes) {
                let row = axis.row(mode.frequency[0]);
                *c = axis.weight * dot(row, nodal);
            }
            return;
        }
        let (ax, ay) = (&self.axes[0], &self.axes[1]);
        let mut tmp = vec![0.0; self.x_rows.len() * n];
        for (r, &l) in self.x_rows.iter().enumerate() {
            let out = &mut tmp[r * n..(r + 1) * n];
            let row = ax.row(l);
            for i in 0..n {
                let c = row[i] * ax.weight;
                axpy(c, &nodal[i * n..(i + 1) * n], out);
            }
        }
        for (k, c) in modal.iter_mut().enumerate() {
            let r = self.mode_row[k];
            *c = ay.weight * dot(ay.row(self.modes[k].frequency[1]), &tmp[r * n..(r + 1) * n]);
        }
    }

    /// Nodal synthesis `f(x_i) = sum_k c_k e_k(x_i)`.
    pub fn synthesize(&self, modal: &[f64], nodal: &mut [f64]) {
        self.synthesize_with(modal, nodal, None);
    }

    /// Nodal values of the partial derivative along `axis`.
    pub fn gradient(&self, modal: &[f64], axis: usize, nodal: &mut [f64]) {
        assert!(axis < self.dim());
        self.synthesize_with(modal, nodal, Some(axis));
    }

    fn synthesize_with(&self, modal: &[f64], nodal: &mut [f64], derivative: Option<usize>) {
        let n = self.grid_points();
        debug_assert_eq!(nodal.len(), self.node_count());
        debug_assert_eq!(modal.len(), self.mode_count());
        if self.dim() == 1 {
            let axis = &self.axes[0];
            nodal.iter_mut().for_each(|x| *x = 0.0);
            for (&c, mode) in modal.iter().zip(&self.modes) {
                if c == 0.0 {
                    continue;
                }
                let row = match derivative {
                    Some(_) => axis.drow(mode.frequency[0]),
                    None => axis.row(mode.frequency[0]),
                };
                axpy(c, row, nodal);
            }
            return;
        }
        let (ax, ay) = (&self.axes[0], &self.axes[1]);
        let mut g = vec![0.0; self.x_rows.len() * n];
        for (k, &c) in modal.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let r = self.mode_row[k];
            let m = self.modes[k].frequency[1];
            let row = if derivative == Some(1) { ay.drow(m) } else { ay.row(m) };
            axpy(c, row, &mut g[r * n..(r + 1) * n]);
        }
        nodal.iter_mut().for_each(|x| *x = 0.0);
        for (r, &l) in self.x_rows.iter().enumerate() {
            let row = if derivative == Some(0) { ax.drow(l) } else { ax.row(l) };
            let src = &g[r * n..(r + 1) * n];
            for i in 0..n {
                if row[i] != 0.0 {
                    axpy(row[i], src, &mut nodal[i * n..(i + 1) * n]);
                }
            }
        }
    }

    /// Nodal samples of mode `k` on the quadrature grid.
    pub fn nodal_eigenfunction(&self, k: usize) -> Result<Vec<f64>> {
        self.check_mode(k)?;
        let mut unit = vec![0.0; self.mode_count()];
        unit[k] = 1.0;
        let mut out = vec![0.0; self.node_count()];
        self.synthesize(&unit, &mut out);
        Ok(out)
    }

    /// Pointwise value of the normalized eigenfunction `e_k(x)`.
    pub fn eval_eigenfunction(&self, k: usize, x: &[f64]) -> Result<f64> {
        self.check_mode(k)?;
        let inside = x.len() == self.dim()
            && x
                .iter()
                .zip(&self.domain.lengths)
                .all(|(&xi, &a)| xi.is_finite() && (0.0..=a).contains(&xi));
        if !inside {
            return Err(Error::OutOfDomain {
                point: x.to_vec(),
                lengths: self.domain.lengths.clone(),
            });
        }
        let mode = &self.modes[k];
        Ok(x
            .iter()
            .zip(&self.axes)
            .enumerate()
            .map(|(d, (&xi, axis))| {
                let f = mode.frequency[d];
                axis_norm(f, axis.length) * (f as f64 * PI * xi / axis.length).cos()
            })
            .product())
    }

    /// `output_k = g(lambda_k) * modal_k`.
    pub fn apply_multiplier<G: Fn(f64) -> f64>(&self, modal: &[f64], g: G) -> Vec<f64> {
        debug_assert_eq!(modal.len(), self.mode_count());
        modal
            .iter()
            .zip(&self.eigenvalues)
            .map(|(&c, &lambda)| g(lambda) * c)
            .collect()
    }

    /// Tightest `(c, C)` with `c k^(2/d) <= lambda_k <= C k^(2/d)` over the
    /// retained modes `k >= 1`.
    pub fn check_asymptotics(&self) -> Result<(f64, f64)> {
        if self.mode_count() < 8 {
            return Err(Error::Precondition(format!(
                "asymptotic constants need at least 8 modes, basis has {}",
                self.mode_count()
            )));
        }
        let exponent = 2.0 / self.dim() as f64;
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (k, &lambda) in self.eigenvalues.iter().enumerate().skip(1) {
            let ratio = lambda / (k as f64).powf(exponent);
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        Ok((lo, hi))
    }

    /// Smallest `c` with `max_x |e_k(x)| <= c lambda_k^((d-1)/2)` over the
    /// grid samples of every retained mode `k >= 1`.
    pub fn eigenfunction_sup_constant(&self) -> f64 {
        let exponent = (self.dim() as f64 - 1.0) / 2.0;
        (1..self.mode_count())
            .map(|k| {
                let sup = self
                    .nodal_eigenfunction(k)
                    .unwrap()
                    .iter()
                    .fold(0.0f64, |m, &x| m.max(x.abs()));
                sup / self.eigenvalues[k].powf(exponent)
            })
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_mode(&self, k: usize) -> Result<()> {
        if k < self.mode_count() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                what: "mode",
                index: k,
                limit: self.mode_count(),
            })
        }
    }
}

fn enumerate_modes(domain: &DomainSpec, count: usize) -> Vec<Mode> {
    if domain.dim == 1 {
        let a = domain.lengths[0];
        return (0..count)
            .map(|k| match domain.convention {
                EigenvalueConvention::Paper1d => Mode {
                    label: [k, 0],
                    frequency: [2 * k, 0],
                    eigenvalue: 4.0 * PI * PI * (k * k) as f64 / (a * a),
                },
                EigenvalueConvention::NeumannCosine => Mode {
                    label: [k, 0],
                    frequency: [k, 0],
                    eigenvalue: (k as f64 * PI / a).powi(2),
                },
            })
            .collect();
    }
    // the first `count` modes have l, m < count: the `count` modes (l, 0),
    // l < count, all lie strictly below any mode with l >= count
    let (a, b) = (domain.lengths[0], domain.lengths[1]);
    let mut all: Vec<Mode> = (0..count)
        .flat_map(|l| (0..count).map(move |m| (l, m)))
        .map(|(l, m)| Mode {
            label: [l, m],
            frequency: [l, m],
            eigenvalue: (l as f64 * PI / a).powi(2) + (m as f64 * PI / b).powi(2),
        })
        .collect();
    all.sort_by(|x, y| {
        x.eigenvalue
            .partial_cmp(&y.eigenvalue)
            .unwrap()
            .then(x.label.cmp(&y.label))
    });
    all.truncate(count);
    all
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gram_error(basis: &SpectralBasis) -> f64 {
        let tables: Vec<Vec<f64>> = (0..basis.mode_count())
            .map(|k| basis.nodal_eigenfunction(k).unwrap())
            .collect();
        let mut worst = 0.0f64;
        for j in 0..tables.len() {
            for k in 0..=j {
                let ip = basis.node_weight() * dot(&tables[j], &tables[k]);
                let target = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).abs());
            }
        }
        worst
    }

    #[test]
    fn paper_convention_first_eigenvalue() {
        let d = DomainSpec::interval(1.0, 64).with_convention(EigenvalueConvention::Paper1d);
        let b = SpectralBasis::build(&d, 8).unwrap();
        assert!((b.eigenvalues()[1] - 39.47841760435743).abs() < 1e-12);
        for (k, &l) in b.eigenvalues().iter().enumerate() {
            assert_eq!(l, 4.0 * PI * PI * (k * k) as f64);
        }
    }

    #[test]
    fn square_mode_one_one() {
        let b = SpectralBasis::build(&DomainSpec::rectangle(1.0, 1.0, 32), 8).unwrap();
        let m = b.modes().iter().find(|m| m.label == [1, 1]).unwrap();
        assert!((m.eigenvalue - 2.0 * PI * PI).abs() < 1e-12);
        // ties resolved lexicographically: (0,1) before (1,0)
        assert_eq!(b.modes()[1].label, [0, 1]);
        assert_eq!(b.modes()[2].label, [1, 0]);
    }

    #[test]
    fn constant_mode() {
        for domain in [
            DomainSpec::interval(2.0, 16),
            DomainSpec::rectangle(1.0, 3.0, 16),
        ] {
            let b = SpectralBasis::build(&domain, 4).unwrap();
            assert_eq!(b.eigenvalues()[0], 0.0);
            let expect = 1.0 / domain.measure().sqrt();
            for v in b.nodal_eigenfunction(0).unwrap() {
                assert!((v - expect).abs() < 1e-14);
            }
        }
        let unit = SpectralBasis::build(&DomainSpec::interval(1.0, 8), 2).unwrap();
        for x in [0.0, 0.3, 1.0] {
            assert!((unit.eval_eigenfunction(0, &[x]).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn orthonormal_under_stored_quadrature() {
        for domain in [
            DomainSpec::interval(1.0, 32),
            DomainSpec::interval(1.7, 32).with_convention(EigenvalueConvention::Paper1d),
            DomainSpec::rectangle(1.0, 2.0, 16),
        ] {
            let b = SpectralBasis::build(&domain, 8).unwrap();
            assert!(gram_error(&b) < 1e-10, "{domain:?}");
        }
    }

    #[test]
    fn pointwise_matches_nodal() {
        let b = SpectralBasis::build(&DomainSpec::rectangle(1.0, 0.5, 16), 12).unwrap();
        for k in 0..b.mode_count() {
            let nodal = b.nodal_eigenfunction(k).unwrap();
            for idx in [0, 5, 77, 255] {
                let x = b.node(idx);
                assert!((b.eval_eigenfunction(k, &x).unwrap() - nodal[idx]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        let err = SpectralBasis::build(&DomainSpec::interval(1.0, 16), 9).unwrap_err();
        match err {
            Error::TooManyModes {
                required_points, ..
            } => assert_eq!(required_points, 18),
            e => panic!("{e}"),
        }
        assert!(SpectralBasis::build(&DomainSpec::interval(-1.0, 16), 2).is_err());
        assert!(SpectralBasis::build(&DomainSpec::interval(1.0, 7), 2).is_err());
        let paper2d = DomainSpec::rectangle(1.0, 1.0, 16).with_convention(EigenvalueConvention::Paper1d);
        assert!(SpectralBasis::build(&paper2d, 2).is_err());
        let b = SpectralBasis::build(&DomainSpec::interval(1.0, 16), 4).unwrap();
        assert!(matches!(b.eval_eigenfunction(1, &[1.5]), Err(Error::OutOfDomain { .. })));
        assert!(b.eval_eigenfunction(4, &[0.5]).is_err());
    }

    #[test]
    fn multiplier_examples() {
        let b = SpectralBasis::build(&DomainSpec::interval(1.0, 16).with_convention(EigenvalueConvention::Paper1d), 2).unwrap();
        let out = b.apply_multiplier(&[1.0, 1.0], |l| 1.0 / (1.0 + l));
        assert_eq!(out[0], 1.0);
        assert!((out[1] - 1.0 / (1.0 + 4.0 * PI * PI)).abs() < 1e-15);
        let id = b.apply_multiplier(&[0.25, -3.0], |_| 1.0);
        assert_eq!(id, vec![0.25, -3.0]);
    }

    #[test]
    fn asymptotic_constants() {
        let d = DomainSpec::interval(1.0, 64).with_convention(EigenvalueConvention::Paper1d);
        let (lo, hi) = SpectralBasis::build(&d, 16).unwrap().check_asymptotics().unwrap();
        assert!((lo - 4.0 * PI * PI).abs() < 1e-10 && (hi - 4.0 * PI * PI).abs() < 1e-10);

        let sq = SpectralBasis::build(&DomainSpec::rectangle(1.0, 1.0, 64), 64).unwrap();
        let (lo, hi) = sq.check_asymptotics().unwrap();
        // brute force over the sorted lattice
        let mut lam: Vec<f64> = (0..64)
            .flat_map(|l| (0..64).map(move |m| ((l * l + m * m) as f64) * PI * PI))
            .collect();
        lam.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let ratios: Vec<f64> = (1..64).map(|k| lam[k] / k as f64).collect();
        let blo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let bhi = ratios.iter().cloned().fold(0.0, f64::max);
        assert!((lo - blo).abs() < 1e-9 && (hi - bhi).abs() < 1e-9);
        assert!(0.0 < lo && lo <= hi);

        let small = SpectralBasis::build(&DomainSpec::interval(1.0, 16), 1).unwrap();
        assert!(small.check_asymptotics().is_err());
    }

    #[test]
    fn sup_bound_constant() {
        let b = SpectralBasis::build(&DomainSpec::interval(1.0, 64), 16).unwrap();
        assert!((b.eigenfunction_sup_constant() - 2f64.sqrt()).abs() < 1e-3);
        let sq = SpectralBasis::build(&DomainSpec::rectangle(1.0, 1.0, 64), 32).unwrap();
        let c = sq.eigenfunction_sup_constant();
        assert!(c.is_finite() && c > 0.0);
    }
}
