//! Norms of the inverse inhibitor `xi = 1/v`, the Lyapunov functionals
//! `L1`, `L2`, `L3`, membership in the admissible set and energy monitors.
//!
//! Time integrals are left Riemann sums over the observation times; `sup`
//! over `[0, T]` is the maximum over observations.

use crate::dynamics::{ModelParams, Observer, SimState};
use crate::error::{Error, Result};
use crate::fields::{argmin, floored, Field};
use crate::spectral_basis::SpectralBasis;

/// `p = 31/7`.
pub const P_DEFAULT: f64 = 31.0 / 7.0;
/// Alternate exponent preset.
pub const P_ALTERNATE: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalConfig {
    pub p: f64,
    pub rho: f64,
    pub stride: usize,
}

impl FunctionalConfig {
    /// `rho = 1` in 1D and `rho = 1.1` in 2D, where 1 is excluded.
    pub fn default_for(dim: usize) -> Self {
        FunctionalConfig {
            p: P_DEFAULT,
            rho: if dim == 2 { 1.1 } else { 1.0 },
            stride: 10,
        }
    }

    pub fn violations(&self, dim: usize) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.p.is_finite() && self.p >= 1.0) {
            out.push(format!("p must be >= 1, got {}", self.p));
        }
        let lower_ok = if dim == 2 { self.rho > 1.0 } else { self.rho >= 1.0 };
        if !(lower_ok && self.rho < 1.2) {
            let range = if dim == 2 { "(1, 6/5)" } else { "[1, 6/5)" };
            out.push(format!("rho must lie in {range} for d = {dim}, got {}", self.rho));
        }
        if self.stride == 0 {
            out.push("observation stride must be positive".into());
        }
        out
    }
}

impl Default for FunctionalConfig {
    fn default() -> Self {
        Self::default_for(1)
    }
}

/// Nodal `1/max(v, floor)` and the number of nodes where the floor was used.
pub fn xi_field(basis: &SpectralBasis, v: &Field, floor: f64) -> Result<(Field, usize)> {
    v.check_basis(basis)?;
    let v = v.to_nodal(basis)?;
    let mut floors = 0;
    let mut out = Vec::with_capacity(basis.node_count());
    for (i, &x) in v.nodal_values()?.iter().enumerate() {
        let d = floored(x, floor, i)?;
        if d != x {
            floors += 1;
        }
        out.push(1.0 / d);
    }
    Ok((Field::from_nodal(basis, out)?, floors))
}

/// Instantaneous quantities at one observation time. Integrals are over
/// the domain; `xi = 1/v` and the pair `(chi, eta)` is the argument of the
/// fixed-point map (equal to `(u, v)` in a plain simulation).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Observation {
    pub t: f64,
    /// Quadrature weight of this sample in time integrals.
    pub weight: f64,
    pub u_l2_sq: f64,
    pub grad_u_sq: f64,
    pub u_h1_sq: f64,
    pub u_h1mrho_sq: f64,
    pub grad_u_h1mrho_sq: f64,
    pub chi_l2_sq: f64,
    pub grad_chi_sq: f64,
    pub v_l2: f64,
    pub v_l1: f64,
    pub grad_v_sq: f64,
    pub xi_lp_p: f64,
    pub xi_l1: f64,
    pub xi_l8: f64,
    pub ln_xi_int: f64,
    pub abs_ln_xi_int: f64,
    pub ln_xi_u: f64,
    pub chi2_xi: f64,
    pub xi2_chi2: f64,
    pub u_chi2_xi: f64,
    pub xi_p2_grad_v_sq: f64,
    pub xi3_grad_v_sq: f64,
    pub xi2_grad_v_sq: f64,
    pub xi2_u_grad_v_sq: f64,
    pub min_u: f64,
    pub min_v: f64,
    pub min_chi: f64,
    pub min_chi_node: usize,
    pub min_eta: f64,
    pub min_eta_node: usize,
    pub floor_activations: usize,
    pub xi_floor_activations: usize,
}

/// Modal and nodal data of one field.
pub struct FieldView<'a> {
    pub modal: &'a [f64],
    pub nodal: &'a [f64],
}

impl<'a> FieldView<'a> {
    pub fn of(f: &'a Field) -> Result<Self> {
        Ok(FieldView {
            modal: f.modal_values()?,
            nodal: f.nodal_values()?,
        })
    }
}

impl Observation {
    #[allow(clippy::too_many_arguments)]
    pub fn compute(
        basis: &SpectralBasis,
        cfg: &FunctionalConfig,
        t: f64,
        u: &FieldView,
        v: &FieldView,
        chi: &FieldView,
        eta: &FieldView,
        xi_floor: f64,
    ) -> Result<Observation> {
        let w = basis.node_weight();
        let lam = basis.eigenvalues();
        let s = 1.0 - cfg.rho;
        let mut o = Observation {
            t,
            ..Default::default()
        };
        for (k, &l) in lam.iter().enumerate() {
            let (a, c, b) = (u.modal[k] * u.modal[k], chi.modal[k] * chi.modal[k], v.modal[k] * v.modal[k]);
            let hs = if s == 0.0 { 1.0 } else { (1.0 + l).powf(s) };
            o.u_l2_sq += a;
            o.grad_u_sq += l * a;
            o.u_h1_sq += (1.0 + l) * a;
            o.u_h1mrho_sq += hs * a;
            o.grad_u_h1mrho_sq += l * hs * a;
            o.chi_l2_sq += c;
            o.grad_chi_sq += l * c;
            o.grad_v_sq += l * b;
        }
        let gv = crate::fields::grad_sq_nodal(basis, v.modal);
        let p = cfg.p;
        let mut xi8 = 0.0;
        #[allow(clippy::needless_range_loop)]
        for i in 0..basis.node_count() {
            let (ui, vi, ci) = (u.nodal[i], v.nodal[i], chi.nodal[i]);
            let d = floored(vi, xi_floor, i)?;
            if d != vi {
                o.xi_floor_activations += 1;
            }
            let xi = 1.0 / d;
            let (xi2, c2, ln) = (xi * xi, ci * ci, xi.ln());
            o.v_l2 += vi * vi;
            o.v_l1 += vi.abs();
            o.xi_lp_p += xi.powf(p);
            o.xi_l1 += xi;
            xi8 += (xi2 * xi2) * (xi2 * xi2);
            o.ln_xi_int += ln;
            o.abs_ln_xi_int += ln.abs();
            o.ln_xi_u += ln * ui;
            o.chi2_xi += c2 * xi;
            o.xi2_chi2 += xi2 * c2;
            o.u_chi2_xi += ui * c2 * xi;
            o.xi_p2_grad_v_sq += xi.powf(p + 2.0) * gv[i];
            o.xi3_grad_v_sq += xi2 * xi * gv[i];
            o.xi2_grad_v_sq += xi2 * gv[i];
            o.xi2_u_grad_v_sq += xi2 * ui * gv[i];
        }
        o.v_l2 = (w * o.v_l2).sqrt();
        o.xi_l8 = (w * xi8).powf(0.125);
        for x in [
            &mut o.v_l1,
            &mut o.xi_lp_p,
            &mut o.xi_l1,
            &mut o.ln_xi_int,
            &mut o.abs_ln_xi_int,
            &mut o.ln_xi_u,
            &mut o.chi2_xi,
            &mut o.xi2_chi2,
            &mut o.u_chi2_xi,
            &mut o.xi_p2_grad_v_sq,
            &mut o.xi3_grad_v_sq,
            &mut o.xi2_grad_v_sq,
            &mut o.xi2_u_grad_v_sq,
        ] {
            *x *= w;
        }
        o.min_u = argmin(u.nodal).1;
        o.min_v = argmin(v.nodal).1;
        (o.min_chi_node, o.min_chi) = argmin(chi.nodal);
        (o.min_eta_node, o.min_eta) = argmin(eta.nodal);
        Ok(o)
    }

    /// `|xi|^p_{L^p} + |xi|_{L^1} + (int ln xi)^2`
    pub fn l3(&self) -> f64 {
        self.xi_lp_p + self.xi_l1 + self.ln_xi_int * self.ln_xi_int
    }
}

/// CSV column names of [`FunctionalTrace::row`], in order.
pub const COLUMNS: [&str; 42] = [
    "t",
    "weight",
    "u_l2_sq",
    "grad_u_sq",
    "u_h1_sq",
    "u_h1mrho_sq",
    "grad_u_h1mrho_sq",
    "chi_l2_sq",
    "grad_chi_sq",
    "v_l2",
    "v_l1",
    "grad_v_sq",
    "xi_lp_p",
    "xi_l1",
    "xi_l8",
    "ln_xi_int",
    "abs_ln_xi_int",
    "ln_xi_u",
    "chi2_xi",
    "xi2_chi2",
    "u_chi2_xi",
    "xi_p2_grad_v_sq",
    "xi3_grad_v_sq",
    "xi2_grad_v_sq",
    "xi2_u_grad_v_sq",
    "min_u",
    "min_v",
    "min_chi",
    "min_chi_node",
    "min_eta",
    "min_eta_node",
    "floor_activations",
    "xi_floor_activations",
    "int_grad_u_sq",
    "int_grad_chi_sq",
    "int_chi2_xi",
    "int_xi2_chi2",
    "int_xi_p2_grad_v_sq",
    "l1",
    "l2",
    "l3",
    "sup_u_l2_sq",
];

/// Columns holding counts or node indices.
pub const INTEGER_COLUMNS: [&str; 4] = [
    "min_chi_node",
    "min_eta_node",
    "floor_activations",
    "xi_floor_activations",
];

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalTrace {
    pub p: f64,
    pub rho: f64,
    pub observations: Vec<Observation>,
}

impl FunctionalTrace {
    pub fn new(cfg: &FunctionalConfig) -> Self {
        FunctionalTrace {
            p: cfg.p,
            rho: cfg.rho,
            observations: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.t).collect()
    }

    /// Append, setting the previous sample's weight to the elapsed time.
    pub fn push(&mut self, mut obs: Observation) -> Result<()> {
        if let Some(last) = self.observations.last_mut() {
            let dt = obs.t - last.t;
            if !(dt > 0.0) {
                return Err(Error::Precondition(format!(
                    "observation times must increase: {} after {}",
                    obs.t, last.t
                )));
            }
            last.weight = dt;
        }
        obs.weight = 0.0;
        self.observations.push(obs);
        Ok(())
    }

    /// Window `[0, t_i]`.
    pub fn prefix(&self, i: usize) -> &[Observation] {
        &self.observations[..=i]
    }

    /// Row `i` in [`COLUMNS`] order; running integrals cover `[0, t_i]`.
    pub fn row(&self, i: usize) -> Vec<f64> {
        let o = &self.observations[i];
        let win = self.prefix(i);
        let run = |f: fn(&Observation) -> f64| time_integral(win, f);
        vec![
            o.t,
            o.weight,
            o.u_l2_sq,
            o.grad_u_sq,
            o.u_h1_sq,
            o.u_h1mrho_sq,
            o.grad_u_h1mrho_sq,
            o.chi_l2_sq,
            o.grad_chi_sq,
            o.v_l2,
            o.v_l1,
            o.grad_v_sq,
            o.xi_lp_p,
            o.xi_l1,
            o.xi_l8,
            o.ln_xi_int,
            o.abs_ln_xi_int,
            o.ln_xi_u,
            o.chi2_xi,
            o.xi2_chi2,
            o.u_chi2_xi,
            o.xi_p2_grad_v_sq,
            o.xi3_grad_v_sq,
            o.xi2_grad_v_sq,
            o.xi2_u_grad_v_sq,
            o.min_u,
            o.min_v,
            o.min_chi,
            o.min_chi_node as f64,
            o.min_eta,
            o.min_eta_node as f64,
            o.floor_activations as f64,
            o.xi_floor_activations as f64,
            run(|o| o.grad_u_sq),
            run(|o| o.grad_chi_sq),
            run(|o| o.chi2_xi),
            run(|o| o.xi2_chi2),
            run(|o| o.xi_p2_grad_v_sq),
            sup(win, |o| o.chi_l2_sq) + run(|o| o.grad_chi_sq) + sup(win, |o| o.xi_lp_p),
            run(|o| o.chi2_xi).powi(2) + run(|o| o.xi2_chi2),
            o.l3(),
            sup(win, |o| o.u_l2_sq),
        ]
    }

    pub fn all_finite(&self) -> bool {
        (0..self.len()).all(|i| self.row(i).iter().all(|x| x.is_finite()))
    }
}

/// Left Riemann sum of `f` over the window.
///
/// The last sample of a window contributes nothing, so a window that ends
/// before the trace does uses only samples strictly inside it.
pub fn time_integral(win: &[Observation], f: impl Fn(&Observation) -> f64) -> f64 {
    match win.split_last() {
        Some((_, head)) => head.iter().map(|o| f(o) * o.weight).sum(),
        None => 0.0,
    }
}

pub fn sup(win: &[Observation], f: impl Fn(&Observation) -> f64) -> f64 {
    win.iter().map(f).fold(f64::NEG_INFINITY, f64::max)
}

/// `sup |chi|^2 + int |grad chi|^2 + sup |xi|^p_{L^p}`
pub fn lyapunov_l1(win: &[Observation]) -> f64 {
    if win.is_empty() {
        return 0.0;
    }
    sup(win, |o| o.chi_l2_sq) + integral_with_last(win, |o| o.grad_chi_sq) + sup(win, |o| o.xi_lp_p)
}

/// `(int int chi^2 xi)^2` and `int int xi^2 chi^2`.
pub fn lyapunov_l2_terms(win: &[Observation]) -> (f64, f64) {
    let a = integral_with_last(win, |o| o.chi2_xi);
    (a * a, integral_with_last(win, |o| o.xi2_chi2))
}

pub fn lyapunov_l2(win: &[Observation]) -> f64 {
    let (a, b) = lyapunov_l2_terms(win);
    a + b
}

pub fn lyapunov_l3(obs: &Observation) -> f64 {
    obs.l3()
}

/// Like [`time_integral`] but the last sample keeps its own weight, so a
/// single sample with weight `dt` integrates to `f dt`.
fn integral_with_last(win: &[Observation], f: impl Fn(&Observation) -> f64) -> f64 {
    win.iter().map(|o| f(o) * o.weight).sum()
}

/// Records an [`Observation`] of `(u, v)` with `chi = u`, `eta = v`.
pub struct FunctionalRecorder {
    pub config: FunctionalConfig,
    pub xi_floor: f64,
    pub trace: FunctionalTrace,
}

impl FunctionalRecorder {
    pub fn new(config: &FunctionalConfig, xi_floor: f64) -> Self {
        FunctionalRecorder {
            config: config.clone(),
            xi_floor,
            trace: FunctionalTrace::new(config),
        }
    }
}

impl Observer for FunctionalRecorder {
    fn stride(&self) -> usize {
        self.config.stride.max(1)
    }

    fn observe(&mut self, basis: &SpectralBasis, state: &SimState) -> Result<()> {
        let u = FieldView::of(&state.pair.u)?;
        let v = FieldView::of(&state.pair.v)?;
        let mut o = Observation::compute(basis, &self.config, state.t, &u, &v, &u, &v, self.xi_floor)?;
        o.floor_activations = state.floor_activations;
        self.trace.push(o)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibleSetSpec {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl AdmissibleSetSpec {
    pub fn violations(&self) -> Vec<String> {
        [("K1", self.k1), ("K2", self.k2), ("K3", self.k3)]
            .into_iter()
            .filter(|(_, k)| !(*k > 0.0))
            .map(|(n, k)| format!("{n} must be positive, got {k}"))
            .collect()
    }

    /// `factor` times the ensemble values of the given traces, floored at
    /// a tiny positive number.
    pub fn scaled_from(traces: &[FunctionalTrace], factor: f64) -> Self {
        let v = ensemble_lyapunov(traces);
        let pos = |x: f64| (factor * x).max(f64::MIN_POSITIVE);
        AdmissibleSetSpec {
            k1: pos(v.mean_l1),
            k2: pos(v.mean_l2),
            k3: pos(v.sup_mean_l3),
        }
    }
}

/// Location of a positivity failure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityViolation {
    pub path: usize,
    pub t: f64,
    pub node: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleLyapunov {
    pub mean_l1: f64,
    pub mean_l2: f64,
    pub sup_mean_l3: f64,
}

/// `E L1`, `E L2` over the full windows and `sup_t E L3`, with
/// expectations as ensemble means over traces on a common time grid.
pub fn ensemble_lyapunov(traces: &[FunctionalTrace]) -> EnsembleLyapunov {
    let m = traces.len().max(1) as f64;
    let mean_l1 = traces.iter().map(|t| lyapunov_l1(&t.observations)).sum::<f64>() / m;
    let mean_l2 = traces.iter().map(|t| lyapunov_l2(&t.observations)).sum::<f64>() / m;
    let rows = traces.iter().map(|t| t.len()).min().unwrap_or(0);
    let sup_mean_l3 = (0..rows)
        .map(|i| traces.iter().map(|t| t.observations[i].l3()).sum::<f64>() / m)
        .fold(0.0, f64::max);
    EnsembleLyapunov {
        mean_l1,
        mean_l2,
        sup_mean_l3,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipReport {
    pub chi_nonnegative: bool,
    pub chi_violation: Option<PositivityViolation>,
    pub eta_positive: bool,
    pub eta_violation: Option<PositivityViolation>,
    pub values: EnsembleLyapunov,
    pub bounds: AdmissibleSetSpec,
    pub l1_ok: bool,
    pub l2_ok: bool,
    pub l3_ok: bool,
}

impl MembershipReport {
    pub fn passed(&self) -> bool {
        self.chi_nonnegative && self.eta_positive && self.l1_ok && self.l2_ok && self.l3_ok
    }

    /// One line per failed condition.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(v) = self.chi_violation {
            out.push(format!(
                "chi >= 0 fails: chi = {:e} at node {} (path {}, t = {})",
                v.value, v.node, v.path, v.t
            ));
        }
        if let Some(v) = self.eta_violation {
            out.push(format!(
                "eta > 0 fails: eta = {:e} at node {} (path {}, t = {})",
                v.value, v.node, v.path, v.t
            ));
        }
        let b = &self.bounds;
        let v = &self.values;
        if !self.l1_ok {
            out.push(format!("E L1 = {:e} exceeds K1 = {:e}", v.mean_l1, b.k1));
        }
        if !self.l2_ok {
            out.push(format!("E L2 = {:e} exceeds K2 = {:e}", v.mean_l2, b.k2));
        }
        if !self.l3_ok {
            out.push(format!("sup_t E L3 = {:e} exceeds K3 = {:e}", v.sup_mean_l3, b.k3));
        }
        out
    }
}

pub fn membership(traces: &[FunctionalTrace], spec: &AdmissibleSetSpec) -> MembershipReport {
    let mut chi_violation = None;
    let mut eta_violation = None;
    for (path, tr) in traces.iter().enumerate() {
        for o in &tr.observations {
            if chi_violation.is_none() && !(o.min_chi >= 0.0) {
                chi_violation = Some(PositivityViolation {
                    path,
                    t: o.t,
                    node: o.min_chi_node,
                    value: o.min_chi,
                });
            }
            if eta_violation.is_none() && !(o.min_eta > 0.0) {
                eta_violation = Some(PositivityViolation {
                    path,
                    t: o.t,
                    node: o.min_eta_node,
                    value: o.min_eta,
                });
            }
        }
    }
    let values = ensemble_lyapunov(traces);
    MembershipReport {
        chi_nonnegative: chi_violation.is_none(),
        chi_violation,
        eta_positive: eta_violation.is_none(),
        eta_violation,
        values,
        bounds: *spec,
        l1_ok: values.mean_l1 <= spec.k1,
        l2_ok: values.mean_l2 <= spec.k2,
        l3_ok: values.sup_mean_l3 <= spec.k3,
    }
}

/// Minimal `(C, delta)` with `lhs_i <= C exp(delta T_i) init` at every point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthFit {
    pub c: f64,
    pub delta: f64,
    /// A non-finite left-hand side or a nonpositive initial-data term.
    pub blow_up: bool,
}

impl GrowthFit {
    pub fn bound(&self, horizon: f64, init: f64) -> f64 {
        self.c * (self.delta * horizon).exp() * init
    }

    /// Whether every point satisfies the fitted bound to relative `1e-12`.
    pub fn holds(&self, horizons: &[f64], lhs: &[f64], init: f64) -> bool {
        !self.blow_up
            && horizons
                .iter()
                .zip(lhs)
                .all(|(&t, &y)| y <= self.bound(t, init) * (1.0 + 1e-12))
    }
}

/// Slope by least squares on `ln(lhs/init)` against `T`, clamped at zero;
/// then the smallest `C` for that slope. Points with `lhs <= 0` hold for any
/// constants and are ignored.
pub fn fit_growth(horizons: &[f64], lhs: &[f64], init: f64) -> GrowthFit {
    let blow = GrowthFit {
        c: f64::INFINITY,
        delta: f64::INFINITY,
        blow_up: true,
    };
    if !(init.is_finite() && init > 0.0) || lhs.iter().any(|y| !y.is_finite()) {
        return blow;
    }
    let pts: Vec<(f64, f64)> = horizons
        .iter()
        .zip(lhs)
        .filter(|(_, &y)| y > 0.0)
        .map(|(&t, &y)| (t, (y / init).ln()))
        .collect();
    if pts.is_empty() {
        return GrowthFit {
            c: 0.0,
            delta: 0.0,
            blow_up: false,
        };
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm) * (p.0 - tm)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let delta = if sxx > 0.0 { (sxy / sxx).max(0.0) } else { 0.0 };
    let ln_c = pts
        .iter()
        .map(|p| p.1 - delta * p.0)
        .fold(f64::NEG_INFINITY, f64::max);
    GrowthFit {
        c: ln_c.exp(),
        delta,
        blow_up: false,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorReport {
    pub name: &'static str,
    pub horizons: Vec<f64>,
    pub lhs: Vec<f64>,
    pub init: f64,
    pub fit: GrowthFit,
}

impl MonitorReport {
    fn new(name: &'static str, horizons: Vec<f64>, lhs: Vec<f64>, init: f64) -> Self {
        let fit = fit_growth(&horizons, &lhs, init);
        MonitorReport {
            name,
            horizons,
            lhs,
            init,
            fit,
        }
    }
}

fn mean(xs: impl Iterator<Item = f64>, m: usize) -> f64 {
    xs.sum::<f64>() / m as f64
}

/// Energy inequalities evaluated at every observed horizon `T > 0` of an
/// ensemble on a common grid. Terms with unspecified constants on the
/// right-hand side are left out; the fit absorbs them.
pub fn energy_monitors(traces: &[FunctionalTrace], params: &ModelParams) -> Result<Vec<MonitorReport>> {
    let m = traces.len();
    if m == 0 || traces[0].is_empty() {
        return Err(Error::Precondition("energy monitors need a nonempty ensemble".into()));
    }
    let rows = traces[0].len();
    if traces.iter().any(|t| t.len() != rows) {
        return Err(Error::Precondition("traces have different lengths".into()));
    }
    let p = traces[0].p;
    let first = |f: fn(&Observation) -> f64| mean(traces.iter().map(|t| f(&t.observations[0])), m);
    // E over paths of a pathwise window functional
    let e_win = |i: usize, f: &dyn Fn(&[Observation]) -> f64| mean(traces.iter().map(|t| f(t.prefix(i))), m);
    // sup over the window of the ensemble mean
    let sup_e = |i: usize, f: fn(&Observation) -> f64| {
        (0..=i)
            .map(|j| mean(traces.iter().map(|t| f(&t.observations[j])), m))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let at_e = |i: usize, f: fn(&Observation) -> f64| mean(traces.iter().map(|t| f(&t.observations[i])), m);
    let horizons: Vec<f64> = traces[0].observations[1..].iter().map(|o| o.t).collect();
    let idx: Vec<usize> = (1..rows).collect();
    let series = |f: &dyn Fn(usize) -> f64| idx.iter().map(|&i| f(i)).collect::<Vec<f64>>();

    let xi_p = series(&|i| {
        e_win(i, &|w| sup(w, |o| o.xi_lp_p))
            + 2.0 * p * (p + 1.0) * params.r_v * e_win(i, &|w| time_integral(w, |o| o.xi_p2_grad_v_sq))
    });
    let xi_l1 = series(&|i| {
        sup_e(i, |o| o.xi_l1)
            + 4.0 * params.r_v * e_win(i, &|w| time_integral(w, |o| o.xi3_grad_v_sq))
            + params.kappa_v * e_win(i, &|w| time_integral(w, |o| o.xi2_chi2))
    });
    let xi_l1_pathwise = series(&|i| e_win(i, &|w| sup(w, |o| o.xi_l1)));
    let log_xi = series(&|i| {
        sup_e(i, |o| o.abs_ln_xi_int)
            + params.r_v * e_win(i, &|w| time_integral(w, |o| o.xi2_grad_v_sq))
            + params.kappa_v * e_win(i, &|w| time_integral(w, |o| o.chi2_xi))
    });
    let u_energy = series(&|i| {
        e_win(i, &|w| sup(w, |o| o.u_l2_sq))
            + 4.0 * params.r_u * e_win(i, &|w| time_integral(w, |o| o.grad_u_sq))
            + 2.0 * params.mu_u * e_win(i, &|w| time_integral(w, |o| o.u_l2_sq))
    });
    let ln_xi_u = series(&|i| {
        at_e(i, |o| o.ln_xi_u)
            + params.mu_u * e_win(i, &|w| time_integral(w, |o| o.ln_xi_u))
            + params.r_v * e_win(i, &|w| time_integral(w, |o| o.xi2_u_grad_v_sq))
            + params.kappa_u * e_win(i, &|w| time_integral(w, |o| o.u_chi2_xi))
    });
    let chi2_xi_u = series(&|i| e_win(i, &|w| time_integral(w, |o| o.u_chi2_xi)));

    let init_xi_p = first(|o| o.xi_lp_p);
    let init_xi_l1 = first(|o| o.xi_l1);
    Ok(vec![
        MonitorReport::new("xi_lp_growth", horizons.clone(), xi_p, init_xi_p),
        MonitorReport::new("xi_l1", horizons.clone(), xi_l1, init_xi_l1),
        MonitorReport::new("xi_l1_pathwise_sup", horizons.clone(), xi_l1_pathwise, init_xi_l1),
        MonitorReport::new(
            "log_xi",
            horizons.clone(),
            log_xi,
            first(|o| o.v_l1) + first(|o| o.abs_ln_xi_int),
        ),
        MonitorReport::new("u_energy", horizons.clone(), u_energy, 2.0 * first(|o| o.u_l2_sq)),
        MonitorReport::new("ln_xi_u", horizons.clone(), ln_xi_u, 1.0 + first(|o| o.ln_xi_u).abs()),
        MonitorReport::new(
            "u_chi2_xi",
            horizons,
            chi2_xi_u,
            init_xi_l1 + first(|o| o.u_l2_sq) + first(|o| o.v_l1),
        ),
    ])
}

/// Per-row ensemble means and standard errors of every [`COLUMNS`] entry.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStatistics {
    pub paths: usize,
    pub mean: Vec<Vec<f64>>,
    pub std_error: Vec<Vec<f64>>,
}

pub fn ensemble_statistics(traces: &[FunctionalTrace]) -> Result<TraceStatistics> {
    let m = traces.len();
    if m == 0 {
        return Err(Error::Precondition("empty ensemble".into()));
    }
    let rows = traces[0].len();
    if traces.iter().any(|t| t.times() != traces[0].times()) {
        return Err(Error::Precondition("traces are not on a common time grid".into()));
    }
    let table: Vec<Vec<Vec<f64>>> = traces.iter().map(|t| (0..rows).map(|i| t.row(i)).collect()).collect();
    let mut mean = vec![vec![0.0; COLUMNS.len()]; rows];
    let mut std_error = vec![vec![0.0; COLUMNS.len()]; rows];
    for i in 0..rows {
        for c in 0..COLUMNS.len() {
            let (mu, se) = mean_se(table.iter().map(|t| t[i][c]));
            mean[i][c] = mu;
            std_error[i][c] = se;
        }
    }
    Ok(TraceStatistics {
        paths: m,
        mean,
        std_error,
    })
}

/// Sample mean and its standard error; zero error for fewer than two samples.
pub fn mean_se(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let first = xs.clone().next().unwrap_or(0.0);
    if n < 2 || xs.clone().all(|x| x == first) {
        return (first, 0.0);
    }
    let mu = xs.clone().sum::<f64>() / n as f64;
    let var = xs.map(|x| (x - mu) * (x - mu)).sum::<f64>() / (n - 1) as f64;
    (mu, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral_basis::DomainSpec;

    fn line() -> SpectralBasis {
        SpectralBasis::build(&DomainSpec::interval(1.0, 32), 8).unwrap()
    }

    fn obs(b: &SpectralBasis, cfg: &FunctionalConfig, t: f64, u: &Field, v: &Field) -> Observation {
        let u = u.complete(b).unwrap();
        let v = v.complete(b).unwrap();
        let (uv, vv) = (FieldView::of(&u).unwrap(), FieldView::of(&v).unwrap());
        Observation::compute(b, cfg, t, &uv, &vv, &uv, &vv, 0.0).unwrap()
    }

    fn constant_trace(b: &SpectralBasis, c: f64, v: f64, samples: usize, dt: f64) -> FunctionalTrace {
        let cfg = FunctionalConfig::default();
        let mut tr = FunctionalTrace::new(&cfg);
        for i in 0..samples {
            tr.push(obs(b, &cfg, i as f64 * dt, &Field::constant(b, c), &Field::constant(b, v)))
                .unwrap();
        }
        tr
    }

    #[test]
    fn xi_examples() {
        let b = line();
        let (xi, n) = xi_field(&b, &Field::constant(&b, 2.0), 0.0).unwrap();
        assert_eq!(n, 0);
        assert!(xi.nodal().unwrap().iter().all(|&x| x == 0.5));
        let o = obs(&b, &FunctionalConfig::default(), 0.0, &Field::constant(&b, 0.0), &Field::constant(&b, 1.0));
        assert_eq!(o.ln_xi_int, 0.0);
        let mut v = vec![1.0; 32];
        v[7] = 0.0;
        let v = Field::from_nodal(&b, v).unwrap();
        assert!(xi_field(&b, &v, 0.0).is_err());
        assert_eq!(xi_field(&b, &v, 1e-3).unwrap().1, 1);
    }

    #[test]
    fn lyapunov_examples() {
        let b = line();
        // chi = 0, v = 1
        let tr = constant_trace(&b, 0.0, 1.0, 11, 0.1);
        assert!((lyapunov_l1(&tr.observations) - 1.0).abs() < 1e-14);
        assert_eq!(lyapunov_l2(&tr.observations), 0.0);
        assert!((tr.observations[3].l3() - 2.0).abs() < 1e-14);
        // chi = 1, v = 1 on [0, 1]
        let tr = constant_trace(&b, 1.0, 1.0, 11, 0.1);
        assert!((lyapunov_l2(&tr.observations) - 2.0).abs() < 1e-13);

        // a single sample carrying weight dt
        let cfg = FunctionalConfig::default();
        let e1 = Field::eigenfunction(&b, 1).unwrap();
        let mut o = obs(&b, &cfg, 0.0, &e1, &Field::constant(&b, 1.0));
        o.weight = 1e-3;
        let l1 = lyapunov_l1(&[o]);
        let lam = std::f64::consts::PI.powi(2);
        assert!((l1 - (1.0 + lam * 1e-3 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn l2_scaling() {
        let b = line();
        let mk = |c: f64| {
            let cfg = FunctionalConfig::default();
            let mut tr = FunctionalTrace::new(&cfg);
            for i in 0..5 {
                let u: Vec<f64> = (0..32).map(|j| c * (1.0 + 0.3 * ((j + i) as f64).sin())).collect();
                let u = Field::from_nodal(&b, u).unwrap();
                let v: Vec<f64> = (0..32).map(|j| 1.5 + 0.2 * (j as f64).cos()).collect();
                tr.push(obs(&b, &cfg, i as f64 * 0.1, &u, &Field::from_nodal(&b, v).unwrap()))
                    .unwrap();
            }
            lyapunov_l2_terms(&tr.observations)
        };
        let (a1, b1) = mk(1.0);
        let (a2, b2) = mk(2.0);
        assert_eq!(a2, 16.0 * a1);
        assert_eq!(b2, 4.0 * b1);
    }

    #[test]
    fn membership_examples() {
        let b = line();
        let tr = constant_trace(&b, 0.0, 1.0, 4, 0.1);
        let big = AdmissibleSetSpec {
            k1: 1e9,
            k2: 1e9,
            k3: 1e9,
        };
        assert!(membership(&[tr], &big).passed());

        let cfg = FunctionalConfig::default();
        let mut u = vec![1.0; 32];
        u[5] = -0.1;
        let mut tr = FunctionalTrace::new(&cfg);
        tr.push(obs(&b, &cfg, 0.0, &Field::from_nodal(&b, u).unwrap(), &Field::constant(&b, 1.0)))
            .unwrap();
        let r = membership(&[tr], &big);
        assert!(!r.chi_nonnegative);
        assert_eq!(r.chi_violation.unwrap().node, 5);
        assert!(r.failures()[0].contains("node 5"));
    }

    #[test]
    fn growth_fit_cases() {
        let f = fit_growth(&[0.5, 1.0, 2.0], &[3.0, 3.0, 3.0], 3.0);
        assert_eq!((f.c, f.delta), (1.0, 0.0));
        let t = [0.5, 1.0, 2.0];
        let y: Vec<f64> = t.iter().map(|&t: &f64| 2.0 * (0.7 * t).exp()).collect();
        let f = fit_growth(&t, &y, 1.0);
        assert!((f.delta - 0.7).abs() < 1e-12 && (f.c - 2.0).abs() < 1e-12);
        assert!(f.holds(&t, &y, 1.0));
        assert!(fit_growth(&t, &[1.0, f64::INFINITY, 1.0], 1.0).blow_up);
        assert!(fit_growth(&t, &y, 0.0).blow_up);
    }

    #[test]
    fn steady_monitors_flat() {
        let b = line();
        let tr = constant_trace(&b, 1.5, 1.5, 6, 0.2);
        let reps = energy_monitors(&[tr.clone(), tr], &ModelParams::desk()).unwrap();
        let xi = &reps[0];
        assert!(xi.lhs.iter().all(|&y| (y - xi.init).abs() < 1e-12 * xi.init));
        assert_eq!(xi.fit.delta, 0.0);
        let trv = constant_trace(&b, 0.0, 1.0, 6, 0.2);
        let reps = energy_monitors(&[trv], &ModelParams::desk()).unwrap();
        assert!(reps[1].lhs.iter().all(|&y| (y - 1.0).abs() < 1e-14));
    }

    #[test]
    fn config_checks() {
        assert!(FunctionalConfig::default().violations(1).is_empty());
        assert_eq!(FunctionalConfig::default().violations(2).len(), 1);
        assert!(FunctionalConfig::default_for(2).violations(2).is_empty());
        let bad = FunctionalConfig {
            p: 0.5,
            rho: 1.3,
            stride: 0,
        };
        assert_eq!(bad.violations(1).len(), 3);
    }

    #[test]
    fn trace_rows_match_columns() {
        let b = line();
        let tr = constant_trace(&b, 1.0, 2.0, 3, 0.5);
        assert_eq!(tr.row(2).len(), COLUMNS.len());
        assert!(tr.all_finite());
        assert!(tr.push_check());
    }

    impl FunctionalTrace {
        fn push_check(&self) -> bool {
            self.observations.windows(2).all(|w| w[0].weight == w[1].t - w[0].t)
                && self.observations.last().unwrap().weight == 0.0
        }
    }
}
