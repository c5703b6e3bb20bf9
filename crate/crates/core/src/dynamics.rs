//! Time stepping of the stochastic Gierer-Meinhardt system.
//!
//! Per mode, the diagonal linear part `L_k = r lambda_k + Upsilon_k` is
//! integrated exactly and the reaction source with the matching phi-1
//! weight:
//!
//! ```text
//! u_k <- exp(-L_k dt) (u_k + P[sigma u dW]_k) + dt phi1(-L_k dt) P[kappa u^2 / v]_k
//! ```
//!
//! In Ito form `Upsilon_k = mu - sigma (1 + lambda_k)^(-gamma)`; the
//! Stratonovich (Heun) scheme keeps the scalar `mu` and averages the noise
//! coefficient between the current state and an explicit predictor.

use crate::error::{Error, Result};
use crate::fields::{floored, Field, FieldPair};
use crate::noise::{NoisePath, NoiseProcess, NoiseSpec, TimeGrid};
use crate::spectral_basis::SpectralBasis;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub r_u: f64,
    pub r_v: f64,
    pub kappa_u: f64,
    pub kappa_v: f64,
    pub mu_u: f64,
    pub mu_v: f64,
    pub sigma_u: f64,
    pub sigma_v: f64,
}

impl ModelParams {
    /// Small-scale parameter set with a stable homogeneous state that is
    /// Turing-unstable for the first two Neumann modes on the unit interval.
    pub fn desk() -> Self {
        ModelParams {
            r_u: 0.01,
            r_v: 0.2,
            kappa_u: 1.0,
            kappa_v: 1.0,
            mu_u: 1.0,
            mu_v: 1.5,
            sigma_u: 0.2,
            sigma_v: 0.2,
        }
    }

    pub fn noiseless(self) -> Self {
        ModelParams {
            sigma_u: 0.0,
            sigma_v: 0.0,
            ..self
        }
    }

    pub fn named(&self) -> [(&'static str, f64); 8] {
        [
            ("r_u", self.r_u),
            ("r_v", self.r_v),
            ("kappa_u", self.kappa_u),
            ("kappa_v", self.kappa_v),
            ("mu_u", self.mu_u),
            ("mu_v", self.mu_v),
            ("sigma_u", self.sigma_u),
            ("sigma_v", self.sigma_v),
        ]
    }

    /// Every parameter must be strictly positive.
    pub fn violations(&self) -> Vec<String> {
        self.named()
            .iter()
            .filter(|(_, x)| !(x.is_finite() && *x > 0.0))
            .map(|(name, x)| format!("{name} must be strictly positive, got {x}"))
            .collect()
    }

    /// Homogeneous steady state `(u*, v*)` of the noiseless system.
    pub fn steady_state(&self) -> (f64, f64) {
        let u = self.kappa_u * self.mu_v / (self.kappa_v * self.mu_u);
        (u, self.kappa_v * u * u / self.mu_v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    ItoImex,
    StratonovichHeun,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::ItoImex => "ito_imex",
            Scheme::StratonovichHeun => "stratonovich_heun",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ito_imex" => Some(Scheme::ItoImex),
            "stratonovich_heun" => Some(Scheme::StratonovichHeun),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub dt: f64,
    pub horizon: f64,
    pub scheme: Scheme,
    pub v_floor: f64,
    pub dealias: bool,
    /// Upper bound on `kappa_u * max(u^2 / v) * dt`.
    pub reaction_cfl: f64,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig {
            dt: 1e-3,
            horizon: 1.0,
            scheme: Scheme::ItoImex,
            v_floor: 1e-8,
            dealias: true,
            reaction_cfl: 1.0,
        }
    }
}

impl SchemeConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.dt.is_finite() && self.dt > 0.0) {
            out.push(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            out.push(format!("horizon must be nonnegative, got {}", self.horizon));
        } else if self.horizon > 0.0 && self.dt > self.horizon {
            out.push(format!("dt = {} exceeds the horizon {}", self.dt, self.horizon));
        }
        if out.is_empty() && TimeGrid::uniform(self.horizon, self.dt).is_err() {
            out.push(format!(
                "horizon / dt = {} must be an integer",
                self.horizon / self.dt
            ));
        }
        if !(self.v_floor.is_finite() && self.v_floor >= 0.0) {
            out.push(format!("v_floor must be >= 0, got {}", self.v_floor));
        }
        if !(self.reaction_cfl.is_finite() && self.reaction_cfl > 0.0) {
            out.push(format!("reaction_cfl must be positive, got {}", self.reaction_cfl));
        }
        out
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::uniform(self.horizon, self.dt)
    }
}

/// Simulation state at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub step_index: usize,
    pub pair: FieldPair,
    pub floor_activations: usize,
}

impl SimState {
    /// State at `t = 0` with both representations of `u` and `v` current.
    pub fn initial(basis: &SpectralBasis, pair: &FieldPair) -> Result<Self> {
        let u = pair.u.complete(basis)?;
        let v = pair.v.complete(basis)?;
        Ok(SimState {
            t: 0.0,
            step_index: 0,
            pair: FieldPair::new(u, v)?,
            floor_activations: 0,
        })
    }

    pub fn u_modal(&self) -> &[f64] {
        self.pair.u.modal().expect("state keeps modal current")
    }

    pub fn v_modal(&self) -> &[f64] {
        self.pair.v.modal().expect("state keeps modal current")
    }

    pub fn u_nodal(&self) -> &[f64] {
        self.pair.u.nodal().expect("state keeps nodal current")
    }

    pub fn v_nodal(&self) -> &[f64] {
        self.pair.v.nodal().expect("state keeps nodal current")
    }
}

/// `(mu - sigma (1 + lambda_k)^(-gamma)) f_k`
pub fn upsilon_apply(
    basis: &SpectralBasis,
    f: &Field,
    mu: f64,
    sigma: f64,
    gamma: f64,
) -> Result<Field> {
    f.check_basis(basis)?;
    let f = f.to_modal(basis)?;
    let out = basis.apply_multiplier(f.modal_values()?, |l| upsilon_factor(l, mu, sigma, gamma));
    Field::from_modal(basis, out)
}

#[inline]
fn upsilon_factor(lambda: f64, mu: f64, sigma: f64, gamma: f64) -> f64 {
    mu - sigma * (1.0 + lambda).powf(-gamma)
}

/// `(exp(-L dt), dt phi1(-L dt))` with `phi1(z) = (e^z - 1) / z`.
fn exponential_weights(linear: f64, dt: f64) -> (f64, f64) {
    let x = linear * dt;
    let phi = if x == 0.0 { dt } else { -(-x).exp_m1() / linear };
    ((-x).exp(), phi)
}

/// Reusable one-step integrator for a fixed basis, parameter set and scheme.
pub struct Stepper<'a> {
    basis: &'a SpectralBasis,
    params: ModelParams,
    scheme: SchemeConfig,
    noise_scale: [Vec<f64>; 2],
    linear: [Vec<f64>; 2],
    weights_dt: f64,
    expo: [Vec<f64>; 2],
    phi: [Vec<f64>; 2],
}

impl<'a> Stepper<'a> {
    pub fn new(
        basis: &'a SpectralBasis,
        params: &ModelParams,
        noise: &NoiseSpec,
        scheme: &SchemeConfig,
    ) -> Self {
        Self::with_scheme(basis, params, noise, scheme, scheme.scheme)
    }

    fn with_scheme(
        basis: &'a SpectralBasis,
        params: &ModelParams,
        noise: &NoiseSpec,
        scheme: &SchemeConfig,
        kind: Scheme,
    ) -> Self {
        let linear_for = |r: f64, mu: f64, sigma: f64, gamma: f64| -> Vec<f64> {
            basis
                .eigenvalues()
                .iter()
                .map(|&l| match kind {
                    Scheme::ItoImex => r * l + upsilon_factor(l, mu, sigma, gamma),
                    Scheme::StratonovichHeun => r * l + mu,
                })
                .collect()
        };
        let linear = [
            linear_for(params.r_u, params.mu_u, params.sigma_u, noise.gamma1),
            linear_for(params.r_v, params.mu_v, params.sigma_v, noise.gamma2),
        ];
        let k = basis.mode_count();
        Stepper {
            basis,
            params: *params,
            scheme: SchemeConfig {
                scheme: kind,
                ..scheme.clone()
            },
            noise_scale: [
                noise.modal_scale(basis, NoiseProcess::W1),
                noise.modal_scale(basis, NoiseProcess::W2),
            ],
            linear,
            weights_dt: f64::NAN,
            expo: [vec![0.0; k], vec![0.0; k]],
            phi: [vec![0.0; k], vec![0.0; k]],
        }
    }

    pub fn basis(&self) -> &SpectralBasis {
        self.basis
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme.scheme
    }

    fn refresh_weights(&mut self, dt: f64) {
        if self.weights_dt == dt {
            return;
        }
        for s in 0..2 {
            for (k, &l) in self.linear[s].iter().enumerate() {
                let (e, p) = exponential_weights(l, dt);
                self.expo[s][k] = e;
                self.phi[s][k] = p;
            }
        }
        self.weights_dt = dt;
    }

    fn project_masked(&self, nodal: &[f64], out: &mut [f64]) {
        self.basis.project(nodal, out);
        if self.scheme.dealias {
            for (c, &keep) in out.iter_mut().zip(self.basis.dealias_mask()) {
                if !keep {
                    *c = 0.0;
                }
            }
        }
    }

    /// Advance with raw Brownian increments `dB_j` (length K) for this step.
    pub fn step_with_increments(
        &mut self,
        state: &SimState,
        chi: Option<&[f64]>,
        db1: &[f64],
        db2: &[f64],
        dt: f64,
    ) -> Result<SimState> {
        let dw1: Vec<f64> = db1.iter().zip(&self.noise_scale[0]).map(|(b, s)| b * s).collect();
        let dw2: Vec<f64> = db2.iter().zip(&self.noise_scale[1]).map(|(b, s)| b * s).collect();
        self.step(state, chi, &dw1, &dw2, dt)
    }

    /// Advance one step given the modal noise increments `dW_1`, `dW_2`.
    ///
    /// The reaction sources use `chi` in place of `u` when given; the
    /// noise products always use the state itself.
    pub fn step(
        &mut self,
        state: &SimState,
        chi: Option<&[f64]>,
        dw1: &[f64],
        dw2: &[f64],
        dt: f64,
    ) -> Result<SimState> {
        let basis = self.basis;
        let (nn, kk) = (basis.node_count(), basis.mode_count());
        let step = state.step_index;
        self.refresh_weights(dt);
        let p = self.params;
        let (u, v) = (state.u_nodal(), state.v_nodal());
        let (uh, vh) = (state.u_modal(), state.v_modal());
        let chi = chi.unwrap_or(u);

        let mut src_u = vec![0.0; nn];
        let mut src_v = vec![0.0; nn];
        let mut floors = 0;
        let mut max_q = 0.0f64;
        for i in 0..nn {
            let denom = floored(v[i], self.scheme.v_floor, i)?;
            if denom != v[i] {
                floors += 1;
            }
            let c2 = chi[i] * chi[i];
            let q = c2 / denom;
            max_q = max_q.max(q);
            src_u[i] = p.kappa_u * q;
            src_v[i] = p.kappa_v * c2;
        }
        let cfl = p.kappa_u * max_q * dt;
        if !(cfl < self.scheme.reaction_cfl) {
            return Err(Error::ReactionCfl {
                step,
                value: cfl,
                bound: self.scheme.reaction_cfl,
            });
        }
        let mut su = vec![0.0; kk];
        let mut sv = vec![0.0; kk];
        self.project_masked(&src_u, &mut su);
        self.project_masked(&src_v, &mut sv);

        let mut w1 = vec![0.0; nn];
        let mut w2 = vec![0.0; nn];
        basis.synthesize(dw1, &mut w1);
        basis.synthesize(dw2, &mut w2);
        let mut nu = vec![0.0; kk];
        let mut nv = vec![0.0; kk];
        let mut prod = vec![0.0; nn];
        self.noise_product(p.sigma_u, u, &w1, &mut prod, &mut nu);
        self.noise_product(p.sigma_v, v, &w2, &mut prod, &mut nv);

        let (eu, ev) = (&self.expo[0], &self.expo[1]);
        let (pu, pv) = (&self.phi[0], &self.phi[1]);
        let (new_u, new_v) = match self.scheme.scheme {
            Scheme::ItoImex => (
                combine(eu, pu, uh, &nu, &su),
                combine(ev, pv, vh, &nv, &sv),
            ),
            Scheme::StratonovichHeun => {
                let pred_u = combine(eu, pu, uh, &nu, &su);
                let pred_v = combine(ev, pv, vh, &nv, &sv);
                let mut pun = vec![0.0; nn];
                let mut pvn = vec![0.0; nn];
                basis.synthesize(&pred_u, &mut pun);
                basis.synthesize(&pred_v, &mut pvn);
                let mut nu2 = vec![0.0; kk];
                let mut nv2 = vec![0.0; kk];
                self.noise_product(p.sigma_u, &pun, &w1, &mut prod, &mut nu2);
                self.noise_product(p.sigma_v, &pvn, &w2, &mut prod, &mut nv2);
                let avg = |a: &[f64], b: &[f64]| -> Vec<f64> {
                    a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()
                };
                (
                    combine(eu, pu, uh, &avg(&nu, &nu2), &su),
                    combine(ev, pv, vh, &avg(&nv, &nv2), &sv),
                )
            }
        };

        let mut un = vec![0.0; nn];
        let mut vn = vec![0.0; nn];
        basis.synthesize(&new_u, &mut un);
        basis.synthesize(&new_v, &mut vn);
        if un.iter().chain(&vn).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: "state",
                step: step + 1,
            });
        }
        Ok(SimState {
            t: state.t + dt,
            step_index: step + 1,
            pair: FieldPair {
                u: Field::from_parts(basis, un, new_u),
                v: Field::from_parts(basis, vn, new_v),
            },
            floor_activations: state.floor_activations + floors,
        })
    }

    fn noise_product(&self, sigma: f64, f: &[f64], w: &[f64], buf: &mut [f64], out: &mut [f64]) {
        for ((b, &fi), &wi) in buf.iter_mut().zip(f).zip(w) {
            *b = sigma * fi * wi;
        }
        self.project_masked(buf, out);
    }
}

/// `e (x + noise) + phi src`, elementwise.
fn combine(e: &[f64], phi: &[f64], x: &[f64], noise: &[f64], src: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|k| e[k] * (x[k] + noise[k]) + phi[k] * src[k])
        .collect()
}

fn modal_noise(field: &Field, basis: &SpectralBasis) -> Result<Vec<f64>> {
    field.check_basis(basis)?;
    Ok(field.to_modal(basis)?.modal_values()?.to_vec())
}

/// One Ito step with the `Upsilon` operators in place of scalar decay.
#[allow(clippy::too_many_arguments)]
pub fn step_ito(
    state: &SimState,
    params: &ModelParams,
    noise: &NoiseSpec,
    scheme: &SchemeConfig,
    basis: &SpectralBasis,
    dw1: &Field,
    dw2: &Field,
    dt: f64,
) -> Result<SimState> {
    let (a, b) = (modal_noise(dw1, basis)?, modal_noise(dw2, basis)?);
    Stepper::with_scheme(basis, params, noise, scheme, Scheme::ItoImex).step(state, None, &a, &b, dt)
}

/// One Stratonovich (Heun) step with scalar decay.
#[allow(clippy::too_many_arguments)]
pub fn step_stratonovich(
    state: &SimState,
    params: &ModelParams,
    noise: &NoiseSpec,
    scheme: &SchemeConfig,
    basis: &SpectralBasis,
    dw1: &Field,
    dw2: &Field,
    dt: f64,
) -> Result<SimState> {
    let (a, b) = (modal_noise(dw1, basis)?, modal_noise(dw2, basis)?);
    Stepper::with_scheme(basis, params, noise, scheme, Scheme::StratonovichHeun)
        .step(state, None, &a, &b, dt)
}

/// Receives states in time order during [`run`].
pub trait Observer {
    /// Steps between observations. The initial and final states are always
    /// observed.
    fn stride(&self) -> usize {
        1
    }

    fn observe(&mut self, basis: &SpectralBasis, state: &SimState) -> Result<()>;
}

/// Stores the modal states seen at each observation.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryRecorder {
    pub stride: usize,
    pub times: Vec<f64>,
    pub steps: Vec<usize>,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub floor_activations: usize,
}

impl TrajectoryRecorder {
    pub fn every_step() -> Self {
        TrajectoryRecorder {
            stride: 1,
            ..Default::default()
        }
    }
}

impl Observer for TrajectoryRecorder {
    fn stride(&self) -> usize {
        self.stride.max(1)
    }

    fn observe(&mut self, _basis: &SpectralBasis, state: &SimState) -> Result<()> {
        self.times.push(state.t);
        self.steps.push(state.step_index);
        self.u.push(state.u_modal().to_vec());
        self.v.push(state.v_modal().to_vec());
        self.floor_activations = state.floor_activations;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub final_state: SimState,
    pub steps: usize,
}

/// Drive the configured scheme along `path`, notifying observers.
pub fn run(
    initial: &FieldPair,
    params: &ModelParams,
    noise: &NoiseSpec,
    scheme: &SchemeConfig,
    basis: &SpectralBasis,
    path: &NoisePath,
    observers: &mut [&mut dyn Observer],
) -> Result<RunOutcome> {
    let grid = path.time_grid();
    if (grid.horizon() - scheme.horizon).abs() > 1e-9 * scheme.horizon.max(1.0) {
        return Err(Error::Precondition(format!(
            "noise path horizon {} does not match the scheme horizon {}",
            grid.horizon(),
            scheme.horizon
        )));
    }
    if path.mode_count() != basis.mode_count() {
        return Err(Error::LengthMismatch {
            what: "noise modes",
            expected: basis.mode_count(),
            found: path.mode_count(),
        });
    }
    let mut state = SimState::initial(basis, initial)?;
    let steps = grid.steps();
    for obs in observers.iter_mut() {
        obs.observe(basis, &state)?;
    }
    let mut stepper = Stepper::new(basis, params, noise, scheme);
    for n in 0..steps {
        state = stepper.step_with_increments(
            &state,
            None,
            path.step_increments(NoiseProcess::W1, n),
            path.step_increments(NoiseProcess::W2, n),
            grid.dt(n),
        )?;
        // land exactly on the grid
        state.t = grid.times()[n + 1];
        for obs in observers.iter_mut() {
            if (n + 1) % obs.stride() == 0 || n + 1 == steps {
                obs.observe(basis, &state)?;
            }
        }
    }
    Ok(RunOutcome {
        final_state: state,
        steps,
    })
}

/// `u* (1 + amplitude * p(x))`, `v*`, where `p` is the average of the
/// sup-normalized modes `1..=perturbed_modes`.
pub fn default_initial(
    basis: &SpectralBasis,
    params: &ModelParams,
    amplitude: f64,
    perturbed_modes: usize,
) -> Result<FieldPair> {
    let (us, vs) = params.steady_state();
    let last = perturbed_modes.min(basis.mode_count().saturating_sub(1));
    let mut pert = vec![0.0; basis.node_count()];
    for k in 1..=last {
        let e = basis.nodal_eigenfunction(k)?;
        let sup = e.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (p, x) in pert.iter_mut().zip(&e) {
            *p += x / (sup * last as f64);
        }
    }
    let u: Vec<f64> = pert.iter().map(|p| us * (1.0 + amplitude * p)).collect();
    let u = Field::from_nodal(basis, u)?.to_modal(basis)?;
    FieldPair::new(u, Field::constant(basis, vs))
}

/// Modal deterministic right-hand side of the Ito system at `pair`:
/// `r Delta u + kappa_u u^2 / v - Upsilon_u u` and its `v` counterpart.
pub fn drift(
    basis: &SpectralBasis,
    params: &ModelParams,
    noise: &NoiseSpec,
    v_floor: f64,
    pair: &FieldPair,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let u = pair.u.complete(basis)?;
    let v = pair.v.complete(basis)?;
    let (un, vn) = (u.nodal_values()?, v.nodal_values()?);
    let mut q = vec![0.0; basis.node_count()];
    let mut u2 = vec![0.0; basis.node_count()];
    for i in 0..q.len() {
        q[i] = params.kappa_u * un[i] * un[i] / floored(vn[i], v_floor, i)?;
        u2[i] = params.kappa_v * un[i] * un[i];
    }
    let mut sq = vec![0.0; basis.mode_count()];
    let mut s2 = vec![0.0; basis.mode_count()];
    basis.project(&q, &mut sq);
    basis.project(&u2, &mut s2);
    let lam = basis.eigenvalues();
    let (uh, vh) = (u.modal_values()?, v.modal_values()?);
    let du = (0..lam.len())
        .map(|k| {
            -params.r_u * lam[k] * uh[k] + sq[k]
                - upsilon_factor(lam[k], params.mu_u, params.sigma_u, noise.gamma1) * uh[k]
        })
        .collect();
    let dv = (0..lam.len())
        .map(|k| {
            -params.r_v * lam[k] * vh[k] + s2[k]
                - upsilon_factor(lam[k], params.mu_v, params.sigma_v, noise.gamma2) * vh[k]
        })
        .collect();
    Ok((du, dv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::norm_lp;
    use crate::noise::{increment_field, sample_path};
    use crate::spectral_basis::DomainSpec;

    fn line() -> SpectralBasis {
        SpectralBasis::build(&DomainSpec::interval(1.0, 32), 12).unwrap()
    }

    fn spec() -> NoiseSpec {
        NoiseSpec::with_default_gammas(1, 12, 5)
    }

    #[test]
    fn upsilon_examples() {
        let b = line();
        let f = Field::from_modal(&b, (0..12).map(|k| k as f64 + 1.0).collect()).unwrap();
        let plain = upsilon_apply(&b, &f, 0.7, 0.0, 2.0).unwrap();
        for (x, y) in plain.modal().unwrap().iter().zip(f.modal().unwrap()) {
            assert_eq!(*x, 0.7 * y);
        }
        let g = upsilon_apply(&b, &f, 1.0, 0.5, 2.0).unwrap();
        assert_eq!(g.modal().unwrap()[0], 0.5);

        let pb = SpectralBasis::build(
            &DomainSpec::interval(1.0, 16).with_convention(crate::spectral_basis::EigenvalueConvention::Paper1d),
            2,
        )
        .unwrap();
        let e1 = Field::eigenfunction(&pb, 1).unwrap();
        let out = upsilon_apply(&pb, &e1, 1.0, 0.5, 2.0).unwrap();
        let lam = 4.0 * std::f64::consts::PI.powi(2);
        assert!((out.modal().unwrap()[1] - (1.0 - 0.5 * (1.0 + lam).powi(-2))).abs() < 1e-15);
    }

    #[test]
    fn phi_weights() {
        let (e, p) = exponential_weights(0.0, 0.1);
        assert_eq!((e, p), (1.0, 0.1));
        let (e, p) = exponential_weights(2.0, 0.1);
        assert!((e - (-0.2f64).exp()).abs() < 1e-16);
        assert!((p - (1.0 - (-0.2f64).exp()) / 2.0).abs() < 1e-16);
    }

    #[test]
    fn heun_without_noise_matches_ito_bitwise() {
        let b = line();
        let params = ModelParams::desk().noiseless();
        let s = spec();
        let cfg = SchemeConfig {
            horizon: 0.05,
            ..Default::default()
        };
        let pair = default_initial(&b, &params, 0.05, 4).unwrap();
        let path = sample_path(&s, &cfg.time_grid().unwrap(), 0);
        let mut a = SimState::initial(&b, &pair).unwrap();
        let mut c = a.clone();
        for n in 0..path.steps() {
            let w1 = increment_field(&path, n, NoiseProcess::W1, &b, &s).unwrap();
            let w2 = increment_field(&path, n, NoiseProcess::W2, &b, &s).unwrap();
            a = step_ito(&a, &params, &s, &cfg, &b, &w1, &w2, cfg.dt).unwrap();
            c = step_stratonovich(&c, &params, &s, &cfg, &b, &w1, &w2, cfg.dt).unwrap();
        }
        assert_eq!(a, c);
    }

    #[test]
    fn steady_state_has_zero_drift() {
        let b = line();
        let params = ModelParams::desk().noiseless();
        let (us, vs) = params.steady_state();
        let pair = FieldPair::new(Field::constant(&b, us), Field::constant(&b, vs)).unwrap();
        let (du, dv) = drift(&b, &params, &spec(), 0.0, &pair).unwrap();
        assert!(du.iter().chain(&dv).all(|x| x.abs() < 1e-13));
    }

    #[test]
    fn zero_horizon_and_determinism() {
        let b = line();
        let params = ModelParams::desk();
        let s = spec();
        let cfg = SchemeConfig {
            horizon: 0.0,
            ..Default::default()
        };
        let pair = default_initial(&b, &params, 0.01, 4).unwrap();
        let path = sample_path(&s, &cfg.time_grid().unwrap(), 0);
        let mut rec = TrajectoryRecorder::every_step();
        let out = run(&pair, &params, &s, &cfg, &b, &path, &mut [&mut rec]).unwrap();
        assert_eq!(out.steps, 0);
        assert_eq!(rec.times, vec![0.0]);

        let cfg = SchemeConfig {
            horizon: 0.1,
            ..Default::default()
        };
        let path = sample_path(&s, &cfg.time_grid().unwrap(), 2);
        let mut r1 = TrajectoryRecorder::every_step();
        let mut r2 = TrajectoryRecorder::every_step();
        run(&pair, &params, &s, &cfg, &b, &path, &mut [&mut r1]).unwrap();
        run(&pair, &params, &s, &cfg, &b, &path, &mut [&mut r2]).unwrap();
        assert_eq!(r1.u, r2.u);
        assert_eq!(r1.v, r2.v);
        assert_eq!(r1.times.len(), 101);
    }

    #[test]
    fn observer_stride_includes_final() {
        let b = line();
        let s = spec();
        let cfg = SchemeConfig {
            horizon: 0.025,
            ..Default::default()
        };
        let path = sample_path(&s, &cfg.time_grid().unwrap(), 0);
        let pair = default_initial(&b, &ModelParams::desk(), 0.01, 4).unwrap();
        let mut rec = TrajectoryRecorder {
            stride: 10,
            ..Default::default()
        };
        run(&pair, &ModelParams::desk(), &s, &cfg, &b, &path, &mut [&mut rec]).unwrap();
        assert_eq!(rec.steps, vec![0, 10, 20, 25]);
    }

    #[test]
    fn mass_conserved_without_reaction() {
        let b = line();
        let zero = ModelParams {
            r_u: 0.3,
            r_v: 0.1,
            kappa_u: 0.0,
            kappa_v: 0.0,
            mu_u: 0.0,
            mu_v: 0.0,
            sigma_u: 0.0,
            sigma_v: 0.0,
        };
        let u0: Vec<f64> = (0..32).map(|i| 1.0 + 0.5 * ((i as f64) * 0.4).sin()).collect();
        let u = Field::from_nodal(&b, u0).unwrap().to_modal(&b).unwrap();
        let u = Field::from_modal(&b, u.modal().unwrap().to_vec()).unwrap().to_nodal(&b).unwrap();
        let pair = FieldPair::new(u, Field::constant(&b, 1.0)).unwrap();
        let cfg = SchemeConfig {
            horizon: 0.5,
            ..Default::default()
        };
        let path = NoisePath::silent(&cfg.time_grid().unwrap(), 12);
        let m0 = b.integrate(pair.u.nodal().unwrap());
        let out = run(&pair, &zero, &spec(), &cfg, &b, &path, &mut []).unwrap();
        let m1 = b.integrate(out.final_state.u_nodal());
        assert!((m0 - m1).abs() < 1e-10);
        // diffusion smooths: L2 norm does not grow
        assert!(
            norm_lp(&b, &out.final_state.pair.u, 2.0).unwrap() <= norm_lp(&b, &pair.u, 2.0).unwrap() + 1e-12
        );
    }

    #[test]
    fn cfl_violation_rejected() {
        let b = line();
        let params = ModelParams::desk();
        let cfg = SchemeConfig {
            dt: 0.5,
            horizon: 1.0,
            ..Default::default()
        };
        let pair = FieldPair::new(Field::constant(&b, 10.0), Field::constant(&b, 1.0)).unwrap();
        let path = NoisePath::silent(&cfg.time_grid().unwrap(), 12);
        let err = run(&pair, &params, &spec(), &cfg, &b, &path, &mut []).unwrap_err();
        assert!(matches!(err, Error::ReactionCfl { .. }));
    }

    #[test]
    fn nonpositive_inhibitor_rejected_with_strict_floor() {
        let b = line();
        let cfg = SchemeConfig {
            v_floor: 0.0,
            horizon: 0.01,
            ..Default::default()
        };
        let mut v = vec![1.0; 32];
        v[3] = -0.5;
        let pair = FieldPair::new(Field::constant(&b, 1.0), Field::from_nodal(&b, v).unwrap()).unwrap();
        let path = NoisePath::silent(&cfg.time_grid().unwrap(), 12);
        let err = run(&pair, &ModelParams::desk(), &spec(), &cfg, &b, &path, &mut []).unwrap_err();
        assert!(matches!(err, Error::NonPositiveInhibitor { node: 3, .. }));
    }

    #[test]
    fn param_validation() {
        assert!(ModelParams::desk().violations().is_empty());
        let bad = ModelParams {
            kappa_u: -1.0,
            mu_v: 0.0,
            ..ModelParams::desk()
        };
        let v = bad.violations();
        assert_eq!(v.len(), 2);
        assert!(v[0].contains("kappa_u"));
        let cfg = SchemeConfig {
            dt: 0.3,
            ..Default::default()
        };
        assert_eq!(cfg.violations().len(), 1);
    }
}
