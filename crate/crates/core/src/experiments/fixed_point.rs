//! The map `T(chi, eta) = (u, v)`: `v` solves its equation with source
//! `kappa_v chi^2`, then `u` solves its equation with source
//! `kappa_u chi^2 / v`. `eta` never enters. Fixed points of `T` are
//! solutions of the coupled system, found here by Picard iteration over a
//! frozen ensemble of noise paths.

use super::{par_map, Problem};
use crate::dynamics::{run, SimState, Stepper, TrajectoryRecorder};
use crate::error::{Error, Result};
use crate::fields::{hs_norm_sq_modal, Field, FieldPair};
use crate::functionals::{membership, AdmissibleSetSpec, FieldView, FunctionalConfig, FunctionalTrace, MembershipReport, Observation};
use crate::noise::{sample_path, NoisePath, NoiseProcess};
use crate::spectral_basis::SpectralBasis;

/// Fields of one path at every time of the grid, both representations current.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub u: Vec<Field>,
    pub v: Vec<Field>,
}

impl Trajectory {
    /// `pair` held fixed at every time.
    pub fn constant(basis: &SpectralBasis, times: &[f64], pair: &FieldPair) -> Result<Self> {
        let u = pair.u.complete(basis)?;
        let v = pair.v.complete(basis)?;
        Ok(Trajectory {
            times: times.to_vec(),
            u: vec![u; times.len()],
            v: vec![v; times.len()],
        })
    }

    fn from_recorder(basis: &SpectralBasis, rec: TrajectoryRecorder) -> Result<Self> {
        let mk = |c: Vec<Vec<f64>>| -> Result<Vec<Field>> { c.into_iter().map(|m| Field::from_modal(basis, m)).collect() };
        Ok(Trajectory {
            times: rec.times,
            u: mk(rec.u)?,
            v: mk(rec.v)?,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// First node and time where `chi >= 0` or `eta > 0` fails.
    pub fn positivity_failure(&self) -> Result<Option<String>> {
        for (n, (u, v)) in self.u.iter().zip(&self.v).enumerate() {
            let (iu, mu) = u.min_nodal()?;
            if !(mu >= 0.0) {
                return Ok(Some(format!("chi >= 0 fails at node {iu}, t = {}: chi = {mu:e}", self.times[n])));
            }
            let (iv, mv) = v.min_nodal()?;
            if !(mv > 0.0) {
                return Ok(Some(format!("eta > 0 fails at node {iv}, t = {}: eta = {mv:e}", self.times[n])));
            }
        }
        Ok(None)
    }
}

/// `T` applied along one noise path, starting from `initial`.
pub fn apply_t(problem: &Problem, input: &Trajectory, initial: &FieldPair, path: &NoisePath) -> Result<Trajectory> {
    let basis = problem.basis;
    let grid = path.time_grid();
    if input.len() != grid.steps() + 1 {
        return Err(Error::LengthMismatch {
            what: "input trajectory times",
            expected: grid.steps() + 1,
            found: input.len(),
        });
    }
    if let Some(why) = input.positivity_failure()? {
        return Err(Error::Precondition(why));
    }
    let mut stepper = Stepper::new(basis, problem.params, problem.noise, problem.scheme);
    let mut state = SimState::initial(basis, initial)?;
    let mut out = Trajectory {
        times: grid.times().to_vec(),
        u: Vec::with_capacity(input.len()),
        v: Vec::with_capacity(input.len()),
    };
    out.u.push(state.pair.u.clone());
    out.v.push(state.pair.v.clone());
    for n in 0..grid.steps() {
        state = stepper.step_with_increments(
            &state,
            Some(input.u[n].nodal_values()?),
            path.step_increments(NoiseProcess::W1, n),
            path.step_increments(NoiseProcess::W2, n),
            grid.dt(n),
        )?;
        state.t = grid.times()[n + 1];
        out.u.push(state.pair.u.clone());
        out.v.push(state.pair.v.clone());
    }
    Ok(out)
}

/// Observations of the iterate `(chi, eta) = input` with `xi = 1/v` taken
/// from `output = T(input)`.
pub fn observe_iterate(
    basis: &SpectralBasis,
    cfg: &FunctionalConfig,
    xi_floor: f64,
    input: &Trajectory,
    output: &Trajectory,
) -> Result<FunctionalTrace> {
    let mut tr = FunctionalTrace::new(cfg);
    for n in 0..input.len() {
        let o = Observation::compute(
            basis,
            cfg,
            input.times[n],
            &FieldView::of(&output.u[n])?,
            &FieldView::of(&output.v[n])?,
            &FieldView::of(&input.u[n])?,
            &FieldView::of(&input.v[n])?,
            xi_floor,
        )?;
        tr.push(o)?;
    }
    Ok(tr)
}

/// `(mean sup_t |du|^2_{H^(1-rho)})^(1/2) + mean sup_t |dv|_{L^2}` over the
/// ensemble.
pub fn seminorm_distance(basis: &SpectralBasis, rho: f64, a: &[Trajectory], b: &[Trajectory]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::LengthMismatch {
            what: "ensemble size",
            expected: a.len(),
            found: b.len(),
        });
    }
    let s = 1.0 - rho;
    let (mut su, mut sv) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                what: "trajectory length",
                expected: x.len(),
                found: y.len(),
            });
        }
        let (mut mu, mut mv) = (0.0f64, 0.0f64);
        for n in 0..x.len() {
            let du = diff(x.u[n].modal_values()?, y.u[n].modal_values()?);
            let dv = diff(x.v[n].modal_values()?, y.v[n].modal_values()?);
            mu = mu.max(hs_norm_sq_modal(basis, &du, s));
            mv = mv.max(hs_norm_sq_modal(basis, &dv, 0.0).sqrt());
        }
        su += mu;
        sv += mv;
    }
    let m = a.len() as f64;
    Ok((su / m).sqrt() + sv / m)
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointConfig {
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Paths in the expectation of the semi-norm.
    pub ensemble_size: usize,
    pub first_path: u64,
    /// Admissible-set bounds are this multiple of the start's values.
    pub bound_factor: f64,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig {
            max_iterations: 30,
            tolerance: 1e-9,
            ensemble_size: 16,
            first_path: 0,
            bound_factor: 10.0,
        }
    }
}

impl FixedPointConfig {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.max_iterations == 0 {
            out.push("picard max_iterations must be positive".into());
        }
        if !(self.tolerance > 0.0) {
            out.push(format!("picard tolerance must be positive, got {}", self.tolerance));
        }
        if self.ensemble_size == 0 {
            out.push("picard ensemble size must be at least 1".into());
        }
        if !(self.bound_factor > 0.0) {
            out.push(format!("bound factor must be positive, got {}", self.bound_factor));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct FixedPointReport {
    pub start: &'static str,
    /// `d_n = |T^(n+1) X_0 - T^n X_0|`.
    pub distances: Vec<f64>,
    pub ratios: Vec<f64>,
    pub admissible: AdmissibleSetSpec,
    /// Membership of `X_0, X_1, ...`.
    pub memberships: Vec<MembershipReport>,
    pub converged: bool,
    /// Distance from the last image to a direct coupled solve on the same paths.
    pub terminal_residual: f64,
}

impl FixedPointReport {
    pub fn iterations(&self) -> usize {
        self.distances.len()
    }

    pub fn all_members(&self) -> bool {
        self.memberships.iter().all(|m| m.passed())
    }

    pub fn ratios_below_one(&self) -> bool {
        self.ratios.iter().all(|&r| r < 1.0)
    }
}

/// Picard iteration `X_(n+1) = T(X_n)` from the time-constant initial data.
pub fn picard_iterate(
    problem: &Problem,
    functionals: &FunctionalConfig,
    cfg: &FixedPointConfig,
    initial: &FieldPair,
) -> Result<FixedPointReport> {
    let problems = cfg.violations();
    if !problems.is_empty() {
        return Err(Error::InvalidParameter(problems.join("; ")));
    }
    let basis = problem.basis;
    let floor = problem.scheme.v_floor;
    let grid = problem.scheme.time_grid()?;
    let paths: Vec<NoisePath> = (0..cfg.ensemble_size as u64)
        .map(|m| sample_path(problem.noise, &grid, cfg.first_path + m))
        .collect();
    let start = Trajectory::constant(basis, grid.times(), initial)?;
    if let Some(why) = start.positivity_failure()? {
        return Err(Error::Precondition(format!("start is not admissible: {why}")));
    }

    let step = |current: &[Trajectory]| -> Result<(Vec<Trajectory>, Vec<FunctionalTrace>)> {
        let work: Vec<(&Trajectory, &NoisePath)> = current.iter().zip(&paths).collect();
        let out = par_map(work, |(x, path)| -> Result<(Trajectory, FunctionalTrace)> {
            let y = apply_t(problem, x, initial, path)?;
            let tr = observe_iterate(basis, functionals, floor, x, &y)?;
            Ok((y, tr))
        });
        let out: Vec<(Trajectory, FunctionalTrace)> = out.into_iter().collect::<Result<_>>()?;
        Ok(out.into_iter().unzip())
    };

    let mut current = vec![start; cfg.ensemble_size];
    let (mut next, traces) = step(&current)?;
    let admissible = AdmissibleSetSpec::scaled_from(&traces, cfg.bound_factor);
    let mut memberships = vec![membership(&traces, &admissible)];
    let mut distances = vec![seminorm_distance(basis, functionals.rho, &next, &current)?];
    let done = |d: f64| d < cfg.tolerance;
    while !done(*distances.last().unwrap()) && distances.len() < cfg.max_iterations {
        current = next;
        let (n, traces) = step(&current)?;
        next = n;
        memberships.push(membership(&traces, &admissible));
        distances.push(seminorm_distance(basis, functionals.rho, &next, &current)?);
    }
    let ratios = distances
        .windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| w[1] / w[0])
        .collect();

    let direct = par_map(paths.iter().collect(), |path| -> Result<Trajectory> {
        let mut rec = TrajectoryRecorder::every_step();
        run(initial, problem.params, problem.noise, problem.scheme, basis, path, &mut [&mut rec])?;
        Trajectory::from_recorder(basis, rec)
    });
    let direct: Vec<Trajectory> = direct.into_iter().collect::<Result<_>>()?;
    let terminal_residual = seminorm_distance(basis, functionals.rho, &direct, &next)?;

    Ok(FixedPointReport {
        start: "time-constant initial data",
        converged: done(*distances.last().unwrap()),
        distances,
        ratios,
        admissible,
        memberships,
        terminal_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{default_initial, ModelParams, SchemeConfig};
    use crate::noise::NoiseSpec;
    use crate::spectral_basis::DomainSpec;

    struct Fixture {
        basis: SpectralBasis,
        params: ModelParams,
        noise: NoiseSpec,
        scheme: SchemeConfig,
    }

    impl Fixture {
        fn new(params: ModelParams) -> Self {
            Fixture {
                basis: SpectralBasis::build(&DomainSpec::interval(1.0, 32), 8).unwrap(),
                params,
                noise: NoiseSpec::with_default_gammas(1, 8, 3),
                scheme: SchemeConfig {
                    horizon: 0.05,
                    ..Default::default()
                },
            }
        }

        fn problem(&self) -> Problem<'_> {
            Problem {
                basis: &self.basis,
                params: &self.params,
                noise: &self.noise,
                scheme: &self.scheme,
            }
        }
    }

    #[test]
    fn steady_state_maps_to_itself() {
        let fx = Fixture::new(ModelParams::desk().noiseless());
        let (us, vs) = fx.params.steady_state();
        let b = &fx.basis;
        let pair = FieldPair::new(Field::constant(b, us), Field::constant(b, vs)).unwrap();
        let grid = fx.scheme.time_grid().unwrap();
        let x = Trajectory::constant(b, grid.times(), &pair).unwrap();
        let path = sample_path(&fx.noise, &grid, 0);
        let y = apply_t(&fx.problem(), &x, &pair, &path).unwrap();
        assert!(seminorm_distance(b, 1.0, &[x], std::slice::from_ref(&y)).unwrap() < 1e-8);
        // deterministic
        let x2 = Trajectory::constant(b, grid.times(), &pair).unwrap();
        assert_eq!(apply_t(&fx.problem(), &x2, &pair, &path).unwrap(), y);

        let rep = picard_iterate(&fx.problem(), &FunctionalConfig::default(), &FixedPointConfig::default(), &pair).unwrap();
        assert_eq!(rep.iterations(), 1);
        assert!(rep.distances[0] < 1e-8);
    }

    #[test]
    fn zero_source_decays() {
        let fx = Fixture::new(ModelParams::desk().noiseless());
        let b = &fx.basis;
        let grid = fx.scheme.time_grid().unwrap();
        let zero_chi = FieldPair::new(Field::constant(b, 0.0), Field::constant(b, 1.0)).unwrap();
        let x = Trajectory::constant(b, grid.times(), &zero_chi).unwrap();
        let init = FieldPair::new(Field::constant(b, 1.0), Field::constant(b, 1.0)).unwrap();
        let y = apply_t(&fx.problem(), &x, &init, &NoisePath::silent(&grid, 8)).unwrap();
        let norms: Vec<f64> = y.v.iter().map(|v| crate::fields::norm_lp(b, v, 2.0).unwrap()).collect();
        assert!(norms.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn negative_start_rejected() {
        let fx = Fixture::new(ModelParams::desk());
        let b = &fx.basis;
        let mut u = vec![1.0; 32];
        u[9] = -1.0;
        let pair = FieldPair::new(Field::from_nodal(b, u).unwrap(), Field::constant(b, 1.0)).unwrap();
        let err = picard_iterate(&fx.problem(), &FunctionalConfig::default(), &FixedPointConfig::default(), &pair).unwrap_err();
        assert!(err.to_string().contains("chi >= 0 fails at node 9"));
    }

    #[test]
    fn picard_contracts_to_direct_solve() {
        let fx = Fixture::new(ModelParams::desk());
        let pair = default_initial(&fx.basis, &fx.params, 0.01, 4).unwrap();
        let cfg = FixedPointConfig {
            ensemble_size: 4,
            ..Default::default()
        };
        let rep = picard_iterate(&fx.problem(), &FunctionalConfig::default(), &cfg, &pair).unwrap();
        assert!(rep.converged, "{:?}", rep.distances);
        assert!(rep.ratios_below_one(), "{:?}", rep.ratios);
        assert!(rep.terminal_residual < 1e-8);
        assert!(rep.all_members());
    }
}
