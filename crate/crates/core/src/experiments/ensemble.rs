//! Monte Carlo ensembles of independent paths with functional traces,
//! energy monitors and fitted moment bounds.

use super::{par_map, Problem};
use crate::dynamics::run;
use crate::error::{Error, Result};
use crate::fields::FieldPair;
use crate::functionals::{
    energy_monitors, ensemble_statistics, sup, time_integral, FunctionalConfig, FunctionalRecorder, FunctionalTrace,
    MonitorReport, Observation, TraceStatistics,
};
use crate::noise::sample_path;

#[derive(Debug, Clone, PartialEq)]
pub struct PathFailure {
    pub path_index: u64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct EnsembleReport {
    /// Indices of the surviving paths, in input order.
    pub path_indices: Vec<u64>,
    pub failures: Vec<PathFailure>,
    pub traces: Vec<FunctionalTrace>,
    pub statistics: TraceStatistics,
    pub monitors: Vec<MonitorReport>,
    /// Fits of the moment bounds on `u`, `v` and `xi`.
    pub bounds: Vec<MonitorReport>,
}

impl EnsembleReport {
    pub fn floor_activations(&self) -> usize {
        self.traces
            .iter()
            .map(|t| t.observations.last().map_or(0, |o| o.floor_activations + o.xi_floor_activations))
            .sum()
    }

    pub fn min_v(&self) -> f64 {
        self.traces
            .iter()
            .flat_map(|t| t.observations.iter().map(|o| o.min_v))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn any_blow_up(&self) -> bool {
        self.bounds.iter().chain(&self.monitors).any(|m| m.fit.blow_up)
    }
}

/// Run every listed path from `initial`. Failing paths are reported and
/// the statistics use the survivors.
pub fn ensemble(
    problem: &Problem,
    functionals: &FunctionalConfig,
    initial: &FieldPair,
    path_indices: &[u64],
) -> Result<EnsembleReport> {
    if path_indices.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "an ensemble needs at least 2 paths, got {}",
            path_indices.len()
        )));
    }
    let grid = problem.scheme.time_grid()?;
    let results = par_map(path_indices.to_vec(), |idx| {
        let path = sample_path(problem.noise, &grid, idx);
        let mut rec = FunctionalRecorder::new(functionals, problem.scheme.v_floor);
        run(initial, problem.params, problem.noise, problem.scheme, problem.basis, &path, &mut [&mut rec])
            .map(|_| rec.trace)
    });
    let mut survivors = Vec::new();
    let mut traces = Vec::new();
    let mut failures = Vec::new();
    for (&idx, r) in path_indices.iter().zip(results) {
        match r {
            Ok(t) => {
                survivors.push(idx);
                traces.push(t);
            }
            Err(e) => failures.push(PathFailure {
                path_index: idx,
                message: e.to_string(),
            }),
        }
    }
    if traces.is_empty() {
        return Err(Error::Precondition(format!("all {} paths failed: {}", failures.len(), failures[0].message)));
    }
    let statistics = ensemble_statistics(&traces)?;
    let monitors = energy_monitors(&traces, problem.params)?;
    let bounds = moment_bounds(&traces);
    Ok(EnsembleReport {
        path_indices: survivors,
        failures,
        traces,
        statistics,
        monitors,
        bounds,
    })
}

/// At each observed horizon:
/// `E sup |u|^2_(H^(1-rho)) + 2 E int |grad u|^2_(H^(1-rho))` against `1 + E|u0|^2`,
/// `E sup |v| + 2 (E int |grad v|^2)^(1/2)` against `1 + E|v0|`,
/// `E sup |xi|^p_(L^p) + p(p+1) E int int xi^(p+2) |grad v|^2` against `1 + E|xi0|^p`.
pub fn moment_bounds(traces: &[FunctionalTrace]) -> Vec<MonitorReport> {
    let m = traces.len() as f64;
    let p = traces[0].p;
    let rows = traces[0].len();
    let e = |i: usize, f: &dyn Fn(&[Observation]) -> f64| traces.iter().map(|t| f(t.prefix(i))).sum::<f64>() / m;
    let init = |f: fn(&Observation) -> f64| traces.iter().map(|t| f(&t.observations[0])).sum::<f64>() / m;
    let horizons: Vec<f64> = traces[0].observations[1..].iter().map(|o| o.t).collect();
    let series = |f: &dyn Fn(usize) -> f64| (1..rows).map(f).collect::<Vec<f64>>();
    let u = series(&|i| {
        e(i, &|w| sup(w, |o| o.u_h1mrho_sq)) + 2.0 * e(i, &|w| time_integral(w, |o| o.grad_u_h1mrho_sq))
    });
    let v = series(&|i| e(i, &|w| sup(w, |o| o.v_l2)) + 2.0 * e(i, &|w| time_integral(w, |o| o.grad_v_sq)).sqrt());
    let xi = series(&|i| {
        e(i, &|w| sup(w, |o| o.xi_lp_p)) + p * (p + 1.0) * e(i, &|w| time_integral(w, |o| o.xi_p2_grad_v_sq))
    });
    vec![
        monitor("u_bound", horizons.clone(), u, 1.0 + init(|o| o.u_l2_sq)),
        monitor("v_bound", horizons.clone(), v, 1.0 + init(|o| o.v_l2)),
        monitor("xi_bound", horizons, xi, 1.0 + init(|o| o.xi_lp_p)),
    ]
}

fn monitor(name: &'static str, horizons: Vec<f64>, lhs: Vec<f64>, init: f64) -> MonitorReport {
    let fit = crate::functionals::fit_growth(&horizons, &lhs, init);
    MonitorReport {
        name,
        horizons,
        lhs,
        init,
        fit,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{default_initial, ModelParams, SchemeConfig};
    use crate::noise::NoiseSpec;
    use crate::spectral_basis::{DomainSpec, SpectralBasis};

    fn setup(params: ModelParams) -> (SpectralBasis, ModelParams, NoiseSpec, SchemeConfig) {
        (
            SpectralBasis::build(&DomainSpec::interval(1.0, 32), 8).unwrap(),
            params,
            NoiseSpec::with_default_gammas(1, 8, 21),
            SchemeConfig {
                horizon: 0.1,
                ..Default::default()
            },
        )
    }

    #[test]
    fn identical_paths_have_zero_spread() {
        let (b, p, n, s) = setup(ModelParams::desk());
        let problem = Problem {
            basis: &b,
            params: &p,
            noise: &n,
            scheme: &s,
        };
        let init = default_initial(&b, &p, 0.01, 4).unwrap();
        let rep = ensemble(&problem, &FunctionalConfig::default(), &init, &[4, 4]).unwrap();
        assert!(rep.statistics.std_error.iter().flatten().all(|&x| x == 0.0));
        assert!(!rep.any_blow_up());
        assert_eq!(rep.floor_activations(), 0);
    }

    #[test]
    fn noiseless_ensemble_matches_single_run() {
        let (b, p, n, s) = setup(ModelParams::desk().noiseless());
        let problem = Problem {
            basis: &b,
            params: &p,
            noise: &n,
            scheme: &s,
        };
        let init = default_initial(&b, &p, 0.01, 4).unwrap();
        let rep = ensemble(&problem, &FunctionalConfig::default(), &init, &[0, 1, 2]).unwrap();
        assert!(rep.statistics.std_error.iter().flatten().all(|&x| x == 0.0));
        let mut rec = FunctionalRecorder::new(&FunctionalConfig::default(), s.v_floor);
        let path = sample_path(&n, &s.time_grid().unwrap(), 9);
        run(&init, &p, &n, &s, &b, &path, &mut [&mut rec]).unwrap();
        assert_eq!(rep.traces[0], rec.trace);
    }

    #[test]
    fn failures_are_reported() {
        let (b, p, n, mut s) = setup(ModelParams::desk());
        s.reaction_cfl = 1e-6;
        let problem = Problem {
            basis: &b,
            params: &p,
            noise: &n,
            scheme: &s,
        };
        let init = default_initial(&b, &p, 0.01, 4).unwrap();
        let err = ensemble(&problem, &FunctionalConfig::default(), &init, &[0, 1]).unwrap_err();
        assert!(err.to_string().contains("all 2 paths failed"));
    }
}
