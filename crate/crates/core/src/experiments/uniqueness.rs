//! Two runs on one noise path whose initial activators differ by a
//! constant of `L^2` norm `delta`.

use super::Problem;
use crate::dynamics::{run, TrajectoryRecorder};
use crate::error::{Error, Result};
use crate::fields::{Field, FieldPair};
use crate::functionals::{FunctionalConfig, FunctionalRecorder, FunctionalTrace};
use crate::noise::NoisePath;

/// Thresholds `m` for the stopping times
/// `tau1_m = inf { t : sup_(s<=t) |xi(s)|_(L^8) >= m }` and
/// `tau2_m = inf { t : int_0^t |u|^2_(H^1) + sup_(s<=t) |u(s)|^2 >= m }`.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingSpec {
    pub levels: Vec<f64>,
}

impl StoppingSpec {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.levels.iter().any(|m| !m.is_finite()) {
            out.push("stopping levels must be finite".into());
        }
        if self.levels.windows(2).any(|w| !(w[0] < w[1])) {
            out.push(format!("stopping levels must increase strictly, got {:?}", self.levels));
        }
        out
    }

    /// First observed step at which each level is reached, per stopping time.
    pub fn hitting_steps(&self, trace: &FunctionalTrace, steps: &[usize]) -> (Vec<Option<usize>>, Vec<Option<usize>>) {
        let obs = &trace.observations;
        let mut s1 = Vec::with_capacity(obs.len());
        let mut s2 = Vec::with_capacity(obs.len());
        let (mut sup_xi, mut sup_u, mut int_h1) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0);
        for (i, o) in obs.iter().enumerate() {
            if i > 0 {
                int_h1 += obs[i - 1].u_h1_sq * obs[i - 1].weight;
            }
            sup_xi = sup_xi.max(o.xi_l8);
            sup_u = sup_u.max(o.u_l2_sq);
            s1.push(sup_xi);
            s2.push(int_h1 + sup_u);
        }
        let first = |series: &[f64], m: f64| series.iter().position(|&x| x >= m).map(|i| steps[i]);
        (
            self.levels.iter().map(|&m| first(&s1, m)).collect(),
            self.levels.iter().map(|&m| first(&s2, m)).collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    pub delta: f64,
    pub in_theorem_scope: bool,
    pub scope_note: &'static str,
    pub times: Vec<f64>,
    pub u_difference: Vec<f64>,
    pub v_difference: Vec<f64>,
    /// `sup_t |u1 - u2|_(L^2) / delta`, zero when `delta = 0`.
    pub amplification: f64,
    /// Per run, per level: step of `tau1_m`, `None` if never reached.
    pub tau1: [Vec<Option<usize>>; 2],
    pub tau2: [Vec<Option<usize>>; 2],
}

impl UniquenessReport {
    pub fn sup_u_difference(&self) -> f64 {
        self.u_difference.iter().fold(0.0, |m, &x| m.max(x))
    }

    pub fn identical(&self) -> bool {
        self.u_difference.iter().chain(&self.v_difference).all(|&x| x == 0.0)
    }
}

pub fn uniqueness_study(
    problem: &Problem,
    init: &FieldPair,
    delta: f64,
    stopping: &StoppingSpec,
    path: &NoisePath,
) -> Result<UniquenessReport> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("perturbation size must be >= 0, got {delta}")));
    }
    let bad = stopping.violations();
    if !bad.is_empty() {
        return Err(Error::InvalidParameter(bad.join("; ")));
    }
    let basis = problem.basis;
    let second = if delta == 0.0 {
        init.clone()
    } else {
        // constant of L2 norm delta adds delta to the constant mode
        let mut m = init.u.to_modal(basis)?.modal_values()?.to_vec();
        m[0] += delta;
        FieldPair::new(Field::from_modal(basis, m)?, init.v.clone())?
    };
    let fcfg = FunctionalConfig {
        stride: 1,
        ..FunctionalConfig::default_for(basis.dim())
    };
    let mut runs = Vec::with_capacity(2);
    for start in [init, &second] {
        let mut rec = TrajectoryRecorder::every_step();
        let mut fr = FunctionalRecorder::new(&fcfg, problem.scheme.v_floor);
        run(start, problem.params, problem.noise, problem.scheme, basis, path, &mut [&mut rec, &mut fr])?;
        runs.push((rec, fr.trace));
    }
    let (a, b) = (&runs[0].0, &runs[1].0);
    let l2 = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
    let u_difference: Vec<f64> = a.u.iter().zip(&b.u).map(|(x, y)| l2(x, y)).collect();
    let v_difference: Vec<f64> = a.v.iter().zip(&b.v).map(|(x, y)| l2(x, y)).collect();
    let sup = u_difference.iter().fold(0.0f64, |m, &x| m.max(x));
    let (t1a, t2a) = stopping.hitting_steps(&runs[0].1, &a.steps);
    let (t1b, t2b) = stopping.hitting_steps(&runs[1].1, &b.steps);
    let in_scope = basis.dim() == 1;
    Ok(UniquenessReport {
        delta,
        in_theorem_scope: in_scope,
        scope_note: if in_scope {
            "one-dimensional domain"
        } else {
            "outside theorem scope: uniqueness in two dimensions is open"
        },
        times: a.times.clone(),
        u_difference,
        v_difference,
        amplification: if delta > 0.0 { sup / delta } else { 0.0 },
        tau1: [t1a, t1b],
        tau2: [t2a, t2b],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{default_initial, ModelParams, SchemeConfig};
    use crate::noise::{sample_path, NoiseSpec};
    use crate::spectral_basis::{DomainSpec, SpectralBasis};

    #[test]
    fn zero_perturbation_is_bitwise_and_low_level_stops_at_zero() {
        let basis = SpectralBasis::build(&DomainSpec::interval(1.0, 32), 8).unwrap();
        let params = ModelParams::desk();
        let noise = NoiseSpec::with_default_gammas(1, 8, 11);
        let scheme = SchemeConfig {
            horizon: 0.1,
            ..Default::default()
        };
        let problem = Problem {
            basis: &basis,
            params: &params,
            noise: &noise,
            scheme: &scheme,
        };
        let init = default_initial(&basis, &params, 0.01, 4).unwrap();
        let path = sample_path(&noise, &scheme.time_grid().unwrap(), 0);
        let stop = StoppingSpec { levels: vec![1e-3, 1e6] };
        let rep = uniqueness_study(&problem, &init, 0.0, &stop, &path).unwrap();
        assert!(rep.identical());
        assert_eq!(rep.tau1[0], vec![Some(0), None]);
        assert_eq!(rep.tau2[1][0], Some(0));
        assert!(rep.in_theorem_scope);

        let rep = uniqueness_study(&problem, &init, 1e-8, &stop, &path).unwrap();
        assert!((rep.u_difference[0] - 1e-8).abs() < 1e-15);
        assert!(rep.amplification > 0.0 && rep.amplification < 10.0);
    }

    #[test]
    fn levels_must_increase() {
        assert_eq!(StoppingSpec { levels: vec![2.0, 1.0] }.violations().len(), 1);
        assert!(StoppingSpec { levels: vec![1.0, 2.0] }.violations().is_empty());
    }
}
