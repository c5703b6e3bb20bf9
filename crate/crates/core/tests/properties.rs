use gmspde::cli_io::{parse_config, RunConfig};
use gmspde::dynamics::ModelParams;
use gmspde::fields::{norm_hs, norm_lp, reaction_quotient, Field};
use gmspde::functionals::xi_field;
use gmspde::noise::{sample_path, NoiseProcess, NoiseSpec, TimeGrid};
use gmspde::spectral_basis::{DomainSpec, SpectralBasis};
use proptest::prelude::*;

fn interval() -> SpectralBasis {
    SpectralBasis::build(&DomainSpec::interval(1.0, 48), 16).unwrap()
}

fn square() -> SpectralBasis {
    SpectralBasis::build(&DomainSpec::rectangle(1.0, 1.5, 24), 12).unwrap()
}

fn coeffs(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, k)
}

/// Strictly positive nodal values.
fn positive(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..5.0, n)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn multipliers_compose(c in coeffs(16), s in -1.0f64..1.0, t in -1.0f64..1.0) {
        let b = interval();
        let g = |l: f64| (1.0 + l).powf(s);
        let h = |l: f64| (1.0 + l).powf(t);
        let two = b.apply_multiplier(&b.apply_multiplier(&c, g), h);
        let one = b.apply_multiplier(&c, |l| g(l) * h(l));
        for (x, y) in two.iter().zip(&one) {
            prop_assert!(close(*x, *y, 1e-12));
        }
    }

    #[test]
    fn parseval_on_band_limited_fields(c in coeffs(16)) {
        for b in [interval(), square()] {
            let k = b.mode_count();
            let f = Field::from_modal(&b, c[..k].to_vec()).unwrap();
            let energy: f64 = c[..k].iter().map(|x| x * x).sum();
            let l2 = norm_lp(&b, &f, 2.0).unwrap();
            prop_assert!(close(l2 * l2, energy, 1e-11));
            let back = f.to_nodal(&b).unwrap().to_modal(&b).unwrap();
            for (x, y) in back.modal_values().unwrap().iter().zip(&c[..k]) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hs_norm_is_monotone_in_s(c in coeffs(16), s in -2.0f64..2.0, ds in 0.0f64..1.0) {
        let b = interval();
        let f = Field::from_modal(&b, c).unwrap();
        let lo = norm_hs(&b, &f, s).unwrap();
        let hi = norm_hs(&b, &f, s + ds).unwrap();
        prop_assert!(lo <= hi * (1.0 + 1e-14));
        let l2 = norm_lp(&b, &f, 2.0).unwrap();
        prop_assert!(close(norm_hs(&b, &f, 0.0).unwrap(), l2, 1e-11));
    }

    #[test]
    fn reaction_quotient_is_homogeneous(u in coeffs(48), v in positive(48), a in 0.1f64..10.0) {
        let b = interval();
        let q = |scale: f64| {
            let uf = Field::from_nodal(&b, u.iter().map(|x| scale * x).collect()).unwrap();
            let vf = Field::from_nodal(&b, v.iter().map(|x| scale * x).collect()).unwrap();
            let (f, floors) = reaction_quotient(&b, &uf, &vf, 1e-8).unwrap();
            assert_eq!(floors, 0);
            f.nodal_values().unwrap().to_vec()
        };
        for (x, y) in q(a).iter().zip(q(1.0)) {
            prop_assert!(close(*x, a * y, 1e-13));
        }
    }

    #[test]
    fn xi_inverts_v(v in positive(48)) {
        let b = interval();
        let vf = Field::from_nodal(&b, v.clone()).unwrap();
        let (xi, floors) = xi_field(&b, &vf, 1e-8).unwrap();
        prop_assert_eq!(floors, 0);
        for (x, y) in xi.nodal_values().unwrap().iter().zip(&v) {
            prop_assert!((x * y - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn xi_floor_counts_nonpositive_nodes(v in positive(48), hits in prop::collection::btree_set(0usize..48, 1..6)) {
        let b = interval();
        let mut v = v;
        for &i in &hits {
            v[i] = 0.0;
        }
        let vf = Field::from_nodal(&b, v).unwrap();
        let (xi, floors) = xi_field(&b, &vf, 1e-3).unwrap();
        prop_assert_eq!(floors, hits.len());
        for &i in &hits {
            prop_assert!((xi.nodal_values().unwrap()[i] - 1e3).abs() < 1e-9);
        }
    }

    #[test]
    fn noise_paths_are_reproducible(seed in any::<u64>(), index in 0u64..1_000_000) {
        let spec = NoiseSpec::with_default_gammas(1, 8, seed);
        let grid = TimeGrid::uniform(0.02, 1e-3).unwrap();
        let a = sample_path(&spec, &grid, index);
        let b = sample_path(&spec, &grid, index);
        prop_assert_eq!(&a, &b);
        let c = sample_path(&spec, &grid, index + 1);
        prop_assert_ne!(a.step_increments(NoiseProcess::W1, 0), c.step_increments(NoiseProcess::W1, 0));
        prop_assert_ne!(a.step_increments(NoiseProcess::W1, 0), a.step_increments(NoiseProcess::W2, 0));
    }

    #[test]
    fn bridge_refinement_preserves_coarse_increments(seed in any::<u64>()) {
        let spec = NoiseSpec::with_default_gammas(1, 6, seed);
        let grid = TimeGrid::uniform(0.01, 1e-3).unwrap();
        let coarse = sample_path(&spec, &grid, 3);
        let fine = coarse.refined(2);
        prop_assert_eq!(fine.steps(), 4 * coarse.steps());
        for j in NoiseProcess::BOTH {
            for n in 0..coarse.steps() {
                for k in 0..6 {
                    let sum: f64 = (0..4).map(|m| fine.increment(j, k, 4 * n + m)).sum();
                    prop_assert!((sum - coarse.increment(j, k, n)).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn config_echo_round_trips(
        r_u in 1e-4f64..1.0,
        kappa_v in 0.1f64..10.0,
        sigma_u in 1e-3f64..1.0,
        steps in 100u32..20_000,
        seed in any::<u64>(),
        gamma1 in 0.6f64..3.0,
        two_d in any::<bool>(),
    ) {
        let mut cfg = RunConfig::default().with_seed(seed);
        cfg.params = ModelParams { r_u, kappa_v, sigma_u, ..ModelParams::desk() };
        cfg.scheme.dt = 1.0 / f64::from(steps);
        cfg.noise.gamma1 = gamma1;
        if two_d {
            cfg.domain = DomainSpec::rectangle(1.0, 2.0, 32);
            cfg.modes = 10;
            cfg.noise.mode_count = 10;
            cfg.functionals.rho = 1.1;
            cfg.noise.gamma1 = gamma1.max(1.1);
            cfg.noise.gamma2 = 1.5;
        }
        let echo = cfg.echo();
        let back = parse_config(&echo).unwrap().config;
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.echo(), echo);
    }
}
