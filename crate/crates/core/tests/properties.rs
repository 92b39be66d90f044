use std::f64::consts::PI;

use kinetic_core::config::RunConfig;
use kinetic_core::control::propose_dt;
use kinetic_core::dk::{arakawa_bracket, bracket_sums, enforce_hermitian_z, RadialEnds};
use kinetic_core::snapshot::{Axis, Snapshot};
use kinetic_core::spectral::{poisson_e, spectral_derivative, FftCache};
use kinetic_core::stability::{amplification, imaginary_interval, lw5_eigenvalue, ExpScanConfig};
use kinetic_core::tableaux::phi;
use kinetic_core::vadv::{cd2_dv, Boundary, Weno5, WenoWork};
use kinetic_core::vp::{enforce_hermitian, hermitian_defect, VpGrid};
use kinetic_core::{Complex64 as C, DiagonalPropagator, Integrator, MethodId, TableauId};
use proptest::prelude::*;

fn factorial(n: usize) -> f64 {
    (1..=n).product::<usize>() as f64
}

fn lawson_tableau() -> impl Strategy<Value = TableauId> {
    prop::sample::select(TableauId::ALL.to_vec())
}

fn method() -> impl Strategy<Value = MethodId> {
    prop::sample::select(MethodId::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn phi_recurrence(r in 1e-2f64..10.0, arg in -PI..PI, l in 0usize..=3) {
        let z = C::from_polar(r, arg);
        let lhs = phi(l + 1, z);
        let rhs = (phi(l, z) - 1.0 / factorial(l)) / z;
        prop_assert!((lhs - rhs).norm() <= 1e-12 * lhs.norm().max(1e-300), "{lhs} vs {rhs}");
    }

    #[test]
    fn lawson_amplification_is_rk_function(id in lawson_tableau(), a in -40.0f64..40.0, x in -3.0f64..0.5, y in -3.0f64..3.0) {
        let z = C::new(x, y);
        let got = amplification(MethodId::Lawson(id), a, z);
        let want = id.tableau().stability_function(z).norm();
        prop_assert!((got - want).abs() <= 1e-12 * want.max(1.0));
    }

    #[test]
    fn amplification_is_conjugate_symmetric(m in method(), a in -20.0f64..20.0, x in -3.0f64..0.5, y in -3.0f64..3.0) {
        let z = C::new(x, y);
        let l = amplification(m, a, z);
        let r = amplification(m, -a, z.conj());
        prop_assert!((l - r).abs() <= 1e-12 * l.max(1.0));
    }

    #[test]
    fn lawson_split_linear_factorizes(id in lawson_tableau(), a in -5.0f64..5.0, lr in -2.0f64..0.0, li in -2.0f64..2.0, dt in 0.01f64..1.0) {
        // u' = i a u + λ u with the linear part i a
        let lambda = C::new(lr, li);
        let mut prop = DiagonalPropagator::new(vec![C::new(0.0, a)]);
        let mut st = Integrator::new(MethodId::Lawson(id));
        let mut u = vec![C::new(1.0, 0.0)];
        st.step(&mut prop, &mut |_: f64, u: &[C], out: &mut [C]| -> Result<(), ()> {
            out[0] = lambda * u[0];
            Ok(())
        }, 0.0, &mut u, dt).unwrap();
        let want = C::from_polar(1.0, a * dt) * id.tableau().stability_function(lambda * dt);
        prop_assert!((u[0] - want).norm() <= 1e-12);
    }

    #[test]
    fn relaxed_interval_grows_with_epsilon(m in prop::sample::select(MethodId::EXPONENTIAL.to_vec()), a in 0.0f64..10.0, e1 in 0.0f64..0.1, de in 0.0f64..0.1) {
        let mut cfg = ExpScanConfig::uniform(0.0, 1.0);
        cfg.y_step = 1e-2;
        let (p1, m1) = imaginary_interval(m, a, e1, &cfg);
        let (p2, m2) = imaginary_interval(m, a, e1 + de, &cfg);
        prop_assert!(p2 >= p1 - 1e-9 && m2 <= m1 + 1e-9);
    }

    #[test]
    fn lw5_eigenvalues_are_dissipative(m in -200i64..200, nv in 16usize..1024) {
        let v_max = 8.0;
        let dv = 2.0 * v_max / nv as f64;
        prop_assert!(lw5_eigenvalue(m, dv, v_max).re <= 1e-12 / dv);
    }

    #[test]
    fn weno_closed_transport_conserves(f in prop::collection::vec(-1.0f64..1.0, 8..64), e in -2.0f64..2.0, frozen in any::<bool>()) {
        let weno = if frozen { Weno5::frozen() } else { Weno5::default() };
        let mut out = vec![0.0; f.len()];
        weno.transport(&f, e, 0.1, Boundary::Closed, &mut WenoWork::default(), &mut out);
        let scale: f64 = out.iter().map(|x| x.abs()).sum::<f64>() + 1.0;
        prop_assert!(out.iter().sum::<f64>().abs() <= 1e-13 * scale);
    }

    #[test]
    fn cd2_closed_and_periodic_conserve(f in prop::collection::vec(-1.0f64..1.0, 3..64), periodic in any::<bool>()) {
        let b = if periodic { Boundary::Periodic } else { Boundary::Closed };
        let mut out = vec![0.0; f.len()];
        cd2_dv(&f, 0.1, b, &mut out);
        prop_assert!(out.iter().sum::<f64>().abs() <= 1e-12);
    }

    #[test]
    fn poisson_field_has_zero_mean(rho in prop::collection::vec(0.0f64..2.0, 4..128)) {
        let mut ffts = FftCache::new();
        let sol = poisson_e(&rho, 4.0 * PI, &mut ffts).unwrap();
        let mean = sol.e.iter().sum::<f64>() / sol.e.len() as f64;
        prop_assert!(mean.abs() <= 1e-13);
    }

    #[test]
    fn field_derivative_recovers_band_limited_density(coef in prop::collection::vec(-0.3f64..0.3, 6), n in 32usize..96) {
        let length = 4.0 * PI;
        let k0 = 2.0 * PI / length;
        let rho: Vec<f64> = (0..n).map(|i| {
            let x = i as f64 * length / n as f64;
            1.0 + (0..3).map(|m| {
                let k = k0 * (m + 1) as f64;
                coef[2 * m] * (k * x).cos() + coef[2 * m + 1] * (k * x).sin()
            }).sum::<f64>()
        }).collect();
        let mut ffts = FftCache::new();
        let e = poisson_e(&rho, length, &mut ffts).unwrap().e;
        let de = spectral_derivative(&e, length, &mut ffts).unwrap();
        let mean = rho.iter().sum::<f64>() / n as f64;
        for (d, r) in de.iter().zip(&rho) {
            prop_assert!((d - (r - mean)).abs() <= 1e-10);
        }
    }

    #[test]
    fn fft_roundtrip(re in prop::collection::vec(-1.0f64..1.0, 1..200)) {
        let mut ffts = FftCache::new();
        let orig: Vec<C> = re.iter().enumerate().map(|(i, &x)| C::new(x, 0.5 * x - i as f64 * 1e-3)).collect();
        let mut d = orig.clone();
        let shape = [d.len()];
        ffts.forward(&mut d, &shape, 0).unwrap();
        ffts.inverse(&mut d, &shape, 0).unwrap();
        let scale = orig.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
        for (a, b) in d.iter().zip(&orig) {
            prop_assert!((a - b).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn hermitian_projection_is_idempotent(nx in 2usize..40, seed in any::<u64>()) {
        let grid = VpGrid::new(nx, 1.0, 3, 1.0).unwrap();
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut hat: Vec<C> = (0..grid.len()).map(|_| C::new(next(), next())).collect();
        enforce_hermitian(&grid, &mut hat);
        prop_assert!(hermitian_defect(&grid, &hat) <= 1e-15);
        let once = hat.clone();
        enforce_hermitian(&grid, &mut hat);
        prop_assert_eq!(once, hat);
    }

    #[test]
    fn hermitian_z_projection_gives_real_transform(nz in 1usize..12, inner in 1usize..6, seed in any::<u64>()) {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut hat: Vec<C> = (0..nz * inner).map(|_| C::new(next(), next())).collect();
        enforce_hermitian_z(&mut hat, nz);
        for k in 0..nz {
            for c in 0..inner {
                let a = hat[k * inner + c];
                let b = hat[(nz - k) % nz * inner + c];
                prop_assert!((a - b.conj()).norm() <= 1e-15);
            }
        }
    }

    #[test]
    fn arakawa_periodic_invariants(nr in 3usize..16, nt in 3usize..16, seed in any::<u64>()) {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let phi: Vec<f64> = (0..nr * nt).map(|_| next()).collect();
        let f: Vec<f64> = (0..nr * nt).map(|_| next()).collect();
        let mut j = vec![0.0; nr * nt];
        arakawa_bracket(&phi, &f, nr, nt, 0.3, 2.0 * PI / nt as f64, RadialEnds::Periodic, &mut j);
        for s in bracket_sums(&phi, &f, &j) {
            prop_assert!(s.abs() <= 1e-12, "{s}");
        }
    }

    #[test]
    fn proposed_step_is_bounded_and_monotone(e1 in 1e-12f64..1.0, r in 1.0f64..100.0, tol in 1e-6f64..1e-1, dt in 1e-3f64..10.0, p in 1u32..5, dt_max in 1.0f64..50.0) {
        let a = propose_dt(e1, tol, dt, p, 0.8, dt_max);
        let b = propose_dt(e1 * r, tol, dt, p, 0.8, dt_max);
        prop_assert!(a > 0.0 && a <= dt_max);
        prop_assert!(b <= a);
        if e1 <= tol {
            prop_assert!(a >= (0.8 * dt).min(dt_max) * (1.0 - 1e-12));
        }
    }

    #[test]
    fn config_roundtrips_through_manifest_text(nx in 1i64..1000, nv in 3i64..1000, dt in 1e-4f64..10.0, tf in 1.0f64..1e4) {
        let text = format!("experiment = \"landau\"\n[grid]\nnx = {nx}\nnv = {nv}\n[time]\ndt = {dt:e}\nt_final = {tf:e}\n");
        let c = RunConfig::parse(&text).unwrap();
        prop_assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn snapshot_bytes_roundtrip(values in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 0..64)) {
        let s = Snapshot {
            name: "q".into(),
            t: 0.5,
            rows: Axis { name: "a", n: 1, min: 0.0, max: 1.0 },
            cols: Axis { name: "b", n: values.len(), min: 0.0, max: 1.0 },
            values: values.clone(),
        };
        prop_assert_eq!(Snapshot::values_from_bytes(&s.to_bytes()).unwrap(), values);
    }
}
