use num_complex::Complex64;
use proptest::prelude::*;

use qkr_core::experiments::{apply_perturbation, ExperimentPlan, Tolerances};
use qkr_core::io::{parse_plan, plan_to_toml};
use qkr_core::observables::{fidelity, lmax, n2_expectation, participation_ratio, shannon_entropy};
use qkr_core::propagator::{build_band, step_adjoint, step_bessel, step_spectral, AdjointKernel, StepParams};
use qkr_core::schedule::{build_schedule, Comb, Period, ScheduleMode};
use qkr_core::state::{InitialStateSpec, RotorState};
use qkr_core::PropagatorKind;

fn state_strategy(max_half_width: usize) -> impl Strategy<Value = RotorState> {
    (1..=max_half_width).prop_flat_map(|l| {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2 * l + 1)
            .prop_filter("non-zero", |v| {
                v.iter().any(|(re, im)| re.abs() + im.abs() > 1e-3)
            })
            .prop_map(|v| {
                RotorState::from_amplitudes(
                    v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect(),
                    1.0,
                )
                .unwrap()
            })
    })
}

/// First `horizon` kicks of the two combs, merged by brute force.
fn naive_merge(t1: f64, t2: f64, horizon: usize) -> Vec<(Comb, u64)> {
    let mut all: Vec<(f64, Comb, u64)> = (1..=horizon as u64)
        .map(|n| (n as f64 * t1, Comb::First, n))
        .chain((1..=horizon as u64).map(|m| (m as f64 * t2, Comb::Second, m)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    all.into_iter().take(horizon).map(|(_, c, i)| (c, i)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schedule_merge_matches_naive(t1 in 0.2f64..3.0, t2 in 0.2f64..3.0, horizon in 1usize..400) {
        let mode = ScheduleMode::Quasiperiodic { t1: Period::Value(t1), t2: Period::Value(t2) };
        let Ok(s) = build_schedule(mode, horizon) else {
            return Err(TestCaseError::reject("commensurate or coincident"));
        };
        let got: Vec<(Comb, u64)> = s.events().iter().map(|e| (e.comb, e.index)).collect();
        prop_assert_eq!(got, naive_merge(t1, t2, horizon));
        let times = s.times();
        prop_assert!(times.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(s.gaps().iter().all(|&g| g > 0.0));
        prop_assert_eq!(build_schedule(mode, horizon).unwrap().times(), times);
    }

    #[test]
    fn periodic_gaps_are_exact(period in 0.1f64..5.0, horizon in 1usize..300) {
        let s = build_schedule(ScheduleMode::Periodic { period: Period::Value(period) }, horizon).unwrap();
        prop_assert!(s.gaps().iter().all(|&g| g == period));
    }

    #[test]
    fn circulant_steps_conserve_norm(
        state in state_strategy(24),
        x in 0.0f64..8.0,
        dt in 0.05f64..3.0,
    ) {
        let p = StepParams::new(x, 1.0, dt).unwrap();
        let grid = state.dim();
        let mut s = state.clone();
        for _ in 0..20 {
            s = step_spectral(&s, &p, grid).unwrap();
        }
        prop_assert!((s.norm() - 1.0).abs() < 1e-12, "norm {}", s.norm());
        for _ in 0..20 {
            s = step_adjoint(&s, &p, AdjointKernel::Spectral { grid }).unwrap();
        }
        prop_assert!(fidelity(&state, &s).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn banded_step_round_trips(
        amps in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 33),
        x in 0.0f64..8.0,
        dt in 0.05f64..3.0,
    ) {
        // support |l| <= 16 inside L = 64 keeps the band clear of the edge
        prop_assume!(amps.iter().any(|(re, im)| re.abs() + im.abs() > 1e-3));
        let mut a = vec![Complex64::new(0.0, 0.0); 129];
        for (i, (re, im)) in amps.into_iter().enumerate() {
            a[64 - 16 + i] = Complex64::new(re, im);
        }
        let state = RotorState::from_amplitudes(a, 1.0).unwrap();
        let p = StepParams::new(x, 1.0, dt).unwrap();
        let band = build_band(x, 1e-28).unwrap();
        let fwd = step_bessel(&state, &p, &band).unwrap();
        prop_assert!((fwd.norm() - 1.0).abs() < 1e-12);
        let back = step_adjoint(&fwd, &p, AdjointKernel::Bessel(&band)).unwrap();
        prop_assert!(fidelity(&state, &back).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn perturbation_keeps_occupations(state in state_strategy(40), eps in 0.0f64..7.0) {
        let p = apply_perturbation(&state, eps);
        prop_assert_eq!(n2_expectation(&p).to_bits(), n2_expectation(&state).to_bits());
        prop_assert_eq!(shannon_entropy(&p).to_bits(), shannon_entropy(&state).to_bits());
        prop_assert_eq!(participation_ratio(&p).to_bits(), participation_ratio(&state).to_bits());
        for delta in [1e-6, 1e-8, 1e-10] {
            prop_assert_eq!(lmax(&p, delta).unwrap(), lmax(&state, delta).unwrap());
        }
        let f = fidelity(&state, &p).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&f));
        prop_assert_eq!(f.to_bits(), fidelity(&p, &state).unwrap().to_bits());
    }

    #[test]
    fn free_step_keeps_occupations(state in state_strategy(40), dt in 0.05f64..3.0) {
        let p = StepParams::new(0.0, 1.0, dt).unwrap();
        let free = step_bessel(&state, &p, &build_band(0.0, 1e-14).unwrap()).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-14 * a.abs().max(b.abs()).max(1e-300);
        prop_assert!(close(n2_expectation(&free), n2_expectation(&state)));
        prop_assert!(close(shannon_entropy(&free), shannon_entropy(&state)));
        prop_assert!(close(participation_ratio(&free), participation_ratio(&state)));
        prop_assert_eq!(lmax(&free, 1e-8).unwrap(), lmax(&state, 1e-8).unwrap());
    }

    #[test]
    fn observables_are_in_range(state in state_strategy(40)) {
        prop_assert!(n2_expectation(&state) >= 0.0);
        let s = shannon_entropy(&state);
        prop_assert!(s >= 0.0 && s <= (state.dim() as f64).ln() + 1e-12);
        let pr = participation_ratio(&state);
        prop_assert!(pr >= 1.0 - 1e-12 && pr <= state.dim() as f64 + 1e-9);
    }

    #[test]
    fn constructors_are_deterministic(center in -20i64..20, width in 0.5f64..10.0, l in 64usize..200) {
        let spec = InitialStateSpec::GaussianPacket { center, width };
        prop_assert_eq!(RotorState::new(&spec, l, 1.0).unwrap(), RotorState::new(&spec, l, 1.0).unwrap());
    }

    #[test]
    fn plan_round_trips_through_toml(
        k in 0.1f64..40.0,
        hbar in 0.1f64..4.0,
        l in 16usize..100_000,
        t_star in 1u64..50_000,
        extra in 0u64..1000,
        eps in 0.0f64..1.0,
        delta in 1e-14f64..1e-6,
        periodic in any::<bool>(),
        bessel in any::<bool>(),
        gaussian in any::<bool>(),
        rho in 0.01f64..1.0,
    ) {
        let plan = ExperimentPlan {
            schedule: if periodic { ScheduleMode::periodic() } else { ScheduleMode::quasiperiodic() },
            kick_strength: k,
            hbar,
            initial: if gaussian {
                InitialStateSpec::GaussianPacket { center: 3, width: 2.5 }
            } else {
                InitialStateSpec::MomentumEigenstate { l0: -2 }
            },
            basis_half_width: l,
            t_star,
            epsilon: eps,
            total_kicks: 2 * t_star + extra,
            delta,
            propagator: if bessel { PropagatorKind::Bessel } else { PropagatorKind::Spectral },
            tolerances: Tolerances { resume_rho: rho, ..Tolerances::default() },
            ..ExperimentPlan::default()
        };
        prop_assert_eq!(parse_plan(&plan_to_toml(&plan)).unwrap(), plan);
    }
}
