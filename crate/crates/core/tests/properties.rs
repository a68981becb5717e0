use std::sync::Arc;

use proptest::prelude::*;

use geoflow::flows::evolve_ricci;
use geoflow::frequency::compute_i_d;
use geoflow::geometry::{Backend, ManifoldState, ScalarField, SphereSpectral, WarpedTorus};
use geoflow::heat::{closed_form_sphere_solution, solve_heat};
use geoflow::measures::{solve_conjugate_backward, terminal_density, Terminal};
use geoflow::schedule::Schedule;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn conjugate_mass_is_conserved(amplitude in -0.5f64..2.0, width in 0.05f64..0.3) {
        let warp: Vec<f64> = (0..32).map(|i| 1.0 + 0.1 * (i as f64 / 32.0 * std::f64::consts::TAU).cos()).collect();
        let g = WarpedTorus::new(vec![1.0; 32], warp, vec![0.0; 32]).unwrap();
        let traj = evolve_ricci(&ManifoldState::new(0.0, Arc::new(g)), 0.002, 32).unwrap();
        let terminal = terminal_density(traj.geometry(32).as_ref(), &Terminal::Bump { amplitude, width }).unwrap();
        let ws = solve_conjugate_backward(&traj, &terminal, 1.0).unwrap();
        // Grid run: only RK4 time truncation remains, far below the 1e-6 grid default.
        prop_assert!(ws.max_mass_drift() < 1e-8, "drift {}", ws.max_mass_drift());
    }

    #[test]
    fn frequency_ignores_the_scale_of_u(c in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0], h in -3.0f64..-0.1) {
        let g = SphereSpectral::new(2, 1.0, 8).unwrap();
        let k = g.constant_field(1.0 / g.volume());
        let dv = g.measure(&k).unwrap();
        let u = ScalarField::spectral([(1, 1.0), (3, 0.4)]).unwrap();
        let (i, d) = compute_i_d(&g, &k, &dv, &u, h).unwrap();
        let (ic, dc) = compute_i_d(&g, &k, &dv, &u.scaled(c), h).unwrap();
        prop_assert!((d / i - dc / ic).abs() <= 1e-12 * (d / i).abs());
    }

    #[test]
    fn sphere_heat_matches_closed_form(c1 in -1.0f64..1.0, c2 in -1.0f64..1.0, a0 in -1.0f64..1.0) {
        let init = ManifoldState::new(0.0, Arc::new(SphereSpectral::new(2, 1.0, 6).unwrap()));
        let traj = evolve_ricci(&init, 0.2, 400).unwrap();
        let modes = [(1, c1), (2, c2)];
        let u0 = ScalarField::spectral(modes).unwrap();
        let a = Schedule::constant(a0);
        let heat = solve_heat(&traj, &u0, &a, false).unwrap();
        let exact = closed_form_sphere_solution(2, 1.0, &modes, &a, 0.2).unwrap();
        for (l, v) in exact {
            prop_assert!((heat.u[400].coeff(l) - v).abs() <= 1e-10);
        }
    }
}
