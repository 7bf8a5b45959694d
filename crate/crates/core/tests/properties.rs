use std::sync::OnceLock;

use proptest::prelude::*;

use poreshape_core::equilibrium::{hausdorff, run_fixed_point, run_variational, Model, Status};
use poreshape_core::mesh::{build_reference_domain, triangulate, ChannelGeometry, GammaIndex, TriangulateOptions};
use poreshape_core::params::{Config, Geometry, Law, PhysicalParams, RunConfig};
use poreshape_core::pb::pressure_hat;
use poreshape_core::scalar::{self, Vec2};

fn small(electrostatics: bool) -> Config {
    let mut run = RunConfig::default();
    run.geometry = Geometry {
        d: 2e-9,
        l: 3e-9,
        s: 0.5e-9,
        thickness: 2e-9,
        fillet: 0.0,
        h: 0.5e-9,
        refine_interface: 2.0,
    };
    run.electrostatics = electrostatics;
    run.solver.omega = 0.2;
    Config { run, params: PhysicalParams::default() }
}

fn charged() -> &'static Model {
    static M: OnceLock<Model> = OnceLock::new();
    M.get_or_init(|| Model::new(&small(true)).unwrap())
}

/// Smooth field from a few sine modes with the given amplitudes.
fn smooth(model: &Model, coeffs: &[(f64, f64, f64)]) -> Vec<Vec2<f64>> {
    model
        .reference_positions
        .iter()
        .map(|p| {
            coeffs.iter().enumerate().fold([0.0, 0.0], |acc, (k, &(ax, ay, ph))| {
                let s = ((k + 1) as f64 * 0.7 * (p[0] + p[1]) + ph).sin();
                scalar::add(acc, [ax * s, ay * s])
            })
        })
        .collect()
}

fn coeffs(amp: f64) -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((-amp..amp, -amp..amp, 0.0..6.0), 1..4)
}

fn max_dist(a: &[Vec2<f64>], b: &[Vec2<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| scalar::dist(*x, *y)).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projection_is_idempotent_and_clamps(c in coeffs(0.3)) {
        let m = charged();
        let once = m.project(&smooth(m, &c));
        let twice = m.project(&once);
        prop_assert!(max_dist(&once, &twice) <= 1e-14);
        for (k, v) in once.iter().enumerate() {
            if m.elastic.is_clamped(k) {
                prop_assert_eq!(*v, [0.0, 0.0]);
            }
        }
    }

    #[test]
    fn dtn_inverse_undoes_the_reaction(c in coeffs(0.2)) {
        let m = charged();
        let lam = m.project(&smooth(m, &c));
        let sol = m.elastic.solve_displacement(&lam).unwrap();
        let back = m.elastic.dtn_inverse(&m.elastic.reaction(&sol)).unwrap();
        let size = lam.iter().map(|v| scalar::norm(*v)).fold(1e-300, f64::max);
        prop_assert!(max_dist(&lam, &back) / size <= 1e-8);
    }

    #[test]
    fn electrostatic_energy_forms_agree(c in coeffs(0.05)) {
        let m = charged();
        let lam = m.project(&smooth(m, &c));
        let d = m.fluid_domain().unwrap();
        let (s, _) = m.evaluate(&d, &lam, None, false).unwrap();
        prop_assert!(s.gen_residual <= 1e-8, "GEN {}", s.gen_residual);
        prop_assert!(s.energy.el_discrepancy() <= 1e-8, "{}", s.energy.el_discrepancy());
    }

    #[test]
    fn hausdorff_is_a_symmetric_distance(c in coeffs(0.2), e in coeffs(0.2)) {
        let m = charged();
        let (a, b) = (m.project(&smooth(m, &c)), m.project(&smooth(m, &e)));
        let (ab, ba) = (hausdorff(&a, &b, &m.gamma), hausdorff(&b, &a, &m.gamma));
        prop_assert!((ab - ba).abs() <= 1e-15 * ab.max(1.0));
        prop_assert_eq!(hausdorff(&a, &a, &m.gamma), 0.0);
        prop_assert!(ab <= max_dist(&a, &b) + 1e-15);
    }

    #[test]
    fn pressure_is_increasing_in_u(u in prop::collection::vec(-5.0..5.0f64, 2..20), p0 in 0.0..600.0f64) {
        let mut sorted = u.clone();
        sorted.sort_by(f64::total_cmp);
        let p = pressure_hat(&sorted, p0);
        prop_assert!(p.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(p.iter().zip(&sorted).all(|(p, u)| (p - (u.exp() - 1.0 + p0)).abs() <= 1e-12 * p.abs().max(1.0)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn channel_meshes_are_valid(d in 1.0..3.0f64, s_frac in 0.0..0.9f64, l in 2.0..8.0f64) {
        let g = ChannelGeometry { d, l, s: s_frac * d, thickness: 3.0 * d, fillet: 0.0 };
        let m = triangulate(&build_reference_domain(&g, 0.25).unwrap(), &TriangulateOptions::new(0.5, 2.0)).unwrap();
        m.validate().unwrap();
        let q = m.quality();
        prop_assert_eq!(q.inverted_count, 0);
        prop_assert!(q.min_angle.to_degrees() >= 20.0, "{}", q.min_angle.to_degrees());
        let gi = GammaIndex::from_mesh(&m).unwrap();
        prop_assert_eq!(gi.arcs.len(), 2);
    }
}

#[test]
fn fixed_point_and_descent_stop_quickly_at_equilibrium() {
    let m = charged();
    let first = run_fixed_point(m, Law::Classical, None).unwrap();
    assert_eq!(first.status, Status::Converged, "{}", first.message);
    let again = run_fixed_point(m, Law::Classical, Some(&first.state.lambda)).unwrap();
    assert_eq!(again.status, Status::Converged);
    assert!(again.iterations() <= 2, "{}", again.iterations());

    let uncharged = Model::new(&{
        let mut c = small(false);
        c.run.solver.eps_s = Some(0.0);
        c.run.solver.max_iter = 50_000;
        c
    })
    .unwrap();
    let v = run_variational(&uncharged, None).unwrap();
    assert_eq!(v.status, Status::Converged, "{}", v.message);
    let again = run_variational(&uncharged, Some(&v.state.lambda)).unwrap();
    assert_eq!(again.status, Status::Converged);
    assert!(again.iterations() <= 2, "{}", again.iterations());
}

#[test]
fn every_logged_potential_solve_keeps_electroneutrality() {
    let r = run_fixed_point(charged(), Law::Modified, None).unwrap();
    assert!(r.history.iter().all(|h| h.gen_residual <= 1e-8));
    assert!(r.history.iter().all(|h| h.energy.el_discrepancy() <= 1e-8));
}
