use proptest::prelude::*;

use gasnet::eos::{
    EosModel, LocalEos, TemperatureProfile, REFERENCE_B1, REFERENCE_B2, REFERENCE_GRAVITY, REFERENCE_RT,
};
use gasnet::io::{five_node_config, NetworkConfig};
use gasnet::network::{CompressorSide, Network, NetworkBuilder};
use gasnet::pipe::{interior_flux_update, BoundaryValue, CellEos, Pipe, PipeGeometry, PipeGrid, PipeState, Side};
use gasnet::profiles::{five_node as sched, TimeProfile};

fn models() -> Vec<EosModel> {
    vec![
        EosModel::ideal(338.25),
        EosModel::reference_cnga(),
        EosModel::CngaDetailed {
            temperature: 288.706,
            gas_gravity: REFERENCE_GRAVITY,
            gas_constant: None,
        },
        EosModel::NonIsothermal {
            profile: TemperatureProfile {
                ambient: 288.706,
                jump: 40.0,
                decay_rate: 1e-3,
            },
            gas_gravity: REFERENCE_GRAVITY,
            gas_constant: None,
        },
    ]
}

#[test]
fn pressure_is_strictly_increasing_and_vanishes_at_zero() {
    for model in models() {
        for x in [0.0, 500.0, 5e4] {
            let e = model.local_at(x).unwrap();
            assert_eq!(e.pressure(0.0), 0.0);
            let mut last = 0.0;
            for k in 1..=1000 {
                let p = e.pressure(0.15 * k as f64);
                assert!(p > last, "{model:?} at x = {x}");
                last = p;
            }
        }
    }
}

#[test]
fn detailed_coefficients_match_the_reference_pair() {
    let detailed = EosModel::CngaDetailed {
        temperature: 288.706,
        gas_gravity: REFERENCE_GRAVITY,
        gas_constant: None,
    };
    match detailed.local_at(0.0).unwrap() {
        LocalEos::Quadratic { b1, b2, .. } => {
            assert!(((b1 - REFERENCE_B1) / REFERENCE_B1).abs() <= 1e-2);
            assert!(((b2 - REFERENCE_B2) / REFERENCE_B2).abs() <= 1e-2);
        }
        other => panic!("expected a quadratic law, got {other:?}"),
    }
}

proptest! {
    #[test]
    fn cnga_tends_to_the_ideal_gas(p in 1e4f64..2e7, log_b2 in -14.0f64..-9.0) {
        let b2 = 10f64.powf(log_b2);
        let cnga = EosModel::Cnga { b1: 1.0, b2, rt: REFERENCE_RT };
        let ideal = EosModel::ideal(REFERENCE_RT.sqrt());
        let a = cnga.density_from_pressure(p, 0.0).unwrap();
        let b = ideal.density_from_pressure(p, 0.0).unwrap();
        prop_assert!(((a - b) / b).abs() <= 10.0 * b2 * p);
    }

    #[test]
    fn nonisothermal_round_trip(p in 1e4f64..2e7, x in 0.0f64..1e5) {
        let model = &models()[3];
        let rho = model.density_from_pressure(p, x).unwrap();
        let back = model.pressure_from_density(rho, x).unwrap();
        prop_assert!(((back - p) / p).abs() <= 1e-10);
    }

    #[test]
    fn interior_update_commutes_with_reversal(
        rho in proptest::collection::vec(20.0f64..70.0, 2..40),
        seed in proptest::collection::vec(-400.0f64..400.0, 41),
        friction in 0.0f64..0.02,
    ) {
        let n = rho.len();
        let phi: Vec<f64> = seed[..=n].to_vec();
        let geom = PipeGeometry::new(1e4, 0.6, friction).unwrap();
        let grid = PipeGrid::new(1e4, n).unwrap();
        let eos = CellEos::sample(&EosModel::reference_cnga(), &grid).unwrap();

        let mut fwd = PipeState::new(rho.clone(), phi.clone()).unwrap();
        fwd.primed = false;
        let mut rev = PipeState::new(
            rho.iter().rev().copied().collect(),
            phi.iter().rev().map(|f| -f).collect(),
        ).unwrap();
        rev.primed = false;
        interior_flux_update(&mut fwd, &geom, &grid, &eos, 0.5).unwrap();
        interior_flux_update(&mut rev, &geom, &grid, &eos, 0.5).unwrap();
        let mirrored: Vec<f64> = rev.phi.iter().rev().map(|f| -f).collect();
        prop_assert_eq!(fwd.phi, mirrored);
    }

    #[test]
    fn closed_pipe_keeps_its_mass_every_step(
        rho in proptest::collection::vec(30.0f64..60.0, 10..60),
        swirl in -50.0f64..50.0,
    ) {
        let n = rho.len();
        let mut phi: Vec<f64> = (0..=n).map(|j| swirl * (j as f64 * 0.7).sin()).collect();
        phi[0] = 0.0;
        phi[n] = 0.0;
        let geom = PipeGeometry::new(5e3, 0.9144, 0.01).unwrap();
        let grid = PipeGrid::new(5e3, n).unwrap();
        let mut pipe = Pipe::new("p", geom, grid, &EosModel::reference_cnga(), PipeState::new(rho, phi).unwrap()).unwrap();
        let dt = pipe.cfl_max_dt(0.9).unwrap();
        let mut mass = pipe.total_mass();
        for _ in 0..300 {
            pipe.step(BoundaryValue::Flux(0.0), BoundaryValue::Flux(0.0), dt).unwrap();
            let next = pipe.total_mass();
            prop_assert!((next - mass).abs() <= 1e-12 * mass);
            mass = next;
        }
    }

    #[test]
    fn piecewise_profiles_hit_their_knots(values in proptest::collection::vec(0.5f64..2.0, 2..10)) {
        let knots: Vec<(f64, f64)> = values.iter().enumerate().map(|(k, &v)| (600.0 * k as f64, v)).collect();
        let prof = TimeProfile::piecewise_linear(knots.clone()).unwrap();
        for (t, v) in knots {
            prop_assert_eq!(prof.evaluate(t), v);
        }
    }

    #[test]
    fn config_round_trips_through_text(
        lengths in proptest::collection::vec(1e3f64..1e5, 5),
        friction in 1e-3f64..0.05,
        dt in 0.01f64..1.0,
    ) {
        let mut cfg = five_node_config();
        for (pipe, &l) in cfg.pipes.iter_mut().zip(&lengths) {
            pipe.length = l;
            pipe.friction = friction;
        }
        cfg.simulation.dt = Some(dt);
        let text = cfg.to_toml_string().unwrap();
        let back = NetworkConfig::from_toml_str(&text, "generated", true).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

fn triangle(q_a: f64, q_b: f64, ratio: f64) -> Network {
    let geom = |l| PipeGeometry::new(l, 0.6, 0.01).unwrap();
    NetworkBuilder::new(EosModel::reference_cnga())
        .slack("s", TimeProfile::constant(5e6))
        .demand(
            "a",
            TimeProfile::harmonic(q_a, 0.2, 2.0 * std::f64::consts::PI / 600.0, 0.0),
        )
        .demand("b", TimeProfile::constant(q_b))
        .pipe("1", "s", "a", geom(8e3))
        .pipe("2", "a", "b", geom(5e3))
        .pipe("3", "b", "s", geom(12e3))
        .compressor("c", "1", CompressorSide::Inlet, TimeProfile::constant(ratio))
        .build(500.0)
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn network_steps_conserve_mass_and_honour_compressors(
        q_a in 0.0f64..80.0,
        q_b in -20.0f64..80.0,
        ratio in 1.0f64..1.3,
    ) {
        let mut net = triangle(q_a, q_b, ratio);
        net.initialize_steady(0.0).unwrap();
        let dt = net.cfl_max_dt(0.9).unwrap();
        for n in 1..=400u64 {
            let before = net.total_mass();
            net.step(dt).unwrap();
            let after = net.total_mass();
            let expected = dt * net.net_boundary_inflow();
            prop_assert!((after - before - expected).abs() <= 1e-12 * after);
            let t = n as f64 * dt;
            for k in 0..net.pipes.len() {
                for side in [Side::Left, Side::Right] {
                    let l = net.end_node(k, side);
                    let want = net.alpha(k, side, t) * net.node_pressure[l];
                    let got = net.pipes[k].end_pressure(side);
                    prop_assert!(((got - want) / want).abs() <= 1e-10);
                }
            }
        }
    }
}

#[test]
fn schedules_encode_the_daily_knots() {
    let c2 = sched::c2();
    let d5 = sched::d5();
    let c20 = c2.evaluate(0.0);
    let d50 = d5.evaluate(0.0);
    assert_eq!(d50, 150.0);
    for (t, f) in [
        (0.0, 1.0),
        (21600.0, 1.0),
        (25200.0, 1.4),
        (64800.0, 1.4),
        (68400.0, 1.0),
        (86400.0, 1.0),
    ] {
        assert!((c2.evaluate(t) - f * c20).abs() <= 1e-12 * c20, "c2 at {t}");
    }
    for (t, f) in [
        (0.0, 1.0),
        (12000.0, 1.0),
        (15600.0, 1.2),
        (48000.0, 1.2),
        (51600.0, 1.0),
        (86400.0, 1.0),
    ] {
        assert!((d5.evaluate(t) - f * d50).abs() <= 1e-12 * d50, "d5 at {t}");
    }
    let c1 = sched::c1();
    assert!((c1.evaluate(86400.0) - c1.evaluate(0.0)).abs() <= 1e-12);
}
