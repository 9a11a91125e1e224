use dvl_beams::dataset::{make_windows, BeamMask, Section};
use dvl_beams::error_model::{corrupt_series, ErrorParams};
use dvl_beams::estimators::{average_predict, reconstruct_full_beams};
use dvl_beams::geometry::{project_to_beams, solve_velocity, BeamGeometry, DvlVelocity, BEAM_COUNT};
use dvl_beams::nn::{lr_at, lstm_forward, LstmParams, Tensor, TrainConfig};
use proptest::prelude::*;

fn velocity() -> impl Strategy<Value = DvlVelocity> {
    prop::array::uniform3(-2.0f64..=2.0).prop_map(DvlVelocity)
}

fn velocities(len: std::ops::Range<usize>) -> impl Strategy<Value = Vec<DvlVelocity>> {
    prop::collection::vec(velocity(), len)
}

fn active_set() -> impl Strategy<Value = [bool; BEAM_COUNT]> {
    (0..=BEAM_COUNT).prop_map(|drop| std::array::from_fn(|i| i != drop))
}

fn mask() -> impl Strategy<Value = BeamMask> {
    (1usize..=4, 1usize..=4)
        .prop_filter("two distinct beams", |(a, b)| a != b)
        .prop_map(|(a, b)| BeamMask::from_beam_numbers(&[a, b]).unwrap())
}

fn residual(geom: &BeamGeometry, y: &[f64; BEAM_COUNT], v: &DvlVelocity) -> f64 {
    let p = project_to_beams(geom, v);
    y.iter().zip(&p.0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

fn section(vs: &[DvlVelocity], seed: u64) -> Section {
    let geom = BeamGeometry::from_degrees(20.0).unwrap();
    let params = ErrorParams {
        seed,
        ..Default::default()
    };
    Section::from_velocities("s", vs, &geom, &params).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_round_trips(alpha in 5.0f64..85.0, v in velocity(), active in active_set()) {
        let geom = BeamGeometry::from_degrees(alpha).unwrap();
        let est = solve_velocity(&geom, &project_to_beams(&geom, &v).0, &active).unwrap();
        for k in 0..3 {
            prop_assert!((est.0[k] - v.0[k]).abs() <= 1e-9);
        }
    }

    #[test]
    fn normal_matrix_is_diagonal(alpha in 0.5f64..89.5) {
        let n = BeamGeometry::from_degrees(alpha).unwrap().normal_matrix();
        for r in 0..3 {
            for c in 0..3 {
                if r != c {
                    prop_assert!(n[r][c].abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn full_solve_has_the_smallest_residual(
        y in prop::array::uniform4(-2.0f64..2.0),
        step in prop::array::uniform3(-0.05f64..0.05),
    ) {
        let geom = BeamGeometry::from_degrees(20.0).unwrap();
        let best = solve_velocity(&geom, &y, &[true; BEAM_COUNT]).unwrap();
        let other = DvlVelocity(std::array::from_fn(|k| best.0[k] + step[k]));
        prop_assert!(residual(&geom, &y, &best) <= residual(&geom, &y, &other) + 1e-12);
    }

    #[test]
    fn corruption_is_a_function_of_its_inputs(vs in velocities(1..30), seed in any::<u64>()) {
        let geom = BeamGeometry::from_degrees(20.0).unwrap();
        let params = ErrorParams { seed, ..Default::default() };
        prop_assert_eq!(corrupt_series(&geom, &vs, &params).unwrap(), corrupt_series(&geom, &vs, &params).unwrap());
    }

    #[test]
    fn clean_corruption_recovers_velocity(vs in velocities(1..30), seed in any::<u64>()) {
        let geom = BeamGeometry::from_degrees(20.0).unwrap();
        let params = ErrorParams { seed, ..ErrorParams::ideal() };
        for (beams, v) in corrupt_series(&geom, &vs, &params).unwrap().iter().zip(&vs) {
            let est = solve_velocity(&geom, &beams.0, &[true; BEAM_COUNT]).unwrap();
            for k in 0..3 {
                prop_assert!((est.0[k] - v.0[k]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn windows_align_with_their_section(vs in velocities(2..40), n in 1usize..6, m in mask(), seed in any::<u64>()) {
        let s = section(&vs, seed);
        prop_assume!(s.len() > n);
        let windows = make_windows(&s, n, m).unwrap();
        prop_assert_eq!(windows.len(), s.len() - n);
        for (k, w) in windows.iter().enumerate() {
            let t = k + n;
            prop_assert_eq!(w.target_all, s.records[t].beams.0);
            prop_assert_eq!(*w.times.last().unwrap(), s.records[t].t);
            for (j, past) in w.past.iter().enumerate() {
                prop_assert_eq!(*past, s.records[k + j].beams.0);
            }
        }
        prop_assert_eq!(make_windows(&s, n, m).unwrap(), windows);
    }

    #[test]
    fn average_shifts_with_the_data(vs in velocities(4..12), m in mask(), c in -1.0f64..1.0) {
        let s = section(&vs, 3);
        let mut shifted = s.clone();
        for r in &mut shifted.records {
            r.beams.0.iter_mut().for_each(|b| *b += c);
        }
        let a = make_windows(&s, 3, m).unwrap();
        let b = make_windows(&shifted, 3, m).unwrap();
        for (x, y) in a.iter().zip(&b) {
            for (p, q) in average_predict(x).iter().zip(average_predict(y)) {
                prop_assert!((p + c - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reconstruction_keeps_measured_beams(vs in velocities(5..8), m in mask(), preds in prop::array::uniform2(-5.0f64..5.0)) {
        for w in make_windows(&section(&vs, 1), 3, m).unwrap() {
            let full = reconstruct_full_beams(&w, &preds).unwrap();
            for (k, &i) in m.available_indices().iter().enumerate() {
                prop_assert_eq!(full.0[i], w.current_available[k]);
            }
            for (k, &i) in m.missing_indices().iter().enumerate() {
                prop_assert_eq!(full.0[i], preds[k]);
            }
        }
    }

    #[test]
    fn lstm_hidden_state_is_bounded(
        t in 1usize..5,
        d in 1usize..4,
        h in 1usize..5,
        scale in 0.1f64..20.0,
        seed in any::<u64>(),
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut rand_t = |shape: &[usize]| {
            let n = shape.iter().product();
            Tensor::from_vec(shape, (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect()).unwrap()
        };
        let (x, w_ih, w_hh, bias) = (rand_t(&[t, d]), rand_t(&[4 * h, d]), rand_t(&[4 * h, h]), rand_t(&[4 * h]));
        let out = lstm_forward(&x, LstmParams { w_ih: &w_ih, w_hh: &w_hh, bias: &bias }).unwrap();
        prop_assert!(out.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn learning_rate_steps_once(epochs in 1usize..120, decay in 1usize..120) {
        prop_assume!(decay <= epochs);
        let cfg = TrainConfig { epochs, decay_epoch: decay, ..Default::default() };
        let lrs: Vec<f64> = (1..=epochs).map(|e| lr_at(&cfg, e).unwrap()).collect();
        let jumps: Vec<usize> = (1..lrs.len()).filter(|&i| lrs[i] != lrs[i - 1]).collect();
        if decay < epochs {
            prop_assert_eq!(jumps, vec![decay]);
        } else {
            prop_assert!(jumps.is_empty());
        }
        prop_assert!(lr_at(&cfg, 0).is_err() && lr_at(&cfg, epochs + 1).is_err());
    }
}
