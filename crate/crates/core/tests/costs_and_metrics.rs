use proptest::prelude::*;
use soseq::baselines::cost_gradient;
use soseq::cost_builder::{best_gain, cma_cost, combine, med_cost, semiblind, swa_cost, training_cost, Pilots};
use soseq::lifting::{estimate_moments, qvec};
use soseq::metrics::{isi_of, ncci_row};
use soseq::signal_model::{generate_frame, ChannelModel, Constellation, C64};

fn frame(seed: u64) -> soseq::signal_model::SignalFrame {
    let ch = ChannelModel::siso(vec![C64::new(1.0, 0.0), C64::new(0.3, -0.2)]).unwrap();
    generate_frame(&Constellation::qam16(), &ch, 300, 20.0, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lifted_evaluation_matches_direct(seed in 0u64..1000, u in prop::collection::vec(-1.0f64..1.0, 4)) {
        let m = estimate_moments(&frame(seed), 1).unwrap();
        let c = cma_cost(&m, Constellation::qam16().stats().r2).unwrap();
        let f = c.evaluate(&u);
        prop_assert!((f - c.evaluate_lifted(&qvec(&u))).abs() <= 1e-10 * (1.0 + f.abs()));
    }

    #[test]
    fn swa_is_cma_minus_r2_squared(seed in 0u64..1000, u in prop::collection::vec(-1.0f64..1.0, 4)) {
        let m = estimate_moments(&frame(seed), 1).unwrap();
        let s = Constellation::qam16().stats();
        let alpha = -s.r2 * s.sigma_s2 / s.kurtosis;
        let fs = swa_cost(&m, s.sigma_s2, s.kurtosis, alpha).unwrap().evaluate(&u);
        let fc = cma_cost(&m, s.r2).unwrap().evaluate(&u);
        prop_assert!((fs - fc + s.r2 * s.r2).abs() <= 1e-10 * (1.0 + fs.abs() + fc.abs()));
    }

    #[test]
    fn gradient_matches_central_differences(seed in 0u64..1000, u in prop::collection::vec(-1.0f64..1.0, 4)) {
        let m = estimate_moments(&frame(seed), 1).unwrap();
        let c = med_cost(&m, 1.0, 2.0).unwrap();
        let g = cost_gradient(&c, &u);
        let h = 1e-5;
        for i in 0..4 {
            let (mut up, mut dn) = (u.clone(), u.clone());
            up[i] += h;
            dn[i] -= h;
            let fd = (c.evaluate(&up) - c.evaluate(&dn)) / (2.0 * h);
            prop_assert!((g[i] - fd).abs() <= 1e-5 * (1.0 + g.amax()));
        }
    }

    #[test]
    fn semiblind_is_convex_combination(seed in 0u64..1000, lambda in 0.0f64..1.0, u in prop::collection::vec(-1.0f64..1.0, 4)) {
        let f = frame(seed);
        let m = estimate_moments(&f, 1).unwrap();
        let blind = cma_cost(&m, 1.32).unwrap();
        let pilots = Pilots { first: 1, symbols: f.sources[0][1..5].to_vec() };
        let train = training_cost(&f, 1, &pilots, 0).unwrap();
        let sb = semiblind(&blind, &train, lambda).unwrap().evaluate(&u);
        let expect = lambda * blind.evaluate(&u) + (1.0 - lambda) * train.evaluate(&u);
        prop_assert!((sb - expect).abs() <= 1e-9 * (1.0 + expect.abs()));
        let via_combine = combine(&[(&blind, lambda), (&train, 1.0 - lambda)]).unwrap().evaluate(&u);
        prop_assert!((sb - via_combine).abs() <= 1e-9 * (1.0 + expect.abs()));
    }

    #[test]
    fn best_gain_never_worse_than_unit_gain(seed in 0u64..1000, u in prop::collection::vec(-1.0f64..1.0, 4)) {
        let m = estimate_moments(&frame(seed), 1).unwrap();
        let c = cma_cost(&m, 1.32).unwrap();
        let (g, val) = best_gain(&c, &u);
        prop_assert!(val <= c.evaluate(&u) + 1e-9 * (1.0 + val.abs()));
        let scaled: Vec<f64> = u.iter().map(|x| x * g).collect();
        prop_assert!((c.evaluate(&scaled) - val).abs() <= 1e-8 * (1.0 + val.abs()));
    }

    #[test]
    fn isi_and_ncci_scale_invariant(taps in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..8), a in (0.1f64..5.0, -3.0f64..3.0)) {
        let c: Vec<C64> = taps.iter().map(|&(r, i)| C64::new(r, i)).collect();
        prop_assume!(c.iter().any(|z| z.norm() > 1e-3));
        let k = C64::from_polar(a.0, a.1);
        let s: Vec<C64> = c.iter().map(|z| z * k).collect();
        let (i1, i2) = (isi_of(&c).unwrap(), isi_of(&s).unwrap());
        prop_assert!((i1 - i2).abs() <= 1e-12 * (1.0 + i1));
        let (n1, n2) = (ncci_row(&c).unwrap(), ncci_row(&s).unwrap());
        prop_assert!((n1 - n2).abs() <= 1e-12 * (1.0 + n1));
        prop_assert!(i1 >= 0.0);
    }

    #[test]
    fn isi_zero_iff_single_tap(len in 1usize..8, pos in 0usize..8, v in 0.1f64..3.0) {
        let pos = pos % len;
        let mut c = vec![C64::new(0.0, 0.0); len];
        c[pos] = C64::new(v, -v);
        prop_assert_eq!(isi_of(&c).unwrap(), 0.0);
        if len > 1 {
            c[(pos + 1) % len] = C64::new(1e-3, 0.0);
            prop_assert!(isi_of(&c).unwrap() > 0.0);
        }
    }
}

#[test]
fn isi_undefined_for_zero_response() {
    assert!(isi_of(&[C64::new(0.0, 0.0); 3]).is_err());
}
