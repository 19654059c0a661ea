use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use soseq::cost_builder::cma_cost;
use soseq::error::Error;
use soseq::extraction::{extract_pp1, extract_pp2, null_space_basis, ExtractionSettings};
use soseq::harness::acceptance::{blind_like, brute_force_min, circle_quartic, hazard_basis, random_quartic};
use soseq::lifting::{estimate_moments, qvec};
use soseq::sdp_solver::{certify, solve, SolveStatus, SolverSettings};
use soseq::signal_model::{generate_frame, ChannelModel, Constellation, C64};
use soseq::sos_sdp::{assemble, assemble_general, verify_certificate, SosSdpProblem};

#[test]
fn circle_quartic_has_zero_bound() {
    let p = assemble(&circle_quartic().unwrap()).unwrap();
    let sol = solve(&p, &SolverSettings::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    assert!(sol.tau.abs() <= 1e-5, "tau {}", sol.tau);
    assert!(certify(&sol, &p));
    let report = verify_certificate(&p, &sol, 20);
    assert!(report.psd_ok());
    assert!(report.max_pointwise_gap <= 1e-5, "{report:?}");
}

#[test]
fn bound_never_exceeds_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let c = random_quartic(&mut rng).unwrap();
        let brute = brute_force_min(&c, 4.0, 200);
        for p in [assemble(&c).unwrap(), assemble_general(&c).unwrap()] {
            let sol = solve(&p, &SolverSettings::default()).unwrap();
            assert!(sol.tau <= brute + 1e-5, "tau {} above minimum {brute}", sol.tau);
        }
        let general = solve(&assemble_general(&c).unwrap(), &SolverSettings::default()).unwrap();
        assert!((general.tau - brute).abs() <= 1e-4, "general form {} vs {brute}", general.tau);
    }
}

#[test]
fn reduced_form_tight_on_blind_like_quartics() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..5 {
        let base = random_quartic(&mut rng).unwrap();
        let c = blind_like(&base, &mut rng).unwrap();
        let brute = brute_force_min(&c, 4.0, 200);
        let sol = solve(&assemble(&c).unwrap(), &SolverSettings::default()).unwrap();
        assert!((sol.tau - brute).abs() <= 1e-4, "tau {} vs {brute}", sol.tau);
    }
}

#[test]
fn export_import_roundtrip() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let c = random_quartic(&mut rng).unwrap();
    for p in [assemble(&c).unwrap(), assemble_general(&c).unwrap()] {
        let mut buf = Vec::new();
        p.export(&mut buf).unwrap();
        let back = SosSdpProblem::import(buf.as_slice()).unwrap();
        assert_eq!(back.dim_g, p.dim_g);
        assert_eq!(back.n2, p.n2);
        assert_eq!(back.equalities.len(), p.equalities.len());
        for u in [[0.3, -1.2], [2.0, 0.5]] {
            assert!((back.evaluate_polynomial(&u) - p.evaluate_polynomial(&u)).abs() <= 1e-12);
        }
    }
}

#[test]
fn import_reports_line_of_malformed_input() {
    let err = SosSdpProblem::import("garbage line\n".as_bytes()).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
}

#[test]
fn pp1_division_hazard_and_pp2_recovery() {
    let v = hazard_basis();
    let settings = ExtractionSettings::default();
    assert!(matches!(extract_pp1(&v, &settings), Err(Error::DivisionHazard { .. })));
    let b = DVector::from_vec(vec![1.0, 0.0, 1.0]);
    let e = extract_pp2(&v, &b, 1.0, &settings).unwrap();
    assert!(e.u.iter().all(|x| x.is_finite()));
    assert!((qvec(e.u.as_slice()).dot(&b) - 1.0).abs() <= 1e-9);
}

#[test]
fn null_space_of_rank_deficient_gram() {
    let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    let g = &a * a.transpose();
    let v = null_space_basis(&g, 1e-7).unwrap();
    assert_eq!(v.ncols(), 1);
    assert!((&g * &v).amax() <= 1e-9);
    assert!(matches!(null_space_basis(&DMatrix::identity(3, 3), 1e-7), Err(Error::NoNullSpace { .. })));
}

#[test]
fn cma_on_identity_channel_recovers_unit_modulus_equalizer() {
    let ch = ChannelModel::siso(vec![C64::new(1.0, 0.0)]).unwrap();
    let qpsk = Constellation::qpsk();
    let frame = generate_frame(&qpsk, &ch, 400, f64::INFINITY, 5).unwrap();
    let m = estimate_moments(&frame, 0).unwrap();
    let c = cma_cost(&m, qpsk.stats().r2).unwrap();
    let p = assemble(&c).unwrap();
    let sol = solve(&p, &SolverSettings::default()).unwrap();
    assert!(sol.tau.abs() <= 1e-5, "tau {}", sol.tau);
    let v = null_space_basis(&sol.g, 1e-5).unwrap();
    let e = extract_pp2(&v, &m.b, qpsk.stats().sigma_s2, &ExtractionSettings::default()).unwrap();
    assert!((e.u.norm() - 1.0).abs() <= 1e-4, "{}", e.u);
    assert!(c.evaluate(e.u.as_slice()) <= sol.tau + 1e-4);
}
