use epn::graph::GaussianSpec;
use epn::theory::*;

#[test]
fn optimal_uncertainty_matches_the_closed_form() {
    let spec = GaussianSpec::isotropic(2, 2.0);
    assert_eq!(optimal_enn_uncertainty(&[0.0, 0.0], &spec), 0.5);
    let u = optimal_enn_uncertainty(spec.mu(), &spec);
    assert!((u - 0.035_325_412_426_582).abs() < 1e-14);
    let enn = OptimalEnn::new(&spec);
    for z in [[0.3, -1.1], [2.0, 0.5], [-4.0, 1.0]] {
        assert!((enn.epistemic(&z) - optimal_enn_uncertainty(&z, &spec)).abs() < 1e-14);
        assert_eq!(optimal_enn_uncertainty(&z, &spec), optimal_enn_uncertainty(&[-z[0], -z[1]], &spec));
    }
}

#[test]
fn ranking_probability_clears_the_bound() {
    let r = verify_theorem1(&GaussianSpec::isotropic(2, 6.0), 100_000, 0);
    let bound = r.bound.unwrap();
    assert!(r.estimate >= 0.95 && r.estimate >= bound, "{r:?}");
    assert!(verify_theorem1(&GaussianSpec::isotropic(2, 1.0), 1000, 0).bound.is_none());

    let flat = verify_theorem1(&GaussianSpec::isotropic(2, 0.0), 100_000, 0);
    assert!((flat.estimate - 0.5).abs() < 1e-12, "all ties count half");

    let s = theorem1_sweep(2, &[1.0, 2.0, 4.0, 6.0, 8.0], 100_000, 0);
    assert!(s.monotone, "{s:?}");
}

#[test]
fn unregularized_probe_cannot_rank() {
    let r = verify_theorem2(&[1.0, 2.0, 4.0, 8.0], &GaussianSpec::isotropic(2, 1.0), 10_000, 0).unwrap();
    let failed: Vec<_> = r.checks().into_iter().filter(|c| !c.passed).collect();
    assert!(failed.is_empty(), "{failed:?}");
    assert!(r.points.iter().all(|p| p.ood_auroc == 0.5));
}

#[test]
fn ice_optimum_recovers_the_enn_ranking() {
    let r = verify_theorem3(&GaussianSpec::isotropic(2, 1.0), 10_000, 0).unwrap();
    let failed: Vec<_> = r.checks().into_iter().filter(|c| !c.passed).collect();
    assert!(failed.is_empty(), "{failed:?}");
    assert!(!r.perturbations.is_empty());
}

#[test]
fn lemma_grid_passes_and_the_corrupted_control_fails() {
    let (a, x) = default_lemma1_grids();
    let ok = verify_lemma1(&a, &x).unwrap();
    assert!(ok.checks().iter().all(|c| c.passed), "{ok:?}");
    let bad = verify_lemma1_with(&a, &x, corrupted_digamma, corrupted_trigamma).unwrap();
    assert!(!bad.strictly_decreasing);
    assert!(verify_lemma1(&[1.5], &x).is_err());
    assert!(verify_lemma1(&a, &[2.0, 1.0]).is_err());
}

#[test]
fn full_report_is_deterministic() {
    let settings = TheorySettings { n_prob_samples: 20_000, n_loss_samples: 2_000, ..TheorySettings::default() };
    let a = run_all(settings, false).unwrap();
    assert!(a.all_passed, "{:?}", a.checks.iter().filter(|c| !c.passed).collect::<Vec<_>>());
    assert_eq!(a.to_json().unwrap(), run_all(settings, false).unwrap().to_json().unwrap());
    let bad = run_all(settings, true).unwrap();
    assert!(!bad.all_passed);
    assert!(bad.checks.iter().any(|c| c.name == "lemma1.strictly_decreasing" && !c.passed));
}
