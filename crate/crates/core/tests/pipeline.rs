use zits::basis::BasisKind;
use zits::eval::ari;
use zits::fit::{extract_clusters, fit_pipeline, FitConfig, PipelineSpec};
use zits::init::InitKind;
use zits::sim::{simulate, SimConfig};
use zits::tensor::{khatri_rao_rows, Mat};

fn spec(r: usize, l: usize, q: usize, scheme: InitKind) -> PipelineSpec {
    PipelineSpec {
        r,
        l,
        q,
        basis: BasisKind::CubicBspline,
        scheme,
    }
}

#[test]
fn pipeline_is_deterministic_for_a_seed() {
    let (data, _) = simulate(&SimConfig::standard(12, 40, 2, 2, 1.0, 5)).unwrap();
    let cfg = FitConfig {
        max_iters: 20,
        seed: 9,
        ..FitConfig::default()
    };
    let a = fit_pipeline(&data, &spec(2, 2, 12, InitKind::Random), &cfg).unwrap();
    let b = fit_pipeline(&data, &spec(2, 2, 12, InitKind::Random), &cfg).unwrap();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
    assert_eq!(a.2.nll_trace, b.2.nll_trace);
}

#[test]
fn block_structured_weights_cluster_exactly() {
    let (k, r, l) = (9, 3, 2);
    let labels: Vec<usize> = (0..k).map(|c| (c * 2) % r).collect();
    let z = Mat::from_fn(k, r, |c, g| f64::from(labels[c] == g));
    let bbar = Mat::from_fn(r, l, |g, d| 1.0 + g as f64 * 2.0 + d as f64 * 0.3);
    let xbar = Mat::from_fn(r, l, |g, d| -0.5 + g as f64 - d as f64 * 0.1);
    let wb = khatri_rao_rows(&z, &(&z * &bbar)).unwrap();
    let wx = khatri_rao_rows(&z, &(&z * &xbar)).unwrap();
    let sol = extract_clusters(&wb, &wx, r, l, 0).unwrap();
    assert!(
        sol.objective < 1e-12 * (wb.norm_squared() + wx.norm_squared()),
        "J = {}",
        sol.objective
    );
    assert_eq!(ari(&sol.labels, &labels).unwrap(), 1.0);
    let (sb, sx) = sol.structured_weights().unwrap();
    assert!((sb - wb).norm() < 1e-12);
    assert!((sx - wx).norm() < 1e-12);
}

#[test]
fn one_cluster_averages_every_cell() {
    let wb = Mat::from_fn(5, 3, |k, d| (k * 3 + d) as f64);
    let wx = Mat::from_fn(5, 3, |k, d| (k as f64 - d as f64) * 0.5);
    let sol = extract_clusters(&wb, &wx, 1, 3, 0).unwrap();
    assert_eq!(sol.labels, vec![0; 5]);
    for d in 0..3 {
        assert!((sol.beta_bar[(0, d)] - wb.column(d).mean()).abs() < 1e-12);
        assert!((sol.xi_bar[(0, d)] - wx.column(d).mean()).abs() < 1e-12);
    }
}

#[test]
fn small_single_cluster_problem_fits_well() {
    let (data, truth) = simulate(&SimConfig::standard(20, 250, 5, 1, 1.0, 11)).unwrap();
    let cfg = FitConfig {
        seed: 11,
        ..FitConfig::default()
    };
    let (fitted, clusters, report) =
        fit_pipeline(&data, &spec(1, 5, 20, InitKind::EigenB), &cfg).unwrap();
    assert!(report.converged);
    let structured = clusters.structured_params(&fitted).unwrap();
    let links = zits::model::build_links(&structured).unwrap();
    let (lam, _) = zits::model::lambda_p_of(&links);
    let err = zits::eval::rel_error(&lam, &truth.lambda).unwrap();
    assert!(err < 0.05, "relative intensity error {err}");
}

#[test]
fn two_simulated_groups_are_recovered() {
    let cfg = SimConfig::standard(15, 60, 2, 2, 1.0, 21);
    let (data, truth) = simulate(&cfg).unwrap();
    let fit_cfg = FitConfig {
        seed: 21,
        max_iters: 200,
        ..FitConfig::default()
    };
    let (_, clusters, _) =
        fit_pipeline(&data, &spec(2, 2, 15, InitKind::EigenB), &fit_cfg).unwrap();
    let score = ari(&clusters.labels, &truth.labels).unwrap();
    assert!(score > 0.8, "ARI {score}");
}
