use difflab::datasets::generate;
use difflab::eval::{draw_losses, draw_losses_with, nelbo_estimate, Estimate};
use difflab::schedule::weight;
use difflab::targetspace::{from_x_prediction, to_x_prediction};
use difflab::{Architecture, DatasetKind, DenoiserModel, Prediction, TargetSpace, TimePoint};
use ndarray::Array2;

fn model(space: TargetSpace) -> DenoiserModel {
    DenoiserModel::init(Architecture::new(2, 32), space, 21).unwrap()
}

#[test]
fn doubling_draws_is_consistent() {
    let cloud = generate(DatasetKind::Ring, 2000, 4).unwrap();
    for space in TargetSpace::ALL {
        let m = model(space);
        let a = nelbo_estimate(&m, &cloud, 8, 1, 1e-5).unwrap();
        let b = nelbo_estimate(&m, &cloud, 16, 1, 1e-5).unwrap();
        let se = a.stderr.max(b.stderr);
        assert!(
            (a.mean - b.mean).abs() < 3.0 * se,
            "{space}: {} vs {} (se {se})",
            a.mean,
            b.mean
        );
    }
}

#[test]
fn nelbo_draws_are_weighted_draws_over_w() {
    let cloud = generate(DatasetKind::Swiss, 500, 2).unwrap();
    for space in TargetSpace::ALL {
        let draws = draw_losses(&model(space), &cloud, 4, 3, 1e-5).unwrap();
        for d in draws {
            let w = weight(space, TimePoint::new(d.t).unwrap()).unwrap();
            let expected = d.weighted / w;
            assert!(
                (d.nelbo - expected).abs() <= 1e-10 * expected.abs().max(1e-300),
                "{space} t={}: {} vs {expected}",
                d.t,
                d.nelbo
            );
        }
    }
}

/// The rescaled loss of an eps-space model equals the weighted x loss of its
/// implied data estimate on the same draws.
#[test]
fn rescaled_eps_model_matches_implied_x_model() {
    let cloud = generate(DatasetKind::Waves, 400, 6).unwrap();
    let m = model(TargetSpace::Eps);
    let eps_draws = draw_losses(&m, &cloud, 4, 9, 1e-5).unwrap();
    let x_draws = draw_losses_with(TargetSpace::X, &cloud, 4, 9, 1e-5, |b| {
        let raw = m.forward_batch(b.z.view(), &b.t)?;
        let mut x_hat = Array2::zeros(raw.raw_dim());
        for r in 0..raw.nrows() {
            let t = TimePoint::new(b.t[r])?;
            let z = b.z.row(r).to_vec();
            let pred = Prediction::new(TargetSpace::Eps, raw.row(r).to_vec());
            let x = to_x_prediction(&pred, &z, t)?;
            x_hat.row_mut(r).assign(&ndarray::Array1::from(x));
        }
        Ok(x_hat)
    })
    .unwrap();
    assert_eq!(eps_draws.len(), x_draws.len());
    for (e, x) in eps_draws.iter().zip(&x_draws) {
        assert_eq!(e.t, x.t);
        assert!((e.rescaled - x.weighted).abs() <= 1e-8 * x.weighted.max(1e-300));
    }
}

#[test]
fn implied_predictions_round_trip_through_models() {
    let cloud = generate(DatasetKind::Cluster, 50, 1).unwrap();
    let m = model(TargetSpace::V);
    let z = cloud.points.clone();
    let t = TimePoint::new(0.3).unwrap();
    let raw = m.forward_batch(z.view(), &vec![0.3; z.nrows()]).unwrap();
    for r in 0..z.nrows() {
        let zr = z.row(r).to_vec();
        let pred = Prediction::new(TargetSpace::V, raw.row(r).to_vec());
        let x_hat = to_x_prediction(&pred, &zr, t).unwrap();
        let back = from_x_prediction(TargetSpace::V, &x_hat, &zr, t).unwrap();
        for (a, b) in back.value.iter().zip(&pred.value) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn estimate_statistics() {
    let e = Estimate::from_samples([1.0, 2.0, 3.0, 4.0]);
    assert_eq!(e.n, 4);
    assert!((e.mean - 2.5).abs() < 1e-15);
    // sample variance 5/3, stderr sqrt(5/12)
    assert!((e.stderr - (5.0f64 / 12.0).sqrt()).abs() < 1e-12);
}
