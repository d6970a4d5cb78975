use std::f64::consts::PI;

use nqlab::estimates::{
    check_alt_sum_top_order, check_decay_estimate, check_decay_estimates, log_space, DecayGrids,
    DyadicSweep, Estimate,
};
use nqlab::kernel::make_cesaro_kernel;
use nqlab::Error;

fn small_grids() -> DecayGrids {
    DecayGrids {
        near_w: log_space(16.0, 256.0, 9),
        inner_t: (3..=7).rev().map(|j| PI * 2f64.powi(-j)).collect(),
        tail_t: (2..=5).rev().map(|j| PI * 2f64.powi(-j)).collect(),
        far_t: (4..=6).rev().map(|j| PI * 2f64.powi(-j)).collect(),
        far_v: log_space(1.25 * PI, 6.0 * PI, 8),
        ..DecayGrids::default()
    }
}

#[test]
fn decay_reports_cover_every_index_and_estimate() {
    let q = make_cesaro_kernel(2.5, 0.4).unwrap();
    let reports = check_decay_estimates(&q, 1, &small_grids()).unwrap();
    // r = 1, k = 2: indices 0 and 1, five estimates each.
    assert_eq!(reports.len(), 10);
    for r in &reports {
        assert!(r.estimate.is_decay());
        assert!(
            r.constant.is_finite() && r.constant > 0.0,
            "{} {}",
            r.estimate,
            r.case
        );
        assert!(!r.fits.is_empty());
    }
    let near: Vec<_> = reports
        .iter()
        .filter(|r| r.estimate == Estimate::NearPieceDecay)
        .collect();
    assert_eq!(near.len(), 2);
    for r in near {
        assert!((r.fits[0].predicted - 2.5).abs() < 1e-12);
        assert!(r.pass, "{:?}", r.fits);
    }
}

#[test]
fn single_decay_estimate_matches_full_run() {
    let q = make_cesaro_kernel(2.5, 0.4).unwrap();
    let grids = small_grids();
    let all = check_decay_estimates(&q, 1, &grids).unwrap();
    let one = check_decay_estimate(&q, 1, Estimate::InnerIntegralDecay, &grids).unwrap();
    let from_all: Vec<_> = all
        .into_iter()
        .filter(|r| r.estimate == Estimate::InnerIntegralDecay)
        .collect();
    assert_eq!(one, from_all);
    assert!(check_decay_estimate(&q, 1, Estimate::OscillatorySum, &grids).is_err());
}

#[test]
fn decay_preconditions() {
    let q = make_cesaro_kernel(2.5, 0.4).unwrap();
    assert!(check_decay_estimates(&q, 3, &small_grids()).is_err());
    let tight = DecayGrids {
        budget: 10,
        ..small_grids()
    };
    assert!(matches!(
        check_decay_estimates(&q, 1, &tight),
        Err(Error::BudgetExceeded { .. })
    ));
}

#[test]
fn top_order_sum_on_a_second_kernel() {
    let q = make_cesaro_kernel(1.5, 0.3).unwrap();
    let r = check_alt_sum_top_order(&q, &DyadicSweep::default()).unwrap();
    assert!(r.pass, "{:?} growth {:?}", r.fits, r.constant_growth);
}
