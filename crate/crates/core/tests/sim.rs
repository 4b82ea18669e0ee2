use polar_lattice::decoder::DecoderKind;
use polar_lattice::density::Grid;
use polar_lattice::design::{design_with_dimensions, integer_lattice_wer};
use polar_lattice::lattice::LatticeDesign;
use polar_lattice::polar::PolarCode;
use polar_lattice::sim::{
    component_wer, run_wer, vnr_at_wer, wilson_interval, SimPlan, SweepPoint, TransmitMode,
};

fn small_design() -> LatticeDesign {
    design_with_dimensions(32, 1e-2, &[2, 20], Grid::new(30.0, 0.05).unwrap()).unwrap()
}

fn csv(design: &LatticeDesign, plan: &SimPlan) -> String {
    let mut out = Vec::new();
    run_wer(design, plan).unwrap().write_csv(&mut out, false).unwrap();
    String::from_utf8(out).unwrap()
}

#[test]
fn integer_lattice_matches_closed_form() {
    let n = 8;
    let d = LatticeDesign::integer_lattice(n).unwrap();
    let sweep: Vec<SweepPoint> = [0.03, 0.045, 0.06]
        .iter()
        .map(|&s| SweepPoint::Sigma2(s))
        .collect();
    let stats = run_wer(&d, &SimPlan::new(sweep, 40_000, 0, 3)).unwrap();
    for p in &stats.points {
        let exact = integer_lattice_wer(n, p.sigma2);
        let (lo, hi) = wilson_interval(p.errors, p.trials, 2.576);
        assert!(
            lo <= exact && exact <= hi,
            "sigma2 {}: {exact} outside [{lo}, {hi}]",
            p.sigma2
        );
        assert_eq!(p.level_errors, vec![p.errors]);
    }
}

#[test]
fn output_independent_of_worker_count() {
    let d = small_design();
    let sweep = vec![SweepPoint::Vnr(1.5), SweepPoint::Vnr(2.5)];
    let plan = SimPlan::new(sweep, 6_000, 40, 17).with_batch_size(250);
    let one = csv(&d, &plan.clone().with_workers(1));
    let many = csv(&d, &plan.with_workers(3));
    assert_eq!(one, many);
}

#[test]
fn random_points_match_zero_point() {
    let d = small_design();
    let sweep = vec![SweepPoint::Vnr(2.0)];
    let zero = run_wer(&d, &SimPlan::new(sweep.clone(), 20_000, 0, 5)).unwrap();
    let random = run_wer(
        &d,
        &SimPlan::new(sweep, 20_000, 0, 6).with_mode(TransmitMode::Random),
    )
    .unwrap();
    let (a, b) = (&zero.points[0], &random.points[0]);
    assert!(a.errors > 50, "operating point too clean: {}", a.errors);
    // disjoint 99.9% intervals would indicate a point-dependent decoder
    let (alo, ahi) = wilson_interval(a.errors, a.trials, 3.29);
    let (blo, bhi) = wilson_interval(b.errors, b.trials, 3.29);
    assert!(alo <= bhi && blo <= ahi, "zero {} vs random {}", a.wer(), b.wer());
}

#[test]
fn stops_at_target_errors_on_a_batch_boundary() {
    let d = small_design();
    let plan = SimPlan::new(vec![SweepPoint::Vnr(0.5)], 1_000_000, 25, 1).with_batch_size(100);
    let p = &run_wer(&d, &plan).unwrap().points[0];
    assert!(p.errors >= 25);
    assert_eq!(p.trials % 100, 0);
    assert!(p.trials < 1_000_000);
    assert_eq!(p.level_errors.iter().sum::<u64>(), p.errors);
    // a word error is exactly "some level fails given the true earlier levels"
    let worst = p.genie_errors.iter().copied().max().unwrap();
    assert!(worst <= p.errors && p.errors <= p.genie_errors.iter().sum::<u64>());
}

#[test]
fn csv_layout() {
    let d = small_design();
    let stats = run_wer(&d, &SimPlan::new(vec![SweepPoint::Vnr(3.0)], 500, 0, 2)).unwrap();
    let mut plain = Vec::new();
    stats.write_csv(&mut plain, false).unwrap();
    let plain = String::from_utf8(plain).unwrap();
    let mut lines = plain.lines();
    assert_eq!(
        lines.next().unwrap(),
        "vnr_db,sigma2,trials,errors,wer,ci_low,ci_high,err_l0,err_l1,err_l2,seconds"
    );
    let row = lines.next().unwrap();
    assert!(row.starts_with("3.0000,"));
    assert!(row.ends_with(','));
    let mut timed = Vec::new();
    stats.write_csv(&mut timed, true).unwrap();
    assert!(!String::from_utf8(timed)
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .ends_with(','));
}

#[test]
fn plan_errors() {
    let d = small_design();
    assert!(run_wer(&d, &SimPlan::new(vec![], 10, 0, 1)).is_err());
    assert!(run_wer(&d, &SimPlan::new(vec![SweepPoint::Vnr(1.0)], 0, 0, 1)).is_err());
    assert!(run_wer(&d, &SimPlan::new(vec![SweepPoint::Sigma2(-1.0)], 10, 0, 1)).is_err());
}

#[test]
fn component_simulation_is_reproducible() {
    let code = PolarCode::new(16, vec![7, 11, 13, 14, 15], 0).unwrap();
    let a = component_wer(&code, DecoderKind::Sc, 0.15, 4000, 0, 8, 1).unwrap();
    let b = component_wer(&code, DecoderKind::Sc, 0.15, 4000, 0, 8, 2).unwrap();
    assert_eq!(a, b);
    assert!(a.errors > 0 && a.errors < a.trials);
    assert!(component_wer(&code, DecoderKind::Sc, 0.0, 10, 0, 1, 1).is_err());
}

#[test]
fn crossing_of_the_integer_lattice() {
    let d = LatticeDesign::integer_lattice(4).unwrap();
    let plan = SimPlan::new(vec![], 20_000, 200, 4);
    let c = vnr_at_wer(&d, 1e-2, 5.0, 0.5, &plan).unwrap();
    // VNR of Z^n is 1 / (2 pi e sigma^2); invert the closed form by bisection
    let (mut lo, mut hi) = (1e-4f64, 1.0f64);
    for _ in 0..100 {
        let mid = (lo * hi).sqrt();
        if integer_lattice_wer(4, mid) > 1e-2 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let exact = d.vnr_db(lo);
    assert!((c.vnr_db - exact).abs() < 0.15, "{} vs {exact}", c.vnr_db);
    assert!(c.points.len() >= 2);
    assert!(c.points.windows(2).all(|w| w[0].vnr_db < w[1].vnr_db));
}
