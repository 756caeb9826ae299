use proptest::prelude::*;
use sled_data::DisparityMap;
use sled_tensor::XorShift64;
use sled_train::*;

struct Case {
    pred: Vec<f64>,
    gt: Vec<f64>,
    mask: Vec<bool>,
    fg: Vec<bool>,
    noc: Vec<bool>,
}

fn random_case(rng: &mut XorShift64) -> Case {
    let n = 8 * 8;
    let gt: Vec<f64> = (0..n).map(|_| rng.uniform(0.0, 120.0)).collect();
    // mixture of small and large errors so every threshold is exercised
    let pred = gt
        .iter()
        .map(|&g| {
            let spread = [0.5, 2.0, 6.0, 20.0][rng.below(4)];
            (g + rng.uniform(-spread, spread)).max(0.0)
        })
        .collect();
    let mut mask: Vec<bool> = (0..n).map(|_| rng.next_f64() < 0.5).collect();
    mask[0] = true;
    let fg = (0..n).map(|_| rng.next_f64() < 0.3).collect();
    let noc = (0..n).map(|_| rng.next_f64() < 0.8).collect();
    Case { pred, gt, mask, fg, noc }
}

fn oracle_epe(c: &Case) -> f64 {
    let mut sum = 0.0;
    let mut n = 0;
    for i in 0..c.pred.len() {
        if c.mask[i] {
            sum += (c.pred[i] - c.gt[i]).abs();
            n += 1;
        }
    }
    sum / n as f64
}

fn oracle_threshold(c: &Case, t: f64) -> f64 {
    let mut bad = 0;
    let mut n = 0;
    for i in 0..c.pred.len() {
        if c.mask[i] {
            n += 1;
            if (c.pred[i] - c.gt[i]).abs() > t {
                bad += 1;
            }
        }
    }
    100.0 * bad as f64 / n as f64
}

/// `(bg, fg, all)` as (outliers, pixels) counts.
fn oracle_d1(c: &Case, region: &[bool]) -> [(u64, u64); 3] {
    let mut out = [(0, 0); 3];
    for i in 0..c.pred.len() {
        if !region[i] {
            continue;
        }
        let e = (c.pred[i] - c.gt[i]).abs();
        let bad = u64::from(e > 3.0 && e / c.gt[i] > 0.05);
        let class = if c.fg[i] { 1 } else { 0 };
        out[class].0 += bad;
        out[class].1 += 1;
        out[2].0 += bad;
        out[2].1 += 1;
    }
    out
}

fn pct((bad, n): (u64, u64)) -> Option<f64> {
    (n > 0).then(|| 100.0 * bad as f64 / n as f64)
}

#[test]
fn metrics_match_loop_oracles() {
    let mut rng = XorShift64::new(2024);
    for _ in 0..200 {
        let c = random_case(&mut rng);
        let epe = end_point_error(&c.pred, &c.gt, &c.mask).unwrap();
        assert!((epe - oracle_epe(&c)).abs() < 1e-12);
        for t in [1.0, 3.0, 5.0] {
            assert_eq!(threshold_error(&c.pred, &c.gt, &c.mask, t).unwrap(), oracle_threshold(&c, t));
        }
        let (all, noc) = d1_metric(&c.pred, &c.gt, &c.mask, &c.fg, &c.noc).unwrap();
        let expect_all = oracle_d1(&c, &c.mask);
        let noc_region: Vec<bool> = c.mask.iter().zip(&c.noc).map(|(&a, &b)| a && b).collect();
        let expect_noc = oracle_d1(&c, &noc_region);
        for (got, want) in [(all, expect_all), (noc, expect_noc)] {
            assert_eq!(got.bg, pct(want[0]));
            assert_eq!(got.fg, pct(want[1]));
            assert_eq!(got.all, pct(want[2]));
            assert_eq!(want[2].0, want[0].0 + want[1].0);
        }
    }
}

#[test]
fn fixed_examples() {
    let gt = [1.0, 2.0, 3.0, 4.0];
    let mask = [true; 4];
    assert_eq!(end_point_error(&gt, &gt, &mask).unwrap(), 0.0);
    let shifted: Vec<f64> = gt.iter().map(|g| g + 1.0).collect();
    assert_eq!(end_point_error(&shifted, &gt, &mask).unwrap(), 1.0);

    let zeros = [0.0; 4];
    let errs = [0.5, 2.0, 4.0, 6.0];
    assert_eq!(threshold_error(&errs, &zeros, &mask, 3.0).unwrap(), 50.0);
    assert_eq!(threshold_error(&gt, &gt, &mask, 1.0).unwrap(), 0.0);

    assert!(!is_d1_outlier(104.0, 100.0));
    assert!(is_d1_outlier(106.0, 100.0));
    assert!(is_d1_outlier(14.0, 10.0));
}

#[test]
fn empty_inputs() {
    let v = [1.0, 2.0];
    assert!(matches!(end_point_error(&v, &v, &[false, false]), Err(TrainError::Evaluation(_))));
    assert!(matches!(threshold_error(&v, &v, &[false, false], 3.0), Err(TrainError::Evaluation(_))));
    let (all, _) = d1_metric(&v, &v, &[true, true], &[false, false], &[true, true]).unwrap();
    assert_eq!(all.bg, Some(0.0));
    assert_eq!(all.fg, None);
}

#[test]
fn identity_report_is_all_zero() {
    let gt = DisparityMap::from_values(4, 2, vec![3.0, 7.0, 9.0, 1.0, 2.0, 40.0, 5.0, 6.0]).unwrap();
    let fg = vec![true, false, true, false, false, false, true, false];
    let t = SampleTally::collect(gt.values(), &gt, Some(&fg), Some(&fg), 32).unwrap();
    let reports = t.reports().unwrap();
    assert_eq!(reports.len(), 2);
    for r in reports {
        assert_eq!(r.epe, 0.0);
        assert!(r.gt_px.values().all(|&v| v == 0.0));
        assert_eq!(r.d1_all, Some(0.0));
    }
    // gt = 40 is beyond max_disp and excluded
    assert_eq!(t.all.pixels, 7);
}

#[test]
fn report_json_and_key_values() {
    let t = Tally::collect(&[1.0, 5.0], &[1.0, 1.0], &[true, true], None).unwrap();
    let r = t.report(Region::All).unwrap();
    let json = serde_json::to_value(&r).unwrap();
    let obj = json.as_object().unwrap();
    let mut keys: Vec<_> = obj.keys().cloned().collect();
    keys.sort();
    assert_eq!(keys, ["d1_all", "d1_bg", "epe", "gt_px", "region"]);
    assert_eq!(json["region"], "all");
    assert_eq!(json["gt_px"]["3"], 50.0);
    let back: MetricReport = serde_json::from_value(json).unwrap();
    assert_eq!(back, r);
    let kv = r.to_key_values("eval");
    assert!(kv.lines().any(|l| l == "eval.epe=2"));
    assert!(kv.lines().any(|l| l == "eval.gt_px.1=50"));
    assert!(!kv.contains("d1_fg"));
}

#[test]
fn merged_tallies_equal_pooled_computation() {
    let mut rng = XorShift64::new(5);
    let cases: Vec<Case> = (0..4).map(|_| random_case(&mut rng)).collect();
    let mut merged = Tally::default();
    let (mut p, mut g, mut m, mut f) = (vec![], vec![], vec![], vec![]);
    for c in &cases {
        merged.merge(&Tally::collect(&c.pred, &c.gt, &c.mask, Some(&c.fg)).unwrap());
        p.extend_from_slice(&c.pred);
        g.extend_from_slice(&c.gt);
        m.extend_from_slice(&c.mask);
        f.extend_from_slice(&c.fg);
    }
    let pooled = Tally::collect(&p, &g, &m, Some(&f)).unwrap();
    let (a, b) = (merged.report(Region::All).unwrap(), pooled.report(Region::All).unwrap());
    assert!((a.epe - b.epe).abs() < 1e-12);
    assert_eq!(a.gt_px, b.gt_px);
    assert_eq!(a.d1_all, b.d1_all);
}

proptest! {
    #[test]
    fn threshold_error_is_non_increasing(seed in any::<u64>(), t in 0.1f64..10.0, dt in 0.0f64..5.0) {
        let c = random_case(&mut XorShift64::new(seed));
        let lo = threshold_error(&c.pred, &c.gt, &c.mask, t).unwrap();
        let hi = threshold_error(&c.pred, &c.gt, &c.mask, t + dt).unwrap();
        prop_assert!(hi <= lo);
    }

    #[test]
    fn d1_all_between_classes(seed in any::<u64>()) {
        let c = random_case(&mut XorShift64::new(seed));
        let (all, _) = d1_metric(&c.pred, &c.gt, &c.mask, &c.fg, &c.noc).unwrap();
        if let (Some(bg), Some(fg), Some(a)) = (all.bg, all.fg, all.all) {
            prop_assert!(a >= bg.min(fg) - 1e-12 && a <= bg.max(fg) + 1e-12);
        }
    }
}
