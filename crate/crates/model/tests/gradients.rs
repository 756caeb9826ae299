use sled_model::verify::{check_ops, check_pipeline, check_regularizer};
use sled_model::*;
use sled_tensor::gradcheck::GradCheckOptions;
use sled_tensor::XorShift64;

fn opts(entries: usize) -> GradCheckOptions {
    GradCheckOptions { max_entries_per_input: Some(entries), seed: 11, ..Default::default() }
}

#[test]
fn regularizers_match_finite_differences() {
    for r in [Regularizer::Sled, Regularizer::Scc, Regularizer::Hourglass(1)] {
        let hg = matches!(r, Regularizer::Hourglass(_));
        let cfg = ModelConfig { feat_channels: 2, reg_channels: 3, hg_channels: 3, ..ModelConfig::desk(r) };
        let model = StereoModel::new(&cfg, 21).unwrap();
        // batch 2 keeps the coarsest batch norms off a single element, where
        // the output is exactly beta and the rectifier sits on its kink
        let shape = if hg { vec![2, 4, 16, 16, 16] } else { vec![2, 4, 8, 8, 8] };
        let volume = XorShift64::new(3).uniform_tensor(shape, -1.0, 1.0);
        let check = check_regularizer(&model, &volume, &opts(3)).unwrap();
        assert!(check.report.passed(1e-4), "{r}: {} {:?}", check.worst_name, check.report);
        assert!(check.tensors > 10);
    }
}

#[test]
fn full_pipeline_on_64x64_crop() {
    let cfg = ModelConfig {
        feat_channels: 2,
        backbone_channels: 3,
        reg_channels: 3,
        ..ModelConfig::desk(Regularizer::Sled)
    };
    let model = StereoModel::new(&cfg, 4).unwrap();
    let mut rng = XorShift64::new(8);
    let left = rng.uniform_tensor(vec![1, 3, 64, 64], -1.0, 1.0);
    let right = rng.uniform_tensor(vec![1, 3, 64, 64], -1.0, 1.0);
    let check = check_pipeline(&model, &left, &right, &opts(2)).unwrap();
    assert!(check.report.passed(1e-4), "{} {:?}", check.worst_name, check.report);
    assert_eq!(check.tensors, model.store().params().len());
}

#[test]
fn corrupted_adjoint_is_detected() {
    let cfg = ModelConfig { feat_channels: 2, reg_channels: 3, ..ModelConfig::desk(Regularizer::Scc) };
    let model = StereoModel::new(&cfg, 2).unwrap();
    let volume = XorShift64::new(1).uniform_tensor(vec![1, 4, 4, 4, 4], -1.0, 1.0);
    let o = GradCheckOptions { fault: Some(("conv".into(), 1.01)), ..opts(2) };
    let check = check_regularizer(&model, &volume, &o).unwrap();
    assert!(!check.report.passed(1e-4));
}

#[test]
fn every_op_passes_and_a_fault_names_its_op() {
    let checks = check_ops(&GradCheckOptions::default()).unwrap();
    assert!(checks.len() >= 12);
    for c in &checks {
        assert!(c.report.passed(1e-4), "{}: {:?}", c.name, c.report);
    }
    let faulty = GradCheckOptions { fault: Some(("softmax".into(), 1.5)), ..Default::default() };
    let failed: Vec<_> =
        check_ops(&faulty).unwrap().into_iter().filter(|c| !c.report.passed(1e-4)).map(|c| c.name).collect();
    // the regression chain runs through softmax as well
    assert_eq!(failed, ["softmax", "disparity_regression"]);
}
