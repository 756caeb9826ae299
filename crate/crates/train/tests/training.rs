use sled_data::{generate_stereogram, StereoSample};
use sled_model::{ModelConfig, Regularizer, StereoModel};
use sled_tensor::{smooth_l1_value, Tape, Tensor, XorShift64};
use sled_train::*;

#[test]
fn total_loss_examples() {
    let mut tape = Tape::new();
    let gt = tape.constant(Tensor::full(vec![1, 2, 2], 3.0));
    let same = tape.constant(Tensor::full(vec![1, 2, 2], 3.0));
    let mask = Tensor::ones(vec![1, 2, 2]);
    let l = total_loss(&mut tape, &[same, same], gt, &mask, &[1.0, 1.0]).unwrap();
    assert_eq!(tape.value(l).item().unwrap(), 0.0);

    // residuals chosen so the two smooth-L1 terms are 0.2 and 0.3
    let a = tape.constant(Tensor::full(vec![1, 2, 2], 3.0 + 0.4f64.sqrt()));
    let b = tape.constant(Tensor::full(vec![1, 2, 2], 3.0 + 0.6f64.sqrt()));
    let l = total_loss(&mut tape, &[a, b], gt, &mask, &[1.0, 1.0]).unwrap();
    assert!((tape.value(l).item().unwrap() - 0.5).abs() < 1e-12);

    assert!(matches!(total_loss(&mut tape, &[a, b], gt, &mask, &[1.0]), Err(TrainError::Config(_))));
    let empty = Tensor::zeros(vec![1, 2, 2]);
    assert!(total_loss(&mut tape, &[a], gt, &empty, &[1.0]).is_err());
}

#[test]
fn total_loss_matches_term_oracle() {
    let mut rng = XorShift64::new(17);
    for _ in 0..100 {
        let shape = vec![2, 3, 5];
        let n = 30;
        let gt = rng.uniform_tensor(shape.clone(), 0.0, 10.0);
        let mut mask = Tensor::from_fn(shape.clone(), |_| f64::from(u8::from(rng.next_f64() < 0.6)));
        mask.data_mut()[0] = 1.0;
        let outs: Vec<Tensor> = (0..3).map(|_| rng.uniform_tensor(shape.clone(), 0.0, 10.0)).collect();
        let weights: Vec<f64> = (0..3).map(|_| rng.uniform(0.0, 2.0)).collect();

        let mut expected = 0.0;
        for (o, w) in outs.iter().zip(&weights) {
            let (mut sum, mut count) = (0.0, 0.0);
            for i in 0..n {
                if mask.data()[i] == 1.0 {
                    sum += smooth_l1_value(o.data()[i] - gt.data()[i]);
                    count += 1.0;
                }
            }
            expected += w * sum / count;
        }
        let mut tape = Tape::new();
        let g = tape.constant(gt);
        let vars: Vec<_> = outs.into_iter().map(|o| tape.constant(o)).collect();
        let l = total_loss(&mut tape, &vars, g, &mask, &weights).unwrap();
        assert!((tape.value(l).item().unwrap() - expected).abs() < 1e-12);
    }
}

#[test]
fn zero_weights_give_zero_loss_and_gradients() {
    let mut rng = XorShift64::new(1);
    let mut tape = Tape::new();
    let g = tape.constant(rng.uniform_tensor(vec![1, 4, 4], 0.0, 5.0));
    let a = tape.leaf(rng.uniform_tensor(vec![1, 4, 4], 0.0, 5.0), true);
    let b = tape.leaf(rng.uniform_tensor(vec![1, 4, 4], 0.0, 5.0), true);
    let l = total_loss(&mut tape, &[a, b], g, &Tensor::ones(vec![1, 4, 4]), &[0.0, 0.0]).unwrap();
    assert_eq!(tape.value(l).item().unwrap(), 0.0);
    tape.backward(l).unwrap();
    for v in [a, b] {
        assert!(tape.grad(v).unwrap().data().iter().all(|&x| x == 0.0));
    }
}

#[test]
fn adam_descends_on_quadratic() {
    let mut rng = XorShift64::new(4);
    let target = rng.uniform_tensor(vec![6], -2.0, 2.0);
    let mut x = rng.uniform_tensor(vec![6], -2.0, 2.0);
    let loss = |x: &Tensor| -> f64 { x.data().iter().zip(target.data()).map(|(a, b)| (a - b) * (a - b)).sum() };
    let mut opt = Adam::new();
    let mut prev = loss(&x);
    for _ in 0..20 {
        let g = Tensor::from_fn(vec![6], |i| 2.0 * (x.data()[i] - target.data()[i]));
        opt.step(1e-3, std::iter::once(&mut x), &[Some(&g)]).unwrap();
        let now = loss(&x);
        assert!(now < prev);
        prev = now;
    }
}

#[test]
fn schedule_switches_learning_rate() {
    let cfg = TrainConfig { phase: Phase::Finetune, ..Default::default() };
    assert_eq!(cfg.total_epochs(), 1000);
    assert_eq!(cfg.lr_at(0), Some(0.001));
    assert_eq!(cfg.lr_at(599), Some(0.001));
    assert_eq!(cfg.lr_at(600), Some(0.0001));
    assert_eq!(cfg.lr_at(999), Some(0.0001));
    assert_eq!(cfg.lr_at(1000), None);

    let pre = TrainConfig::default();
    assert_eq!(pre.total_epochs(), 20);
    assert_eq!(pre.lr_at(19), Some(0.001));
    assert_eq!(pre.lr_at(20), None);
}

#[test]
fn config_validation() {
    assert!(TrainConfig::default().validate(2).is_ok());
    let wrong = TrainConfig { loss_weights: Some(vec![1.0; 3]), ..Default::default() };
    assert!(wrong.validate(2).is_err());
    assert!(wrong.validate(3).is_ok());
    let bad = TrainConfig { phase: Phase::Finetune, finetune_lr_schedule: vec![(0.0, 5)], ..Default::default() };
    assert!(bad.validate(2).is_err());
    let json = r#"{"pretrain_epochs": 3, "finetune_lr_schedule": [[0.01, 2]], "unknown": 1}"#;
    assert!(serde_json::from_str::<TrainConfig>(json).is_err());
    let ok: TrainConfig = serde_json::from_str(r#"{"finetune_lr_schedule": [[0.01, 2]]}"#).unwrap();
    assert_eq!(ok.finetune_lr_schedule, vec![(0.01, 2)]);
}

fn tiny_setup() -> (StereoModel, Vec<StereoSample>) {
    let cfg = ModelConfig { max_disp: 16, ..ModelConfig::desk(Regularizer::Scc) };
    let model = StereoModel::new(&cfg, 3).unwrap();
    let samples = (0..2).map(|i| generate_stereogram(64, 32, |x, _| if x < 32 { 2 } else { 5 + i }, i as u64).unwrap()).collect();
    (model, samples)
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let (mut model, samples) = tiny_setup();
    let before = model.store().params().to_vec();
    let cfg = TrainConfig { lr_initial: 0.0, pretrain_epochs: 1, ..Default::default() };
    train(&mut model, &samples, &cfg, |_, _| {}).unwrap();
    for (a, b) in before.iter().zip(model.store().params()) {
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.value), bits(&b.value), "{}", a.name);
    }
}

#[test]
fn same_seed_same_log() {
    let cfg = TrainConfig { pretrain_epochs: 3, seed: 9, ..Default::default() };
    let run = || {
        let (mut model, samples) = tiny_setup();
        let log = train(&mut model, &samples, &cfg, |_, _| {}).unwrap();
        (log, model.store().clone())
    };
    let (a, sa) = run();
    let (b, sb) = run();
    assert_eq!(a, b);
    assert_eq!(sa, sb);
    assert_eq!(a.epochs.len(), 3);
    assert!(a.to_csv().starts_with("epoch,lr,loss\n0,0.001,"));
}

#[test]
fn divergence_reports_epoch() {
    let (mut model, samples) = tiny_setup();
    let cfg = TrainConfig { lr_initial: 1e300, pretrain_epochs: 5, ..Default::default() };
    match train(&mut model, &samples, &cfg, |_, _| {}) {
        Err(TrainError::Diverged { epoch, .. }) => assert!(epoch < 5),
        other => panic!("expected divergence, got {:?}", other.map(|l| l.epochs.len())),
    }
}

#[test]
fn evaluation_of_exact_prediction_is_zero() {
    let (_, samples) = tiny_setup();
    let s = &samples[0];
    let t = SampleTally::collect(s.gt.values(), &s.gt, s.fg_mask.as_deref(), s.noc_mask.as_deref(), 16).unwrap();
    for r in t.reports().unwrap() {
        assert_eq!(r.epe, 0.0);
        assert_eq!(r.d1_all, Some(0.0));
    }
}
