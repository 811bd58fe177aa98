use psmlc::polar::{
    build_reliability_order, scl_decode, OrderSource, PolarCodeSpec, ReliabilityOrder, LLR_CLIP,
};
use psmlc::rng::Stream;
use psmlc::shaping::{
    calibrate_s, measure_ones_fraction, select_shaping_set, Precoder, ShapedPositionMask,
    ShapingConfig,
};

fn pw256() -> ReliabilityOrder {
    build_reliability_order(256, &OrderSource::PolarizationWeight).unwrap()
}

#[test]
fn zero_prior_leaves_codewords_uniform() {
    let order = pw256();
    let pt = measure_ones_fraction(&order, 0.5, 56, 8, 1000, 11).unwrap();
    let sigma = (0.25f64 / (1000.0 * 256.0)).sqrt();
    assert!((pt.ones_fraction - 0.5).abs() < 3.0 * sigma, "{pt:?}");
}

#[test]
fn fifty_six_shaping_bits_reach_three_quarters() {
    let pt = measure_ones_fraction(&pw256(), 0.75, 56, 8, 10_000, 12).unwrap();
    eprintln!("s=56: ones-fraction {:.4} ± {:.4}", pt.ones_fraction, pt.stderr);
    assert!((pt.ones_fraction - 0.75).abs() <= 0.02);
}

#[test]
fn ones_fraction_grows_with_s() {
    let order = pw256();
    let pts: Vec<_> = (24..=88)
        .step_by(8)
        .map(|s| measure_ones_fraction(&order, 0.75, s, 8, 500, 13).unwrap())
        .collect();
    for w in pts.windows(2) {
        let tol = 2.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
        assert!(w[1].ones_fraction >= w[0].ones_fraction - tol, "{w:?}");
    }
}

#[test]
fn receiver_recovers_info_and_shaping_bits() {
    let order = pw256();
    let cfg = ShapingConfig::new(0.75, 56, 8).unwrap();
    let spec = PolarCodeSpec::from_order(&order, 128, 56, 99).unwrap();
    assert_eq!(spec.shaping_set(), {
        let mut s = select_shaping_set(&order, 56).unwrap();
        s.sort_unstable();
        s
    });
    let mask = ShapedPositionMask::full(256);
    let mut pre = Precoder::new(256, &cfg).unwrap();
    let mut rng = Stream::new(5, 5);
    for _ in 0..100 {
        let info = rng.bits(128);
        let sb = pre.shaping_bits(&info, &spec, &cfg, &mask).unwrap();
        let c = pre.encode(&info, &spec, &cfg, &mask).unwrap();
        let llr: Vec<f64> = c.iter().map(|&b| if b == 0 { LLR_CLIP } else { -LLR_CLIP }).collect();
        let res = scl_decode(&llr, &spec, 8, None).unwrap();
        assert!(res.success);
        assert_eq!(res.info, info);
        assert_eq!(res.shaping, sb);
    }
}

#[test]
fn partial_mask_shapes_only_the_masked_block() {
    let order = build_reliability_order(1024, &OrderSource::PolarizationWeight).unwrap();
    let cfg = ShapingConfig::new(0.78, 72, 8).unwrap();
    let spec = PolarCodeSpec::from_order(&order, 528, 72, 3).unwrap();
    let mask = ShapedPositionMask::block(1024, 768..1024).unwrap();
    let mut pre = Precoder::new(1024, &cfg).unwrap();
    let mut rng = Stream::new(6, 0);
    let (mut inside, mut outside) = (0.0, 0.0);
    let trials = 200;
    for _ in 0..trials {
        let c = pre.encode(&rng.bits(528), &spec, &cfg, &mask).unwrap();
        inside += mask.ones_fraction(&c);
        outside += c[..768].iter().map(|&b| b as f64).sum::<f64>() / 768.0;
    }
    inside /= trials as f64;
    outside /= trials as f64;
    eprintln!("masked block {inside:.4}, rest {outside:.4}");
    assert!(inside > 0.7);
    assert!((outside - 0.5).abs() < 0.01);
}

#[test]
fn calibration_is_reproducible_and_brackets_the_target() {
    let order = pw256();
    let a = calibrate_s(256, 0.75, &order, 8, 1000, 21).unwrap();
    let b = calibrate_s(256, 0.75, &order, 8, 1000, 21).unwrap();
    assert_eq!(a, b);
    assert!((48..=64).contains(&a.s_star), "{}", a.to_csv());
    assert!(a.to_csv().starts_with("s,ones_fraction,stderr\n"));
    assert_eq!(calibrate_s(256, 0.5, &order, 8, 1000, 21).unwrap().s_star, 0);
    assert!(calibrate_s(256, 0.75, &order, 8, 0, 21).is_err());
}
