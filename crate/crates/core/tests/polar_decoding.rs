use psmlc::polar::{
    build_reliability_order, encode, polar_transform, scl_decode_with, CheckNode, OrderSource,
    PolarCodeSpec, SclDecoder,
};
use psmlc::rng::Stream;

/// BPSK over AWGN at `snr_db` (Es/σ²); returns channel LLRs `2y/σ²`.
fn bpsk_awgn(c: &[u8], snr_db: f64, s: &mut Stream) -> Vec<f64> {
    let sigma2 = 10f64.powf(-snr_db / 10.0);
    c.iter()
        .map(|&b| {
            let x = 1.0 - 2.0 * b as f64;
            let y = x + sigma2.sqrt() * s.gaussian();
            2.0 * y / sigma2
        })
        .collect()
}

/// Exhaustive ML over all 2^k info words (frozen bits fixed).
fn ml_decode(llr: &[f64], spec: &PolarCodeSpec) -> Vec<u8> {
    let k = spec.info_set().len();
    let mut best = (f64::INFINITY, vec![]);
    for v in 0..(1u32 << k) {
        let info: Vec<u8> = (0..k).map(|i| ((v >> i) & 1) as u8).collect();
        let c = encode(&info, spec, &[]).unwrap();
        // -log p(y|c) up to a constant: sum of ln(1+e^{∓λ})
        let cost: f64 = c
            .iter()
            .zip(llr)
            .map(|(&b, &l)| {
                let v = if b == 0 { l } else { -l };
                (-v).exp().ln_1p()
            })
            .sum();
        if cost < best.0 {
            best = (cost, info);
        }
    }
    best.1
}

#[test]
fn full_list_equals_ml_and_sc_is_not_better() {
    let order =
        build_reliability_order(8, &OrderSource::GaussianApproximation { design_snr_db: 3.0 }).unwrap();
    let spec = PolarCodeSpec::from_order(&order, 4, 0, 1).unwrap();
    let mut full = SclDecoder::with_check_node(8, 16, CheckNode::Exact).unwrap();
    let mut sc = SclDecoder::with_check_node(8, 1, CheckNode::Exact).unwrap();
    let mut s = Stream::new(2024, 0);
    let trials = 10_000;
    let (mut ml_err, mut sc_err, mut disagree) = (0u32, 0u32, 0u32);
    for _ in 0..trials {
        let info = s.bits(4);
        let c = encode(&info, &spec, &[]).unwrap();
        let llr = bpsk_awgn(&c, 3.0, &mut s);
        let ml = ml_decode(&llr, &spec);
        let (res_full, _) = scl_decode_with(&mut full, &llr, &spec, None).unwrap();
        let (res_sc, _) = scl_decode_with(&mut sc, &llr, &spec, None).unwrap();
        ml_err += (ml != info) as u32;
        sc_err += (res_sc.info != info) as u32;
        disagree += (res_full.info != ml) as u32;
    }
    assert_eq!(disagree, 0, "list of 16 over 4 unknowns must be ML");
    let p_ml = ml_err as f64 / trials as f64;
    let p_sc = sc_err as f64 / trials as f64;
    let sigma = (p_ml * (1.0 - p_ml) / trials as f64).sqrt();
    eprintln!("n=8 k=4 @3dB: ML BLER {p_ml:.4}, SC BLER {p_sc:.4}");
    assert!(p_sc >= p_ml - 3.0 * sigma);
    // SC is near-ML at this size: the gap stays within a few standard errors
    assert!(p_sc - p_ml < 0.05, "SC {p_sc} vs ML {p_ml}");
}

#[test]
fn list_metric_never_worse_than_sc_metric() {
    let order = build_reliability_order(256, &OrderSource::PolarizationWeight).unwrap();
    let spec = PolarCodeSpec::from_order(&order, 128, 0, 3).unwrap();
    let mut sc = SclDecoder::new(256, 1).unwrap();
    let mut scl = SclDecoder::new(256, 8).unwrap();
    let mut s = Stream::new(77, 0);
    let mut worse = 0;
    for _ in 0..500 {
        let info = s.bits(128);
        let c = encode(&info, &spec, &[]).unwrap();
        let llr = bpsk_awgn(&c, 1.0, &mut s);
        let (_, a) = scl_decode_with(&mut sc, &llr, &spec, None).unwrap();
        let (_, b) = scl_decode_with(&mut scl, &llr, &spec, None).unwrap();
        if b.metric > a.metric + 1e-9 {
            worse += 1;
        }
    }
    assert_eq!(worse, 0);
}

#[test]
fn list_decoding_lowers_bler() {
    let order = build_reliability_order(256, &OrderSource::PolarizationWeight).unwrap();
    let spec = PolarCodeSpec::from_order(&order, 128, 0, 3).unwrap();
    let mut sc = SclDecoder::new(256, 1).unwrap();
    let mut scl = SclDecoder::new(256, 8).unwrap();
    let mut s = Stream::new(78, 0);
    let (mut e1, mut e8) = (0, 0);
    for _ in 0..2000 {
        let info = s.bits(128);
        let c = encode(&info, &spec, &[]).unwrap();
        let llr = bpsk_awgn(&c, 2.0, &mut s);
        e1 += (scl_decode_with(&mut sc, &llr, &spec, None).unwrap().0.info != info) as u32;
        e8 += (scl_decode_with(&mut scl, &llr, &spec, None).unwrap().0.info != info) as u32;
    }
    eprintln!("n=256 k=128 @2dB: SC errors {e1}, SCL8 errors {e8}");
    assert!(e8 < e1);
}

#[test]
fn transform_then_hard_decision_identity() {
    let mut s = Stream::new(1, 1);
    let u = s.bits(1024);
    let c = polar_transform(&u).unwrap();
    let llr: Vec<f64> = c.iter().map(|&b| if b == 0 { 12.0 } else { -12.0 }).collect();
    let spec = PolarCodeSpec::new(1024, (0..1024).collect(), vec![], vec![], 0).unwrap();
    let mut dec = SclDecoder::new(1024, 8).unwrap();
    let (res, _) = scl_decode_with(&mut dec, &llr, &spec, None).unwrap();
    assert_eq!(res.info, u);
}
