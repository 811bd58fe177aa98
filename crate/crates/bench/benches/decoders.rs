use criterion::{criterion_group, criterion_main, Criterion};
use psmlc::polar::{
    build_reliability_order, encode, scl_decode_with, CheckNode, OrderSource, PolarCodeSpec,
    SclDecoder,
};
use psmlc::rng::Stream;
use std::hint::black_box;

fn noisy_llrs(c: &[u8], snr_db: f64, s: &mut Stream) -> Vec<f64> {
    let sigma2 = 10f64.powf(-snr_db / 10.0);
    c.iter()
        .map(|&b| 2.0 * ((1.0 - 2.0 * b as f64) + sigma2.sqrt() * s.gaussian()) / sigma2)
        .collect()
}

fn scl(c: &mut Criterion) {
    for (n, k) in [(256usize, 128usize), (1024, 528)] {
        let order = build_reliability_order(n, &OrderSource::PolarizationWeight).unwrap();
        let spec = PolarCodeSpec::from_order(&order, k, 0, 1).unwrap();
        let mut s = Stream::new(1, 0);
        let info = s.bits(k);
        let cw = encode(&info, &spec, &[]).unwrap();
        let llr = noisy_llrs(&cw, 2.0, &mut s);
        for (list, check) in [(1, CheckNode::MinSum), (8, CheckNode::MinSum), (8, CheckNode::Exact)] {
            let mut dec = SclDecoder::with_check_node(n, list, check).unwrap();
            c.bench_function(&format!("scl n={n} L={list} {check:?}"), |b| {
                b.iter(|| scl_decode_with(&mut dec, black_box(&llr), &spec, None).unwrap())
            });
        }
    }
}

criterion_group!(benches, scl);
criterion_main!(benches);
