use psmlc::rng::Stream;

/// Direct estimate of `I(X; Y | H)` in bits with its standard error.
pub fn mi_oracle(pmf: &[f64], m: usize, snr: f64, n: usize, seed: u64) -> (f64, f64) {
    let xs: Vec<f64> = (0..1usize << m).map(|j| (2 * j) as f64 - ((1 << m) - 1) as f64).collect();
    let energy: f64 = pmf.iter().zip(&xs).map(|(p, x)| p * x * x).sum();
    let sigma2 = energy / snr;
    let cdf: Vec<f64> = pmf
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let mut rng = Stream::new(seed, 0);
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let u = rng.uniform();
        let j = cdf.iter().position(|&c| u < c).unwrap_or(xs.len() - 1);
        let h = rng.rayleigh();
        let y = h * xs[j] + sigma2.sqrt() * rng.gaussian();
        let like = |x: f64| (-(y - h * x).powi(2) / (2.0 * sigma2)).exp();
        let py: f64 = pmf.iter().zip(&xs).map(|(p, &x)| p * like(x)).sum();
        let v = (like(xs[j]) / py).log2();
        s1 += v;
        s2 += v * v;
    }
    let mean = s1 / n as f64;
    let var = s2 / n as f64 - mean * mean;
    (mean, (var / n as f64).sqrt())
}
