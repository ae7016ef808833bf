//! Criterion benchmarks for the pipeline hot paths: the matrix kernels,
//! one training step at the reference network sizes, bulk projection, and
//! spectral framing.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use fmca_core::fmca::{cost_and_grad, estimate_correlations};
use fmca_core::linalg::{cholesky_logdet, inv_sqrt, svd, SymMatrix};
use fmca_core::neural::{
    adam_step, backward, forward, forward_outputs, Activation, AdamState, NetworkParams,
    OutputHead,
};
use fmca_core::signal::{frame, to_spectral, AudioSignal};
use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_batch(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, d), |_| rng.gen_range(-1.0..1.0))
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> SymMatrix {
    let m = random_batch(rng, n, n);
    let g = m.t().dot(&m);
    let mut s = SymMatrix::from_dense(&g.view());
    s.add_diag(0.1);
    s
}

fn bench_linalg(c: &mut Criterion) {
    let mut group = c.benchmark_group("linalg");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for k in [8usize, 16, 32] {
        let spd = random_spd(&mut rng, k);
        group.bench_with_input(BenchmarkId::new("cholesky_logdet", k), &spd, |b, m| {
            b.iter(|| cholesky_logdet(black_box(m)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("inv_sqrt", k), &spd, |b, m| {
            b.iter(|| inv_sqrt(black_box(m)).unwrap())
        });
        let general = random_batch(&mut rng, k, k);
        group.bench_with_input(BenchmarkId::new("svd", k), &general, |b, m| {
            b.iter(|| svd(black_box(&m.view())).unwrap())
        });
    }
    group.finish();
}

fn bench_training_step(c: &mut Criterion) {
    // One full iteration at the reference operating point: forward both
    // networks, cost gradient, backward, Adam.
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (n, d, h, layers, k) = (512usize, 25usize, 200usize, 3usize, 8usize);
    let mut params_f = NetworkParams::init(d, h, layers, k, Activation::Tanh, &mut rng);
    let mut params_g = NetworkParams::init(d, h, layers, k, Activation::Tanh, &mut rng);
    let mut adam_f = AdamState::new(&params_f, 1e-3);
    let mut adam_g = AdamState::new(&params_g, 1e-3);
    let x = random_batch(&mut rng, n, d);
    let u = random_batch(&mut rng, n, d);

    c.bench_function("training_step/512x25->200x3->8", |b| {
        b.iter(|| {
            let (f_out, tape_f) = forward(&params_f, &x.view(), OutputHead::Softmax).unwrap();
            let (g_out, tape_g) = forward(&params_g, &u.view(), OutputHead::Softmax).unwrap();
            let (cost, d_f, d_g) = cost_and_grad(&f_out.view(), &g_out.view(), 1e-4).unwrap();
            let (grads_f, _) = backward(&params_f, &tape_f, &d_f.view()).unwrap();
            let (grads_g, _) = backward(&params_g, &tape_g, &d_g.view()).unwrap();
            adam_step(&mut params_f, &grads_f, &mut adam_f).unwrap();
            adam_step(&mut params_g, &grads_g, &mut adam_g).unwrap();
            black_box(cost)
        })
    });

    let frames = random_batch(&mut rng, 4096, d);
    c.bench_function("projection_forward/4096x25", |b| {
        b.iter(|| forward_outputs(&params_f, &frames.view(), OutputHead::Softmax).unwrap())
    });

    let f_out = forward_outputs(&params_f, &x.view(), OutputHead::Softmax).unwrap();
    let g_out = forward_outputs(&params_g, &u.view(), OutputHead::Softmax).unwrap();
    c.bench_function("estimate_correlations/512x8", |b| {
        b.iter(|| estimate_correlations(&f_out.view(), &g_out.view(), black_box(1e-4)))
    });
}

fn bench_signal(c: &mut Criterion) {
    let samples: Vec<f64> = (0..8000)
        .map(|i| (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 8000.0).sin() * 0.9)
        .collect();
    let sig = AudioSignal {
        samples,
        sample_rate: 8000,
        label: None,
        speaker_id: None,
        utterance_id: "bench".into(),
    };
    let temporal = frame(&sig, 50, 1).unwrap();
    c.bench_function("to_spectral/7951x50", |b| {
        b.iter(|| to_spectral(black_box(&temporal)).unwrap())
    });
}

criterion_group!(benches, bench_linalg, bench_training_step, bench_signal);
criterion_main!(benches);
