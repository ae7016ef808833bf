//! The oracle-check suite: self-contained synthetic cases verifying that
//! training recovers ground-truth cross-density-ratio spectra.

use fmca_core::config::PipelineConfig;
use fmca_core::neural::{Activation, OutputHead};
use fmca_core::oracle::{
    discrete_cdr_spectrum, gaussian_cdr_spectrum, mehler_spectrum, spectrum_error,
    train_discrete_fmca, train_gaussian_fmca, DiscreteJoint,
};
use fmca_core::Result;
use rand_chacha::rand_core::SeedableRng;
use ndarray::{arr2, Array2};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub case: String,
    pub metric: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

fn harness_config(
    k: usize,
    hidden: usize,
    iterations: usize,
    head: OutputHead,
    seed: u64,
) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.fmca.projection_dim = k;
    cfg.fmca.hidden_width = hidden;
    cfg.fmca.hidden_count = usize::from(hidden > 0);
    cfg.fmca.learning_rate = 0.01;
    cfg.fmca.iterations = iterations;
    cfg.fmca.batch_size = 512;
    cfg.fmca.activation = Activation::Tanh;
    cfg.fmca.head = head;
    cfg.run.seed = seed;
    cfg
}

/// Runs every registered case; the report has one row per case.
pub fn run_oracle_checks(iterations: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let mut results = Vec::new();

    // Case 1: the 2x2 pmf with spectrum (1.0, 0.6), linear + softmax nets.
    {
        let joint = DiscreteJoint::new(arr2(&[[0.4, 0.1], [0.1, 0.4]]))?;
        let oracle = discrete_cdr_spectrum(&joint)?;
        let cfg = harness_config(2, 0, iterations, OutputHead::Softmax, seed);
        let model = train_discrete_fmca(&joint, &cfg)?;
        let err = spectrum_error(&model.head.sigma, &oracle, 2)?;
        results.push(CheckResult {
            case: "discrete-2x2".into(),
            metric: "max spectrum error (top 2)".into(),
            value: err,
            threshold: 2e-2,
            pass: err < 2e-2,
        });
    }

    // Case 2: uniform diagonal 3x3 pmf; both leading values are exactly 1.
    {
        let n = 3;
        let pmf = Array2::from_shape_fn((n, n), |(i, j)| {
            if i == j {
                1.0 / n as f64
            } else {
                0.0
            }
        });
        let joint = DiscreteJoint::new(pmf)?;
        let oracle = discrete_cdr_spectrum(&joint)?;
        let cfg = harness_config(3, 0, iterations, OutputHead::Softmax, seed + 1);
        let model = train_discrete_fmca(&joint, &cfg)?;
        let err = spectrum_error(&model.head.sigma, &oracle, 2)?;
        results.push(CheckResult {
            case: "discrete-diagonal".into(),
            metric: "max spectrum error (top 2)".into(),
            value: err,
            threshold: 2e-2,
            pass: err < 2e-2,
        });
    }

    // Case 3: independent pmf; the trained second value must stay small.
    {
        let px = [0.5, 0.3, 0.2];
        let pu = [0.25, 0.25, 0.5];
        let pmf = Array2::from_shape_fn((3, 3), |(i, j)| px[i] * pu[j]);
        let joint = DiscreteJoint::new(pmf)?;
        let cfg = harness_config(3, 0, iterations, OutputHead::Softmax, seed + 2);
        let model = train_discrete_fmca(&joint, &cfg)?;
        let sigma2 = model.head.sigma[1];
        results.push(CheckResult {
            case: "discrete-independent".into(),
            metric: "sigma_2".into(),
            value: sigma2,
            threshold: 0.05,
            pass: sigma2 < 0.05,
        });
    }

    // Case 4: three random 4x4 pmfs with the linear head (the softmax
    // simplex constraint stalls recovery of the smaller eigenvalues).
    {
        let mut prng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x4d595df4d0f33173);
        let mut worst: f64 = 0.0;
        for trial in 0..3u64 {
            let w = Array2::from_shape_fn((4, 4), |_| rand::Rng::gen_range(&mut prng, 0.01..1.0));
            let joint = DiscreteJoint::from_weights(w)?;
            let oracle = discrete_cdr_spectrum(&joint)?;
            let cfg = harness_config(4, 0, iterations, OutputHead::Linear, seed + 10 + trial);
            let model = train_discrete_fmca(&joint, &cfg)?;
            worst = worst.max(spectrum_error(&model.head.sigma, &oracle, 4)?);
        }
        results.push(CheckResult {
            case: "discrete-random-4x4".into(),
            metric: "worst max spectrum error (top 4, 3 pmfs)".into(),
            value: worst,
            threshold: 5e-2,
            pass: worst < 5e-2,
        });
    }

    // Case 5: independent Gaussian; sigma_2 near zero after training.
    {
        let mut cfg = harness_config(3, 24, iterations, OutputHead::Linear, seed + 3);
        cfg.fmca.hidden_count = 2;
        cfg.fmca.learning_rate = 0.003;
        let model = train_gaussian_fmca(0.0, 50_000, &cfg)?;
        let sigma2 = model.head.sigma[1];
        results.push(CheckResult {
            case: "gaussian-rho0".into(),
            metric: "sigma_2".into(),
            value: sigma2,
            threshold: 0.05,
            pass: sigma2 < 0.05,
        });
    }

    // Case 6: grid oracle against the closed-form powers of rho.
    {
        let spec = gaussian_cdr_spectrum(0.5, 256, 5.0)?;
        let mehler = mehler_spectrum(0.5, 4);
        let err = (0..4)
            .map(|k| (spec.values[k] - mehler[k]).abs())
            .fold(0.0f64, f64::max);
        results.push(CheckResult {
            case: "gaussian-grid-vs-mehler".into(),
            metric: "max top-4 error".into(),
            value: err,
            threshold: 5e-3,
            pass: err < 5e-3,
        });
    }

    // Case 7: trained Gaussian recovery of the top-4 Mehler values. The
    // higher modes unfold slowly, so this case trains at least 6000
    // iterations regardless of the per-case default.
    {
        let mut cfg = harness_config(
            5,
            48,
            iterations.max(6000),
            OutputHead::Linear,
            seed + 4,
        );
        cfg.fmca.hidden_count = 2;
        cfg.fmca.learning_rate = 0.001;
        let model = train_gaussian_fmca(0.5, 100_000, &cfg)?;
        let oracle = gaussian_cdr_spectrum(0.5, 256, 5.0)?;
        let err = spectrum_error(&model.head.sigma, &oracle, 4)?;
        results.push(CheckResult {
            case: "gaussian-rho05-recovery".into(),
            metric: "max spectrum error (top 4)".into(),
            value: err,
            threshold: 5e-2,
            pass: err < 5e-2,
        });
    }

    Ok(results)
}
