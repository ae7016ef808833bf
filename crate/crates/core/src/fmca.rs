//! The correlation machinery at the center of the pipeline: empirical
//! auto/cross-correlation matrices of the two network outputs, the
//! log-determinant cost and its exact gradient, the paired training loop,
//! and the whitening/rotation head that turns raw network outputs into
//! orthonormal eigenfunction projections.
//!
//! Everything is deterministic given the seed: sampling, initialization,
//! and all reductions run in a fixed order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::PipelineConfig;
use crate::dataset::FrameDataset;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_logdet, inv_sqrt, svd, CholeskyFactor, SymMatrix};
use crate::neural::{
    adam_step, backward, forward, forward_outputs, read_params, write_params, AdamState,
    NetworkParams, OutputHead,
};
use crate::signal::FrameBatch;

/// Empirical second-moment matrices of one paired batch: `r_f` and `r_g`
/// are the K x K output autocorrelations (with epsilon on the diagonal),
/// `p_fg` the cross-correlation, and `r_fg` the assembled 2K x 2K block
/// matrix `[[R_F, P_FG], [P_FG^T, R_G]]`.
#[derive(Debug, Clone)]
pub struct CorrelationSet {
    pub r_f: SymMatrix,
    pub r_g: SymMatrix,
    pub p_fg: Array2<f64>,
    pub r_fg: SymMatrix,
    pub epsilon: f64,
    pub batch_size: usize,
}

/// Estimates the correlation set from paired network outputs (rows are
/// samples): `R_F = F^T F / N + eps I`, `P_FG = F^T G / N`, and the block
/// matrix assembled from those parts so its diagonal carries the same
/// epsilon.
pub fn estimate_correlations(
    f_out: &ArrayView2<f64>,
    g_out: &ArrayView2<f64>,
    epsilon: f64,
) -> CorrelationSet {
    let n = f_out.nrows();
    assert_eq!(n, g_out.nrows(), "paired batches must have equal sizes");
    assert!(n >= 1);
    let k = f_out.ncols();
    assert_eq!(k, g_out.ncols(), "both networks must share K");
    let scale = 1.0 / n as f64;

    let mut r_f = SymMatrix::from_dense(&(f_out.t().dot(f_out) * scale).view());
    r_f.add_diag(epsilon);
    let mut r_g = SymMatrix::from_dense(&(g_out.t().dot(g_out) * scale).view());
    r_g.add_diag(epsilon);
    let p_fg = f_out.t().dot(g_out) * scale;

    let r_fg = SymMatrix::from_fn(2 * k, |i, j| {
        if i < k {
            r_f.get(i, j)
        } else if j < k {
            p_fg[[j, i - k]]
        } else {
            r_g.get(i - k, j - k)
        }
    });

    CorrelationSet {
        r_f,
        r_g,
        p_fg,
        r_fg,
        epsilon,
        batch_size: n,
    }
}

/// The log-determinant cost: `log det R_FG - log det R_F - log det R_G`.
/// Non-positive for epsilon = 0, approaching zero exactly when the two
/// output families are uncorrelated.
pub fn fmca_cost(corr: &CorrelationSet) -> Result<f64> {
    Ok(cholesky_logdet(&corr.r_fg)? - cholesky_logdet(&corr.r_f)? - cholesky_logdet(&corr.r_g)?)
}

/// Gradient of [`fmca_cost`] with respect to each output sample. With
/// `z_i = [f_i; g_i]` stacked, the gradient for `f_i` is
/// `(2/N) * ((R_FG^{-1} z_i)[..K] - R_F^{-1} f_i)`, and symmetrically for
/// `g_i`. Outputs are laid out like the inputs (rows are samples), ready to
/// feed into [`backward`] as upstream gradients.
pub fn fmca_cost_grad(
    f_out: &ArrayView2<f64>,
    g_out: &ArrayView2<f64>,
    epsilon: f64,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let (_, d_f, d_g) = cost_and_grad(f_out, g_out, epsilon)?;
    Ok((d_f, d_g))
}

/// Fused cost + gradient sharing one set of Cholesky factorizations.
pub fn cost_and_grad(
    f_out: &ArrayView2<f64>,
    g_out: &ArrayView2<f64>,
    epsilon: f64,
) -> Result<(f64, Array2<f64>, Array2<f64>)> {
    let corr = estimate_correlations(f_out, g_out, epsilon);
    let n = corr.batch_size;
    let k = f_out.ncols();

    let fac_fg = CholeskyFactor::new(&corr.r_fg)?;
    let fac_f = CholeskyFactor::new(&corr.r_f)?;
    let fac_g = CholeskyFactor::new(&corr.r_g)?;
    let cost = fac_fg.logdet() - fac_f.logdet() - fac_g.logdet();

    // Stacked outputs as columns: Z is 2K x N.
    let mut z = Array2::zeros((2 * k, n));
    for i in 0..n {
        for j in 0..k {
            z[[j, i]] = f_out[[i, j]];
            z[[k + j, i]] = g_out[[i, j]];
        }
    }
    let y = fac_fg.solve_columns(&z.view());
    let a = fac_f.solve_columns(&z.slice(ndarray::s![..k, ..]));
    let b = fac_g.solve_columns(&z.slice(ndarray::s![k.., ..]));

    let scale = 2.0 / n as f64;
    let mut d_f = Array2::zeros((n, k));
    let mut d_g = Array2::zeros((n, k));
    for i in 0..n {
        for j in 0..k {
            d_f[[i, j]] = scale * (y[[j, i]] - a[[j, i]]);
            d_g[[i, j]] = scale * (y[[k + j, i]] - b[[j, i]]);
        }
    }
    Ok((cost, d_f, d_g))
}

/// Whitening transforms and rotations mapping raw network outputs onto
/// orthonormal eigenfunction coordinates, plus the singular-value spectrum.
#[derive(Debug, Clone)]
pub struct ProjectionHead {
    pub w_f: SymMatrix,
    pub w_g: SymMatrix,
    pub q_f: Array2<f64>,
    pub q_g: Array2<f64>,
    pub sigma: Array1<f64>,
}

impl ProjectionHead {
    /// Builds the head from correlation estimates: whiten both sides,
    /// then align by one SVD of the whitened cross-correlation
    /// `P_bar = W_F * P_FG * W_G = Q_F * Sigma * Q_G^T`.
    ///
    /// Each singular-vector pair is sign-fixed so the largest-magnitude
    /// entry of the `q_f` column is positive; otherwise the SVD sign
    /// ambiguity would make projection traces irreproducible.
    pub fn from_correlations(
        r_f: &SymMatrix,
        r_g: &SymMatrix,
        p_fg: &Array2<f64>,
    ) -> Result<Self> {
        let w_f = inv_sqrt(r_f)?;
        let w_g = inv_sqrt(r_g)?;
        let p_bar = w_f.to_dense().dot(p_fg).dot(&w_g.to_dense());
        let decomp = svd(&p_bar.view())?;
        let mut q_f = decomp.left;
        let mut q_g = decomp.right;
        for col in 0..q_f.ncols() {
            let mut arg = 0;
            let mut best = 0.0f64;
            for row in 0..q_f.nrows() {
                let a = q_f[[row, col]].abs();
                if a > best {
                    best = a;
                    arg = row;
                }
            }
            if q_f[[arg, col]] < 0.0 {
                for row in 0..q_f.nrows() {
                    q_f[[row, col]] = -q_f[[row, col]];
                }
                for row in 0..q_g.nrows() {
                    q_g[[row, col]] = -q_g[[row, col]];
                }
            }
        }
        Ok(ProjectionHead {
            w_f,
            w_g,
            q_f,
            q_g,
            sigma: decomp.values,
        })
    }

    /// Head from explicitly paired outputs (rows are samples).
    pub fn from_paired_outputs(
        f_out: &ArrayView2<f64>,
        g_out: &ArrayView2<f64>,
        epsilon: f64,
    ) -> Result<Self> {
        let corr = estimate_correlations(f_out, g_out, epsilon);
        ProjectionHead::from_correlations(&corr.r_f, &corr.r_g, &corr.p_fg)
    }

    /// The combined map `Q_F^T * W_F` applied to f-outputs at inference.
    pub fn transform_f(&self) -> Array2<f64> {
        self.q_f.t().dot(&self.w_f.to_dense())
    }

    pub fn dim(&self) -> usize {
        self.sigma.len()
    }
}

/// A trained pair of projector networks with their projection head and the
/// configuration snapshot that produced them. The g-network is kept for
/// head refitting but unused at inference.
#[derive(Debug, Clone)]
pub struct FmcaModel {
    pub params_f: NetworkParams,
    pub params_g: NetworkParams,
    pub head: ProjectionHead,
    pub config: PipelineConfig,
}

impl FmcaModel {
    /// Projects one utterance: row `i` is `Q_F^T W_F f(frame_i)`, in
    /// temporal order.
    pub fn project(&self, batch: &FrameBatch) -> Result<Array2<f64>> {
        if batch.width() != self.params_f.input_dim() {
            return Err(Error::ShapeMismatch {
                what: "projection input width",
                expected: self.params_f.input_dim(),
                got: batch.width(),
            });
        }
        let out = forward_outputs(&self.params_f, &batch.frames.view(), self.config.fmca.head)?;
        Ok(out.dot(&self.head.transform_f().t()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        write_model(&mut buf, self)?;
        crate::dataset::write_atomic(path, &buf)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        read_model(&mut bytes.as_slice())
    }
}

const MODEL_MAGIC: &[u8; 8] = b"FMCAMODL";
const MODEL_VERSION: u32 = 1;

/// Model container: magic, version, config snapshot (TOML), both network
/// parameter blobs, then the head matrices and spectrum as 64-bit
/// little-endian floats.
pub fn write_model<W: Write>(w: &mut W, model: &FmcaModel) -> Result<()> {
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&MODEL_VERSION.to_le_bytes())?;
    let cfg = model.config.to_toml_string();
    w.write_all(&(cfg.len() as u32).to_le_bytes())?;
    w.write_all(cfg.as_bytes())?;
    write_params(w, &model.params_f)?;
    write_params(w, &model.params_g)?;
    let k = model.head.dim();
    w.write_all(&(k as u32).to_le_bytes())?;
    let head = &model.head;
    for m in [&head.w_f.to_dense(), &head.w_g.to_dense(), &head.q_f, &head.q_g] {
        for v in m.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    for v in head.sigma.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_model<R: Read>(r: &mut R) -> Result<FmcaModel> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MODEL_MAGIC {
        return Err(Error::BadContainer {
            reason: "bad model magic".into(),
        });
    }
    let version = read_u32(r)?;
    if version != MODEL_VERSION {
        return Err(Error::BadContainer {
            reason: format!("unsupported model version {version}"),
        });
    }
    let cfg_len = read_u32(r)? as usize;
    let mut cfg_bytes = vec![0u8; cfg_len];
    r.read_exact(&mut cfg_bytes)?;
    let cfg_text = String::from_utf8(cfg_bytes).map_err(|e| Error::BadContainer {
        reason: format!("config snapshot is not UTF-8: {e}"),
    })?;
    let config = PipelineConfig::from_toml_str(&cfg_text)?;
    let params_f = read_params(r)?;
    let params_g = read_params(r)?;
    let k = read_u32(r)? as usize;
    let mut mats = Vec::with_capacity(4);
    for _ in 0..4 {
        let vals = read_f64s(r, k * k)?;
        mats.push(Array2::from_shape_vec((k, k), vals).expect("square"));
    }
    let sigma = Array1::from(read_f64s(r, k)?);
    let q_g = mats.pop().expect("4 matrices");
    let q_f = mats.pop().expect("3 matrices");
    let w_g = SymMatrix::from_dense(&mats.pop().expect("2 matrices").view());
    let w_f = SymMatrix::from_dense(&mats.pop().expect("1 matrix").view());
    Ok(FmcaModel {
        params_f,
        params_g,
        head: ProjectionHead {
            w_f,
            w_g,
            q_f,
            q_g,
            sigma,
        },
        config,
    })
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64s<R: Read>(r: &mut R, count: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; count * 8];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

/// Draws same-class frame pairs: the first frame from a uniformly chosen
/// utterance, the second from a different utterance of the same class,
/// frames uniform over time within each utterance.
#[derive(Debug, Clone)]
pub struct PairSampler {
    frame_counts: Vec<usize>,
    labels: Vec<u32>,
    /// Utterances per class, in dataset order; parallel to `class_of`.
    class_members: Vec<Vec<usize>>,
    /// Position of each utterance inside its class member list.
    pos_in_class: Vec<usize>,
    /// Class slot per utterance.
    class_of: Vec<usize>,
    pool: Vec<usize>,
}

impl PairSampler {
    /// Indexes the selected utterances per class. Fails with
    /// [`Error::DegenerateClass`] when any class has fewer than two.
    pub fn new(dataset: &FrameDataset, indices: &[usize]) -> Result<Self> {
        assert!(!indices.is_empty(), "sampler needs a non-empty dataset");
        let mut labels_sorted: Vec<u32> = indices
            .iter()
            .map(|&i| dataset.utterances[i].label)
            .collect();
        labels_sorted.sort_unstable();
        labels_sorted.dedup();

        let n = dataset.len();
        let mut class_members: Vec<Vec<usize>> = vec![Vec::new(); labels_sorted.len()];
        let mut class_of = vec![usize::MAX; n];
        let mut pos_in_class = vec![usize::MAX; n];
        for &utt in indices {
            let label = dataset.utterances[utt].label;
            let slot = labels_sorted.binary_search(&label).expect("known label");
            pos_in_class[utt] = class_members[slot].len();
            class_members[slot].push(utt);
            class_of[utt] = slot;
        }
        for (slot, members) in class_members.iter().enumerate() {
            if members.len() < 2 {
                return Err(Error::DegenerateClass {
                    label: labels_sorted[slot],
                    utterances: members.len(),
                });
            }
        }
        Ok(PairSampler {
            frame_counts: dataset.batches.iter().map(|b| b.num_frames()).collect(),
            labels: dataset.utterances.iter().map(|u| u.label).collect(),
            class_members,
            pos_in_class,
            class_of,
            pool: indices.to_vec(),
        })
    }

    /// One pair of (utterance, frame) coordinates sharing a class label but
    /// never the same utterance.
    pub fn sample_pair(&self, rng: &mut ChaCha8Rng) -> ((usize, usize), (usize, usize)) {
        let u1 = self.pool[rng.gen_range(0..self.pool.len())];
        let members = &self.class_members[self.class_of[u1]];
        let mut idx = rng.gen_range(0..members.len() - 1);
        if idx >= self.pos_in_class[u1] {
            idx += 1;
        }
        let u2 = members[idx];
        let t1 = rng.gen_range(0..self.frame_counts[u1]);
        let t2 = rng.gen_range(0..self.frame_counts[u2]);
        ((u1, t1), (u2, t2))
    }

    pub fn label_of(&self, utt: usize) -> u32 {
        self.labels[utt]
    }
}

/// Cost trajectory sample: (iteration, cost before the update).
pub type CostPoint = (usize, f64);

/// Outcome of one training run. When Adam hit a non-finite gradient the
/// parameters are rolled back to the last logged checkpoint and
/// `diverged_at` records the failing iteration.
#[derive(Debug)]
pub struct TrainLoopReport {
    pub trajectory: Vec<CostPoint>,
    pub diverged_at: Option<usize>,
}

/// Paired-batch training loop shared by the speech pipeline and the
/// synthetic oracle harnesses. `fill_batch` writes one batch of paired
/// inputs into the two buffers; both networks then descend the log-det
/// cost with Adam. The cost is logged every 50 iterations and at the end.
#[allow(clippy::too_many_arguments)]
pub fn run_training_loop(
    params_f: &mut NetworkParams,
    params_g: &mut NetworkParams,
    head: OutputHead,
    epsilon: f64,
    learning_rate: f64,
    iterations: usize,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
    mut fill_batch: impl FnMut(&mut ChaCha8Rng, &mut Array2<f64>, &mut Array2<f64>),
) -> Result<TrainLoopReport> {
    let mut x = Array2::zeros((batch_size, params_f.input_dim()));
    let mut u = Array2::zeros((batch_size, params_g.input_dim()));
    let mut adam_f = AdamState::new(params_f, learning_rate);
    let mut adam_g = AdamState::new(params_g, learning_rate);
    let mut trajectory = Vec::new();
    let mut checkpoint = (params_f.clone(), params_g.clone());

    if iterations == 0 {
        fill_batch(rng, &mut x, &mut u);
        let f_out = forward_outputs(params_f, &x.view(), head)?;
        let g_out = forward_outputs(params_g, &u.view(), head)?;
        let corr = estimate_correlations(&f_out.view(), &g_out.view(), epsilon);
        trajectory.push((0, fmca_cost(&corr)?));
        return Ok(TrainLoopReport {
            trajectory,
            diverged_at: None,
        });
    }

    for iter in 0..iterations {
        fill_batch(rng, &mut x, &mut u);
        let (f_out, tape_f) = forward(params_f, &x.view(), head)?;
        let (g_out, tape_g) = forward(params_g, &u.view(), head)?;
        let (cost, d_f, d_g) = cost_and_grad(&f_out.view(), &g_out.view(), epsilon)?;

        if iter % 50 == 0 {
            trajectory.push((iter, cost));
            checkpoint = (params_f.clone(), params_g.clone());
        }

        let (grads_f, _) = backward(params_f, &tape_f, &d_f.view())?;
        let (grads_g, _) = backward(params_g, &tape_g, &d_g.view())?;
        let stepped = adam_step(params_f, &grads_f, &mut adam_f)
            .and_then(|_| adam_step(params_g, &grads_g, &mut adam_g));
        if let Err(Error::NonFiniteGradient { .. }) = stepped {
            *params_f = checkpoint.0;
            *params_g = checkpoint.1;
            log::error!("non-finite gradient at iteration {iter}; rolled back to checkpoint");
            return Ok(TrainLoopReport {
                trajectory,
                diverged_at: Some(iter),
            });
        }
        stepped?;

        if iter + 1 == iterations && iter % 50 != 0 {
            trajectory.push((iter, cost));
        }
    }
    Ok(TrainLoopReport {
        trajectory,
        diverged_at: None,
    })
}

/// A trained model plus its cost trajectory.
#[derive(Debug)]
pub struct FmcaTraining {
    pub model: FmcaModel,
    pub trajectory: Vec<CostPoint>,
    pub diverged_at: Option<usize>,
}

/// Trains the twin networks on same-class frame pairs drawn from the
/// selected utterances, then fits the projection head over the full
/// selection. Runs `config.fmca.iterations` iterations of batched Adam on
/// the log-det cost.
pub fn train_fmca(
    dataset: &FrameDataset,
    indices: &[usize],
    config: &PipelineConfig,
) -> Result<FmcaTraining> {
    config.validate()?;
    if indices.is_empty() {
        return Err(Error::InsufficientData {
            reason: "no utterances selected for training".into(),
        });
    }
    let width = dataset.batches[indices[0]].width();
    if width != config.input_dim() {
        return Err(Error::ShapeMismatch {
            what: "frame width vs configured input width",
            expected: config.input_dim(),
            got: width,
        });
    }

    let sampler = PairSampler::new(dataset, indices)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.run.seed);
    let fc = &config.fmca;
    let mut params_f = NetworkParams::init(
        width,
        fc.hidden_width,
        fc.hidden_count,
        fc.projection_dim,
        fc.activation,
        &mut rng,
    );
    let mut params_g = NetworkParams::init(
        width,
        fc.hidden_width,
        fc.hidden_count,
        fc.projection_dim,
        fc.activation,
        &mut rng,
    );

    let report = run_training_loop(
        &mut params_f,
        &mut params_g,
        fc.head,
        fc.epsilon,
        fc.learning_rate,
        fc.iterations,
        fc.batch_size,
        &mut rng,
        |rng, x, u| {
            for row in 0..x.nrows() {
                let ((u1, t1), (u2, t2)) = sampler.sample_pair(rng);
                x.row_mut(row).assign(&dataset.batches[u1].frames.row(t1));
                u.row_mut(row).assign(&dataset.batches[u2].frames.row(t2));
            }
        },
    )?;

    let head = build_head(&params_f, &params_g, dataset, indices, config)?;
    Ok(FmcaTraining {
        model: FmcaModel {
            params_f,
            params_g,
            head,
            config: config.clone(),
        },
        trajectory: report.trajectory,
        diverged_at: report.diverged_at,
    })
}

/// Fits the projection head over the full selected frame set.
///
/// `R_F` and `R_G` are plain second moments over every frame. The pairing
/// distribution draws the two frames independently within a class, so the
/// cross term factorizes through class means:
/// `P_FG = sum_c pi_c * mean_c(f) * mean_c(g)^T` with `pi_c` the class's
/// share of frames. Keeping all three estimates on the same sampling
/// measure preserves the spectrum bound `sigma_k <= 1`.
pub fn build_head(
    params_f: &NetworkParams,
    params_g: &NetworkParams,
    dataset: &FrameDataset,
    indices: &[usize],
    config: &PipelineConfig,
) -> Result<ProjectionHead> {
    let k = params_f.output_dim();
    let head = config.fmca.head;
    let classes = {
        let mut l: Vec<u32> = indices.iter().map(|&i| dataset.utterances[i].label).collect();
        l.sort_unstable();
        l.dedup();
        l
    };
    let mut s_ff = Array2::<f64>::zeros((k, k));
    let mut s_gg = Array2::<f64>::zeros((k, k));
    let mut sum_f = vec![Array1::<f64>::zeros(k); classes.len()];
    let mut sum_g = vec![Array1::<f64>::zeros(k); classes.len()];
    let mut count = vec![0usize; classes.len()];

    for &utt in indices {
        let batch = &dataset.batches[utt];
        let label = dataset.utterances[utt].label;
        let slot = classes.binary_search(&label).expect("known label");
        let f_out = forward_outputs(params_f, &batch.frames.view(), head)?;
        let g_out = forward_outputs(params_g, &batch.frames.view(), head)?;
        s_ff += &f_out.t().dot(&f_out);
        s_gg += &g_out.t().dot(&g_out);
        sum_f[slot] += &f_out.sum_axis(ndarray::Axis(0));
        sum_g[slot] += &g_out.sum_axis(ndarray::Axis(0));
        count[slot] += batch.num_frames();
    }

    let total: usize = count.iter().sum();
    if total == 0 {
        return Err(Error::InsufficientData {
            reason: "selected utterances contain no frames".into(),
        });
    }
    let total_f = total as f64;
    let mut r_f = SymMatrix::from_dense(&(&s_ff / total_f).view());
    r_f.add_diag(config.fmca.epsilon);
    let mut r_g = SymMatrix::from_dense(&(&s_gg / total_f).view());
    r_g.add_diag(config.fmca.epsilon);

    let mut p_fg = Array2::<f64>::zeros((k, k));
    for slot in 0..classes.len() {
        if count[slot] == 0 {
            continue;
        }
        let w = 1.0 / (total_f * count[slot] as f64);
        for i in 0..k {
            for j in 0..k {
                p_fg[[i, j]] += w * sum_f[slot][i] * sum_g[slot][j];
            }
        }
    }

    ProjectionHead::from_correlations(&r_f, &r_g, &p_fg)
}

/// Writes per-utterance projection rows: `utt,frame_idx,phi_1..phi_K`.
pub fn export_trace_csv<W: Write>(w: &mut W, utt_id: &str, trace: &Array2<f64>) -> Result<()> {
    for (i, row) in trace.rows().into_iter().enumerate() {
        write!(w, "{utt_id},{i}")?;
        for v in row {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Header matching [`export_trace_csv`] rows.
pub fn trace_csv_header(k: usize) -> String {
    let mut s = String::from("utt,frame_idx");
    for i in 1..=k {
        s.push_str(&format!(",phi_{i}"));
    }
    s
}
