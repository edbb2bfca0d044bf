//! Deterministic synthetic adapter libraries and query workloads.
//!
//! Each generated adapter amplifies a d-dimensional task subspace by a
//! gain factor relative to other directions. Subspaces are drawn inside
//! the row space of the A matrix, which lets `B` be solved for exactly:
//! with `A = U_a S V_a'` and an orthogonal in-rowspace frame `W = V_a Wc`,
//! setting `B = U_hat D Wc' S^-1 U_a'` gives `B A x = U_hat D W' x`, so the
//! response to a query is the gain profile `D` applied to the query's
//! coordinates in the frame. Off-rowspace input produces no response.
//!
//! Arrow-adversarial pairs embed scaled, rotated copies of a 2x2 pattern
//! whose top singular direction disagrees with its norm-maximizing input:
//! adapter C = diag(2, 1) aligned with the probe query, adapter D with
//! singular values (3, 1) rotated 45 degrees away. On the probe, arrow
//! scoring picks C while the activation norm favors D.
//!
//! All randomness flows from a ChaCha20 stream seeded by the spec, so
//! generation is a pure function of the spec and reproducible across
//! platforms. The generator name and seed are recorded in library
//! metadata.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::adapter::AdapterLibrary;
use crate::error::{ContainerError, Error, Result};
use crate::linalg::{self, Matrix, ThinSvd, Vector};
use crate::routing;

const GENERATOR_NAME: &str = "chacha20";
const QUERY_SEED_SALT: u64 = 0x712a_9dd2_8f6c_3b41;

/// Parameters for synthetic library generation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_adapters: usize,
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub shared_a: bool,
    /// Dimension of each adapter's task subspace (d <= r).
    pub task_subspace_dim: usize,
    /// In-subspace amplification relative to filler directions (> 1).
    pub signal_gain: f64,
    /// Noise mixed into queries: x = normalize(signal + noise_level * e).
    pub noise_level: f64,
    /// Optional per-adapter multipliers on B, for norm-bias scenarios.
    pub bias_scales: Option<Vec<f64>>,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_adapters == 0 {
            return Err(Error::InvalidSpec("n_adapters must be positive".into()));
        }
        if self.m == 0 || self.n == 0 || self.r == 0 {
            return Err(Error::InvalidSpec("dimensions must be positive".into()));
        }
        if self.r > self.m.min(self.n) {
            return Err(Error::InvalidSpec(format!(
                "rank {} exceeds min(m={}, n={})",
                self.r, self.m, self.n
            )));
        }
        if self.task_subspace_dim == 0 || self.task_subspace_dim > self.n {
            return Err(Error::InvalidSpec(format!(
                "task_subspace_dim {} out of range 1..={}",
                self.task_subspace_dim, self.n
            )));
        }
        if self.task_subspace_dim > self.r {
            return Err(Error::InvalidSpec(format!(
                "task_subspace_dim {} exceeds rank {}: a rank-{} update cannot \
                 amplify a larger subspace",
                self.task_subspace_dim, self.r, self.r
            )));
        }
        if self.signal_gain <= 1.0 || !self.signal_gain.is_finite() {
            return Err(Error::InvalidSpec("signal_gain must be finite and > 1".into()));
        }
        if self.noise_level < 0.0 || !self.noise_level.is_finite() {
            return Err(Error::InvalidSpec("noise_level must be finite and >= 0".into()));
        }
        if let Some(scales) = &self.bias_scales {
            if scales.len() != self.n_adapters {
                return Err(Error::InvalidSpec(format!(
                    "bias_scales has {} entries for {} adapters",
                    scales.len(),
                    self.n_adapters
                )));
            }
            if scales.iter().any(|s| *s <= 0.0 || !s.is_finite()) {
                return Err(Error::InvalidSpec("bias_scales must be positive".into()));
            }
        }
        Ok(())
    }
}

/// A query vector with its task of origin and the norm-maximizing adapter
/// computed by direct scoring.
#[derive(Debug, Clone)]
pub struct LabeledQuery {
    pub x: Vector,
    pub task: usize,
    pub oracle_norm_winner: usize,
}

/// Per-adapter A factorization pieces reused across the construction.
struct ABasis {
    a: Matrix,
    /// Right singular basis of A: n x r, orthonormal, spans rowspace(A).
    v_basis: Matrix,
    /// `inv_core = S^-1 U_a'` (r x r): right-multiplying a rowspace-frame
    /// transpose by this yields the B that realizes the frame through A.
    inv_core: Matrix,
}

fn factor_a(a: Matrix) -> Result<ABasis> {
    let svd = linalg::thin_svd(&a)?;
    let ThinSvd { u, s, v } = svd;
    let r = s.dim();
    if s.get(r - 1) <= 1e-12 * s.get(0).max(1.0) {
        return Err(Error::InvalidSpec(
            "A matrix is numerically rank-deficient; choose another seed".into(),
        ));
    }
    // inv_core = diag(1/s) * u'
    let mut inv_core = Matrix::zeros(r, r);
    for i in 0..r {
        for j in 0..r {
            inv_core.set(i, j, u.get(j, i) / s.get(i));
        }
    }
    Ok(ABasis {
        a,
        v_basis: v,
        inv_core,
    })
}

fn gauss_matrix(rng: &mut ChaCha20Rng, rows: usize, cols: usize, sd: f64) -> Matrix {
    let normal = Normal::new(0.0, sd).expect("positive standard deviation");
    let data: Vec<f64> = (0..rows * cols).map(|_| normal.sample(rng)).collect();
    Matrix::new(rows, cols, data).expect("gaussian draws are finite")
}

fn gauss_unit_vector(rng: &mut ChaCha20Rng, dim: usize) -> Vector {
    loop {
        let v = gauss_matrix(rng, dim, 1, 1.0);
        let norm = v.frobenius_norm();
        if norm > 1e-12 {
            return Vector::new(v.as_slice().iter().map(|x| x / norm).collect())
                .expect("normalized vector is finite");
        }
    }
}

/// Random matrix with orthonormal columns via QR of a Gaussian draw.
fn random_orthonormal_cols(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> Result<Matrix> {
    Ok(linalg::reduced_qr(&gauss_matrix(rng, rows, cols, 1.0))?.q)
}

/// Everything `construct` produces: the library plus the in-rowspace frame
/// coordinates needed to sample task queries later.
struct Construction {
    library: AdapterLibrary,
    /// Per adapter: (v_basis reference index, Wc frame r x r). Shared-A
    /// libraries share basis 0.
    bases: Vec<ABasis>,
    frames: Vec<(usize, Matrix)>,
}

impl Construction {
    /// Task-subspace signal for adapter `i` with coefficients `c` (dim d):
    /// `x = V_basis * Wc[:, :d] * c`, a unit vector when c is unit.
    fn task_signal(&self, i: usize, c: &[f64]) -> Vector {
        let (basis_idx, wc) = &self.frames[i];
        let basis = &self.bases[*basis_idx].v_basis;
        let r = wc.rows();
        let mut coords = vec![0.0; r];
        for (row, coord) in coords.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, cj) in c.iter().enumerate() {
                acc += wc.get(row, j) * cj;
            }
            *coord = acc;
        }
        let mut out = vec![0.0; basis.rows()];
        for (row, item) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (col, coord) in coords.iter().enumerate() {
                acc += basis.get(row, col) * coord;
            }
            *item = acc;
        }
        Vector::new(out).expect("signal vector is finite")
    }
}

fn construct(spec: &SynthSpec) -> Result<Construction> {
    spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let (m, n, r, d) = (spec.m, spec.n, spec.r, spec.task_subspace_dim);
    let sd_a = 1.0 / r as f64;

    let mut bases = Vec::new();
    if spec.shared_a {
        bases.push(factor_a(gauss_matrix(&mut rng, r, n, sd_a))?);
    }

    let mut frames = Vec::with_capacity(spec.n_adapters);
    let mut adapters_b = Vec::with_capacity(spec.n_adapters);
    for i in 0..spec.n_adapters {
        let basis_idx = if spec.shared_a {
            0
        } else {
            bases.push(factor_a(gauss_matrix(&mut rng, r, n, sd_a))?);
            bases.len() - 1
        };
        let wc = random_orthonormal_cols(&mut rng, r, r)?;
        let u_hat = random_orthonormal_cols(&mut rng, m, r)?;

        // core = D * Wc' * inv_core, with D = diag(g,...,g,1,...,1).
        let mut core = wc.transpose().matmul(&bases[basis_idx].inv_core)?;
        for row in 0..d {
            for col in 0..r {
                core.set(row, col, core.get(row, col) * spec.signal_gain);
            }
        }
        let mut b = u_hat.matmul(&core)?;
        if let Some(scales) = &spec.bias_scales {
            b = b.scale(scales[i]);
        }
        adapters_b.push((format!("task{i:03}"), b));
        frames.push((basis_idx, wc));
    }

    let mut library = if spec.shared_a {
        let shared = bases[0].a.clone();
        AdapterLibrary::new_shared(shared, adapters_b)?
    } else {
        let triples = adapters_b
            .into_iter()
            .zip(&bases)
            .map(|((id, b), basis)| (id, b, basis.a.clone()))
            .collect();
        AdapterLibrary::new_unique(triples)?
    };

    write_meta(&mut library, spec, &bases, &frames);
    Ok(Construction {
        library,
        bases,
        frames,
    })
}

fn write_meta(
    library: &mut AdapterLibrary,
    spec: &SynthSpec,
    bases: &[ABasis],
    frames: &[(usize, Matrix)],
) {
    let meta = library.meta_mut();
    meta.insert("generator".into(), GENERATOR_NAME.into());
    meta.insert("seed".into(), spec.seed.to_string());
    meta.insert("signal_gain".into(), format!("{}", spec.signal_gain));
    meta.insert("noise_level".into(), format!("{}", spec.noise_level));
    meta.insert(
        "task_subspace_dim".into(),
        spec.task_subspace_dim.to_string(),
    );
    if spec.bias_scales.is_some() {
        meta.insert("biased".into(), "true".into());
    }

    // Packing feasibility: N d-dimensional subspaces can only be mutually
    // orthogonal inside a space as large as the frames allow.
    let d = spec.task_subspace_dim;
    let capacity = if spec.shared_a { spec.r } else { spec.n };
    if spec.n_adapters * d > capacity {
        meta.insert(
            "packing_warning".into(),
            format!(
                "{} subspaces of dim {d} cannot be orthogonal in dim {capacity}",
                spec.n_adapters
            ),
        );
    }

    // Pairwise coherence: largest singular value of T_i' T_j, i.e. the
    // cosine of the smallest principal angle. Shared-A frames live in one
    // basis, so the product reduces to frame coordinates.
    if spec.n_adapters >= 2 && spec.n_adapters <= 128 {
        let mut max_c: f64 = 0.0;
        let mut sum = 0.0;
        let mut pairs = 0usize;
        for i in 0..frames.len() {
            for j in i + 1..frames.len() {
                let ti = task_cols(frames, bases, i, d);
                let tj = task_cols(frames, bases, j, d);
                let prod = ti.transpose().matmul(&tj).expect("dims agree");
                let top = linalg::thin_svd(&prod)
                    .map(|svd| svd.s.get(0))
                    .unwrap_or(1.0);
                max_c = max_c.max(top);
                sum += top;
                pairs += 1;
            }
        }
        meta.insert("coherence_max".into(), format!("{max_c:.6}"));
        meta.insert(
            "coherence_mean".into(),
            format!("{:.6}", sum / pairs as f64),
        );
    }
}

/// Task basis of adapter `i` as an explicit matrix (rowspace coordinates
/// for shared A, ambient coordinates otherwise).
fn task_cols(frames: &[(usize, Matrix)], bases: &[ABasis], i: usize, d: usize) -> Matrix {
    let (basis_idx, wc) = &frames[i];
    let shared = bases.len() == 1;
    if shared {
        let mut t = Matrix::zeros(wc.rows(), d);
        for row in 0..wc.rows() {
            for col in 0..d {
                t.set(row, col, wc.get(row, col));
            }
        }
        t
    } else {
        let basis = &bases[*basis_idx].v_basis;
        let mut t = Matrix::zeros(basis.rows(), d);
        let full = basis.matmul(wc).expect("dims agree");
        for row in 0..basis.rows() {
            for col in 0..d {
                t.set(row, col, full.get(row, col));
            }
        }
        t
    }
}

/// Generates a library: adapter `i` amplifies its task subspace by the
/// spec's gain; deterministic in the seed.
pub fn gen_library(spec: &SynthSpec) -> Result<AdapterLibrary> {
    construct(spec).map(|c| c.library)
}

/// Generates labeled queries for a library produced by [`gen_library`]
/// with the same spec: `per_task` queries per adapter, each a unit vector
/// of subspace signal plus isotropic noise, labeled with its task and the
/// norm-max oracle winner.
pub fn gen_queries(
    lib: &AdapterLibrary,
    spec: &SynthSpec,
    per_task: usize,
) -> Result<Vec<LabeledQuery>> {
    gen_queries_seeded(lib, spec, per_task, spec.seed ^ QUERY_SEED_SALT)
}

/// [`gen_queries`] with an explicit query-stream seed, so one library can
/// produce disjoint query sets (calibration vs. evaluation).
pub fn gen_queries_seeded(
    lib: &AdapterLibrary,
    spec: &SynthSpec,
    per_task: usize,
    query_seed: u64,
) -> Result<Vec<LabeledQuery>> {
    let c = construct(spec)?;
    if lib.dims() != c.library.dims()
        || lib.n_adapters() != c.library.n_adapters()
        || lib.adapter(0).b.as_slice() != c.library.adapter(0).b.as_slice()
    {
        return Err(Error::InvalidSpec(
            "library does not match the generator spec".into(),
        ));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(query_seed);
    let mut queries = Vec::with_capacity(per_task * lib.n_adapters());
    for task in 0..lib.n_adapters() {
        for _ in 0..per_task {
            let x = sample_query(&c, task, spec, &mut rng)?;
            let oracle = routing::select(&routing::score_naive(lib, &x)?)?;
            queries.push(LabeledQuery {
                x,
                task,
                oracle_norm_winner: oracle,
            });
        }
    }
    Ok(queries)
}

fn sample_query(
    c: &Construction,
    task: usize,
    spec: &SynthSpec,
    rng: &mut ChaCha20Rng,
) -> Result<Vector> {
    let coeff = gauss_unit_vector(rng, spec.task_subspace_dim);
    let signal = c.task_signal(task, coeff.as_slice());
    let x = if spec.noise_level > 0.0 {
        let e = gauss_unit_vector(rng, spec.n);
        loop {
            let mixed = signal.add(&e.scale(spec.noise_level))?;
            let norm = linalg::norm2(&mixed);
            if norm > 1e-12 {
                break mixed.scale(1.0 / norm);
            }
        }
    } else {
        signal
    };
    Ok(x)
}

/// The literal 2x2 counterexample pair as a shared-A library (A = I),
/// along with the probe input x = (1, 0). Arrow scoring selects adapter 0;
/// the activation norm selects adapter 1.
pub fn counterexample() -> (AdapterLibrary, Vector) {
    let sqrt2 = std::f64::consts::SQRT_2;
    let c = Matrix::from_rows(&[&[2.0, 0.0], &[0.0, 1.0]]).expect("static");
    let d = Matrix::from_rows(&[
        &[3.0 / sqrt2, 3.0 / sqrt2],
        &[1.0 / sqrt2, -1.0 / sqrt2],
    ])
    .expect("static");
    let lib = AdapterLibrary::new_shared(
        Matrix::identity(2),
        vec![("c".to_string(), c), ("d".to_string(), d)],
    )
    .expect("static library is valid");
    let x = Vector::new(vec![1.0, 0.0]).expect("static");
    (lib, x)
}

/// Library of `count` adversarial pairs embedded into (m, n) space with
/// rank 2*count, plus one probe query per pair on which arrow and naive
/// scoring provably disagree.
pub fn gen_arrow_adversarial(
    count: usize,
    m: usize,
    n: usize,
    seed: u64,
) -> Result<(AdapterLibrary, Vec<LabeledQuery>)> {
    if count == 0 {
        return Err(Error::InvalidSpec("count must be positive".into()));
    }
    let spec = SynthSpec {
        seed,
        n_adapters: 2 * count,
        m,
        n,
        r: 2 * count,
        shared_a: true,
        task_subspace_dim: 1,
        signal_gain: 1.5,
        noise_level: 0.0,
        bias_scales: None,
    };
    gen_mixed(&spec, count, 0)
}

/// Library mixing `spec.n_adapters - 2 * n_pairs` task adapters with
/// `n_pairs` adversarial pairs (appended last), plus `per_task` queries per
/// task adapter and one probe query per pair.
///
/// Pair frames are drawn mutually orthogonal inside the rowspace of the
/// shared A, so probe queries excite only their own pair; generation
/// verifies the arrow/naive disagreement on every probe and fails rather
/// than emit a library that does not exhibit it. Keep the signal gain
/// below 2 so task adapters cannot outscore an embedded pair on its probe.
pub fn gen_mixed(
    spec: &SynthSpec,
    n_pairs: usize,
    per_task: usize,
) -> Result<(AdapterLibrary, Vec<LabeledQuery>)> {
    spec.validate()?;
    if !spec.shared_a {
        return Err(Error::SharedARequired("adversarial pair embedding"));
    }
    if n_pairs == 0 {
        return Err(Error::InvalidSpec("n_pairs must be positive".into()));
    }
    let n_normal = spec
        .n_adapters
        .checked_sub(2 * n_pairs)
        .ok_or_else(|| Error::InvalidSpec("n_adapters < 2 * n_pairs".into()))?;
    if 2 * n_pairs > spec.r {
        return Err(Error::InvalidSpec(format!(
            "rank {} cannot host {n_pairs} orthogonal pair frames",
            spec.r
        )));
    }

    let sqrt2 = std::f64::consts::SQRT_2;
    let pattern_c = Matrix::from_rows(&[&[2.0, 0.0], &[0.0, 1.0]]).expect("static");
    let pattern_d = Matrix::from_rows(&[
        &[3.0 / sqrt2, 3.0 / sqrt2],
        &[1.0 / sqrt2, -1.0 / sqrt2],
    ])
    .expect("static");

    // Normal adapters first, from the plain construction.
    let normal_spec = SynthSpec {
        n_adapters: n_normal.max(1),
        ..spec.clone()
    };
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let (m, n, r, d) = (spec.m, spec.n, spec.r, spec.task_subspace_dim);
    let basis = factor_a(gauss_matrix(&mut rng, r, n, 1.0 / r as f64))?;

    let mut ids_and_b: Vec<(String, Matrix)> = Vec::with_capacity(spec.n_adapters);
    let mut frames = Vec::with_capacity(n_normal);
    for i in 0..n_normal {
        let wc = random_orthonormal_cols(&mut rng, r, r)?;
        let u_hat = random_orthonormal_cols(&mut rng, m, r)?;
        let mut core = wc.transpose().matmul(&basis.inv_core)?;
        for row in 0..d {
            for col in 0..r {
                core.set(row, col, core.get(row, col) * spec.signal_gain);
            }
        }
        let mut b = u_hat.matmul(&core)?;
        if let Some(scales) = &spec.bias_scales {
            b = b.scale(scales[i]);
        }
        ids_and_b.push((format!("task{i:03}"), b));
        frames.push((0usize, wc));
    }

    // Pair frames: one orthogonal pool so probes never cross-talk.
    let pool = random_orthonormal_cols(&mut rng, r, r)?;
    let mut probes = Vec::with_capacity(n_pairs);
    for p in 0..n_pairs {
        let scale = 0.75 + 0.75 * rng.gen::<f64>();
        let mut coords = Matrix::zeros(r, 2);
        for row in 0..r {
            coords.set(row, 0, pool.get(row, 2 * p));
            coords.set(row, 1, pool.get(row, 2 * p + 1));
        }
        let o_frame = random_orthonormal_cols(&mut rng, m, 2)?;
        // B = O * (s * pattern) * coords' * inv_core realizes
        // B A x = s * O * pattern * P' x with P = v_basis * coords.
        let tail = coords.transpose().matmul(&basis.inv_core)?;
        for (label, pattern) in [("c", &pattern_c), ("d", &pattern_d)] {
            let mid = pattern.scale(scale).matmul(&tail)?;
            let b = o_frame.matmul(&mid)?;
            ids_and_b.push((format!("adv{p}{label}"), b));
        }
        // Probe: the embedded top singular direction of the C copy.
        let probe_coords: Vec<f64> = (0..r).map(|row| coords.get(row, 0)).collect();
        let mut probe = vec![0.0; n];
        for (row, item) in probe.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (col, pc) in probe_coords.iter().enumerate() {
                acc += basis.v_basis.get(row, col) * pc;
            }
            *item = acc;
        }
        probes.push(Vector::new(probe)?);
    }

    let mut library = AdapterLibrary::new_shared(basis.a.clone(), ids_and_b)?;
    write_meta(&mut library, &normal_spec, std::slice::from_ref(&basis), &frames);
    library
        .meta_mut()
        .insert("adversarial_pairs".into(), n_pairs.to_string());

    // Verify the embedded disagreement on every probe.
    let arrows = library.build_arrow_forms()?;
    let mut queries = Vec::new();
    for (p, probe) in probes.iter().enumerate() {
        let c_idx = n_normal + 2 * p;
        let d_idx = c_idx + 1;
        let arrow_winner = routing::select(&routing::score_arrow(&arrows, probe)?)?;
        let naive_winner = routing::select(&routing::score_naive(&library, probe)?)?;
        if arrow_winner != c_idx || naive_winner != d_idx {
            return Err(Error::InvalidSpec(format!(
                "adversarial pair {p} failed verification (arrow={arrow_winner}, \
                 naive={naive_winner}); lower signal_gain or change the seed"
            )));
        }
        queries.push(LabeledQuery {
            x: probe.clone(),
            task: d_idx,
            oracle_norm_winner: d_idx,
        });
    }

    // Task queries for the normal adapters.
    if per_task > 0 && n_normal > 0 {
        let construction = Construction {
            library: library.clone(),
            bases: vec![basis],
            frames,
        };
        let mut qrng = ChaCha20Rng::seed_from_u64(spec.seed ^ QUERY_SEED_SALT);
        for task in 0..n_normal {
            for _ in 0..per_task {
                let x = sample_query(&construction, task, spec, &mut qrng)?;
                let oracle = routing::select(&routing::score_naive(&library, &x)?)?;
                queries.push(LabeledQuery {
                    x,
                    task,
                    oracle_norm_winner: oracle,
                });
            }
        }
    }

    Ok((library, queries))
}

/// Writes queries in the columnar binary layout: u32 count, u32 n, then
/// per query u32 task, u32 oracle winner, n f64 components (little-endian).
pub fn save_queries(queries: &[LabeledQuery], n: usize, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::with_capacity(8 + queries.len() * (8 + 8 * n));
    buf.extend_from_slice(&(queries.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    for q in queries {
        if q.x.dim() != n {
            return Err(Error::DimensionMismatch {
                context: "query save",
                expected: format!("dim {n}"),
                got: format!("dim {}", q.x.dim()),
            });
        }
        buf.extend_from_slice(&(q.task as u32).to_le_bytes());
        buf.extend_from_slice(&(q.oracle_norm_winner as u32).to_le_bytes());
        for v in q.x.as_slice() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let tmp = {
        let mut os = path.as_ref().as_os_str().to_owned();
        os.push(".tmp");
        std::path::PathBuf::from(os)
    };
    fs::write(&tmp, &buf).map_err(ContainerError::Io)?;
    fs::rename(&tmp, path.as_ref()).map_err(ContainerError::Io)?;
    Ok(())
}

/// Reads a query file; returns the queries and the vector dimension.
pub fn load_queries(path: impl AsRef<Path>) -> Result<(Vec<LabeledQuery>, usize)> {
    let bytes = fs::read(path.as_ref()).map_err(ContainerError::Io)?;
    queries_from_bytes(&bytes)
}

pub fn queries_from_bytes(bytes: &[u8]) -> Result<(Vec<LabeledQuery>, usize)> {
    if bytes.len() < 8 {
        return Err(ContainerError::Truncated {
            section: "query header",
            needed: 8 - bytes.len(),
        }
        .into());
    }
    let count = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if n == 0 {
        return Err(ContainerError::HeaderInvalid("query dim is zero".into()).into());
    }
    let per = 8 + 8 * n as u128;
    let need = 8 + count as u128 * per;
    match (bytes.len() as u128).cmp(&need) {
        std::cmp::Ordering::Less => {
            return Err(ContainerError::Truncated {
                section: "query records",
                needed: (need - bytes.len() as u128).min(usize::MAX as u128) as usize,
            }
            .into())
        }
        std::cmp::Ordering::Greater => {
            return Err(ContainerError::TrailingBytes(bytes.len() - need as usize).into())
        }
        std::cmp::Ordering::Equal => {}
    }
    let mut queries = Vec::with_capacity(count);
    let mut pos = 8;
    for _ in 0..count {
        let task = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
        let oracle = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        pos += 8;
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f64::from_le_bytes(bytes[pos..pos + 8].try_into().unwrap()));
            pos += 8;
        }
        let x = Vector::new(data).map_err(|_| ContainerError::NonFinite("query vector"))?;
        queries.push(LabeledQuery {
            x,
            task,
            oracle_norm_winner: oracle,
        });
    }
    Ok((queries, n))
}
