//! Analytic FLOPs and storage models, an instrumented scoring counter,
//! and sweep drivers emitting CSV.
//!
//! Accounting convention: one multiply-accumulate is one FLOP, and only
//! operator applications count (matrix-vector products and score dot
//! products). Norm square-roots, squared-norm reductions, and argmax
//! comparisons are excluded; with those constants the models reproduce the
//! published per-query costs exactly. The shared intermediate `z = A x`
//! used by QR scoring is likewise kept out of its per-adapter total and
//! reported as a separate per-query overhead column.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::adapter::LibraryBundle;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::routing::Method;

/// The methods covered by the cost models, in published-table order.
pub const TABLE_METHODS: [Method; 5] = [
    Method::Naive,
    Method::Spectr,
    Method::Lag,
    Method::Arrow,
    Method::Seqr,
];

const WALL_REPS: usize = 5;

/// Dimensions a cost evaluation runs at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CostParams {
    pub n_adapters: usize,
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub lag_k: usize,
}

impl CostParams {
    /// The published reference point: 1000 adapters, 4096 hidden, rank 8,
    /// k = 20 filtering.
    pub fn table1() -> Self {
        Self {
            n_adapters: 1000,
            m: 4096,
            n: 4096,
            r: 8,
            lag_k: 20,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_adapters == 0 || self.m == 0 || self.n == 0 || self.r == 0 || self.lag_k == 0 {
            return Err(Error::InvalidSpec("cost params must be positive".into()));
        }
        if self.lag_k > self.n_adapters {
            return Err(Error::KOutOfRange {
                k: self.lag_k,
                n: self.n_adapters,
            });
        }
        Ok(())
    }
}

/// Modeled routing cost per query, in multiply-accumulates.
pub fn flops_model(method: Method, p: &CostParams) -> u64 {
    let (nn, m, n, r, k) = (
        p.n_adapters as u64,
        p.m as u64,
        p.n as u64,
        p.r as u64,
        p.lag_k as u64,
    );
    match method {
        Method::Naive => nn * r * (m + n),
        Method::Spectr => nn * r * n,
        Method::Lag => nn * n + k * r * n,
        Method::Arrow => nn * n,
        Method::Seqr => nn * r * r,
        // The merge baseline makes no routing decision.
        Method::Mu => 0,
    }
}

/// Per-query cost of the shared intermediate `z = A x`, reported outside
/// the per-adapter scoring total.
pub fn z_overhead_model(method: Method, p: &CostParams) -> u64 {
    match method {
        Method::Seqr => (p.r * p.n) as u64,
        _ => 0,
    }
}

/// Parameter-count storage model.
///
/// Shared-A libraries store one A plus per-adapter B; unique-A libraries
/// store both per adapter. Spectral routing always stores its own factors
/// per adapter, even over a shared A. QR routing is defined for shared A
/// and adds the r x r triangles; arrow routing adds one n-vector each.
pub fn storage_model(method: Method, p: &CostParams, shared_a: bool) -> u64 {
    let (nn, m, n, r) = (p.n_adapters as u64, p.m as u64, p.n as u64, p.r as u64);
    let base = if shared_a {
        r * n + nn * m * r
    } else {
        nn * r * (m + n)
    };
    match method {
        Method::Naive | Method::Mu => base,
        Method::Arrow => base + nn * n,
        Method::Spectr => nn * r * (m + n),
        Method::Lag => nn * r * (m + n) + nn * n,
        Method::Seqr => r * n + nn * m * r + nn * r * r,
    }
}

/// One cost evaluation outcome.
#[derive(Debug, Clone, Serialize)]
pub struct CostReport {
    pub method: Method,
    pub model_flops: u64,
    pub measured_flops: u64,
    pub storage_params: u64,
    pub wall_ns: u64,
    pub z_overhead_flops: u64,
}

/// Where the instrumented pass reads its matrices from.
trait ScoreSource {
    fn n_adapters(&self) -> usize;
    fn b(&self, i: usize) -> &Matrix;
    fn a(&self, i: usize) -> &Matrix;
    fn shared_a(&self) -> &Matrix;
    fn arrow(&self, i: usize) -> &[f64];
    fn a_hat(&self, i: usize) -> &Matrix;
    fn r_mat(&self, i: usize) -> &Matrix;
}

struct BundleSource<'a>(&'a LibraryBundle);

impl ScoreSource for BundleSource<'_> {
    fn n_adapters(&self) -> usize {
        self.0.library.n_adapters()
    }
    fn b(&self, i: usize) -> &Matrix {
        &self.0.library.adapter(i).b
    }
    fn a(&self, i: usize) -> &Matrix {
        self.0.library.a_of(i)
    }
    fn shared_a(&self) -> &Matrix {
        self.0.library.shared_a().expect("checked by measure")
    }
    fn arrow(&self, i: usize) -> &[f64] {
        self.0.forms.arrow.as_ref().expect("checked")[i].v.as_slice()
    }
    fn a_hat(&self, i: usize) -> &Matrix {
        &self.0.forms.spectr.as_ref().expect("checked")[i].a_hat
    }
    fn r_mat(&self, i: usize) -> &Matrix {
        &self.0.forms.seqr.as_ref().expect("checked")[i].r_mat
    }
}

/// Shape-faithful random forms for large-scale measurement. A small pool
/// of distinct adapters is cycled over the virtual library size: the
/// instrumented counts and access pattern match the real scoring path
/// while memory stays bounded.
struct PoolSource {
    virtual_n: usize,
    pool: usize,
    shared_a: Matrix,
    b: Vec<Matrix>,
    arrows: Vec<Vec<f64>>,
    a_hats: Vec<Matrix>,
    r_mats: Vec<Matrix>,
}

impl PoolSource {
    fn generate(p: &CostParams, seed: u64, pool: usize) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let pool = pool.clamp(1, p.n_adapters);
        let mut uniform =
            |rows: usize, cols: usize| -> Matrix {
                Matrix::new(
                    rows,
                    cols,
                    (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                )
                .expect("finite draws")
            };
        let shared_a = uniform(p.r, p.n);
        let b = (0..pool).map(|_| uniform(p.m, p.r)).collect();
        let a_hats = (0..pool).map(|_| uniform(p.r, p.n)).collect();
        let r_mats = (0..pool)
            .map(|_| {
                let mut t = uniform(p.r, p.r);
                for i in 0..p.r {
                    for j in 0..i {
                        t.set(i, j, 0.0);
                    }
                }
                t
            })
            .collect();
        let arrows = (0..pool)
            .map(|_| {
                let v = uniform(p.n, 1);
                let norm = v.frobenius_norm();
                v.as_slice().iter().map(|x| x / norm).collect()
            })
            .collect();
        Self {
            virtual_n: p.n_adapters,
            pool,
            shared_a,
            b,
            arrows,
            a_hats,
            r_mats,
        }
    }
}

impl ScoreSource for PoolSource {
    fn n_adapters(&self) -> usize {
        self.virtual_n
    }
    fn b(&self, i: usize) -> &Matrix {
        &self.b[i % self.pool]
    }
    fn a(&self, _i: usize) -> &Matrix {
        &self.shared_a
    }
    fn shared_a(&self) -> &Matrix {
        &self.shared_a
    }
    fn arrow(&self, i: usize) -> &[f64] {
        &self.arrows[i % self.pool]
    }
    fn a_hat(&self, i: usize) -> &Matrix {
        &self.a_hats[i % self.pool]
    }
    fn r_mat(&self, i: usize) -> &Matrix {
        &self.r_mats[i % self.pool]
    }
}

/// Matrix-vector product that bills its multiply-accumulates.
fn counted_matvec(mat: &Matrix, x: &[f64], out: &mut Vec<f64>, macs: &mut u64) {
    out.clear();
    for i in 0..mat.rows() {
        let row = mat.row(i);
        let mut acc = 0.0;
        for j in 0..row.len() {
            acc += row[j] * x[j];
        }
        out.push(acc);
    }
    *macs += (mat.rows() * mat.cols()) as u64;
}

fn counted_dot(a: &[f64], b: &[f64], macs: &mut u64) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    *macs += a.len() as u64;
    acc
}

fn plain_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One instrumented scoring pass; returns the scores it computed so tests
/// can check them against the plain routing path.
fn instrumented_pass(
    method: Method,
    src: &dyn ScoreSource,
    x: &[f64],
    k: usize,
    macs: &mut u64,
    z_macs: &mut u64,
) -> Vec<f64> {
    let n = src.n_adapters();
    let mut scores = Vec::with_capacity(n);
    let mut z = Vec::new();
    let mut h = Vec::new();
    match method {
        Method::Naive => {
            for i in 0..n {
                counted_matvec(src.a(i), x, &mut z, macs);
                counted_matvec(src.b(i), &z, &mut h, macs);
                scores.push(plain_norm(&h));
            }
        }
        Method::Spectr => {
            for i in 0..n {
                counted_matvec(src.a_hat(i), x, &mut h, macs);
                scores.push(plain_norm(&h));
            }
        }
        Method::Arrow => {
            for i in 0..n {
                scores.push(counted_dot(src.arrow(i), x, macs).abs());
            }
        }
        Method::Seqr => {
            counted_matvec(src.shared_a(), x, &mut z, z_macs);
            for i in 0..n {
                counted_matvec(src.r_mat(i), &z, &mut h, macs);
                scores.push(plain_norm(&h));
            }
        }
        Method::Lag => {
            let mut arrow_scores = Vec::with_capacity(n);
            for i in 0..n {
                arrow_scores.push(counted_dot(src.arrow(i), x, macs).abs());
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                arrow_scores[b]
                    .partial_cmp(&arrow_scores[a])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            scores = vec![f64::NEG_INFINITY; n];
            for &i in order.iter().take(k) {
                counted_matvec(src.a_hat(i), x, &mut h, macs);
                scores[i] = plain_norm(&h);
            }
        }
        Method::Mu => {
            scores = vec![0.0; n];
        }
    }
    scores
}

fn run_measurement(
    method: Method,
    src: &dyn ScoreSource,
    queries: &[Vec<f64>],
    p: &CostParams,
    shared_a: bool,
) -> CostReport {
    let mut macs = 0u64;
    let mut z_macs = 0u64;
    let mut wall = Vec::with_capacity(WALL_REPS);
    for rep in 0..WALL_REPS {
        let start = Instant::now();
        let mut rep_macs = 0u64;
        let mut rep_z = 0u64;
        for q in queries {
            std::hint::black_box(instrumented_pass(
                method, src, q, p.lag_k, &mut rep_macs, &mut rep_z,
            ));
        }
        wall.push(start.elapsed().as_nanos() as u64 / queries.len().max(1) as u64);
        if rep == 0 {
            macs = rep_macs;
            z_macs = rep_z;
        }
    }
    wall.sort_unstable();
    let per_query = macs / queries.len().max(1) as u64;
    let z_per_query = z_macs / queries.len().max(1) as u64;
    CostReport {
        method,
        model_flops: flops_model(method, p),
        measured_flops: per_query,
        storage_params: storage_model(method, p, shared_a),
        wall_ns: wall[WALL_REPS / 2],
        z_overhead_flops: z_per_query,
    }
}

/// Measures realized multiply-accumulates and wall time of the scoring
/// path over a real library. Preprocessing is excluded: the forms must
/// already be present. Wall time is the median over repeated runs.
pub fn measure(
    method: Method,
    bundle: &LibraryBundle,
    queries: &[crate::linalg::Vector],
    p: &CostParams,
) -> Result<CostReport> {
    p.validate()?;
    let (m, n, r) = bundle.library.dims();
    if (p.m, p.n, p.r) != (m, n, r) || p.n_adapters != bundle.library.n_adapters() {
        return Err(Error::InvalidSpec(
            "cost params do not match the library dimensions".into(),
        ));
    }
    if queries.is_empty() {
        return Err(Error::Empty("query set"));
    }
    if let Some(bad) = queries.iter().find(|q| q.dim() != n) {
        return Err(Error::DimensionMismatch {
            context: "cost measurement queries",
            expected: format!("dim {n}"),
            got: format!("dim {}", bad.dim()),
        });
    }
    match method {
        Method::Arrow if bundle.forms.arrow.is_none() => {
            return Err(Error::MissingForms("arrow"))
        }
        Method::Spectr if bundle.forms.spectr.is_none() => {
            return Err(Error::MissingForms("spectral"))
        }
        Method::Lag if bundle.forms.arrow.is_none() || bundle.forms.spectr.is_none() => {
            return Err(Error::MissingForms("arrow and spectral"))
        }
        Method::Seqr => {
            if bundle.forms.seqr.is_none() {
                return Err(Error::MissingForms("QR"));
            }
            if bundle.library.shared_a().is_none() {
                return Err(Error::SharedARequired("QR cost measurement"));
            }
        }
        _ => {}
    }
    let raw: Vec<Vec<f64>> = queries.iter().map(|q| q.as_slice().to_vec()).collect();
    let shared = bundle.library.is_shared();
    Ok(run_measurement(
        method,
        &BundleSource(bundle),
        &raw,
        p,
        shared,
    ))
}

/// Measurement against shape-faithful synthetic forms, for dimensions too
/// large to materialize a real library. Counts are still produced by the
/// executing scoring path.
pub fn measure_synthetic(
    method: Method,
    p: &CostParams,
    seed: u64,
    n_queries: usize,
    pool: usize,
) -> Result<CostReport> {
    p.validate()?;
    let src = PoolSource::generate(p, seed, pool);
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x51ee_7a3b_9c04_d2e6);
    let queries: Vec<Vec<f64>> = (0..n_queries.max(1))
        .map(|_| (0..p.n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    Ok(run_measurement(method, &src, &queries, p, true))
}

/// Sweep axis selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    HiddenDim,
    NumAdapters,
    Rank,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::HiddenDim => "hidden_dim",
            SweepAxis::NumAdapters => "num_adapters",
            SweepAxis::Rank => "rank",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "hidden_dim" => Ok(SweepAxis::HiddenDim),
            "num_adapters" => Ok(SweepAxis::NumAdapters),
            "rank" => Ok(SweepAxis::Rank),
            other => Err(format!(
                "unknown axis {other:?}, expected hidden_dim|num_adapters|rank"
            )),
        }
    }
}

/// One row of sweep output.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: usize,
    pub report: CostReport,
}

/// Runs every table method at every grid point along one axis, fixing the
/// remaining dimensions. Uses synthetic measurement so large points stay
/// within memory.
pub fn sweep(axis: SweepAxis, grid: &[usize], fixed: &CostParams, seed: u64) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::Empty("sweep grid"));
    }
    let mut rows = Vec::with_capacity(grid.len() * TABLE_METHODS.len());
    for &value in grid {
        let mut p = *fixed;
        match axis {
            SweepAxis::HiddenDim => {
                p.m = value;
                p.n = value;
            }
            SweepAxis::NumAdapters => {
                p.n_adapters = value;
                p.lag_k = fixed.lag_k.min(value);
            }
            SweepAxis::Rank => {
                p.r = value;
            }
        }
        if p.r > p.m.min(p.n) {
            return Err(Error::InvalidSpec(format!(
                "sweep point rank {} exceeds min(m, n) = {}",
                p.r,
                p.m.min(p.n)
            )));
        }
        for method in TABLE_METHODS {
            let report = measure_synthetic(method, &p, seed, 1, 4)?;
            rows.push(SweepRow {
                axis,
                value,
                report,
            });
        }
    }
    Ok(rows)
}

/// CSV rendering, header included. Wall-clock is the only nondeterministic
/// column.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "axis,value,method,model_flops,measured_flops,storage_params,wall_ns,z_overhead_flops\n",
    );
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.axis.as_str(),
            row.value,
            row.report.method,
            row.report.model_flops,
            row.report.measured_flops,
            row.report.storage_params,
            row.report.wall_ns,
            row.report.z_overhead_flops,
        ));
    }
    out
}

/// Rounds to `sig` significant figures with a K/M/G suffix, the way the
/// published table prints costs.
pub fn sig_label(value: u64, sig: u32) -> String {
    if value == 0 {
        return "0".to_string();
    }
    let (den, suffix) = if value >= 1_000_000_000 {
        (1_000_000_000u64, "G")
    } else if value >= 1_000_000 {
        (1_000_000u64, "M")
    } else if value >= 1_000 {
        (1_000u64, "K")
    } else {
        (1u64, "")
    };
    let scaled = value as f64 / den as f64;
    let digits_before = scaled.abs().log10().floor() as i32 + 1;
    let factor = 10f64.powi(sig as i32 - digits_before);
    let rounded = (scaled * factor).round() / factor;
    let decimals = (sig as i32 - digits_before).max(0) as usize;
    if rounded.fract() == 0.0 {
        format!("{rounded:.0}{suffix}")
    } else {
        format!("{rounded:.decimals$}{suffix}")
    }
}

/// Both printing precisions used by the published table.
pub fn paper_labels(value: u64) -> (String, String) {
    (sig_label(value, 2), sig_label(value, 1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table1_model_values() {
        let p = CostParams::table1();
        assert_eq!(flops_model(Method::Naive, &p), 65_536_000);
        assert_eq!(flops_model(Method::Spectr, &p), 32_768_000);
        assert_eq!(flops_model(Method::Lag, &p), 4_751_360);
        assert_eq!(flops_model(Method::Arrow, &p), 4_096_000);
        assert_eq!(flops_model(Method::Seqr, &p), 64_000);
    }

    #[test]
    fn table1_printed_labels() {
        let p = CostParams::table1();
        let published = [
            (Method::Naive, "66M"),
            (Method::Spectr, "33M"),
            (Method::Lag, "5M"),
            (Method::Arrow, "4M"),
            (Method::Seqr, "64K"),
        ];
        for (method, label) in published {
            let (two, one) = paper_labels(flops_model(method, &p));
            assert!(
                two == label || one == label,
                "{method}: {label} not in {{{two}, {one}}}"
            );
        }
    }

    #[test]
    fn table1_ordering() {
        let p = CostParams::table1();
        let seqr = flops_model(Method::Seqr, &p);
        let arrow = flops_model(Method::Arrow, &p);
        let lag = flops_model(Method::Lag, &p);
        let spectr = flops_model(Method::Spectr, &p);
        let naive = flops_model(Method::Naive, &p);
        assert!(seqr < arrow && arrow < lag && lag < spectr && spectr < naive);
    }

    #[test]
    fn storage_extras_cross_at_r_squared_equals_n() {
        let mut p = CostParams::table1();
        // r = 8, n = 4096: per-adapter extras are 64 vs 4096.
        let seqr_extra = storage_model(Method::Seqr, &p, true) - storage_model(Method::Naive, &p, true);
        let arrow_extra =
            storage_model(Method::Arrow, &p, true) - storage_model(Method::Naive, &p, true);
        assert_eq!(seqr_extra / p.n_adapters as u64, 64);
        assert_eq!(arrow_extra / p.n_adapters as u64, 4096);
        assert!(seqr_extra < arrow_extra);

        // Boundary: r^2 = n gives equal extras.
        p.r = 64;
        p.n = 4096;
        let seqr_extra = storage_model(Method::Seqr, &p, true) - storage_model(Method::Naive, &p, true);
        let arrow_extra =
            storage_model(Method::Arrow, &p, true) - storage_model(Method::Naive, &p, true);
        assert_eq!(seqr_extra, arrow_extra);
    }

    #[test]
    fn shared_base_is_about_half_of_unique() {
        let p = CostParams {
            n_adapters: 1000,
            m: 2048,
            n: 2048,
            r: 16,
            lag_k: 20,
        };
        let shared = storage_model(Method::Naive, &p, true) as f64;
        let unique = storage_model(Method::Naive, &p, false) as f64;
        let ratio = shared / unique;
        assert!((ratio - 0.5).abs() < 0.01, "ratio {ratio}");
    }

    #[test]
    fn measured_matches_model_on_synthetic_forms() {
        let p = CostParams {
            n_adapters: 40,
            m: 64,
            n: 96,
            r: 4,
            lag_k: 5,
        };
        for method in TABLE_METHODS {
            let report = measure_synthetic(method, &p, 11, 3, 4).unwrap();
            let model = report.model_flops as f64;
            let measured = report.measured_flops as f64;
            assert!(
                (measured - model).abs() <= 0.05 * model,
                "{method}: measured {measured} vs model {model}"
            );
        }
    }

    #[test]
    fn seqr_z_overhead_reported_separately() {
        let p = CostParams {
            n_adapters: 10,
            m: 32,
            n: 48,
            r: 4,
            lag_k: 2,
        };
        let report = measure_synthetic(Method::Seqr, &p, 3, 2, 2).unwrap();
        assert_eq!(report.z_overhead_flops, (p.r * p.n) as u64);
        assert_eq!(report.measured_flops, (p.n_adapters * p.r * p.r) as u64);
    }

    #[test]
    fn sweep_rank_axis_is_constant_for_seqr_over_hidden_dim() {
        let fixed = CostParams {
            n_adapters: 50,
            m: 64,
            n: 64,
            r: 8,
            lag_k: 4,
        };
        let rows = sweep(SweepAxis::HiddenDim, &[32, 64, 128], &fixed, 5).unwrap();
        let seqr_flops: Vec<u64> = rows
            .iter()
            .filter(|r| r.report.method == Method::Seqr)
            .map(|r| r.report.model_flops)
            .collect();
        assert!(seqr_flops.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn methods_monotone_in_library_size() {
        let fixed = CostParams {
            n_adapters: 10,
            m: 32,
            n: 32,
            r: 4,
            lag_k: 3,
        };
        let rows = sweep(SweepAxis::NumAdapters, &[10, 20, 40], &fixed, 5).unwrap();
        for method in TABLE_METHODS {
            let series: Vec<u64> = rows
                .iter()
                .filter(|r| r.report.method == method)
                .map(|r| r.report.model_flops)
                .collect();
            assert!(
                series.windows(2).all(|w| w[0] <= w[1]),
                "{method}: {series:?}"
            );
        }
    }

    #[test]
    fn measure_on_real_library_matches_model_and_routing() {
        use crate::routing;
        use crate::synthgen::{self, SynthSpec};

        let spec = SynthSpec {
            seed: 3,
            n_adapters: 8,
            m: 24,
            n: 40,
            r: 4,
            shared_a: true,
            task_subspace_dim: 2,
            signal_gain: 2.5,
            noise_level: 0.1,
            bias_scales: None,
        };
        let library = synthgen::gen_library(&spec).unwrap();
        let queries: Vec<crate::linalg::Vector> = synthgen::gen_queries(&library, &spec, 1)
            .unwrap()
            .into_iter()
            .map(|q| q.x)
            .collect();
        let mut bundle = LibraryBundle::new(library);
        bundle.forms.arrow = Some(bundle.library.build_arrow_forms().unwrap());
        bundle.forms.spectr = Some(bundle.library.build_spectr_forms().unwrap());
        bundle.forms.seqr = Some(bundle.library.build_seqr_forms().unwrap());

        let p = CostParams {
            n_adapters: 8,
            m: 24,
            n: 40,
            r: 4,
            lag_k: 3,
        };
        for method in TABLE_METHODS {
            let report = measure(method, &bundle, &queries, &p).unwrap();
            assert_eq!(report.measured_flops, report.model_flops, "{method}");
        }

        // The instrumented pass computes the same scores as the plain
        // routing path, bit for bit (same operation order).
        let x = queries[0].as_slice();
        let src = BundleSource(&bundle);
        let (mut macs, mut z) = (0u64, 0u64);
        let xv = &queries[0];
        assert_eq!(
            instrumented_pass(Method::Naive, &src, x, 3, &mut macs, &mut z),
            routing::score_naive(&bundle.library, xv).unwrap()
        );
        assert_eq!(
            instrumented_pass(Method::Arrow, &src, x, 3, &mut macs, &mut z),
            routing::score_arrow(bundle.forms.arrow.as_ref().unwrap(), xv).unwrap()
        );
        assert_eq!(
            instrumented_pass(Method::Spectr, &src, x, 3, &mut macs, &mut z),
            routing::score_spectr(bundle.forms.spectr.as_ref().unwrap(), xv, None).unwrap()
        );
        assert_eq!(
            instrumented_pass(Method::Seqr, &src, x, 3, &mut macs, &mut z),
            routing::score_seqr(
                bundle.forms.seqr.as_ref().unwrap(),
                bundle.library.shared_a().unwrap(),
                xv,
                None
            )
            .unwrap()
            .scores
        );
        assert_eq!(
            instrumented_pass(Method::Lag, &src, x, 3, &mut macs, &mut z),
            routing::route_lag(
                bundle.forms.arrow.as_ref().unwrap(),
                bundle.forms.spectr.as_ref().unwrap(),
                xv,
                3,
                None
            )
            .unwrap()
            .scores
        );
    }

    #[test]
    fn measure_requires_matching_dims_and_forms() {
        let a = Matrix::new(1, 2, vec![1.0, 0.0]).unwrap();
        let b = Matrix::new(2, 1, vec![1.0, 2.0]).unwrap();
        let lib =
            crate::adapter::AdapterLibrary::new_shared(a, vec![("t".into(), b)]).unwrap();
        let bundle = LibraryBundle::new(lib);
        let x = crate::linalg::Vector::new(vec![1.0, 0.0]).unwrap();
        let good = CostParams {
            n_adapters: 1,
            m: 2,
            n: 2,
            r: 1,
            lag_k: 1,
        };
        // No arrow forms stored.
        assert!(matches!(
            measure(Method::Arrow, &bundle, std::slice::from_ref(&x), &good),
            Err(Error::MissingForms(_))
        ));
        let bad = CostParams { m: 3, ..good };
        assert!(measure(Method::Naive, &bundle, std::slice::from_ref(&x), &bad).is_err());
    }

    #[test]
    fn sig_labels() {
        assert_eq!(sig_label(65_536_000, 2), "66M");
        assert_eq!(sig_label(32_768_000, 2), "33M");
        assert_eq!(sig_label(4_751_360, 1), "5M");
        assert_eq!(sig_label(4_751_360, 2), "4.8M");
        assert_eq!(sig_label(4_096_000, 1), "4M");
        assert_eq!(sig_label(64_000, 2), "64K");
        assert_eq!(sig_label(0, 2), "0");
        assert_eq!(sig_label(999, 2), "1000");
        assert_eq!(sig_label(950, 2), "950");
    }

    #[test]
    fn csv_has_header_and_rows() {
        let fixed = CostParams {
            n_adapters: 4,
            m: 8,
            n: 8,
            r: 2,
            lag_k: 2,
        };
        let rows = sweep(SweepAxis::Rank, &[2], &fixed, 1).unwrap();
        let csv = sweep_csv(&rows);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "axis,value,method,model_flops,measured_flops,storage_params,wall_ns,z_overhead_flops"
        );
        assert_eq!(lines.count(), TABLE_METHODS.len());
    }
}
