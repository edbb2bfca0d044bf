//! LoRA adapter libraries and their per-method routed forms.
//!
//! A library holds N adapters for one routed layer, either with a unique
//! `A_i` per adapter or a single shared `A` frozen at initialization.
//! Preprocessing converts adapters into the representation each routing
//! method scores against: the arrow vector, the spectral re-factoring
//! `(U, S V')`, or the reduced QR factors of `B`.

mod container;

pub use container::{library_from_bytes, library_to_bytes, load_library, save_library};

use std::collections::{BTreeMap, BTreeSet};

use crate::calibration::CalibrationStats;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

/// One low-rank adapter: `B` (m x r) and, for unique-A libraries, its own
/// `A` (r x n). Adapters in shared-A libraries leave `a` unset and use the
/// library-level matrix.
#[derive(Debug, Clone)]
pub struct LoraAdapter {
    pub id: String,
    pub b: Matrix,
    pub a: Option<Matrix>,
}

/// A set of adapters for one layer, all sharing dimensions `(m, n, r)`.
#[derive(Debug, Clone)]
pub struct AdapterLibrary {
    m: usize,
    n: usize,
    r: usize,
    shared_a: Option<Matrix>,
    adapters: Vec<LoraAdapter>,
    meta: BTreeMap<String, String>,
}

impl AdapterLibrary {
    /// Builds a shared-A library from `(id, B)` pairs.
    pub fn new_shared(shared_a: Matrix, adapters: Vec<(String, Matrix)>) -> Result<Self> {
        let adapters = adapters
            .into_iter()
            .map(|(id, b)| LoraAdapter { id, b, a: None })
            .collect();
        Self::validate(Some(shared_a), adapters)
    }

    /// Builds a unique-A library from `(id, B, A)` triples.
    pub fn new_unique(adapters: Vec<(String, Matrix, Matrix)>) -> Result<Self> {
        let adapters = adapters
            .into_iter()
            .map(|(id, b, a)| LoraAdapter { id, b, a: Some(a) })
            .collect();
        Self::validate(None, adapters)
    }

    fn validate(shared_a: Option<Matrix>, adapters: Vec<LoraAdapter>) -> Result<Self> {
        let first = adapters
            .first()
            .ok_or(Error::LibraryInvalid("no adapters".to_string()))?;
        let m = first.b.rows();
        let r = first.b.cols();
        let n = match (&shared_a, &first.a) {
            (Some(a), _) => a.cols(),
            (None, Some(a)) => a.cols(),
            (None, None) => {
                return Err(Error::LibraryInvalid(
                    "unique-A library adapter is missing its A matrix".to_string(),
                ))
            }
        };
        if r > m || r > n {
            return Err(Error::LibraryInvalid(format!(
                "rank {r} exceeds min(m={m}, n={n})"
            )));
        }
        if let Some(a) = &shared_a {
            if a.rows() != r || a.cols() != n {
                return Err(Error::LibraryInvalid(format!(
                    "shared A is {}x{}, expected {r}x{n}",
                    a.rows(),
                    a.cols()
                )));
            }
        }
        let mut ids = BTreeSet::new();
        for ad in &adapters {
            if ad.b.rows() != m || ad.b.cols() != r {
                return Err(Error::LibraryInvalid(format!(
                    "adapter {}: B is {}x{}, expected {m}x{r}",
                    ad.id,
                    ad.b.rows(),
                    ad.b.cols()
                )));
            }
            match (&shared_a, &ad.a) {
                (Some(_), Some(_)) => {
                    return Err(Error::LibraryInvalid(format!(
                        "adapter {} carries its own A in a shared-A library",
                        ad.id
                    )))
                }
                (None, Some(a)) if a.rows() != r || a.cols() != n => {
                    return Err(Error::LibraryInvalid(format!(
                        "adapter {}: A is {}x{}, expected {r}x{n}",
                        ad.id,
                        a.rows(),
                        a.cols()
                    )))
                }
                (None, None) => {
                    return Err(Error::LibraryInvalid(format!(
                        "adapter {} is missing its A matrix",
                        ad.id
                    )))
                }
                _ => {}
            }
            if !ids.insert(ad.id.clone()) {
                return Err(Error::LibraryInvalid(format!(
                    "duplicate adapter id {:?}",
                    ad.id
                )));
            }
        }
        Ok(Self {
            m,
            n,
            r,
            shared_a,
            adapters,
            meta: BTreeMap::new(),
        })
    }

    /// Folds the LoRA training scale `alpha / r` into every `B`.
    ///
    /// Routing math uses the unscaled product, so libraries built from
    /// checkpoints that keep alpha separate should fold it exactly once,
    /// at construction time.
    pub fn fold_alpha(mut self, alpha: f64) -> Self {
        let factor = alpha / self.r as f64;
        for ad in &mut self.adapters {
            ad.b = ad.b.scale(factor);
        }
        self
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.m, self.n, self.r)
    }

    pub fn n_adapters(&self) -> usize {
        self.adapters.len()
    }

    pub fn is_shared(&self) -> bool {
        self.shared_a.is_some()
    }

    pub fn shared_a(&self) -> Option<&Matrix> {
        self.shared_a.as_ref()
    }

    pub fn adapter(&self, i: usize) -> &LoraAdapter {
        &self.adapters[i]
    }

    pub fn adapters(&self) -> &[LoraAdapter] {
        &self.adapters
    }

    /// The A matrix governing adapter `i` (shared or owned).
    pub fn a_of(&self, i: usize) -> &Matrix {
        match &self.shared_a {
            Some(a) => a,
            None => self.adapters[i]
                .a
                .as_ref()
                .expect("unique-A adapter validated at construction"),
        }
    }

    /// The adapter update `B_i A_i x`.
    pub fn update(&self, i: usize, x: &Vector) -> Result<Vector> {
        let z = linalg::matvec(self.a_of(i), x)?;
        linalg::matvec(&self.adapters[i].b, &z)
    }

    pub fn meta(&self) -> &BTreeMap<String, String> {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut BTreeMap<String, String> {
        &mut self.meta
    }

    /// Arrow vectors for every adapter.
    pub fn build_arrow_forms(&self) -> Result<Vec<ArrowForm>> {
        (0..self.n_adapters())
            .map(|i| {
                build_arrow(&self.adapters[i].b, self.a_of(i))
                    .map_err(|e| match e {
                        Error::DegenerateAdapter(_) => {
                            Error::DegenerateAdapter(self.adapters[i].id.clone())
                        }
                        other => other,
                    })
            })
            .collect()
    }

    /// Spectral re-factorings for every adapter.
    pub fn build_spectr_forms(&self) -> Result<Vec<SpectrForm>> {
        (0..self.n_adapters())
            .map(|i| build_spectr(&self.adapters[i].b, self.a_of(i)))
            .collect()
    }

    /// Reduced QR factors for every adapter; defined only for shared-A
    /// libraries, where the shared intermediate `z = Ax` makes the r x r
    /// scoring step valid.
    pub fn build_seqr_forms(&self) -> Result<Vec<SeqrForm>> {
        if !self.is_shared() {
            return Err(Error::SharedARequired("QR routing"));
        }
        self.adapters.iter().map(|ad| build_seqr(&ad.b)).collect()
    }
}

/// Unit-length right singular vector of `B A` with the largest singular value.
#[derive(Debug, Clone)]
pub struct ArrowForm {
    pub v: Vector,
}

/// Re-factoring `B A = b_hat * a_hat` with `b_hat = U` orthonormal and
/// `a_hat = S V'` carrying the full activation-norm information.
#[derive(Debug, Clone)]
pub struct SpectrForm {
    pub b_hat: Matrix,
    pub a_hat: Matrix,
}

/// Reduced QR factors of `B`: `q` orthonormal m x r, `r_mat` upper
/// triangular r x r. Once stored, `B` itself can be discarded.
#[derive(Debug, Clone)]
pub struct SeqrForm {
    pub q: Matrix,
    pub r_mat: Matrix,
}

/// Optional per-method preprocessed representations for a whole library.
#[derive(Debug, Clone, Default)]
pub struct RoutedForms {
    pub arrow: Option<Vec<ArrowForm>>,
    pub spectr: Option<Vec<SpectrForm>>,
    pub seqr: Option<Vec<SeqrForm>>,
}

impl RoutedForms {
    pub fn is_empty(&self) -> bool {
        self.arrow.is_none() && self.spectr.is_none() && self.seqr.is_none()
    }
}

/// A library together with whatever forms and calibration stats have been
/// computed for it; the unit of container serialization.
#[derive(Debug, Clone)]
pub struct LibraryBundle {
    pub library: AdapterLibrary,
    pub forms: RoutedForms,
    pub stats: Option<CalibrationStats>,
    /// When set, raw `B` matrices are omitted on save and reconstructed
    /// from stored forms on load.
    pub discard_b: bool,
}

impl LibraryBundle {
    pub fn new(library: AdapterLibrary) -> Self {
        Self {
            library,
            forms: RoutedForms::default(),
            stats: None,
            discard_b: false,
        }
    }
}

/// Thin SVD of the product `B A` without materializing it: QR-reduce `B`,
/// decompose the small `R_B A`, and lift the left factor back through `Q_B`.
fn product_svd(b: &Matrix, a: &Matrix) -> Result<(Matrix, Vector, Matrix)> {
    let qr = linalg::reduced_qr(b)?;
    let g = qr.r.matmul(a)?;
    let budget = g.rows().min(g.cols());
    let svd = linalg::thin_svd_rank(&g, budget)?;
    let u = qr.q.matmul(&svd.u)?;
    Ok((u, svd.s, svd.v))
}

/// Arrow vector of one adapter: the principal input direction of `B A`.
pub fn build_arrow(b: &Matrix, a: &Matrix) -> Result<ArrowForm> {
    let (_, s, v) = product_svd(b, a)?;
    if s.get(0) == 0.0 {
        return Err(Error::DegenerateAdapter("<unnamed>".to_string()));
    }
    let col: Vec<f64> = (0..v.rows()).map(|i| v.get(i, 0)).collect();
    Ok(ArrowForm {
        v: Vector::new(col)?,
    })
}

/// Spectral form of one adapter, with rank budget exactly `r` (zero
/// singular values are kept so dimensions match the adapter rank).
pub fn build_spectr(b: &Matrix, a: &Matrix) -> Result<SpectrForm> {
    let (u, s, v) = product_svd(b, a)?;
    // a_hat = diag(s) * v'
    let mut a_hat = Matrix::zeros(s.dim(), v.rows());
    for i in 0..s.dim() {
        for j in 0..v.rows() {
            a_hat.set(i, j, s.get(i) * v.get(j, i));
        }
    }
    Ok(SpectrForm { b_hat: u, a_hat })
}

/// QR form of one adapter's `B`.
pub fn build_seqr(b: &Matrix) -> Result<SeqrForm> {
    let qr = linalg::reduced_qr(b)?;
    Ok(SeqrForm {
        q: qr.q,
        r_mat: qr.r,
    })
}
