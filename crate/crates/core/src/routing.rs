//! Scoring, selection, and application of adapter updates.
//!
//! Every scoring function returns one score per adapter, index-aligned with
//! the library. Selection is argmax with lowest-index tie-breaking so all
//! methods resolve ties identically and cross-method equality is testable.
//! Scoring loops are sequential with fixed summation order; identical
//! inputs produce bitwise-identical scores.

use serde::{Deserialize, Serialize};

use crate::adapter::{ArrowForm, LibraryBundle, SeqrForm, SpectrForm};
use crate::adapter::AdapterLibrary;
use crate::calibration::{self, CalibrationStats};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

/// Routing method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Naive,
    Arrow,
    Spectr,
    Lag,
    Seqr,
    Mu,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Naive,
        Method::Arrow,
        Method::Spectr,
        Method::Lag,
        Method::Seqr,
        Method::Mu,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::Arrow => "arrow",
            Method::Spectr => "spectr",
            Method::Lag => "lag",
            Method::Seqr => "seqr",
            Method::Mu => "mu",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "naive" => Ok(Method::Naive),
            "arrow" => Ok(Method::Arrow),
            "spectr" => Ok(Method::Spectr),
            "lag" => Ok(Method::Lag),
            "seqr" => Ok(Method::Seqr),
            "mu" => Ok(Method::Mu),
            other => Err(format!(
                "unknown method {other:?}, expected naive|arrow|spectr|lag|seqr|mu"
            )),
        }
    }
}

/// Frozen pretrained weights of the routed layer.
#[derive(Debug, Clone)]
pub struct BaseLayer {
    pub w: Matrix,
}

/// Outcome of scoring one query against a library.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub method: Method,
    pub scores: Vec<f64>,
    pub selected: usize,
}

/// SEQR scoring output: scores plus the per-adapter projected activations
/// `h_i = R_i z`, kept so the winner's update can be applied without
/// touching `B` again.
#[derive(Debug, Clone)]
pub struct SeqrScores {
    pub scores: Vec<f64>,
    pub h: Vec<Vector>,
    pub z: Vector,
}

/// Lowest index achieving the maximum score. `-inf` sentinels mark
/// filtered-out adapters and lose to every real score.
pub fn select(scores: &[f64]) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_nan() {
            return Err(Error::BadScore { index: i });
        }
        if s > scores[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Reference scores: `||B_i A_i x||_2` computed directly per adapter.
pub fn score_naive(lib: &AdapterLibrary, x: &Vector) -> Result<Vec<f64>> {
    (0..lib.n_adapters())
        .map(|i| Ok(linalg::norm2(&lib.update(i, x)?)))
        .collect()
}

/// Arrow scores `|v_i' x|`. Never z-scored: arrow vectors are unit length,
/// so their scores are already on a common scale.
pub fn score_arrow(forms: &[ArrowForm], x: &Vector) -> Result<Vec<f64>> {
    forms.iter().map(|f| Ok(f.v.dot(x)?.abs())).collect()
}

/// Spectral scores `||a_hat_i x||_2`, z-scored when stats are supplied.
pub fn score_spectr(
    forms: &[SpectrForm],
    x: &Vector,
    stats: Option<&CalibrationStats>,
) -> Result<Vec<f64>> {
    let raw: Vec<f64> = forms
        .iter()
        .map(|f| Ok(linalg::norm2(&linalg::matvec(&f.a_hat, x)?)))
        .collect::<Result<_>>()?;
    match stats {
        Some(st) => calibration::zscore(&raw, st),
        None => Ok(raw),
    }
}

/// SEQR scores: compute `z = A x` once, then `||R_i z||_2` per adapter
/// against the r x r factors only. The projected activations come back so
/// the caller can apply the winner as `W x + Q h`.
pub fn score_seqr(
    forms: &[SeqrForm],
    shared_a: &Matrix,
    x: &Vector,
    stats: Option<&CalibrationStats>,
) -> Result<SeqrScores> {
    let z = linalg::matvec(shared_a, x)?;
    let mut h = Vec::with_capacity(forms.len());
    let mut raw = Vec::with_capacity(forms.len());
    for f in forms {
        let hi = linalg::matvec(&f.r_mat, &z)?;
        raw.push(linalg::norm2(&hi));
        h.push(hi);
    }
    let scores = match stats {
        Some(st) => calibration::zscore(&raw, st)?,
        None => raw,
    };
    Ok(SeqrScores { scores, h, z })
}

/// Two-stage routing: arrow top-k filter, then spectral selection inside
/// the filtered set. Adapters outside the filter keep `-inf` scores so the
/// decision stays index-aligned with the library.
pub fn route_lag(
    arrows: &[ArrowForm],
    spectr: &[SpectrForm],
    x: &Vector,
    k: usize,
    stats: Option<&CalibrationStats>,
) -> Result<RoutingDecision> {
    let n = arrows.len();
    if k == 0 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    let arrow_scores = score_arrow(arrows, x)?;
    let kept = top_k_indices(&arrow_scores, k);

    let mut scores = vec![f64::NEG_INFINITY; n];
    for &i in &kept {
        let raw = linalg::norm2(&linalg::matvec(&spectr[i].a_hat, x)?);
        scores[i] = match stats {
            Some(st) => {
                if st.mu.len() < n || st.sigma.len() < n {
                    return Err(Error::LengthMismatch {
                        left: n,
                        right: st.mu.len().min(st.sigma.len()),
                    });
                }
                (raw - st.mu[i]) / st.sigma[i]
            }
            None => raw,
        };
    }
    let selected = select(&scores)?;
    Ok(RoutingDecision {
        method: Method::Lag,
        scores,
        selected,
    })
}

/// Indices of the k largest scores, ties resolved toward lower indices.
fn top_k_indices(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx
}

/// `y = W x + Q h` for a scored winner; equals `W x + B A x` because
/// `Q (R A x) = B A x`.
pub fn apply_seqr(
    base: &BaseLayer,
    x: &Vector,
    winner: &SeqrForm,
    h_winner: &Vector,
) -> Result<Vector> {
    let wx = linalg::matvec(&base.w, x)?;
    let update = linalg::matvec(&winner.q, h_winner)?;
    wx.add(&update)
}

/// `y = W x + B A x` computed through the raw factors.
pub fn apply_generic(base: &BaseLayer, x: &Vector, b: &Matrix, a: &Matrix) -> Result<Vector> {
    let wx = linalg::matvec(&base.w, x)?;
    let z = linalg::matvec(a, x)?;
    let update = linalg::matvec(b, &z)?;
    wx.add(&update)
}

/// Mean-update baseline: `y = W x + (1/N) sum_i B_i A_i x`.
pub fn mu_merge(lib: &AdapterLibrary, base: &BaseLayer, x: &Vector) -> Result<Vector> {
    let n = lib.n_adapters();
    if n == 0 {
        return Err(Error::Empty("adapter library"));
    }
    let mut acc = Vector::zeros(lib.dims().0);
    for i in 0..n {
        acc = acc.add(&lib.update(i, x)?)?;
    }
    let wx = linalg::matvec(&base.w, x)?;
    wx.add(&acc.scale(1.0 / n as f64))
}

/// Raw (uncalibrated) score of a single adapter under a method; the
/// quantity calibration takes statistics over.
pub fn raw_score_adapter(
    bundle: &LibraryBundle,
    method: Method,
    i: usize,
    x: &Vector,
) -> Result<f64> {
    match method {
        Method::Naive => Ok(linalg::norm2(&bundle.library.update(i, x)?)),
        Method::Spectr => {
            let forms = bundle
                .forms
                .spectr
                .as_ref()
                .ok_or(Error::MissingForms("spectral"))?;
            Ok(linalg::norm2(&linalg::matvec(&forms[i].a_hat, x)?))
        }
        Method::Seqr => {
            let forms = bundle
                .forms
                .seqr
                .as_ref()
                .ok_or(Error::MissingForms("QR"))?;
            let a = bundle
                .library
                .shared_a()
                .ok_or(Error::SharedARequired("QR scoring"))?;
            let z = linalg::matvec(a, x)?;
            Ok(linalg::norm2(&linalg::matvec(&forms[i].r_mat, &z)?))
        }
        Method::Arrow => {
            let forms = bundle
                .forms
                .arrow
                .as_ref()
                .ok_or(Error::MissingForms("arrow"))?;
            Ok(forms[i].v.dot(x)?.abs())
        }
        Method::Lag | Method::Mu => Err(Error::NotCalibratable(method.as_str())),
    }
}

/// One-call routing over a bundle. `k` only matters for the two-stage
/// method; `stats` only for the z-scored ones. The mean-merge baseline
/// makes no per-adapter choice, so it reports uniform zero scores and
/// falls to index 0 by tie-break.
pub fn route(
    bundle: &LibraryBundle,
    method: Method,
    x: &Vector,
    k: usize,
    stats: Option<&CalibrationStats>,
) -> Result<RoutingDecision> {
    let reject_stats = |method: Method| -> Result<()> {
        if stats.is_some() {
            Err(Error::NotCalibratable(method.as_str()))
        } else {
            Ok(())
        }
    };
    let (scores, method) = match method {
        Method::Naive => {
            reject_stats(method)?;
            (score_naive(&bundle.library, x)?, method)
        }
        Method::Arrow => {
            reject_stats(method)?;
            let forms = bundle
                .forms
                .arrow
                .as_ref()
                .ok_or(Error::MissingForms("arrow"))?;
            (score_arrow(forms, x)?, method)
        }
        Method::Spectr => {
            let forms = bundle
                .forms
                .spectr
                .as_ref()
                .ok_or(Error::MissingForms("spectral"))?;
            (score_spectr(forms, x, stats)?, method)
        }
        Method::Seqr => {
            let forms = bundle
                .forms
                .seqr
                .as_ref()
                .ok_or(Error::MissingForms("QR"))?;
            let a = bundle
                .library
                .shared_a()
                .ok_or(Error::SharedARequired("QR scoring"))?;
            (score_seqr(forms, a, x, stats)?.scores, method)
        }
        Method::Lag => {
            let arrows = bundle
                .forms
                .arrow
                .as_ref()
                .ok_or(Error::MissingForms("arrow"))?;
            let spectr = bundle
                .forms
                .spectr
                .as_ref()
                .ok_or(Error::MissingForms("spectral"))?;
            return route_lag(arrows, spectr, x, k, stats);
        }
        Method::Mu => {
            reject_stats(method)?;
            (vec![0.0; bundle.library.n_adapters()], method)
        }
    };
    let selected = select(&scores)?;
    Ok(RoutingDecision {
        method,
        scores,
        selected,
    })
}
