//! Similarity matrices of transformed batches, the coherence losses and
//! their analytic gradient with respect to the transition matrix.
//!
//! For a batch of `n` aligned pairs, `S[j][k]` compares transformed input `j`
//! with transformed paraphrase `k`. Paraphrase pairs sit on the diagonal and
//! should score 1; every off-diagonal entry pairs captions of different
//! images and should score 0. The loss is
//!
//! ```text
//! diag    = mean_k |S_kk - 1|
//! nondiag = mean_{j != k} |S_jk|          (0 when n = 1)
//! total   = lambda * nondiag + (1 - lambda) * diag
//! ```

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};

use super::matrix::{transform_batch, NormalizationMode, TransitionMatrix};
use crate::corpus::ParaphraseBatch;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Normalized similarities `S = N * raw` (elementwise).
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix<F> {
    pub normalized: Array2<F>,
    pub raw: Array2<F>,
    pub normalizer: Array2<F>,
}

impl<F: Scalar> SimilarityMatrix<F> {
    /// Wraps an already-normalized matrix (unit normalizer).
    pub fn from_normalized(normalized: Array2<F>) -> Self {
        let normalizer = Array2::ones(normalized.raw_dim());
        SimilarityMatrix {
            raw: normalized.clone(),
            normalized,
            normalizer,
        }
    }

    pub fn n(&self) -> usize {
        self.normalized.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown<F> {
    pub diagonal: F,
    pub non_diagonal: F,
    pub total: F,
    pub lambda: F,
}

impl<F: Scalar> LossBreakdown<F> {
    pub fn new(diagonal: F, non_diagonal: F, lambda: F) -> Self {
        LossBreakdown {
            diagonal,
            non_diagonal,
            total: lambda * non_diagonal + (F::one() - lambda) * diagonal,
            lambda,
        }
    }

    pub fn to_f64(self) -> LossBreakdown<f64> {
        LossBreakdown {
            diagonal: self.diagonal.to_f64_lossy(),
            non_diagonal: self.non_diagonal.to_f64_lossy(),
            total: self.total.to_f64_lossy(),
            lambda: self.lambda.to_f64_lossy(),
        }
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "lambda must lie in [0, 1], got {lambda}"
        )))
    }
}

fn row_norms<F: Scalar>(m: &Array2<F>, side: &'static str) -> Result<Array1<F>> {
    let norms = m.map_axis(Axis(1), |r| r.dot(&r).sqrt());
    match norms.iter().position(|&v| !(v > F::zero())) {
        Some(row) => Err(Error::DegenerateVector { side, row }),
        None => Ok(norms),
    }
}

// N_jk = 1 / (a_j b_k)
fn outer_reciprocal<F: Scalar>(a: &Array1<F>, b: &Array1<F>) -> Array2<F> {
    Array2::from_shape_fn((a.len(), b.len()), |(j, k)| F::one() / (a[j] * b[k]))
}

/// `raw = Î P̂ᵀ` normalized either by the transformed norms (cosine) or by
/// the norms of the untransformed batch rows.
pub fn build_similarity_matrix<F: Scalar>(
    transformed_inputs: &Array2<F>,
    transformed_paraphrases: &Array2<F>,
    batch: &ParaphraseBatch<F>,
    mode: NormalizationMode,
) -> Result<SimilarityMatrix<F>> {
    if transformed_inputs.dim() != transformed_paraphrases.dim() {
        return Err(Error::Data("transformed sides differ in shape".into()));
    }
    let raw = transformed_inputs.dot(&transformed_paraphrases.t());
    let normalizer = match mode {
        NormalizationMode::CosineTransformed => outer_reciprocal(
            &row_norms(transformed_inputs, "transformed input")?,
            &row_norms(transformed_paraphrases, "transformed paraphrase")?,
        ),
        NormalizationMode::PaperLiteral => {
            if batch.len() != transformed_inputs.nrows() {
                return Err(Error::Data("batch and transformed rows differ".into()));
            }
            outer_reciprocal(
                &row_norms(&batch.inputs, "input")?,
                &row_norms(&batch.paraphrases, "paraphrase")?,
            )
        }
    };
    let normalized = &normalizer * &raw;
    Ok(SimilarityMatrix {
        normalized,
        raw,
        normalizer,
    })
}

fn check_square<F>(s: &ArrayView2<'_, F>) -> Result<usize> {
    let (r, c) = s.dim();
    if r != c || r == 0 {
        return Err(Error::Data(format!(
            "similarity matrix must be square and non-empty, got {r}x{c}"
        )));
    }
    Ok(r)
}

pub fn compute_loss<F: Scalar>(s: &SimilarityMatrix<F>, lambda: f64) -> Result<LossBreakdown<F>> {
    check_lambda(lambda)?;
    let view = s.normalized.view();
    let n = check_square(&view)?;
    let mut diag = F::zero();
    let mut off = F::zero();
    for ((j, k), &v) in view.indexed_iter() {
        if j == k {
            diag = diag + (v - F::one()).abs();
        } else {
            off = off + v.abs();
        }
    }
    let diag = diag / F::from_count(n);
    let off = if n > 1 {
        off / F::from_count(n * (n - 1))
    } else {
        F::zero()
    };
    Ok(LossBreakdown::new(diag, off, F::lit(lambda)))
}

// Subgradient of |u| with 0 at the kink.
fn sign<F: Scalar>(u: F) -> F {
    if u > F::zero() {
        F::one()
    } else if u < F::zero() {
        -F::one()
    } else {
        F::zero()
    }
}

/// `d total / d S`, entrywise.
fn loss_wrt_similarity<F: Scalar>(s: &Array2<F>, lambda: F) -> Array2<F> {
    let n = s.nrows();
    let diag_w = (F::one() - lambda) / F::from_count(n);
    let off_w = if n > 1 {
        lambda / F::from_count(n * (n - 1))
    } else {
        F::zero()
    };
    Array2::from_shape_fn(s.raw_dim(), |(j, k)| {
        let v = s[[j, k]];
        if j == k {
            diag_w * sign(v - F::one())
        } else {
            off_w * sign(v)
        }
    })
}

// Back-propagates through x -> x / |x| row-wise: g - (g . x̂) x̂, scaled by 1/|x|.
fn through_row_normalization<F: Scalar>(
    grad_unit: &Array2<F>,
    unit: &Array2<F>,
    norms: &Array1<F>,
) -> Array2<F> {
    let mut out = grad_unit.clone();
    Zip::from(out.rows_mut())
        .and(unit.rows())
        .and(norms)
        .for_each(|mut g, u, &norm| {
            let proj = g.dot(&u);
            Zip::from(&mut g).and(&u).for_each(|gi, &ui| {
                *gi = (*gi - proj * ui) / norm;
            });
        });
    out
}

/// Total loss of one batch and its gradient with respect to `W`.
pub fn loss_gradient<F: Scalar>(
    w: &TransitionMatrix<F>,
    batch: &ParaphraseBatch<F>,
    lambda: f64,
    mode: NormalizationMode,
) -> Result<(LossBreakdown<F>, Array2<F>)> {
    check_lambda(lambda)?;
    let (ti, tp) = transform_batch(w, batch)?;
    let sim = build_similarity_matrix(&ti, &tp, batch, mode)?;
    let loss = compute_loss(&sim, lambda)?;
    let d_s = loss_wrt_similarity(&sim.normalized, F::lit(lambda));

    let (d_ti, d_tp) = match mode {
        NormalizationMode::CosineTransformed => {
            let ni = row_norms(&ti, "transformed input")?;
            let np = row_norms(&tp, "transformed paraphrase")?;
            let ui = &ti / &ni.view().insert_axis(Axis(1));
            let up = &tp / &np.view().insert_axis(Axis(1));
            let d_ui = d_s.dot(&up);
            let d_up = d_s.t().dot(&ui);
            (
                through_row_normalization(&d_ui, &ui, &ni),
                through_row_normalization(&d_up, &up, &np),
            )
        }
        NormalizationMode::PaperLiteral => {
            let weighted = &d_s * &sim.normalizer;
            (weighted.dot(&tp), weighted.t().dot(&ti))
        }
    };
    // Î = I Wᵀ, so dL/dW = dÎᵀ I + dP̂ᵀ P.
    let grad = d_ti.t().dot(&batch.inputs) + d_tp.t().dot(&batch.paraphrases);
    Ok((loss, grad))
}

/// Worst-case deviations from the two coherence conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceReport<F> {
    /// `max_k |S_kk - 1|`
    pub condition1_gap: F,
    /// `max_{j != k} |S_jk|`
    pub condition2_mass: F,
}

pub fn coherence_conditions_report<F: Scalar>(
    s: &SimilarityMatrix<F>,
) -> Result<CoherenceReport<F>> {
    let view = s.normalized.view();
    check_square(&view)?;
    let mut gap = F::zero();
    let mut mass = F::zero();
    for ((j, k), &v) in view.indexed_iter() {
        if j == k {
            gap = gap.max((v - F::one()).abs());
        } else {
            mass = mass.max(v.abs());
        }
    }
    Ok(CoherenceReport {
        condition1_gap: gap,
        condition2_mass: mass,
    })
}
