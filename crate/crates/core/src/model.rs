//! Bilinear similarity `s(a, b) = aᵀ W b` under five constraint families on `W`,
//! the logistic choice rule over two references, and the triplet negative
//! log-likelihood with analytic gradients.
//!
//! Every family stores its parameters as one flat row-major buffer so the
//! optimizer can treat them uniformly:
//!
//! | family               | stored           | effective `W`   |
//! |----------------------|------------------|-----------------|
//! | `identity`           | nothing          | `I`             |
//! | `diagonal_nonneg`    | `v` (k)          | `diag(|v|)`     |
//! | `diagonal_signed_l2` | `w` (k), `λ`     | `diag(w)`       |
//! | `symmetric`          | `V` (k×k)        | `VᵀV`           |
//! | `unconstrained`      | `W` (k×k)        | `W`             |

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    Identity,
    DiagonalNonneg,
    DiagonalSignedL2,
    Symmetric,
    Unconstrained,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Identity,
        Family::DiagonalNonneg,
        Family::DiagonalSignedL2,
        Family::Symmetric,
        Family::Unconstrained,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Family::Identity => "identity",
            Family::DiagonalNonneg => "diagonal_nonneg",
            Family::DiagonalSignedL2 => "diagonal_signed_l2",
            Family::Symmetric => "symmetric",
            Family::Unconstrained => "unconstrained",
        }
    }

    /// Effective free parameters. `Symmetric` counts `k(k+1)/2` even though
    /// `V` is stored in full, since `VᵀV` only has that many degrees of freedom.
    pub fn param_count(self, k: usize) -> u64 {
        let k = k as u64;
        match self {
            Family::Identity => 0,
            Family::DiagonalNonneg | Family::DiagonalSignedL2 => k,
            Family::Symmetric => k * (k + 1) / 2,
            Family::Unconstrained => k * k,
        }
    }

    /// Number of reals actually stored for this family.
    pub fn stored_len(self, k: usize) -> usize {
        match self {
            Family::Identity => 0,
            Family::DiagonalNonneg | Family::DiagonalSignedL2 => k,
            Family::Symmetric | Family::Unconstrained => k * k,
        }
    }
}

impl serde::Serialize for Family {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.tag())
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Family> {
        Family::ALL
            .into_iter()
            .find(|f| f.tag() == s)
            .ok_or_else(|| Error::UnsupportedFamily(s.to_string()))
    }
}

pub fn param_count(family: Family, k: usize) -> u64 {
    family.param_count(k)
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightModel {
    Identity {
        k: usize,
    },
    DiagonalNonneg {
        v: Vec<f64>,
    },
    DiagonalSignedL2 {
        w: Vec<f64>,
        lambda: f64,
    },
    /// `v` is the row-major k×k factor with `W = VᵀV`.
    Symmetric {
        k: usize,
        v: Vec<f64>,
    },
    /// Row-major k×k.
    Unconstrained {
        k: usize,
        w: Vec<f64>,
    },
}

/// Projected triplets: row `i` of `q`, `r1`, `r2` are the query and two references.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletBatch {
    pub k: usize,
    pub q: Vec<f64>,
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    pub chosen: Vec<crate::data::Choice>,
}

impl TripletBatch {
    pub fn len(&self) -> usize {
        self.chosen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chosen.is_empty()
    }

    fn check(&self) -> Result<()> {
        let want = self.chosen.len() * self.k;
        for got in [self.q.len(), self.r1.len(), self.r2.len()] {
            if got != want {
                return Err(Error::Dimension {
                    expected: want,
                    got,
                });
            }
        }
        Ok(())
    }
}

/// Triplets in factored form: row `i` holds the query `a_i` and the
/// difference `b_i = chosen − rejected`, so `P(human choice) = σ(a_iᵀ W b_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredTriplets {
    pub k: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl FactoredTriplets {
    pub fn len(&self) -> usize {
        self.a.len().checked_div(self.k).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn a(&self, i: usize) -> &[f64] {
        &self.a[i * self.k..(i + 1) * self.k]
    }

    pub fn b(&self, i: usize) -> &[f64] {
        &self.b[i * self.k..(i + 1) * self.k]
    }

    pub fn from_batch(batch: &TripletBatch) -> Result<Self> {
        batch.check()?;
        let k = batch.k;
        let mut b = Vec::with_capacity(batch.q.len());
        for (i, c) in batch.chosen.iter().enumerate() {
            let r1 = &batch.r1[i * k..(i + 1) * k];
            let r2 = &batch.r2[i * k..(i + 1) * k];
            let (win, lose) = match c {
                crate::data::Choice::Ref1 => (r1, r2),
                crate::data::Choice::Ref2 => (r2, r1),
            };
            b.extend(win.iter().zip(lose).map(|(x, y)| x - y));
        }
        Ok(FactoredTriplets {
            k,
            a: batch.q.clone(),
            b,
        })
    }

    /// Builds rows from a projected table and resolved triplets.
    pub fn from_indexed(
        table: &crate::data::EmbeddingTable,
        triplets: &[crate::data::IndexedTriplet],
    ) -> Self {
        let k = table.dim();
        let mut a = Vec::with_capacity(triplets.len() * k);
        let mut b = Vec::with_capacity(triplets.len() * k);
        for t in triplets {
            let (win, lose) = t.winner_loser();
            a.extend_from_slice(table.row(t.query));
            b.extend(
                table
                    .row(win)
                    .iter()
                    .zip(table.row(lose))
                    .map(|(x, y)| x - y),
            );
        }
        FactoredTriplets { k, a, b }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out = M x` for row-major square `m`.
#[inline]
fn matvec(m: &[f64], x: &[f64], out: &mut [f64]) {
    let k = x.len();
    for (o, row) in out.iter_mut().zip(m.chunks_exact(k)) {
        *o = dot(row, x);
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `−log σ(z)`, stable for large `|z|`.
pub fn neg_log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

impl WeightModel {
    /// Starting point for training; every family begins at `W = I`.
    pub fn init(family: Family, k: usize, lambda: f64) -> WeightModel {
        let eye = || {
            let mut m = vec![0.0; k * k];
            for i in 0..k {
                m[i * k + i] = 1.0;
            }
            m
        };
        match family {
            Family::Identity => WeightModel::Identity { k },
            Family::DiagonalNonneg => WeightModel::DiagonalNonneg { v: vec![1.0; k] },
            Family::DiagonalSignedL2 => WeightModel::DiagonalSignedL2 {
                w: vec![1.0; k],
                lambda,
            },
            Family::Symmetric => WeightModel::Symmetric { k, v: eye() },
            Family::Unconstrained => WeightModel::Unconstrained { k, w: eye() },
        }
    }

    /// Rebuilds a model from its stored parameter buffer.
    pub fn from_params(
        family: Family,
        k: usize,
        params: Vec<f64>,
        lambda: f64,
    ) -> Result<WeightModel> {
        if k == 0 {
            return Err(Error::invalid("k", "must be at least 1"));
        }
        let want = family.stored_len(k);
        if params.len() != want {
            return Err(Error::Dimension {
                expected: want,
                got: params.len(),
            });
        }
        if params.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("parameters", "non-finite value"));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::invalid(
                "lambda",
                format!("{lambda} is not a nonnegative real"),
            ));
        }
        Ok(match family {
            Family::Identity => WeightModel::Identity { k },
            Family::DiagonalNonneg => WeightModel::DiagonalNonneg { v: params },
            Family::DiagonalSignedL2 => WeightModel::DiagonalSignedL2 { w: params, lambda },
            Family::Symmetric => WeightModel::Symmetric { k, v: params },
            Family::Unconstrained => WeightModel::Unconstrained { k, w: params },
        })
    }

    pub fn family(&self) -> Family {
        match self {
            WeightModel::Identity { .. } => Family::Identity,
            WeightModel::DiagonalNonneg { .. } => Family::DiagonalNonneg,
            WeightModel::DiagonalSignedL2 { .. } => Family::DiagonalSignedL2,
            WeightModel::Symmetric { .. } => Family::Symmetric,
            WeightModel::Unconstrained { .. } => Family::Unconstrained,
        }
    }

    pub fn k(&self) -> usize {
        match self {
            WeightModel::Identity { k }
            | WeightModel::Symmetric { k, .. }
            | WeightModel::Unconstrained { k, .. } => *k,
            WeightModel::DiagonalNonneg { v } => v.len(),
            WeightModel::DiagonalSignedL2 { w, .. } => w.len(),
        }
    }

    pub fn lambda(&self) -> f64 {
        match self {
            WeightModel::DiagonalSignedL2 { lambda, .. } => *lambda,
            _ => 0.0,
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            WeightModel::Identity { .. } => &[],
            WeightModel::DiagonalNonneg { v } => v,
            WeightModel::DiagonalSignedL2 { w, .. } => w,
            WeightModel::Symmetric { v, .. } => v,
            WeightModel::Unconstrained { w, .. } => w,
        }
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        match self {
            WeightModel::Identity { .. } => &mut [],
            WeightModel::DiagonalNonneg { v } => v,
            WeightModel::DiagonalSignedL2 { w, .. } => w,
            WeightModel::Symmetric { v, .. } => v,
            WeightModel::Unconstrained { w, .. } => w,
        }
    }

    /// Materialized row-major `W`.
    pub fn effective_weights(&self) -> Vec<f64> {
        let k = self.k();
        let mut out = vec![0.0; k * k];
        match self {
            WeightModel::Identity { .. } => (0..k).for_each(|i| out[i * k + i] = 1.0),
            WeightModel::DiagonalNonneg { v } => v
                .iter()
                .enumerate()
                .for_each(|(i, x)| out[i * k + i] = x.abs()),
            WeightModel::DiagonalSignedL2 { w, .. } => {
                w.iter().enumerate().for_each(|(i, x)| out[i * k + i] = *x)
            }
            WeightModel::Symmetric { v, .. } => {
                for i in 0..k {
                    for j in 0..k {
                        out[i * k + j] = (0..k).map(|r| v[r * k + i] * v[r * k + j]).sum();
                    }
                }
            }
            WeightModel::Unconstrained { w, .. } => out.copy_from_slice(w),
        }
        out
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.k() {
            return Err(Error::Dimension {
                expected: self.k(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `aᵀ W b` without materializing `W`.
    pub fn similarity(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        Ok(self.bilinear(a, b, &mut vec![0.0; 2 * self.k()]))
    }

    /// Unchecked `aᵀ W b`; `scratch` holds at least `2k` values.
    fn bilinear(&self, a: &[f64], b: &[f64], scratch: &mut [f64]) -> f64 {
        match self {
            WeightModel::Identity { .. } => dot(a, b),
            WeightModel::DiagonalNonneg { v } => v
                .iter()
                .zip(a)
                .zip(b)
                .map(|((v, a), b)| v.abs() * a * b)
                .sum(),
            WeightModel::DiagonalSignedL2 { w, .. } => {
                w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
            }
            WeightModel::Symmetric { k, v } => {
                let (va, vb) = scratch[..2 * k].split_at_mut(*k);
                matvec(v, a, va);
                matvec(v, b, vb);
                dot(va, vb)
            }
            WeightModel::Unconstrained { k, w } => {
                let wb = &mut scratch[..*k];
                matvec(w, b, wb);
                dot(a, wb)
            }
        }
    }

    /// `P(choose r1 | q, r1, r2) = σ(qᵀ W (r1 − r2))`.
    pub fn choice_probability(&self, q: &[f64], r1: &[f64], r2: &[f64]) -> Result<f64> {
        self.check_dim(r1)?;
        self.check_dim(r2)?;
        let diff: Vec<f64> = r1.iter().zip(r2).map(|(x, y)| x - y).collect();
        Ok(sigmoid(self.similarity(q, &diff)?))
    }

    /// Logit of the human choice for every factored row.
    pub fn logits(&self, data: &FactoredTriplets) -> Vec<f64> {
        let mut scratch = vec![0.0; 2 * self.k()];
        (0..data.len())
            .map(|i| self.bilinear(data.a(i), data.b(i), &mut scratch))
            .collect()
    }

    /// `λ‖w‖²` for the signed-diagonal baseline, otherwise 0.
    pub fn penalty(&self) -> f64 {
        match self {
            WeightModel::DiagonalSignedL2 { w, lambda } => lambda * dot(w, w),
            _ => 0.0,
        }
    }

    /// Loss and gradient over `batch`; see [`WeightModel::nll_and_gradient_rows`].
    pub fn nll_and_gradient(&self, batch: &TripletBatch) -> Result<(f64, Vec<f64>)> {
        if batch.k != self.k() {
            return Err(Error::Dimension {
                expected: self.k(),
                got: batch.k,
            });
        }
        let data = FactoredTriplets::from_batch(batch)?;
        Ok(self.nll_and_gradient_rows(&data, 0..data.len()))
    }

    /// `−Σ log P(human choice) + penalty` over the selected rows, and its
    /// gradient with respect to the stored parameters.
    pub fn nll_and_gradient_rows(
        &self,
        data: &FactoredTriplets,
        rows: impl IntoIterator<Item = usize>,
    ) -> (f64, Vec<f64>) {
        let k = self.k();
        let mut grad = vec![0.0; self.params().len()];
        let mut loss = 0.0;
        let mut scratch = vec![0.0; 2 * k];
        for i in rows {
            let (a, b) = (data.a(i), data.b(i));
            let z = self.bilinear(a, b, &mut scratch);
            loss += neg_log_sigmoid(z);
            // d(−log σ(z))/dz
            let g = -sigmoid(-z);
            match self {
                WeightModel::Identity { .. } => {}
                WeightModel::DiagonalNonneg { v } => {
                    for j in 0..k {
                        grad[j] += g * sign0(v[j]) * a[j] * b[j];
                    }
                }
                WeightModel::DiagonalSignedL2 { .. } => {
                    for j in 0..k {
                        grad[j] += g * a[j] * b[j];
                    }
                }
                WeightModel::Symmetric { .. } => {
                    // scratch holds Va and Vb from `bilinear`.
                    let (va, vb) = scratch.split_at(k);
                    for r in 0..k {
                        let row = &mut grad[r * k..(r + 1) * k];
                        let (gva, gvb) = (g * va[r], g * vb[r]);
                        for c in 0..k {
                            row[c] += gvb * a[c] + gva * b[c];
                        }
                    }
                }
                WeightModel::Unconstrained { .. } => {
                    for r in 0..k {
                        let ga = g * a[r];
                        let row = &mut grad[r * k..(r + 1) * k];
                        for c in 0..k {
                            row[c] += ga * b[c];
                        }
                    }
                }
            }
        }
        if let WeightModel::DiagonalSignedL2 { w, lambda } = self {
            loss += self.penalty();
            for (gj, wj) in grad.iter_mut().zip(w) {
                *gj += 2.0 * lambda * wj;
            }
        }
        (loss, grad)
    }
}

fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Choice;
    use approx::assert_abs_diff_eq;

    #[test]
    fn effective_weights_by_family() {
        let m = WeightModel::DiagonalNonneg { v: vec![-2.0, 3.0] };
        assert_eq!(m.effective_weights(), vec![2.0, 0.0, 0.0, 3.0]);

        let m = WeightModel::Symmetric {
            k: 2,
            v: vec![1.0, 0.0, 0.0, 1.0],
        };
        assert_eq!(m.effective_weights(), vec![1.0, 0.0, 0.0, 1.0]);

        // VᵀV with V = [[1,1],[0,1]]
        let m = WeightModel::Symmetric {
            k: 2,
            v: vec![1.0, 1.0, 0.0, 1.0],
        };
        assert_eq!(m.effective_weights(), vec![1.0, 1.0, 1.0, 2.0]);

        assert_eq!(
            WeightModel::Identity { k: 2 }.effective_weights(),
            vec![1.0, 0.0, 0.0, 1.0]
        );
    }

    #[test]
    fn similarity_hand_values() {
        let id = WeightModel::Identity { k: 2 };
        assert_eq!(id.similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);

        let d = WeightModel::DiagonalNonneg { v: vec![2.0, -1.0] };
        assert_eq!(d.similarity(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 3.0);

        let u = WeightModel::Unconstrained {
            k: 2,
            w: vec![0.0, 1.0, 0.0, 0.0],
        };
        assert_eq!(u.similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(u.similarity(&[0.0, 1.0], &[1.0, 0.0]).unwrap(), 0.0);

        assert!(matches!(
            id.similarity(&[1.0], &[1.0, 2.0]),
            Err(Error::Dimension {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn choice_probability_hand_values() {
        let id = WeightModel::Identity { k: 2 };
        let p = id
            .choice_probability(&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0])
            .unwrap();
        assert_abs_diff_eq!(p, 0.731_058_578_630_004_9, epsilon = 1e-15);
        let p = id
            .choice_probability(&[1.0, 2.0], &[3.0, 4.0], &[3.0, 4.0])
            .unwrap();
        assert_eq!(p, 0.5);
    }

    #[test]
    fn stable_logistic_extremes() {
        assert_eq!(sigmoid(800.0), 1.0);
        assert_eq!(sigmoid(-800.0), 0.0);
        assert_abs_diff_eq!(neg_log_sigmoid(-800.0), 800.0, epsilon = 1e-12);
        assert!(neg_log_sigmoid(800.0) >= 0.0 && neg_log_sigmoid(800.0) < 1e-300);
        assert_abs_diff_eq!(
            neg_log_sigmoid(0.0),
            std::f64::consts::LN_2,
            epsilon = 1e-16
        );
    }

    #[test]
    fn unconstrained_gradient_at_zero() {
        let m = WeightModel::Unconstrained {
            k: 2,
            w: vec![0.0; 4],
        };
        let batch = TripletBatch {
            k: 2,
            q: vec![1.0, 0.0],
            r1: vec![0.0, 1.0],
            r2: vec![0.0, 0.0],
            chosen: vec![Choice::Ref1],
        };
        let (loss, grad) = m.nll_and_gradient(&batch).unwrap();
        assert_abs_diff_eq!(loss, std::f64::consts::LN_2, epsilon = 1e-15);
        assert_eq!(grad, vec![0.0, -0.5, 0.0, 0.0]);
    }

    #[test]
    fn identical_references_give_log_two() {
        for family in Family::ALL {
            let m = WeightModel::init(family, 3, 0.0);
            let batch = TripletBatch {
                k: 3,
                q: vec![0.3, -1.0, 2.0],
                r1: vec![1.0, 1.0, 1.0],
                r2: vec![1.0, 1.0, 1.0],
                chosen: vec![Choice::Ref2],
            };
            let (loss, _) = m.nll_and_gradient(&batch).unwrap();
            assert_abs_diff_eq!(loss, std::f64::consts::LN_2, epsilon = 1e-15);
        }
    }

    #[test]
    fn diagonal_zero_coordinate_is_stationary() {
        let m = WeightModel::DiagonalNonneg { v: vec![0.0, 1.0] };
        let batch = TripletBatch {
            k: 2,
            q: vec![1.0, 1.0],
            r1: vec![2.0, 1.0],
            r2: vec![0.0, 0.0],
            chosen: vec![Choice::Ref1],
        };
        let (_, grad) = m.nll_and_gradient(&batch).unwrap();
        assert_eq!(grad[0], 0.0);
        assert!(grad[1] < 0.0);
    }

    #[test]
    fn signed_l2_penalty_enters_loss_and_gradient() {
        let m = WeightModel::DiagonalSignedL2 {
            w: vec![2.0, -1.0],
            lambda: 0.5,
        };
        let batch = TripletBatch {
            k: 2,
            q: vec![0.0, 0.0],
            r1: vec![1.0, 1.0],
            r2: vec![0.0, 0.0],
            chosen: vec![Choice::Ref1],
        };
        let (loss, grad) = m.nll_and_gradient(&batch).unwrap();
        assert_abs_diff_eq!(loss, std::f64::consts::LN_2 + 0.5 * 5.0, epsilon = 1e-15);
        assert_eq!(grad, vec![2.0, -1.0]);
    }

    #[test]
    fn param_counts() {
        assert_eq!(param_count(Family::Unconstrained, 4096), 16_777_216);
        assert_eq!(param_count(Family::Symmetric, 4096), 8_390_656);
        assert_eq!(param_count(Family::DiagonalNonneg, 7), 7);
        assert_eq!(param_count(Family::DiagonalSignedL2, 7), 7);
        assert_eq!(param_count(Family::Identity, 4096), 0);
        assert_eq!(Family::Symmetric.stored_len(3), 9);
    }

    #[test]
    fn family_tags_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.tag().parse::<Family>().unwrap(), f);
        }
        assert!(matches!(
            "full".parse::<Family>(),
            Err(Error::UnsupportedFamily(_))
        ));
    }

    #[test]
    fn from_params_checks_length() {
        assert!(WeightModel::from_params(Family::Unconstrained, 2, vec![0.0; 3], 0.0).is_err());
        assert!(WeightModel::from_params(Family::Symmetric, 2, vec![0.0; 4], 0.0).is_ok());
        assert!(WeightModel::from_params(Family::DiagonalSignedL2, 2, vec![0.0; 2], -1.0).is_err());
    }
}
