//! Principal components of a reference corpus and the projection `f: Rᵈ → Rᵏ`.
//!
//! Directions come from the mean-centered corpus, but by default vectors are
//! projected *without* subtracting the corpus mean: centering changes the
//! angles between embeddings, and those angles are what the upstream
//! classifier's softmax consumes. `centered_projection` switches to the
//! textbook behaviour.

use nalgebra::DMatrix;

use crate::data::EmbeddingTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PcaProjection {
    k: usize,
    d: usize,
    /// Row-major k×d, orthonormal rows in order of decreasing variance.
    components: Vec<f64>,
    mean: Vec<f64>,
    variances: Vec<f64>,
    pub centered_projection: bool,
}

impl PcaProjection {
    /// Assembles a projection from stored parts, checking shapes and orthonormality.
    pub fn from_parts(
        k: usize,
        d: usize,
        components: Vec<f64>,
        mean: Vec<f64>,
        variances: Vec<f64>,
        centered_projection: bool,
    ) -> Result<Self> {
        if k == 0 || k > d {
            return Err(Error::RankOutOfRange { k, max: d });
        }
        if components.len() != k * d {
            return Err(Error::Dimension {
                expected: k * d,
                got: components.len(),
            });
        }
        if mean.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: mean.len(),
            });
        }
        if variances.len() != k {
            return Err(Error::Dimension {
                expected: k,
                got: variances.len(),
            });
        }
        if variances.windows(2).any(|w| w[1] > w[0]) || variances.iter().any(|v| *v < 0.0) {
            return Err(Error::invalid(
                "variances",
                "must be nonnegative and nonincreasing",
            ));
        }
        let p = PcaProjection {
            k,
            d,
            components,
            mean,
            variances,
            centered_projection,
        };
        let err = p.orthonormality_error();
        if err.is_nan() || err > 1e-8 {
            return Err(Error::invalid(
                "components",
                format!("rows are not orthonormal (max deviation {err:e})"),
            ));
        }
        Ok(p)
    }

    /// The trivial projection onto the first `d` coordinates (`k = d`).
    pub fn identity(d: usize) -> Self {
        let mut components = vec![0.0; d * d];
        for i in 0..d {
            components[i * d + i] = 1.0;
        }
        PcaProjection {
            k: d,
            d,
            components,
            mean: vec![0.0; d],
            variances: vec![0.0; d],
            centered_projection: false,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.components[i * self.d..(i + 1) * self.d]
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// Keeps the leading `k` components. Components are nested, so this is
    /// identical to refitting at `k`.
    pub fn truncate(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.k {
            return Err(Error::RankOutOfRange { k, max: self.k });
        }
        Ok(PcaProjection {
            k,
            d: self.d,
            components: self.components[..k * self.d].to_vec(),
            mean: self.mean.clone(),
            variances: self.variances[..k].to_vec(),
            centered_projection: self.centered_projection,
        })
    }

    /// Largest `|C Cᵀ − I|` entry.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.k {
            for j in 0..self.k {
                let g: f64 = self
                    .component(i)
                    .iter()
                    .zip(self.component(j))
                    .map(|(a, b)| a * b)
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    pub fn project(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.d {
            return Err(Error::Dimension {
                expected: self.d,
                got: z.len(),
            });
        }
        let mut out = vec![0.0; self.k];
        self.project_into(z, &mut out);
        Ok(out)
    }

    fn project_into(&self, z: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(self.components.chunks_exact(self.d)) {
            *o = if self.centered_projection {
                c.iter()
                    .zip(z)
                    .zip(&self.mean)
                    .map(|((c, z), m)| c * (z - m))
                    .sum()
            } else {
                c.iter().zip(z).map(|(c, z)| c * z).sum()
            };
        }
    }

    /// Row-wise [`project`](Self::project); ids are kept.
    pub fn project_table(&self, table: &EmbeddingTable) -> Result<EmbeddingTable> {
        if table.dim() != self.d {
            return Err(Error::Dimension {
                expected: self.d,
                got: table.dim(),
            });
        }
        let mut data = vec![0.0; table.len() * self.k];
        for (row, out) in table.rows().zip(data.chunks_exact_mut(self.k)) {
            self.project_into(row, out);
        }
        EmbeddingTable::new(table.ids().to_vec(), self.k, data)
    }
}

/// Fits the top-`k` principal directions of `corpus` by SVD of the centered data.
///
/// Each component is sign-fixed so that its largest-magnitude entry (lowest
/// index on ties) is nonnegative.
pub fn fit_pca(corpus: &EmbeddingTable, k: usize) -> Result<PcaProjection> {
    let (n, d) = (corpus.len(), corpus.dim());
    if n < 2 {
        return Err(Error::invalid(
            "corpus",
            format!("need at least 2 rows, got {n}"),
        ));
    }
    let max_k = (n - 1).min(d);
    if k == 0 || k > max_k {
        return Err(Error::RankOutOfRange { k, max: max_k });
    }

    let mut mean = vec![0.0; d];
    for row in corpus.rows() {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centered = DMatrix::from_fn(n, d, |i, j| corpus.row(i)[j] - mean[j]);
    let svd = centered.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let sv = &svd.singular_values;

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));

    let top = order.first().map_or(0.0, |&i| sv[i]);
    let tol = top * (n.max(d) as f64) * f64::EPSILON;
    let rank = if top == 0.0 {
        0
    } else {
        order.iter().filter(|&&i| sv[i] > tol).count()
    };
    if rank < k {
        return Err(Error::RankDeficient { k, rank });
    }

    let mut components = Vec::with_capacity(k * d);
    let mut variances = Vec::with_capacity(k);
    for &i in &order[..k] {
        let mut row: Vec<f64> = v_t.row(i).iter().copied().collect();
        let mut lead = 0;
        for (j, x) in row.iter().enumerate() {
            if x.abs() > row[lead].abs() {
                lead = j;
            }
        }
        if row[lead] < 0.0 {
            row.iter_mut().for_each(|x| *x = -*x);
        }
        components.extend(row);
        variances.push(sv[i] * sv[i] / (n - 1) as f64);
    }

    Ok(PcaProjection {
        k,
        d,
        components,
        mean,
        variances,
        centered_projection: false,
    })
}
