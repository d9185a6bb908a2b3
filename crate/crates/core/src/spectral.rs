//! Spectral bipartition of the aggregate overlap matrix.
//!
//! The similarity Laplacian `L = D − Q` is diagonalised with cyclic Jacobi
//! rotations (leader matrices are ~50×50, so a dense solve is cheap and
//! exact enough), and users are split by the sign of a chosen eigenvector.

use serde::{Deserialize, Serialize};

use crate::chambers::OverlapMatrix;
use crate::error::{Error, Result};

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        SymMatrix {
            n,
            data: rows.concat(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.data[i * self.n..(i + 1) * self.n].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// How masked (never co-active) pairs enter the similarity matrix.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Imputation {
    /// Masked pairs have zero similarity.
    #[default]
    Zero,
    /// Masked pairs take the mean of the defined off-diagonal entries.
    PairMean,
}

/// Off-diagonal similarities of `q` as a dense matrix with a zero diagonal.
pub fn similarity(q: &OverlapMatrix, imputation: Imputation) -> Result<SymMatrix> {
    let n = q.dim();
    let defined: Vec<f64> = q.pairs().map(|(_, _, v)| v).collect();
    if let Some(bad) = defined.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidArgument(format!("overlap entries must be non-negative, found {bad}")));
    }
    let fill = match imputation {
        Imputation::Zero => 0.0,
        Imputation::PairMean if defined.is_empty() => 0.0,
        Imputation::PairMean => defined.iter().sum::<f64>() / defined.len() as f64,
    };
    let mut w = SymMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                w.set(i, j, q.get(i, j).unwrap_or(fill));
            }
        }
    }
    Ok(w)
}

/// `L = D − W` for a symmetric non-negative similarity matrix; the diagonal of
/// `w` is ignored.
pub fn laplacian(w: &SymMatrix) -> Result<SymMatrix> {
    let n = w.n;
    let mut l = SymMatrix::zeros(n);
    for i in 0..n {
        let mut degree = 0.0;
        for j in 0..n {
            if i == j {
                continue;
            }
            let v = w.get(i, j);
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!("similarity ({i}, {j}) = {v} is negative")));
            }
            if (v - w.get(j, i)).abs() > 1e-12 * v.abs().max(1.0) {
                return Err(Error::InvalidArgument(format!("similarity is not symmetric at ({i}, {j})")));
            }
            degree += v;
            l.set(i, j, -v);
        }
        l.set(i, i, degree);
    }
    Ok(l)
}

/// Eigenpairs in ascending order of eigenvalue; `vectors[k]` belongs to
/// `values[k]`, has unit norm, and its largest-magnitude component is
/// positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

const MAX_SWEEPS: usize = 100;

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigen(a: &SymMatrix) -> Result<Eigen> {
    let n = a.n;
    let mut m = a.data.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let off = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                s += 2.0 * m[i * n + j] * m[i * n + j];
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while off(&m) > f64::EPSILON * scale && scale > 0.0 {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence {
                sweeps,
                off_norm: off(&m),
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (m[p * n + p], m[q * n + q]);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[x * n + x].total_cmp(&m[y * n + y]).then(x.cmp(&y)));
    let values = order.iter().map(|&k| m[k * n + k]).collect();
    let vectors = order
        .iter()
        .map(|&k| {
            let mut col: Vec<f64> = (0..n).map(|r| v[r * n + k]).collect();
            orient(&mut col);
            col
        })
        .collect();
    Ok(Eigen { values, vectors })
}

/// Normalises and flips `v` so its largest-magnitude component is positive.
fn orient(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut pivot = 0;
    for (k, x) in v.iter().enumerate() {
        if x.abs() > v[pivot].abs() * (1.0 + 1e-12) {
            pivot = k;
        }
    }
    let sign = if v.get(pivot).is_some_and(|&x| x < 0.0) { -1.0 } else { 1.0 };
    for x in v.iter_mut() {
        *x *= sign / norm;
    }
}

/// The `m` smallest eigenpairs of `l`.
pub fn smallest_eigenpairs(l: &SymMatrix, m: usize) -> Result<Eigen> {
    if m > l.n {
        return Err(Error::InvalidArgument(format!("asked for {m} eigenpairs of a {}×{} matrix", l.n, l.n)));
    }
    let mut e = symmetric_eigen(l)?;
    e.values.truncate(m);
    e.vectors.truncate(m);
    Ok(e)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    /// Positive component of the chosen eigenvector.
    Alpha,
    Beta,
}

impl Group {
    pub fn other(self) -> Group {
        match self {
            Group::Alpha => Group::Beta,
            Group::Beta => Group::Alpha,
        }
    }
}

/// Which eigenvector drives the split.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy")]
pub enum VectorChoice {
    /// The eigenvector of the third smallest eigenvalue.
    #[default]
    Third,
    /// The smallest non-constant eigenvector whose sign split puts at least
    /// `min_fraction` of the users on each side.
    Auto { min_fraction: f64 },
    /// A fixed index into the ascending eigenpairs.
    Index { index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    /// Ascending; at least the four smallest when available.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    pub chosen: usize,
    /// `Alpha` where the chosen component is strictly positive.
    pub labels: Vec<Group>,
    /// Node indices ordered by chosen component, largest first.
    pub rank: Vec<usize>,
}

impl SpectralResult {
    pub fn components(&self) -> &[f64] {
        &self.eigenvectors[self.chosen]
    }
}

fn split(v: &[f64]) -> Vec<Group> {
    v.iter().map(|&x| if x > 0.0 { Group::Alpha } else { Group::Beta }).collect()
}

fn group_sizes(labels: &[Group]) -> (usize, usize) {
    let alpha = labels.iter().filter(|&&g| g == Group::Alpha).count();
    (alpha, labels.len() - alpha)
}

/// Eigendecomposes `l` and splits on the eigenvector selected by `choice`.
pub fn partition(l: &SymMatrix, choice: VectorChoice) -> Result<SpectralResult> {
    let n = l.n;
    let e = symmetric_eigen(l)?;
    let chosen = match choice {
        VectorChoice::Third => 2,
        VectorChoice::Index { index } => index,
        VectorChoice::Auto { min_fraction } => {
            let need = (min_fraction * n as f64).ceil() as usize;
            (1..n)
                .find(|&k| {
                    let (a, b) = group_sizes(&split(&e.vectors[k]));
                    a > 0 && b > 0 && a.min(b) >= need
                })
                .ok_or(Error::DegeneratePartition { n })?
        }
    };
    if chosen >= n {
        return Err(Error::InvalidArgument(format!("eigenvector {chosen} of a {n}-node matrix")));
    }
    let labels = split(&e.vectors[chosen]);
    let (a, b) = group_sizes(&labels);
    if a == 0 || b == 0 {
        return Err(Error::DegeneratePartition { n });
    }
    let comp = &e.vectors[chosen];
    let mut rank: Vec<usize> = (0..n).collect();
    rank.sort_by(|&x, &y| comp[y].total_cmp(&comp[x]).then(x.cmp(&y)));
    Ok(SpectralResult {
        eigenvalues: e.values,
        eigenvectors: e.vectors,
        chosen,
        labels,
        rank,
    })
}

/// Similarity, Laplacian and partition in one step.
pub fn spectral_partition(q: &OverlapMatrix, imputation: Imputation, choice: VectorChoice) -> Result<SpectralResult> {
    partition(&laplacian(&similarity(q, imputation)?)?, choice)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn residual(a: &SymMatrix, lambda: f64, v: &[f64]) -> f64 {
        a.mul_vec(v).iter().zip(v).map(|(x, y)| (x - lambda * y).powi(2)).sum::<f64>().sqrt()
    }

    fn random_similarity(n: usize, seed: u64) -> SymMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i + 1..n {
                let v: f64 = rng.random();
                w.set(i, j, v);
                w.set(j, i, v);
            }
        }
        w
    }

    #[test]
    fn two_by_two_laplacian() {
        let w = SymMatrix::from_rows(&[vec![1.0, 0.3], vec![0.3, 1.0]]);
        let l = laplacian(&w).unwrap();
        assert_eq!(l.data, vec![0.3, -0.3, -0.3, 0.3]);
        assert_eq!(laplacian(&SymMatrix::zeros(4)).unwrap().data, vec![0.0; 16]);
        let mut neg = SymMatrix::zeros(2);
        neg.set(0, 1, -0.1);
        neg.set(1, 0, -0.1);
        assert!(matches!(laplacian(&neg), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn masked_entries_are_zero_or_imputed() {
        let mut q = OverlapMatrix::masked(vec![10, 11, 12]);
        q.set(0, 1, Some(0.4));
        q.set(1, 2, Some(0.2));
        let zero = similarity(&q, Imputation::Zero).unwrap();
        assert_eq!(zero.get(0, 2), 0.0);
        let mean = similarity(&q, Imputation::PairMean).unwrap();
        assert!((mean.get(0, 2) - 0.3).abs() < 1e-15);
        assert_eq!(mean.get(1, 1), 0.0);
    }

    #[test]
    fn path_graph_eigenvalues() {
        let w = SymMatrix::from_rows(&[vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]]);
        let e = symmetric_eigen(&laplacian(&w).unwrap()).unwrap();
        for (got, want) in e.values.iter().zip([0.0, 1.0, 3.0]) {
            assert!((got - want).abs() < 1e-12, "{:?}", e.values);
        }
    }

    #[test]
    fn disconnected_dyads_have_two_zero_eigenvalues() {
        let w = SymMatrix::from_rows(&[
            vec![0.0, 1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 2.0],
            vec![0.0, 0.0, 2.0, 0.0],
        ]);
        let e = smallest_eigenpairs(&laplacian(&w).unwrap(), 3).unwrap();
        assert!(e.values[0].abs() < 1e-12 && e.values[1].abs() < 1e-12);
        assert!((e.values[2] - 2.0).abs() < 1e-12);
        assert!(smallest_eigenpairs(&laplacian(&w).unwrap(), 5).is_err());
    }

    #[test]
    fn matches_nalgebra_and_has_small_residuals() {
        for seed in 0..20 {
            let n = 5 + seed as usize * 3;
            let l = laplacian(&random_similarity(n, seed)).unwrap();
            let e = symmetric_eigen(&l).unwrap();
            let mut oracle: Vec<f64> = nalgebra::DMatrix::from_row_slice(n, n, &l.data)
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .copied()
                .collect();
            oracle.sort_by(f64::total_cmp);
            for (k, (a, b)) in e.values.iter().zip(&oracle).enumerate() {
                assert!((a - b).abs() < 1e-10 * b.abs().max(1.0), "seed {seed} k {k}: {a} vs {b}");
                assert!(residual(&l, *a, &e.vectors[k]) <= 1e-9);
                assert!(*a >= -1e-12);
            }
            let row: f64 = l.mul_vec(&vec![1.0; n]).iter().map(|x| x.abs()).sum();
            assert!(row < 1e-12 * n as f64);
        }
    }

    #[test]
    fn eigenvectors_follow_sign_convention() {
        let l = laplacian(&random_similarity(12, 7)).unwrap();
        for v in symmetric_eigen(&l).unwrap().vectors {
            let norm: f64 = v.iter().map(|x| x * x).sum();
            assert!((norm - 1.0).abs() < 1e-12);
            let pivot = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(pivot > 0.0);
        }
    }

    /// Two cliques of `half` joined by one weak edge.
    fn cliques(half: usize) -> SymMatrix {
        let n = 2 * half;
        let mut w = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                if i != j && (i < half) == (j < half) {
                    w.set(i, j, 1.0);
                }
            }
        }
        w.set(0, half, 0.01);
        w.set(half, 0, 0.01);
        w
    }

    #[test]
    fn weak_bridge_between_cliques_is_cut() {
        let l = laplacian(&cliques(6)).unwrap();
        let r = partition(&l, VectorChoice::Index { index: 1 }).unwrap();
        assert!(r.labels[..6].iter().all(|&g| g == r.labels[0]));
        assert!(r.labels[6..].iter().all(|&g| g == r.labels[0].other()));
        let auto = partition(&l, VectorChoice::Auto { min_fraction: 0.1 }).unwrap();
        assert_eq!(auto.chosen, 1);
        assert_eq!(auto.labels, r.labels);
    }

    #[test]
    fn single_group_is_degenerate() {
        let mut w = SymMatrix::zeros(5);
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    w.set(i, j, 0.3);
                }
            }
        }
        let l = laplacian(&SymMatrix::zeros(1)).unwrap();
        assert!(matches!(
            partition(&l, VectorChoice::Auto { min_fraction: 0.1 }),
            Err(Error::DegeneratePartition { .. })
        ));
        // 5 nodes cannot be split with at least 3 on each side.
        let l = laplacian(&w).unwrap();
        assert!(partition(&l, VectorChoice::Auto { min_fraction: 0.45 }).is_err());
    }

    #[test]
    fn rank_orders_by_component() {
        let l = laplacian(&random_similarity(10, 3)).unwrap();
        let r = partition(&l, VectorChoice::Index { index: 1 }).unwrap();
        let c = r.components();
        assert!(r.rank.windows(2).all(|w| c[w[0]] >= c[w[1]]));
        for (k, g) in r.labels.iter().enumerate() {
            assert_eq!(*g == Group::Alpha, c[k] > 0.0);
        }
    }

    proptest! {
        #[test]
        fn partition_is_permutation_equivariant(seed in 0u64..1000, n in 6usize..20) {
            let w = cliques(n / 2);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut perm: Vec<usize> = (0..w.n).collect();
            rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
            let mut pw = SymMatrix::zeros(w.n);
            for i in 0..w.n {
                for j in 0..w.n {
                    pw.set(i, j, w.get(perm[i], perm[j]));
                }
            }
            let a = partition(&laplacian(&w).unwrap(), VectorChoice::Index { index: 1 }).unwrap();
            let b = partition(&laplacian(&pw).unwrap(), VectorChoice::Index { index: 1 }).unwrap();
            for i in 0..w.n {
                for j in 0..w.n {
                    prop_assert_eq!(
                        b.labels[i] == b.labels[j],
                        a.labels[perm[i]] == a.labels[perm[j]]
                    );
                }
            }
        }
    }
}
