//! Compressed sparse row storage for symmetric graph operators.

use ndarray::{Array2, ArrayView2, LinalgScalar};
use num_traits::Float;

/// One undirected weighted edge with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: u32,
    pub v: u32,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Symmetric renormalization `D^{-1/2} (A + I) D^{-1/2}` of an undirected
    /// edge list, with `D` the row sums of `A + I`.
    pub fn normalized_from_edges(n: usize, edges: &[Edge]) -> Self {
        let mut degree = vec![1.0f64; n];
        let mut counts = vec![1usize; n];
        for e in edges {
            degree[e.u as usize] += e.w;
            degree[e.v as usize] += e.w;
            counts[e.u as usize] += 1;
            counts[e.v as usize] += 1;
        }
        let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();

        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        for c in &counts {
            row_ptr.push(row_ptr.last().unwrap() + c);
        }
        let nnz = row_ptr[n];
        let mut cols = vec![0u32; nnz];
        let mut vals = vec![0.0f64; nnz];
        let mut fill = row_ptr[..n].to_vec();
        let mut put = |r: usize, c: u32, w: f64| {
            cols[fill[r]] = c;
            vals[fill[r]] = w;
            fill[r] += 1;
        };
        for (i, s) in inv_sqrt.iter().enumerate() {
            put(i, i as u32, s * s);
        }
        for e in edges {
            let (u, v) = (e.u as usize, e.v as usize);
            let w = e.w * inv_sqrt[u] * inv_sqrt[v];
            put(u, e.v, w);
            put(v, e.u, w);
        }

        let mut m = Self {
            n,
            row_ptr,
            cols,
            vals,
        };
        m.sort_rows();
        m
    }

    fn sort_rows(&mut self) {
        for r in 0..self.n {
            let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let mut entries: Vec<(u32, f64)> = self.cols[lo..hi]
                .iter()
                .copied()
                .zip(self.vals[lo..hi].iter().copied())
                .collect();
            if entries.windows(2).all(|w| w[0].0 < w[1].0) {
                continue;
            }
            entries.sort_by_key(|&(c, _)| c);
            for (k, (c, v)) in entries.into_iter().enumerate() {
                self.cols[lo + k] = c;
                self.vals[lo + k] = v;
            }
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.cols[lo..hi]
            .iter()
            .zip(&self.vals[lo..hi])
            .map(|(&c, &v)| (c as usize, v))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
        match self.cols[lo..hi].binary_search(&(c as u32)) {
            Ok(k) => self.vals[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut d = Array2::zeros((self.n, self.n));
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                d[[r, c]] = v;
            }
        }
        d
    }

    /// Largest absolute asymmetry `|a_rc - a_cr|` over stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        (0..self.n)
            .flat_map(|r| self.row(r).map(move |(c, v)| (r, c, v)))
            .map(|(r, c, v)| (v - self.get(c, r)).abs())
            .fold(0.0, f64::max)
    }

    /// `self * x` for a dense vector.
    pub fn matvec<F: Float>(&self, x: &[F]) -> Vec<F> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|r| {
                let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
                let mut acc = F::zero();
                for k in lo..hi {
                    acc = acc + F::from(self.vals[k]).unwrap() * x[self.cols[k] as usize];
                }
                acc
            })
            .collect()
    }

    /// `self * x` for a dense row-major matrix; rows accumulate in column order.
    pub fn matmul<F: Float + LinalgScalar>(&self, x: ArrayView2<'_, F>) -> Array2<F> {
        assert_eq!(x.nrows(), self.n);
        let width = x.ncols();
        let x = x.as_standard_layout();
        let src = x.as_slice().expect("standard layout");
        let mut out = Array2::<F>::zeros((self.n, width));
        let dst = out.as_slice_mut().expect("fresh array");
        for (r, out_row) in dst.chunks_exact_mut(width.max(1)).enumerate().take(self.n) {
            let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
            for k in lo..hi {
                let w = F::from(self.vals[k]).unwrap();
                let c = self.cols[k] as usize;
                let in_row = &src[c * width..(c + 1) * width];
                for (o, &i) in out_row.iter_mut().zip(in_row) {
                    *o = *o + w * i;
                }
            }
        }
        out
    }

    /// Power-iteration estimate of the dominant eigenvalue magnitude.
    pub fn spectral_radius(&self, iterations: usize) -> f64 {
        let mut x: Vec<f64> = (0..self.n).map(|i| 1.0 + (i % 7) as f64 * 0.1).collect();
        let mut lambda = 0.0;
        for _ in 0..iterations {
            let y = self.matvec(&x);
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            lambda = norm / xn;
            x = y.into_iter().map(|v| v / norm).collect();
        }
        lambda
    }
}
