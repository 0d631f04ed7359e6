//! Dense exact diagonalization of small chains: the quantum-side oracle.
//!
//! Everything is kept in real arithmetic: the singlet projector, `S^1` and
//! `S^3` are real in the chosen basis, and `S^2` is purely imaginary, so it
//! is represented by the real matrix `i S^2` with signs restored where
//! needed. The eigensolver is a cyclic Jacobi sweep, accurate to near
//! machine precision for the desk-scale dimensions used here.

use crate::chain::SpinWeight;
use crate::error::{Error, Result};

/// Dense real matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    dim: usize,
    data: Vec<f64>,
}

impl DenseOperator {
    pub fn zeros(dim: usize) -> Self {
        DenseOperator { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] += v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.data {
            *v *= a;
        }
    }

    pub fn add_scaled(&mut self, other: &DenseOperator, a: f64) {
        assert_eq!(self.dim, other.dim);
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }

    pub fn matmul(&self, other: &DenseOperator) -> DenseOperator {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = DenseOperator::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let aik = self.get(i, k);
                if aik == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += aik * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim;
        for i in 0..n {
            let mut acc = 0.0;
            let row = &self.data[i * n..(i + 1) * n];
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            y[i] = acc;
        }
    }

    /// x^T A x for a unit-normalized vector x.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let n = self.dim;
        let mut acc = 0.0;
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            let mut r = 0.0;
            for (a, b) in row.iter().zip(x) {
                r += a * b;
            }
            acc += x[i] * r;
        }
        acc
    }

    pub fn commutator(&self, other: &DenseOperator) -> DenseOperator {
        let mut ab = self.matmul(other);
        let ba = other.matmul(self);
        ab.add_scaled(&ba, -1.0);
        ab
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &DenseOperator) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn symmetry_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Eigendecomposition of a real symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors as columns, aligned with `eigenvalues`.
    pub eigenvectors: DenseOperator,
}

const SYMMETRY_TOL: f64 = 1e-9;

/// Cyclic Jacobi diagonalization.
pub fn eigendecompose(op: &DenseOperator) -> Result<Spectrum> {
    let defect = op.symmetry_defect();
    if defect > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(defect));
    }
    let n = op.dim;
    let mut a = op.data.clone();
    let mut v = DenseOperator::identity(n).data;

    let fro: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let target = 1e-15 * fro;
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if (2.0 * off).sqrt() <= target {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e12 {
                    1.0 / (2.0 * theta)
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let aip = a[i * n + p];
                    let aiq = a[i * n + q];
                    a[i * n + p] = c * aip - s * aiq;
                    a[i * n + q] = s * aip + c * aiq;
                }
                for j in 0..n {
                    let apj = a[p * n + j];
                    let aqj = a[q * n + j];
                    a[p * n + j] = c * apj - s * aqj;
                    a[q * n + j] = s * apj + c * aqj;
                }
                for i in 0..n {
                    let vip = v[i * n + p];
                    let viq = v[i * n + q];
                    v[i * n + p] = c * vip - s * viq;
                    v[i * n + q] = s * vip + c * viq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].partial_cmp(&a[j * n + j]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = DenseOperator::zeros(n);
    for (col, &src) in order.iter().enumerate() {
        for row in 0..n {
            vectors.data[row * n + col] = v[row * n + src];
        }
    }
    Ok(Spectrum { eigenvalues, eigenvectors: vectors })
}

impl Spectrum {
    pub fn column(&self, k: usize) -> Vec<f64> {
        let n = self.eigenvalues.len();
        (0..n).map(|i| self.eigenvectors.get(i, k)).collect()
    }

    /// Max residual `|H v - lambda v|_inf` over all eigenpairs.
    pub fn residual(&self, h: &DenseOperator) -> f64 {
        let n = self.eigenvalues.len();
        let mut worst = 0.0f64;
        let mut hv = vec![0.0; n];
        for k in 0..n {
            let vk = self.column(k);
            h.matvec(&vk, &mut hv);
            for i in 0..n {
                worst = worst.max((hv[i] - self.eigenvalues[k] * vk[i]).abs());
            }
        }
        worst
    }
}

/// The three spin components in the descending `S^3` basis. `sy_times_i`
/// stores the real matrix `i S^2`.
#[derive(Debug, Clone)]
pub struct SpinMatrices {
    pub sx: DenseOperator,
    pub sy_times_i: DenseOperator,
    pub sz: DenseOperator,
}

pub fn spin_matrices(spin: SpinWeight) -> SpinMatrices {
    let q = spin.q() as usize;
    let s = spin.s();
    let mut sx = DenseOperator::zeros(q);
    let mut isy = DenseOperator::zeros(q);
    let mut sz = DenseOperator::zeros(q);
    for k in 0..q {
        let m = s - k as f64;
        sz.set(k, k, m);
    }
    // Raising operator maps index k to k-1 (descending basis).
    for k in 1..q {
        let m = s - k as f64;
        let c = (s * (s + 1.0) - m * (m + 1.0)).sqrt();
        sx.add_to(k - 1, k, 0.5 * c);
        sx.add_to(k, k - 1, 0.5 * c);
        isy.add_to(k - 1, k, 0.5 * c);
        isy.add_to(k, k - 1, -0.5 * c);
    }
    SpinMatrices { sx, sy_times_i: isy, sz }
}

impl SpinMatrices {
    /// Residuals of the defining identities, in real form:
    /// `[sx, i sy] + sz` and `sx^2 - (i sy)^2 + sz^2 - S(S+1)`.
    pub fn identity_residuals(&self, spin: SpinWeight) -> (f64, f64) {
        let mut comm = self.sx.commutator(&self.sy_times_i);
        comm.add_scaled(&self.sz, 1.0);
        let comm_res = comm.max_abs();

        let mut casimir = self.sx.matmul(&self.sx);
        let a2 = self.sy_times_i.matmul(&self.sy_times_i);
        casimir.add_scaled(&a2, -1.0);
        let z2 = self.sz.matmul(&self.sz);
        casimir.add_scaled(&z2, 1.0);
        let s = spin.s();
        let mut target = DenseOperator::identity(self.sx.dim());
        target.scale(s * (s + 1.0));
        (comm_res, casimir.max_abs_diff(&target))
    }
}

/// Rank-1 orthogonal projection onto the two-site singlet, dimension `q^2`.
pub fn singlet_projector(q: u32) -> DenseOperator {
    let q = q as usize;
    let mut p = DenseOperator::zeros(q * q);
    let inv_q = 1.0 / q as f64;
    for k in 0..q {
        let row = k * q + (q - 1 - k);
        for l in 0..q {
            let col = l * q + (q - 1 - l);
            let sign = if (k + l) % 2 == 0 { 1.0 } else { -1.0 };
            p.set(row, col, sign * inv_q);
        }
    }
    p
}

/// Two-site Heisenberg dot product `S_x . S_y` on `q^2` dimensions, in real
/// form `sx (x) sx - (i sy) (x) (i sy) + sz (x) sz`.
pub fn heisenberg_dot(spin: SpinWeight) -> DenseOperator {
    let m = spin_matrices(spin);
    let q = spin.q() as usize;
    let mut dot = DenseOperator::zeros(q * q);
    let pairs: [(&DenseOperator, f64); 3] =
        [(&m.sx, 1.0), (&m.sy_times_i, -1.0), (&m.sz, 1.0)];
    for (op, coeff) in pairs {
        for a in 0..q {
            for b in 0..q {
                let oab = op.get(a, b);
                if oab == 0.0 {
                    continue;
                }
                for c in 0..q {
                    for d in 0..q {
                        let ocd = op.get(c, d);
                        if ocd != 0.0 {
                            dot.add_to(a * q + c, b * q + d, coeff * oab * ocd);
                        }
                    }
                }
            }
        }
    }
    dot
}

/// Max-norm residual between the singlet projector and its polynomial in
/// the Heisenberg dot product; supported for 2S in {1, 2, 3}.
pub fn polynomial_identity_residual(twice_s: u32) -> Result<f64> {
    let spin = SpinWeight::from_twice_s(twice_s)?;
    let q = spin.q();
    let dot = heisenberg_dot(spin);
    let dim = (q * q) as usize;
    let id = DenseOperator::identity(dim);
    let poly = match twice_s {
        1 => {
            let mut p = id.clone();
            p.scale(0.25);
            p.add_scaled(&dot, -1.0);
            p
        }
        2 => {
            let mut p = dot.matmul(&dot);
            p.scale(1.0 / 3.0);
            p.add_scaled(&id, -1.0 / 3.0);
            p
        }
        3 => {
            let dot2 = dot.matmul(&dot);
            let dot3 = dot2.matmul(&dot);
            let mut p = DenseOperator::zeros(dim);
            p.add_scaled(&dot3, -1.0 / 18.0);
            p.add_scaled(&dot2, -5.0 / 72.0);
            p.add_scaled(&dot, 31.0 / 96.0);
            p.add_scaled(&id, 33.0 / 128.0);
            p
        }
        _ => {
            return Err(Error::InvalidParameter(format!(
                "polynomial identity only tabulated for 2S in {{1,2,3}}, got {twice_s}"
            )))
        }
    };
    Ok(poly.max_abs_diff(&singlet_projector(q)))
}

pub const DEFAULT_DENSE_BUDGET: usize = 4096;

fn chain_dim(ell: u32, q: u32, budget: usize) -> Result<usize> {
    let mut dim: usize = 1;
    for _ in 0..2 * ell {
        dim = dim
            .checked_mul(q as usize)
            .filter(|&d| d <= budget)
            .ok_or(Error::DimensionBudget { dim: usize::MAX, budget })?;
    }
    Ok(dim)
}

/// Places a `q^2`-dimensional two-site operator on sites `(x, x+1)` of a
/// `n_sites`-site chain (site 0 is the most significant digit).
pub fn embed_pair(
    op2: &DenseOperator,
    q: u32,
    n_sites: usize,
    left: usize,
) -> DenseOperator {
    let q = q as usize;
    let dim = q.pow(n_sites as u32);
    let stride_r = q.pow((n_sites - 2 - left) as u32);
    let stride_l = stride_r * q;
    let mut out = DenseOperator::zeros(dim);
    for idx in 0..dim {
        let a = idx / stride_l % q;
        let c = idx / stride_r % q;
        let row2 = a * q + c;
        let base = idx - a * stride_l - c * stride_r;
        for b in 0..q {
            for d in 0..q {
                let v = op2.get(row2, b * q + d);
                if v != 0.0 {
                    out.add_to(idx, base + b * stride_l + d * stride_r, v);
                }
            }
        }
    }
    out
}

/// Places two single-site operators on distinct sites `x` and `y`.
pub fn embed_two_singles(
    op_x: &DenseOperator,
    op_y: &DenseOperator,
    q: u32,
    n_sites: usize,
    x: usize,
    y: usize,
) -> DenseOperator {
    assert_ne!(x, y);
    let q = q as usize;
    let dim = q.pow(n_sites as u32);
    let sx = q.pow((n_sites - 1 - x) as u32);
    let sy = q.pow((n_sites - 1 - y) as u32);
    let mut out = DenseOperator::zeros(dim);
    for idx in 0..dim {
        let a = idx / sx % q;
        let c = idx / sy % q;
        let base = idx - a * sx - c * sy;
        for b in 0..q {
            let vx = op_x.get(a, b);
            if vx == 0.0 {
                continue;
            }
            for d in 0..q {
                let vy = op_y.get(c, d);
                if vy != 0.0 {
                    out.add_to(idx, base + b * sx + d * sy, vx * vy);
                }
            }
        }
    }
    out
}

/// Places a single-site operator on site `x`.
pub fn embed_single(op: &DenseOperator, q: u32, n_sites: usize, x: usize) -> DenseOperator {
    let q = q as usize;
    let dim = q.pow(n_sites as u32);
    let sx = q.pow((n_sites - 1 - x) as u32);
    let mut out = DenseOperator::zeros(dim);
    for idx in 0..dim {
        let a = idx / sx % q;
        let base = idx - a * sx;
        for b in 0..q {
            let v = op.get(a, b);
            if v != 0.0 {
                out.add_to(idx, base + b * sx, v);
            }
        }
    }
    out
}

/// The chain Hamiltonian: minus the sum of singlet projectors over bonds.
pub fn build_hamiltonian(ell: u32, spin: SpinWeight, budget: usize) -> Result<DenseOperator> {
    let q = spin.q();
    let n_sites = 2 * ell as usize;
    let dim = chain_dim(ell, q, budget)?;
    let p2 = singlet_projector(q);
    let mut h = DenseOperator::zeros(dim);
    for bond in 0..n_sites - 1 {
        let p = embed_pair(&p2, q, n_sites, bond);
        h.add_scaled(&p, -1.0);
    }
    Ok(h)
}

/// Thermal expectation `Tr(obs e^{-beta H}) / Tr e^{-beta H}` from a
/// precomputed spectrum.
pub fn gibbs_expectation_from(spec: &Spectrum, obs: &DenseOperator, beta_q: f64) -> f64 {
    let n = spec.eigenvalues.len();
    let e0 = spec.eigenvalues[0];
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..n {
        let w = (-(beta_q) * (spec.eigenvalues[k] - e0)).exp();
        if w == 0.0 {
            continue;
        }
        let vk = spec.column(k);
        num += w * obs.quadratic_form(&vk);
        den += w;
    }
    num / den
}

/// Thermal expectation computed from scratch; `h` must be symmetric.
pub fn gibbs_expectation(h: &DenseOperator, obs: &DenseOperator, beta_q: f64) -> Result<f64> {
    if beta_q < 0.0 {
        return Err(Error::InvalidParameter("beta_q must be nonnegative".into()));
    }
    let spec = eigendecompose(h)?;
    Ok(gibbs_expectation_from(&spec, obs, beta_q))
}

/// Finite-resolution partition function `Tr (1 - H/n)^(2 beta n - 1)`.
///
/// Expanding the product over time slots reproduces, term by term, the
/// weighted sum over bar configurations, so this equals the enumeration
/// result exactly (up to rounding) at every finite `n`.
pub fn discrete_time_partition(spec: &Spectrum, beta: u32, n: u32) -> f64 {
    let m = (2 * beta * n - 1) as i32;
    spec.eigenvalues
        .iter()
        .map(|&lam| (1.0 - lam / n as f64).powi(m))
        .sum()
}

/// Finite-resolution expectation `Tr(obs (1 - H/n)^M) / Tr (1 - H/n)^M`
/// with `M = 2 beta n - 1`; the discrete-time counterpart of the Gibbs
/// state at inverse temperature `2 beta`.
pub fn discrete_time_expectation(
    spec: &Spectrum,
    obs: &DenseOperator,
    beta: u32,
    n: u32,
) -> f64 {
    let m = (2 * beta * n - 1) as i32;
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..spec.eigenvalues.len() {
        let w = (1.0 - spec.eigenvalues[k] / n as f64).powi(m);
        let vk = spec.column(k);
        num += w * obs.quadratic_form(&vk);
        den += w;
    }
    num / den
}

/// Spin component in real form: 1 -> sx, 2 -> i sy, 3 -> sz.
fn component(mats: &SpinMatrices, i: usize) -> &DenseOperator {
    match i {
        1 => &mats.sx,
        2 => &mats.sy_times_i,
        3 => &mats.sz,
        _ => panic!("spin component index must be 1, 2 or 3"),
    }
}

/// Thermal two-point function `<S^i_x S^j_y>` as (real, imaginary) parts.
/// Sites are physical labels.
pub fn spin_correlation_complex(
    ell: u32,
    spin: SpinWeight,
    x: i32,
    y: i32,
    i: usize,
    j: usize,
    beta_q: f64,
    budget: usize,
) -> Result<(f64, f64)> {
    let geometry = crate::chain::ChainGeometry::new(ell)?;
    let ix = geometry
        .site_index(x)
        .ok_or_else(|| Error::InvalidParameter(format!("site {x} not on chain")))?;
    let iy = geometry
        .site_index(y)
        .ok_or_else(|| Error::InvalidParameter(format!("site {y} not on chain")))?;
    if !(1..=3).contains(&i) || !(1..=3).contains(&j) {
        return Err(Error::InvalidParameter("spin components must be 1, 2 or 3".into()));
    }
    let q = spin.q();
    let n_sites = 2 * ell as usize;
    let mats = spin_matrices(spin);
    let h = build_hamiltonian(ell, spin, budget)?;
    let spec = eigendecompose(&h)?;

    let obs = if ix == iy {
        embed_single(&component(&mats, i).matmul(component(&mats, j)), q, n_sites, ix)
    } else {
        embed_two_singles(component(&mats, i), component(&mats, j), q, n_sites, ix, iy)
    };
    let g = gibbs_expectation_from(&spec, &obs, beta_q);
    // Each factor of S^2 contributes -i relative to the stored real matrix.
    let count2 = [i, j].iter().filter(|&&c| c == 2).count();
    Ok(match count2 {
        0 => (g, 0.0),
        1 => (0.0, -g),
        _ => (-g, 0.0),
    })
}

/// Real part of the thermal two-point function (the imaginary part vanishes
/// for this rotation-invariant Hamiltonian).
pub fn spin_correlation(
    ell: u32,
    spin: SpinWeight,
    x: i32,
    y: i32,
    i: usize,
    j: usize,
    beta_q: f64,
    budget: usize,
) -> Result<f64> {
    spin_correlation_complex(ell, spin, x, y, i, j, beta_q, budget).map(|(re, _)| re)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spin(twice_s: u32) -> SpinWeight {
        SpinWeight::from_twice_s(twice_s).unwrap()
    }

    #[test]
    fn projector_is_rank_one_projection() {
        for q in 2..=5u32 {
            let p = singlet_projector(q);
            assert!((p.trace() - 1.0).abs() < 1e-13);
            assert!(p.symmetry_defect() < 1e-13);
            let p2 = p.matmul(&p);
            assert!(p2.max_abs_diff(&p) < 1e-13);
        }
    }

    #[test]
    fn projector_q2_middle_block() {
        let p = singlet_projector(2);
        assert_eq!(p.get(1, 1), 0.5);
        assert_eq!(p.get(1, 2), -0.5);
        assert_eq!(p.get(2, 1), -0.5);
        assert_eq!(p.get(2, 2), 0.5);
        assert_eq!(p.get(0, 0), 0.0);
        assert_eq!(p.get(3, 3), 0.0);
    }

    #[test]
    fn projector_q3_center_entry() {
        let p = singlet_projector(3);
        // the |0,0> component: row/col index 1*3 + 1 = 4
        assert!((p.get(4, 4) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn spin_matrix_basics() {
        let m = spin_matrices(spin(1));
        assert_eq!(m.sz.get(0, 0), 0.5);
        assert_eq!(m.sz.get(1, 1), -0.5);
        let m1 = spin_matrices(spin(2));
        assert_eq!(m1.sz.get(0, 0), 1.0);
        assert_eq!(m1.sz.get(1, 1), 0.0);
        assert_eq!(m1.sz.get(2, 2), -1.0);
    }

    #[test]
    fn spin_identities_hold() {
        for twice_s in 1..=5u32 {
            let sw = spin(twice_s);
            let m = spin_matrices(sw);
            let (comm, casimir) = m.identity_residuals(sw);
            assert!(comm < 1e-12, "2S={twice_s} commutator {comm}");
            assert!(casimir < 1e-12, "2S={twice_s} casimir {casimir}");
            // second real-form commutator: [sz, sx] = i sy
            let mut r = m.sz.commutator(&m.sx);
            r.add_scaled(&m.sy_times_i, -1.0);
            assert!(r.max_abs() < 1e-12);
        }
    }

    #[test]
    fn polynomial_identities() {
        for twice_s in [1u32, 2, 3] {
            let res = polynomial_identity_residual(twice_s).unwrap();
            assert!(res <= 1e-10, "2S={twice_s}: residual {res}");
        }
        assert!(polynomial_identity_residual(4).is_err());
    }

    #[test]
    fn jacobi_on_known_matrix() {
        // eigenvalues of [[2,1],[1,2]] are 1 and 3
        let mut m = DenseOperator::zeros(2);
        m.set(0, 0, 2.0);
        m.set(0, 1, 1.0);
        m.set(1, 0, 1.0);
        m.set(1, 1, 2.0);
        let spec = eigendecompose(&m).unwrap();
        assert!((spec.eigenvalues[0] - 1.0).abs() < 1e-14);
        assert!((spec.eigenvalues[1] - 3.0).abs() < 1e-14);
        assert!(spec.residual(&m) < 1e-14);
    }

    #[test]
    fn two_site_hamiltonian_spectrum() {
        for q in [2u32, 3, 4] {
            let sw = spin(q - 1);
            let h = build_hamiltonian(1, sw, DEFAULT_DENSE_BUDGET).unwrap();
            let spec = eigendecompose(&h).unwrap();
            assert!((spec.eigenvalues[0] + 1.0).abs() < 1e-12);
            for k in 1..spec.eigenvalues.len() {
                assert!(spec.eigenvalues[k].abs() < 1e-12);
            }
            assert!(spec.residual(&h) < 1e-9);
        }
    }

    #[test]
    fn hamiltonian_trace_identity() {
        // Tr H = -(2 ell - 1) q^(2 ell - 2): each bond projector has unit
        // trace times identity factors.
        for (ell, q) in [(1u32, 3u32), (2, 2), (2, 3)] {
            let h = build_hamiltonian(ell, spin(q - 1), DEFAULT_DENSE_BUDGET).unwrap();
            let expected = -((2 * ell - 1) as f64) * (q as f64).powi(2 * ell as i32 - 2);
            assert!((h.trace() - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn ground_energy_matches_power_iteration() {
        // Independent route to the ground energy of the 4-site chain at
        // q = 2: power iteration on -H.
        let h = build_hamiltonian(2, spin(1), DEFAULT_DENSE_BUDGET).unwrap();
        let spec = eigendecompose(&h).unwrap();
        let n = h.dim();
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.37).sin()).collect();
        let mut y = vec![0.0; n];
        let mut mu = 0.0;
        for _ in 0..8000 {
            h.matvec(&x, &mut y);
            for (yi, xi) in y.iter_mut().zip(&x) {
                *yi = -*yi + 1e-12 * xi;
            }
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in &mut y {
                *v /= norm;
            }
            mu = norm;
            std::mem::swap(&mut x, &mut y);
        }
        let ground = -mu;
        assert!(
            (ground - spec.eigenvalues[0]).abs() < 1e-8,
            "power iteration {ground} vs jacobi {}",
            spec.eigenvalues[0]
        );
    }

    #[test]
    fn eigen_dimension_budget() {
        assert!(matches!(
            build_hamiltonian(4, spin(2), 4096),
            Err(Error::DimensionBudget { .. })
        ));
    }

    #[test]
    fn gibbs_limits() {
        let sw = spin(2); // q = 3
        let h = build_hamiltonian(1, sw, DEFAULT_DENSE_BUDGET).unwrap();
        let p = singlet_projector(3);
        // infinite temperature: normalized trace of a rank-1 projector
        let hot = gibbs_expectation(&h, &p, 0.0).unwrap();
        assert!((hot - 1.0 / 9.0).abs() < 1e-12);
        // two-level closed form at beta_q = 2.5
        let b = 2.5f64;
        let expected = b.exp() / (b.exp() + 8.0);
        let val = gibbs_expectation(&h, &p, b).unwrap();
        assert!((val - expected).abs() < 1e-12);
        // identity observable
        let one = gibbs_expectation(&h, &DenseOperator::identity(9), 7.0).unwrap();
        assert!((one - 1.0).abs() < 1e-12);
    }

    #[test]
    fn global_rotation_generators_commute_with_h() {
        let sw = spin(1);
        let q = sw.q();
        let h = build_hamiltonian(2, sw, DEFAULT_DENSE_BUDGET).unwrap();
        let mats = spin_matrices(sw);
        for op in [&mats.sx, &mats.sy_times_i, &mats.sz] {
            let mut total = DenseOperator::zeros(h.dim());
            for site in 0..4 {
                total.add_scaled(&embed_single(op, q, 4, site), 1.0);
            }
            let comm = h.commutator(&total);
            assert!(comm.max_abs() < 1e-10);
        }
    }

    #[test]
    fn spin_correlation_structure() {
        let sw = spin(2); // S = 1
        // off-diagonal components vanish by rotation invariance
        for (i, j) in [(1, 2), (1, 3), (2, 3)] {
            let (re, im) =
                spin_correlation_complex(2, sw, -1, 1, i, j, 3.0, DEFAULT_DENSE_BUDGET).unwrap();
            assert!(re.abs() < 1e-10 && im.abs() < 1e-10, "({i},{j}): {re} {im}");
        }
        // equal sites: Casimir / 3
        for i in 1..=3 {
            let v = spin_correlation(2, sw, 0, 0, i, i, 1.5, DEFAULT_DENSE_BUDGET).unwrap();
            assert!((v - 2.0 / 3.0).abs() < 1e-10);
        }
        // antiferromagnetic sign alternation at low temperature
        let mut prev_sign = 1.0;
        for y in 0..=2 {
            let v = spin_correlation(2, sw, -1, y, 3, 3, 10.0, DEFAULT_DENSE_BUDGET).unwrap();
            let sign = v.signum();
            assert_eq!(sign, -prev_sign, "sign at distance {}", y + 1);
            prev_sign = sign;
        }
    }

    #[test]
    fn discrete_time_partition_matches_two_site_closed_form() {
        for q in [2u32, 3] {
            let sw = spin(q - 1);
            let h = build_hamiltonian(1, sw, DEFAULT_DENSE_BUDGET).unwrap();
            let spec = eigendecompose(&h).unwrap();
            for n in [1u32, 2, 4, 8, 16] {
                let z = discrete_time_partition(&spec, 1, n);
                let closed = crate::enumerate::two_site_z_closed_form(q, 1, n);
                assert!((z - closed).abs() < 1e-10 * closed, "q={q} n={n}: {z} vs {closed}");
            }
        }
    }
}
