//! Dense complex helpers: Schur reordering, Sylvester solves, subspaces.

use nalgebra::{Complex, DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const I: C64 = Complex { re: 0.0, im: 1.0 };

pub fn cis(theta: f64) -> C64 {
    Complex::from_polar(1.0, theta)
}

pub fn real(x: f64) -> C64 {
    Complex::new(x, 0.0)
}

/// Complex Schur form `m = q t q*` with the strictly lower part of `t` cleared.
/// Complex Schur form `m = q t q*`. The QR iteration can stall on highly symmetric
/// unitary inputs; those are retried after a random unitary similarity.
pub fn schur(m: &CMat) -> (CMat, CMat) {
    let n = m.nrows();
    let max_iter = 200 * n.max(1);
    let mut rng = StdRng::seed_from_u64(0x5c4u64);
    let mut attempt = nalgebra::linalg::Schur::try_new(m.clone(), f64::EPSILON, max_iter).map(|s| s.unpack());
    while attempt.is_none() {
        let z = CMat::from_fn(n, n, |_, _| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let w = z.qr().q();
        attempt = nalgebra::linalg::Schur::try_new(w.adjoint() * m * &w, f64::EPSILON, max_iter)
            .map(|s| s.unpack())
            .map(|(v, t)| (&w * v, t));
    }
    let (q, mut t) = attempt.expect("schur");
    let n = t.nrows();
    for j in 0..n {
        for i in j + 1..n {
            t[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    (q, t)
}

pub fn eigenvalues(m: &CMat) -> Vec<C64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let (_, t) = schur(m);
    t.diagonal().iter().copied().collect()
}

// Swap diagonal entries k and k+1 of the triangular factor with a Givens rotation.
fn swap_adjacent(q: &mut CMat, t: &mut CMat, k: usize) {
    let a = t[(k, k)];
    let b = t[(k + 1, k + 1)];
    let f = t[(k, k + 1)];
    let g = b - a;
    let r = (f.norm_sqr() + g.norm_sqr()).sqrt();
    if r == 0.0 {
        return;
    }
    let (cs, sn) = if f.norm() == 0.0 {
        (0.0, C64::new(1.0, 0.0))
    } else {
        (f.norm() / r, (f / f.norm()) * g.conj() / r)
    };
    let n = t.nrows();
    // rows: [x; y] <- [[cs, sn], [-conj(sn), cs]] [x; y]
    for j in 0..n {
        let x = t[(k, j)];
        let y = t[(k + 1, j)];
        t[(k, j)] = x * cs + sn * y;
        t[(k + 1, j)] = -sn.conj() * x + y * cs;
    }
    // columns: multiply by the adjoint on the right
    for i in 0..n {
        let x = t[(i, k)];
        let y = t[(i, k + 1)];
        t[(i, k)] = x * cs + sn.conj() * y;
        t[(i, k + 1)] = -sn * x + y * cs;
        let x = q[(i, k)];
        let y = q[(i, k + 1)];
        q[(i, k)] = x * cs + sn.conj() * y;
        q[(i, k + 1)] = -sn * x + y * cs;
    }
    t[(k + 1, k)] = C64::new(0.0, 0.0);
    t[(k, k)] = b;
    t[(k + 1, k + 1)] = a;
}

/// Move the diagonal positions flagged in `member` to the front of the Schur form.
/// Returns the number of moved entries.
pub fn reorder_front(q: &mut CMat, t: &mut CMat, member: &[bool]) -> usize {
    let mut flags = member.to_vec();
    let mut front = 0;
    for pos in 0..flags.len() {
        if !flags[pos] {
            continue;
        }
        let mut k = pos;
        while k > front {
            swap_adjacent(q, t, k - 1);
            flags.swap(k - 1, k);
            k -= 1;
        }
        front += 1;
    }
    front
}

/// Solve `a x - x b = c` for upper-triangular `a` and `b` with disjoint spectra.
pub fn sylvester_upper(a: &CMat, b: &CMat, c: &CMat) -> CMat {
    let p = a.nrows();
    let q = b.nrows();
    let mut x = CMat::zeros(p, q);
    for j in 0..q {
        let mut rhs: CVec = c.column(j).into_owned();
        for l in 0..j {
            let blj = b[(l, j)];
            for i in 0..p {
                rhs[i] += x[(i, l)] * blj;
            }
        }
        let shift = b[(j, j)];
        for i in (0..p).rev() {
            let mut s = rhs[i];
            for k in i + 1..p {
                s -= a[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = s / (a[(i, i)] - shift);
        }
    }
    x
}

/// Spectral projector onto the invariant subspace of the leading `p` Schur vectors,
/// along the complementary invariant subspace.
pub fn leading_projector(q: &CMat, t: &CMat, p: usize) -> CMat {
    let n = t.nrows();
    let mut ph = CMat::zeros(n, n);
    for i in 0..p {
        ph[(i, i)] = real(1.0);
    }
    if p < n {
        let t11 = t.view((0, 0), (p, p)).into_owned();
        let t22 = t.view((p, p), (n - p, n - p)).into_owned();
        let t12 = t.view((0, p), (p, n - p)).into_owned();
        let x = sylvester_upper(&t11, &t22, &(-t12));
        ph.view_mut((0, p), (p, n - p)).copy_from(&(-x));
    }
    q * ph * q.adjoint()
}

/// Union-find grouping of points closer than `tol`.
pub fn cluster_points(values: &[C64], tol: f64) -> Vec<Vec<usize>> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut k = i;
        while p[k] != r {
            let nx = p[k];
            p[k] = r;
            k = nx;
        }
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (values[i] - values[j]).norm() < tol {
                let a = find(&mut parent, i);
                let b = find(&mut parent, j);
                if a != b {
                    parent[b] = a;
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_of: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        match root_of[r] {
            Some(g) => groups[g].push(i),
            None => {
                root_of[r] = Some(groups.len());
                groups.push(vec![i]);
            }
        }
    }
    groups
}

/// Orthonormal basis of the column space by Gram-Schmidt with column pivoting and
/// reorthogonalisation. Columns whose residual drops below `tol * max(1, largest column norm)`
/// count as dependent.
pub fn orth(m: &CMat, tol: f64) -> CMat {
    let rows = m.nrows();
    let mut cols: Vec<CVec> = (0..m.ncols()).map(|j| m.column(j).into_owned()).collect();
    let scale = cols.iter().map(|c| c.norm()).fold(1.0, f64::max);
    let mut basis: Vec<CVec> = Vec::new();
    while !cols.is_empty() {
        let (k, best) = cols
            .iter()
            .enumerate()
            .map(|(k, c)| (k, c.norm()))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best <= tol * scale {
            break;
        }
        let mut q = cols.swap_remove(k);
        for _ in 0..2 {
            for b in &basis {
                let h = b.dotc(&q);
                q -= b * h;
            }
        }
        let nq = q.norm();
        if nq <= tol * scale {
            continue;
        }
        q /= real(nq);
        for c in cols.iter_mut() {
            let h = q.dotc(c);
            *c -= &q * h;
        }
        basis.push(q);
    }
    let mut out = CMat::zeros(rows, basis.len());
    for (j, b) in basis.iter().enumerate() {
        out.set_column(j, b);
    }
    out
}

/// Orthonormal basis of the null space: the orthogonal complement of the row space.
pub fn null_space(m: &CMat, tol: f64) -> CMat {
    let n = m.ncols();
    let rowspace = orth(&m.adjoint(), tol);
    let complement = CMat::identity(n, n) - &rowspace * rowspace.adjoint();
    let out = orth(&complement, 1e-8);
    debug_assert_eq!(out.ncols() + rowspace.ncols(), n);
    out
}

/// Largest singular value, from the Hermitian eigenproblem of `m* m`.
pub fn op_norm(m: &CMat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    let h = m.adjoint() * m;
    let h = (&h + h.adjoint()) * real(0.5);
    nalgebra::SymmetricEigen::new(h).eigenvalues.max().max(0.0).sqrt()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(real)
}
