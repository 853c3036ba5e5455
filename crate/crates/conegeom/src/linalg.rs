//! Small dense linear algebra on stack arrays: determinants and inverses of
//! matrices up to 8x8 (the ambient dimension cap), and least squares for the
//! handful-of-parameters extrapolation fits.
//!
//! Partial-pivot LU throughout; at these sizes that is exact enough for every
//! consumer (curvature determinants of well-conditioned restricted Hessians,
//! normal equations with <= 6 columns).

/// Ambient dimension cap for stack-allocated geometry.
pub const MAX_DIM: usize = 8;

pub type SmallMat = [[f64; MAX_DIM]; MAX_DIM];

/// y = A x on the leading `n x n` block.
pub fn mat_vec(a: &SmallMat, x: &[f64], n: usize) -> [f64; MAX_DIM] {
    let mut y = [0.0; MAX_DIM];
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            s += a[i][j] * x[j];
        }
        y[i] = s;
    }
    y
}

/// Determinant of the leading `n x n` block via LU with partial pivoting.
pub fn det(a: &SmallMat, n: usize) -> f64 {
    let mut m = *a;
    let mut d = 1.0;
    for k in 0..n {
        let mut piv = k;
        for i in k + 1..n {
            if m[i][k].abs() > m[piv][k].abs() {
                piv = i;
            }
        }
        if m[piv][k] == 0.0 {
            return 0.0;
        }
        if piv != k {
            m.swap(piv, k);
            d = -d;
        }
        d *= m[k][k];
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            for j in k + 1..n {
                m[i][j] -= f * m[k][j];
            }
        }
    }
    d
}

/// Inverse of the leading `n x n` block (Gauss-Jordan); `None` if singular.
pub fn invert(a: &SmallMat, n: usize) -> Option<SmallMat> {
    let mut m = *a;
    let mut inv: SmallMat = [[0.0; MAX_DIM]; MAX_DIM];
    for (i, row) in inv.iter_mut().enumerate().take(n) {
        row[i] = 1.0;
    }
    for k in 0..n {
        let mut piv = k;
        for i in k + 1..n {
            if m[i][k].abs() > m[piv][k].abs() {
                piv = i;
            }
        }
        if m[piv][k] == 0.0 {
            return None;
        }
        m.swap(piv, k);
        inv.swap(piv, k);
        let p = m[k][k];
        for j in 0..n {
            m[k][j] /= p;
            inv[k][j] /= p;
        }
        for i in 0..n {
            if i != k && m[i][k] != 0.0 {
                let f = m[i][k];
                for j in 0..n {
                    m[i][j] -= f * m[k][j];
                    inv[i][j] -= f * inv[k][j];
                }
            }
        }
    }
    Some(inv)
}

/// Least squares `argmin ||A c - y||` by normal equations, for skinny `A`
/// given row-wise. Column count must be small (extrapolation bases, quadratic
/// form fits); returns `None` when the normal matrix is singular.
pub fn lstsq(rows: &[&[f64]], y: &[f64]) -> Option<Vec<f64>> {
    assert_eq!(rows.len(), y.len());
    let k = rows.first().map_or(0, |r| r.len());
    if rows.len() < k || k == 0 {
        return None;
    }
    let mut ata = vec![0.0; k * k];
    let mut aty = vec![0.0; k];
    for (row, &yi) in rows.iter().zip(y) {
        assert_eq!(row.len(), k);
        for i in 0..k {
            aty[i] += row[i] * yi;
            for j in 0..k {
                ata[i * k + j] += row[i] * row[j];
            }
        }
    }
    solve_dense(&mut ata, &mut aty, k).then_some(aty)
}

/// In-place Gaussian elimination with partial pivoting on a dense `k x k`
/// system; solution lands in `b`. Returns false on singularity.
fn solve_dense(a: &mut [f64], b: &mut [f64], k: usize) -> bool {
    for col in 0..k {
        let mut piv = col;
        for r in col + 1..k {
            if a[r * k + col].abs() > a[piv * k + col].abs() {
                piv = r;
            }
        }
        if a[piv * k + col] == 0.0 {
            return false;
        }
        if piv != col {
            for j in 0..k {
                a.swap(piv * k + j, col * k + j);
            }
            b.swap(piv, col);
        }
        for r in 0..k {
            if r != col {
                let f = a[r * k + col] / a[col * k + col];
                for j in col..k {
                    a[r * k + j] -= f * a[col * k + j];
                }
                b[r] -= f * b[col];
            }
        }
    }
    for col in 0..k {
        b[col] /= a[col * k + col];
    }
    true
}

/// Compensated (Neumaier) summation over a fixed iteration order; the
/// deterministic reduction used by every quadrature rule.
pub fn compensated_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for x in xs {
        let t = s + x;
        c += if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
        s = t;
    }
    s + c
}
