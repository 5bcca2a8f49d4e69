//! Reference computations written without the library's linear algebra or
//! model code, used to cross-check it.

/// Cyclic Jacobi rotations on a dense symmetric matrix; eigenvalues ascending.
pub fn jacobi_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i][j] * m[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    eig.sort_by(f64::total_cmp);
    eig
}

/// Gaussian elimination with partial pivoting.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(row, &bi)| {
        let mut r = row.clone();
        r.push(bi);
        r
    }).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..=n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    x
}

/// Γ for pairwise-sine sensors `sin(θ_i + θ_j)` (0-based pairs) with common
/// variance: `(1/N) Σ g gᵀ / σ²`, `g = cos(θ_i+θ_j)(e_i + e_j)`.
pub fn sine_gamma(pairs: &[(usize, usize)], variance: f64, theta: &[f64]) -> Vec<Vec<f64>> {
    let m = theta.len();
    let mut g = vec![vec![0.0; m]; m];
    for &(i, j) in pairs {
        let mut v = vec![0.0; m];
        let c = (theta[i] + theta[j]).cos();
        v[i] += c;
        v[j] += c;
        for r in 0..m {
            for s in 0..m {
                g[r][s] += v[r] * v[s] / variance / pairs.len() as f64;
            }
        }
    }
    g
}

/// Laplacian of an undirected edge list.
pub fn laplacian(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let mut l = vec![vec![0.0; n]; n];
    for &(a, b) in edges {
        l[a][a] += 1.0;
        l[b][b] += 1.0;
        l[a][b] -= 1.0;
        l[b][a] -= 1.0;
    }
    l
}

/// `Σ_d` eigenvalues from those of Γ: `a/(2N) + 1/(4(NΛ − N/(2a)))`.
pub fn sigma_d_eigenvalues(gamma_eigs: &[f64], n: f64, a: f64) -> Vec<f64> {
    gamma_eigs.iter().map(|&l| a / (2.0 * n) + 0.25 / (n * l - n / (2.0 * a))).collect()
}

/// Central-difference derivative of a scalar function along each axis.
pub fn central_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut p = x.to_vec();
            let mut q = x.to_vec();
            p[i] += h;
            q[i] -= h;
            (f(&p) - f(&q)) / (2.0 * h)
        })
        .collect()
}
