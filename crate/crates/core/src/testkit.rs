//! Independent verification oracles for the test suites.
//!
//! Everything here deliberately avoids the implementation paths it is used
//! to check: forward kinematics is recomputed through full 4x4 homogeneous
//! transforms instead of the production rotation-accumulation, Jacobians
//! and network gradients come from central finite differences, and the
//! link-length fit has a closed-form normal-equations solution.

use crate::kinematics::{Axis, KinematicChain, Position3};
use crate::linalg::Matrix;
use crate::neuralnet::{Gradients, Mlp};

/// 4x4 homogeneous matrix, row-major.
type Hom = [[f64; 4]; 4];

fn hom_identity() -> Hom {
    let mut m = [[0.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

fn hom_mul(a: &Hom, b: &Hom) -> Hom {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = 0.0;
            for (k, brow) in b.iter().enumerate() {
                acc += a[i][k] * brow[j];
            }
            out[i][j] = acc;
        }
    }
    out
}

fn hom_rotation(axis: Axis, angle: f64) -> Hom {
    let (s, c) = angle.sin_cos();
    let mut m = hom_identity();
    match axis {
        Axis::X => {
            m[1][1] = c;
            m[1][2] = -s;
            m[2][1] = s;
            m[2][2] = c;
        }
        Axis::Y => {
            m[0][0] = c;
            m[0][2] = s;
            m[2][0] = -s;
            m[2][2] = c;
        }
        Axis::Z => {
            m[0][0] = c;
            m[0][1] = -s;
            m[1][0] = s;
            m[1][1] = c;
        }
    }
    m
}

fn hom_translation(x: f64) -> Hom {
    let mut m = hom_identity();
    m[0][3] = x;
    m
}

/// Forward kinematics by composing full homogeneous matrices
/// (rotate about the joint axis, then translate the link along local +x),
/// taking the translation of the final frame. Works on raw parameter
/// slices so link-length variations need no chain construction.
pub fn fk_homogeneous(axes: &[Axis], link_lengths: &[f64], q: &[f64]) -> Position3 {
    assert_eq!(axes.len(), link_lengths.len());
    assert_eq!(axes.len(), q.len());
    let mut t = hom_identity();
    for ((&axis, &len), &angle) in axes.iter().zip(link_lengths).zip(q) {
        t = hom_mul(&t, &hom_rotation(axis, angle));
        t = hom_mul(&t, &hom_translation(len));
    }
    [t[0][3], t[1][3], t[2][3]]
}

/// Convenience wrapper over a chain's own parameters.
pub fn chain_fk_oracle(chain: &KinematicChain, q: &[f64]) -> Position3 {
    fk_homogeneous(chain.axes(), chain.link_lengths(), q)
}

/// Central-difference position Jacobian ∂p/∂q (3 x n).
pub fn numerical_joint_jacobian(chain: &KinematicChain, q: &[f64], step: f64) -> Matrix {
    let n = q.len();
    let mut jac = Matrix::zeros(3, n);
    let mut probe = q.to_vec();
    for j in 0..n {
        probe[j] = q[j] + step;
        let plus = chain.fk(&probe);
        probe[j] = q[j] - step;
        let minus = chain.fk(&probe);
        probe[j] = q[j];
        for r in 0..3 {
            jac.data_mut()[r * n + j] = (plus[r] - minus[r]) / (2.0 * step);
        }
    }
    jac
}

/// Central-difference Jacobian ∂p/∂L (3 x n), evaluated through the
/// homogeneous-transform route.
pub fn numerical_link_jacobian(chain: &KinematicChain, q: &[f64], step: f64) -> Matrix {
    let n = q.len();
    let mut jac = Matrix::zeros(3, n);
    let mut lengths = chain.link_lengths().to_vec();
    for j in 0..n {
        let orig = lengths[j];
        lengths[j] = orig + step;
        let plus = fk_homogeneous(chain.axes(), &lengths, q);
        lengths[j] = orig - step;
        let minus = fk_homogeneous(chain.axes(), &lengths, q);
        lengths[j] = orig;
        for r in 0..3 {
            jac.data_mut()[r * n + j] = (plus[r] - minus[r]) / (2.0 * step);
        }
    }
    jac
}

/// Central-difference gradient of an arbitrary scalar loss over every
/// network parameter.
pub fn numerical_param_gradients(mlp: &Mlp, eps: f64, loss: impl Fn(&Mlp) -> f64) -> Gradients {
    let mut probe = mlp.clone();
    let mut d_weights = Vec::with_capacity(mlp.n_layers());
    let mut d_biases = Vec::with_capacity(mlp.n_layers());
    for l in 0..mlp.n_layers() {
        let (rows, cols) = (mlp.weights(l).rows(), mlp.weights(l).cols());
        let mut dw = Matrix::zeros(rows, cols);
        for idx in 0..rows * cols {
            let orig = probe.weights(l).data()[idx];
            probe.weights_mut(l).data_mut()[idx] = orig + eps;
            let plus = loss(&probe);
            probe.weights_mut(l).data_mut()[idx] = orig - eps;
            let minus = loss(&probe);
            probe.weights_mut(l).data_mut()[idx] = orig;
            dw.data_mut()[idx] = (plus - minus) / (2.0 * eps);
        }
        d_weights.push(dw);

        let mut db = vec![0.0; mlp.biases(l).len()];
        for (idx, slot) in db.iter_mut().enumerate() {
            let orig = probe.biases(l)[idx];
            probe.biases_mut(l)[idx] = orig + eps;
            let plus = loss(&probe);
            probe.biases_mut(l)[idx] = orig - eps;
            let minus = loss(&probe);
            probe.biases_mut(l)[idx] = orig;
            *slot = (plus - minus) / (2.0 * eps);
        }
        d_biases.push(db);
    }
    Gradients {
        d_weights,
        d_biases,
    }
}

/// Largest elementwise relative error between two gradient sets, with a
/// small absolute floor so zero gradients compare cleanly.
pub fn max_relative_gradient_error(a: &Gradients, b: &Gradients) -> f64 {
    let mut worst: f64 = 0.0;
    let mut compare = |x: f64, y: f64| {
        let denom = x.abs().max(y.abs()).max(1e-8);
        worst = worst.max((x - y).abs() / denom);
    };
    for (wa, wb) in a.d_weights.iter().zip(&b.d_weights) {
        for (&x, &y) in wa.data().iter().zip(wb.data()) {
            compare(x, y);
        }
    }
    for (ba, bb) in a.d_biases.iter().zip(&b.d_biases) {
        for (&x, &y) in ba.iter().zip(bb) {
            compare(x, y);
        }
    }
    worst
}

/// Closed-form link-length estimate from (q, p) pairs: fk is linear in the
/// lengths, so the least-squares problem has normal equations
/// (Σ DᵀD) L = Σ Dᵀp with D the per-sample link-direction matrix. The
/// direction matrices are built by probing the homogeneous-transform
/// oracle with unit basis lengths, keeping this fully independent of the
/// gradient-descent refit.
pub fn solve_link_lengths_least_squares(
    axes: &[Axis],
    q_rows: &Matrix,
    p_rows: &Matrix,
) -> Vec<f64> {
    let n = axes.len();
    assert_eq!(q_rows.cols(), n);
    assert_eq!(p_rows.cols(), 3);
    assert!(q_rows.rows() >= n, "need at least n samples");

    let mut ata = vec![0.0; n * n];
    let mut atb = vec![0.0; n];
    let mut basis = vec![0.0; n];
    for i in 0..q_rows.rows() {
        let q = q_rows.row(i);
        // column j of D: end position with L = e_j (linearity in lengths)
        let mut d = vec![[0.0f64; 3]; n];
        for (j, dj) in d.iter_mut().enumerate() {
            basis.fill(0.0);
            basis[j] = 1.0;
            *dj = fk_homogeneous(axes, &basis, q);
        }
        let p = p_rows.row(i);
        for a in 0..n {
            for b in 0..n {
                ata[a * n + b] += d[a][0] * d[b][0] + d[a][1] * d[b][1] + d[a][2] * d[b][2];
            }
            atb[a] += d[a][0] * p[0] + d[a][1] * p[1] + d[a][2] * p[2];
        }
    }
    solve_linear(&mut ata, &mut atb, n);
    atb
}

/// Gaussian elimination with partial pivoting, in place; solution left in b.
fn solve_linear(a: &mut [f64], b: &mut [f64], n: usize) {
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r1, &r2| {
                a[r1 * n + col]
                    .abs()
                    .partial_cmp(&a[r2 * n + col].abs())
                    .unwrap()
            })
            .unwrap();
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * n + col];
        assert!(diag.abs() > 1e-12, "singular normal equations");
        for row in col + 1..n {
            let factor = a[row * n + col] / diag;
            for j in col..n {
                a[row * n + j] -= factor * a[col * n + j];
            }
            b[row] -= factor * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = b[col];
        for j in col + 1..n {
            acc -= a[col * n + j] * b[j];
        }
        b[col] = acc / a[col * n + col];
    }
}
