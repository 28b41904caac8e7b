//! OLS and the label-flip matrices against exact rational arithmetic.

use labelboot::design::{bias_matrices, build_design, ols_fit};
use labelboot::{DMatrix, DVector, DesignSpec};
use num::{BigRational, Signed, ToPrimitive, Zero};

type Q = BigRational;

fn q(x: f64) -> Q {
    Q::from_float(x).unwrap()
}

/// Solves `a x = b` by Gaussian elimination over the rationals.
fn solve(mut a: Vec<Vec<Q>>, mut b: Vec<Q>) -> Vec<Q> {
    let k = b.len();
    for col in 0..k {
        let pivot = (col..k)
            .find(|&r| !a[r][col].is_zero())
            .expect("nonsingular");
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in 0..k {
            if r != col && !a[r][col].is_zero() {
                let factor = &a[r][col] / &a[col][col];
                let pivot_row = a[col].clone();
                for (target, p) in a[r].iter_mut().zip(&pivot_row).skip(col) {
                    *target -= &factor * p;
                }
                let delta = &factor * &b[col];
                b[r] -= delta;
            }
        }
    }
    (0..k).map(|i| &b[i] / &a[i][i]).collect()
}

fn gram(x: &DMatrix<f64>, w: &DMatrix<f64>) -> Vec<Vec<Q>> {
    let (n, k) = x.shape();
    (0..k)
        .map(|a| {
            (0..k)
                .map(|b| (0..n).fold(Q::zero(), |acc, i| acc + q(x[(i, a)]) * q(w[(i, b)])))
                .collect()
        })
        .collect()
}

fn sample() -> (Vec<bool>, DMatrix<f64>, DVector<f64>) {
    let theta = vec![true, false, false, true, false];
    let z = DMatrix::from_row_slice(
        5,
        2,
        &[1.0, 0.5, 1.0, -1.25, 1.0, 2.0, 1.0, 0.75, 1.0, -0.5],
    );
    let y = DVector::from_vec(vec![1.5, -0.25, 2.125, 0.875, 0.0625]);
    (theta, z, y)
}

#[test]
fn ols_matches_rational_normal_equations() {
    let (theta, z, y) = sample();
    let spec = DesignSpec::Additive;
    let x = build_design(&theta, &z, &spec).unwrap();
    let fit = ols_fit(&x, &y).unwrap();
    let (n, k) = x.shape();
    let xtx = gram(&x, &x);
    let xty: Vec<Q> = (0..k)
        .map(|a| (0..n).fold(Q::zero(), |acc, i| acc + q(x[(i, a)]) * q(y[i])))
        .collect();
    let beta = solve(xtx.clone(), xty);
    for j in 0..k {
        let exact = beta[j].to_f64().unwrap();
        assert!(
            (fit.beta_hat[j] - exact).abs() <= 1e-10,
            "beta[{j}] {} vs {exact}",
            fit.beta_hat[j]
        );
        for (l, entry) in xtx[j].iter().enumerate() {
            let exact_q = (entry / Q::from_integer(n.into())).to_f64().unwrap();
            assert!((fit.q_hat[(j, l)] - exact_q).abs() <= 1e-12);
        }
    }
    for i in 0..n {
        let fitted = (0..k).fold(Q::zero(), |acc, j| acc + q(x[(i, j)]) * &beta[j]);
        let exact = (q(y[i]) - fitted).to_f64().unwrap();
        assert!((fit.residuals[i] - exact).abs() <= 1e-10);
    }
}

#[test]
fn flip_matrices_match_rational_sums() {
    let (_, z, _) = sample();
    let spec = DesignSpec::intercept_interaction();
    let bm = bias_matrices(&z, &spec).unwrap();
    let n = z.nrows();
    let g1 = build_design(&vec![true; n], &z, &spec).unwrap();
    let g0 = build_design(&vec![false; n], &z, &spec).unwrap();
    let diff = &g1 - &g0;
    let scale = Q::from_integer(n.into());
    let plus = gram(&g1, &diff);
    let minus = gram(&g0, &(-&diff));
    for a in 0..g1.ncols() {
        for b in 0..g1.ncols() {
            let p = (&plus[a][b] / &scale).to_f64().unwrap();
            let m = (&minus[a][b] / &scale).to_f64().unwrap();
            assert!((bm.d_plus_bar[(a, b)] - p).abs() <= 1e-12);
            assert!((bm.d_minus_bar[(a, b)] - m).abs() <= 1e-12);
        }
    }
}

#[test]
fn rational_solver_round_trips() {
    let a = vec![vec![q(2.0), q(1.0)], vec![q(1.0), q(3.0)]];
    let x = solve(a, vec![q(3.0), q(5.0)]);
    let expected = [Q::new(4.into(), 5.into()), Q::new(7.into(), 5.into())];
    assert!(x
        .iter()
        .zip(&expected)
        .all(|(a, b)| (a - b).abs().is_zero()));
}
