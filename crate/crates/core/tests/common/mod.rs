//! Helpers shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

use towpde::{DataFn, DomainSpec, ProblemData, SpaceTimeGrid};

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Nodes within `eps` of node `n`, by scanning every node.
pub fn brute_stencil(grid: &SpaceTimeGrid, n: usize) -> Vec<usize> {
    let x = grid.coord(n);
    let r = grid.eps() * (1.0 + 1e-9);
    let mut out: Vec<usize> = (0..grid.node_count()).filter(|&m| dist(grid.coord(m), x) <= r).collect();
    out.sort();
    out
}

/// Solves the slice's v-system exactly: with `S` frozen from `u_prev`,
/// `(1 − Kε⁴) v_i − (1 − Kε²) avg_i(v) = Kε²(1 − ε²) S_i`, collar `v = ḡ`.
pub fn direct_slice(grid: &SpaceTimeGrid, data: &ProblemData, level: usize, u_prev: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n_int = grid.interior_count();
    let t = grid.times()[level];
    let eps2 = data.eps * data.eps;
    let k = data.k;
    let mut a = DMatrix::<f64>::zeros(n_int, n_int);
    let mut b = DVector::<f64>::zeros(n_int);
    let mut s = vec![0.0; n_int];
    for i in 0..n_int {
        let st = brute_stencil(grid, i);
        let hi = st.iter().map(|&m| u_prev[m]).fold(f64::NEG_INFINITY, f64::max);
        let lo = st.iter().map(|&m| u_prev[m]).fold(f64::INFINITY, f64::min);
        s[i] = 0.5 * hi + 0.5 * lo;
        a[(i, i)] += 1.0 - k * eps2 * eps2;
        b[i] = k * eps2 * (1.0 - eps2) * s[i];
        let w = (1.0 - k * eps2) / st.len() as f64;
        for &m in &st {
            if m < n_int {
                a[(i, m)] -= w;
            } else {
                b[i] += w * data.g.eval(grid.coord(m), t);
            }
        }
    }
    let v = a.lu().solve(&b).expect("nonsingular slice system");
    let u: Vec<f64> = (0..n_int).map(|i| s[i] + eps2 * (v[i] - s[i])).collect();
    (u, v.iter().copied().collect())
}

pub fn toy_problems() -> Vec<(ProblemData, SpaceTimeGrid)> {
    let one_d = {
        let domain = DomainSpec::ball(&[0.0], 1.0);
        let data = ProblemData::new(
            domain.clone(),
            DataFn::affine(0.1, &[0.8]),
            DataFn::constant(-0.4),
            DataFn::bump(&[0.2], 0.7, 1.0),
            0.4,
            0.64,
        );
        let grid = SpaceTimeGrid::build(domain, 0.1, 0.4, 0.64).unwrap();
        (data, grid)
    };
    let two_d = {
        let domain = DomainSpec::ball(&[0.0, 0.0], 0.2);
        let data = ProblemData::new(
            domain.clone(),
            DataFn::affine(0.0, &[1.0, -0.5]),
            DataFn::bump(&[0.2, 0.0], 0.3, 0.6),
            DataFn::quadratic(0.0, &[0.0, 0.0], vec![vec![2.0, 0.0], vec![0.0, -1.0]]),
            0.2,
            0.2,
        )
        .with_k(2.0);
        let grid = SpaceTimeGrid::build(domain, 0.05, 0.2, 0.2).unwrap();
        (data, grid)
    };
    vec![one_d, two_d]
}

