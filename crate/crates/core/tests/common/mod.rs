#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;

use charprob::canonical::{reduce, Reduction};
use charprob::charsolve::{DataSpec, Mode, Profile, VariableData};
use charprob::cli::WAVE3D;
use charprob::matkit::Matrix;
use charprob::sysmodel::load_system;
use charprob::Tolerances;

pub fn wave_reduction() -> Reduction<f64> {
    let (sys, chart) = load_system(WAVE3D).unwrap();
    reduce(&sys, &chart, &Tolerances::default()).unwrap()
}

/// Replaces the chart rows of the shipped wave definition.
pub fn wave_with_chart(rows: [&str; 4]) -> String {
    let head = WAVE3D.split("chart").next().unwrap();
    format!("{head}chart\n{}\n0 0 0 0\n", rows.join("\n"))
}

/// `sin(s - y)` written as a sum of separable modes
/// `sin(s)cos(y) + sin(s + π/2)cos(y + π/2)`.
pub fn travelling_sine(amp: f64) -> VariableData<f64> {
    VariableData {
        modes: vec![
            Mode::new(Profile::Sine { amp, k: 1.0, phase: 0.0 }).with_wavenumbers(&[1, 0]),
            Mode::new(Profile::Sine {
                amp,
                k: 1.0,
                phase: FRAC_PI_2,
            })
            .with_wavenumbers(&[1, 0])
            .with_transverse_phase(FRAC_PI_2),
        ],
    }
}

/// Amplitudes `β` with `v̂ = β sin(t - y)` for the wave solution generated by
/// `f = cos(t - y)`, i.e. `v = (∂t f, ∂x f, ∂y f, ∂z f) = (-1, 0, 1, 0) sin(t - y)`.
pub fn manufactured_amplitudes(red: &Reduction<f64>) -> Vec<f64> {
    red.canonical.variables.to_hat.mul_vec(&[-1.0, 0.0, 1.0, 0.0])
}

/// Data of the manufactured solution. With `t = u + x`, the argument is
/// `x - y` on `u = 0` and `u - y` on `x = 0`.
pub fn manufactured_data(red: &Reduction<f64>) -> DataSpec<f64> {
    let beta = manufactured_amplitudes(red);
    let p = red.canonical.n_normal();
    DataSpec {
        q0: beta[..p].iter().map(|&b| travelling_sine(b)).collect(),
        w0: beta[p..].iter().map(|&b| travelling_sine(b)).collect(),
    }
}

/// Rank of an integer matrix by fraction-free (Bareiss) elimination.
pub fn exact_rank(rows: &[Vec<i64>]) -> usize {
    let mut a: Vec<Vec<i128>> = rows.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let (n, m) = (a.len(), a.first().map_or(0, Vec::len));
    let mut rank = 0;
    let mut prev = 1i128;
    for col in 0..m {
        let Some(p) = (rank..n).find(|&i| a[i][col] != 0) else { continue };
        a.swap(rank, p);
        for i in rank + 1..n {
            for j in col + 1..m {
                a[i][j] = (a[rank][col] * a[i][j] - a[i][col] * a[rank][j]) / prev;
            }
            a[i][col] = 0;
        }
        prev = a[rank][col];
        rank += 1;
        if rank == n {
            break;
        }
    }
    rank
}

pub fn to_matrix(rows: &[Vec<i64>]) -> Matrix<f64> {
    let cols = rows.first().map_or(0, Vec::len);
    Matrix::from_row_major(rows.len(), cols, rows.iter().flatten().map(|&x| x as f64).collect()).unwrap()
}

/// `X·Y` with integer factors of inner dimension `r`, so the rank is at most `r`.
pub fn planted_rank<R: rand::Rng>(rng: &mut R, n: usize, r: usize) -> Vec<Vec<i64>> {
    let x: Vec<Vec<i64>> = (0..n).map(|_| (0..r).map(|_| rng.gen_range(-3..=3)).collect()).collect();
    let y: Vec<Vec<i64>> = (0..r).map(|_| (0..n).map(|_| rng.gen_range(-3..=3)).collect()).collect();
    (0..n)
        .map(|i| (0..n).map(|j| (0..r).map(|k| x[i][k] * y[k][j]).sum()).collect())
        .collect()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
