//! Discrete energy norms on the data surfaces `u = 0`, `x = 0` and the top
//! surface `Σ_T: u + x = T`, the flux balance over the prism they bound, and
//! the check of the a priori bound.
//!
//! All integrals use the coordinate measure (`dx` along `u = 0` and `Σ_T`,
//! `du` along `x = 0`) times the transverse cell volume. Quadratic forms are
//! evaluated at cell midpoints, with the midpoint value interpolated linearly
//! from the neighbouring nodes.

use crate::canonical::{CanonicalSystem, CompactSystem};
use crate::charsolve::{SliceState, SolutionTrace};
use crate::error::{Error, Result};
use crate::matkit::Matrix;
use crate::scalar::Scalar;
use crate::wellposed::{GrowthParameters, Verdict, WellPosednessReport};

/// Default constant in `tol_h = C_tol · dx · (‖q₀‖² + ‖w₀‖²)`.
pub const DEFAULT_C_TOL: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport<T> {
    /// Level actually used, after snapping to the grid.
    pub t: T,
    /// The requested level when it had to be snapped.
    pub snapped_from: Option<T>,
    pub norm_q0_sq: T,
    pub norm_w0_sq: T,
    pub sigma_norm_sq: T,
    pub bound: T,
    pub margin: T,
    pub balance_residual: T,
    pub tol_h: T,
    pub holds: bool,
}

/// A top surface `u + x = t` passing through the nodes of slices `0..=k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Level<T> {
    pub t: T,
    pub k: usize,
    pub snapped_from: Option<T>,
}

/// Snaps `t` to the nearest multiple of `du`, checking that every point of
/// the diagonal lies inside the marched triangle.
pub fn snap_level<T: Scalar>(trace: &SolutionTrace<T>, t: T) -> Result<Level<T>> {
    let du = trace.grid.du();
    let dx = trace.grid.dx();
    if !(t >= T::zero() && t.is_finite()) {
        return Err(Error::Range(format!("T = {} must be non-negative", t.as_f64())));
    }
    let kf = (t / du).round();
    let k = kf.to_usize().unwrap_or(usize::MAX);
    let snapped = kf * du;
    let slack = T::lit(1e-9) * du;
    let snapped_from = if (snapped - t).abs() > slack { Some(t) } else { None };
    if k >= trace.slices.len() {
        return Err(Error::Range(format!(
            "T = {} needs {} slices; the trace has {}",
            t.as_f64(),
            k + 1,
            trace.slices.len()
        )));
    }
    for (n, s) in trace.slices.iter().enumerate().take(k + 1) {
        let x = snapped - T::from_count(n) * du;
        if x > T::from_count(s.x_extent()) * dx + slack {
            return Err(Error::Range(format!(
                "T = {} leaves the marched triangle at slice {n}",
                t.as_f64()
            )));
        }
    }
    Ok(Level {
        t: snapped,
        k,
        snapped_from,
    })
}

fn quad<T: Scalar>(w: &Matrix<T>, v: &[T]) -> T {
    let mut acc = T::zero();
    for i in 0..w.rows() {
        let mut row = T::zero();
        for j in 0..w.cols() {
            row = row + w[(i, j)] * v[j];
        }
        acc = acc + v[i] * row;
    }
    acc
}

fn lerp_into<T: Scalar>(out: &mut [T], a: &[T], b: &[T], theta: T) {
    for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
        *o = x + theta * (y - x);
    }
}

/// `∫₀^len vᵀ W v dx` along one slice at transverse index `t`, midpoint rule
/// with a shortened last cell.
fn slice_line<T: Scalar>(slice: &SliceState<T>, t: usize, dx: T, len: T, w: &Matrix<T>, buf: &mut [T]) -> Result<T> {
    if len <= T::zero() {
        return Ok(T::zero());
    }
    let eps = T::lit(1e-9);
    let cells = len / dx;
    let full = (cells + eps).floor().to_usize().unwrap_or(0);
    let frac = (cells - T::from_count(full)).max(T::zero());
    let frac = if frac <= eps { T::zero() } else { frac };
    let needed = if frac > T::zero() { full + 1 } else { full };
    if needed > slice.x_extent() {
        return Err(Error::Range(format!(
            "x length {} exceeds slice {} extent",
            len.as_f64(),
            slice.level
        )));
    }
    let half = T::lit(0.5);
    let mut acc = T::zero();
    for j in 0..full {
        lerp_into(buf, slice.point(j, t), slice.point(j + 1, t), half);
        acc = acc + dx * quad(w, buf);
    }
    if frac > T::zero() {
        lerp_into(buf, slice.point(full, t), slice.point(full + 1, t), half * frac);
        acc = acc + frac * dx * quad(w, buf);
    }
    Ok(acc)
}

/// Value of `v̂` on slice `n` at `x = x` (linear interpolation).
fn sample_at<T: Scalar>(slice: &SliceState<T>, t: usize, x: T, dx: T, out: &mut [T]) {
    let s = (x / dx).max(T::zero());
    let mut j = s.floor().to_usize().unwrap_or(0);
    let mut theta = s - T::from_count(j);
    if j >= slice.x_extent() {
        j = slice.x_extent().saturating_sub(1);
        theta = T::one();
    }
    if theta <= T::lit(1e-9) {
        out.copy_from_slice(slice.point(j, t));
    } else {
        lerp_into(out, slice.point(j, t), slice.point(j + 1, t), theta.min(T::one()));
    }
}

fn pad_nu<T: Scalar>(canon: &CanonicalSystem<T>) -> Matrix<T> {
    let n = canon.n_unknowns;
    let mut w = Matrix::zeros(n, n);
    w.set_block(0, 0, &canon.nu);
    w
}

fn null_identity<T: Scalar>(n: usize, m: usize) -> Matrix<T> {
    let mut w = Matrix::zeros(n, n);
    for i in n - m..n {
        w[(i, i)] = T::one();
    }
    w
}

/// `∫_{x=0, 0≤u≤T} vᵀ W v du` over the torus.
fn x_zero_integral<T: Scalar>(trace: &SolutionTrace<T>, w: &Matrix<T>, t_end: T) -> Result<T> {
    let du = trace.grid.du();
    let n = trace.n_unknowns();
    let cells = t_end / du;
    let eps = T::lit(1e-9);
    let full = (cells + eps).floor().to_usize().unwrap_or(0);
    let frac = (cells - T::from_count(full)).max(T::zero());
    let frac = if frac <= eps { T::zero() } else { frac };
    let needed = if frac > T::zero() { full + 1 } else { full };
    if needed >= trace.slices.len() && needed > 0 {
        return Err(Error::Range(format!(
            "T = {} beyond the {} marched slices",
            t_end.as_f64(),
            trace.slices.len()
        )));
    }
    let half = T::lit(0.5);
    let mut buf = vec![T::zero(); n];
    let mut acc = T::zero();
    for t in 0..trace.grid.n_transverse() {
        for k in 0..full {
            lerp_into(&mut buf, trace.slices[k].point(0, t), trace.slices[k + 1].point(0, t), half);
            acc = acc + du * quad(w, &buf);
        }
        if frac > T::zero() {
            lerp_into(
                &mut buf,
                trace.slices[full].point(0, t),
                trace.slices[full + 1].point(0, t),
                half * frac,
            );
            acc = acc + frac * du * quad(w, &buf);
        }
    }
    Ok(acc * trace.grid.cell_volume())
}

fn u_zero_integral<T: Scalar>(trace: &SolutionTrace<T>, w: &Matrix<T>, t_end: T) -> Result<T> {
    let first = trace
        .slices
        .first()
        .ok_or_else(|| Error::Range("empty trace".into()))?;
    let dx = trace.grid.dx();
    let mut buf = vec![T::zero(); trace.n_unknowns()];
    let mut acc = T::zero();
    for t in 0..trace.grid.n_transverse() {
        acc = acc + slice_line(first, t, dx, t_end, w, &mut buf)?;
    }
    Ok(acc * trace.grid.cell_volume())
}

/// `(∫_N q̂ᵀNu q̂, ∫_T ŵᵀŵ)` for `0 ≤ x ≤ T` and `0 ≤ u ≤ T` respectively.
pub fn data_norms<T: Scalar>(trace: &SolutionTrace<T>, canon: &CanonicalSystem<T>, t: T) -> Result<(T, T)> {
    if t < T::zero() || t > trace.grid.x_total {
        return Err(Error::Range(format!("T = {} outside [0, X_total]", t.as_f64())));
    }
    let n = trace.n_unknowns();
    let q = u_zero_integral(trace, &pad_nu(canon), t)?;
    let w = x_zero_integral(trace, &null_identity(n, canon.m), t)?;
    Ok((q, w))
}

/// `∫_{Σ_T} v̂ᵀ W v̂` for an arbitrary weight, on an already snapped level.
pub fn sigma_integral<T: Scalar>(trace: &SolutionTrace<T>, w: &Matrix<T>, level: &Level<T>) -> T {
    let du = trace.grid.du();
    let dx = trace.grid.dx();
    let n = trace.n_unknowns();
    let (mut a, mut b, mut mid) = (vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]);
    let half = T::lit(0.5);
    let mut acc = T::zero();
    for t in 0..trace.grid.n_transverse() {
        for k in 0..level.k {
            let xa = level.t - T::from_count(k) * du;
            let xb = level.t - T::from_count(k + 1) * du;
            sample_at(&trace.slices[k], t, xa, dx, &mut a);
            sample_at(&trace.slices[k + 1], t, xb.max(T::zero()), dx, &mut b);
            lerp_into(&mut mid, &a, &b, half);
            acc = acc + du * quad(w, &mid);
        }
    }
    acc * trace.grid.cell_volume()
}

/// `∫_{Σ_T} v̂ᵀ(C^u + C^x)v̂`. Returns the level used, which differs from `t`
/// when `t` is not a multiple of `du`.
pub fn sigma_norm<T: Scalar>(trace: &SolutionTrace<T>, cf: &CompactSystem<T>, t: T) -> Result<(T, Level<T>)> {
    let level = snap_level(trace, t)?;
    Ok((sigma_integral(trace, &cf.sigma_weight(), &level), level))
}

/// `∫_V v̂ᵀ R v̂` over `u, x ≥ 0, u + x ≤ T`: slice-wise line integrals
/// combined by the trapezoid rule in `u`.
fn volume_integral<T: Scalar>(trace: &SolutionTrace<T>, r: &Matrix<T>, level: &Level<T>) -> Result<T> {
    if r.max_abs() == T::zero() || level.k == 0 {
        return Ok(T::zero());
    }
    let du = trace.grid.du();
    let dx = trace.grid.dx();
    let mut buf = vec![T::zero(); trace.n_unknowns()];
    let mut lines = Vec::with_capacity(level.k + 1);
    for k in 0..=level.k {
        let len = (level.t - T::from_count(k) * du).max(T::zero());
        let mut acc = T::zero();
        for t in 0..trace.grid.n_transverse() {
            acc = acc + slice_line(&trace.slices[k], t, dx, len, r, &mut buf)?;
        }
        lines.push(acc);
    }
    let half = T::lit(0.5);
    let total = lines.windows(2).fold(T::zero(), |acc, p| acc + half * du * (p[0] + p[1]));
    Ok(total * trace.grid.cell_volume())
}

struct Balance<T> {
    level: Level<T>,
    sigma: T,
    q0: T,
    w0: T,
    residual: T,
}

fn balance<T: Scalar>(trace: &SolutionTrace<T>, cf: &CompactSystem<T>, t: T) -> Result<Balance<T>> {
    let level = snap_level(trace, t)?;
    let sigma = sigma_integral(trace, &cf.sigma_weight(), &level);
    let n_side = u_zero_integral(trace, &cf.c[0], level.t)?;
    let t_side = x_zero_integral(trace, &cf.c[1], level.t)?;
    let w0 = x_zero_integral(trace, &null_identity(cf.n_unknowns(), cf.m), level.t)?;
    let vol = volume_integral(trace, &cf.r.symmetric_part(), &level)?;
    Ok(Balance {
        level,
        sigma,
        q0: n_side,
        w0,
        residual: (sigma - n_side - t_side + vol).abs(),
    })
}

/// `|∫_Σ v(C^u+C^x)v − ∫_N vC^u v − ∫_T vC^x v + ∫_V vRv|`.
pub fn balance_residual<T: Scalar>(trace: &SolutionTrace<T>, cf: &CompactSystem<T>, t: T) -> Result<T> {
    Ok(balance(trace, cf, t)?.residual)
}

/// Checks `‖v‖²_T ≤ factor(T)(‖q₀‖² + ‖w₀‖²) + tol_h` on the marched trace.
pub fn verify_estimate<T: Scalar>(
    trace: &SolutionTrace<T>,
    cf: &CompactSystem<T>,
    report: &WellPosednessReport<T>,
    t: T,
    c_tol: T,
) -> Result<EnergyReport<T>> {
    if report.verdict != Verdict::WellPosed {
        return Err(Error::NotWellPosed("verify the estimate".into()));
    }
    let growth = GrowthParameters {
        r: report.r,
        c: report.c,
        t_max: report.t_max,
    };
    growth.check_horizon(t)?;
    let b = balance(trace, cf, t)?;
    growth.check_horizon(b.level.t)?;
    let data = b.q0 + b.w0;
    let bound = growth.factor(b.level.t) * data;
    let margin = bound - b.sigma;
    let tol_h = c_tol * trace.grid.dx() * data;
    Ok(EnergyReport {
        t: b.level.t,
        snapped_from: b.level.snapped_from,
        norm_q0_sq: b.q0,
        norm_w0_sq: b.w0,
        sigma_norm_sq: b.sigma,
        bound,
        margin,
        balance_residual: b.residual,
        tol_h,
        holds: margin >= -tol_h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::{compact_form, reduce};
    use crate::charsolve::{march, DataSpec, GridSpec, MarchOptions, Mode, Profile, TransverseGrid, VariableData};
    use crate::scalar::Tolerances;
    use crate::sysmodel::load_system;
    use crate::wellposed::check_criteria;
    use std::f64::consts::{PI, SQRT_2, TAU};

    const WAVE: &str = include_str!("../data/wave3d.sys");

    fn wave() -> CanonicalSystem<f64> {
        let (sys, chart) = load_system(WAVE).unwrap();
        reduce(&sys, &chart, &Tolerances::default()).unwrap().canonical
    }

    fn grid(nx: usize) -> GridSpec<f64> {
        GridSpec::new(2.0 * PI, nx, 1.0, vec![TransverseGrid::periodic(4); 2])
    }

    fn plane_wave() -> DataSpec<f64> {
        let mut d = DataSpec::zero(3, 1);
        d.w0[0] = VariableData::single(Mode::new(Profile::Sine { amp: SQRT_2, k: 1.0, phase: 0.0 }));
        d
    }

    #[test]
    fn zero_trace_gives_zero_everything() {
        let c = wave();
        let cf = compact_form(&c);
        let tr = march(&c, &grid(16), &DataSpec::zero(3, 1), MarchOptions::default()).unwrap();
        assert_eq!(data_norms(&tr, &c, PI).unwrap(), (0.0, 0.0));
        assert_eq!(sigma_norm(&tr, &cf, PI).unwrap().0, 0.0);
        assert_eq!(balance_residual(&tr, &cf, PI).unwrap(), 0.0);
        let rep = verify_estimate(&tr, &cf, &check_criteria(&cf, &Tolerances::default()), PI, 10.0).unwrap();
        assert_eq!(rep.margin, 0.0);
        assert!(rep.holds);
    }

    #[test]
    fn plane_wave_norms_approach_closed_form() {
        // ∫₀^π 2 sin²u du = π, times torus volume (2π)²
        let c = wave();
        let cf = compact_form(&c);
        let exact = TAU * TAU * PI;
        let mut errs = Vec::new();
        for nx in [32, 64, 128] {
            let tr = march(&c, &grid(nx), &plane_wave(), MarchOptions::default()).unwrap();
            let (q, w) = data_norms(&tr, &c, PI).unwrap();
            assert_eq!(q, 0.0);
            let (s, _) = sigma_norm(&tr, &cf, PI).unwrap();
            // ŵ is constant in x on each slice, so Σ_T sees the same samples as x = 0
            assert!((s - w).abs() < 1e-9 * w);
            errs.push((w - exact).abs());
            assert!(balance_residual(&tr, &cf, PI).unwrap() < 1e-9 * w);
        }
        assert!(errs[2] < errs[1] && errs[1] < errs[0]);
        assert!(errs[2] < 1e-3 * exact);
    }

    #[test]
    fn q0_norm_uses_nu_weight() {
        // q̂₂ = sin x with Nu₁₁ = 2: (2π)² · 2 ∫₀^π sin²x dx = (2π)² π
        let c = wave();
        let mut d = DataSpec::zero(3, 1);
        d.q0[0] = VariableData::single(Mode::new(Profile::Sine { amp: 1.0, k: 1.0, phase: 0.0 }));
        let tr = march(&c, &grid(256), &d, MarchOptions::default()).unwrap();
        let (q, _) = data_norms(&tr, &c, PI).unwrap();
        let exact = TAU * TAU * PI;
        assert!((q - exact).abs() < 1e-3 * exact, "{q} vs {exact}");
    }

    #[test]
    fn identity_weight_is_plain_sum_of_squares() {
        // With cfl = 1 every Σ_T sample is a node; the midpoint rule then
        // sums squared averages of consecutive diagonal nodes.
        let c = wave();
        let mut d = plane_wave();
        d.q0[1] = VariableData::single(Mode::new(Profile::Sine { amp: 0.5, k: 2.0, phase: 0.3 }).with_wavenumbers(&[1, 0]));
        let g = grid(16);
        let tr = march(&c, &g, &d, MarchOptions::default()).unwrap();
        let level = snap_level(&tr, 5.0 * g.dx()).unwrap();
        let got = sigma_integral(&tr, &Matrix::identity(4), &level);
        let mut expect = 0.0;
        for t in 0..g.n_transverse() {
            for k in 0..level.k {
                let a = tr.slices[k].point(level.k - k, t);
                let b = tr.slices[k + 1].point(level.k - k - 1, t);
                expect += a.iter().zip(b).map(|(x, y)| (0.5 * (x + y)).powi(2)).sum::<f64>();
            }
        }
        expect *= g.du() * g.cell_volume();
        assert!((got - expect).abs() < 1e-12 * expect.max(1.0));
    }

    #[test]
    fn constant_solution_measure() {
        // ∂_u q + ... with all-zero operators except the identities keeps
        // constants: Σ_T integral = κᵀWκ · T · torus volume
        let c = CanonicalSystem::from_blocks(
            vec!["u".into(), "x".into(), "y".into()],
            Matrix::from_diagonal(&[2.0]),
            Matrix::from_diagonal(&[0.0]),
            vec![Matrix::zeros(1, 2)],
            Matrix::zeros(1, 2),
            vec![Matrix::zeros(1, 2)],
            Matrix::zeros(1, 2),
        )
        .unwrap();
        let cf = compact_form(&c);
        let cst = |a: f64| VariableData::single(Mode::new(Profile::Sine { amp: a, k: 0.0, phase: PI / 2.0 }));
        let d = DataSpec { q0: vec![cst(0.5)], w0: vec![cst(3.0)] };
        let g = GridSpec::new(1.0, 20, 1.0, vec![TransverseGrid::periodic(3)]);
        let tr = march(&c, &g, &d, MarchOptions::default()).unwrap();
        let (s, level) = sigma_norm(&tr, &cf, 0.5).unwrap();
        let kappa = 2.0 * 0.25 + 9.0;
        assert!((s - kappa * level.t * TAU).abs() < 1e-12);
    }

    #[test]
    fn snapping_and_range() {
        let c = wave();
        let g = grid(16);
        let tr = march(&c, &g, &DataSpec::zero(3, 1), MarchOptions::default()).unwrap();
        let l = snap_level(&tr, 3.3 * g.dx()).unwrap();
        assert_eq!(l.k, 3);
        assert!(l.snapped_from.is_some());
        assert!(snap_level(&tr, 4.0 * g.dx()).unwrap().snapped_from.is_none());
        assert!(matches!(snap_level(&tr, 2.0 * PI), Err(Error::Range(_))));
        assert!(matches!(data_norms(&tr, &c, 7.0), Err(Error::Range(_))));
    }

    #[test]
    fn refuses_beyond_horizon_and_ill_posed() {
        let minus_i: Matrix<f64> = Matrix::identity(4).scale(-1.0);
        let c = wave().with_lower_order(minus_i.select_rows(&[0, 1, 2]), minus_i.select_rows(&[3])).unwrap();
        let cf = compact_form(&c);
        let rep = check_criteria(&cf, &Tolerances::default());
        assert!((rep.t_max.unwrap() - 0.5).abs() < 1e-12);
        let g = GridSpec::new(1.0, 16, 1.0, vec![TransverseGrid::periodic(4); 2]);
        let tr = march(&c, &g, &DataSpec::zero(3, 1), MarchOptions::default()).unwrap();
        assert!(matches!(
            verify_estimate(&tr, &cf, &rep, 0.5 + 1e-9, 10.0),
            Err(Error::BeyondHorizon { .. })
        ));
        let mut bad = rep.clone();
        bad.verdict = Verdict::NotWellPosed;
        assert!(matches!(verify_estimate(&tr, &cf, &bad, 0.25, 10.0), Err(Error::NotWellPosed(_))));
    }
}
