//! Hierarchical marching on the triangle `u ≥ 0, x ≥ 0, u + x ≤ X` with
//! periodic transverse directions.
//!
//! Each `u` slice is completed in two passes: the hypersurface equations are
//! integrated outward from `x = 0` to fill `ŵ` (Heun in `x`), then the
//! evolution equations advance `q̂` to the next slice (Lax-Friedrichs in `x`,
//! centred differences across the torus). The stencil needs `x_{j+1}`, so each
//! step drops the outermost cell and no outer boundary condition is required.

mod data;

pub use data::{parse_presets, DataSpec, Mode, Profile, VariableData};

use crate::canonical::{compact_form, CanonicalSystem};
use crate::error::{Error, Result};
use crate::matkit::{inverse, spectral_radius, Matrix};
use crate::scalar::{Scalar, Tolerances};
use crate::wellposed::{check_criteria, Verdict};

/// One periodic transverse direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransverseGrid<T> {
    pub period: T,
    pub cells: usize,
}

impl<T: Scalar> TransverseGrid<T> {
    pub fn periodic(cells: usize) -> Self {
        Self {
            period: T::TAU(),
            cells,
        }
    }

    pub fn spacing(&self) -> T {
        self.period / T::from_count(self.cells)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec<T> {
    /// The triangle is `u + x ≤ x_total`.
    pub x_total: T,
    /// Number of `x` cells on the initial slice.
    pub nx: usize,
    /// `du = cfl · dx`.
    pub cfl: T,
    pub transverse: Vec<TransverseGrid<T>>,
}

impl<T: Scalar> GridSpec<T> {
    pub fn new(x_total: T, nx: usize, cfl: T, transverse: Vec<TransverseGrid<T>>) -> Self {
        Self {
            x_total,
            nx,
            cfl,
            transverse,
        }
    }

    pub fn dx(&self) -> T {
        self.x_total / T::from_count(self.nx)
    }

    pub fn du(&self) -> T {
        self.cfl * self.dx()
    }

    /// Number of transverse grid points.
    pub fn n_transverse(&self) -> usize {
        self.transverse.iter().map(|t| t.cells).product()
    }

    /// Measure of one transverse cell (1 without transverse directions).
    pub fn cell_volume(&self) -> T {
        self.transverse.iter().fold(T::one(), |v, t| v * t.spacing())
    }

    /// Transverse coordinates of flat index `t` (first direction fastest).
    pub fn transverse_coords(&self, mut t: usize) -> Vec<T> {
        self.transverse
            .iter()
            .map(|g| {
                let i = t % g.cells;
                t /= g.cells;
                T::from_count(i) * g.spacing()
            })
            .collect()
    }

    fn validate(&self, canon: &CanonicalSystem<T>) -> Result<()> {
        if !(self.x_total > T::zero() && self.x_total.is_finite()) {
            return Err(Error::Config("X_total must be positive".into()));
        }
        if self.nx < 2 {
            return Err(Error::Config("nx must be at least 2".into()));
        }
        if !(self.cfl > T::zero() && self.cfl <= T::one()) {
            return Err(Error::Config("cfl must lie in (0, 1]".into()));
        }
        if self.transverse.len() != canon.transverse_dim() {
            return Err(Error::Config(format!(
                "{} transverse grid directions for {} transverse coordinates",
                self.transverse.len(),
                canon.transverse_dim()
            )));
        }
        for (i, g) in self.transverse.iter().enumerate() {
            if g.cells == 0 || g.period.is_nan() || g.period <= T::zero() {
                return Err(Error::Config(format!("transverse direction {i} needs cells ≥ 1 and a positive period")));
            }
            let coupled = canon.ni[i].max_abs() > T::zero() || canon.li[i].max_abs() > T::zero();
            if coupled && g.cells < 4 {
                return Err(Error::Config(format!(
                    "transverse direction {} ({}) needs at least 4 cells",
                    i,
                    canon.coord_names[i + 2]
                )));
            }
        }
        Ok(())
    }
}

/// Values of `v̂ = (q̂, ŵ)` on one `u = const` slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceState<T> {
    pub level: usize,
    pub u_level: T,
    /// Number of live `x` points (`x_j = j·dx`, `j < x_points`).
    pub x_points: usize,
    n_transverse: usize,
    n_unknowns: usize,
    /// Layout `[x][transverse][component]`.
    values: Vec<T>,
}

impl<T: Scalar> SliceState<T> {
    pub fn zeros(level: usize, u_level: T, x_points: usize, n_transverse: usize, n_unknowns: usize) -> Self {
        Self {
            level,
            u_level,
            x_points,
            n_transverse,
            n_unknowns,
            values: vec![T::zero(); x_points * n_transverse * n_unknowns],
        }
    }

    /// Live cells.
    pub fn x_extent(&self) -> usize {
        self.x_points - 1
    }

    pub fn n_transverse(&self) -> usize {
        self.n_transverse
    }

    pub fn n_unknowns(&self) -> usize {
        self.n_unknowns
    }

    fn offset(&self, j: usize, t: usize) -> usize {
        (j * self.n_transverse + t) * self.n_unknowns
    }

    /// `v̂` at `(x_j, t)`.
    pub fn point(&self, j: usize, t: usize) -> &[T] {
        let o = self.offset(j, t);
        &self.values[o..o + self.n_unknowns]
    }

    pub fn point_mut(&mut self, j: usize, t: usize) -> &mut [T] {
        let o = self.offset(j, t);
        &mut self.values[o..o + self.n_unknowns]
    }

    /// All transverse points of column `x_j`, layout `[transverse][component]`.
    pub fn column(&self, j: usize) -> &[T] {
        let w = self.n_transverse * self.n_unknowns;
        &self.values[j * w..(j + 1) * w]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|x| !x.is_finite()) {
            None => Ok(()),
            Some(idx) => {
                let k = idx % self.n_unknowns;
                let rest = idx / self.n_unknowns;
                Err(Error::NonFinite {
                    level: self.level,
                    x_index: rest / self.n_transverse,
                    t_index: rest % self.n_transverse,
                    component: k,
                })
            }
        }
    }
}

/// All slices of a march.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionTrace<T> {
    pub grid: GridSpec<T>,
    pub m: usize,
    pub slices: Vec<SliceState<T>>,
    /// Per-slice `max |v̂|`.
    pub max_abs: Vec<T>,
}

impl<T: Scalar> SolutionTrace<T> {
    pub fn n_unknowns(&self) -> usize {
        self.slices.first().map_or(0, SliceState::n_unknowns)
    }

    pub fn n_normal(&self) -> usize {
        self.n_unknowns() - self.m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MarchOptions {
    /// March even if the system is not certified well posed.
    pub force: bool,
}

/// Precomputed operators of the scheme for one canonical system and grid.
pub struct Stepper<'a, T> {
    canon: &'a CanonicalSystem<T>,
    grid: &'a GridSpec<T>,
    /// `Nu⁻¹ Nx`.
    speed: Matrix<T>,
    /// `Nu⁻¹ Ni`.
    evo_transverse: Vec<Matrix<T>>,
    /// `Nu⁻¹ N0`.
    evo_zero: Matrix<T>,
    /// Periodic neighbour tables per transverse direction: `(plus, minus)`.
    neighbours: Vec<(Vec<usize>, Vec<usize>)>,
    inv_two_h: Vec<T>,
}

impl<'a, T: Scalar> Stepper<'a, T> {
    /// Validates the grid, including `ρ(Nu⁻¹Nx) · cfl ≤ 1`.
    pub fn new(canon: &'a CanonicalSystem<T>, grid: &'a GridSpec<T>) -> Result<Self> {
        grid.validate(canon)?;
        let nu_inv = inverse(&canon.nu)?;
        let speed = &nu_inv * &canon.nx;
        let rho = spectral_radius(&speed)?;
        if rho * grid.cfl > T::one() + T::epsilon() * T::lit(64.0) {
            return Err(Error::Config(format!(
                "CFL violation: ρ(Nu⁻¹Nx)·cfl = {} > 1",
                (rho * grid.cfl).as_f64()
            )));
        }
        let nt = grid.n_transverse();
        let mut neighbours = Vec::new();
        let mut stride = 1;
        for g in &grid.transverse {
            let (plus, minus) = (0..nt)
                .map(|t| {
                    let i = (t / stride) % g.cells;
                    let base = t - i * stride;
                    (base + ((i + 1) % g.cells) * stride, base + ((i + g.cells - 1) % g.cells) * stride)
                })
                .unzip();
            neighbours.push((plus, minus));
            stride *= g.cells;
        }
        Ok(Self {
            canon,
            grid,
            evo_transverse: canon.ni.iter().map(|x| &nu_inv * x).collect(),
            evo_zero: &nu_inv * &canon.n0,
            speed,
            neighbours,
            inv_two_h: grid
                .transverse
                .iter()
                .map(|g| (T::lit(2.0) * g.spacing()).recip())
                .collect(),
        })
    }

    fn n(&self) -> usize {
        self.canon.n_unknowns
    }

    /// `out = Σ_i mats_i · δ_i v + zero · v` at transverse point `t` of a column.
    fn lower_terms(&self, column: &[T], t: usize, mats: &[Matrix<T>], zero: &Matrix<T>, out: &mut [T]) {
        let n = self.n();
        let v = &column[t * n..(t + 1) * n];
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = matkit_dot(zero.row(r), v);
            for (i, mat) in mats.iter().enumerate() {
                let (plus, minus) = (&self.neighbours[i].0, &self.neighbours[i].1);
                let vp = &column[plus[t] * n..(plus[t] + 1) * n];
                let vm = &column[minus[t] * n..(minus[t] + 1) * n];
                let row = mat.row(r);
                let mut d = T::zero();
                for k in 0..n {
                    d = d + row[k] * (vp[k] - vm[k]);
                }
                acc = acc + d * self.inv_two_h[i];
            }
            *o = acc;
        }
    }

    /// `∂_x ŵ = -(Σ_i Li ∂_i v̂ + L0 v̂)` over a whole column.
    fn hypersurface_rhs(&self, column: &[T], out: &mut [T]) {
        let m = self.canon.m;
        let mut tmp = vec![T::zero(); m];
        for t in 0..self.grid.n_transverse() {
            self.lower_terms(column, t, &self.canon.li, &self.canon.l0, &mut tmp);
            for (mu, x) in tmp.iter().enumerate() {
                out[t * m + mu] = -*x;
            }
        }
    }

    /// Fills `ŵ` on a slice whose `q̂` is known, integrating from
    /// `w_boundary` (layout `[transverse][null component]`) at `x = 0`.
    pub fn hypersurface_integrate(&self, slice: &SliceState<T>, w_boundary: &[T]) -> Result<SliceState<T>> {
        let (n, m, p) = (self.n(), self.canon.m, self.canon.n_normal());
        let nt = self.grid.n_transverse();
        if w_boundary.len() != nt * m {
            return Err(Error::Dimension(format!("w boundary has {} values, expected {}", w_boundary.len(), nt * m)));
        }
        if w_boundary.iter().any(|x| !x.is_finite()) {
            return Err(Error::Precondition("w boundary values must be finite".into()));
        }
        let dx = self.grid.dx();
        let half = T::lit(0.5);
        let mut out = slice.clone();
        for t in 0..nt {
            out.point_mut(0, t)[p..].copy_from_slice(&w_boundary[t * m..(t + 1) * m]);
        }
        let mut k1 = vec![T::zero(); nt * m];
        let mut k2 = vec![T::zero(); nt * m];
        let mut predictor = vec![T::zero(); nt * n];
        for j in 0..out.x_points - 1 {
            self.hypersurface_rhs(out.column(j), &mut k1);
            predictor.copy_from_slice(out.column(j + 1));
            for t in 0..nt {
                let w = &out.point(j, t)[p..];
                for mu in 0..m {
                    predictor[t * n + p + mu] = w[mu] + dx * k1[t * m + mu];
                }
            }
            self.hypersurface_rhs(&predictor, &mut k2);
            for t in 0..nt {
                for mu in 0..m {
                    let w = out.point(j, t)[p + mu];
                    out.point_mut(j + 1, t)[p + mu] = w + dx * half * (k1[t * m + mu] + k2[t * m + mu]);
                }
            }
        }
        out.check_finite()?;
        Ok(out)
    }

    /// Advances `q̂` one step in `u`; the result has one fewer `x` point and
    /// its `ŵ` entries are left at zero for the next hypersurface pass.
    pub fn evolution_step(&self, slice: &SliceState<T>) -> Result<SliceState<T>> {
        if slice.x_points < 2 {
            return Err(Error::Range("slice too narrow to advance".into()));
        }
        let (n, p) = (self.n(), self.canon.n_normal());
        let nt = self.grid.n_transverse();
        let du = self.grid.du();
        let lambda = du / self.grid.dx();
        let half = T::lit(0.5);
        let mut next = SliceState::zeros(slice.level + 1, slice.u_level + du, slice.x_points - 1, nt, n);
        let mut src = vec![T::zero(); p];
        for j in 0..next.x_points {
            let column = slice.column(j);
            for t in 0..nt {
                self.lower_terms(column, t, &self.evo_transverse, &self.evo_zero, &mut src);
                let q = &slice.point(j, t)[..p];
                let qp = &slice.point(j + 1, t)[..p];
                let out = &mut next.point_mut(j, t)[..p];
                if j == 0 {
                    // one-sided outflow difference at x = 0
                    for r in 0..p {
                        let flux: T = (0..p).map(|k| self.speed[(r, k)] * (qp[k] - q[k])).sum();
                        out[r] = q[r] - lambda * flux - du * src[r];
                    }
                } else {
                    let qm = &slice.point(j - 1, t)[..p];
                    for r in 0..p {
                        let flux: T = (0..p).map(|k| self.speed[(r, k)] * (qp[k] - qm[k])).sum();
                        out[r] = half * (qp[r] + qm[r]) - half * lambda * flux - du * src[r];
                    }
                }
            }
        }
        next.check_finite()?;
        Ok(next)
    }

    fn boundary_w(&self, data: &DataSpec<T>, u: T) -> Vec<T> {
        let nt = self.grid.n_transverse();
        let mut w = Vec::with_capacity(nt * self.canon.m);
        for t in 0..nt {
            let y = self.grid.transverse_coords(t);
            w.extend(data.w0.iter().map(|d| d.eval(u, &y)));
        }
        w
    }

    fn initial_slice(&self, data: &DataSpec<T>) -> SliceState<T> {
        let nt = self.grid.n_transverse();
        let p = self.canon.n_normal();
        let dx = self.grid.dx();
        let mut s = SliceState::zeros(0, T::zero(), self.grid.nx + 1, nt, self.n());
        for t in 0..nt {
            let y = self.grid.transverse_coords(t);
            for j in 0..=self.grid.nx {
                let x = T::from_count(j) * dx;
                let v = s.point_mut(j, t);
                for (k, d) in data.q0.iter().enumerate() {
                    v[k] = d.eval(x, &y);
                }
            }
        }
        debug_assert_eq!(data.q0.len(), p);
        s
    }
}

pub(crate) fn matkit_dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Solves the characteristic problem on the triangle, alternating
/// hypersurface integration and evolution steps until fewer than two live
/// cells remain.
pub fn march<T: Scalar>(
    canon: &CanonicalSystem<T>,
    grid: &GridSpec<T>,
    data: &DataSpec<T>,
    opts: MarchOptions,
) -> Result<SolutionTrace<T>> {
    if data.q0.len() != canon.n_normal() || data.w0.len() != canon.m {
        return Err(Error::Config(format!(
            "data for {} normal and {} null variables; system has {} and {}",
            data.q0.len(),
            data.w0.len(),
            canon.n_normal(),
            canon.m
        )));
    }
    if !opts.force {
        let report = check_criteria(&compact_form(canon), &Tolerances::default());
        if report.verdict != Verdict::WellPosed {
            return Err(Error::NotWellPosed("march".into()));
        }
    }
    let stepper = Stepper::new(canon, grid)?;
    let mut slice = stepper.initial_slice(data);
    slice.check_finite()?;
    let mut slices = Vec::with_capacity(grid.nx);
    loop {
        let wb = stepper.boundary_w(data, slice.u_level);
        slice = stepper.hypersurface_integrate(&slice, &wb)?;
        let done = slice.x_extent() < 2;
        let next = if done { None } else { Some(stepper.evolution_step(&slice)?) };
        slices.push(slice);
        match next {
            Some(s) => slice = s,
            None => break,
        }
    }
    let max_abs = slices.iter().map(SliceState::max_abs).collect();
    Ok(SolutionTrace {
        grid: grid.clone(),
        m: canon.m,
        slices,
        max_abs,
    })
}
