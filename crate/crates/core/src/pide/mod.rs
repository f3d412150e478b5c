//! Space–time grids, the value field `v(t, y, c)` and its interpolation.
//!
//! The ex-dividend price function is stored per time level and regime on a
//! 1- or 2-dimensional spatial grid. Queries interpolate linearly in time
//! and space; up to 10% of the axis span beyond the bounds they extrapolate
//! linearly, beyond that they either fail (`Strict`, grid-level operations)
//! or clamp to the band edge (`Clamped`, pathwise evaluation where throwing
//! away a whole Monte Carlo run over one stray path is not an option).

pub mod generator;
pub mod solver;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sim::TimeGrid;

pub use generator::apply_generator;
pub use solver::{solve_pide, PideOptions, SolveStats};

/// Fraction of the axis span allowed as linear extrapolation band.
pub const EXTRAPOLATION_BAND: f64 = 0.10;

/// One spatial axis: uniform nodes, optionally uniform in log scale.
#[derive(Debug, Clone)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub log: bool,
    nodes: Vec<f64>,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n_nodes: usize, log: bool) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidSpec("axis needs finite lo < hi".into()));
        }
        if n_nodes < 8 {
            return Err(Error::InvalidSpec("axis needs at least 8 nodes".into()));
        }
        if log && lo <= 0.0 {
            return Err(Error::InvalidSpec("log axis needs lo > 0".into()));
        }
        let nodes = if log {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n_nodes)
                .map(|i| (a + (b - a) * i as f64 / (n_nodes - 1) as f64).exp())
                .collect()
        } else {
            (0..n_nodes)
                .map(|i| lo + (hi - lo) * i as f64 / (n_nodes - 1) as f64)
                .collect()
        };
        Ok(Axis { lo, hi, log, nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    fn band(&self) -> f64 {
        EXTRAPOLATION_BAND * (self.hi - self.lo)
    }

    /// Cell index and interpolation weight for `x`; the weight is allowed
    /// outside `[0, 1]` inside the extrapolation band (that is what linear
    /// extrapolation from the edge cell is).
    fn locate(&self, x: f64, mode: QueryMode) -> Result<(usize, f64)> {
        let (lo_b, hi_b) = (self.lo - self.band(), self.hi + self.band());
        let x = match mode {
            QueryMode::Strict => {
                if x < lo_b || x > hi_b {
                    return Err(Error::DomainEscape {
                        axis: 0,
                        value: x,
                        lo: lo_b,
                        hi: hi_b,
                    });
                }
                x
            }
            QueryMode::Clamped => x.clamp(lo_b, hi_b),
            QueryMode::Unbounded => x,
        };
        let n = self.nodes.len();
        // uniform in the native coordinate (or its log)
        let cell = if self.log && x > 0.0 {
            let h = (self.hi.ln() - self.lo.ln()) / (n - 1) as f64;
            ((x.ln() - self.lo.ln()) / h).floor() as isize
        } else if self.log {
            -1
        } else {
            let h = (self.hi - self.lo) / (n - 1) as f64;
            ((x - self.lo) / h).floor() as isize
        };
        let i = cell.clamp(0, n as isize - 2) as usize;
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        Ok((i, (x - x0) / (x1 - x0)))
    }
}

/// Out-of-domain policy for field queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryMode {
    /// Error beyond the extrapolation band.
    Strict,
    /// Clamp to the band edge (pathwise evaluation).
    Clamped,
    /// No limit; linear continuation consistent with the boundary condition.
    /// Used internally by the solver's nonlocal terms.
    Unbounded,
}

/// Spatial grid of dimension 1 or 2.
#[derive(Debug, Clone)]
pub struct SpatialGrid {
    axes: Vec<Axis>,
}

impl SpatialGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::InvalidSpec(
                "spatial grid supports 1 or 2 axes".into(),
            ));
        }
        Ok(SpatialGrid { axes })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn n_nodes(&self) -> usize {
        self.axes.iter().map(|a| a.n_nodes()).product()
    }

    /// Flat index of a multi-index (row-major over axis 0).
    pub fn flat(&self, idx: &[usize]) -> usize {
        match self.axes.len() {
            1 => idx[0],
            _ => idx[0] + self.axes[0].n_nodes() * idx[1],
        }
    }

    pub fn coords(&self, flat: usize) -> Vec<f64> {
        match self.axes.len() {
            1 => vec![self.axes[0].nodes()[flat]],
            _ => {
                let nx = self.axes[0].n_nodes();
                vec![
                    self.axes[0].nodes()[flat % nx],
                    self.axes[1].nodes()[flat / nx],
                ]
            }
        }
    }

    /// Iterates all flat node indices.
    pub fn node_indices(&self) -> std::ops::Range<usize> {
        0..self.n_nodes()
    }
}

/// The ex-dividend price field `v(t_k, node, c)`, one sheet per regime.
#[derive(Debug, Clone)]
pub struct ValueField {
    pub grid: SpatialGrid,
    pub tgrid: TimeGrid,
    pub n_regimes: usize,
    pub scheme: String,
    data: Vec<f64>,
}

impl ValueField {
    pub fn zeros(grid: SpatialGrid, tgrid: TimeGrid, n_regimes: usize, scheme: &str) -> Self {
        let n = tgrid.n_nodes() * n_regimes * grid.n_nodes();
        ValueField {
            grid,
            tgrid,
            n_regimes,
            scheme: scheme.into(),
            data: vec![0.0; n],
        }
    }

    /// Builds a field by sampling `f(t, y, c)` at every node (tests, analytic
    /// references).
    pub fn from_function(
        grid: SpatialGrid,
        tgrid: TimeGrid,
        n_regimes: usize,
        f: impl Fn(f64, &[f64], usize) -> f64,
    ) -> Self {
        let mut field = Self::zeros(grid, tgrid, n_regimes, "sampled");
        for level in 0..field.tgrid.n_nodes() {
            let t = field.tgrid.node(level);
            for c in 1..=n_regimes {
                for node in field.grid.node_indices() {
                    let y = field.grid.coords(node);
                    let v = f(t, &y, c);
                    *field.at_mut(level, c, node) = v;
                }
            }
        }
        field
    }

    #[inline]
    fn idx(&self, level: usize, c: usize, node: usize) -> usize {
        (level * self.n_regimes + (c - 1)) * self.grid.n_nodes() + node
    }

    #[inline]
    pub fn at(&self, level: usize, c: usize, node: usize) -> f64 {
        self.data[self.idx(level, c, node)]
    }

    #[inline]
    pub fn at_mut(&mut self, level: usize, c: usize, node: usize) -> &mut f64 {
        let i = self.idx(level, c, node);
        &mut self.data[i]
    }

    /// One time level / regime slice.
    pub fn sheet(&self, level: usize, c: usize) -> &[f64] {
        let start = self.idx(level, c, 0);
        &self.data[start..start + self.grid.n_nodes()]
    }

    pub fn sheet_mut(&mut self, level: usize, c: usize) -> &mut [f64] {
        let start = self.idx(level, c, 0);
        let n = self.grid.n_nodes();
        &mut self.data[start..start + n]
    }

    fn time_bracket(&self, t: f64) -> (usize, f64) {
        let (t0, t1) = (self.tgrid.t0(), self.tgrid.t_end());
        let n = self.tgrid.n_steps();
        if t <= t0 {
            return (0, 0.0);
        }
        if t >= t1 {
            return (n - 1, 1.0);
        }
        let s = (t - t0) / (t1 - t0) * n as f64;
        let k = (s.floor() as usize).min(n - 1);
        (k, s - k as f64)
    }

    /// Spatial interpolation on one stored sheet.
    pub fn interp_sheet(&self, level: usize, c: usize, y: &[f64], mode: QueryMode) -> Result<f64> {
        let sheet = self.sheet(level, c);
        interp_on(&self.grid, sheet, y, mode)
    }

    /// Linear interpolation in time and space.
    pub fn value_at(&self, t: f64, y: &[f64], c: usize, mode: QueryMode) -> Result<f64> {
        let (k, w) = self.time_bracket(t);
        let v0 = self.interp_sheet(k, c, y, mode)?;
        if w == 0.0 {
            return Ok(v0);
        }
        let v1 = self.interp_sheet(k + 1, c, y, mode)?;
        Ok(v0 * (1.0 - w) + v1 * w)
    }

    /// Central-difference spatial gradient of the interpolant, step one cell.
    pub fn gradient_at(
        &self,
        t: f64,
        y: &[f64],
        c: usize,
        mode: QueryMode,
        out: &mut [f64],
    ) -> Result<()> {
        let mut yp = y.to_vec();
        let mut ym = y.to_vec();
        for (a, axis) in self.grid.axes().iter().enumerate() {
            let h = local_spacing(axis, y[a]);
            yp[a] = y[a] + h;
            ym[a] = y[a] - h;
            let vp = self.value_at(t, &yp, c, mode)?;
            let vm = self.value_at(t, &ym, c, mode)?;
            out[a] = (vp - vm) / (2.0 * h);
            yp[a] = y[a];
            ym[a] = y[a];
        }
        Ok(())
    }

    /// Central-difference Hessian of the interpolant.
    pub fn hessian_at(
        &self,
        t: f64,
        y: &[f64],
        c: usize,
        mode: QueryMode,
        out: &mut DMatrix<f64>,
    ) -> Result<()> {
        let dim = self.grid.dim();
        let v0 = self.value_at(t, y, c, mode)?;
        let mut probe = y.to_vec();
        for a in 0..dim {
            let ha = local_spacing(&self.grid.axes()[a], y[a]);
            probe[a] = y[a] + ha;
            let vp = self.value_at(t, &probe, c, mode)?;
            probe[a] = y[a] - ha;
            let vm = self.value_at(t, &probe, c, mode)?;
            probe[a] = y[a];
            out[(a, a)] = (vp - 2.0 * v0 + vm) / (ha * ha);
            for b in (a + 1)..dim {
                let hb = local_spacing(&self.grid.axes()[b], y[b]);
                let mut corner = |sa: f64, sb: f64| -> Result<f64> {
                    probe[a] = y[a] + sa * ha;
                    probe[b] = y[b] + sb * hb;
                    let v = self.value_at(t, &probe, c, mode);
                    probe[a] = y[a];
                    probe[b] = y[b];
                    v
                };
                let v = (corner(1.0, 1.0)? - corner(1.0, -1.0)? - corner(-1.0, 1.0)?
                    + corner(-1.0, -1.0)?)
                    / (4.0 * ha * hb);
                out[(a, b)] = v;
                out[(b, a)] = v;
            }
        }
        Ok(())
    }
}

/// Interpolation step used for finite differences at `x`: the local cell
/// width (nonuniform on log axes).
pub(crate) fn local_spacing(axis: &Axis, x: f64) -> f64 {
    let (i, _) = axis
        .locate(x, QueryMode::Clamped)
        .expect("clamped locate cannot fail");
    axis.nodes()[i + 1] - axis.nodes()[i]
}

/// Multilinear interpolation of `values` (flat layout of `grid`) at `y`.
pub fn interp_on(grid: &SpatialGrid, values: &[f64], y: &[f64], mode: QueryMode) -> Result<f64> {
    match grid.dim() {
        1 => {
            let (i, w) = grid.axes()[0].locate(y[0], mode)?;
            Ok(values[i] * (1.0 - w) + values[i + 1] * w)
        }
        _ => {
            let (i, wx) = grid.axes()[0].locate(y[0], mode)?;
            let (j, wy) = grid.axes()[1].locate(y[1], mode)?;
            let nx = grid.axes()[0].n_nodes();
            let v00 = values[i + nx * j];
            let v10 = values[i + 1 + nx * j];
            let v01 = values[i + nx * (j + 1)];
            let v11 = values[i + 1 + nx * (j + 1)];
            Ok(v00 * (1.0 - wx) * (1.0 - wy)
                + v10 * wx * (1.0 - wy)
                + v01 * (1.0 - wx) * wy
                + v11 * wx * wy)
        }
    }
}

/// A twice-differentiable value function `v(t, y, c)`: either a solved grid
/// field or an analytic reference.
pub trait ValueFunction: Send + Sync {
    fn value(&self, t: f64, y: &[f64], c: usize) -> Result<f64>;
    fn gradient(&self, t: f64, y: &[f64], c: usize, out: &mut [f64]) -> Result<()>;
    fn hessian(&self, t: f64, y: &[f64], c: usize, out: &mut DMatrix<f64>) -> Result<()>;
}

impl ValueFunction for ValueField {
    fn value(&self, t: f64, y: &[f64], c: usize) -> Result<f64> {
        self.value_at(t, y, c, QueryMode::Strict)
    }
    fn gradient(&self, t: f64, y: &[f64], c: usize, out: &mut [f64]) -> Result<()> {
        self.gradient_at(t, y, c, QueryMode::Strict, out)
    }
    fn hessian(&self, t: f64, y: &[f64], c: usize, out: &mut DMatrix<f64>) -> Result<()> {
        self.hessian_at(t, y, c, QueryMode::Strict, out)
    }
}

/// Analytic value function given by closures (test fixtures, closed forms).
#[allow(clippy::type_complexity)]
pub struct ClosureValueFunction {
    pub value: Box<dyn Fn(f64, &[f64], usize) -> f64 + Send + Sync>,
    pub gradient: Box<dyn Fn(f64, &[f64], usize, &mut [f64]) + Send + Sync>,
    pub hessian: Box<dyn Fn(f64, &[f64], usize, &mut DMatrix<f64>) + Send + Sync>,
}

impl ClosureValueFunction {
    pub fn constant(v: f64) -> Self {
        ClosureValueFunction {
            value: Box::new(move |_, _, _| v),
            gradient: Box::new(|_, _, _, out| out.fill(0.0)),
            hessian: Box::new(|_, _, _, out| out.fill(0.0)),
        }
    }
}

impl ValueFunction for ClosureValueFunction {
    fn value(&self, t: f64, y: &[f64], c: usize) -> Result<f64> {
        Ok((self.value)(t, y, c))
    }
    fn gradient(&self, t: f64, y: &[f64], c: usize, out: &mut [f64]) -> Result<()> {
        (self.gradient)(t, y, c, out);
        Ok(())
    }
    fn hessian(&self, t: f64, y: &[f64], c: usize, out: &mut DMatrix<f64>) -> Result<()> {
        (self.hessian)(t, y, c, out);
        Ok(())
    }
}

/// Public field interpolation: exact at nodes, linear in between, linear
/// extrapolation inside the band, `DomainEscape` beyond.
pub fn field_interpolate(field: &ValueField, t: f64, y: &[f64], c: usize) -> Result<f64> {
    field.value_at(t, y, c, QueryMode::Strict)
}

// --- CSV export / import ---------------------------------------------------

/// Writes `t,y...,c,v` rows with a metadata header.
pub fn write_field_csv<W: std::io::Write>(field: &ValueField, out: &mut W) -> Result<()> {
    writeln!(
        out,
        "# scheme={} regimes={} dt={}",
        field.scheme,
        field.n_regimes,
        field.tgrid.dt()
    )?;
    for (a, axis) in field.grid.axes().iter().enumerate() {
        writeln!(
            out,
            "# axis{}: lo={} hi={} nodes={} log={}",
            a + 1,
            axis.lo,
            axis.hi,
            axis.n_nodes(),
            axis.log
        )?;
    }
    write!(out, "t")?;
    for a in 1..=field.grid.dim() {
        write!(out, ",y{a}")?;
    }
    writeln!(out, ",c,v")?;
    for level in 0..field.tgrid.n_nodes() {
        let t = field.tgrid.node(level);
        for c in 1..=field.n_regimes {
            for node in field.grid.node_indices() {
                write!(out, "{t}")?;
                for coord in field.grid.coords(node) {
                    write!(out, ",{coord}")?;
                }
                writeln!(out, ",{c},{}", field.at(level, c, node))?;
            }
        }
    }
    Ok(())
}

/// Reads a field written by [`write_field_csv`].
pub fn read_field_csv<R: std::io::BufRead>(input: R) -> Result<ValueField> {
    let mut scheme = String::from("imported");
    let mut n_regimes = 0usize;
    let mut dt = 0.0f64;
    let mut axes: Vec<Axis> = Vec::new();
    let mut rows: Vec<(f64, Vec<f64>, usize, f64)> = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.starts_with('#') {
            if let Some(rest) = line.strip_prefix("# scheme=") {
                let mut parts = rest.split_whitespace();
                scheme = parts.next().unwrap_or("imported").to_string();
                for p in parts {
                    if let Some(v) = p.strip_prefix("regimes=") {
                        n_regimes = v.parse().map_err(bad_csv)?;
                    } else if let Some(v) = p.strip_prefix("dt=") {
                        dt = v.parse().map_err(bad_csv)?;
                    }
                }
            } else if line.starts_with("# axis") {
                let mut lo = 0.0;
                let mut hi = 1.0;
                let mut nodes = 0usize;
                let mut log = false;
                for p in line.split_whitespace() {
                    if let Some(v) = p.strip_prefix("lo=") {
                        lo = v.parse().map_err(bad_csv)?;
                    } else if let Some(v) = p.strip_prefix("hi=") {
                        hi = v.parse().map_err(bad_csv)?;
                    } else if let Some(v) = p.strip_prefix("nodes=") {
                        nodes = v.parse().map_err(bad_csv)?;
                    } else if let Some(v) = p.strip_prefix("log=") {
                        log = v.parse().map_err(bad_csv)?;
                    }
                }
                axes.push(Axis::new(lo, hi, nodes, log)?);
            }
            continue;
        }
        if line.starts_with('t') || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            return Err(Error::InvalidSpec(format!("bad field csv row: {line}")));
        }
        let t: f64 = fields[0].parse().map_err(bad_csv)?;
        let dim = fields.len() - 3;
        let mut y = Vec::with_capacity(dim);
        for f in &fields[1..1 + dim] {
            y.push(f.parse().map_err(bad_csv)?);
        }
        let c: usize = fields[1 + dim].parse().map_err(bad_csv)?;
        let v: f64 = fields[2 + dim].parse().map_err(bad_csv)?;
        rows.push((t, y, c, v));
    }
    if axes.is_empty() || n_regimes == 0 || rows.is_empty() {
        return Err(Error::InvalidSpec("field csv missing metadata or rows".into()));
    }
    let grid = SpatialGrid::new(axes)?;
    let t_min = rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let t_max = rows.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let n_levels = rows.len() / (n_regimes * grid.n_nodes());
    let tgrid = TimeGrid::new(t_min, t_max, n_levels - 1)?;
    if (tgrid.dt() - dt).abs() > 1e-9 * dt.abs().max(1.0) {
        return Err(Error::InvalidSpec("field csv dt mismatch".into()));
    }
    let mut field = ValueField::zeros(grid, tgrid, n_regimes, &scheme);
    let mut row_iter = rows.into_iter();
    for level in 0..field.tgrid.n_nodes() {
        for c in 1..=n_regimes {
            for node in 0..field.grid.n_nodes() {
                let (_, _, _, v) = row_iter.next().ok_or_else(|| {
                    Error::InvalidSpec("field csv truncated".into())
                })?;
                *field.at_mut(level, c, node) = v;
            }
        }
    }
    Ok(field)
}

fn bad_csv<E: std::fmt::Display>(e: E) -> Error {
    Error::InvalidSpec(format!("bad field csv value: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid_1d(lo: f64, hi: f64, n: usize) -> SpatialGrid {
        SpatialGrid::new(vec![Axis::new(lo, hi, n, false).unwrap()]).unwrap()
    }

    #[test]
    fn exact_at_nodes() {
        let grid = grid_1d(0.0, 10.0, 11);
        let tg = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let f = ValueField::from_function(grid, tg, 2, |t, y, c| t + y[0] * c as f64);
        for level in 0..5 {
            let t = f.tgrid.node(level);
            for node in 0..11 {
                let y = f.grid.coords(node);
                for c in 1..=2 {
                    assert_eq!(
                        f.value_at(t, &y, c, QueryMode::Strict).unwrap(),
                        f.at(level, c, node)
                    );
                }
            }
        }
    }

    #[test]
    fn linear_fields_reproduce_exactly_including_band() {
        let grid = grid_1d(0.0, 10.0, 21);
        let tg = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let f = ValueField::from_function(grid, tg, 1, |_, y, _| 3.0 + 2.5 * y[0]);
        for &x in &[0.37, 5.5, 9.99, -0.5, 10.9] {
            assert_relative_eq!(
                f.value_at(0.3, &[x], 1, QueryMode::Strict).unwrap(),
                3.0 + 2.5 * x,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn domain_escape_beyond_band() {
        let grid = grid_1d(0.0, 10.0, 21);
        let tg = TimeGrid::new(0.0, 1.0, 2).unwrap();
        let f = ValueField::from_function(grid, tg, 1, |_, y, _| y[0]);
        // band is 1.0 here
        assert!(f.value_at(0.0, &[11.01], 1, QueryMode::Strict).is_err());
        assert!(f.value_at(0.0, &[-1.01], 1, QueryMode::Strict).is_err());
        // clamped mode saturates instead
        let v = f.value_at(0.0, &[50.0], 1, QueryMode::Clamped).unwrap();
        assert_relative_eq!(v, 11.0, max_relative = 1e-12);
    }

    #[test]
    fn quartic_interpolation_error_is_second_order() {
        // refinement ratio of the max interpolation error ~ 4 for smooth data
        let tg = TimeGrid::new(0.0, 1.0, 1).unwrap();
        let f4 = |x: f64| (x / 3.0).powi(4) + x;
        let err = |n: usize| -> f64 {
            let g = grid_1d(0.0, 3.0, n + 1);
            let f = ValueField::from_function(g, tg, 1, |_, y, _| f4(y[0]));
            let mut worst = 0.0f64;
            for k in 0..300 {
                let x = 0.005 + 3.0 * k as f64 / 300.0;
                if x >= 3.0 {
                    break;
                }
                let e = (f.value_at(0.0, &[x], 1, QueryMode::Strict).unwrap() - f4(x)).abs();
                worst = worst.max(e);
            }
            worst
        };
        let (e1, e2) = (err(30), err(60));
        let ratio = e1 / e2;
        assert!(
            (3.0..5.0).contains(&ratio),
            "refinement ratio {ratio} not ~ 4 (e1 = {e1:.3e}, e2 = {e2:.3e})"
        );
    }

    #[test]
    fn two_dimensional_interpolation() {
        let grid = SpatialGrid::new(vec![
            Axis::new(0.0, 4.0, 9, false).unwrap(),
            Axis::new(-1.0, 1.0, 9, false).unwrap(),
        ])
        .unwrap();
        let tg = TimeGrid::new(0.0, 1.0, 1).unwrap();
        let f = ValueField::from_function(grid, tg, 1, |_, y, _| 1.0 + 2.0 * y[0] - 3.0 * y[1]);
        for &(x, r) in &[(0.3, -0.7), (3.9, 0.99), (2.0, 0.0)] {
            assert_relative_eq!(
                f.value_at(0.5, &[x, r], 1, QueryMode::Strict).unwrap(),
                1.0 + 2.0 * x - 3.0 * r,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn gradient_and_hessian_of_quadratic() {
        let grid = SpatialGrid::new(vec![
            Axis::new(0.0, 4.0, 41, false).unwrap(),
            Axis::new(-1.0, 1.0, 41, false).unwrap(),
        ])
        .unwrap();
        let tg = TimeGrid::new(0.0, 1.0, 1).unwrap();
        let f = ValueField::from_function(grid, tg, 1, |_, y, _| {
            y[0] * y[0] + 0.5 * y[0] * y[1] - y[1] * y[1]
        });
        let y = [2.0, 0.0];
        let mut g = [0.0, 0.0];
        f.gradient(0.0, &y, 1, &mut g).unwrap();
        assert_relative_eq!(g[0], 2.0 * y[0] + 0.5 * y[1], max_relative = 1e-6);
        assert_relative_eq!(g[1], 0.5 * y[0] - 2.0 * y[1], max_relative = 1e-6);
        let mut h = DMatrix::zeros(2, 2);
        f.hessian(0.0, &y, 1, &mut h).unwrap();
        assert_relative_eq!(h[(0, 0)], 2.0, max_relative = 1e-6);
        assert_relative_eq!(h[(0, 1)], 0.5, max_relative = 1e-6);
        assert_relative_eq!(h[(1, 1)], -2.0, max_relative = 1e-6);
    }

    #[test]
    fn csv_round_trip() {
        let grid = grid_1d(0.0, 10.0, 11);
        let tg = TimeGrid::new(0.0, 1.0, 3).unwrap();
        let f = ValueField::from_function(grid, tg, 2, |t, y, c| t * y[0] + c as f64);
        let mut buf = Vec::new();
        write_field_csv(&f, &mut buf).unwrap();
        let g = read_field_csv(std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(g.n_regimes, 2);
        for level in 0..4 {
            for c in 1..=2 {
                for node in 0..11 {
                    assert_eq!(f.at(level, c, node), g.at(level, c, node));
                }
            }
        }
    }
}
