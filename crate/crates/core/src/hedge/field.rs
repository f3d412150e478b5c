//! The hedge field: the risk-minimizing strategy `(φ, η)` on the grid,
//! with solver metadata and the mismatch fields that feed the residual-risk
//! estimators.
//!
//! Per node the assembly produces, besides `φ` and `η`,
//!
//! - `m_W = (∇v σ_Y) - φᵀ σ_S` (Wiener mismatch, one entry per driver),
//! - `∫ (Δ_F v - φᵀ F_S)² ν` and `∫ (Δ_F v - φᵀ F_S) ν` (jump mismatch
//!   square and compensator, with `Δ_F v = v(z + F_Y(x), i) - v(z, i)`),
//! - `Δ^{i,j} v + δ^{i,j} - φᵀ ρ_S^{i,j}` per target regime.
//!
//! All are free of bank-account factors; pathwise consumers divide by the
//! realized `B`. Nodes whose jump or switch shifts escape the value field's
//! extrapolation band are marked invalid (NaN) and excluded from the valid
//! query box.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::sync::Arc;

use super::solve::min_norm_solve;
use crate::error::{Error, Result};
use crate::model::{DividendSpec, MarketModel};
use crate::pide::{QueryMode, SpatialGrid, ValueField};
use crate::sim::TimeGrid;

/// Holdings override `(t, y, c, out)` used by [`PhiMode::Custom`].
pub type PhiOverride = Arc<dyn Fn(f64, &[f64], usize, &mut [f64]) + Send + Sync>;

/// How the strategy component is chosen at each node.
#[derive(Clone)]
pub enum PhiMode {
    /// Minimum-norm solution of `G φ = A`.
    RiskMinimizing,
    /// Externally supplied strategy (perturbation studies); the linear
    /// system is still assembled so mismatches and residuals refer to it.
    Custom(PhiOverride),
}

#[derive(Clone)]
pub struct HedgeOptions {
    /// Use every `time_stride`-th value-field level (must divide the level
    /// step count).
    pub time_stride: usize,
    pub phi_mode: PhiMode,
}

impl Default for HedgeOptions {
    fn default() -> Self {
        HedgeOptions {
            time_stride: 1,
            phi_mode: PhiMode::RiskMinimizing,
        }
    }
}

/// Strategy and mismatch fields on the space–time grid.
pub struct HedgeField {
    pub grid: SpatialGrid,
    pub tgrid: TimeGrid,
    pub n_regimes: usize,
    pub d: usize,
    pub r_w: usize,
    phi: Vec<f64>,
    eta_unit: Vec<f64>,
    residual: Vec<f64>,
    rank: Vec<u8>,
    valid: Vec<bool>,
    m_w: Vec<f64>,
    m_jump_sq: Vec<f64>,
    m_jump_comp: Vec<f64>,
    m_trans: Vec<f64>,
    /// Per-axis inclusive node index range inside which every node (all
    /// levels/regimes) is valid.
    valid_box: Vec<(usize, usize)>,
    pub n_escaped: usize,
}

impl HedgeField {
    #[inline]
    fn node_index(&self, level: usize, c: usize, node: usize) -> usize {
        (level * self.n_regimes + (c - 1)) * self.grid.n_nodes() + node
    }

    pub fn is_valid(&self, level: usize, c: usize, node: usize) -> bool {
        self.valid[self.node_index(level, c, node)]
    }

    pub fn phi_node(&self, level: usize, c: usize, node: usize) -> &[f64] {
        let i = self.node_index(level, c, node) * self.d;
        &self.phi[i..i + self.d]
    }

    pub fn eta_unit_node(&self, level: usize, c: usize, node: usize) -> f64 {
        self.eta_unit[self.node_index(level, c, node)]
    }

    pub fn residual_node(&self, level: usize, c: usize, node: usize) -> f64 {
        self.residual[self.node_index(level, c, node)]
    }

    pub fn rank_node(&self, level: usize, c: usize, node: usize) -> usize {
        self.rank[self.node_index(level, c, node)] as usize
    }

    /// Per-axis node index range on which all entries are valid.
    pub fn valid_box(&self) -> &[(usize, usize)] {
        &self.valid_box
    }

    fn clamp_to_valid(&self, y: &[f64]) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (a, axis) in self.grid.axes().iter().enumerate() {
            let (lo, hi) = self.valid_box[a];
            out[a] = y[a].clamp(axis.nodes()[lo], axis.nodes()[hi]);
        }
        out
    }

    fn interp_quantity(&self, data: &[f64], comps: usize, comp: usize, t: f64, y: &[f64], c: usize) -> f64 {
        let yc = self.clamp_to_valid(y);
        let yc = &yc[..self.grid.dim()];
        let (k, w) = time_bracket(&self.tgrid, t);
        let v0 = self.interp_sheet_quantity(data, comps, comp, k, c, yc);
        if w == 0.0 {
            return v0;
        }
        let v1 = self.interp_sheet_quantity(data, comps, comp, k + 1, c, yc);
        v0 * (1.0 - w) + v1 * w
    }

    fn interp_sheet_quantity(
        &self,
        data: &[f64],
        comps: usize,
        comp: usize,
        level: usize,
        c: usize,
        y: &[f64],
    ) -> f64 {
        let base = (level * self.n_regimes + (c - 1)) * self.grid.n_nodes();
        let get = |node: usize| data[(base + node) * comps + comp];
        match self.grid.dim() {
            1 => {
                let (i, w) = locate_clamped(&self.grid, 0, y[0]);
                get(i) * (1.0 - w) + get(i + 1) * w
            }
            _ => {
                let (i, wx) = locate_clamped(&self.grid, 0, y[0]);
                let (j, wy) = locate_clamped(&self.grid, 1, y[1]);
                let nx = self.grid.axes()[0].n_nodes();
                get(i + nx * j) * (1.0 - wx) * (1.0 - wy)
                    + get(i + 1 + nx * j) * wx * (1.0 - wy)
                    + get(i + nx * (j + 1)) * (1.0 - wx) * wy
                    + get(i + 1 + nx * (j + 1)) * wx * wy
            }
        }
    }

    /// Strategy at `(t, y, c)` by clamped interpolation.
    pub fn phi_at(&self, t: f64, y: &[f64], c: usize, out: &mut [f64]) {
        for k in 0..self.d {
            out[k] = self.interp_quantity(&self.phi, self.d, k, t, y, c);
        }
    }

    /// Wiener mismatch component `w` at `(t, y, c)`.
    pub fn wiener_mismatch_at(&self, t: f64, y: &[f64], c: usize, w: usize) -> f64 {
        self.interp_quantity(&self.m_w, self.r_w, w, t, y, c)
    }

    /// `∫ (Δ_F v - φᵀF_S)² ν` at `(t, y, c)`.
    pub fn jump_mismatch_sq_at(&self, t: f64, y: &[f64], c: usize) -> f64 {
        self.interp_quantity(&self.m_jump_sq, 1, 0, t, y, c)
    }

    /// `∫ (Δ_F v - φᵀF_S) ν` at `(t, y, c)`.
    pub fn jump_mismatch_comp_at(&self, t: f64, y: &[f64], c: usize) -> f64 {
        self.interp_quantity(&self.m_jump_comp, 1, 0, t, y, c)
    }

    /// Transition mismatch toward regime `j` at `(t, y, c)`, `j != c`.
    pub fn transition_mismatch_at(&self, t: f64, y: &[f64], c: usize, j: usize) -> f64 {
        let slot = if j < c { j - 1 } else { j - 2 };
        self.interp_quantity(&self.m_trans, self.n_regimes - 1, slot, t, y, c)
    }
}

fn time_bracket(tg: &TimeGrid, t: f64) -> (usize, f64) {
    let n = tg.n_steps();
    if t <= tg.t0() {
        return (0, 0.0);
    }
    if t >= tg.t_end() {
        return (n - 1, 1.0);
    }
    let s = (t - tg.t0()) / (tg.t_end() - tg.t0()) * n as f64;
    let k = (s.floor() as usize).min(n - 1);
    (k, s - k as f64)
}

fn locate_clamped(grid: &SpatialGrid, axis: usize, x: f64) -> (usize, f64) {
    let ax = &grid.axes()[axis];
    let nodes = ax.nodes();
    let n = nodes.len();
    if x <= nodes[0] {
        return (0, 0.0);
    }
    if x >= nodes[n - 1] {
        return (n - 2, 1.0);
    }
    // uniform in native or log coordinate
    let (i, w) = if ax.log {
        let h = (ax.hi.ln() - ax.lo.ln()) / (n - 1) as f64;
        let s = (x.ln() - ax.lo.ln()) / h;
        let i = (s.floor() as usize).min(n - 2);
        (i, ((x - nodes[i]) / (nodes[i + 1] - nodes[i])).clamp(0.0, 1.0))
    } else {
        let h = (ax.hi - ax.lo) / (n - 1) as f64;
        let s = (x - ax.lo) / h;
        let i = (s.floor() as usize).min(n - 2);
        (i, ((x - nodes[i]) / (nodes[i + 1] - nodes[i])).clamp(0.0, 1.0))
    };
    (i, w)
}

struct LevelBlock {
    phi: Vec<f64>,
    eta_unit: Vec<f64>,
    residual: Vec<f64>,
    rank: Vec<u8>,
    valid: Vec<bool>,
    m_w: Vec<f64>,
    m_jump_sq: Vec<f64>,
    m_jump_comp: Vec<f64>,
    m_trans: Vec<f64>,
    escaped: usize,
}

/// Computes the strategy and mismatch fields on every grid node of the
/// solved value field.
pub fn hedge_field(
    model: &MarketModel,
    dividend: &DividendSpec,
    vf: &ValueField,
    opts: &HedgeOptions,
) -> Result<HedgeField> {
    let stride = opts.time_stride.max(1);
    if !vf.tgrid.n_steps().is_multiple_of(stride) {
        return Err(Error::InvalidSpec(format!(
            "time stride {stride} does not divide {} value-field steps",
            vf.tgrid.n_steps()
        )));
    }
    if vf.n_regimes != model.regimes.count() || vf.grid.dim() != model.dims.state() {
        return Err(Error::InvalidSpec(
            "value field shape does not match the model".into(),
        ));
    }
    let n_levels = vf.tgrid.n_steps() / stride + 1;
    let tgrid = TimeGrid::new(vf.tgrid.t0(), vf.tgrid.t_end(), n_levels - 1)?;
    let k_regimes = model.regimes.count();
    let n_nodes = vf.grid.n_nodes();
    let d = model.dims.assets;
    let r_w = model.dims.wiener;
    let node_coords: Vec<Vec<f64>> = (0..n_nodes).map(|n| vf.grid.coords(n)).collect();

    let blocks: Vec<LevelBlock> = (0..n_levels)
        .into_par_iter()
        .map(|hl| {
            assemble_level(
                model,
                dividend,
                vf,
                hl,
                hl * stride,
                n_levels,
                &node_coords,
                &opts.phi_mode,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let per = k_regimes * n_nodes;
    let mut field = HedgeField {
        grid: vf.grid.clone(),
        tgrid,
        n_regimes: k_regimes,
        d,
        r_w,
        phi: Vec::with_capacity(n_levels * per * d),
        eta_unit: Vec::with_capacity(n_levels * per),
        residual: Vec::with_capacity(n_levels * per),
        rank: Vec::with_capacity(n_levels * per),
        valid: Vec::with_capacity(n_levels * per),
        m_w: Vec::with_capacity(n_levels * per * r_w),
        m_jump_sq: Vec::with_capacity(n_levels * per),
        m_jump_comp: Vec::with_capacity(n_levels * per),
        m_trans: Vec::with_capacity(n_levels * per * (k_regimes - 1).max(1)),
        valid_box: Vec::new(),
        n_escaped: 0,
    };
    for b in blocks {
        field.phi.extend_from_slice(&b.phi);
        field.eta_unit.extend_from_slice(&b.eta_unit);
        field.residual.extend_from_slice(&b.residual);
        field.rank.extend_from_slice(&b.rank);
        field.valid.extend_from_slice(&b.valid);
        field.m_w.extend_from_slice(&b.m_w);
        field.m_jump_sq.extend_from_slice(&b.m_jump_sq);
        field.m_jump_comp.extend_from_slice(&b.m_jump_comp);
        field.m_trans.extend_from_slice(&b.m_trans);
        field.n_escaped += b.escaped;
    }

    field.valid_box = compute_valid_box(&field);
    Ok(field)
}

#[allow(clippy::too_many_arguments)]
fn assemble_level(
    model: &MarketModel,
    dividend: &DividendSpec,
    vf: &ValueField,
    hedge_level: usize,
    vf_level: usize,
    n_levels: usize,
    node_coords: &[Vec<f64>],
    phi_mode: &PhiMode,
) -> Result<LevelBlock> {
    let k_regimes = model.regimes.count();
    let n_nodes = vf.grid.n_nodes();
    let d = model.dims.assets;
    let p = model.dims.factors;
    let dim = model.dims.state();
    let r_w = model.dims.wiener;
    let n_slots = (k_regimes - 1).max(1);
    let t = vf.tgrid.node(vf_level);
    let is_terminal = hedge_level == n_levels - 1;

    let per = k_regimes * n_nodes;
    let mut block = LevelBlock {
        phi: vec![f64::NAN; per * d],
        eta_unit: vec![f64::NAN; per],
        residual: vec![f64::NAN; per],
        rank: vec![0; per],
        valid: vec![false; per],
        m_w: vec![f64::NAN; per * r_w],
        m_jump_sq: vec![f64::NAN; per],
        m_jump_comp: vec![f64::NAN; per],
        m_trans: vec![f64::NAN; per * n_slots],
        escaped: 0,
    };

    let mut grad = vec![0.0; dim];
    let mut fbuf = vec![0.0; dim];
    let mut shifted = vec![0.0; dim];
    let mut probe = vec![0.0; dim];
    let mut kappa_s = vec![0.0; dim];

    for c in 1..=k_regimes {
        for node in 0..n_nodes {
            let slot = (c - 1) * n_nodes + node;
            let z = &node_coords[node];
            let v0 = vf.at(vf_level, c, node);

            // gradient of the sheet interpolant (central differences)
            let mut escaped = false;
            for a in 0..dim {
                let h = crate::pide::local_spacing(&vf.grid.axes()[a], z[a]);
                probe.copy_from_slice(z);
                probe[a] = z[a] + h;
                let vp = vf.interp_sheet(vf_level, c, &probe, QueryMode::Strict);
                probe[a] = z[a] - h;
                let vm = vf.interp_sheet(vf_level, c, &probe, QueryMode::Strict);
                match (vp, vm) {
                    (Ok(vp), Ok(vm)) => grad[a] = (vp - vm) / (2.0 * h),
                    _ => {
                        escaped = true;
                        break;
                    }
                }
            }
            if escaped {
                block.escaped += 1;
                continue;
            }

            let sigma = model.diffusion(t, z, c);
            let sigma_s = sigma.rows(0, d);
            let a_ss = sigma_s * sigma_s.transpose();
            let mut a_vec = DVector::zeros(d);
            for k in 0..d {
                for l in 0..d {
                    a_vec[k] += a_ss[(k, l)] * grad[l];
                }
            }
            if p > 0 {
                let sigma_r = sigma.rows(d, p);
                let a_sr = sigma_s * sigma_r.transpose();
                for k in 0..d {
                    for l in 0..p {
                        a_vec[k] += a_sr[(k, l)] * grad[d + l];
                    }
                }
            }

            // jump quadrature: G_J, A_J and the φ-independent moments of the
            // mismatch (S_vv, S_v, ∫F_S ν) in one pass
            let mut g_jump = DMatrix::zeros(d, d);
            let mut a_jump = DVector::zeros(d);
            let mut s_vv = 0.0;
            let mut s_v = 0.0;
            kappa_s.fill(0.0);
            let mut jump_escape = false;
            for atom in model.levy.nodes() {
                model.jump_into(t, z, c, &atom.point, &mut fbuf);
                for (s, (zz, ff)) in shifted.iter_mut().zip(z.iter().zip(fbuf.iter())) {
                    *s = zz + ff;
                }
                let dv = match vf.interp_sheet(vf_level, c, &shifted, QueryMode::Strict) {
                    Ok(v) => v - v0,
                    Err(_) => {
                        jump_escape = true;
                        break;
                    }
                };
                let w = atom.weight;
                for k in 0..d {
                    a_jump[k] += w * fbuf[k] * dv;
                    kappa_s[k] += w * fbuf[k];
                    for l in 0..d {
                        g_jump[(k, l)] += w * fbuf[k] * fbuf[l];
                    }
                }
                s_vv += w * dv * dv;
                s_v += w * dv;
            }
            if jump_escape {
                block.escaped += 1;
                continue;
            }

            // regime-switch terms
            let mut g_reg = DMatrix::zeros(d, d);
            let mut a_reg = DVector::zeros(d);
            let mut trans_raw: Vec<(usize, f64, Vec<f64>)> = Vec::new();
            let mut reg_escape = false;
            for j in model.regimes.labels() {
                if j == c {
                    continue;
                }
                let lam = model.intensity(t, z, c, j);
                model.regime_jump_into(t, z, c, j, &mut fbuf);
                for (s, (zz, rr)) in shifted.iter_mut().zip(z.iter().zip(fbuf.iter())) {
                    *s = zz + rr;
                }
                let dv = match vf.interp_sheet(vf_level, j, &shifted, QueryMode::Strict) {
                    Ok(v) => v - v0 + dividend.transition(t, z, c, j),
                    Err(_) => {
                        reg_escape = true;
                        break;
                    }
                };
                for k in 0..d {
                    a_reg[k] += lam * fbuf[k] * dv;
                    for l in 0..d {
                        g_reg[(k, l)] += lam * fbuf[k] * fbuf[l];
                    }
                }
                trans_raw.push((j, dv, fbuf[0..d].to_vec()));
            }
            if reg_escape {
                block.escaped += 1;
                continue;
            }

            let g_total = {
                let g = &a_ss + &g_jump + &g_reg;
                let gt = g.transpose();
                (g + gt) * 0.5
            };
            let a_total = &a_vec + &a_jump + &a_reg;
            let solution = min_norm_solve(&g_total, &a_total);
            let phi = match phi_mode {
                PhiMode::RiskMinimizing => solution.phi.clone(),
                PhiMode::Custom(f) => {
                    let mut out = vec![0.0; d];
                    f(t, z, c, &mut out);
                    DVector::from_column_slice(&out)
                }
            };
            let residual = (&g_total * &phi - &a_total).norm();

            // mismatches for this φ
            for w in 0..r_w {
                let mut acc = 0.0;
                for k in 0..dim {
                    acc += grad[k] * sigma[(k, w)];
                }
                for k in 0..d {
                    acc -= phi[k] * sigma[(k, w)];
                }
                block.m_w[slot * r_w + w] = acc;
            }
            let quad_form = (&g_jump * &phi).dot(&phi);
            block.m_jump_sq[slot] = (s_vv - 2.0 * phi.dot(&a_jump) + quad_form).max(0.0);
            let kdot: f64 = (0..d).map(|k| phi[k] * kappa_s[k]).sum();
            block.m_jump_comp[slot] = s_v - kdot;
            for (j, dv, rho_s) in &trans_raw {
                let tslot = if *j < c { *j - 1 } else { *j - 2 };
                let pdot: f64 = (0..d).map(|k| phi[k] * rho_s[k]).sum();
                block.m_trans[slot * n_slots + tslot] = dv - pdot;
            }

            let s_traded = &z[0..d];
            let phi_dot_s: f64 = (0..d).map(|k| phi[k] * s_traded[k]).sum();
            let wealth = if is_terminal { 0.0 } else { v0 };
            block.eta_unit[slot] = wealth - phi_dot_s;
            for k in 0..d {
                block.phi[slot * d + k] = phi[k];
            }
            block.residual[slot] = residual;
            block.rank[slot] = solution.rank as u8;
            block.valid[slot] = true;
        }
    }
    Ok(block)
}

fn compute_valid_box(field: &HedgeField) -> Vec<(usize, usize)> {
    let dim = field.grid.dim();
    let mut ranges = Vec::with_capacity(dim);
    for a in 0..dim {
        let n = field.grid.axes()[a].n_nodes();
        let mut good = vec![true; n];
        for level in 0..field.tgrid.n_nodes() {
            for c in 1..=field.n_regimes {
                for node in 0..field.grid.n_nodes() {
                    if !field.is_valid(level, c, node) {
                        let idx = if dim == 1 {
                            node
                        } else if a == 0 {
                            node % field.grid.axes()[0].n_nodes()
                        } else {
                            node / field.grid.axes()[0].n_nodes()
                        };
                        good[idx] = false;
                    }
                }
            }
        }
        // maximal good run containing the center
        let center = n / 2;
        let (mut lo, mut hi) = (center, center);
        if good[center] {
            while lo > 0 && good[lo - 1] {
                lo -= 1;
            }
            while hi + 1 < n && good[hi + 1] {
                hi += 1;
            }
        } else {
            // fall back to the longest run anywhere
            let (mut best_lo, mut best_hi, mut cur_lo) = (0usize, 0usize, None::<usize>);
            for (i, &g) in good.iter().enumerate() {
                if g {
                    if cur_lo.is_none() {
                        cur_lo = Some(i);
                    }
                    let l = cur_lo.unwrap();
                    if i - l > best_hi - best_lo {
                        best_lo = l;
                        best_hi = i;
                    }
                } else {
                    cur_lo = None;
                }
            }
            lo = best_lo;
            hi = best_hi;
        }
        ranges.push((lo, hi.max(lo + 1).min(n - 1)));
    }
    ranges
}

/// Min-norm solution of the credit-risk system
/// `(ρ_S^{i,j})ᵀ φ = Δ^{i,j} v + δ^{i,j}` over all targets `j ≠ i`
/// (delta-hedging of the rating-transition risk alone).
pub fn credit_delta_hedge(
    model: &MarketModel,
    dividend: &DividendSpec,
    vf: &ValueField,
    u: f64,
    z: &[f64],
    i: usize,
) -> Result<DVector<f64>> {
    let d = model.dims.assets;
    let k = model.regimes.count();
    let dim = model.dims.state();
    let mut rows = DMatrix::zeros(k - 1, d);
    let mut rhs = DVector::zeros(k - 1);
    let v0 = vf.value_at(u, z, i, QueryMode::Strict)?;
    let mut rho = vec![0.0; dim];
    let mut shifted = vec![0.0; dim];
    let mut r = 0;
    for j in model.regimes.labels() {
        if j == i {
            continue;
        }
        model.regime_jump_into(u, z, i, j, &mut rho);
        for (s, (zz, rr)) in shifted.iter_mut().zip(z.iter().zip(rho.iter())) {
            *s = zz + rr;
        }
        for c in 0..d {
            rows[(r, c)] = rho[c];
        }
        rhs[r] = vf.value_at(u, &shifted, j, QueryMode::Strict)? - v0
            + dividend.transition(u, z, i, j);
        r += 1;
    }
    let svd = rows.svd(true, true);
    let phi = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::InvalidSpec(format!("credit hedge solve failed: {e}")))?;
    Ok(phi)
}

/// CSV export: `t,y...,c,phi_1..phi_d,eta,rank,residual` per node.
pub fn write_hedge_csv<W: std::io::Write>(field: &HedgeField, out: &mut W) -> Result<()> {
    write!(out, "t")?;
    for a in 1..=field.grid.dim() {
        write!(out, ",y{a}")?;
    }
    write!(out, ",c")?;
    for k in 1..=field.d {
        write!(out, ",phi{k}")?;
    }
    writeln!(out, ",eta,rank,residual")?;
    for level in 0..field.tgrid.n_nodes() {
        let t = field.tgrid.node(level);
        for c in 1..=field.n_regimes {
            for node in 0..field.grid.n_nodes() {
                write!(out, "{t}")?;
                for coord in field.grid.coords(node) {
                    write!(out, ",{coord}")?;
                }
                write!(out, ",{c}")?;
                for k in 0..field.d {
                    write!(out, ",{}", field.phi_node(level, c, node)[k])?;
                }
                writeln!(
                    out,
                    ",{},{},{}",
                    field.eta_unit_node(level, c, node),
                    field.rank_node(level, c, node),
                    field.residual_node(level, c, node)
                )?;
            }
        }
    }
    Ok(())
}
