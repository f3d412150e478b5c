//! Backward IMEX time stepping for the coupled pricing PIDE system
//!
//! ```text
//! (∂_t + A_t - r) v(t, y, c) + g(t, y, c) + Σ_{j≠c} δ^{c,j}(t, y) λ^{c,j}(t, y) = 0,
//! v(T, y, c) = h(y, c),
//! ```
//!
//! solved per regime sheet, coupled through the explicit terms:
//!
//! - implicit (banded): drift, diffusion and the diagonal loss terms
//!   `-(Σλ + ν(Rⁿ)) v`; the jump/switch compensators `-∇v·(∫Fν + Σρλ)` fold
//!   into the drift,
//! - explicit (from the previous backward level): the nonlocal gains
//!   `∫ v(y + F(x)) ν(dx)` and `Σ_j v(y + ρ^{c,j}, j) λ^{c,j}`, and in 2-d the
//!   mixed derivative,
//! - discounting by the exact nodewise factor `e^{-r Δt}`, which keeps
//!   constants and pure-discount solutions exact,
//! - boundary condition: zero second derivative (linear continuation) at the
//!   spatial edges; the nonlocal terms use the matching unbounded linear
//!   extrapolation.
//!
//! In 2-d the implicit part is split by a Douglas ADI sweep (one tridiagonal
//! solve per grid line and direction); the mixed-derivative term joins the
//! explicit part.

use crate::error::{Error, Result};
use crate::model::{DividendSpec, MarketModel};
use crate::pide::{interp_on, Axis, QueryMode, SpatialGrid, ValueField};
use crate::sim::TimeGrid;

#[derive(Debug, Clone)]
pub struct PideOptions {
    pub n_time_steps: usize,
}

#[derive(Debug, Clone)]
pub struct SolveStats {
    pub scheme: String,
    pub warnings: Vec<String>,
    /// Max of `(Σλ + ν(Rⁿ)) Δt` seen while stepping (explicit-part bound).
    pub explicit_bound: f64,
}

/// Solves the pricing system backward from `v(T, ·, c) = h(·, c)`.
pub fn solve_pide(
    model: &MarketModel,
    dividend: &DividendSpec,
    grid: &SpatialGrid,
    opts: &PideOptions,
) -> Result<(ValueField, SolveStats)> {
    if grid.dim() != model.dims.state() {
        return Err(Error::InvalidSpec(format!(
            "grid dimension {} != model state dimension {} (solver handles dims 1 and 2)",
            grid.dim(),
            model.dims.state()
        )));
    }
    let k_regimes = model.regimes.count();
    let tgrid = TimeGrid::new(0.0, dividend.maturity, opts.n_time_steps)?;
    let mut field = ValueField::zeros(grid.clone(), tgrid, k_regimes, "imex-backward-euler");
    let n_nodes = grid.n_nodes();
    let n_levels = tgrid.n_nodes();

    // Terminal condition.
    for c in 1..=k_regimes {
        for node in 0..n_nodes {
            let y = grid.coords(node);
            *field.at_mut(n_levels - 1, c, node) = dividend.terminal(&y, c);
        }
    }

    let shift_tables = if model.dynamics().time_invariant_jumps() && !model.levy.is_empty() {
        Some(build_shift_tables(model, grid, 0.0)?)
    } else {
        None
    };
    let levy_mass = model.levy.total_mass();
    let node_coords: Vec<Vec<f64>> = (0..n_nodes).map(|n| grid.coords(n)).collect();

    let mut warnings: Vec<String> = Vec::new();
    let mut explicit_bound: f64 = 0.0;
    let dt = tgrid.dt();

    for level in (0..n_levels - 1).rev() {
        let t = tgrid.node(level);
        let tables_for_level;
        let tables: &[ShiftTable] = match &shift_tables {
            Some(cached) => cached,
            None if !model.levy.is_empty() => {
                tables_for_level = build_shift_tables(model, grid, t)?;
                &tables_for_level
            }
            None => &[],
        };

        for c in 1..=k_regimes {
            // Explicit data lives on level + 1.
            let mut rhs = vec![0.0; n_nodes];
            let mut lambda_tot = vec![0.0; n_nodes];
            {
                let prev = field.sheet(level + 1, c);
                rhs.copy_from_slice(prev);
            }
            for node in 0..n_nodes {
                let y = &node_coords[node];
                let mut gain = 0.0;
                // jump gain from the same regime sheet
                if levy_mass > 0.0 {
                    let nx = if grid.dim() == 1 { 0 } else { grid.axes()[0].n_nodes() };
                    gain += shift_gain(&tables[c - 1], field.sheet(level + 1, c), node, nx);
                }
                // regime-coupling gain from the other sheets
                let mut lam_sum = 0.0;
                let mut rho = vec![0.0; grid.dim()];
                let mut shifted = vec![0.0; grid.dim()];
                for j in model.regimes.labels() {
                    if j == c {
                        continue;
                    }
                    let lam = model.intensity(t, y, c, j);
                    if lam <= 0.0 {
                        continue;
                    }
                    lam_sum += lam;
                    model.regime_jump_into(t, y, c, j, &mut rho);
                    for (s, (yy, r)) in shifted.iter_mut().zip(y.iter().zip(rho.iter())) {
                        *s = yy + r;
                    }
                    gain += lam
                        * interp_on(grid, field.sheet(level + 1, j), &shifted, QueryMode::Unbounded)?;
                }
                lambda_tot[node] = lam_sum;
                explicit_bound = explicit_bound.max((lam_sum + levy_mass) * dt);

                // source: payment rate plus expected transition payments
                let mut src = dividend.rate(t, y, c);
                for j in model.regimes.labels() {
                    if j == c {
                        continue;
                    }
                    let lam = model.intensity(t, y, c, j);
                    if lam > 0.0 {
                        src += dividend.transition(t, y, c, j) * lam;
                    }
                }
                rhs[node] += dt * (gain + src);
            }

            // Implicit solve of the local operator.
            match grid.dim() {
                1 => {
                    let out = implicit_1d(model, grid, t, dt, c, &rhs, &lambda_tot, levy_mass)?;
                    field.sheet_mut(level, c).copy_from_slice(&out);
                }
                _ => {
                    let prev = field.sheet(level + 1, c).to_vec();
                    let out = implicit_adi_2d(
                        model,
                        grid,
                        t,
                        dt,
                        c,
                        &rhs,
                        &prev,
                        &lambda_tot,
                        levy_mass,
                    )?;
                    field.sheet_mut(level, c).copy_from_slice(&out);
                }
            }

            // Exact nodewise discounting over the step.
            for node in 0..n_nodes {
                let r = model.short_rate(t, &node_coords[node], c);
                *field.at_mut(level, c, node) *= (-r * dt).exp();
            }

            if field.sheet(level, c).iter().any(|v| !v.is_finite()) {
                return Err(Error::SolverDiverged { level, time: t });
            }
        }
    }

    if explicit_bound > 1.0 {
        warnings.push(format!(
            "explicit-part bound (lambda + levy mass) * dt = {explicit_bound:.3} exceeds 1; refine the time grid"
        ));
    }

    let stats = SolveStats {
        scheme: field.scheme.clone(),
        warnings,
        explicit_bound,
    };
    Ok((field, stats))
}

// --- jump-shift stencils -----------------------------------------------------

/// Interpolation stencil for `y_node + F_Y(t, y_node, c, x_q)`: cell indices
/// and (unbounded) weights per axis, plus the quadrature weight.
struct ShiftEntry {
    cells: [usize; 2],
    fracs: [f64; 2],
    weight: f64,
}

type ShiftTable = Vec<Vec<ShiftEntry>>; // [node][quad]

fn build_shift_tables(model: &MarketModel, grid: &SpatialGrid, t: f64) -> Result<Vec<ShiftTable>> {
    let dim = grid.dim();
    let n_nodes = grid.n_nodes();
    let mut out = Vec::with_capacity(model.regimes.count());
    let mut shift = vec![0.0; dim];
    for c in model.regimes.labels() {
        let mut table: ShiftTable = Vec::with_capacity(n_nodes);
        for node in 0..n_nodes {
            let y = grid.coords(node);
            let mut entries = Vec::with_capacity(model.levy.nodes().len());
            for atom in model.levy.nodes() {
                model.jump_into(t, &y, c, &atom.point, &mut shift);
                let mut cells = [0usize; 2];
                let mut fracs = [0.0f64; 2];
                for a in 0..dim {
                    let (i, w) = locate_unbounded(&grid.axes()[a], y[a] + shift[a]);
                    cells[a] = i;
                    fracs[a] = w;
                }
                entries.push(ShiftEntry {
                    cells,
                    fracs,
                    weight: atom.weight,
                });
            }
            table.push(entries);
        }
        out.push(table);
    }
    Ok(out)
}

fn locate_unbounded(axis: &Axis, x: f64) -> (usize, f64) {
    axis.locate(x, QueryMode::Unbounded)
        .expect("unbounded locate cannot fail")
}

/// Weighted sum `Σ_q w_q v(y_node + F(x_q))` using the precomputed stencils.
/// `nx = 0` marks a 1-d sheet; otherwise `nx` is the axis-0 node count of a
/// 2-d sheet. Weights may lie outside `[0, 1]`: that is the linear
/// continuation past the boundary.
fn shift_gain(table: &ShiftTable, sheet: &[f64], node: usize, nx: usize) -> f64 {
    let mut acc = 0.0;
    for e in &table[node] {
        let v = if nx == 0 {
            let (i, w) = (e.cells[0], e.fracs[0]);
            sheet[i] * (1.0 - w) + sheet[i + 1] * w
        } else {
            let (i, wx) = (e.cells[0], e.fracs[0]);
            let (j, wy) = (e.cells[1], e.fracs[1]);
            sheet[i + nx * j] * (1.0 - wx) * (1.0 - wy)
                + sheet[i + 1 + nx * j] * wx * (1.0 - wy)
                + sheet[i + nx * (j + 1)] * (1.0 - wx) * wy
                + sheet[i + 1 + nx * (j + 1)] * wx * wy
        };
        acc += e.weight * v;
    }
    acc
}

// --- tridiagonal machinery ---------------------------------------------------

/// Thomas algorithm; `lower[0]` and `upper[m-1]` are ignored.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) {
    let m = diag.len();
    let mut c_star = vec![0.0; m];
    c_star[0] = upper[0] / diag[0];
    rhs[0] /= diag[0];
    for i in 1..m {
        let denom = diag[i] - lower[i] * c_star[i - 1];
        c_star[i] = upper[i] / denom;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / denom;
    }
    for i in (0..m - 1).rev() {
        rhs[i] -= c_star[i] * rhs[i + 1];
    }
}

/// Local operator stencil `L v = μ D1 v + ½ a D2 v - kill · v` at interior
/// node `i` of `axis`, as coefficients on `(v_{i-1}, v_i, v_{i+1})`. Uses
/// central first differences unless they would break the sign structure, in
/// which case it upwinds in the drift direction.
fn local_stencil(axis: &Axis, i: usize, mu: f64, a: f64, kill: f64) -> (f64, f64, f64) {
    let x = axis.nodes();
    let (hm, hp) = (x[i] - x[i - 1], x[i + 1] - x[i]);
    let d2m = a / (hm * (hm + hp));
    let d2p = a / (hp * (hm + hp));
    let d2c = -a / (hm * hp);
    // central drift
    let c1m = -mu * hp / (hm * (hm + hp));
    let c1p = mu * hm / (hp * (hm + hp));
    let c1c = mu * (hp - hm) / (hm * hp);
    let (m, c0, p) = (d2m + c1m, d2c + c1c, d2p + c1p);
    if m >= 0.0 && p >= 0.0 {
        (m, c0 - kill, p)
    } else if mu >= 0.0 {
        // forward difference
        (d2m, d2c - mu / hp - kill, d2p + mu / hp)
    } else {
        // backward difference
        (d2m - mu / hm, d2c + mu / hm - kill, d2p)
    }
}

#[allow(clippy::too_many_arguments)]
fn implicit_1d(
    model: &MarketModel,
    grid: &SpatialGrid,
    t: f64,
    dt: f64,
    c: usize,
    rhs: &[f64],
    lambda_tot: &[f64],
    levy_mass: f64,
) -> Result<Vec<f64>> {
    let axis = &grid.axes()[0];
    let n = axis.n_nodes();
    let m = n - 2;
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    let mut b = vec![0.0; m];

    let mut mu = vec![0.0; 1];
    let mut scratch = vec![0.0; 1];
    let mut sig = nalgebra::DMatrix::zeros(1, model.dims.wiener);
    for i in 1..=m {
        let y = [axis.nodes()[i]];
        model.effective_drift_into(t, &y, c, &mut mu, &mut scratch)?;
        model.diffusion_into(t, &y, c, &mut sig);
        let a: f64 = (0..model.dims.wiener).map(|w| sig[(0, w)] * sig[(0, w)]).sum();
        let kill = lambda_tot[i] + levy_mass;
        let (sm, sc, sp) = local_stencil(axis, i, mu[0], a, kill);
        // (I - dt L) rows
        let (mut am, mut ac, mut ap) = (-dt * sm, 1.0 - dt * sc, -dt * sp);
        // fold the linear-continuation boundary rows
        if i == 1 {
            ac += 2.0 * am;
            ap -= am;
            am = 0.0;
        }
        if i == m {
            ac += 2.0 * ap;
            am -= ap;
            ap = 0.0;
        }
        lower[i - 1] = am;
        diag[i - 1] = ac;
        upper[i - 1] = ap;
        b[i - 1] = rhs[i];
    }
    solve_tridiagonal(&lower, &diag, &upper, &mut b);

    let mut out = vec![0.0; n];
    out[1..=m].copy_from_slice(&b);
    out[0] = 2.0 * out[1] - out[2];
    out[n - 1] = 2.0 * out[n - 2] - out[n - 3];
    Ok(out)
}

/// Douglas ADI step for the 2-d local operator. The мixed-derivative term and
/// all nonlocal terms are already in `rhs` (explicit); this routine handles
///
/// ```text
/// Y0 = rhs + dt (A1 + A2) v_prev,  (I - dt A1) Y1 = Y0 - dt A1 v_prev,
/// (I - dt A2) Y2 = Y1 - dt A2 v_prev
/// ```
///
/// with `A_k = μ_k D1_k + ½ a_kk D2_k - ½ kill`.
#[allow(clippy::too_many_arguments)]
fn implicit_adi_2d(
    model: &MarketModel,
    grid: &SpatialGrid,
    t: f64,
    dt: f64,
    c: usize,
    rhs: &[f64],
    v_prev: &[f64],
    lambda_tot: &[f64],
    levy_mass: f64,
) -> Result<Vec<f64>> {
    let ax0 = &grid.axes()[0];
    let ax1 = &grid.axes()[1];
    let (nx, ny) = (ax0.n_nodes(), ax1.n_nodes());
    let idx = |i: usize, j: usize| i + nx * j;

    // Per-node coefficients.
    let mut mu0 = vec![0.0; nx * ny];
    let mut mu1 = vec![0.0; nx * ny];
    let mut a00 = vec![0.0; nx * ny];
    let mut a11 = vec![0.0; nx * ny];
    let mut a01 = vec![0.0; nx * ny];
    {
        let mut mu = vec![0.0; 2];
        let mut scratch = vec![0.0; 2];
        let mut sig = nalgebra::DMatrix::zeros(2, model.dims.wiener);
        for j in 0..ny {
            for i in 0..nx {
                let y = [ax0.nodes()[i], ax1.nodes()[j]];
                model.effective_drift_into(t, &y, c, &mut mu, &mut scratch)?;
                model.diffusion_into(t, &y, c, &mut sig);
                let n = idx(i, j);
                mu0[n] = mu[0];
                mu1[n] = mu[1];
                for w in 0..model.dims.wiener {
                    a00[n] += sig[(0, w)] * sig[(0, w)];
                    a11[n] += sig[(1, w)] * sig[(1, w)];
                    a01[n] += sig[(0, w)] * sig[(1, w)];
                }
            }
        }
    }

    // Axis operator applied explicitly (boundary rows use the linear limit:
    // no curvature, one-sided drift).
    let apply_axis = |axis_id: usize, v: &[f64], out: &mut Vec<f64>| {
        out.clear();
        out.resize(nx * ny, 0.0);
        for j in 0..ny {
            for i in 0..nx {
                let n = idx(i, j);
                let kill = 0.5 * (lambda_tot[n] + levy_mass);
                let (axis, pos, mu, a) = if axis_id == 0 {
                    (ax0, i, mu0[n], a00[n])
                } else {
                    (ax1, j, mu1[n], a11[n])
                };
                let nn = axis.n_nodes();
                let val = if pos == 0 || pos == nn - 1 {
                    // linear continuation: D2 = 0, one-sided D1
                    let h = if pos == 0 {
                        axis.nodes()[1] - axis.nodes()[0]
                    } else {
                        axis.nodes()[nn - 1] - axis.nodes()[nn - 2]
                    };
                    let (vm, vp) = if axis_id == 0 {
                        if pos == 0 {
                            (v[idx(0, j)], v[idx(1, j)])
                        } else {
                            (v[idx(nx - 2, j)], v[idx(nx - 1, j)])
                        }
                    } else if pos == 0 {
                        (v[idx(i, 0)], v[idx(i, 1)])
                    } else {
                        (v[idx(i, ny - 2)], v[idx(i, ny - 1)])
                    };
                    mu * (vp - vm) / h - kill * v[n]
                } else {
                    let (sm, sc, sp) = local_stencil(axis, pos, mu, a, kill);
                    let (vm, v0, vp) = if axis_id == 0 {
                        (v[idx(i - 1, j)], v[n], v[idx(i + 1, j)])
                    } else {
                        (v[idx(i, j - 1)], v[n], v[idx(i, j + 1)])
                    };
                    sm * vm + sc * v0 + sp * vp
                };
                out[n] = val;
            }
        }
    };

    // Mixed derivative (explicit, zero on the boundary ring).
    let mut mixed = vec![0.0; nx * ny];
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let hx = ax0.nodes()[i + 1] - ax0.nodes()[i - 1];
            let hy = ax1.nodes()[j + 1] - ax1.nodes()[j - 1];
            let cross = (v_prev[idx(i + 1, j + 1)] - v_prev[idx(i + 1, j - 1)]
                - v_prev[idx(i - 1, j + 1)]
                + v_prev[idx(i - 1, j - 1)])
                / (hx * hy);
            mixed[idx(i, j)] = a01[idx(i, j)] * cross;
        }
    }

    let mut a1v = Vec::new();
    let mut a2v = Vec::new();
    apply_axis(0, v_prev, &mut a1v);
    apply_axis(1, v_prev, &mut a2v);

    // Y0
    let mut y0 = vec![0.0; nx * ny];
    for n in 0..nx * ny {
        y0[n] = rhs[n] + dt * (a1v[n] + a2v[n] + mixed[n]);
    }

    // Sweep 1: (I - dt A1) Y1 = Y0 - dt A1 v_prev, line by line in j.
    let mut y1 = vec![0.0; nx * ny];
    {
        let m = nx - 2;
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        let mut b = vec![0.0; m];
        for j in 0..ny {
            for i in 1..=m {
                let n = idx(i, j);
                let kill = 0.5 * (lambda_tot[n] + levy_mass);
                let (sm, sc, sp) = local_stencil(ax0, i, mu0[n], a00[n], kill);
                let (mut am, mut ac, mut ap) = (-dt * sm, 1.0 - dt * sc, -dt * sp);
                if i == 1 {
                    ac += 2.0 * am;
                    ap -= am;
                    am = 0.0;
                }
                if i == m {
                    ac += 2.0 * ap;
                    am -= ap;
                    ap = 0.0;
                }
                lower[i - 1] = am;
                diag[i - 1] = ac;
                upper[i - 1] = ap;
                b[i - 1] = y0[n] - dt * a1v[n];
            }
            solve_tridiagonal(&lower, &diag, &upper, &mut b);
            for i in 1..=m {
                y1[idx(i, j)] = b[i - 1];
            }
            y1[idx(0, j)] = 2.0 * y1[idx(1, j)] - y1[idx(2, j)];
            y1[idx(nx - 1, j)] = 2.0 * y1[idx(nx - 2, j)] - y1[idx(nx - 3, j)];
        }
    }

    // Sweep 2: (I - dt A2) Y2 = Y1 - dt A2 v_prev, line by line in i.
    let mut y2 = vec![0.0; nx * ny];
    {
        let m = ny - 2;
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        let mut b = vec![0.0; m];
        for i in 0..nx {
            for j in 1..=m {
                let n = idx(i, j);
                let kill = 0.5 * (lambda_tot[n] + levy_mass);
                let (sm, sc, sp) = local_stencil(ax1, j, mu1[n], a11[n], kill);
                let (mut am, mut ac, mut ap) = (-dt * sm, 1.0 - dt * sc, -dt * sp);
                if j == 1 {
                    ac += 2.0 * am;
                    ap -= am;
                    am = 0.0;
                }
                if j == m {
                    ac += 2.0 * ap;
                    am -= ap;
                    ap = 0.0;
                }
                lower[j - 1] = am;
                diag[j - 1] = ac;
                upper[j - 1] = ap;
                b[j - 1] = y1[n] - dt * a2v[n];
            }
            solve_tridiagonal(&lower, &diag, &upper, &mut b);
            for j in 1..=m {
                y2[idx(i, j)] = b[j - 1];
            }
            y2[idx(i, 0)] = 2.0 * y2[idx(i, 1)] - y2[idx(i, 2)];
            y2[idx(i, ny - 1)] = 2.0 * y2[idx(i, ny - 2)] - y2[idx(i, ny - 3)];
        }
    }

    Ok(y2)
}
