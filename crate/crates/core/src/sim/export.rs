//! CSV dumps of simulated ensembles.

use std::io::Write;

use super::PathEnsemble;
use crate::error::Result;

/// Writes node states as `path,t,Y1..Yn,C,B` rows.
pub fn write_paths_csv<W: Write>(ensemble: &PathEnsemble, out: &mut W) -> Result<()> {
    let dim = ensemble.spec.model.dims.state();
    write!(out, "path,t")?;
    for i in 1..=dim {
        write!(out, ",Y{i}")?;
    }
    writeln!(out, ",C,B")?;
    for p in &ensemble.paths {
        for k in 0..p.grid.n_nodes() {
            write!(out, "{},{}", p.index, p.grid.node(k))?;
            for v in p.state(k) {
                write!(out, ",{v}")?;
            }
            writeln!(out, ",{},{}", p.regimes[k], p.bank[k])?;
        }
    }
    Ok(())
}

/// Writes the transition log as `path,t,i,j` rows.
pub fn write_transitions_csv<W: Write>(ensemble: &PathEnsemble, out: &mut W) -> Result<()> {
    writeln!(out, "path,t,i,j")?;
    for p in &ensemble.paths {
        for tr in &p.transitions {
            writeln!(out, "{},{},{},{}", p.index, tr.time, tr.from, tr.to)?;
        }
    }
    Ok(())
}
