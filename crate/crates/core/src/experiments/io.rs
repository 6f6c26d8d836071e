use std::io::{self, Write};

use super::trajectory::DiagnosticRow;

pub const CSV_HEADER: &str = "step,t,dt,M_dis,H_dis,M_app,sup_norm,grad_norm,L,a,tau,n_points";

/// Writes the time series as CSV with the fixed column set; reals are printed
/// with 17 significant digits.
pub fn write_diagnostics_csv<W: Write>(rows: &[DiagnosticRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            r.step, r.t, r.dt, r.m_dis, r.h_dis, r.m_app, r.sup_norm, r.grad_norm, r.l, r.a, r.tau, r.n_points
        )?;
    }
    out.flush()
}
