//! Plain-text result files: CSV series, run manifests and exact-reference
//! tables.

use std::io::{self, BufRead, Write};

use crate::dissociation::RealtimeSeries;
use crate::error::{Error, Result};
use crate::oracle::{EdPoint, KernelCheckRow};
use crate::phase_space::ObservablePoint;
use crate::stats::Estimate;

pub const HUBBARD_HEADER: &str = "tau,energy_per_site,energy_err,filling,filling_err,g2,g2_err,population,mean_log_weight";
pub const DISSOCIATION_HEADER: &str = "t,n1,n1_err,n1_im,n1_im_err,n2,n2_err,n2_im,n2_im_err,\
molecules,molecules_err,molecules_im,molecules_im_err,conserved,conserved_err,conserved_im,conserved_im_err";
pub const KERNEL_HEADER: &str = "state,modes,trace_dev,moment_dev,weight_dev,normal_dev,mixed_dev,antinormal_dev";
pub const TABLE_VERSION: &str = "# reference table v1";
pub const TABLE_HEADER: &str = "tau,observable,value";

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn number(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn estimate(e: &Estimate) -> [String; 2] {
    [number(e.value), number(e.error.unwrap_or(f64::NAN))]
}

pub fn write_hubbard_csv<W: Write>(mut w: W, points: &[ObservablePoint]) -> io::Result<()> {
    writeln!(w, "{HUBBARD_HEADER}")?;
    for p in points {
        let [e, ee] = estimate(&p.energy_per_site);
        let [f, fe] = estimate(&p.filling);
        let [g, ge] = estimate(&p.g2);
        writeln!(w, "{},{e},{ee},{f},{fe},{g},{ge},{},{}", number(p.tau), p.population, number(p.mean_log_weight))?;
    }
    Ok(())
}

pub fn write_dissociation_csv<W: Write>(mut w: W, series: &RealtimeSeries) -> io::Result<()> {
    writeln!(w, "{DISSOCIATION_HEADER}")?;
    for p in &series.points {
        let fields: Vec<String> = [
            &p.n1,
            &p.n1_im,
            &p.n2,
            &p.n2_im,
            &p.molecules,
            &p.molecules_im,
            &p.conserved,
            &p.conserved_im,
        ]
        .into_iter()
        .flat_map(estimate)
        .collect();
        writeln!(w, "{},{}", number(p.t), fields.join(","))?;
    }
    Ok(())
}

pub fn write_kernel_csv<W: Write>(mut w: W, rows: &[KernelCheckRow]) -> io::Result<()> {
    writeln!(w, "{KERNEL_HEADER}")?;
    for r in rows {
        let ids = r.identities.map(|d| d.as_array()).unwrap_or([f64::NAN; 4]);
        let ids: Vec<String> = ids.iter().map(|&x| number(x)).collect();
        writeln!(
            w,
            "{},{},{},{},{}",
            r.index,
            r.modes,
            number(r.trace_deviation),
            number(r.moment_deviation),
            ids.join(",")
        )?;
    }
    Ok(())
}

/// One row per `(τ, observable)` with fifteen significant digits.
pub fn write_reference_table<W: Write>(mut w: W, points: &[EdPoint]) -> io::Result<()> {
    writeln!(w, "{TABLE_VERSION}")?;
    writeln!(w, "{TABLE_HEADER}")?;
    for p in points {
        for (name, value) in [("energy_per_site", p.energy_per_site), ("filling", p.filling), ("g2", p.g2)] {
            writeln!(w, "{:.14e},{name},{value:.14e}", p.tau)?;
        }
    }
    Ok(())
}

/// Parses a table written by [`write_reference_table`].
pub fn read_reference_table<R: BufRead>(r: R) -> Result<Vec<(f64, String, f64)>> {
    let bad = |line: &str| Error::InvalidParameter(format!("malformed reference table line {line:?}"));
    let mut rows = Vec::new();
    for line in r.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == TABLE_HEADER {
            continue;
        }
        let mut parts = line.split(',');
        let (Some(tau), Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(bad(line));
        };
        rows.push((tau.parse().map_err(|_| bad(line))?, name.to_string(), value.parse().map_err(|_| bad(line))?));
    }
    Ok(rows)
}

/// `key = value` lines; `entries` should already include every resolved
/// default.
pub fn write_manifest<W: Write>(mut w: W, entries: &[(String, String)]) -> io::Result<()> {
    writeln!(w, "version = {}", env!("CARGO_PKG_VERSION"))?;
    for (k, v) in entries {
        writeln!(w, "{k} = {v}")?;
    }
    Ok(())
}
