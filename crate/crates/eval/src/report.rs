//! CSV output for rate reports and sweep curves.

use std::io::Write;

use crate::rates::RateReport;
use crate::Result;

/// One row per group: `label,numerator,denominator,rate`, rate to six
/// decimals and empty when the group is empty.
pub fn write_rates_csv<W: Write>(reports: &[RateReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["label", "numerator", "denominator", "rate"])?;
    for r in reports {
        for g in &r.groups {
            out.write_record([
                g.label.clone(),
                g.numerator.to_string(),
                g.denominator.to_string(),
                g.rate().map(|v| format!("{v:.6}")).unwrap_or_default(),
            ])?;
        }
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// `report,tau,frr,far` rows, ascending in τ within each report.
pub fn write_curve_csv<W: Write>(reports: &[RateReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["report", "tau", "frr", "far"])?;
    let fmt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
    for r in reports {
        let mut pts = r.curve.clone();
        pts.sort_by(|a, b| a.tau.total_cmp(&b.tau));
        for p in pts {
            out.write_record([r.name.clone(), format!("{}", p.tau), fmt(p.frr), fmt(p.far)])?;
        }
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}
