use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateFlag {
    Ok,
    /// All errors zero.
    Exact,
    /// Errors not decreasing, or observed orders disagree by more than 0.5.
    Unreliable,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RateRow {
    pub quantity: String,
    pub n: usize,
    pub error: f64,
    /// `log₂(e_{N/2} / e_N)`; absent on the coarsest grid.
    pub rate: Option<f64>,
    pub flag: RateFlag,
}

/// Observed orders `p = log₂(e_N / e_{2N})` for errors on ascending grids.
pub fn convergence_study(quantity: &str, grids: &[usize], errors: &[f64]) -> Vec<RateRow> {
    assert_eq!(grids.len(), errors.len(), "one error per grid");
    let exact = errors.iter().all(|&e| e == 0.0);
    let rates: Vec<Option<f64>> = (0..errors.len())
        .map(|i| {
            if i == 0 || exact {
                return None;
            }
            let ratio = grids[i] as f64 / grids[i - 1] as f64;
            Some((errors[i - 1] / errors[i]).ln() / ratio.ln())
        })
        .collect();
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    let finite: Vec<f64> = rates.iter().flatten().copied().collect();
    let spread = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max) - finite.iter().copied().fold(f64::INFINITY, f64::min);
    let flag = if exact {
        RateFlag::Exact
    } else if !monotone || finite.iter().any(|r| !r.is_finite()) || (finite.len() > 1 && spread > 0.5) {
        RateFlag::Unreliable
    } else {
        RateFlag::Ok
    };
    grids
        .iter()
        .zip(errors)
        .zip(rates)
        .map(|((&n, &error), rate)| RateRow { quantity: quantity.to_string(), n, error, rate, flag })
        .collect()
}

pub(super) fn write_rates<W: Write>(rows: &[RateRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "# goursat-lab rates v1")?;
    writeln!(w, "quantity,n,error,rate,flag")?;
    for r in rows {
        let rate = r.rate.map(|v| v.to_string()).unwrap_or_default();
        let flag = match r.flag {
            RateFlag::Ok => "ok",
            RateFlag::Exact => "exact",
            RateFlag::Unreliable => "unreliable",
        };
        writeln!(w, "{},{},{},{},{}", r.quantity, r.n, r.error, rate, flag)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_order_errors() {
        let rows = convergence_study("u", &[64, 128, 256], &[4e-3, 1e-3, 2.5e-4]);
        assert!(rows[0].rate.is_none());
        assert!((rows[1].rate.unwrap() - 2.0).abs() < 1e-12);
        assert!(rows.iter().all(|r| r.flag == RateFlag::Ok));
    }

    #[test]
    fn zero_errors_are_exact() {
        let rows = convergence_study("u", &[8, 16, 32], &[0.0, 0.0, 0.0]);
        assert!(rows.iter().all(|r| r.flag == RateFlag::Exact && r.rate.is_none()));
    }

    #[test]
    fn non_monotone_is_unreliable() {
        let rows = convergence_study("u", &[8, 16, 32], &[1.0, 2.0, 0.5]);
        assert!(rows.iter().all(|r| r.flag == RateFlag::Unreliable));
        let rows = convergence_study("u", &[8, 16, 32], &[1.0, 0.5, 0.03]);
        assert_eq!(rows[2].flag, RateFlag::Unreliable);
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_rates(&convergence_study("u", &[8, 16], &[1.0, 0.25]), &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "# goursat-lab rates v1\nquantity,n,error,rate,flag\nu,8,1,,ok\nu,16,0.25,2,ok\n");
    }
}
