//! CSV rendering of traces and sweep tables.

use std::fmt::Write as _;

use autobid::orchestrator::RunTrace;

pub const TRACE_HEADER: &str = "t,v,d,bid,won,payment,lambda,mu,chi,psi,u_cap,budget_remaining,roi_slack,policy_tag,cum_objective";

/// Formats `x` with 12 significant digits, like C's `%.12g`.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-4..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!(
            "{}e{}{:02}",
            trim_zeros(mantissa.into()),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn trace_csv(trace: &RunTrace) -> String {
    let mut out = String::with_capacity(120 * (trace.rows.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &trace.rows {
        let d = r.d.map(fmt_num).unwrap_or_default();
        let nums = [
            r.bid,
            if r.won { 1.0 } else { 0.0 },
            r.payment,
            r.lambda,
            r.mu,
            r.chi,
            r.psi,
            r.u_cap,
            r.budget_remaining,
            r.roi_slack,
        ]
        .map(fmt_num);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.t,
            fmt_num(r.v),
            d,
            nums.join(","),
            r.tag.as_str(),
            fmt_num(r.cum_objective)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(-2.5), "-2.5");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(2.0 / 3.0 * 1000.0), "666.666666667");
        assert_eq!(fmt_num(123456789012345.0), "1.23456789012e+14");
        assert_eq!(fmt_num(0.000012345), "1.2345e-05");
        assert_eq!(fmt_num(0.0001), "0.0001");
        assert_eq!(fmt_num(999999999999.9), "1e+12");
        assert_eq!(fmt_num(f64::INFINITY), "inf");
    }
}
