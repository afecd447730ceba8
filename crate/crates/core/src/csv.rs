//! Plain CSV output with `%.17g`-style numbers and LF line endings.

use std::io::Write;

/// Formats like C's `%.17g`: 17 significant digits, trailing zeros removed,
/// exponential notation when the decimal exponent is below −4 or at least 17.
pub fn format_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (16 - exp).max(0) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes a header line and numeric rows.
pub fn write_table<W, I, R>(w: &mut W, header: &[String], rows: I) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let line: Vec<String> = row.as_ref().iter().map(|&v| format_g17(v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}
