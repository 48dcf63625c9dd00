//! Value parsers for quantities that must carry a unit suffix.

const ZERO_CELSIUS: f64 = 273.15;

fn split_number(s: &str) -> Result<(f64, &str), String> {
    let s = s.trim();
    let end = s
        .char_indices()
        .find(|&(i, c)| c.is_ascii_alphabetic() && !(i > 0 && (c == 'e' || c == 'E') && exponent_follows(s, i)))
        .map_or(s.len(), |(i, _)| i);
    let (num, unit) = s.split_at(end);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("`{s}` does not start with a number"))?;
    if !value.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok((value, unit.trim()))
}

/// `1e-5um`: an `e` followed by a digit or sign is part of the number.
fn exponent_follows(s: &str, i: usize) -> bool {
    s[i + 1..]
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_digit() || c == '-' || c == '+')
}

/// Absolute temperature in kelvin, from `160C` or `433.15K`.
pub fn temperature(s: &str) -> Result<f64, String> {
    let (v, unit) = split_number(s)?;
    let k = match unit {
        "C" | "c" | "degC" => v + ZERO_CELSIUS,
        "K" | "k" => v,
        "" => return Err(format!("`{s}` needs a unit: C or K")),
        u => return Err(format!("unknown temperature unit `{u}`; use C or K")),
    };
    if k <= 0.0 {
        return Err(format!("`{s}` is not above absolute zero"));
    }
    Ok(k)
}

/// Temperature difference in kelvin, from `-7K` or `10C`.
pub fn temperature_step(s: &str) -> Result<f64, String> {
    match split_number(s)? {
        (v, "K" | "k" | "C" | "c" | "degC") => Ok(v),
        (_, "") => Err(format!("`{s}` needs a unit: K or C")),
        (_, u) => Err(format!("unknown temperature unit `{u}`; use K or C")),
    }
}

/// Length in metres, from `10um`, `0.01mm`, `1e-5m` or `10000nm`.
pub fn length(s: &str) -> Result<f64, String> {
    let (v, unit) = split_number(s)?;
    // dividing keeps 10um exactly equal to the literal 1e-5
    let per_metre = match unit {
        "m" => 1.0,
        "mm" => 1e3,
        "um" | "µm" => 1e6,
        "nm" => 1e9,
        "" => return Err(format!("`{s}` needs a unit: m, mm, um or nm")),
        u => return Err(format!("unknown length unit `{u}`; use m, mm, um or nm")),
    };
    Ok(v / per_metre)
}
