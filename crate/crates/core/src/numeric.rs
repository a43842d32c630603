//! Exact rational parsing and rendering helpers.

use num::bigint::BigInt;
use num::{BigRational, One, Signed, ToPrimitive, Zero};

/// Parses a plain decimal numeral ("12", "2.5") into an exact rational.
pub fn parse_decimal(s: &str) -> Option<BigRational> {
    let (int_part, frac_part) = match s.split_once('.') {
        Some((i, f)) if !i.is_empty() && !f.is_empty() => (i, f),
        Some(_) => return None,
        None => (s, ""),
    };
    if int_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let digits: String = format!("{int_part}{frac_part}");
    let numer: BigInt = digits.parse().ok()?;
    let denom = BigInt::from(10u32).pow(frac_part.len() as u32);
    Some(BigRational::new(numer, denom))
}

/// Parses a number literal as it appears in answer fields or problem
/// text: decimals, percentages ("20%" -> 1/5), fractions ("3/4", also
/// parenthesized "(3/8)"), scientific notation ("1e-4"), and a leading
/// sign.
pub fn parse_number_literal(s: &str) -> Option<BigRational> {
    let s = s.trim();
    let (sign, s) = match s.strip_prefix('-') {
        Some(rest) => (-1, rest.trim()),
        None => (1, s),
    };
    let s = s.strip_prefix('+').unwrap_or(s).trim();
    let value = parse_unsigned_literal(s)?;
    Some(if sign < 0 { -value } else { value })
}

fn parse_unsigned_literal(s: &str) -> Option<BigRational> {
    if s.is_empty() {
        return None;
    }
    let inner = s
        .strip_prefix('(')
        .and_then(|rest| rest.strip_suffix(')'));
    if let Some(inner) = inner {
        return parse_unsigned_literal(inner.trim());
    }
    if let Some(body) = s.strip_suffix('%') {
        let v = parse_unsigned_literal(body.trim())?;
        return Some(v / BigRational::from_integer(100.into()));
    }
    if let Some((numer, denom)) = s.split_once('/') {
        let n = parse_decimal(numer.trim())?;
        let d = parse_decimal(denom.trim())?;
        if d.is_zero() {
            return None;
        }
        return Some(n / d);
    }
    if let Some((mantissa, exponent)) = s.split_once(['e', 'E']) {
        let m = parse_decimal(mantissa.trim())?;
        let e: i32 = exponent.trim().parse().ok()?;
        let scale = BigRational::from_integer(BigInt::from(10u32).pow(e.unsigned_abs()));
        return Some(if e >= 0 { m * scale } else { m / scale });
    }
    parse_decimal(s)
}

/// Exact decimal rendering with trailing zeros trimmed, when the reduced
/// denominator divides a power of ten; `None` otherwise.
pub fn render_decimal(r: &BigRational) -> Option<String> {
    let mut denom = r.denom().clone();
    let mut twos = 0u32;
    let mut fives = 0u32;
    let two = BigInt::from(2);
    let five = BigInt::from(5);
    while (&denom % &two).is_zero() {
        denom /= &two;
        twos += 1;
    }
    while (&denom % &five).is_zero() {
        denom /= &five;
        fives += 1;
    }
    if !denom.is_one() {
        return None;
    }
    let places = twos.max(fives);
    let scaled = r * BigRational::from_integer(BigInt::from(10u32).pow(places));
    debug_assert!(scaled.is_integer());
    let digits = scaled.to_integer().abs().to_string();
    let sign = if r.is_negative() { "-" } else { "" };
    if places == 0 {
        return Some(format!("{sign}{digits}"));
    }
    let digits = format!("{:0>width$}", digits, width = places as usize + 1);
    let split = digits.len() - places as usize;
    let (int_part, frac_part) = digits.split_at(split);
    let frac_part = frac_part.trim_end_matches('0');
    Some(if frac_part.is_empty() {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac_part}")
    })
}

/// Decimal when exact, otherwise a parenthesized fraction ("(1/3)") so
/// the rendering stays atomic inside a larger expression.
pub fn decimal_or_fraction(r: &BigRational) -> String {
    match render_decimal(r) {
        Some(d) if !r.is_negative() => d,
        Some(d) => format!("({d})"),
        None => format!("({}/{})", r.numer(), r.denom()),
    }
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// Serde adapter storing rationals as exact strings: plain decimals when
/// terminating ("2.5"), "n/d" otherwise.
pub mod rational_string {
    use super::*;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &BigRational, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&to_string(value))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<BigRational, D::Error> {
        let text = String::deserialize(deserializer)?;
        from_string(&text).ok_or_else(|| serde::de::Error::custom(format!("bad rational `{text}`")))
    }

    pub fn to_string(value: &BigRational) -> String {
        match render_decimal(value) {
            Some(d) => d,
            None => format!("{}/{}", value.numer(), value.denom()),
        }
    }

    pub fn from_string(text: &str) -> Option<BigRational> {
        parse_number_literal(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn decimal_parsing_is_exact() {
        assert_eq!(parse_decimal("12").unwrap(), rat(12, 1));
        assert_eq!(parse_decimal("2.5").unwrap(), rat(5, 2));
        assert_eq!(parse_decimal("0.1").unwrap(), rat(1, 10));
        assert!(parse_decimal("2.").is_none());
        assert!(parse_decimal("abc").is_none());
    }

    #[test]
    fn literal_forms() {
        assert_eq!(parse_number_literal("20%").unwrap(), rat(1, 5));
        assert_eq!(parse_number_literal("3/4").unwrap(), rat(3, 4));
        assert_eq!(parse_number_literal("(3/8)").unwrap(), rat(3, 8));
        assert_eq!(parse_number_literal("1e-4").unwrap(), rat(1, 10000));
        assert_eq!(parse_number_literal("2.5E2").unwrap(), rat(250, 1));
        assert_eq!(parse_number_literal("-4").unwrap(), rat(-4, 1));
        assert_eq!(parse_number_literal("25%").unwrap(), rat(1, 4));
        assert!(parse_number_literal("1/0").is_none());
    }

    #[test]
    fn decimal_rendering_trims_zeros() {
        assert_eq!(render_decimal(&rat(5, 2)).unwrap(), "2.5");
        assert_eq!(render_decimal(&rat(250, 100)).unwrap(), "2.5");
        assert_eq!(render_decimal(&rat(4, 1)).unwrap(), "4");
        assert_eq!(render_decimal(&rat(1, 8)).unwrap(), "0.125");
        assert_eq!(render_decimal(&rat(-3, 4)).unwrap(), "-0.75");
        assert_eq!(render_decimal(&rat(1, 3)), None);
    }

    #[test]
    fn fraction_fallback_is_parenthesized() {
        assert_eq!(decimal_or_fraction(&rat(1, 3)), "(1/3)");
        assert_eq!(decimal_or_fraction(&rat(5, 2)), "2.5");
        assert_eq!(decimal_or_fraction(&rat(-5, 2)), "(-2.5)");
    }

    #[test]
    fn rational_string_round_trips() {
        for r in [rat(1, 3), rat(5, 2), rat(-7, 20), rat(100, 1)] {
            let s = rational_string::to_string(&r);
            assert_eq!(rational_string::from_string(&s).unwrap(), r, "{s}");
        }
    }
}
