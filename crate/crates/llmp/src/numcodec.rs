//! Conversion between numeric values and the digit-level strings that are
//! scored and sampled token-by-token.
//!
//! Values are rendered at a fixed number of decimal places, so each string
//! identifies one bin of width `10^-n`. The terminal separator that follows a
//! value in a prompt is *not* part of the string produced here; the prompt
//! layer appends it.

use thiserror::Error;

/// The ten digits plus decimal point and minus sign.
pub const DIGIT_TOKENS: [char; 12] = ['0', '1', '2', '3', '4', '5', '6', '7', '8', '9', '.', '-'];

#[derive(Debug, Error, PartialEq, Eq, Clone)]
pub enum NumError {
    #[error("value is NaN or infinite")]
    NonFinite,
    #[error("negative values are disallowed by the numeric format")]
    NegativeDisallowed,
    #[error("text does not contain a number")]
    NonNumeric,
    #[error("text is numeric but malformed: {0}")]
    Malformed(String),
}

/// Fixed-precision decimal format.
///
/// `precision` is the number of digits after the decimal point, so the
/// implied bin width is exactly `10^-precision`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct NumericFormat {
    pub precision: u32,
    pub allow_negative: bool,
}

impl Default for NumericFormat {
    fn default() -> Self {
        NumericFormat {
            precision: 2,
            allow_negative: true,
        }
    }
}

impl NumericFormat {
    pub fn new(precision: u32) -> Self {
        NumericFormat {
            precision,
            ..Default::default()
        }
    }

    /// Bin width `10^-precision`.
    pub fn bin_width(&self) -> f64 {
        10f64.powi(-(self.precision as i32))
    }

    /// The token set used when masking model logits: digits, point, sign
    /// (when negatives are allowed) and the terminal separator, if any.
    pub fn vocabulary(&self, terminal: Option<char>) -> NumericVocab {
        let mut tokens: Vec<char> = ('0'..='9').collect();
        tokens.push('.');
        if self.allow_negative {
            tokens.push('-');
        }
        if let Some(t) = terminal {
            tokens.push(t);
        }
        NumericVocab { tokens }
    }
}

/// Set of characters a masked token distribution is renormalized over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NumericVocab {
    tokens: Vec<char>,
}

impl NumericVocab {
    pub fn contains(&self, c: char) -> bool {
        self.tokens.contains(&c)
    }

    pub fn tokens(&self) -> &[char] {
        &self.tokens
    }

    /// Extends the vocabulary with separator characters, needed when a scored
    /// continuation carries several output values joined by a separator.
    pub fn with_separator(mut self, sep: &str) -> Self {
        for c in sep.chars() {
            if !self.tokens.contains(&c) {
                self.tokens.push(c);
            }
        }
        self
    }
}

/// Canonical digit string for one value: exactly `n` digits after the point
/// (no point when `n == 0`), no leading `+`, no `-0.00...`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NumericString(String);

impl NumericString {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl std::fmt::Display for NumericString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Rounds to `n` decimal places, halves away from zero.
///
/// Note the rule applies to the exact binary value of `y`: `round_to(2.675, 2)`
/// yields `2.67` because the closest f64 to 2.675 is slightly below it.
pub fn round_to(y: f64, n: u32) -> f64 {
    let scale = 10f64.powi(n as i32);
    let r = (y.abs() * scale + 0.5).floor();
    let v = r / scale;
    if y < 0.0 {
        -v
    } else {
        v
    }
}

/// Renders `y` rounded to the format's precision.
pub fn serialize_value(y: f64, fmt: &NumericFormat) -> Result<NumericString, NumError> {
    if !y.is_finite() {
        return Err(NumError::NonFinite);
    }
    if y < 0.0 && !fmt.allow_negative {
        return Err(NumError::NegativeDisallowed);
    }
    let n = fmt.precision as usize;
    let scale = 10f64.powi(fmt.precision as i32);
    let scaled = (y.abs() * scale + 0.5).floor();
    let mut digits = format!("{:.0}", scaled);
    if digits.len() <= n {
        // pad so there is always at least one integer digit
        digits = format!("{}{}", "0".repeat(n + 1 - digits.len()), digits);
    }
    let body = if n == 0 {
        digits
    } else {
        let split = digits.len() - n;
        format!("{}.{}", &digits[..split], &digits[split..])
    };
    // negative zero normalizes to zero so each bin has one canonical string
    let text = if y < 0.0 && scaled != 0.0 {
        format!("-{}", body)
    } else {
        body
    };
    Ok(NumericString(text))
}

/// Parses model output into a value, used by rejection sampling to decide
/// acceptance. Leading/trailing whitespace (including a newline terminal) is
/// trimmed. Only plain decimal literals are accepted, never scientific
/// notation. The sign is checked against the format's vocabulary, so `-5` is
/// non-numeric under a non-negative format.
pub fn parse_value(text: &str, fmt: &NumericFormat) -> Result<f64, NumError> {
    let s = text.trim();
    if s.is_empty() {
        return Err(NumError::NonNumeric);
    }
    for c in s.chars() {
        let in_vocab = c.is_ascii_digit() || c == '.' || (c == '-' && fmt.allow_negative);
        if !in_vocab {
            return Err(NumError::NonNumeric);
        }
    }
    let mut points = 0usize;
    let mut digits = 0usize;
    for (i, c) in s.chars().enumerate() {
        match c {
            '.' => points += 1,
            '-' if i != 0 => return Err(NumError::Malformed(s.to_string())),
            '-' => {}
            _ => digits += 1,
        }
    }
    if points > 1 || digits == 0 {
        return Err(NumError::Malformed(s.to_string()));
    }
    let value: f64 = s
        .parse()
        .map_err(|_| NumError::Malformed(s.to_string()))?;
    // a digit string long enough to overflow f64 is not a usable sample
    if !value.is_finite() {
        return Err(NumError::Malformed(s.to_string()));
    }
    Ok(value)
}

/// One token per character; concatenating the tokens reproduces the string.
pub fn tokenize_numeric(s: &NumericString) -> Vec<char> {
    s.as_str().chars().collect()
}

/// Serialize-then-parse: collapses a value onto its bin's canonical
/// representative.
pub fn canonicalize(y: f64, fmt: &NumericFormat) -> Result<f64, NumError> {
    parse_value(serialize_value(y, fmt)?.as_str(), fmt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fmt(n: u32) -> NumericFormat {
        NumericFormat::new(n)
    }

    #[test]
    fn serialize_integer_precision_zero() {
        assert_eq!(serialize_value(12.0, &fmt(0)).unwrap().as_str(), "12");
    }

    #[test]
    fn serialize_rounds_half_away_from_zero() {
        assert_eq!(serialize_value(2.537, &fmt(2)).unwrap().as_str(), "2.54");
        assert_eq!(serialize_value(2.5, &fmt(0)).unwrap().as_str(), "3");
        assert_eq!(serialize_value(-2.5, &fmt(0)).unwrap().as_str(), "-3");
    }

    #[test]
    fn serialize_keeps_sign() {
        assert_eq!(serialize_value(-0.5, &fmt(1)).unwrap().as_str(), "-0.5");
    }

    #[test]
    fn serialize_normalizes_negative_zero() {
        assert_eq!(serialize_value(-0.001, &fmt(2)).unwrap().as_str(), "0.00");
        assert_eq!(serialize_value(-0.0, &fmt(2)).unwrap().as_str(), "0.00");
    }

    #[test]
    fn serialize_pads_small_values() {
        assert_eq!(serialize_value(0.05, &fmt(2)).unwrap().as_str(), "0.05");
        assert_eq!(serialize_value(0.0, &fmt(3)).unwrap().as_str(), "0.000");
    }

    #[test]
    fn serialize_rejects_non_finite() {
        assert_eq!(serialize_value(f64::NAN, &fmt(2)), Err(NumError::NonFinite));
        assert_eq!(
            serialize_value(f64::INFINITY, &fmt(2)),
            Err(NumError::NonFinite)
        );
    }

    #[test]
    fn serialize_rejects_disallowed_negative() {
        let f = NumericFormat {
            precision: 2,
            allow_negative: false,
        };
        assert_eq!(serialize_value(-1.0, &f), Err(NumError::NegativeDisallowed));
    }

    #[test]
    fn parse_trims_terminal_whitespace() {
        assert_eq!(parse_value("3.14\n", &fmt(2)).unwrap(), 3.14);
        assert_eq!(parse_value("  7 ", &fmt(0)).unwrap(), 7.0);
    }

    #[test]
    fn parse_rejects_non_numbers() {
        assert_eq!(parse_value("NaN", &fmt(2)), Err(NumError::NonNumeric));
        assert_eq!(parse_value("", &fmt(2)), Err(NumError::NonNumeric));
        assert_eq!(parse_value("1e5", &fmt(2)), Err(NumError::NonNumeric));
    }

    #[test]
    fn parse_rejects_overflowing_literals() {
        let huge = "9".repeat(400);
        assert!(matches!(
            parse_value(&huge, &fmt(0)),
            Err(NumError::Malformed(_))
        ));
    }

    #[test]
    fn parse_rejects_malformed() {
        assert!(matches!(
            parse_value("1.2.3", &fmt(2)),
            Err(NumError::Malformed(_))
        ));
        assert!(matches!(
            parse_value("1-2", &fmt(2)),
            Err(NumError::Malformed(_))
        ));
        assert!(matches!(
            parse_value("-", &fmt(2)),
            Err(NumError::Malformed(_))
        ));
        assert!(matches!(
            parse_value(".", &fmt(2)),
            Err(NumError::Malformed(_))
        ));
    }

    #[test]
    fn parse_sign_respects_vocabulary() {
        let pos_only = NumericFormat {
            precision: 2,
            allow_negative: false,
        };
        assert_eq!(parse_value("-5", &pos_only), Err(NumError::NonNumeric));
        assert_eq!(parse_value("-5", &fmt(2)).unwrap(), -5.0);
    }

    #[test]
    fn tokenize_splits_per_character() {
        let s = serialize_value(12.5, &fmt(1)).unwrap();
        assert_eq!(tokenize_numeric(&s), vec!['1', '2', '.', '5']);
        let neg = serialize_value(-0.5, &fmt(1)).unwrap();
        assert_eq!(tokenize_numeric(&neg), vec!['-', '0', '.', '5']);
        let single = serialize_value(7.0, &fmt(0)).unwrap();
        assert_eq!(tokenize_numeric(&single), vec!['7']);
    }

    #[test]
    fn vocabulary_13_tokens_with_terminal() {
        let v = fmt(2).vocabulary(Some('\n'));
        assert_eq!(v.tokens().len(), 13);
        assert!(v.contains('\n'));
        assert!(v.contains('-'));
        assert!(!v.contains('x'));
    }

    proptest! {
        #[test]
        fn round_trip_equals_round(y in -1.0e6f64..1.0e6, n in 0u32..=4) {
            let f = fmt(n);
            let s = serialize_value(y, &f).unwrap();
            let back = parse_value(s.as_str(), &f).unwrap();
            prop_assert_eq!(back, round_to(y, n));
        }

        #[test]
        fn serialized_has_exact_precision(y in -1.0e6f64..1.0e6, n in 0u32..=4) {
            let s = serialize_value(y, &fmt(n)).unwrap();
            let text = s.as_str();
            if n == 0 {
                prop_assert!(!text.contains('.'));
            } else {
                let (_, frac) = text.split_once('.').unwrap();
                prop_assert_eq!(frac.len() as u32, n);
            }
        }

        #[test]
        fn round_trip_is_monotone(a in -1.0e4f64..1.0e4, b in -1.0e4f64..1.0e4, n in 0u32..=3) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let f = fmt(n);
            let lo_r = canonicalize(lo, &f).unwrap();
            let hi_r = canonicalize(hi, &f).unwrap();
            prop_assert!(lo_r <= hi_r);
        }

        #[test]
        fn tokenize_concat_is_identity(y in -1.0e6f64..1.0e6, n in 0u32..=4) {
            let s = serialize_value(y, &fmt(n)).unwrap();
            let joined: String = tokenize_numeric(&s).into_iter().collect();
            prop_assert_eq!(joined, s.as_str().to_string());
        }
    }
}
