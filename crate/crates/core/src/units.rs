//! Engineering-notation formatting for reports.

const PREFIXES: [(f64, &str); 9] = [
    (1e9, "G"),
    (1e6, "M"),
    (1e3, "k"),
    (1.0, ""),
    (1e-3, "m"),
    (1e-6, "µ"),
    (1e-9, "n"),
    (1e-12, "p"),
    (1e-15, "f"),
];

/// `value` with an SI prefix and four significant digits, e.g. `40.00 nF`.
pub fn eng(value: f64, unit: &str) -> String {
    if value.is_infinite() {
        let sign = if value < 0.0 { "-" } else { "" };
        return format!("{sign}∞ {unit}");
    }
    if value == 0.0 || value.is_nan() {
        return format!("{value} {unit}");
    }
    let mag = value.abs();
    let (scale, prefix) = PREFIXES
        .iter()
        .copied()
        .find(|&(s, _)| mag >= s * (1.0 - 5e-5))
        .unwrap_or(PREFIXES[PREFIXES.len() - 1]);
    let scaled = value / scale;
    let decimals = match scaled.abs() {
        m if m >= 99.995 => 1,
        m if m >= 9.9995 => 2,
        _ => 3,
    };
    format!("{scaled:.decimals$} {prefix}{unit}")
}
