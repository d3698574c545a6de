//! Unit expressions as exact dimension vectors.
//!
//! A unit is an integer exponent per base dimension plus a positive scale
//! relative to the canonical base units (m, kg, s, A, K, mol, cd, bit).
//! Every scale in the token table has the form 2^a·3^b·5^c, kept as exact
//! exponents rather than floats.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Base dimensions, in vector order.
pub const BASE_DIMENSIONS: [&str; 8] = [
    "length",
    "mass",
    "time",
    "current",
    "temperature",
    "amount",
    "luminosity",
    "information",
];

const LENGTH: usize = 0;
const MASS: usize = 1;
const TIME: usize = 2;
const CURRENT: usize = 3;
const TEMPERATURE: usize = 4;
const AMOUNT: usize = 5;
const LUMINOSITY: usize = 6;
const INFORMATION: usize = 7;

/// Largest absolute exponent allowed on any base dimension.
pub const MAX_EXPONENT: i32 = 8;

/// Offset between the celsius and kelvin scales.
pub const CELSIUS_OFFSET: f64 = 273.15;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnitError {
    #[error("unknown unit token `{token}`")]
    UnknownUnitToken { token: String },
    #[error("malformed unit expression `{expr}`: {reason}")]
    MalformedUnitExpression { expr: String, reason: String },
    #[error("incompatible dimensions: cannot convert `{from}` to `{to}`")]
    IncompatibleDimensions { from: String, to: String },
}

fn malformed(expr: &str, reason: impl Into<String>) -> UnitError {
    UnitError::MalformedUnitExpression {
        expr: expr.to_string(),
        reason: reason.into(),
    }
}

/// Exact positive rational of the form 2^a · 3^b · 5^c.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Scale {
    two: i32,
    three: i32,
    five: i32,
}

impl Scale {
    pub const ONE: Scale = Scale {
        two: 0,
        three: 0,
        five: 0,
    };

    pub const fn new(two: i32, three: i32, five: i32) -> Self {
        Scale { two, three, five }
    }

    pub const fn pow10(exp: i32) -> Self {
        Scale::new(exp, 0, exp)
    }

    pub fn powi(self, exp: i32) -> Scale {
        Scale::new(self.two * exp, self.three * exp, self.five * exp)
    }

    /// Integer numerator and denominator as floats. Both are exact while
    /// they stay below 2^53.
    fn parts(self) -> (f64, f64) {
        let mut num = 1.0f64;
        let mut den = 1.0f64;
        for (base, exp) in [(2.0f64, self.two), (3.0, self.three), (5.0, self.five)] {
            if exp >= 0 {
                num *= base.powi(exp);
            } else {
                den *= base.powi(-exp);
            }
        }
        (num, den)
    }

    pub fn to_f64(self) -> f64 {
        let (num, den) = self.parts();
        num / den
    }

    /// `value × self` with a single rounding for the common cases.
    pub fn apply(self, value: f64) -> f64 {
        let (num, den) = self.parts();
        value * num / den
    }
}

impl std::ops::Mul for Scale {
    type Output = Scale;

    fn mul(self, other: Scale) -> Scale {
        Scale::new(
            self.two + other.two,
            self.three + other.three,
            self.five + other.five,
        )
    }
}

impl std::ops::Div for Scale {
    type Output = Scale;

    fn div(self, other: Scale) -> Scale {
        Scale::new(
            self.two - other.two,
            self.three - other.three,
            self.five - other.five,
        )
    }
}

/// Dimension exponents plus scale. `celsius` marks the affine °C unit,
/// which only ever appears on its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct UnitVector {
    dims: [i8; 8],
    scale: Scale,
    celsius: bool,
}

impl UnitVector {
    pub const DIMENSIONLESS: UnitVector = UnitVector {
        dims: [0; 8],
        scale: Scale::ONE,
        celsius: false,
    };

    fn base(dim: usize, exp: i8, scale: Scale) -> Self {
        let mut dims = [0i8; 8];
        dims[dim] = exp;
        UnitVector {
            dims,
            scale,
            celsius: false,
        }
    }

    pub fn dims(&self) -> [i8; 8] {
        self.dims
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn is_affine(&self) -> bool {
        self.celsius
    }

    pub fn is_dimensionless(&self) -> bool {
        self.dims == [0; 8]
    }

    pub fn exponent(&self, dimension: &str) -> Option<i8> {
        BASE_DIMENSIONS
            .iter()
            .position(|d| *d == dimension)
            .map(|i| self.dims[i])
    }

    /// The unit of frequencies (time⁻¹).
    pub fn is_frequency(&self) -> bool {
        self.dims == UnitVector::base(TIME, -1, Scale::ONE).dims
    }

    pub fn is_time(&self) -> bool {
        self.dims == UnitVector::base(TIME, 1, Scale::ONE).dims
    }

    pub fn is_information(&self) -> bool {
        self.dims == UnitVector::base(INFORMATION, 1, Scale::ONE).dims
    }

    pub fn is_data_rate(&self) -> bool {
        let mut dims = [0i8; 8];
        dims[INFORMATION] = 1;
        dims[TIME] = -1;
        self.dims == dims
    }
}

struct TokenDef {
    symbol: &'static str,
    unit: fn() -> UnitVector,
    prefixable: bool,
}

const TOKENS: &[TokenDef] = &[
    TokenDef {
        symbol: "m",
        unit: || UnitVector::base(LENGTH, 1, Scale::ONE),
        prefixable: true,
    },
    TokenDef {
        symbol: "kg",
        unit: || UnitVector::base(MASS, 1, Scale::ONE),
        prefixable: false,
    },
    TokenDef {
        symbol: "s",
        unit: || UnitVector::base(TIME, 1, Scale::ONE),
        prefixable: true,
    },
    TokenDef {
        symbol: "A",
        unit: || UnitVector::base(CURRENT, 1, Scale::ONE),
        prefixable: true,
    },
    TokenDef {
        symbol: "K",
        unit: || UnitVector::base(TEMPERATURE, 1, Scale::ONE),
        prefixable: true,
    },
    TokenDef {
        symbol: "mol",
        unit: || UnitVector::base(AMOUNT, 1, Scale::ONE),
        prefixable: true,
    },
    TokenDef {
        symbol: "cd",
        unit: || UnitVector::base(LUMINOSITY, 1, Scale::ONE),
        prefixable: true,
    },
    TokenDef {
        symbol: "Hz",
        unit: || UnitVector::base(TIME, -1, Scale::ONE),
        prefixable: true,
    },
    TokenDef {
        symbol: "min",
        unit: || UnitVector::base(TIME, 1, Scale::new(2, 1, 1)),
        prefixable: false,
    },
    TokenDef {
        symbol: "h",
        unit: || UnitVector::base(TIME, 1, Scale::new(4, 2, 2)),
        prefixable: false,
    },
    TokenDef {
        symbol: "ms",
        unit: || UnitVector::base(TIME, 1, Scale::pow10(-3)),
        prefixable: false,
    },
    TokenDef {
        symbol: "us",
        unit: || UnitVector::base(TIME, 1, Scale::pow10(-6)),
        prefixable: false,
    },
    TokenDef {
        symbol: "km",
        unit: || UnitVector::base(LENGTH, 1, Scale::pow10(3)),
        prefixable: false,
    },
    TokenDef {
        symbol: "bit",
        unit: || UnitVector::base(INFORMATION, 1, Scale::ONE),
        prefixable: true,
    },
    TokenDef {
        symbol: "B",
        unit: || UnitVector::base(INFORMATION, 1, Scale::new(3, 0, 0)),
        prefixable: true,
    },
    TokenDef {
        symbol: "°C",
        unit: || UnitVector {
            celsius: true,
            ..UnitVector::base(TEMPERATURE, 1, Scale::ONE)
        },
        prefixable: false,
    },
];

const PREFIXES: &[(char, i32)] = &[
    ('k', 3),
    ('M', 6),
    ('G', 9),
    ('m', -3),
    ('u', -6),
    ('n', -9),
];

/// Every token symbol in the unit table.
pub fn token_symbols() -> impl Iterator<Item = &'static str> {
    TOKENS.iter().map(|t| t.symbol)
}

/// Prefix characters with their decimal exponents.
pub fn prefixes() -> &'static [(char, i32)] {
    PREFIXES
}

/// Whether `symbol` accepts an SI prefix.
pub fn is_prefixable(symbol: &str) -> bool {
    TOKENS.iter().any(|t| t.symbol == symbol && t.prefixable)
}

fn lookup_symbol(symbol: &str) -> Option<UnitVector> {
    if let Some(def) = TOKENS.iter().find(|t| t.symbol == symbol) {
        return Some((def.unit)());
    }
    let mut chars = symbol.chars();
    let first = chars.next()?;
    let rest = chars.as_str();
    let (_, exp) = PREFIXES.iter().find(|(p, _)| *p == first)?;
    let def = TOKENS.iter().find(|t| t.symbol == rest && t.prefixable)?;
    let mut unit = (def.unit)();
    unit.scale = unit.scale * Scale::pow10(*exp);
    Some(unit)
}

fn parse_exponent(expr: &str, text: &str) -> Result<i32, UnitError> {
    let digits = text.strip_prefix(['+', '-']).unwrap_or(text);
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
        return Err(malformed(expr, format!("invalid exponent `{text}`")));
    }
    text.parse::<i32>()
        .map_err(|_| malformed(expr, format!("exponent `{text}` out of range")))
}

/// Parses a unit expression such as `Mbit/s` or `m·s^-2`.
pub fn parse_unit(expr: &str) -> Result<UnitVector, UnitError> {
    let expr = expr.trim();
    if expr.is_empty() {
        return Err(malformed(expr, "empty expression"));
    }
    if expr == "1" {
        return Ok(UnitVector::DIMENSIONLESS);
    }

    let mut dims = [0i32; 8];
    let mut scale = Scale::ONE;
    let mut celsius = false;
    let mut terms = 0usize;

    let mut rest = expr;
    let mut sign = 1i32;
    loop {
        let end = rest.find(['/', '·', '*']).unwrap_or(rest.len());
        let term = &rest[..end];
        if term.is_empty() {
            return Err(malformed(expr, "missing term"));
        }
        if term.chars().any(char::is_whitespace) {
            return Err(malformed(expr, "whitespace inside expression"));
        }
        let (symbol, exponent) = match term.split_once('^') {
            Some((symbol, exp)) => (symbol, parse_exponent(expr, exp)?),
            None => (term, 1),
        };
        if symbol == "1" {
            return Err(malformed(expr, "`1` is only valid on its own"));
        }
        if symbol.is_empty() {
            return Err(malformed(expr, "missing unit token before `^`"));
        }
        let unit = lookup_symbol(symbol).ok_or_else(|| UnitError::UnknownUnitToken {
            token: symbol.to_string(),
        })?;
        if unit.celsius {
            celsius = true;
        }
        let exp = sign * exponent;
        for (acc, d) in dims.iter_mut().zip(unit.dims) {
            *acc += i32::from(d) * exp;
            if acc.abs() > 64 {
                return Err(malformed(expr, "dimension exponent out of range"));
            }
        }
        scale = scale * unit.scale.powi(exp);
        terms += 1;

        if end == rest.len() {
            break;
        }
        let op = rest[end..].chars().next().unwrap_or('*');
        sign = if op == '/' { -1 } else { 1 };
        rest = &rest[end + op.len_utf8()..];
    }

    if celsius && (terms != 1 || dims[TEMPERATURE] != 1) {
        return Err(malformed(expr, "°C cannot be composed with other units"));
    }
    let mut out = [0i8; 8];
    for (o, d) in out.iter_mut().zip(dims) {
        if d.abs() > MAX_EXPONENT {
            return Err(malformed(
                expr,
                format!("dimension exponent {d} outside [-{MAX_EXPONENT}, {MAX_EXPONENT}]"),
            ));
        }
        *o = d as i8;
    }
    Ok(UnitVector {
        dims: out,
        scale,
        celsius,
    })
}

/// Same dimension exponents; scales may differ.
pub fn units_compatible(a: &UnitVector, b: &UnitVector) -> bool {
    a.dims == b.dims
}

/// Converts a value between compatible units, applying the °C offset.
pub fn convert_value(value: f64, from: &UnitVector, to: &UnitVector) -> Option<f64> {
    if !units_compatible(from, to) {
        return None;
    }
    if !from.celsius && !to.celsius {
        return Some((from.scale / to.scale).apply(value));
    }
    let kelvin = if from.celsius {
        value + CELSIUS_OFFSET
    } else {
        from.scale.apply(value)
    };
    Some(if to.celsius {
        kelvin - CELSIUS_OFFSET
    } else {
        kelvin / to.scale.to_f64()
    })
}

/// Converts a magnitude (a difference of values), never applying offsets.
pub fn convert_difference(value: f64, from: &UnitVector, to: &UnitVector) -> Option<f64> {
    units_compatible(from, to).then(|| (from.scale / to.scale).apply(value))
}

/// A parsed unit expression that remembers how it was written.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Unit {
    expr: String,
    vector: UnitVector,
}

impl Unit {
    pub fn parse(expr: &str) -> Result<Self, UnitError> {
        let vector = parse_unit(expr)?;
        Ok(Unit {
            expr: expr.trim().to_string(),
            vector,
        })
    }

    pub fn dimensionless() -> Self {
        Unit {
            expr: "1".into(),
            vector: UnitVector::DIMENSIONLESS,
        }
    }

    pub fn expr(&self) -> &str {
        &self.expr
    }

    pub fn vector(&self) -> &UnitVector {
        &self.vector
    }

    pub fn compatible(&self, other: &Unit) -> bool {
        units_compatible(&self.vector, &other.vector)
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.expr)
    }
}

impl FromStr for Unit {
    type Err = UnitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Unit::parse(s)
    }
}

impl Serialize for Unit {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.expr)
    }
}

impl<'de> Deserialize<'de> for Unit {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Unit::parse(&text).map_err(serde::de::Error::custom)
    }
}

/// A finite value with its unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub value: f64,
    pub unit: Unit,
}

impl Quantity {
    pub fn new(value: f64, unit: Unit) -> Self {
        Quantity { value, unit }
    }

    /// Parses `"<number> <unit>"`.
    pub fn parse(text: &str) -> Result<Self, UnitError> {
        let text = text.trim();
        let (number, unit) = text
            .split_once(char::is_whitespace)
            .ok_or_else(|| malformed(text, "expected `<number> <unit>`"))?;
        let value: f64 = number
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| malformed(text, format!("invalid number `{number}`")))?;
        Ok(Quantity {
            value,
            unit: Unit::parse(unit)?,
        })
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }

    /// Value expressed in the canonical base unit of its dimension.
    pub fn base_value(&self) -> f64 {
        if self.unit.vector.celsius {
            self.value + CELSIUS_OFFSET
        } else {
            self.unit.vector.scale.apply(self.value)
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}",
            crate::canonical::format_decimal(self.value),
            self.unit
        )
    }
}

/// Converts `q` into `target`.
pub fn convert(q: &Quantity, target: &Unit) -> Result<Quantity, UnitError> {
    let value = convert_value(q.value, &q.unit.vector, &target.vector).ok_or_else(|| {
        UnitError::IncompatibleDimensions {
            from: q.unit.expr.clone(),
            to: target.expr.clone(),
        }
    })?;
    Ok(Quantity {
        value,
        unit: target.clone(),
    })
}
