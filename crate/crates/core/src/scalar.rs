//! Typed measurement values and the literal grammar shared by profile bounds,
//! trigger constants and submitted data.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value as JsonValue;
use thiserror::Error;

/// Closed datatype vocabulary of a measurable value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Datatype {
    Integer,
    Decimal,
    /// Free text.
    Char,
    Boolean,
    /// `HH:MM`, 24-hour, zero padded.
    Time,
}

impl Datatype {
    pub const ALL: [Datatype; 5] =
        [Datatype::Integer, Datatype::Decimal, Datatype::Char, Datatype::Boolean, Datatype::Time];

    pub fn as_str(self) -> &'static str {
        match self {
            Datatype::Integer => "integer",
            Datatype::Decimal => "decimal",
            Datatype::Char => "char",
            Datatype::Boolean => "boolean",
            Datatype::Time => "time",
        }
    }

    /// Whether values of this type carry a total order (bounds and relations apply).
    pub fn is_ordered(self) -> bool {
        matches!(self, Datatype::Integer | Datatype::Decimal | Datatype::Time)
    }
}

impl fmt::Display for Datatype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown datatype `{0}`")]
pub struct UnknownDatatype(pub String);

impl FromStr for Datatype {
    type Err = UnknownDatatype;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Datatype::ALL.into_iter().find(|d| d.as_str() == s).ok_or_else(|| UnknownDatatype(s.to_string()))
    }
}

/// Minutes since midnight, rendered as `HH:MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TimeOfDay(u16);

impl TimeOfDay {
    pub fn new(hour: u8, minute: u8) -> Option<Self> {
        (hour < 24 && minute < 60).then(|| TimeOfDay(u16::from(hour) * 60 + u16::from(minute)))
    }

    pub fn hour(self) -> u8 {
        (self.0 / 60) as u8
    }

    pub fn minute(self) -> u8 {
        (self.0 % 60) as u8
    }

    pub fn minutes_since_midnight(self) -> u16 {
        self.0
    }
}

impl fmt::Display for TimeOfDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.hour(), self.minute())
    }
}

/// A parsed value whose variant always matches its datatype.
#[derive(Debug, Clone, PartialEq)]
pub enum Scalar {
    Integer(i64),
    Decimal(f64),
    Text(String),
    Boolean(bool),
    Time(TimeOfDay),
}

impl Scalar {
    pub fn datatype(&self) -> Datatype {
        match self {
            Scalar::Integer(_) => Datatype::Integer,
            Scalar::Decimal(_) => Datatype::Decimal,
            Scalar::Text(_) => Datatype::Char,
            Scalar::Boolean(_) => Datatype::Boolean,
            Scalar::Time(_) => Datatype::Time,
        }
    }

    /// Parses `raw` under the strict grammar of `datatype`.
    ///
    /// Surrounding whitespace is trimmed for every datatype.
    pub fn parse(raw: &str, datatype: Datatype) -> Option<Scalar> {
        let s = raw.trim();
        match datatype {
            Datatype::Integer => {
                let digits = s.strip_prefix(['+', '-']).unwrap_or(s);
                if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                    return None;
                }
                s.parse::<i64>().ok().map(Scalar::Integer)
            }
            Datatype::Decimal => {
                let body = s.strip_prefix(['+', '-']).unwrap_or(s);
                let (int_part, frac_part) = match body.split_once('.') {
                    Some((i, f)) => (i, Some(f)),
                    None => (body, None),
                };
                let all_digits = |p: &str| !p.is_empty() && p.bytes().all(|b| b.is_ascii_digit());
                if !all_digits(int_part) || !frac_part.is_none_or(all_digits) {
                    return None;
                }
                s.parse::<f64>().ok().filter(|v| v.is_finite()).map(Scalar::Decimal)
            }
            Datatype::Char => Some(Scalar::Text(s.to_string())),
            Datatype::Boolean => match s {
                "true" => Some(Scalar::Boolean(true)),
                "false" => Some(Scalar::Boolean(false)),
                _ => None,
            },
            Datatype::Time => {
                let b = s.as_bytes();
                if b.len() != 5 || b[2] != b':' {
                    return None;
                }
                let two = |hi: u8, lo: u8| -> Option<u8> {
                    (hi.is_ascii_digit() && lo.is_ascii_digit()).then(|| (hi - b'0') * 10 + (lo - b'0'))
                };
                let hour = two(b[0], b[1])?;
                let minute = two(b[3], b[4])?;
                TimeOfDay::new(hour, minute).map(Scalar::Time)
            }
        }
    }

    /// Total order for integer, decimal and time values of the same type.
    pub fn order(&self, other: &Scalar) -> Option<Ordering> {
        match (self, other) {
            (Scalar::Integer(a), Scalar::Integer(b)) => Some(a.cmp(b)),
            (Scalar::Decimal(a), Scalar::Decimal(b)) => a.partial_cmp(b),
            (Scalar::Time(a), Scalar::Time(b)) => Some(a.cmp(b)),
            _ => None,
        }
    }

    /// Absolute distance between two ordered values of the same type.
    /// Time distances are in minutes.
    pub fn distance(&self, other: &Scalar) -> Option<f64> {
        match (self, other) {
            (Scalar::Integer(a), Scalar::Integer(b)) => Some((i128::from(*a) - i128::from(*b)).unsigned_abs() as f64),
            (Scalar::Decimal(a), Scalar::Decimal(b)) => Some((a - b).abs()),
            (Scalar::Time(a), Scalar::Time(b)) => {
                Some(f64::from(a.minutes_since_midnight().abs_diff(b.minutes_since_midnight())))
            }
            _ => None,
        }
    }

    pub fn to_json(&self) -> JsonValue {
        match self {
            Scalar::Integer(v) => JsonValue::from(*v),
            Scalar::Decimal(v) => JsonValue::from(*v),
            Scalar::Text(v) => JsonValue::from(v.as_str()),
            Scalar::Boolean(v) => JsonValue::from(*v),
            Scalar::Time(v) => JsonValue::from(v.to_string()),
        }
    }

    /// Inverse of [`Scalar::to_json`], guided by the declared datatype.
    pub fn from_json(datatype: Datatype, value: &JsonValue) -> Option<Scalar> {
        match (datatype, value) {
            (Datatype::Integer, JsonValue::Number(n)) => n.as_i64().map(Scalar::Integer),
            (Datatype::Decimal, JsonValue::Number(n)) => n.as_f64().map(Scalar::Decimal),
            (Datatype::Char, JsonValue::String(s)) => Some(Scalar::Text(s.clone())),
            (Datatype::Boolean, JsonValue::Bool(b)) => Some(Scalar::Boolean(*b)),
            (Datatype::Time, JsonValue::String(s)) => Scalar::parse(s, Datatype::Time),
            _ => None,
        }
    }
}

/// JSON form `{"datatype": ..., "value": ...}`, self-describing so stored
/// records can be read without the profile they were validated against.
impl Serialize for Scalar {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("Scalar", 2)?;
        st.serialize_field("datatype", &self.datatype())?;
        st.serialize_field("value", &self.to_json())?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Tagged {
            datatype: Datatype,
            value: JsonValue,
        }
        let t = Tagged::deserialize(deserializer)?;
        Scalar::from_json(t.datatype, &t.value)
            .ok_or_else(|| serde::de::Error::custom(format!("value does not match datatype {}", t.datatype)))
    }
}

/// Literal form; re-parses to an equal value under the same datatype.
impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Integer(v) => write!(f, "{v}"),
            Scalar::Decimal(v) => write!(f, "{v}"),
            Scalar::Text(v) => f.write_str(v),
            Scalar::Boolean(v) => write!(f, "{v}"),
            Scalar::Time(v) => write!(f, "{v}"),
        }
    }
}

/// Comparison operator shared by relations and trigger conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompareOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CompareOp {
    pub const ALL: [CompareOp; 6] =
        [CompareOp::Lt, CompareOp::Le, CompareOp::Gt, CompareOp::Ge, CompareOp::Eq, CompareOp::Ne];

    pub fn as_str(self) -> &'static str {
        match self {
            CompareOp::Lt => "lt",
            CompareOp::Le => "le",
            CompareOp::Gt => "gt",
            CompareOp::Ge => "ge",
            CompareOp::Eq => "eq",
            CompareOp::Ne => "ne",
        }
    }

    pub fn is_equality(self) -> bool {
        matches!(self, CompareOp::Eq | CompareOp::Ne)
    }

    /// Evaluates `left op right`. `None` when the operands are not comparable
    /// under this operator (mixed types, or ordering on text/boolean).
    pub fn holds(self, left: &Scalar, right: &Scalar) -> Option<bool> {
        if left.datatype() != right.datatype() {
            return None;
        }
        if self.is_equality() && !left.datatype().is_ordered() {
            let eq = left == right;
            return Some(if self == CompareOp::Eq { eq } else { !eq });
        }
        let ord = left.order(right)?;
        Some(match self {
            CompareOp::Lt => ord == Ordering::Less,
            CompareOp::Le => ord != Ordering::Greater,
            CompareOp::Gt => ord == Ordering::Greater,
            CompareOp::Ge => ord != Ordering::Less,
            CompareOp::Eq => ord == Ordering::Equal,
            CompareOp::Ne => ord != Ordering::Equal,
        })
    }
}

impl fmt::Display for CompareOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown comparison operator `{0}`")]
pub struct UnknownOp(pub String);

impl FromStr for CompareOp {
    type Err = UnknownOp;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CompareOp::ALL.into_iter().find(|op| op.as_str() == s).ok_or_else(|| UnknownOp(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_grammar() {
        assert_eq!(Scalar::parse("0", Datatype::Integer), Some(Scalar::Integer(0)));
        assert_eq!(Scalar::parse(" -12 ", Datatype::Integer), Some(Scalar::Integer(-12)));
        assert_eq!(Scalar::parse("+7", Datatype::Integer), Some(Scalar::Integer(7)));
        for bad in ["abc", "", "-", "1.0", "1e3", "١", "99999999999999999999"] {
            assert_eq!(Scalar::parse(bad, Datatype::Integer), None, "{bad}");
        }
    }

    #[test]
    fn decimal_grammar() {
        assert_eq!(Scalar::parse("36.6", Datatype::Decimal), Some(Scalar::Decimal(36.6)));
        assert_eq!(Scalar::parse("-2", Datatype::Decimal), Some(Scalar::Decimal(-2.0)));
        for bad in [".5", "5.", "1e3", "NaN", "inf", "1..2", "+"] {
            assert_eq!(Scalar::parse(bad, Datatype::Decimal), None, "{bad}");
        }
        let huge = format!("1{}", "0".repeat(400));
        assert_eq!(Scalar::parse(&huge, Datatype::Decimal), None);
    }

    #[test]
    fn time_grammar() {
        assert_eq!(Scalar::parse("07:05", Datatype::Time), Some(Scalar::Time(TimeOfDay::new(7, 5).unwrap())));
        assert_eq!(Scalar::parse("23:59", Datatype::Time).unwrap().to_string(), "23:59");
        for bad in ["24:00", "7:05", "07:60", "0705", "07:5", "ab:cd"] {
            assert_eq!(Scalar::parse(bad, Datatype::Time), None, "{bad}");
        }
    }

    #[test]
    fn boolean_and_char() {
        assert_eq!(Scalar::parse("true", Datatype::Boolean), Some(Scalar::Boolean(true)));
        assert_eq!(Scalar::parse("True", Datatype::Boolean), None);
        assert_eq!(Scalar::parse("  left arm ", Datatype::Char), Some(Scalar::Text("left arm".into())));
    }

    #[test]
    fn ordering_ops_reject_text() {
        let a = Scalar::Text("a".into());
        let b = Scalar::Text("b".into());
        assert_eq!(CompareOp::Lt.holds(&a, &b), None);
        assert_eq!(CompareOp::Ne.holds(&a, &b), Some(true));
        assert_eq!(CompareOp::Eq.holds(&Scalar::Integer(1), &Scalar::Decimal(1.0)), None);
    }

    #[test]
    fn json_round_trip() {
        for s in [
            Scalar::Integer(-3),
            Scalar::Decimal(0.1),
            Scalar::Text("x".into()),
            Scalar::Boolean(false),
            Scalar::Time(TimeOfDay::new(8, 0).unwrap()),
        ] {
            assert_eq!(Scalar::from_json(s.datatype(), &s.to_json()), Some(s));
        }
    }
}
