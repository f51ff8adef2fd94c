//! Canonical signal labels of the form `<element>.<l|r>.<p|q|T>`.
//!
//! Every state, input and output of every model carries one of these; CSV
//! headers and output selections are matched on the rendered string.

use std::fmt;
use std::str::FromStr;

use crate::error::Error;

/// Pipe flange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "l",
            Side::Right => "r",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quantity {
    Pressure,
    Flow,
    Temperature,
}

impl Quantity {
    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::Pressure => "p",
            Quantity::Flow => "q",
            Quantity::Temperature => "T",
        }
    }
}

/// A physical signal at one flange of one element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignalLabel {
    pub element: String,
    pub side: Side,
    pub quantity: Quantity,
}

impl SignalLabel {
    pub fn new(element: impl Into<String>, side: Side, quantity: Quantity) -> Self {
        Self {
            element: element.into(),
            side,
            quantity,
        }
    }

    pub fn pressure(element: &str, side: Side) -> Self {
        Self::new(element, side, Quantity::Pressure)
    }

    pub fn flow(element: &str, side: Side) -> Self {
        Self::new(element, side, Quantity::Flow)
    }

    pub fn temperature(element: &str, side: Side) -> Self {
        Self::new(element, side, Quantity::Temperature)
    }
}

impl fmt::Display for SignalLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}.{}.{}",
            self.element,
            self.side.as_str(),
            self.quantity.as_str()
        )
    }
}

/// Identifiers name elements and pipes: ASCII letters, digits, `_` and `-`,
/// not starting with a digit or `-`.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl FromStr for SignalLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || Error::config(format!("malformed signal label '{s}'"));
        let mut parts = s.split('.');
        let (Some(element), Some(side), Some(quantity), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(bad());
        };
        if !is_identifier(element) {
            return Err(bad());
        }
        let side = match side {
            "l" => Side::Left,
            "r" => Side::Right,
            _ => return Err(bad()),
        };
        let quantity = match quantity {
            "p" => Quantity::Pressure,
            "q" => Quantity::Flow,
            "T" => Quantity::Temperature,
            _ => return Err(bad()),
        };
        Ok(SignalLabel::new(element, side, quantity))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn renders_canonically() {
        let l = SignalLabel::pressure("P3", Side::Right);
        assert_eq!(l.to_string(), "P3.r.p");
        assert_eq!(
            SignalLabel::temperature("pipe_a", Side::Left).to_string(),
            "pipe_a.l.T"
        );
    }

    #[test]
    fn rejects_malformed() {
        for s in ["", "P3", "P3.r", "P3.x.p", "P3.r.t", "3P.r.p", "P.3.r.p", "P3.r.p."] {
            assert!(s.parse::<SignalLabel>().is_err(), "{s}");
        }
    }

    fn label_strategy() -> impl Strategy<Value = SignalLabel> {
        (
            "[A-Za-z_][A-Za-z0-9_-]{0,8}",
            prop_oneof![Just(Side::Left), Just(Side::Right)],
            prop_oneof![
                Just(Quantity::Pressure),
                Just(Quantity::Flow),
                Just(Quantity::Temperature)
            ],
        )
            .prop_map(|(e, s, q)| SignalLabel::new(e, s, q))
    }

    proptest! {
        #[test]
        fn label_round_trips(l in label_strategy()) {
            let back: SignalLabel = l.to_string().parse().unwrap();
            prop_assert_eq!(back, l);
        }
    }
}
