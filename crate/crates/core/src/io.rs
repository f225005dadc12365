//! Serialization helpers shared by the output formats.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

/// A float written with 17 significant digits, which round-trips every `f64`
/// bit for bit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sig17(pub f64);

impl Serialize for Sig17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(serde::ser::Error::custom(format!("cannot serialize non-finite value {}", self.0)));
        }
        let raw = RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Sig17 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        f64::deserialize(d).map(Sig17)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(serde_json::to_string(&Sig17(0.1)).unwrap(), "1.0000000000000001e-1");
        assert_eq!(serde_json::to_string(&Sig17(-3.0)).unwrap(), "-3.0000000000000000e0");
    }

    proptest! {
        #[test]
        fn bit_faithful(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            prop_assume!(v.is_finite());
            let text = serde_json::to_string(&Sig17(v)).unwrap();
            let back: Sig17 = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back.0.to_bits(), v.to_bits());
        }
    }
}
