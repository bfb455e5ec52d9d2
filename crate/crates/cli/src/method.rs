use std::fmt;
use std::str::FromStr;

use oodkit_core::detectors::Variant;
use oodkit_core::Error;

/// A scoring method as named on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Msp,
    Llr,
    Maha(Variant),
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Msp => "msp",
            Method::Llr => "llr",
            Method::Maha(Variant::Classwise) => "maha",
            Method::Maha(Variant::Marginal) => "maha-marginal",
            Method::Maha(Variant::PartialClasswise) => "maha-partial",
            Method::Maha(Variant::PartialMarginal) => "maha-partial-marginal",
            Method::Maha(Variant::Euclidean) => "euclidean",
            Method::Maha(Variant::EuclideanMarginal) => "euclidean-marginal",
        }
    }

    pub fn variant(self) -> Option<Variant> {
        match self {
            Method::Maha(v) => Some(v),
            _ => None,
        }
    }

    pub fn all() -> Vec<Method> {
        let mut all = vec![Method::Msp, Method::Llr];
        all.extend(Variant::ALL.into_iter().map(Method::Maha));
        all
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Method::all().into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let names: Vec<_> = Method::all().iter().map(|m| m.name()).collect();
            Error::InvalidArgument(format!("unknown variant {s:?}; expected one of {}", names.join(", ")))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for m in Method::all() {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("mahalanobis".parse::<Method>().is_err());
    }
}
