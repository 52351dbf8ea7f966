//! Comparing two algorithms over the parameter values analyzed for both.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use thiserror::Error;

use crate::analyzer::{AnalysisFlags, Characteristics};
use crate::qterm::ParamKey;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// The first algorithm has the smaller sum.
    Less,
    Equal,
    Greater,
}

impl Verdict {
    pub fn of(delta: i128) -> Verdict {
        match delta.cmp(&0) {
            Ordering::Less => Verdict::Less,
            Ordering::Equal => Verdict::Equal,
            Ordering::Greater => Verdict::Greater,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Verdict::Less => "less",
            Verdict::Equal => "equal",
            Verdict::Greater => "greater",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComparisonReport {
    pub shared: Vec<ParamKey>,
    /// Sum over shared keys of `D_a - D_b`.
    pub delta_d: i128,
    pub delta_p: i128,
    pub verdict_d: Verdict,
    pub verdict_p: Verdict,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CompareError {
    #[error("comparison is not possible: the algorithms share no parameter values")]
    NoCommonParameters,
    #[error("characteristics were computed under different counting flags")]
    MixedProvenance,
    #[error("parameter values {0} appear twice on one side")]
    DuplicateKey(ParamKey),
}

fn index(side: &[Characteristics]) -> Result<BTreeMap<&ParamKey, &Characteristics>, CompareError> {
    let mut m = BTreeMap::new();
    for c in side {
        if m.insert(&c.key, c).is_some() {
            return Err(CompareError::DuplicateKey(c.key.clone()));
        }
    }
    Ok(m)
}

pub fn compare(a: &[Characteristics], b: &[Characteristics]) -> Result<ComparisonReport, CompareError> {
    let mut flags: Option<AnalysisFlags> = None;
    for c in a.iter().chain(b) {
        match flags {
            None => flags = Some(c.flags),
            Some(f) if f != c.flags => return Err(CompareError::MixedProvenance),
            _ => {}
        }
    }
    let (ia, ib) = (index(a)?, index(b)?);
    let mut shared = Vec::new();
    let (mut dd, mut dp) = (0i128, 0i128);
    for (k, ca) in &ia {
        if let Some(cb) = ib.get(k) {
            shared.push((*k).clone());
            dd += ca.d as i128 - cb.d as i128;
            dp += ca.p as i128 - cb.p as i128;
        }
    }
    if shared.is_empty() {
        return Err(CompareError::NoCommonParameters);
    }
    Ok(ComparisonReport {
        shared,
        delta_d: dd,
        delta_p: dp,
        verdict_d: Verdict::of(dd),
        verdict_p: Verdict::of(dp),
    })
}
