use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::SimError;

/// The activity alphabet of the loan process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivityKind {
    InitiateApplication,
    ChooseProcedure,
    CallCustomer,
    ContactHq,
    ValidateApplication,
    CalculateOffer,
    ReceiveAcceptance,
    ReceiveRefusal,
    CancelApplication,
}

impl ActivityKind {
    pub const ALL: [ActivityKind; 9] = [
        ActivityKind::InitiateApplication,
        ActivityKind::ChooseProcedure,
        ActivityKind::CallCustomer,
        ActivityKind::ContactHq,
        ActivityKind::ValidateApplication,
        ActivityKind::CalculateOffer,
        ActivityKind::ReceiveAcceptance,
        ActivityKind::ReceiveRefusal,
        ActivityKind::CancelApplication,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActivityKind::InitiateApplication => "initiate_application",
            ActivityKind::ChooseProcedure => "choose_procedure",
            ActivityKind::CallCustomer => "call_customer",
            ActivityKind::ContactHq => "contact_hq",
            ActivityKind::ValidateApplication => "validate_application",
            ActivityKind::CalculateOffer => "calculate_offer",
            ActivityKind::ReceiveAcceptance => "receive_acceptance",
            ActivityKind::ReceiveRefusal => "receive_refusal",
            ActivityKind::CancelApplication => "cancel_application",
        }
    }

    /// Position in [`ActivityKind::ALL`]; used for count features and stream
    /// occurrence numbering.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ActivityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActivityKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        ActivityKind::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| SimError::InvalidArgument(format!("unknown activity '{s}'")))
    }
}

/// Which parallel branch an event ran on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Main,
    /// Customer-contact loop.
    A,
    /// Headquarters contact.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Procedure {
    Standard,
    Priority,
}

impl Procedure {
    pub fn name(self) -> &'static str {
        match self {
            Procedure::Standard => "standard",
            Procedure::Priority => "priority",
        }
    }
}

/// The three offerable interest rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum InterestRate {
    #[serde(rename = "0.07")]
    R07,
    #[serde(rename = "0.08")]
    R08,
    #[serde(rename = "0.09")]
    R09,
}

impl InterestRate {
    pub const ALL: [InterestRate; 3] = [InterestRate::R07, InterestRate::R08, InterestRate::R09];

    pub fn value(self) -> f64 {
        match self {
            InterestRate::R07 => 0.07,
            InterestRate::R08 => 0.08,
            InterestRate::R09 => 0.09,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InterestRate::R07 => "0.07",
            InterestRate::R08 => "0.08",
            InterestRate::R09 => "0.09",
        }
    }

    pub fn from_value(v: f64) -> Option<Self> {
        InterestRate::ALL.into_iter().find(|r| (r.value() - v).abs() < 1e-9)
    }
}
