//! Registry of contract award notice fields, their types and display names,
//! plus the operator matrix that says which filter operators apply to which type.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::SchemaError;

/// Semantic type of a field.
///
/// Dates are `String`: they are stored ISO-formatted so lexicographic order is
/// calendar order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DataType {
    String,
    Factor,
    Integer,
}

impl DataType {
    pub const ALL: [DataType; 3] = [DataType::String, DataType::Factor, DataType::Integer];

    pub fn as_str(self) -> &'static str {
        match self {
            DataType::String => "String",
            DataType::Factor => "Factor",
            DataType::Integer => "Integer",
        }
    }

    /// Tag used by the OTED file format.
    pub fn tag(self) -> u8 {
        match self {
            DataType::String => 0,
            DataType::Factor => 1,
            DataType::Integer => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<DataType> {
        match tag {
            0 => Some(DataType::String),
            1 => Some(DataType::Factor),
            2 => Some(DataType::Integer),
            _ => None,
        }
    }

    /// Operators admissible for this type, in display order.
    pub fn operators(self) -> &'static [Operator] {
        use Operator::*;
        match self {
            DataType::String => &[
                Equal,
                NotEqual,
                Less,
                LessOrEqual,
                Greater,
                GreaterOrEqual,
                Between,
                In,
                NotIn,
                BeginsWith,
                EndsWith,
                IsNull,
                IsNotNull,
            ],
            DataType::Factor => &[Equal, NotEqual, IsNull, IsNotNull],
            DataType::Integer => &[
                Equal,
                NotEqual,
                Less,
                LessOrEqual,
                Greater,
                GreaterOrEqual,
                Between,
                In,
                NotIn,
                IsNull,
                IsNotNull,
            ],
        }
    }

    pub fn allows(self, op: Operator) -> bool {
        self.operators().contains(&op)
    }
}

impl fmt::Display for DataType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Filter operator identifiers, spelled on the wire with underscores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operator {
    Equal,
    NotEqual,
    Less,
    LessOrEqual,
    Greater,
    GreaterOrEqual,
    Between,
    In,
    NotIn,
    BeginsWith,
    EndsWith,
    IsNull,
    IsNotNull,
}

impl Operator {
    pub const ALL: [Operator; 13] = [
        Operator::Equal,
        Operator::NotEqual,
        Operator::Less,
        Operator::LessOrEqual,
        Operator::Greater,
        Operator::GreaterOrEqual,
        Operator::Between,
        Operator::In,
        Operator::NotIn,
        Operator::BeginsWith,
        Operator::EndsWith,
        Operator::IsNull,
        Operator::IsNotNull,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Operator::Equal => "equal",
            Operator::NotEqual => "not_equal",
            Operator::Less => "less",
            Operator::LessOrEqual => "less_or_equal",
            Operator::Greater => "greater",
            Operator::GreaterOrEqual => "greater_or_equal",
            Operator::Between => "between",
            Operator::In => "in",
            Operator::NotIn => "not_in",
            Operator::BeginsWith => "begins_with",
            Operator::EndsWith => "ends_with",
            Operator::IsNull => "is_null",
            Operator::IsNotNull => "is_not_null",
        }
    }

    /// Number of operands the operator takes.
    pub fn arity(self) -> Arity {
        match self {
            Operator::IsNull | Operator::IsNotNull => Arity::Exactly(0),
            Operator::Between => Arity::Exactly(2),
            Operator::In | Operator::NotIn => Arity::AtLeast(1),
            _ => Arity::Exactly(1),
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Operator {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Operator::ALL
            .iter()
            .copied()
            .find(|op| op.as_str() == s)
            .ok_or_else(|| SchemaError::UnknownOperator(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    Exactly(usize),
    AtLeast(usize),
}

impl Arity {
    pub fn accepts(self, n: usize) -> bool {
        match self {
            Arity::Exactly(k) => n == k,
            Arity::AtLeast(k) => n >= k,
        }
    }
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arity::Exactly(k) => write!(f, "exactly {k}"),
            Arity::AtLeast(k) => write!(f, "at least {k}"),
        }
    }
}

/// Checks an operator identifier against a type's row of the operator matrix.
pub fn operator_allowed(data_type: DataType, operator: &str) -> Result<bool, SchemaError> {
    let op: Operator = operator.parse()?;
    Ok(data_type.allows(op))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldDescriptor {
    pub source_name: &'static str,
    pub display_name: &'static str,
    pub data_type: DataType,
    pub highlighted: bool,
}

/// Source names of fields the rest of the engine refers to directly.
pub mod fields {
    pub const ID_NOTICE_CAN: &str = "ID_NOTICE_CAN";
    pub const YEAR: &str = "YEAR";
    pub const DT_DISPATCH: &str = "DT_DISPATCH";
    pub const CAE_NAME: &str = "CAE_NAME";
    pub const ISO_COUNTRY_CODE: &str = "ISO_COUNTRY_CODE";
    pub const WIN_NAME: &str = "WIN_NAME";
    pub const WIN_COUNTRY_CODE: &str = "WIN_COUNTRY_CODE";
    pub const CPV: &str = "CPV";
    pub const ADDITIONAL_CPVS: &str = "ADDITIONAL_CPVS";
    pub const VALUE_EURO: &str = "VALUE_EURO";
    pub const NUMBER_OFFERS: &str = "NUMBER_OFFERS";
    pub const DT_AWARD: &str = "DT_AWARD";
}

const fn plain(name: &'static str, data_type: DataType) -> FieldDescriptor {
    FieldDescriptor {
        source_name: name,
        display_name: name,
        data_type,
        highlighted: false,
    }
}

const fn renamed(name: &'static str, display: &'static str, data_type: DataType) -> FieldDescriptor {
    FieldDescriptor {
        source_name: name,
        display_name: display,
        data_type,
        highlighted: true,
    }
}

const BUILTIN_FIELDS: [FieldDescriptor; 48] = {
    use DataType::{Factor, Integer, String as Text};
    [
        // notice metadata
        renamed("ID_NOTICE_CAN", "Award_Notice_Id_Link", Text),
        plain("YEAR", Integer),
        plain("ID_TYPE", Factor),
        renamed("DT_DISPATCH", "Dispatch_Date", Text),
        plain("XSD_VERSION", Factor),
        plain("CANCELLED", Factor),
        // contracting authority
        renamed("CAE_NAME", "Contracting_Authority_Name", Text),
        plain("CAE_NATIONALID", Text),
        plain("CAE_ADDRESS", Text),
        plain("CAE_TOWN", Text),
        plain("CAE_POSTAL_CODE", Text),
        renamed("ISO_COUNTRY_CODE", "Contracting_Authority_Country", Factor),
        // winning bidder
        renamed("WIN_NAME", "Contractor_Name", Text),
        plain("WIN_ADDRESS", Text),
        plain("WIN_TOWN", Text),
        plain("WIN_POSTAL_CODE", Text),
        renamed("WIN_COUNTRY_CODE", "Contractor_Country", Factor),
        // CAN level
        plain("CAE_TYPE", Factor),
        plain("MAIN_ACTIVITY", Text),
        plain("B_ON_BEHALF", Factor),
        plain("TYPE_OF_CONTRACT", Factor),
        plain("TAL_LOCATION_NUTS", Text),
        plain("B_FRA_AGREEMENT", Factor),
        plain("B_DYN_PURCH_SYST", Factor),
        renamed("CPV", "CPV_Code", Text),
        plain("ADDITIONAL_CPVS", Text),
        plain("B_GPA", Factor),
        renamed("VALUE_EURO", "Contract_Value_Euros", Integer),
        plain("VALUE_EURO_FIN_1", Integer),
        plain("VALUE_EURO_FIN_2", Integer),
        plain("TOP_TYPE", Factor),
        plain("CRIT_CODE", Factor),
        plain("CRIT_CRITERIA", Text),
        plain("CRIT_WEIGHTS", Text),
        plain("B_ELECTRONIC_AUCTION", Factor),
        plain("NUMBER_AWARDS", Integer),
        // CA level
        plain("ID_AWARD", Text),
        plain("CONTRACT_NUMBER", Text),
        plain("LOT_NUMBER", Text),
        plain("TITLE", Text),
        renamed("NUMBER_OFFERS", "Number_Offers_Received", Integer),
        plain("NUMBER_OFFERS_ELECTR", Integer),
        plain("AWARD_EST_VALUE_EURO", Integer),
        plain("AWARD_VALUE_EURO", Integer),
        plain("AWARD_VALUE_EURO_FIN_1", Integer),
        plain("B_SUBCONTRACTED", Factor),
        plain("B_EU_FUNDS", Factor),
        plain("DT_AWARD", Text),
    ]
};

/// The field registry. Immutable once built.
#[derive(Debug)]
pub struct Schema {
    fields: Vec<FieldDescriptor>,
    by_name: HashMap<&'static str, usize>,
}

impl Schema {
    pub fn new(fields: Vec<FieldDescriptor>) -> Result<Schema, SchemaError> {
        let mut by_name = HashMap::new();
        for (idx, f) in fields.iter().enumerate() {
            if by_name.insert(f.source_name, idx).is_some() {
                return Err(SchemaError::DuplicateName(f.source_name.to_string()));
            }
            if f.display_name != f.source_name && by_name.insert(f.display_name, idx).is_some() {
                return Err(SchemaError::DuplicateName(f.display_name.to_string()));
            }
        }
        Ok(Schema { fields, by_name })
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn fields(&self) -> &[FieldDescriptor] {
        &self.fields
    }

    /// Resolves a source or display name to the field's position.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    /// Like [`Schema::index_of`], but for names known to be in the registry.
    pub fn expect_index(&self, name: &str) -> usize {
        self.index_of(name)
            .unwrap_or_else(|| panic!("field {name} is not in the schema"))
    }

    pub fn field(&self, name: &str) -> Option<&FieldDescriptor> {
        self.index_of(name).map(|i| &self.fields[i])
    }

    pub fn field_at(&self, idx: usize) -> &FieldDescriptor {
        &self.fields[idx]
    }

    pub fn highlighted(&self) -> impl Iterator<Item = &FieldDescriptor> {
        self.fields.iter().filter(|f| f.highlighted)
    }
}

/// The 48-field registry of the curated CAN export.
pub fn builtin_schema() -> Arc<Schema> {
    static SCHEMA: OnceLock<Arc<Schema>> = OnceLock::new();
    SCHEMA
        .get_or_init(|| Arc::new(Schema::new(BUILTIN_FIELDS.to_vec()).expect("builtin schema is valid")))
        .clone()
}
