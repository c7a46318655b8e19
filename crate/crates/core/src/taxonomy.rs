//! Apple's privacy-label vocabulary and the canonical label document.
//!
//! A label is a four-layer tree: usage category, purpose, data type, data
//! item. Only the item and purpose layers take part in consistency checks;
//! the category is carried along as evidence.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// The shipped vocabulary file. Must agree with the enums below.
pub const TAXONOMY_JSON: &str = include_str!("../data/taxonomy.json");

macro_rules! vocabulary {
    (
        $(#[$meta:meta])*
        $name:ident, $kind:literal {
            $( $variant:ident => $text:literal ),+ $(,)?
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $( $variant ),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[ $( $name::$variant ),+ ];

            /// Canonical display name as used in label documents.
            pub fn name(self) -> &'static str {
                match self {
                    $( $name::$variant => $text ),+
                }
            }

            pub fn from_name(token: &str) -> Option<Self> {
                match token {
                    $( $text => Some($name::$variant), )+
                    _ => None,
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                $name::from_name(s).ok_or_else(|| Error::unknown($kind, s))
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
                serializer.serialize_str(self.name())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(deserializer)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

vocabulary! {
    /// First layer of a label.
    UsageCategory, "category" {
        DataUsedToTrackYou => "Data Used to Track You",
        DataLinkedToYou => "Data Linked to You",
        DataNotLinkedToYou => "Data Not Linked to You",
        DataNotCollected => "Data Not Collected",
    }
}

vocabulary! {
    /// Second layer of a label: why a data item is collected.
    Purpose, "purpose" {
        ThirdPartyAdvertising => "Third-Party Advertising",
        DevelopersAdvertisingOrMarketing => "Developer's Advertising or Marketing",
        Analytics => "Analytics",
        ProductPersonalization => "Product Personalization",
        AppFunctionality => "App Functionality",
        OtherPurposes => "Other Purposes",
    }
}

vocabulary! {
    DataType, "data type" {
        ContactInfo => "Contact Info",
        HealthAndFitness => "Health & Fitness",
        FinancialInfo => "Financial Info",
        Location => "Location",
        SensitiveInfo => "Sensitive Info",
        Contacts => "Contacts",
        UserContent => "User Content",
        BrowsingHistory => "Browsing History",
        SearchHistory => "Search History",
        Identifiers => "Identifiers",
        Purchases => "Purchases",
        UsageData => "Usage Data",
        Diagnostics => "Diagnostics",
        OtherData => "Other Data",
    }
}

vocabulary! {
    /// Fourth layer of a label; the unit of every consistency check.
    DataItem, "data item" {
        Name => "Name",
        EmailAddress => "Email Address",
        PhoneNumber => "Phone Number",
        PhysicalAddress => "Physical Address",
        OtherUserContactInfo => "Other User Contact Info",
        Health => "Health",
        Fitness => "Fitness",
        PaymentInfo => "Payment Info",
        CreditInfo => "Credit Info",
        OtherFinancialInfo => "Other Financial Info",
        PreciseLocation => "Precise Location",
        CoarseLocation => "Coarse Location",
        SensitiveInfo => "Sensitive Info",
        Contacts => "Contacts",
        EmailsOrTextMessages => "Emails or Text Messages",
        PhotosOrVideos => "Photos or Videos",
        AudioData => "Audio Data",
        GameplayContent => "Gameplay Content",
        CustomerSupport => "Customer Support",
        OtherUserContent => "Other User Content",
        BrowsingHistory => "Browsing History",
        SearchHistory => "Search History",
        UserId => "User ID",
        DeviceId => "Device ID",
        PurchaseHistory => "Purchase History",
        ProductInteraction => "Product Interaction",
        AdvertisingData => "Advertising Data",
        OtherUsageData => "Other Usage Data",
        CrashData => "Crash Data",
        PerformanceData => "Performance Data",
        OtherDiagnosticData => "Other Diagnostic Data",
        OtherDataTypes => "Other Data Types",
    }
}

impl DataItem {
    pub fn data_type(self) -> DataType {
        use DataItem::*;
        match self {
            Name | EmailAddress | PhoneNumber | PhysicalAddress | OtherUserContactInfo => {
                DataType::ContactInfo
            }
            Health | Fitness => DataType::HealthAndFitness,
            PaymentInfo | CreditInfo | OtherFinancialInfo => DataType::FinancialInfo,
            PreciseLocation | CoarseLocation => DataType::Location,
            SensitiveInfo => DataType::SensitiveInfo,
            Contacts => DataType::Contacts,
            EmailsOrTextMessages | PhotosOrVideos | AudioData | GameplayContent
            | CustomerSupport | OtherUserContent => DataType::UserContent,
            BrowsingHistory => DataType::BrowsingHistory,
            SearchHistory => DataType::SearchHistory,
            UserId | DeviceId => DataType::Identifiers,
            PurchaseHistory => DataType::Purchases,
            ProductInteraction | AdvertisingData | OtherUsageData => DataType::UsageData,
            CrashData | PerformanceData | OtherDiagnosticData => DataType::Diagnostics,
            OtherDataTypes => DataType::OtherData,
        }
    }
}

pub fn data_type_of(item: DataItem) -> DataType {
    item.data_type()
}

/// One declared (item, purposes) pair.
///
/// An item listed under several categories is merged into a single statement
/// whose `categories` keeps every category it appeared under.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LabelStatement {
    pub item: DataItem,
    pub purposes: BTreeSet<Purpose>,
    pub categories: BTreeSet<UsageCategory>,
}

impl LabelStatement {
    pub fn new(
        item: DataItem,
        purposes: impl IntoIterator<Item = Purpose>,
        category: UsageCategory,
    ) -> Result<Self> {
        let statement = LabelStatement {
            item,
            purposes: purposes.into_iter().collect(),
            categories: BTreeSet::from([category]),
        };
        statement.validate()?;
        Ok(statement)
    }

    fn validate(&self) -> Result<()> {
        if self.purposes.is_empty() {
            return Err(Error::Validation(format!(
                "statement for `{}` has no purposes",
                self.item
            )));
        }
        if self.categories.is_empty() {
            return Err(Error::Validation(format!(
                "statement for `{}` has no category",
                self.item
            )));
        }
        if self.categories.contains(&UsageCategory::DataNotCollected) {
            return Err(Error::Validation(format!(
                "statement for `{}` under `Data Not Collected`",
                self.item
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivacyLabel {
    pub app_id: String,
    pub statements: Vec<LabelStatement>,
    pub not_collected: bool,
    pub no_details: bool,
}

impl PrivacyLabel {
    pub fn not_collected(app_id: impl Into<String>) -> Self {
        PrivacyLabel {
            app_id: app_id.into(),
            statements: Vec::new(),
            not_collected: true,
            no_details: false,
        }
    }

    pub fn with_statements(app_id: impl Into<String>, statements: Vec<LabelStatement>) -> Self {
        PrivacyLabel {
            app_id: app_id.into(),
            statements,
            not_collected: false,
            no_details: false,
        }
    }

    /// Serializes back into the canonical nested document.
    pub fn to_document(&self) -> LabelDocument {
        // category -> purpose -> type -> items
        let mut tree: BTreeMap<
            UsageCategory,
            BTreeMap<Purpose, BTreeMap<DataType, BTreeSet<DataItem>>>,
        > = BTreeMap::new();
        for statement in &self.statements {
            for &category in &statement.categories {
                for &purpose in &statement.purposes {
                    tree.entry(category)
                        .or_default()
                        .entry(purpose)
                        .or_default()
                        .entry(statement.item.data_type())
                        .or_default()
                        .insert(statement.item);
                }
            }
        }
        let mut privacy_types: Vec<PrivacyTypeDoc> = tree
            .into_iter()
            .map(|(category, purposes)| PrivacyTypeDoc {
                category: category.name().to_string(),
                purposes: purposes
                    .into_iter()
                    .map(|(purpose, types)| PurposeDoc {
                        purpose: purpose.name().to_string(),
                        data_types: types
                            .into_iter()
                            .map(|(data_type, items)| DataTypeDoc {
                                data_type: data_type.name().to_string(),
                                items: items.iter().map(|i| i.name().to_string()).collect(),
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect();
        if self.not_collected {
            privacy_types.push(PrivacyTypeDoc {
                category: UsageCategory::DataNotCollected.name().to_string(),
                purposes: Vec::new(),
            });
        }
        LabelDocument {
            app_id: self.app_id.clone(),
            privacy_types,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("label document serializes")
    }
}

/// Canonical label document, see README for the exact schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelDocument {
    pub app_id: String,
    pub privacy_types: Vec<PrivacyTypeDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacyTypeDoc {
    pub category: String,
    #[serde(default)]
    pub purposes: Vec<PurposeDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PurposeDoc {
    pub purpose: String,
    #[serde(default)]
    pub data_types: Vec<DataTypeDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataTypeDoc {
    pub data_type: String,
    #[serde(default)]
    pub items: Vec<String>,
}

/// Parses a label document from JSON text.
pub fn parse_label_json(text: &str) -> Result<PrivacyLabel> {
    let doc: LabelDocument = serde_json::from_str(text)?;
    parse_label(&doc)
}

/// Flattens a label document into statements.
///
/// An empty `privacy_types` list is read as "No Details Provided".
pub fn parse_label(doc: &LabelDocument) -> Result<PrivacyLabel> {
    let mut merged: BTreeMap<DataItem, LabelStatement> = BTreeMap::new();
    let mut not_collected = false;

    for privacy_type in &doc.privacy_types {
        let category: UsageCategory = privacy_type.category.parse()?;
        if category == UsageCategory::DataNotCollected {
            if !privacy_type.purposes.is_empty() {
                return Err(Error::Validation(
                    "`Data Not Collected` cannot list purposes or items".into(),
                ));
            }
            not_collected = true;
            continue;
        }
        for purpose_doc in &privacy_type.purposes {
            let purpose: Purpose = purpose_doc.purpose.parse()?;
            for type_doc in &purpose_doc.data_types {
                let data_type: DataType = type_doc.data_type.parse()?;
                for item_name in &type_doc.items {
                    let item: DataItem = item_name.parse()?;
                    if item.data_type() != data_type {
                        return Err(Error::Validation(format!(
                            "item `{item}` belongs to `{}`, not `{data_type}`",
                            item.data_type()
                        )));
                    }
                    let statement = merged.entry(item).or_insert_with(|| LabelStatement {
                        item,
                        purposes: BTreeSet::new(),
                        categories: BTreeSet::new(),
                    });
                    statement.purposes.insert(purpose);
                    statement.categories.insert(category);
                }
            }
        }
    }

    let statements: Vec<LabelStatement> = merged.into_values().collect();
    for statement in &statements {
        statement.validate()?;
    }
    if not_collected && !statements.is_empty() {
        return Err(Error::Validation(
            "label declares `Data Not Collected` alongside collected items".into(),
        ));
    }
    let no_details = doc.privacy_types.is_empty();
    Ok(PrivacyLabel {
        app_id: doc.app_id.clone(),
        statements,
        not_collected,
        no_details,
    })
}

/// Per-item purpose portfolio of a label, unioned across categories.
pub fn expand_label(label: &PrivacyLabel) -> BTreeMap<DataItem, BTreeSet<Purpose>> {
    let mut out: BTreeMap<DataItem, BTreeSet<Purpose>> = BTreeMap::new();
    for statement in &label.statements {
        out.entry(statement.item)
            .or_default()
            .extend(statement.purposes.iter().copied());
    }
    out
}

/// Shape of the shipped `taxonomy.json`.
#[derive(Debug, Clone, Deserialize)]
pub struct TaxonomyFile {
    pub version: String,
    pub categories: Vec<String>,
    pub purposes: Vec<String>,
    pub data_types: Vec<TaxonomyTypeEntry>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct TaxonomyTypeEntry {
    pub name: String,
    pub items: Vec<String>,
}

impl TaxonomyFile {
    pub fn bundled() -> Self {
        serde_json::from_str(TAXONOMY_JSON).expect("bundled taxonomy parses")
    }

    /// Checks that a taxonomy file names exactly the compiled-in vocabulary.
    pub fn check_against_vocabulary(&self) -> Result<()> {
        fn same<T: Copy>(
            kind: &str,
            file: &[String],
            all: &[T],
            name: fn(T) -> &'static str,
        ) -> Result<()> {
            let file: BTreeSet<&str> = file.iter().map(String::as_str).collect();
            let known: BTreeSet<&str> = all.iter().map(|v| name(*v)).collect();
            if file != known {
                return Err(Error::Validation(format!(
                    "taxonomy {kind} mismatch: file-only {:?}, vocabulary-only {:?}",
                    file.difference(&known).collect::<Vec<_>>(),
                    known.difference(&file).collect::<Vec<_>>()
                )));
            }
            Ok(())
        }
        same(
            "categories",
            &self.categories,
            UsageCategory::ALL,
            UsageCategory::name,
        )?;
        same("purposes", &self.purposes, Purpose::ALL, Purpose::name)?;
        let types: Vec<String> = self.data_types.iter().map(|t| t.name.clone()).collect();
        same("data types", &types, DataType::ALL, DataType::name)?;
        let mut items = Vec::new();
        for entry in &self.data_types {
            let data_type: DataType = entry.name.parse()?;
            for item in &entry.items {
                let parsed: DataItem = item.parse()?;
                if parsed.data_type() != data_type {
                    return Err(Error::Validation(format!(
                        "taxonomy places `{item}` under `{}`",
                        entry.name
                    )));
                }
                items.push(item.clone());
            }
        }
        if items.len() != DataItem::ALL.len() {
            return Err(Error::Validation("taxonomy lists an item twice".into()));
        }
        same("items", &items, DataItem::ALL, DataItem::name)
    }
}
