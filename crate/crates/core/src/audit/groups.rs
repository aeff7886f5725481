use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::DatasetTable;
use crate::error::{Error, Result};
use crate::outlier::{OutlierAssignment, Space};

pub const DEFAULT_MIN_SUPPORT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKind {
    Binary,
    Intersection,
    Union,
    Outlier,
}

/// A named predicate over binary labels or outlier flags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub name: String,
    pub kind: GroupKind,
    /// Demographic channels, or the outlier space name for `Outlier`.
    pub members: Vec<String>,
    pub min_support: usize,
}

impl GroupSpec {
    pub fn binary(channel: &str) -> Self {
        GroupSpec {
            name: channel.to_string(),
            kind: GroupKind::Binary,
            members: vec![channel.to_string()],
            min_support: 0,
        }
    }

    pub fn intersection(a: &str, b: &str, min_support: usize) -> Self {
        GroupSpec {
            name: format!("{a}&{b}"),
            kind: GroupKind::Intersection,
            members: vec![a.to_string(), b.to_string()],
            min_support,
        }
    }

    pub fn union(name: &str, members: &[String]) -> Self {
        GroupSpec {
            name: name.to_string(),
            kind: GroupKind::Union,
            members: members.to_vec(),
            min_support: 0,
        }
    }

    pub fn outlier(space: Space) -> Self {
        GroupSpec {
            name: space.group_name(),
            kind: GroupKind::Outlier,
            members: vec![space.as_str().to_string()],
            min_support: 0,
        }
    }

    fn check_arity(&self) -> Result<()> {
        let ok = match self.kind {
            GroupKind::Binary | GroupKind::Outlier => self.members.len() == 1,
            GroupKind::Intersection => self.members.len() == 2 && self.members[0] != self.members[1],
            GroupKind::Union => self.members.len() >= 2,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "group `{}` has an invalid member list for {:?}",
                self.name, self.kind
            )))
        }
    }

    /// Evaluates the predicate on every row. Outlier groups need `assignment`.
    pub fn resolve(&self, table: &DatasetTable, assignment: Option<&OutlierAssignment>) -> Result<Membership> {
        self.check_arity()?;
        let labels = |name: &str| -> Result<&[bool]> {
            let col = table
                .demographic(name)
                .ok_or_else(|| Error::Config(format!("group `{}` references unknown channel `{name}`", self.name)))?;
            col.binary
                .as_deref()
                .ok_or_else(|| Error::Config("group membership requires binarized labels".into()))
        };
        let n = table.n_rows();
        let mask = match self.kind {
            GroupKind::Binary => labels(&self.members[0])?.to_vec(),
            GroupKind::Intersection => {
                let (a, b) = (labels(&self.members[0])?, labels(&self.members[1])?);
                (0..n).map(|r| a[r] && b[r]).collect()
            }
            GroupKind::Union => {
                let cols: Vec<&[bool]> = self.members.iter().map(|m| labels(m)).collect::<Result<_>>()?;
                (0..n).map(|r| cols.iter().any(|c| c[r])).collect()
            }
            GroupKind::Outlier => {
                let space: Space = self.members[0].parse()?;
                let a =
                    assignment.ok_or_else(|| Error::Config(format!("group `{}` needs outlier flags", self.name)))?;
                a.flags(space)?.to_vec()
            }
        };
        Ok(Membership {
            name: self.name.clone(),
            mask,
        })
    }
}

/// A resolved group: one flag per table row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Membership {
    pub name: String,
    pub mask: Vec<bool>,
}

impl Membership {
    pub fn new(name: impl Into<String>, mask: Vec<bool>) -> Self {
        Membership {
            name: name.into(),
            mask,
        }
    }

    pub fn size(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemaName {
    Marginalized,
    Binary,
    Intersectional,
    Outlier,
}

impl SchemaName {
    pub const BREAKDOWNS: [SchemaName; 3] = [SchemaName::Marginalized, SchemaName::Binary, SchemaName::Intersectional];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemaName::Marginalized => "marginalized",
            SchemaName::Binary => "binary",
            SchemaName::Intersectional => "intersectional",
            SchemaName::Outlier => "outlier",
        }
    }
}

impl fmt::Display for SchemaName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemaName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "marginalized" => Ok(SchemaName::Marginalized),
            "binary" => Ok(SchemaName::Binary),
            "intersectional" => Ok(SchemaName::Intersectional),
            "outlier" => Ok(SchemaName::Outlier),
            other => Err(Error::Config(format!("unknown breakdown schema `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarginalizedUnion {
    pub name: String,
    pub members: Vec<String>,
}

fn union_def(name: &str, members: &[&str]) -> MarginalizedUnion {
    MarginalizedUnion {
        name: name.to_string(),
        members: members.iter().map(|m| m.to_string()).collect(),
    }
}

/// People of color, gender minorities, sexual minorities, U.S. religious
/// minorities and disabled people, over the Jigsaw identity columns.
pub fn default_marginalized_unions() -> Vec<MarginalizedUnion> {
    vec![
        union_def(
            "people_of_color",
            &["black", "latino", "asian", "other_race_or_ethnicity"],
        ),
        union_def("gender_minorities", &["female", "other_gender"]),
        union_def(
            "sexual_minorities",
            &["homosexual_gay_or_lesbian", "bisexual", "other_sexual_orientation"],
        ),
        union_def(
            "religious_minorities",
            &["atheist", "buddhist", "hindu", "jewish", "muslim", "other_religion"],
        ),
        union_def(
            "disabled_people",
            &[
                "intellectual_or_learning_disability",
                "physical_disability",
                "psychiatric_or_mental_illness",
                "other_disability",
            ],
        ),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownOptions {
    #[serde(default = "default_min_support")]
    pub min_support: usize,
    #[serde(default = "default_marginalized_unions")]
    pub unions: Vec<MarginalizedUnion>,
    #[serde(default = "all_spaces")]
    pub spaces: Vec<Space>,
}

fn default_min_support() -> usize {
    DEFAULT_MIN_SUPPORT
}

fn all_spaces() -> Vec<Space> {
    Space::ALL.to_vec()
}

impl Default for BreakdownOptions {
    fn default() -> Self {
        BreakdownOptions {
            min_support: DEFAULT_MIN_SUPPORT,
            unions: default_marginalized_unions(),
            spaces: all_spaces(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownSchema {
    pub name: SchemaName,
    pub groups: Vec<GroupSpec>,
}

/// Builds the groups of a breakdown schema.
///
/// * `binary`: one group per demographic channel.
/// * `intersectional`: every unordered pair of channels whose joint-positive
///   support is at least `min_support`.
/// * `marginalized`: the configured unions.
/// * `outlier`: one group per configured outlier space.
pub fn enumerate_groups(
    table: &DatasetTable,
    schema_name: &str,
    options: &BreakdownOptions,
) -> Result<BreakdownSchema> {
    let name: SchemaName = schema_name.parse()?;
    if name != SchemaName::Outlier && !table.is_binarized() {
        return Err(Error::Config("group enumeration requires binarized labels".into()));
    }
    let demo = table.demographic_columns();
    let groups = match name {
        SchemaName::Binary => demo.iter().map(|c| GroupSpec::binary(&c.name)).collect(),
        SchemaName::Intersectional => {
            let mut out = Vec::new();
            for i in 0..demo.len() {
                for j in i + 1..demo.len() {
                    let (a, b) = (demo[i].labels(), demo[j].labels());
                    let support = a.iter().zip(b).filter(|&(&x, &y)| x && y).count();
                    if support >= options.min_support {
                        out.push(GroupSpec::intersection(
                            &demo[i].name,
                            &demo[j].name,
                            options.min_support,
                        ));
                    }
                }
            }
            out
        }
        SchemaName::Marginalized => {
            let mut out = Vec::new();
            for u in &options.unions {
                if let Some(m) = u.members.iter().find(|m| table.demographic(m).is_none()) {
                    return Err(Error::Config(format!(
                        "union `{}` references unknown channel `{m}`",
                        u.name
                    )));
                }
                out.push(GroupSpec::union(&u.name, &u.members));
            }
            out
        }
        SchemaName::Outlier => options.spaces.iter().map(|&s| GroupSpec::outlier(s)).collect(),
    };
    let mut seen = std::collections::BTreeSet::new();
    for g in &groups {
        if !seen.insert(&g.name) {
            return Err(Error::Config(format!("duplicate group name `{}`", g.name)));
        }
    }
    Ok(BreakdownSchema { name, groups })
}
