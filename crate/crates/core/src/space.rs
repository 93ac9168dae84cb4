//! Configuration spaces: typed option definitions, concrete configurations,
//! uniform sampling and reduced (pinned) sub-spaces.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::RoleMap;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Continuous,
    Integer,
    Boolean,
    Categorical,
}

impl OptionKind {
    pub fn is_numeric(self) -> bool {
        matches!(self, OptionKind::Continuous | OptionKind::Integer)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    Interval { lo: f64, hi: f64 },
    Levels(Vec<String>),
}

/// A tagged option value. No implicit coercion happens between tags.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Value {
    Float(f64),
    Int(i64),
    /// Index into the option's level list.
    Level(usize),
}

impl Value {
    /// Numeric view: floats and ints as-is, levels as their integer code.
    pub fn as_f64(self) -> f64 {
        match self {
            Value::Float(v) => v,
            Value::Int(v) => v as f64,
            Value::Level(i) => i as f64,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptionDef {
    name: String,
    kind: OptionKind,
    domain: Domain,
    default: Value,
    fixed: bool,
}

impl OptionDef {
    pub fn new(
        name: impl Into<String>,
        kind: OptionKind,
        domain: Domain,
        default: Value,
        fixed: bool,
    ) -> Result<Self> {
        let name = name.into();
        let bad = |reason: String| Error::InvalidValue {
            option: name.clone(),
            reason,
        };
        match (&kind, &domain) {
            (OptionKind::Continuous | OptionKind::Integer, Domain::Interval { lo, hi }) => {
                if !(lo.is_finite() && hi.is_finite()) {
                    return Err(bad("interval bounds must be finite".into()));
                }
                // A degenerate interval only makes sense for an option pinned in place.
                if lo > hi || (lo == hi && !fixed) {
                    return Err(bad(format!("empty interval [{lo}, {hi}]")));
                }
                if kind == OptionKind::Integer && (lo.fract() != 0.0 || hi.fract() != 0.0) {
                    return Err(bad("integer bounds must be whole numbers".into()));
                }
            }
            (OptionKind::Boolean | OptionKind::Categorical, Domain::Levels(levels)) => {
                if levels.is_empty() {
                    return Err(bad("level list is empty".into()));
                }
                let uniq: BTreeSet<&String> = levels.iter().collect();
                if uniq.len() != levels.len() {
                    return Err(bad("duplicate levels".into()));
                }
                if kind == OptionKind::Boolean && levels.len() != 2 {
                    return Err(bad("boolean options have exactly two levels".into()));
                }
            }
            _ => return Err(bad(format!("domain does not match kind {kind:?}"))),
        }
        let def = OptionDef {
            name: name.clone(),
            kind,
            domain,
            default,
            fixed,
        };
        if !def.contains(default) {
            return Err(Error::InvalidValue {
                option: name,
                reason: format!("default {default:?} outside domain"),
            });
        }
        Ok(def)
    }

    pub fn continuous(name: &str, lo: f64, hi: f64, default: f64) -> Result<Self> {
        Self::new(
            name,
            OptionKind::Continuous,
            Domain::Interval { lo, hi },
            Value::Float(default),
            false,
        )
    }

    pub fn integer(name: &str, lo: i64, hi: i64, default: i64) -> Result<Self> {
        Self::new(
            name,
            OptionKind::Integer,
            Domain::Interval {
                lo: lo as f64,
                hi: hi as f64,
            },
            Value::Int(default),
            false,
        )
    }

    pub fn boolean(name: &str, default: bool) -> Result<Self> {
        Self::new(
            name,
            OptionKind::Boolean,
            Domain::Levels(vec!["false".into(), "true".into()]),
            Value::Level(default as usize),
            false,
        )
    }

    pub fn categorical(name: &str, levels: &[&str], default: usize) -> Result<Self> {
        Self::new(
            name,
            OptionKind::Categorical,
            Domain::Levels(levels.iter().map(|s| s.to_string()).collect()),
            Value::Level(default),
            false,
        )
    }

    /// Same option, pinned at its default.
    pub fn into_fixed(mut self) -> Self {
        self.fixed = true;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> OptionKind {
        self.kind
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn default_value(&self) -> Value {
        self.default
    }

    pub fn is_fixed(&self) -> bool {
        self.fixed
    }

    pub fn bounds(&self) -> Option<(f64, f64)> {
        match self.domain {
            Domain::Interval { lo, hi } => Some((lo, hi)),
            Domain::Levels(_) => None,
        }
    }

    pub fn levels(&self) -> Option<&[String]> {
        match &self.domain {
            Domain::Levels(l) => Some(l),
            Domain::Interval { .. } => None,
        }
    }

    pub fn contains(&self, v: Value) -> bool {
        match (self.kind, &self.domain, v) {
            (OptionKind::Continuous, Domain::Interval { lo, hi }, Value::Float(x)) => {
                x.is_finite() && x >= *lo && x <= *hi
            }
            (OptionKind::Integer, Domain::Interval { lo, hi }, Value::Int(x)) => {
                (x as f64) >= *lo && (x as f64) <= *hi
            }
            (OptionKind::Boolean | OptionKind::Categorical, Domain::Levels(l), Value::Level(i)) => {
                i < l.len()
            }
            _ => false,
        }
    }

    pub fn check(&self, v: Value) -> Result<()> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(Error::InvalidValue {
                option: self.name.clone(),
                reason: format!("value {v:?} outside domain"),
            })
        }
    }

    /// Uniform draw from the domain; integers inclusive on both ends.
    pub fn sample(&self, rng: &mut seed::Rng) -> Value {
        match (&self.domain, self.kind) {
            (Domain::Interval { lo, hi }, OptionKind::Integer) => {
                Value::Int(rng.random_range(*lo as i64..=*hi as i64))
            }
            (Domain::Interval { lo, hi }, _) => Value::Float(lo + rng.random::<f64>() * (hi - lo)),
            (Domain::Levels(l), _) => Value::Level(rng.random_range(0..l.len())),
        }
    }

    /// Position in [0, 1] for numeric options, level code for the rest.
    pub fn to_unit(&self, v: Value) -> f64 {
        match self.domain {
            Domain::Interval { lo, hi } if hi > lo => (v.as_f64() - lo) / (hi - lo),
            Domain::Interval { .. } => 0.0,
            Domain::Levels(_) => v.as_f64(),
        }
    }

    /// Inverse of [`to_unit`](Self::to_unit) for numeric options; clamps and rounds integers.
    pub fn from_unit(&self, u: f64) -> Value {
        match (&self.domain, self.kind) {
            (Domain::Interval { lo, hi }, OptionKind::Integer) => {
                let x = (lo + u.clamp(0.0, 1.0) * (hi - lo)).round();
                Value::Int(x.clamp(*lo, *hi) as i64)
            }
            (Domain::Interval { lo, hi }, _) => Value::Float(lo + u.clamp(0.0, 1.0) * (hi - lo)),
            (Domain::Levels(l), _) => Value::Level((u.round().max(0.0) as usize).min(l.len() - 1)),
        }
    }

    pub fn parse_value(&self, raw: &str) -> Result<Value> {
        let raw = raw.trim();
        let bad = |why: &str| Error::InvalidValue {
            option: self.name.clone(),
            reason: format!("cannot parse `{raw}`: {why}"),
        };
        let v = match (self.kind, &self.domain) {
            (OptionKind::Continuous, _) => {
                Value::Float(raw.parse::<f64>().map_err(|_| bad("not a number"))?)
            }
            (OptionKind::Integer, _) => {
                Value::Int(raw.parse::<i64>().map_err(|_| bad("not an integer"))?)
            }
            (_, Domain::Levels(levels)) => {
                if let Some(i) = levels.iter().position(|l| l == raw) {
                    Value::Level(i)
                } else if self.kind == OptionKind::Boolean {
                    match raw {
                        "0" | "False" | "FALSE" => Value::Level(0),
                        "1" | "True" | "TRUE" => Value::Level(1),
                        _ => return Err(bad("unknown level")),
                    }
                } else {
                    return Err(bad("unknown level"));
                }
            }
            _ => return Err(bad("kind/domain mismatch")),
        };
        self.check(v)?;
        Ok(v)
    }

    pub fn format_value(&self, v: Value) -> String {
        match (v, &self.domain) {
            (Value::Level(i), Domain::Levels(l)) if i < l.len() => l[i].clone(),
            (Value::Float(x), _) => format!("{x}"),
            (Value::Int(x), _) => x.to_string(),
            (Value::Level(i), _) => i.to_string(),
        }
    }

    /// Evaluation grid of `n` points: `lo + j (hi - lo) / n` for `j = 1..=n`
    /// on numeric options (deduplicated after integer rounding), every level
    /// otherwise.
    pub fn grid(&self, n: usize) -> Vec<Value> {
        match (&self.domain, self.kind) {
            (Domain::Levels(l), _) => (0..l.len()).map(Value::Level).collect(),
            (Domain::Interval { lo, hi }, OptionKind::Integer) => {
                let mut out: Vec<i64> = (1..=n)
                    .map(|j| (lo + j as f64 * (hi - lo) / n as f64).round() as i64)
                    .collect();
                out.dedup();
                out.into_iter().map(Value::Int).collect()
            }
            (Domain::Interval { lo, hi }, _) => (1..=n)
                .map(|j| Value::Float(lo + j as f64 * (hi - lo) / n as f64))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigSpace {
    options: Vec<OptionDef>,
}

impl ConfigSpace {
    pub fn new(options: Vec<OptionDef>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for o in &options {
            if !seen.insert(o.name.as_str()) {
                return Err(Error::InvalidSpace(format!(
                    "duplicate option `{}`",
                    o.name
                )));
            }
        }
        Ok(ConfigSpace { options })
    }

    pub fn options(&self) -> &[OptionDef] {
        &self.options
    }

    pub fn len(&self) -> usize {
        self.options.len()
    }

    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.options.iter().map(|o| o.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.options.iter().position(|o| o.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&OptionDef> {
        self.options.iter().find(|o| o.name == name)
    }

    pub fn option(&self, name: &str) -> Result<&OptionDef> {
        self.get(name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown option `{name}`")))
    }

    /// Options an optimizer may move.
    pub fn tunable(&self) -> impl Iterator<Item = &OptionDef> {
        self.options.iter().filter(|o| !o.fixed)
    }

    pub fn default_configuration(&self) -> Configuration {
        Configuration(
            self.options
                .iter()
                .map(|o| (o.name.clone(), o.default))
                .collect(),
        )
    }

    /// Checks that `c` assigns exactly the space's options, each inside its domain.
    pub fn validate(&self, c: &Configuration) -> Result<()> {
        if c.0.len() != self.options.len() {
            return Err(Error::InvalidArgument(format!(
                "configuration assigns {} options, space has {}",
                c.0.len(),
                self.options.len()
            )));
        }
        for o in &self.options {
            let v = c.get(&o.name).ok_or_else(|| {
                Error::InvalidArgument(format!("configuration misses option `{}`", o.name))
            })?;
            o.check(v)?;
        }
        Ok(())
    }
}

/// Draws `n` configurations uniformly from `space`. Fixed options stay at their defaults.
pub fn sample_uniform(space: &ConfigSpace, n: usize, seed: u64) -> Result<Vec<Configuration>> {
    if space.is_empty() {
        return Err(Error::InvalidSpace("space has no options".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument(
            "sample size must be at least 1".into(),
        ));
    }
    let mut rng = seed::stream(seed, "space.sample", 0);
    Ok((0..n)
        .map(|_| {
            Configuration(
                space
                    .options
                    .iter()
                    .map(|o| {
                        let v = if o.fixed {
                            o.default
                        } else {
                            o.sample(&mut rng)
                        };
                        (o.name.clone(), v)
                    })
                    .collect(),
            )
        })
        .collect())
}

/// Concrete assignment of values to option names.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Configuration(BTreeMap<String, Value>);

impl Configuration {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, v: Value) -> Self {
        self.0.insert(name.to_string(), v);
        self
    }

    pub fn get(&self, name: &str) -> Option<Value> {
        self.0.get(name).copied()
    }

    pub fn set(&mut self, name: &str, v: Value) {
        self.0.insert(name.to_string(), v);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Value)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl FromIterator<(String, Value)> for Configuration {
    fn from_iter<I: IntoIterator<Item = (String, Value)>>(iter: I) -> Self {
        Configuration(iter.into_iter().collect())
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k}={}", v.as_f64())?;
        }
        write!(f, ">")
    }
}

/// A sub-space searching only `selected`; every other option is pinned.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedSpace {
    parent: ConfigSpace,
    selected: Vec<String>,
    pinned: BTreeMap<String, Value>,
}

impl ReducedSpace {
    /// Selects `names` (kept in parent order) and pins the rest at their defaults.
    pub fn new<S: AsRef<str>>(parent: ConfigSpace, names: &[S]) -> Result<Self> {
        let wanted: BTreeSet<&str> = names.iter().map(|s| s.as_ref()).collect();
        for w in &wanted {
            let o = parent.option(w)?;
            if o.fixed {
                return Err(Error::InvalidArgument(format!(
                    "option `{w}` is fixed and cannot be searched"
                )));
            }
        }
        let mut selected = Vec::new();
        let mut pinned = BTreeMap::new();
        for o in &parent.options {
            if wanted.contains(o.name.as_str()) {
                selected.push(o.name.clone());
            } else {
                pinned.insert(o.name.clone(), o.default);
            }
        }
        Ok(ReducedSpace {
            parent,
            selected,
            pinned,
        })
    }

    /// Every tunable option selected.
    pub fn full(parent: ConfigSpace) -> Self {
        let names: Vec<String> = parent.tunable().map(|o| o.name.clone()).collect();
        Self::new(parent, &names).expect("tunable options are valid selections")
    }

    pub fn parent(&self) -> &ConfigSpace {
        &self.parent
    }

    pub fn selected(&self) -> &[String] {
        &self.selected
    }

    pub fn pinned(&self) -> &BTreeMap<String, Value> {
        &self.pinned
    }

    pub fn selected_options(&self) -> impl Iterator<Item = &OptionDef> {
        self.selected.iter().map(|n| {
            self.parent
                .get(n)
                .expect("selected names come from the parent")
        })
    }

    /// Completes a partial assignment over the selected options.
    pub fn embed(&self, partial: &Configuration) -> Result<Configuration> {
        for (k, _) in partial.iter() {
            if !self.selected.iter().any(|s| s == k) {
                return Err(Error::InvalidArgument(format!(
                    "`{k}` is not a selected option"
                )));
            }
        }
        let mut out = Configuration::new();
        for o in self.selected_options() {
            let v = partial.get(&o.name).ok_or_else(|| {
                Error::InvalidArgument(format!("missing assignment for `{}`", o.name))
            })?;
            o.check(v)?;
            out.set(&o.name, v);
        }
        for (k, v) in &self.pinned {
            out.set(k, *v);
        }
        Ok(out)
    }

    /// Projection of a full configuration onto the selected options.
    pub fn restrict(&self, full: &Configuration) -> Result<Configuration> {
        self.selected
            .iter()
            .map(|n| {
                full.get(n)
                    .map(|v| (n.clone(), v))
                    .ok_or_else(|| Error::InvalidArgument(format!("missing option `{n}`")))
            })
            .collect()
    }

    /// Uniform samples over the selected options, returned as full configurations.
    pub fn sample(&self, n: usize, rng: &mut seed::Rng) -> Vec<Configuration> {
        (0..n)
            .map(|_| {
                let mut c: Configuration =
                    self.pinned.iter().map(|(k, v)| (k.clone(), *v)).collect();
                for o in self.selected_options() {
                    c.set(&o.name, o.sample(rng));
                }
                c
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Config-spec files (JSON or TOML)

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RawDomain {
    Interval([f64; 2]),
    Levels(Vec<String>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum RawValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct OptionRecord {
    name: String,
    kind: OptionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    domain: Option<RawDomain>,
    default: RawValue,
    #[serde(default)]
    fixed: bool,
}

/// On-disk form of a configuration space plus column roles.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SpecFile {
    options: Vec<OptionRecord>,
    #[serde(default)]
    pub roles: RoleMap,
}

impl SpecFile {
    pub fn from_space(space: &ConfigSpace, roles: RoleMap) -> Self {
        let options = space
            .options
            .iter()
            .map(|o| OptionRecord {
                name: o.name.clone(),
                kind: o.kind,
                domain: Some(match &o.domain {
                    Domain::Interval { lo, hi } => RawDomain::Interval([*lo, *hi]),
                    Domain::Levels(l) => RawDomain::Levels(l.clone()),
                }),
                default: match (o.default, &o.domain) {
                    (Value::Float(x), _) => RawValue::Float(x),
                    (Value::Int(x), _) => RawValue::Int(x),
                    (Value::Level(i), Domain::Levels(l)) => RawValue::Str(l[i].clone()),
                    (Value::Level(i), _) => RawValue::Int(i as i64),
                },
                fixed: o.fixed,
            })
            .collect();
        SpecFile { options, roles }
    }

    pub fn space(&self) -> Result<ConfigSpace> {
        let mut out = Vec::with_capacity(self.options.len());
        for r in &self.options {
            let domain = match (&r.domain, r.kind) {
                (Some(RawDomain::Interval([lo, hi])), _) => Domain::Interval { lo: *lo, hi: *hi },
                (Some(RawDomain::Levels(l)), _) => Domain::Levels(l.clone()),
                (None, OptionKind::Boolean) => Domain::Levels(vec!["false".into(), "true".into()]),
                (None, _) => {
                    return Err(Error::InvalidValue {
                        option: r.name.clone(),
                        reason: "missing domain".into(),
                    })
                }
            };
            let default = match (&r.default, r.kind, &domain) {
                (RawValue::Float(x), OptionKind::Continuous, _) => Value::Float(*x),
                (RawValue::Int(x), OptionKind::Continuous, _) => Value::Float(*x as f64),
                (RawValue::Int(x), OptionKind::Integer, _) => Value::Int(*x),
                (RawValue::Float(x), OptionKind::Integer, _) if x.fract() == 0.0 => {
                    Value::Int(*x as i64)
                }
                (RawValue::Bool(b), OptionKind::Boolean, _) => Value::Level(*b as usize),
                (RawValue::Str(s), _, Domain::Levels(l)) => match l.iter().position(|x| x == s) {
                    Some(i) => Value::Level(i),
                    None => {
                        return Err(Error::InvalidValue {
                            option: r.name.clone(),
                            reason: format!("default `{s}` is not a level"),
                        })
                    }
                },
                (other, kind, _) => {
                    return Err(Error::InvalidValue {
                        option: r.name.clone(),
                        reason: format!("default {other:?} does not fit kind {kind:?}"),
                    })
                }
            };
            out.push(OptionDef::new(
                r.name.clone(),
                r.kind,
                domain,
                default,
                r.fixed,
            )?);
        }
        ConfigSpace::new(out)
    }

    /// Reads JSON or TOML, chosen by extension (`.toml` vs anything else).
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().and_then(|e| e.to_str()) == Some("toml") {
            toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
        } else {
            serde_json::from_str(&text)
                .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = if path.extension().and_then(|e| e.to_str()) == Some("toml") {
            toml::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?
        } else {
            serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))? + "\n"
        };
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
