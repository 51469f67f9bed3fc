//! Physical assets: typed inventory records, scoped search, groups,
//! additional parameters and summary reports.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::context::{decode, text_of, Context, Fields};
use crate::error::{Error, Result};
use crate::query::{self, Conjunction, FieldSchema, QueryAst, ValueKind};
use crate::session::Session;
use crate::storage::{
    Criterion, EntityId, Mutation, Page, Row, Schema, Target, Value,
};

pub const CATEGORIES: [&str; 4] = ["Furniture", "StorageUnit", "Equipment", "Computer"];
pub const STATUSES: [&str; 5] = ["In-stock", "In-use", "Broken", "Stolen", "Disposed"];
pub const REPORT_DIMENSIONS: [&str; 4] = ["Category", "Status", "Owner", "LocationID"];
pub const GROUP_STATUSES: [&str; 2] = ["active", "inactive"];

/// Base columns fixed once an asset exists.
pub const IMMUTABLE: [&str; 7] = [
    "AssetID",
    "BarCode",
    "PRequest",
    "PoNumber",
    "Manufacturer",
    "Model",
    "Category",
];

/// Extension columns fixed once an asset exists, as (extension, column).
pub const IMMUTABLE_EXT: [(&str, &str); 5] = [
    ("Furniture", "Type"),
    ("StorageUnit", "Type"),
    ("Equipment", "Type"),
    ("Equipment", "SerialNo"),
    ("Computer", "Type"),
];

const DIMENSIONS: [&str; 3] = ["Height", "Width", "Depth"];

/// Extension kinds a category carries, outermost first.
pub fn extensions_of(category: &str) -> &'static [&'static str] {
    match category {
        "Furniture" => &["Furniture"],
        "StorageUnit" => &["Furniture", "StorageUnit"],
        "Equipment" => &["Equipment"],
        "Computer" => &["Equipment", "Computer"],
        _ => &[],
    }
}

/// Client payload for creating or changing an asset. Top-level keys are
/// base columns; extension columns travel in nested objects.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct AssetInput {
    #[serde(flatten)]
    pub base: Fields,
    #[serde(rename = "Furniture", default)]
    pub furniture: Option<Fields>,
    #[serde(rename = "StorageUnit", default)]
    pub storage_unit: Option<Fields>,
    #[serde(rename = "Equipment", default)]
    pub equipment: Option<Fields>,
    #[serde(rename = "Computer", default)]
    pub computer: Option<Fields>,
    #[serde(rename = "AdditionalParameters", default)]
    pub parameters: BTreeMap<String, Option<String>>,
}

impl AssetInput {
    fn ext(&self, kind: &str) -> Option<&Fields> {
        match kind {
            "Furniture" => self.furniture.as_ref(),
            "StorageUnit" => self.storage_unit.as_ref(),
            "Equipment" => self.equipment.as_ref(),
            "Computer" => self.computer.as_ref(),
            _ => None,
        }
    }

    fn present_exts(&self) -> impl Iterator<Item = &'static str> + '_ {
        ["Furniture", "StorageUnit", "Equipment", "Computer"]
            .into_iter()
            .filter(|k| self.ext(k).is_some())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AssetDetail {
    #[serde(flatten)]
    pub fields: BTreeMap<String, Value>,
    #[serde(rename = "LocationName")]
    pub location_name: Option<String>,
    #[serde(rename = "DepartmentName")]
    pub department_name: Option<String>,
    #[serde(rename = "GroupName")]
    pub group_name: Option<String>,
    #[serde(rename = "Furniture", skip_serializing_if = "Option::is_none")]
    pub furniture: Option<BTreeMap<String, Value>>,
    #[serde(rename = "StorageUnit", skip_serializing_if = "Option::is_none")]
    pub storage_unit: Option<BTreeMap<String, Value>>,
    #[serde(rename = "Equipment", skip_serializing_if = "Option::is_none")]
    pub equipment: Option<BTreeMap<String, Value>>,
    #[serde(rename = "Computer", skip_serializing_if = "Option::is_none")]
    pub computer: Option<BTreeMap<String, Value>>,
    #[serde(rename = "AdditionalParameters")]
    pub parameters: BTreeMap<String, Value>,
}

impl AssetDetail {
    pub fn id(&self) -> EntityId {
        EntityId(self.fields.get("AssetID").and_then(Value::as_int).unwrap_or(0))
    }
}

/// One search result row, keyed by query field name.
pub type AssetView = BTreeMap<String, Value>;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupDraft {
    #[serde(rename = "GroupName", default)]
    pub name: Option<String>,
    #[serde(rename = "LocationID", default)]
    pub location: Option<i64>,
    #[serde(rename = "UserID", default)]
    pub user: Option<i64>,
    #[serde(rename = "Assets", default)]
    pub assets: Vec<i64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupChanges {
    #[serde(rename = "GroupName", default)]
    pub name: Option<String>,
    #[serde(rename = "LocationID", default)]
    pub location: Option<i64>,
    #[serde(rename = "UserID", default)]
    pub user: Option<i64>,
    #[serde(rename = "Assets", default)]
    pub assets: Option<Vec<i64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupDetail {
    #[serde(rename = "GroupID")]
    pub id: EntityId,
    #[serde(rename = "GroupName")]
    pub name: Option<String>,
    #[serde(rename = "Status")]
    pub status: String,
    #[serde(rename = "LocationID")]
    pub location: EntityId,
    #[serde(rename = "LocationName")]
    pub location_name: Option<String>,
    #[serde(rename = "UserID")]
    pub user: EntityId,
    #[serde(rename = "UserName")]
    pub user_name: Option<String>,
    #[serde(rename = "Assets")]
    pub assets: Vec<EntityId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReportRow {
    pub key: String,
    pub count: usize,
}

pub fn search_schema() -> FieldSchema {
    use ValueKind::*;
    FieldSchema::new(
        "PhysicalAsset",
        &[
            ("ItemId", Number),
            ("Location", Text),
            ("Type", Text),
            ("Color", Text),
            ("Contact", Text),
            ("PoNumber", Text),
            ("ReqNum", Text),
            ("BarCode", Text),
            ("Owner", Text),
            ("Category", Text),
            ("Status", Text),
            ("Manufacturer", Text),
            ("Model", Text),
            ("SerialNo", Text),
            ("LegacyCode", Text),
            ("Department", Text),
            ("Group", Text),
            ("DatePurchased", Date),
            ("WarrantyExpiration", Date),
        ],
    )
}

fn mac_ok(s: &str) -> bool {
    let parts: Vec<&str> = s.split(':').collect();
    parts.len() == 6
        && parts
            .iter()
            .all(|p| p.len() == 2 && p.chars().all(|c| c.is_ascii_hexdigit()))
}

fn parse_dimension(s: &str) -> Option<[i64; 3]> {
    let parts: Vec<i64> = s
        .split('x')
        .map(|p| p.trim().parse().ok())
        .collect::<Option<_>>()?;
    parts.try_into().ok()
}

/// Everything needed to render or scope assets, read once per call.
struct Tables {
    exts: BTreeMap<&'static str, BTreeMap<EntityId, Arc<Row>>>,
    locations: BTreeMap<EntityId, Arc<Row>>,
    groups: BTreeMap<EntityId, Arc<Row>>,
}

impl Tables {
    fn load(cx: &Context) -> Result<Self> {
        let by_id = |kind: &str| -> Result<BTreeMap<EntityId, Arc<Row>>> {
            Ok(cx
                .store
                .scan(kind, vec![])?
                .into_iter()
                .map(|r| (r.id, r))
                .collect())
        };
        let mut exts = BTreeMap::new();
        for k in ["Furniture", "StorageUnit", "Equipment", "Computer"] {
            exts.insert(k, by_id(k)?);
        }
        Ok(Tables {
            exts,
            locations: by_id("Location")?,
            groups: by_id("Group")?,
        })
    }

    fn ext(&self, kind: &str, id: EntityId) -> Option<&Arc<Row>> {
        self.exts.get(kind).and_then(|m| m.get(&id))
    }

    /// User the asset is assigned to: equipment holder, else group holder.
    fn holder(&self, asset: &Row) -> Option<EntityId> {
        self.ext("Equipment", asset.id)
            .and_then(|e| e.id_of("UserID"))
            .or_else(|| {
                asset
                    .id_of("GroupID")
                    .and_then(|g| self.groups.get(&g))
                    .and_then(|g| g.id_of("UserID"))
            })
    }
}

/// Row-level visibility by role level: 3 everything, 2 own faculty,
/// 1 own department, 0 assets held by the caller.
fn in_scope(session: &Session, asset: &Row, t: &Tables) -> bool {
    match session.level {
        3.. => true,
        2 => session
            .faculty_name
            .as_deref()
            .is_some_and(|f| asset.text("Owner") == Some(f)),
        1 => session.department_id.is_some() && asset.id_of("DepartmentID") == session.department_id,
        0 => t.holder(asset) == Some(session.user_id),
    }
}

pub struct Assets {
    cx: Arc<Context>,
}

impl Assets {
    pub fn new(cx: Arc<Context>) -> Self {
        Assets { cx }
    }

    fn store(&self) -> &dyn crate::storage::Gateway {
        self.cx.store.as_ref()
    }

    /// Asset row when it exists and the caller may see it.
    fn visible(&self, session: &Session, id: EntityId, t: &Tables) -> Result<Arc<Row>> {
        match self.store().get("PhysicalAsset", id)? {
            Some(r) if in_scope(session, &r, t) => Ok(r),
            _ => Err(Error::not_found("PhysicalAsset", id.0)),
        }
    }

    fn check_owner(&self, session: &Session, owner: &str) -> Result<()> {
        if session.level == 2 && session.faculty_name.as_deref() != Some(owner) {
            return Err(Error::FacultyMismatch);
        }
        if self.cx.directory()?.faculty_by_name(owner).is_none() {
            return Err(Error::invalid("Owner", "not a faculty name"));
        }
        Ok(())
    }

    fn check_status(v: &Value) -> Result<()> {
        match v.as_text() {
            Some(s) if !STATUSES.contains(&s) => {
                Err(Error::invalid("Status", format!("one of {}", STATUSES.join(", "))))
            }
            _ => Ok(()),
        }
    }

    /// Decodes an extension payload; furniture dimensions fold into the
    /// single `Dimension` column.
    fn decode_ext(
        kind: &str,
        raw: &Fields,
        current: Option<&Row>,
    ) -> Result<BTreeMap<String, Value>> {
        let def = Schema::global().entity(kind)?;
        let mut out = BTreeMap::new();
        let mut dims: Option<[Option<i64>; 3]> = None;
        for (k, v) in raw {
            if kind == "Furniture" && DIMENSIONS.contains(&k.as_str()) {
                let d = dims.get_or_insert_with(|| {
                    let cur = current
                        .and_then(|r| r.text("Dimension"))
                        .and_then(parse_dimension);
                    [cur.map(|c| c[0]), cur.map(|c| c[1]), cur.map(|c| c[2])]
                });
                let i = DIMENSIONS.iter().position(|x| x == k).expect("listed");
                d[i] = match v {
                    serde_json::Value::Null => None,
                    v => Some(
                        v.as_i64()
                            .filter(|n| *n >= 0)
                            .ok_or_else(|| Error::invalid(k.clone(), "centimeters, a non-negative integer"))?,
                    ),
                };
                continue;
            }
            if k == def.key || k == "Dimension" {
                return Err(Error::unknown_field(format!("{kind}.{k}")));
            }
            let val = decode(def, k, v).map_err(|e| match e {
                Error::UnknownField { field } => Error::unknown_field(format!("{kind}.{field}")),
                e => e,
            })?;
            if k == "MACAddress" {
                if let Some(s) = val.as_text() {
                    if !mac_ok(s) {
                        return Err(Error::invalid("MACAddress", "six colon-separated hex octets"));
                    }
                }
            }
            if k == "NumberOfCompartment" && val.as_int().is_some_and(|n| n < 1) {
                return Err(Error::invalid(k.clone(), "at least 1"));
            }
            out.insert(k.clone(), val);
        }
        if let Some(d) = dims {
            let v = match d {
                [None, None, None] => Value::Null,
                [h, w, dd] => Value::Text(format!(
                    "{}x{}x{}",
                    h.unwrap_or(0),
                    w.unwrap_or(0),
                    dd.unwrap_or(0)
                )),
            };
            out.insert("Dimension".into(), v);
        }
        Ok(out)
    }

    pub fn add_asset(&self, session: &Session, input: &AssetInput) -> Result<EntityId> {
        Ok(self.add_asset_with(session, input, true)?.expect("committed"))
    }

    /// Runs every check of [`Assets::add_asset`] without writing.
    pub fn check_add_asset(&self, session: &Session, input: &AssetInput) -> Result<()> {
        self.add_asset_with(session, input, false).map(drop)
    }

    fn add_asset_with(
        &self,
        session: &Session,
        input: &AssetInput,
        commit: bool,
    ) -> Result<Option<EntityId>> {
        self.cx.perms.require(session, "asset.add")?;
        let def = Schema::global().entity("PhysicalAsset")?;
        let mut base = BTreeMap::new();
        for (k, v) in &input.base {
            if k == def.key {
                return Err(Error::invalid(k.clone(), "assigned by the system"));
            }
            base.insert(k.clone(), decode(def, k, v)?);
        }
        for f in ["BarCode", "Owner", "Category"] {
            if base.get(f).and_then(text_of).is_none() {
                return Err(Error::MissingMandatory(f.into()));
            }
        }
        let category = base["Category"].as_text().expect("checked").to_string();
        if !CATEGORIES.contains(&category.as_str()) {
            return Err(Error::invalid(
                "Category",
                format!("one of {}", CATEGORIES.join(", ")),
            ));
        }
        let allowed = extensions_of(&category);
        if let Some(bad) = input.present_exts().find(|k| !allowed.contains(k)) {
            return Err(Error::ExtensionMismatch(format!(
                "{bad} does not apply to {category}"
            )));
        }
        let mut exts = Vec::new();
        for kind in allowed {
            let raw = input.ext(kind).cloned().unwrap_or_default();
            exts.push((*kind, Self::decode_ext(kind, &raw, None)?));
        }
        if allowed.contains(&"Furniture")
            && exts[0].1.get("Type").and_then(text_of).is_none()
        {
            return Err(Error::MissingMandatory("Type".into()));
        }
        let owner = base["Owner"].as_text().expect("checked").to_string();
        self.check_owner(session, &owner)?;
        if let Some(s) = base.get("Status") {
            Self::check_status(s)?;
        }
        if base.get("DepartmentID").map_or(true, Value::is_null) {
            match session.department_id {
                Some(d) => {
                    base.insert("DepartmentID".into(), d.into());
                }
                None => return Err(Error::MissingMandatory("DepartmentID".into())),
            }
        }
        if let Some(l) = base.get("LocationID").and_then(Value::as_int) {
            if !self.cx.exists("Location", EntityId(l))? {
                return Err(Error::InvalidLocationId);
            }
        }
        if let Some(g) = base.get("GroupID").and_then(Value::as_int) {
            if !self.cx.exists("Group", EntityId(g))? {
                return Err(Error::InvalidGroupId);
            }
        }
        for (_, e) in &exts {
            if let Some(u) = e.get("UserID").and_then(Value::as_int) {
                if !self.cx.exists("User", EntityId(u))? {
                    return Err(Error::InvalidUserId);
                }
            }
        }
        let barcode = base["BarCode"].clone();
        if !self
            .store()
            .scan("PhysicalAsset", vec![Criterion::eq("BarCode", barcode)])?
            .is_empty()
        {
            return Err(Error::DuplicateBarCode);
        }
        let mut batch = vec![Mutation::insert("PhysicalAsset").set_all(base)];
        for (kind, values) in exts {
            batch.push(Mutation::insert_ext(kind, Target::Inserted(0)).set_all(values));
        }
        for (name, value) in &input.parameters {
            if name.trim().is_empty() {
                return Err(Error::MissingMandatory("ParameterName".into()));
            }
            batch.push(
                Mutation::insert("AdditionalParameter")
                    .set_ref("AssetID", 0)
                    .set("ParameterName", name.as_str())
                    .set("Value", value.clone().filter(|v| !v.is_empty())),
            );
        }
        if !commit {
            return Ok(None);
        }
        let ids = self.store().apply(batch).map_err(barcode_conflict)?;
        Ok(Some(ids[0]))
    }

    fn detail_of(&self, asset: &Row, t: &Tables) -> Result<AssetDetail> {
        let dir = self.cx.directory()?;
        let ext = |kind: &str| {
            t.ext(kind, asset.id).map(|r| {
                let mut m = r.fields.clone();
                m.remove("AssetID");
                if kind == "Furniture" {
                    let d = m.remove("Dimension");
                    let parsed = d
                        .as_ref()
                        .and_then(Value::as_text)
                        .and_then(parse_dimension);
                    for (i, n) in DIMENSIONS.iter().enumerate() {
                        m.insert(n.to_string(), parsed.map(|p| p[i]).into());
                    }
                }
                m
            })
        };
        let parameters = self
            .store()
            .scan("AdditionalParameter", vec![Criterion::eq("AssetID", asset.id)])?
            .iter()
            .map(|p| (p.str("ParameterName").to_string(), p.get("Value").clone()))
            .collect();
        Ok(AssetDetail {
            fields: asset.fields.clone(),
            location_name: asset
                .id_of("LocationID")
                .and_then(|l| t.locations.get(&l))
                .map(|l| l.str("LocationName").to_string()),
            department_name: asset
                .id_of("DepartmentID")
                .and_then(|d| dir.department_name(d))
                .map(str::to_string),
            group_name: asset
                .id_of("GroupID")
                .and_then(|g| t.groups.get(&g))
                .and_then(|g| g.text("GroupName"))
                .map(str::to_string),
            furniture: ext("Furniture"),
            storage_unit: ext("StorageUnit"),
            equipment: ext("Equipment"),
            computer: ext("Computer"),
            parameters,
        })
    }

    pub fn get_asset(&self, session: &Session, id: EntityId) -> Result<AssetDetail> {
        self.cx.perms.require(session, "asset.search")?;
        let t = Tables::load(&self.cx)?;
        let asset = self.visible(session, id, &t)?;
        self.detail_of(&asset, &t)
    }

    fn view_of(&self, asset: &Row, t: &Tables) -> Result<AssetView> {
        let dir = self.cx.directory()?;
        let mut v = AssetView::new();
        let text = |s: Option<&str>| Value::from(s.map(str::to_string));
        let ext_text = |kind: &str, f: &str| t.ext(kind, asset.id).and_then(|r| r.text(f));
        v.insert("ItemId".into(), asset.id.into());
        v.insert(
            "Location".into(),
            text(
                asset
                    .id_of("LocationID")
                    .and_then(|l| t.locations.get(&l))
                    .and_then(|l| l.text("LocationName")),
            ),
        );
        let ty = ext_text("Computer", "Type")
            .or_else(|| ext_text("Equipment", "Type"))
            .or_else(|| ext_text("StorageUnit", "Type"))
            .or_else(|| ext_text("Furniture", "Type"));
        v.insert("Type".into(), text(ty));
        v.insert("Color".into(), text(ext_text("Furniture", "Color")));
        v.insert(
            "Contact".into(),
            t.holder(asset).and_then(|u| dir.display_name(u)).into(),
        );
        v.insert("PoNumber".into(), asset.get("PoNumber").clone());
        v.insert("ReqNum".into(), asset.get("PRequest").clone());
        for f in [
            "BarCode",
            "Owner",
            "Category",
            "Status",
            "Manufacturer",
            "Model",
            "LegacyCode",
        ] {
            v.insert(f.into(), asset.get(f).clone());
        }
        v.insert("SerialNo".into(), text(ext_text("Equipment", "SerialNo")));
        v.insert(
            "Department".into(),
            text(asset.id_of("DepartmentID").and_then(|d| dir.department_name(d))),
        );
        v.insert(
            "Group".into(),
            text(
                asset
                    .id_of("GroupID")
                    .and_then(|g| t.groups.get(&g))
                    .and_then(|g| g.text("GroupName")),
            ),
        );
        for f in ["DatePurchased", "WarrantyExpiration"] {
            let d = asset
                .get(f)
                .as_time()
                .map(|t| t.format("%Y-%m-%d").to_string());
            v.insert(f.into(), d.into());
        }
        Ok(v)
    }

    /// Rows of the caller's scope, in id order.
    fn scoped(&self, session: &Session, t: &Tables) -> Result<Vec<Arc<Row>>> {
        let mut criteria = Vec::new();
        if session.level == 2 {
            match &session.faculty_name {
                Some(f) => criteria.push(Criterion::eq("Owner", f.as_str())),
                None => return Ok(Vec::new()),
            }
        }
        Ok(self
            .store()
            .scan("PhysicalAsset", criteria)?
            .into_iter()
            .filter(|r| in_scope(session, r, t))
            .collect())
    }

    pub fn search(
        &self,
        session: &Session,
        q: &QueryAst,
        offset: usize,
        limit: Option<usize>,
    ) -> Result<Page<AssetView>> {
        self.cx.perms.require(session, "asset.search")?;
        let dnf = query::compile(q, &search_schema())?;
        self.search_dnf(session, &dnf, offset, limit)
    }

    /// Search by an already compiled disjunction of criteria over the
    /// view fields.
    pub fn search_dnf(
        &self,
        session: &Session,
        dnf: &[Conjunction],
        offset: usize,
        limit: Option<usize>,
    ) -> Result<Page<AssetView>> {
        let t = Tables::load(&self.cx)?;
        let mut out = Vec::new();
        for a in self.scoped(session, &t)? {
            let v = self.view_of(&a, &t)?;
            if query::matches(dnf, &v) {
                out.push(v);
            }
        }
        Ok(Page::slice(out, offset, limit))
    }

    pub fn update_asset(
        &self,
        session: &Session,
        id: EntityId,
        changes: &AssetInput,
    ) -> Result<AssetDetail> {
        self.update_asset_with(session, id, changes, true)
    }

    /// Runs every check of [`Assets::update_asset`] without writing.
    pub fn check_update_asset(
        &self,
        session: &Session,
        id: EntityId,
        changes: &AssetInput,
    ) -> Result<()> {
        self.update_asset_with(session, id, changes, false).map(drop)
    }

    fn update_asset_with(
        &self,
        session: &Session,
        id: EntityId,
        changes: &AssetInput,
        commit: bool,
    ) -> Result<AssetDetail> {
        self.cx.perms.require(session, "asset.update")?;
        let t = Tables::load(&self.cx)?;
        let asset = self.visible(session, id, &t)?;
        for f in IMMUTABLE {
            if changes.base.contains_key(f) {
                return Err(Error::ImmutableField(f.into()));
            }
        }
        for (kind, f) in IMMUTABLE_EXT {
            if changes.ext(kind).is_some_and(|m| m.contains_key(f)) {
                return Err(Error::ImmutableField(format!("{kind} {f}")));
            }
        }
        if !changes.parameters.is_empty() {
            return Err(Error::invalid(
                "AdditionalParameters",
                "set parameters one at a time",
            ));
        }
        let def = Schema::global().entity("PhysicalAsset")?;
        let mut base = BTreeMap::new();
        for (k, v) in &changes.base {
            base.insert(k.clone(), decode(def, k, v)?);
        }
        if let Some(owner) = base.get("Owner") {
            if session.level < 3 {
                return Err(Error::Forbidden(
                    "Faculty User doesn't have permission for this function".into(),
                ));
            }
            match text_of(owner) {
                Some(o) => self.check_owner(session, o)?,
                None => return Err(Error::MissingMandatory("Owner".into())),
            }
        }
        if let Some(s) = base.get("Status") {
            if s.is_null() {
                return Err(Error::MissingMandatory("Status".into()));
            }
            Self::check_status(s)?;
        }
        if base.get("DepartmentID").is_some_and(Value::is_null) {
            return Err(Error::MissingMandatory("DepartmentID".into()));
        }
        if let Some(l) = base.get("LocationID").and_then(Value::as_int) {
            if !self.cx.exists("Location", EntityId(l))? {
                return Err(Error::InvalidLocationId);
            }
        }
        if let Some(g) = base.get("GroupID").and_then(Value::as_int) {
            if !self.cx.exists("Group", EntityId(g))? {
                return Err(Error::InvalidGroupId);
            }
        }
        let category = asset.str("Category").to_string();
        let allowed = extensions_of(&category);
        if let Some(bad) = changes.present_exts().find(|k| !allowed.contains(k)) {
            return Err(Error::ExtensionMismatch(format!(
                "{bad} does not apply to {category}"
            )));
        }
        let mut batch = vec![Mutation::update("PhysicalAsset", id)
            .set_all(base)
            .expect_version(asset.version)];
        for kind in changes.present_exts() {
            let current = t.ext(kind, id);
            let values = Self::decode_ext(kind, changes.ext(kind).expect("present"), current.map(|r| r.as_ref()))?;
            if let Some(u) = values.get("UserID").and_then(Value::as_int) {
                if !self.cx.exists("User", EntityId(u))? {
                    return Err(Error::InvalidUserId);
                }
            }
            if values.is_empty() {
                continue;
            }
            batch.push(match current {
                Some(r) => Mutation::update(kind, id)
                    .set_all(values)
                    .expect_version(r.version),
                None => Mutation::insert_ext(kind, id).set_all(values),
            });
        }
        if !commit {
            return self.detail_of(&asset, &t);
        }
        self.store().apply(batch)?;
        let t = Tables::load(&self.cx)?;
        let asset = self.store().fetch("PhysicalAsset", id)?;
        self.detail_of(&asset, &t)
    }

    pub fn set_additional_parameter(
        &self,
        session: &Session,
        asset: EntityId,
        name: &str,
        value: Option<&str>,
    ) -> Result<AssetDetail> {
        self.cx.perms.require(session, "asset.update")?;
        let t = Tables::load(&self.cx)?;
        let row = self.visible(session, asset, &t)?;
        if name.trim().is_empty() {
            return Err(Error::MissingMandatory("ParameterName".into()));
        }
        let value = value.filter(|v| !v.is_empty());
        let existing = self.store().scan(
            "AdditionalParameter",
            vec![
                Criterion::eq("AssetID", asset),
                Criterion::eq("ParameterName", name),
            ],
        )?;
        let m = match existing.first() {
            Some(p) => Mutation::update("AdditionalParameter", p.id)
                .set("Value", value)
                .expect_version(p.version),
            None => Mutation::insert("AdditionalParameter")
                .set("AssetID", asset)
                .set("ParameterName", name)
                .set("Value", value),
        };
        self.store().apply(vec![m])?;
        self.detail_of(&row, &t)
    }

    /// Counts of the caller's visible assets grouped by one column.
    pub fn report(&self, session: &Session, dimension: &str) -> Result<Vec<ReportRow>> {
        self.cx.perms.require(session, "asset.search")?;
        if !REPORT_DIMENSIONS.contains(&dimension) {
            return Err(Error::UnknownDimension(dimension.to_string()));
        }
        let t = Tables::load(&self.cx)?;
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for a in self.scoped(session, &t)? {
            let key = match a.get(dimension) {
                Value::Null => String::new(),
                v => v.render(),
            };
            *counts.entry(key).or_default() += 1;
        }
        Ok(counts
            .into_iter()
            .map(|(key, count)| ReportRow { key, count })
            .collect())
    }

    // groups

    /// Checks a member list; role-2 callers may only group their faculty's
    /// assets.
    fn check_members(&self, session: &Session, ids: &[i64]) -> Result<Vec<Arc<Row>>> {
        if ids.is_empty() {
            return Err(Error::EmptyGroup);
        }
        let mut rows = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, id) in ids.iter().enumerate() {
            let row = match self.store().get("PhysicalAsset", EntityId(*id))? {
                Some(r) if *id > 0 => r,
                _ => return Err(Error::InvalidAssetId(i + 1)),
            };
            if seen.insert(row.id) {
                rows.push(row);
            }
        }
        if session.level == 2 {
            let fac = session.faculty_name.as_deref();
            if rows.iter().any(|r| r.text("Owner") != fac) {
                return Err(Error::CrossFaculty);
            }
        }
        Ok(rows)
    }

    fn check_location(&self, id: Option<i64>) -> Result<EntityId> {
        match id {
            Some(l) if self.cx.exists("Location", EntityId(l))? => Ok(EntityId(l)),
            _ => Err(Error::InvalidLocationId),
        }
    }

    fn check_user(&self, id: Option<i64>) -> Result<EntityId> {
        match id {
            Some(u) if self.cx.exists("User", EntityId(u))? => Ok(EntityId(u)),
            _ => Err(Error::InvalidUserId),
        }
    }

    pub fn create_group(&self, session: &Session, draft: &GroupDraft) -> Result<EntityId> {
        Ok(self.create_group_with(session, draft, true)?.expect("committed"))
    }

    /// Runs every check of [`Assets::create_group`] without writing.
    pub fn check_create_group(&self, session: &Session, draft: &GroupDraft) -> Result<()> {
        self.create_group_with(session, draft, false).map(drop)
    }

    fn create_group_with(
        &self,
        session: &Session,
        draft: &GroupDraft,
        commit: bool,
    ) -> Result<Option<EntityId>> {
        self.cx.perms.require(session, "group.create")?;
        let members = self.check_members(session, &draft.assets)?;
        let location = self.check_location(draft.location)?;
        let user = self.check_user(draft.user)?;
        let mut batch = vec![Mutation::insert("Group")
            .set("GroupName", draft.name.clone().filter(|n| !n.is_empty()))
            .set("LocationID", location)
            .set("UserID", user)];
        for m in &members {
            batch.push(
                Mutation::update("PhysicalAsset", m.id)
                    .set_ref("GroupID", 0)
                    .expect_version(m.version),
            );
        }
        if !commit {
            return Ok(None);
        }
        Ok(Some(self.store().apply(batch)?[0]))
    }

    /// Group row the caller may act on; invalid and out-of-scope ids look alike.
    fn group_row(&self, session: &Session, id: EntityId) -> Result<(Arc<Row>, Vec<Arc<Row>>)> {
        let g = self
            .store()
            .get("Group", id)?
            .ok_or(Error::InvalidGroupId)?;
        let members = self
            .store()
            .scan("PhysicalAsset", vec![Criterion::eq("GroupID", id)])?;
        if session.level == 2 {
            let fac = session.faculty_name.as_deref();
            if members.iter().any(|m| m.text("Owner") != fac) {
                return Err(Error::InvalidGroupId);
            }
        }
        Ok((g, members))
    }

    fn group_detail(&self, g: &Row, members: &[Arc<Row>]) -> Result<GroupDetail> {
        let dir = self.cx.directory()?;
        let location = g.id_of("LocationID").unwrap_or(EntityId(0));
        let user = g.id_of("UserID").unwrap_or(EntityId(0));
        Ok(GroupDetail {
            id: g.id,
            name: g.text("GroupName").map(str::to_string),
            status: g.str("Status").to_string(),
            location,
            location_name: self
                .store()
                .get("Location", location)?
                .map(|l| l.str("LocationName").to_string()),
            user,
            user_name: dir.user(user).map(|u| u.user_name.clone()),
            assets: members.iter().map(|m| m.id).collect(),
        })
    }

    pub fn get_group(&self, session: &Session, id: EntityId) -> Result<GroupDetail> {
        self.cx.perms.require(session, "group.edit")?;
        let (g, members) = self.group_row(session, id)?;
        self.group_detail(&g, &members)
    }

    /// Groups the caller may open, active ones only unless `inactive`.
    pub fn list_groups(
        &self,
        session: &Session,
        inactive: bool,
        offset: usize,
        limit: Option<usize>,
    ) -> Result<Page<GroupDetail>> {
        self.cx.perms.require(session, "group.edit")?;
        let mut out = Vec::new();
        for g in self.store().scan("Group", vec![])? {
            if !inactive && g.text("Status") != Some("active") {
                continue;
            }
            match self.group_row(session, g.id) {
                Ok((g, members)) => out.push(self.group_detail(&g, &members)?),
                Err(Error::InvalidGroupId) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(Page::slice(out, offset, limit))
    }

    pub fn update_group(
        &self,
        session: &Session,
        id: EntityId,
        changes: &GroupChanges,
    ) -> Result<GroupDetail> {
        self.update_group_with(session, id, changes, true)
    }

    /// Runs every check of [`Assets::update_group`] without writing.
    pub fn check_update_group(
        &self,
        session: &Session,
        id: EntityId,
        changes: &GroupChanges,
    ) -> Result<()> {
        self.update_group_with(session, id, changes, false).map(drop)
    }

    fn update_group_with(
        &self,
        session: &Session,
        id: EntityId,
        changes: &GroupChanges,
        commit: bool,
    ) -> Result<GroupDetail> {
        self.cx.perms.require(session, "group.edit")?;
        let (g, current) = self.group_row(session, id)?;
        let mut m = Mutation::update("Group", id).expect_version(g.version);
        let mut batch = Vec::new();
        if let Some(ids) = &changes.assets {
            let next = self.check_members(session, ids)?;
            let keep: BTreeSet<EntityId> = next.iter().map(|r| r.id).collect();
            for r in &current {
                if !keep.contains(&r.id) {
                    batch.push(
                        Mutation::update("PhysicalAsset", r.id)
                            .set("GroupID", Value::Null)
                            .expect_version(r.version),
                    );
                }
            }
            for r in &next {
                if r.id_of("GroupID") != Some(id) {
                    batch.push(
                        Mutation::update("PhysicalAsset", r.id)
                            .set("GroupID", id)
                            .expect_version(r.version),
                    );
                }
            }
            m = m.set("Status", "active");
        }
        if changes.location.is_some() {
            m = m.set("LocationID", self.check_location(changes.location)?);
        }
        if changes.user.is_some() {
            m = m.set("UserID", self.check_user(changes.user)?);
        }
        if let Some(n) = &changes.name {
            m = m.set("GroupName", Some(n.clone()).filter(|n| !n.is_empty()));
        }
        batch.insert(0, m);
        if !commit {
            return self.group_detail(&g, &current);
        }
        self.store().apply(batch)?;
        let (g, members) = self.group_row(session, id)?;
        self.group_detail(&g, &members)
    }

    /// Soft delete: the group turns inactive and releases its members.
    pub fn delete_group(&self, session: &Session, id: EntityId) -> Result<GroupDetail> {
        self.cx.perms.require(session, "group.edit")?;
        let (g, members) = self.group_row(session, id)?;
        let mut batch = vec![Mutation::update("Group", id)
            .set("Status", "inactive")
            .expect_version(g.version)];
        for r in &members {
            batch.push(
                Mutation::update("PhysicalAsset", r.id)
                    .set("GroupID", Value::Null)
                    .expect_version(r.version),
            );
        }
        self.store().apply(batch)?;
        let (g, members) = self.group_row(session, id)?;
        self.group_detail(&g, &members)
    }
}

fn barcode_conflict(e: Error) -> Error {
    match e {
        Error::UniqueViolation { ref entity, ref fields }
            if entity == "PhysicalAsset" && fields.iter().any(|f| f == "BarCode") =>
        {
            Error::DuplicateBarCode
        }
        e => e,
    }
}
