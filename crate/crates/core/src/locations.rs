//! Buildings, floors and locations with their type profiles, lab staffing,
//! and the configurable location search.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::context::{decode, decode_all, text_of, Context, Fields};
use crate::error::{Error, Result};
use crate::query::{self, FieldSchema, QueryAst, ValueKind};
use crate::session::{Locale, Session};
use crate::storage::{Criterion, EntityId, Mutation, Page, Row, Schema, Target, Value};

pub const LOCATION_TYPES: [&str; 4] = ["Lab", "Room", "Office", "StorageCompartment"];
pub const MAX_FLOORS: i64 = 200;

/// Searchable location fields: the base columns plus joined names.
pub const SEARCH_FIELDS: [(&str, ValueKind, &str, &str); 12] = [
    ("LocationID", ValueKind::Number, "Location ID", "No d'emplacement"),
    ("LocationName", ValueKind::Text, "Location", "Emplacement"),
    ("Type", ValueKind::Text, "Type", "Type"),
    ("Status", ValueKind::Text, "Status", "Statut"),
    ("SquareMeters", ValueKind::Number, "Square meters", "Mètres carrés"),
    ("BuildingName", ValueKind::Text, "Building", "Bâtiment"),
    ("City", ValueKind::Text, "City", "Ville"),
    ("FloorNo", ValueKind::Number, "Floor", "Étage"),
    ("DepartmentName", ValueKind::Text, "Department", "Département"),
    ("Responsible", ValueKind::Text, "Contact person", "Personne-ressource"),
    ("LabType", ValueKind::Text, "Lab type", "Type de laboratoire"),
    ("Capacity", ValueKind::Number, "Capacity", "Capacité"),
];

fn field_kind(name: &str) -> Option<ValueKind> {
    SEARCH_FIELDS
        .iter()
        .find(|f| f.0 == name)
        .map(|f| f.1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfigField {
    pub name: String,
    pub label_en: String,
    pub label_fr: String,
    pub visible: bool,
}

/// Which fields the location search exposes, and their labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SearchConfig {
    pub locale: Locale,
    pub fields: Vec<ConfigField>,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            locale: Locale::En,
            fields: SEARCH_FIELDS
                .iter()
                .map(|(n, _, en, fr)| ConfigField {
                    name: n.to_string(),
                    label_en: en.to_string(),
                    label_fr: fr.to_string(),
                    visible: true,
                })
                .collect(),
        }
    }
}

impl SearchConfig {
    /// Parses the line format:
    ///
    /// ```text
    /// # comment
    /// locale=fr
    /// field.BuildingName.en=Building
    /// field.BuildingName.fr=Bâtiment
    /// field.BuildingName.visible=true
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = SearchConfig {
            locale: Locale::En,
            fields: Vec::new(),
        };
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: String| Error::Parse {
                line: line_no,
                reason,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected key=value".into()))?;
            let (key, value) = (key.trim(), value.trim());
            if key == "locale" {
                cfg.locale = value
                    .parse()
                    .map_err(|_| err(format!("locale must be en or fr, got {value:?}")))?;
                continue;
            }
            let parts: Vec<&str> = key.split('.').collect();
            let [ "field", name, attr ] = parts.as_slice() else {
                return Err(err(format!("unrecognized key {key:?}")));
            };
            if field_kind(name).is_none() {
                return Err(Error::unknown_field(*name));
            }
            let idx = match cfg.fields.iter().position(|f| f.name == *name) {
                Some(i) => i,
                None => {
                    cfg.fields.push(ConfigField {
                        name: name.to_string(),
                        label_en: name.to_string(),
                        label_fr: name.to_string(),
                        visible: true,
                    });
                    cfg.fields.len() - 1
                }
            };
            let f = &mut cfg.fields[idx];
            match *attr {
                "en" => f.label_en = value.to_string(),
                "fr" => f.label_fr = value.to_string(),
                "visible" => {
                    f.visible = match value {
                        "true" => true,
                        "false" => false,
                        _ => return Err(err(format!("visible must be true or false, got {value:?}"))),
                    }
                }
                _ => return Err(err(format!("unknown attribute {attr:?}"))),
            }
        }
        if cfg.fields.is_empty() {
            return Err(Error::Parse {
                line: text.lines().count().max(1),
                reason: "no fields configured".into(),
            });
        }
        Ok(cfg)
    }

    pub fn visible(&self, name: &str) -> Option<&ConfigField> {
        self.fields
            .iter()
            .find(|f| f.visible && f.name.eq_ignore_ascii_case(name))
    }

    /// Query schema over the visible fields.
    pub fn schema(&self) -> FieldSchema {
        let fields: Vec<(&str, ValueKind)> = self
            .fields
            .iter()
            .filter(|f| f.visible)
            .map(|f| (f.name.as_str(), field_kind(&f.name).expect("validated")))
            .collect();
        FieldSchema::new("Location", &fields)
    }

    pub fn view(&self, locale: Locale) -> ConfigView {
        ConfigView {
            locale,
            fields: self
                .fields
                .iter()
                .filter(|f| f.visible)
                .map(|f| FieldLabel {
                    name: f.name.clone(),
                    label: match locale {
                        Locale::En => f.label_en.clone(),
                        Locale::Fr => f.label_fr.clone(),
                    },
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldLabel {
    pub name: String,
    pub label: String,
}

/// Search metadata in one locale, for rendering result headers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfigView {
    pub locale: Locale,
    pub fields: Vec<FieldLabel>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct BuildingDraft {
    #[serde(flatten)]
    pub fields: Fields,
    #[serde(rename = "FloorCount")]
    pub floor_count: i64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BuildingCreated {
    #[serde(rename = "BuildingID")]
    pub id: EntityId,
    #[serde(rename = "FloorIDs")]
    pub floors: Vec<EntityId>,
}

/// Location payload; the profile for the location's type travels in a
/// nested object named after the type.
#[derive(Debug, Clone, Default, Deserialize)]
pub struct LocationInput {
    #[serde(flatten)]
    pub base: Fields,
    #[serde(rename = "Lab", default)]
    pub lab: Option<Fields>,
    #[serde(rename = "Room", default)]
    pub room: Option<Fields>,
    #[serde(rename = "Office", default)]
    pub office: Option<Fields>,
    #[serde(rename = "StorageCompartment", default)]
    pub compartment: Option<Fields>,
}

impl LocationInput {
    fn profile(&self, kind: &str) -> Option<&Fields> {
        match kind {
            "Lab" => self.lab.as_ref(),
            "Room" => self.room.as_ref(),
            "Office" => self.office.as_ref(),
            "StorageCompartment" => self.compartment.as_ref(),
            _ => None,
        }
    }

    fn present(&self) -> impl Iterator<Item = &'static str> + '_ {
        LOCATION_TYPES
            .into_iter()
            .filter(|k| self.profile(k).is_some())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MemberView {
    #[serde(rename = "UserID")]
    pub user: EntityId,
    #[serde(rename = "UserName")]
    pub user_name: String,
    #[serde(rename = "Name")]
    pub name: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct LocationDetail {
    #[serde(flatten)]
    pub fields: BTreeMap<String, Value>,
    #[serde(rename = "BuildingID")]
    pub building: Option<EntityId>,
    #[serde(rename = "BuildingName")]
    pub building_name: Option<String>,
    #[serde(rename = "FloorNo")]
    pub floor_no: Option<i64>,
    #[serde(rename = "DepartmentName")]
    pub department_name: Option<String>,
    /// Type-specific profile columns.
    #[serde(rename = "Profile")]
    pub profile: Option<BTreeMap<String, Value>>,
    #[serde(rename = "ResponsibleName", skip_serializing_if = "Option::is_none")]
    pub responsible_name: Option<String>,
    #[serde(rename = "Members", skip_serializing_if = "Option::is_none")]
    pub members: Option<Vec<MemberView>>,
}

/// One search result row, keyed by search field name.
pub type LocationView = BTreeMap<String, Value>;

pub struct Locations {
    cx: Arc<Context>,
    config: RwLock<Arc<SearchConfig>>,
}

struct Joined {
    floors: BTreeMap<EntityId, Arc<Row>>,
    buildings: BTreeMap<EntityId, Arc<Row>>,
    labs: BTreeMap<EntityId, Arc<Row>>,
}

impl Joined {
    fn load(cx: &Context) -> Result<Self> {
        let by_id = |kind: &str| -> Result<BTreeMap<EntityId, Arc<Row>>> {
            Ok(cx
                .store
                .scan(kind, vec![])?
                .into_iter()
                .map(|r| (r.id, r))
                .collect())
        };
        Ok(Joined {
            floors: by_id("Floor")?,
            buildings: by_id("Building")?,
            labs: by_id("Lab")?,
        })
    }

    fn building_of(&self, loc: &Row) -> Option<&Arc<Row>> {
        loc.id_of("FloorID")
            .and_then(|f| self.floors.get(&f))
            .and_then(|f| f.id_of("BuildingID"))
            .and_then(|b| self.buildings.get(&b))
    }
}

impl Locations {
    pub fn new(cx: Arc<Context>) -> Self {
        Locations {
            cx,
            config: RwLock::new(Arc::new(SearchConfig::default())),
        }
    }

    pub fn config(&self) -> Arc<SearchConfig> {
        self.config.read().clone()
    }

    /// Replaces the search configuration; readers see the old or the new
    /// one, never a mix.
    pub fn load_search_config(&self, path: &Path) -> Result<Arc<SearchConfig>> {
        let text = std::fs::read_to_string(path)?;
        self.install_config(SearchConfig::parse(&text)?)
    }

    pub fn install_config(&self, cfg: SearchConfig) -> Result<Arc<SearchConfig>> {
        let cfg = Arc::new(cfg);
        *self.config.write() = cfg.clone();
        Ok(cfg)
    }

    /// Labels in the session's locale, falling back to the configured one.
    pub fn config_view(&self, locale: Option<Locale>) -> ConfigView {
        let cfg = self.config();
        cfg.view(locale.unwrap_or(cfg.locale))
    }

    fn store(&self) -> &dyn crate::storage::Gateway {
        self.cx.store.as_ref()
    }

    pub fn create_building(&self, session: &Session, draft: &BuildingDraft) -> Result<BuildingCreated> {
        self.cx.perms.require(session, "location.add")?;
        let def = Schema::global().entity("Building")?;
        let fields = decode_all(def, &draft.fields)?;
        let name = fields
            .get("BuildingName")
            .and_then(text_of)
            .ok_or_else(|| Error::MissingMandatory("BuildingName".into()))?;
        if !(1..=MAX_FLOORS).contains(&draft.floor_count) {
            return Err(Error::invalid(
                "FloorCount",
                format!("between 1 and {MAX_FLOORS}"),
            ));
        }
        if !self
            .store()
            .scan("Building", vec![Criterion::eq("BuildingName", name)])?
            .is_empty()
        {
            return Err(Error::DuplicateName);
        }
        let mut batch = vec![Mutation::insert("Building").set_all(fields)];
        for n in 1..=draft.floor_count {
            batch.push(
                Mutation::insert("Floor")
                    .set_ref("BuildingID", 0)
                    .set("FloorNo", n),
            );
        }
        let ids = self.store().apply(batch).map_err(|e| match e {
            Error::UniqueViolation { ref entity, .. } if entity == "Building" => Error::DuplicateName,
            e => e,
        })?;
        Ok(BuildingCreated {
            id: ids[0],
            floors: ids[1..].to_vec(),
        })
    }

    fn decode_profile(kind: &str, raw: &Fields) -> Result<BTreeMap<String, Value>> {
        let def = Schema::global().entity(kind)?;
        let mut out = BTreeMap::new();
        for (k, v) in raw {
            if k == def.key {
                return Err(Error::ImmutableField(k.clone()));
            }
            let val = decode(def, k, v)?;
            if k == "Capacity" && val.as_int().is_some_and(|c| c < 0) {
                return Err(Error::invalid("Capacity", "must not be negative"));
            }
            out.insert(k.clone(), val);
        }
        Ok(out)
    }

    fn check_user_refs(&self, profile: &BTreeMap<String, Value>) -> Result<()> {
        for f in ["Responsible", "UserID"] {
            if let Some(u) = profile.get(f).and_then(Value::as_int) {
                if !self.cx.exists("User", EntityId(u))? {
                    return Err(Error::not_found("User", u));
                }
            }
        }
        Ok(())
    }

    pub fn add_location(&self, session: &Session, input: &LocationInput) -> Result<EntityId> {
        self.cx.perms.require(session, "location.add")?;
        let def = Schema::global().entity("Location")?;
        let mut base = decode_all(def, &input.base)?;
        for f in ["LocationName", "Type"] {
            if base.get(f).and_then(text_of).is_none() {
                return Err(Error::MissingMandatory(f.into()));
            }
        }
        let ty = base["Type"].as_text().expect("checked").to_string();
        if !LOCATION_TYPES.contains(&ty.as_str()) {
            return Err(Error::invalid(
                "Type",
                format!("one of {}", LOCATION_TYPES.join(", ")),
            ));
        }
        if let Some(other) = input.present().find(|k| *k != ty) {
            return Err(Error::ExtensionMismatch(format!(
                "{other} profile on a {ty} location"
            )));
        }
        match base.get("FloorID").and_then(Value::as_int) {
            Some(f) if self.cx.exists("Floor", EntityId(f))? => {}
            _ => return Err(Error::UnknownFloor),
        }
        if base.get("DepartmentID").map_or(true, Value::is_null) {
            match session.department_id {
                Some(d) => {
                    base.insert("DepartmentID".into(), d.into());
                }
                None => return Err(Error::MissingMandatory("DepartmentID".into())),
            }
        }
        let dep = base["DepartmentID"].as_int().unwrap_or(0);
        if !self.cx.exists("Department", EntityId(dep))? {
            return Err(Error::not_found("Department", dep));
        }
        if base.get("SquareMeters").and_then(Value::as_int).is_some_and(|m| m < 0) {
            return Err(Error::invalid("SquareMeters", "must not be negative"));
        }
        // Rooms and offices get a profile row only when one is sent.
        let profile = match (ty.as_str(), input.profile(&ty)) {
            ("Lab" | "StorageCompartment", None) => return Err(Error::MissingProfile),
            (_, None) => None,
            (_, Some(raw)) => Some(Self::decode_profile(&ty, raw)?),
        };
        let mut batch = vec![Mutation::insert("Location").set_all(base)];
        if let Some(profile) = profile {
            if ty == "StorageCompartment" {
                for f in ["UserID", "CompartmentNo"] {
                    if profile.get(f).map_or(true, Value::is_null) {
                        return Err(Error::MissingMandatory(f.into()));
                    }
                }
            }
            self.check_user_refs(&profile)?;
            batch.push(Mutation::insert_ext(&ty, Target::Inserted(0)).set_all(profile));
        }
        Ok(self.store().apply(batch)?[0])
    }

    fn members(&self, lab: EntityId) -> Result<Vec<Arc<Row>>> {
        self.store()
            .scan("LabMember", vec![Criterion::eq("LocationID", lab)])
    }

    pub fn get_location(&self, _session: &Session, id: EntityId) -> Result<LocationDetail> {
        let loc = self.store().fetch("Location", id)?;
        let j = Joined::load(&self.cx)?;
        let dir = self.cx.directory()?;
        let ty = loc.str("Type").to_string();
        let profile = if LOCATION_TYPES.contains(&ty.as_str()) {
            self.store().get(&ty, id)?.map(|r| {
                let mut m = r.fields.clone();
                m.remove("LocationID");
                m
            })
        } else {
            None
        };
        let (mut responsible_name, mut members) = (None, None);
        if ty == "Lab" {
            responsible_name = profile
                .as_ref()
                .and_then(|p| p.get("Responsible"))
                .and_then(Value::as_int)
                .and_then(|u| dir.display_name(EntityId(u)));
            members = Some(
                self.members(id)?
                    .iter()
                    .filter_map(|m| m.id_of("UserID"))
                    .filter_map(|u| dir.user(u))
                    .map(|u| MemberView {
                        user: u.id,
                        user_name: u.user_name.clone(),
                        name: u.display_name(),
                    })
                    .collect(),
            );
        }
        let floor = loc.id_of("FloorID").and_then(|f| j.floors.get(&f));
        let building = j.building_of(&loc);
        Ok(LocationDetail {
            fields: loc.fields.clone(),
            building: building.map(|b| b.id),
            building_name: building.map(|b| b.str("BuildingName").to_string()),
            floor_no: floor.and_then(|f| f.int("FloorNo")),
            department_name: loc
                .id_of("DepartmentID")
                .and_then(|d| dir.department_name(d))
                .map(str::to_string),
            profile,
            responsible_name,
            members,
        })
    }

    fn view_of(&self, loc: &Row, j: &Joined) -> Result<LocationView> {
        let dir = self.cx.directory()?;
        let mut v = LocationView::new();
        for f in ["LocationID", "LocationName", "Type", "Status", "SquareMeters"] {
            v.insert(f.into(), loc.get(f).clone());
        }
        let building = j.building_of(loc);
        v.insert(
            "BuildingName".into(),
            building.map(|b| b.get("BuildingName").clone()).unwrap_or_default(),
        );
        v.insert(
            "City".into(),
            building.map(|b| b.get("City").clone()).unwrap_or_default(),
        );
        v.insert(
            "FloorNo".into(),
            loc.id_of("FloorID")
                .and_then(|f| j.floors.get(&f))
                .map(|f| f.get("FloorNo").clone())
                .unwrap_or_default(),
        );
        v.insert(
            "DepartmentName".into(),
            loc.id_of("DepartmentID")
                .and_then(|d| dir.department_name(d))
                .map(str::to_string)
                .into(),
        );
        let lab = j.labs.get(&loc.id);
        v.insert(
            "Responsible".into(),
            lab.and_then(|l| l.id_of("Responsible"))
                .and_then(|u| dir.display_name(u))
                .into(),
        );
        v.insert(
            "LabType".into(),
            lab.map(|l| l.get("LabType").clone()).unwrap_or_default(),
        );
        v.insert(
            "Capacity".into(),
            lab.map(|l| l.get("Capacity").clone()).unwrap_or_default(),
        );
        Ok(v)
    }

    fn all_views(&self) -> Result<Vec<LocationView>> {
        let j = Joined::load(&self.cx)?;
        self.store()
            .scan("Location", vec![])?
            .iter()
            .map(|l| self.view_of(l, &j))
            .collect()
    }

    /// Per-field case-insensitive substring match; several fields
    /// intersect.
    pub fn search(
        &self,
        _session: &Session,
        criteria: &BTreeMap<String, String>,
        offset: usize,
        limit: Option<usize>,
    ) -> Result<Page<LocationView>> {
        let cfg = self.config();
        let mut wanted = Vec::new();
        for (k, v) in criteria {
            let f = cfg
                .visible(k)
                .ok_or_else(|| Error::FieldNotSearchable(k.clone()))?;
            if !v.trim().is_empty() {
                wanted.push((f.name.clone(), v.trim().to_lowercase()));
            }
        }
        let rows = self
            .all_views()?
            .into_iter()
            .filter(|v| {
                wanted.iter().all(|(f, needle)| {
                    let val = v.get(f).unwrap_or(&Value::Null);
                    !val.is_null() && val.render().to_lowercase().contains(needle)
                })
            })
            .collect();
        Ok(Page::slice(rows, offset, limit))
    }

    /// Search with the query language over the visible fields.
    pub fn search_query(
        &self,
        _session: &Session,
        q: &str,
        offset: usize,
        limit: Option<usize>,
    ) -> Result<Page<LocationView>> {
        let cfg = self.config();
        let schema = cfg.schema();
        let ast: QueryAst = query::parse(q, &schema).map_err(|e| match e {
            Error::UnknownField { field } => Error::FieldNotSearchable(field),
            e => e,
        })?;
        let dnf = query::compile(&ast, &schema)?;
        let rows = self
            .all_views()?
            .into_iter()
            .filter(|v| query::matches(&dnf, v))
            .collect();
        Ok(Page::slice(rows, offset, limit))
    }

    pub fn edit_location(
        &self,
        session: &Session,
        id: EntityId,
        changes: &LocationInput,
    ) -> Result<LocationDetail> {
        self.cx.perms.require(session, "location.edit")?;
        let loc = self.store().fetch("Location", id)?;
        for f in ["LocationID", "Type"] {
            if changes.base.contains_key(f) {
                return Err(Error::ImmutableField(f.into()));
            }
        }
        let ty = loc.str("Type").to_string();
        if let Some(other) = changes.present().find(|k| *k != ty) {
            return Err(Error::ExtensionMismatch(format!(
                "{other} profile on a {ty} location"
            )));
        }
        let def = Schema::global().entity("Location")?;
        let base = decode_all(def, &changes.base)?;
        if base.contains_key("LocationName") && base.get("LocationName").and_then(text_of).is_none() {
            return Err(Error::MissingMandatory("LocationName".into()));
        }
        if let Some(f) = base.get("FloorID") {
            match f.as_int() {
                Some(f) if self.cx.exists("Floor", EntityId(f))? => {}
                _ => return Err(Error::UnknownFloor),
            }
        }
        if let Some(d) = base.get("DepartmentID") {
            let d = d.as_int().unwrap_or(0);
            if !self.cx.exists("Department", EntityId(d))? {
                return Err(Error::not_found("Department", d));
            }
        }
        if base.get("SquareMeters").and_then(Value::as_int).is_some_and(|m| m < 0) {
            return Err(Error::invalid("SquareMeters", "must not be negative"));
        }
        let mut batch = Vec::new();
        if !base.is_empty() {
            batch.push(
                Mutation::update("Location", id)
                    .set_all(base)
                    .expect_version(loc.version),
            );
        }
        if let Some(raw) = changes.profile(&ty) {
            let profile = Self::decode_profile(&ty, raw)?;
            self.check_user_refs(&profile)?;
            if ty == "Lab" {
                if let Some(cap) = profile.get("Capacity").and_then(Value::as_int) {
                    if (self.members(id)?.len() as i64) > cap {
                        return Err(Error::CapacityExceeded);
                    }
                }
            }
            if !profile.is_empty() {
                match self.store().get(&ty, id)? {
                    Some(r) => batch.push(
                        Mutation::update(&ty, id)
                            .set_all(profile)
                            .expect_version(r.version),
                    ),
                    None => batch.push(Mutation::insert_ext(&ty, id).set_all(profile)),
                }
            }
        }
        if !batch.is_empty() {
            self.store().apply(batch)?;
        }
        self.get_location(session, id)
    }

    fn lab(&self, id: EntityId) -> Result<Arc<Row>> {
        let loc = self.store().fetch("Location", id)?;
        if loc.text("Type") != Some("Lab") {
            return Err(Error::NotALab);
        }
        self.store().get("Lab", id)?.ok_or(Error::NotALab)
    }

    pub fn assign_lab_responsible(
        &self,
        session: &Session,
        lab: EntityId,
        user: EntityId,
    ) -> Result<LocationDetail> {
        self.cx.perms.require(session, "lab.assign")?;
        let row = self.lab(lab)?;
        self.store().fetch("User", user)?;
        self.store().apply(vec![Mutation::update("Lab", lab)
            .set("Responsible", user)
            .expect_version(row.version)])?;
        self.get_location(session, lab)
    }

    pub fn add_lab_member(
        &self,
        session: &Session,
        lab: EntityId,
        user: EntityId,
    ) -> Result<LocationDetail> {
        self.cx.perms.require(session, "lab.assign")?;
        self.store().fetch("User", user)?;
        // The capacity check and the insert race with other adders; the
        // version guard on the lab row turns a lost race into a retry.
        for _ in 0..16 {
            let row = self.lab(lab)?;
            let members: BTreeSet<EntityId> = self
                .members(lab)?
                .iter()
                .filter_map(|m| m.id_of("UserID"))
                .collect();
            if members.contains(&user) {
                return Err(Error::AlreadyMember);
            }
            if let Some(cap) = row.int("Capacity") {
                if members.len() as i64 >= cap {
                    return Err(Error::CapacityExceeded);
                }
            }
            let batch = vec![
                Mutation::update("Lab", lab)
                    .set("Capacity", row.get("Capacity").clone())
                    .expect_version(row.version),
                Mutation::insert("LabMember")
                    .set("LocationID", lab)
                    .set("UserID", user),
            ];
            match self.store().apply(batch) {
                Ok(_) => return self.get_location(session, lab),
                Err(Error::Conflict { .. }) => continue,
                Err(Error::UniqueViolation { .. }) => return Err(Error::AlreadyMember),
                Err(e) => return Err(e),
            }
        }
        Err(Error::Conflict {
            entity: "Lab".into(),
            id: lab.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_config_lines() {
        let cfg = SearchConfig::parse(
            "# comment\nlocale=fr\nfield.BuildingName.en=Building\nfield.BuildingName.fr=Bâtiment\n\nfield.Type.visible=false\n",
        )
        .unwrap();
        assert_eq!(cfg.locale, Locale::Fr);
        assert_eq!(cfg.fields.len(), 2);
        assert!(cfg.visible("BuildingName").is_some());
        assert!(cfg.visible("Type").is_none());
        let v = cfg.view(Locale::Fr);
        assert_eq!(v.fields[0].label, "Bâtiment");
        assert_eq!(cfg.view(Locale::En).fields[0].label, "Building");
    }

    #[test]
    fn malformed_line_reports_its_number() {
        let e = SearchConfig::parse("locale=en\nfield.Type.en=Type\nnonsense\n").unwrap_err();
        assert_eq!(
            e,
            Error::Parse {
                line: 3,
                reason: "expected key=value".into()
            }
        );
        let e = SearchConfig::parse("locale=de\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn unknown_config_field_is_rejected() {
        let e = SearchConfig::parse("field.Nope.en=x\n").unwrap_err();
        assert_eq!(e.code(), "UNKNOWN_FIELD");
    }

    #[test]
    fn default_config_covers_every_field() {
        let cfg = SearchConfig::default();
        assert_eq!(cfg.fields.len(), SEARCH_FIELDS.len());
        assert_eq!(cfg.schema().fields.len(), SEARCH_FIELDS.len());
    }
}
