//! Software titles and licenses: seats, user assignments, computer
//! installations and expiry notification.

use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::NaiveDate;
use serde::Serialize;

use crate::context::{decode_all, text_of, Context, Fields};
use crate::error::{Error, Result};
use crate::query::{self, FieldSchema, QueryAst, ValueKind};
use crate::session::Session;
use crate::storage::{Criterion, EntityId, Gateway, Mutation, Page, Row, Schema, Value};

/// Attempts at a seat-consuming batch before giving up on contention.
const SEAT_RETRIES: usize = 64;

pub fn search_schema() -> FieldSchema {
    use ValueKind::*;
    FieldSchema::new(
        "Software",
        &[
            ("Vendor", Text),
            ("Title", Text),
            ("Version", Text),
            ("Category", Text),
            ("Media", Text),
            ("License", Text),
            ("LicenseExpiry", Date),
            ("Contact", Text),
            ("PoNumber", Text),
            ("ReqNum", Text),
            ("Department", Text),
            ("SoftwareID", Number),
            ("LicenseID", Number),
        ],
    )
}

#[derive(Debug, Clone, Serialize)]
pub struct LicenseDetail {
    #[serde(flatten)]
    pub fields: BTreeMap<String, Value>,
    #[serde(rename = "DepartmentName")]
    pub department_name: Option<String>,
    #[serde(rename = "FacultyName")]
    pub faculty_name: Option<String>,
    #[serde(rename = "Remaining")]
    pub remaining: i64,
    #[serde(rename = "AssignedUsers")]
    pub assigned_users: Vec<EntityId>,
    #[serde(rename = "InstalledOn")]
    pub installed_on: Vec<EntityId>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SoftwareDetail {
    #[serde(flatten)]
    pub fields: BTreeMap<String, Value>,
    #[serde(rename = "Licenses")]
    pub licenses: Vec<LicenseDetail>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeatUse {
    #[serde(rename = "LicenseID")]
    pub license: EntityId,
    /// Assignment or installation row id.
    #[serde(rename = "ID")]
    pub id: EntityId,
    #[serde(rename = "Remaining")]
    pub remaining: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExpiryRow {
    #[serde(rename = "LicenseID")]
    pub license: EntityId,
    #[serde(rename = "SoftwareName")]
    pub software: String,
    #[serde(rename = "ExpirationDate")]
    pub expires: NaiveDate,
    #[serde(rename = "DaysRemaining")]
    pub days_remaining: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExpiryReport {
    pub as_of: NaiveDate,
    pub window_days: i64,
    /// Expiring within the window, soonest first.
    pub expiring: Vec<ExpiryRow>,
    /// Already expired, most recently expired first.
    pub expired: Vec<ExpiryRow>,
}

/// One search result row: a license joined with its title, or a title
/// without licenses.
pub type SoftwareView = BTreeMap<String, Value>;

/// Seat use of one license recomputed from the relationship rows.
pub fn seats_used(store: &dyn Gateway, license: EntityId) -> Result<(i64, i64)> {
    let a = store
        .scan("LicenseAssignment", vec![Criterion::eq("LicenseID", license)])?
        .len() as i64;
    let i = store
        .scan(
            "LicenseInstalledInComputer",
            vec![Criterion::eq("LicenseID", license)],
        )?
        .len() as i64;
    Ok((a, i))
}

pub fn remaining(store: &dyn Gateway, license: &Row) -> Result<i64> {
    let (a, i) = seats_used(store, license.id)?;
    Ok(license.int("SeatCount").unwrap_or(0) - a - i)
}

pub struct Software {
    cx: Arc<Context>,
}

fn unique_to_duplicate(e: Error) -> Error {
    match e {
        Error::UniqueViolation { ref entity, .. } if entity == "Software" => Error::Duplicate,
        e => e,
    }
}

impl Software {
    pub fn new(cx: Arc<Context>) -> Self {
        Software { cx }
    }

    fn store(&self) -> &dyn Gateway {
        self.cx.store.as_ref()
    }

    fn duplicate_of(&self, name: &str, version: &str, except: Option<EntityId>) -> Result<bool> {
        Ok(self
            .store()
            .scan(
                "Software",
                vec![Criterion::eq("Name", name), Criterion::eq("VersionID", version)],
            )?
            .iter()
            .any(|r| Some(r.id) != except))
    }

    pub fn add_software(&self, session: &Session, draft: &Fields) -> Result<EntityId> {
        self.cx.perms.require(session, "software.add")?;
        let def = Schema::global().entity("Software")?;
        let fields = decode_all(def, draft)?;
        for f in ["Name", "VersionID"] {
            if fields.get(f).and_then(text_of).is_none() {
                return Err(Error::MissingMandatory(f.into()));
            }
        }
        if self.duplicate_of(
            fields["Name"].as_text().unwrap_or(""),
            fields["VersionID"].as_text().unwrap_or(""),
            None,
        )? {
            return Err(Error::Duplicate);
        }
        let ids = self
            .store()
            .apply(vec![Mutation::insert("Software").set_all(fields)])
            .map_err(unique_to_duplicate)?;
        Ok(ids[0])
    }

    pub fn edit_software(
        &self,
        session: &Session,
        id: EntityId,
        changes: &Fields,
    ) -> Result<SoftwareDetail> {
        self.cx.perms.require(session, "software.edit")?;
        let row = self.store().fetch("Software", id)?;
        let def = Schema::global().entity("Software")?;
        let fields = decode_all(def, changes)?;
        for f in ["Name", "VersionID"] {
            if fields.contains_key(f) && fields.get(f).and_then(text_of).is_none() {
                return Err(Error::MissingMandatory(f.into()));
            }
        }
        let pick = |f: &str| {
            fields
                .get(f)
                .and_then(Value::as_text)
                .unwrap_or(row.str(f))
                .to_string()
        };
        if self.duplicate_of(&pick("Name"), &pick("VersionID"), Some(id))? {
            return Err(Error::Duplicate);
        }
        if !fields.is_empty() {
            self.store()
                .apply(vec![Mutation::update("Software", id)
                    .set_all(fields)
                    .expect_version(row.version)])
                .map_err(unique_to_duplicate)?;
        }
        self.detail(id)
    }

    fn license_detail(&self, l: &Row) -> Result<LicenseDetail> {
        let dir = self.cx.directory()?;
        let assigned: Vec<EntityId> = self
            .store()
            .scan("LicenseAssignment", vec![Criterion::eq("LicenseID", l.id)])?
            .iter()
            .filter_map(|r| r.id_of("UserID"))
            .collect();
        let installed: Vec<EntityId> = self
            .store()
            .scan(
                "LicenseInstalledInComputer",
                vec![Criterion::eq("LicenseID", l.id)],
            )?
            .iter()
            .filter_map(|r| r.id_of("AssetID"))
            .collect();
        let dep = l.id_of("DepartmentID");
        Ok(LicenseDetail {
            fields: l.fields.clone(),
            department_name: dep.and_then(|d| dir.department_name(d)).map(str::to_string),
            faculty_name: dep
                .and_then(|d| dir.faculty_of_department(d))
                .and_then(|f| dir.faculty_name(f))
                .map(str::to_string),
            remaining: l.int("SeatCount").unwrap_or(0)
                - assigned.len() as i64
                - installed.len() as i64,
            assigned_users: assigned,
            installed_on: installed,
        })
    }

    fn detail(&self, id: EntityId) -> Result<SoftwareDetail> {
        let row = self.store().fetch("Software", id)?;
        let licenses = self
            .store()
            .scan("License", vec![Criterion::eq("SoftwareID", id)])?
            .iter()
            .map(|l| self.license_detail(l))
            .collect::<Result<_>>()?;
        Ok(SoftwareDetail {
            fields: row.fields.clone(),
            licenses,
        })
    }

    pub fn get_software(&self, _session: &Session, id: EntityId) -> Result<SoftwareDetail> {
        self.detail(id)
    }

    fn views(&self) -> Result<Vec<SoftwareView>> {
        let dir = self.cx.directory()?;
        let mut by_title: BTreeMap<EntityId, Vec<Arc<Row>>> = BTreeMap::new();
        for l in self.store().scan("License", vec![])? {
            if let Some(s) = l.id_of("SoftwareID") {
                by_title.entry(s).or_default().push(l);
            }
        }
        let mut out = Vec::new();
        for s in self.store().scan("Software", vec![])? {
            let base = |v: &mut SoftwareView| {
                v.insert("SoftwareID".into(), s.id.into());
                v.insert("Vendor".into(), s.get("VendorName").clone());
                v.insert("Title".into(), s.get("Name").clone());
                v.insert("Version".into(), s.get("VersionID").clone());
                v.insert("Category".into(), s.get("Category").clone());
                v.insert("Media".into(), s.get("Media").clone());
            };
            let licenses = by_title.remove(&s.id).unwrap_or_default();
            if licenses.is_empty() {
                let mut v = SoftwareView::new();
                base(&mut v);
                for f in [
                    "LicenseID",
                    "License",
                    "LicenseExpiry",
                    "Contact",
                    "PoNumber",
                    "ReqNum",
                    "Department",
                ] {
                    v.insert(f.into(), Value::Null);
                }
                out.push(v);
            }
            for l in licenses {
                let mut v = SoftwareView::new();
                base(&mut v);
                v.insert("LicenseID".into(), l.id.into());
                v.insert("License".into(), l.get("Type").clone());
                v.insert(
                    "LicenseExpiry".into(),
                    l.get("ExpirationDate")
                        .as_time()
                        .map(|t| t.format("%Y-%m-%d").to_string())
                        .into(),
                );
                v.insert(
                    "Contact".into(),
                    l.id_of("UserID").and_then(|u| dir.display_name(u)).into(),
                );
                v.insert("PoNumber".into(), l.get("PoNumber").clone());
                v.insert("ReqNum".into(), l.get("PRequest").clone());
                v.insert(
                    "Department".into(),
                    l.id_of("DepartmentID")
                        .and_then(|d| dir.department_name(d))
                        .map(str::to_string)
                        .into(),
                );
                out.push(v);
            }
        }
        Ok(out)
    }

    pub fn search(
        &self,
        _session: &Session,
        q: &QueryAst,
        offset: usize,
        limit: Option<usize>,
    ) -> Result<Page<SoftwareView>> {
        let dnf = query::compile(q, &search_schema())?;
        let rows = self
            .views()?
            .into_iter()
            .filter(|v| query::matches(&dnf, v))
            .collect();
        Ok(Page::slice(rows, offset, limit))
    }

    pub fn add_license(
        &self,
        session: &Session,
        software: EntityId,
        draft: &Fields,
    ) -> Result<EntityId> {
        self.cx.perms.require(session, "software.add")?;
        self.store().fetch("Software", software)?;
        let def = Schema::global().entity("License")?;
        let mut fields = decode_all(def, draft)?;
        if fields.contains_key("SoftwareID") {
            return Err(Error::ImmutableField("SoftwareID".into()));
        }
        fields.insert("SoftwareID".into(), software.into());
        if fields.get("DepartmentID").map_or(true, Value::is_null) {
            if let Some(d) = session.department_id {
                fields.insert("DepartmentID".into(), d.into());
            }
        }
        if fields.get("UserID").map_or(true, Value::is_null) {
            fields.insert("UserID".into(), session.user_id.into());
        }
        for f in ["DepartmentID", "Key", "DatePurchased", "Type", "ExpirationDate", "SeatCount"] {
            let v = fields.get(f).unwrap_or(&Value::Null);
            if v.is_null() || v.as_text().is_some_and(|s| s.trim().is_empty()) {
                return Err(Error::MissingMandatory(f.into()));
            }
        }
        for (f, kind) in [("DepartmentID", "Department"), ("UserID", "User")] {
            let id = fields[f].as_int().unwrap_or(0);
            if !self.cx.exists(kind, EntityId(id))? {
                return Err(Error::not_found(kind, id));
            }
        }
        if fields["SeatCount"].as_int().unwrap_or(0) < 1 {
            return Err(Error::invalid("SeatCount", "at least 1"));
        }
        if fields["ExpirationDate"].as_time() < fields["DatePurchased"].as_time() {
            return Err(Error::DateOrder);
        }
        Ok(self
            .store()
            .apply(vec![Mutation::insert("License").set_all(fields)])?[0])
    }

    /// Consumes one seat with `record`, serialized against other consumers
    /// of the same license by a version guard on the license row.
    fn consume_seat(
        &self,
        license: EntityId,
        exists: impl Fn() -> Result<bool>,
        already: Error,
        record: Mutation,
    ) -> Result<SeatUse> {
        for _ in 0..SEAT_RETRIES {
            let l = self.store().fetch("License", license)?;
            if exists()? {
                return Err(already.clone());
            }
            if remaining(self.store(), &l)? < 1 {
                return Err(Error::NoSeatsRemaining);
            }
            let batch = vec![
                Mutation::update("License", license)
                    .set("SeatCount", l.get("SeatCount").clone())
                    .expect_version(l.version),
                record.clone(),
            ];
            match self.store().apply(batch) {
                Ok(ids) => {
                    let l = self.store().fetch("License", license)?;
                    return Ok(SeatUse {
                        license,
                        id: ids[0],
                        remaining: remaining(self.store(), &l)?,
                    });
                }
                Err(Error::Conflict { .. }) => continue,
                Err(Error::UniqueViolation { .. }) => return Err(already.clone()),
                Err(e) => return Err(e),
            }
        }
        Err(Error::Conflict {
            entity: "License".into(),
            id: license.0,
        })
    }

    pub fn assign_license(
        &self,
        session: &Session,
        license: EntityId,
        user: EntityId,
    ) -> Result<SeatUse> {
        self.cx.perms.require(session, "license.assign")?;
        self.store().fetch("License", license)?;
        self.store().fetch("User", user)?;
        let store = self.store();
        self.consume_seat(
            license,
            || {
                Ok(!store
                    .scan(
                        "LicenseAssignment",
                        vec![Criterion::eq("LicenseID", license), Criterion::eq("UserID", user)],
                    )?
                    .is_empty())
            },
            Error::AlreadyAssigned,
            Mutation::insert("LicenseAssignment")
                .set("LicenseID", license)
                .set("UserID", user),
        )
    }

    pub fn install_license(
        &self,
        session: &Session,
        license: EntityId,
        asset: EntityId,
    ) -> Result<SeatUse> {
        self.cx.perms.require(session, "license.assign")?;
        self.store().fetch("License", license)?;
        let a = self.store().fetch("PhysicalAsset", asset)?;
        if a.text("Category") != Some("Computer") || self.store().get("Computer", asset)?.is_none() {
            return Err(Error::NotAComputer);
        }
        let store = self.store();
        self.consume_seat(
            license,
            || {
                Ok(!store
                    .scan(
                        "LicenseInstalledInComputer",
                        vec![Criterion::eq("LicenseID", license), Criterion::eq("AssetID", asset)],
                    )?
                    .is_empty())
            },
            Error::AlreadyInstalled,
            Mutation::insert("LicenseInstalledInComputer")
                .set("LicenseID", license)
                .set("AssetID", asset),
        )
    }

    pub fn licenses_near_expiry(
        &self,
        session: &Session,
        window_days: i64,
        as_of: NaiveDate,
    ) -> Result<ExpiryReport> {
        self.cx.perms.require(session, "software.edit")?;
        expiry_report(self.store(), window_days, as_of)
    }
}

/// Licenses expiring within `window_days` of `as_of`, plus those already
/// expired. Pure function of the store content.
pub fn expiry_report(store: &dyn Gateway, window_days: i64, as_of: NaiveDate) -> Result<ExpiryReport> {
    if window_days < 0 {
        return Err(Error::invalid("days", "must not be negative"));
    }
    let names: BTreeMap<EntityId, String> = store
        .scan("Software", vec![])?
        .iter()
        .map(|s| (s.id, s.str("Name").to_string()))
        .collect();
    let mut expiring = Vec::new();
    let mut expired = Vec::new();
    for l in store.scan("License", vec![])? {
        let Some(exp) = l.get("ExpirationDate").as_time() else {
            continue;
        };
        let expires = exp.date_naive();
        let days = (expires - as_of).num_days();
        let row = ExpiryRow {
            license: l.id,
            software: l
                .id_of("SoftwareID")
                .and_then(|s| names.get(&s).cloned())
                .unwrap_or_default(),
            expires,
            days_remaining: days,
        };
        if days < 0 {
            expired.push(row);
        } else if days <= window_days {
            expiring.push(row);
        }
    }
    expiring.sort_by_key(|r| (r.days_remaining, r.license));
    expired.sort_by_key(|r| (-r.days_remaining, r.license));
    Ok(ExpiryReport {
        as_of,
        window_days,
        expiring,
        expired,
    })
}
