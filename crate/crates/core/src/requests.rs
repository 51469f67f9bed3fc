//! General and specific change requests: submission, scoped search and
//! the Pending → Approved → Closed lifecycle.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::context::Context;
use crate::directory::Directory;
use crate::error::{Error, Result};
use crate::query::{self, FieldSchema, QueryAst, ValueKind};
use crate::session::Session;
use crate::storage::{Criterion, EntityId, Gateway, Mutation, Page, Row, Value};

pub const GENERAL_CATEGORIES: [&str; 2] = ["Technical", "Administrative"];
pub const SPECIFIC_CATEGORIES: [&str; 4] =
    ["MoveAsset", "AssignAsset", "ReserveCompartment", "Other"];
pub const STATUSES: [&str; 3] = ["Pending", "Approved", "Closed"];
pub const DESCRIPTION_MAX: usize = 256;

/// Legal status moves.
pub fn transition_allowed(from: &str, to: &str) -> bool {
    matches!(
        (from, to),
        ("Pending", "Approved") | ("Pending", "Closed") | ("Approved", "Closed")
    )
}

pub fn search_schema() -> FieldSchema {
    use ValueKind::*;
    FieldSchema::new(
        "Request",
        &[
            ("RequestID", Number),
            ("Originator", Text),
            ("Department", Text),
            ("Faculty", Text),
            ("Kind", Text),
            ("Category", Text),
            ("Status", Text),
            ("Description", Text),
            ("BarCode", Text),
            ("LocationName", Text),
            ("UserName", Text),
        ],
    )
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecificDraft {
    #[serde(rename = "Category")]
    pub category: String,
    #[serde(rename = "Description", default)]
    pub description: Option<String>,
    #[serde(rename = "BarCode", default)]
    pub bar_code: Option<String>,
    #[serde(rename = "LocationName", default)]
    pub location_name: Option<String>,
    #[serde(rename = "GroupID", default)]
    pub group: Option<i64>,
    #[serde(rename = "UserName", default)]
    pub user_name: Option<String>,
    #[serde(rename = "CompartmentNo", default)]
    pub compartment: Option<i64>,
}

/// Search filters. An absent or empty status set selects nothing; an
/// absent category set selects every category.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestFilter {
    #[serde(default)]
    pub statuses: Vec<String>,
    #[serde(default)]
    pub categories: Option<Vec<String>>,
    /// Requester user name.
    #[serde(default)]
    pub originator: Option<String>,
    /// Name of one of the requester's departments.
    #[serde(default)]
    pub department: Option<String>,
    /// Name of one of the requester's faculties.
    #[serde(default)]
    pub faculty: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RequestDetail {
    #[serde(flatten)]
    pub fields: BTreeMap<String, Value>,
    #[serde(rename = "RequesterName")]
    pub requester_name: Option<String>,
    #[serde(rename = "ApproverName")]
    pub approver_name: Option<String>,
}

/// Who may see a request submitted by `requester`.
pub fn visible_to(session: &Session, requester: EntityId, dir: &Directory) -> bool {
    let Some(r) = dir.user(requester) else {
        return false;
    };
    match session.level {
        3.. => true,
        2 => {
            r.level <= 2
                && session
                    .faculty_id
                    .is_some_and(|f| dir.faculties_of(requester).contains(&f))
        }
        1 => {
            r.level <= 1
                && session
                    .department_id
                    .is_some_and(|d| r.departments.contains(&d))
        }
        0 => requester == session.user_id,
    }
}

fn truncate(s: &str, max: usize) -> String {
    s.chars().take(max).collect()
}

pub struct Requests {
    cx: Arc<Context>,
}

impl Requests {
    pub fn new(cx: Arc<Context>) -> Self {
        Requests { cx }
    }

    fn store(&self) -> &dyn Gateway {
        self.cx.store.as_ref()
    }

    pub fn submit_general(
        &self,
        session: &Session,
        category: &str,
        description: &str,
    ) -> Result<EntityId> {
        if !GENERAL_CATEGORIES.contains(&category) {
            return Err(Error::BadCategory(category.to_string()));
        }
        if description.trim().is_empty() {
            return Err(Error::MissingDescription);
        }
        let ids = self.store().apply(vec![Mutation::insert("Request")
            .set("UserID", session.user_id)
            .set("Kind", "General")
            .set("Category", category)
            .set("Description", truncate(description, DESCRIPTION_MAX))])?;
        Ok(ids[0])
    }

    pub fn submit_specific(&self, session: &Session, draft: &SpecificDraft) -> Result<EntityId> {
        if !SPECIFIC_CATEGORIES.contains(&draft.category.as_str()) {
            return Err(Error::BadCategory(draft.category.clone()));
        }
        let present = |s: &Option<String>| s.clone().filter(|s| !s.is_empty());
        let bar_code = present(&draft.bar_code);
        let location = present(&draft.location_name);
        let user = present(&draft.user_name);
        let store = self.store();
        let resolves = |kind: &str, field: &str, v: &str| -> Result<bool> {
            Ok(!store.scan(kind, vec![Criterion::eq(field, v)])?.is_empty())
        };
        if let Some(b) = &bar_code {
            if !resolves("PhysicalAsset", "BarCode", b)? {
                return Err(Error::UnresolvedReference("BarCode".into()));
            }
        }
        if let Some(l) = &location {
            if !resolves("Location", "LocationName", l)? {
                return Err(Error::UnresolvedReference("LocationName".into()));
            }
        }
        if let Some(g) = draft.group {
            if store.get("Group", EntityId(g))?.is_none() {
                return Err(Error::UnresolvedReference("GroupID".into()));
            }
        }
        if let Some(u) = &user {
            if !resolves("User", "UserName", u)? {
                return Err(Error::UnresolvedReference("UserName".into()));
            }
        }
        if draft.compartment.is_some_and(|c| c < 0) {
            return Err(Error::invalid("CompartmentNo", "must not be negative"));
        }
        let description = present(&draft.description).map(|d| truncate(&d, DESCRIPTION_MAX));
        let ids = store.apply(vec![Mutation::insert("Request")
            .set("UserID", session.user_id)
            .set("Kind", "Specific")
            .set("Category", draft.category.as_str())
            .set("Description", description)
            .set("BarCode", bar_code)
            .set("LocationName", location)
            .set("GroupID", draft.group)
            .set("UserName", user)
            .set("CompartmentNo", draft.compartment)])?;
        Ok(ids[0])
    }

    fn view_of(row: &Row, dir: &Directory) -> BTreeMap<String, Value> {
        let mut v = BTreeMap::new();
        let requester = row.id_of("UserID").and_then(|u| dir.user(u));
        v.insert("RequestID".into(), row.id.into());
        v.insert(
            "Originator".into(),
            requester.map(|u| u.user_name.clone()).into(),
        );
        let deps: Vec<&str> = requester
            .map(|u| {
                u.departments
                    .iter()
                    .filter_map(|d| dir.department_name(*d))
                    .collect()
            })
            .unwrap_or_default();
        v.insert("Department".into(), Some(deps.join(", ")).filter(|s| !s.is_empty()).into());
        let facs: BTreeSet<&str> = requester
            .map(|u| {
                dir.faculties_of(u.id)
                    .iter()
                    .filter_map(|f| dir.faculty_name(*f))
                    .collect()
            })
            .unwrap_or_default();
        let facs: Vec<&str> = facs.into_iter().collect();
        v.insert("Faculty".into(), Some(facs.join(", ")).filter(|s| !s.is_empty()).into());
        for f in [
            "Kind",
            "Category",
            "Status",
            "Description",
            "BarCode",
            "LocationName",
            "UserName",
        ] {
            v.insert(f.into(), row.get(f).clone());
        }
        v
    }

    fn matches_filter(row: &Row, f: &RequestFilter, dir: &Directory) -> Result<bool> {
        if !f.statuses.iter().any(|s| row.text("Status") == Some(s.as_str())) {
            return Ok(false);
        }
        if let Some(cats) = &f.categories {
            if !cats.iter().any(|c| row.text("Category") == Some(c.as_str())) {
                return Ok(false);
            }
        }
        let Some(requester) = row.id_of("UserID").and_then(|u| dir.user(u)) else {
            return Ok(false);
        };
        if let Some(o) = f.originator.as_deref().filter(|s| !s.is_empty()) {
            if !requester.user_name.eq_ignore_ascii_case(o) {
                return Ok(false);
            }
        }
        if let Some(d) = f.department.as_deref().filter(|s| !s.is_empty()) {
            let hit = requester
                .departments
                .iter()
                .filter_map(|x| dir.department_name(*x))
                .any(|n| n.eq_ignore_ascii_case(d));
            if !hit {
                return Ok(false);
            }
        }
        if let Some(fac) = f.faculty.as_deref().filter(|s| !s.is_empty()) {
            let hit = dir
                .faculties_of(requester.id)
                .iter()
                .filter_map(|x| dir.faculty_name(*x))
                .any(|n| n.eq_ignore_ascii_case(fac));
            if !hit {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn search(
        &self,
        session: &Session,
        filter: &RequestFilter,
        q: &QueryAst,
        offset: usize,
        limit: Option<usize>,
    ) -> Result<Page<BTreeMap<String, Value>>> {
        for s in &filter.statuses {
            if !STATUSES.contains(&s.as_str()) {
                return Err(Error::invalid("Status", format!("unknown status {s:?}")));
            }
        }
        let dnf = query::compile(q, &search_schema())?;
        let dir = self.cx.directory()?;
        let mut criteria = Vec::new();
        if session.level == 0 {
            criteria.push(Criterion::eq("UserID", session.user_id));
        }
        let mut out = Vec::new();
        for row in self.store().scan("Request", criteria)? {
            let Some(requester) = row.id_of("UserID") else {
                continue;
            };
            if !visible_to(session, requester, &dir) || !Self::matches_filter(&row, filter, &dir)? {
                continue;
            }
            let v = Self::view_of(&row, &dir);
            if query::matches(&dnf, &v) {
                out.push(v);
            }
        }
        Ok(Page::slice(out, offset, limit))
    }

    fn visible(&self, session: &Session, id: EntityId) -> Result<Arc<Row>> {
        let dir = self.cx.directory()?;
        match self.store().get("Request", id)? {
            Some(r)
                if r
                    .id_of("UserID")
                    .is_some_and(|u| visible_to(session, u, &dir)) =>
            {
                Ok(r)
            }
            _ => Err(Error::not_found("Request", id.0)),
        }
    }

    fn detail_of(&self, row: &Row) -> Result<RequestDetail> {
        let dir = self.cx.directory()?;
        let name = |f: &str| {
            row.id_of(f)
                .and_then(|u| dir.user(u))
                .map(|u| u.user_name.clone())
        };
        Ok(RequestDetail {
            fields: row.fields.clone(),
            requester_name: name("UserID"),
            approver_name: name("ApproverID"),
        })
    }

    pub fn get_request(&self, session: &Session, id: EntityId) -> Result<RequestDetail> {
        let row = self.visible(session, id)?;
        self.detail_of(&row)
    }

    /// Moves a request to `to` if its current status still allows it when
    /// the batch commits.
    fn transition(
        &self,
        session: &Session,
        id: EntityId,
        check: impl Fn(&Row) -> Result<()>,
        to: &str,
        note: Option<&str>,
    ) -> Result<RequestDetail> {
        loop {
            let row = self.visible(session, id)?;
            check(&row)?;
            let mut m = Mutation::update("Request", id)
                .set("Status", to)
                .expect_version(row.version);
            if row.get("ApproverID").is_null() || to == "Approved" {
                m = m.set("ApproverID", session.user_id);
            }
            if let Some(n) = note {
                m = m.set("ClosureNote", n);
            }
            match self.store().apply(vec![m]) {
                Ok(_) => break,
                Err(Error::Conflict { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        self.get_request(session, id)
    }

    /// Closes a request with a note. Pending requests of either kind close
    /// directly; approved specific requests close once handled.
    pub fn close(&self, session: &Session, id: EntityId, note: &str) -> Result<RequestDetail> {
        self.cx.perms.require(session, "request.close")?;
        self.visible(session, id)?;
        if note.trim().is_empty() {
            return Err(Error::EmptyNote);
        }
        self.transition(
            session,
            id,
            |r| match r.str("Status") {
                "Closed" => Err(Error::AlreadyClosed),
                s if transition_allowed(s, "Closed") => Ok(()),
                _ => Err(Error::AlreadyClosed),
            },
            "Closed",
            Some(note),
        )
    }

    pub fn approve_specific(&self, session: &Session, id: EntityId) -> Result<RequestDetail> {
        self.cx.perms.require(session, "request.approve")?;
        self.transition(
            session,
            id,
            |r| {
                if r.text("Kind") != Some("Specific") {
                    return Err(Error::NotSpecific);
                }
                if r.text("Status") != Some("Pending") {
                    return Err(Error::NotPending);
                }
                Ok(())
            },
            "Approved",
            None,
        )
    }
}
