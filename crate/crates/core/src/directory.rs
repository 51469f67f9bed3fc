//! Read-side view of users, roles, departments and faculties, used for
//! scoping decisions and name resolution.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::Result;
use crate::storage::{EntityId, Gateway};

#[derive(Debug, Clone)]
pub struct UserEntry {
    pub id: EntityId,
    pub user_name: String,
    pub first_name: Option<String>,
    pub last_name: Option<String>,
    pub role: EntityId,
    pub level: u8,
    pub departments: BTreeSet<EntityId>,
}

impl UserEntry {
    /// "First Last", falling back to the user name.
    pub fn display_name(&self) -> String {
        let parts: Vec<&str> = [self.first_name.as_deref(), self.last_name.as_deref()]
            .into_iter()
            .flatten()
            .filter(|s| !s.is_empty())
            .collect();
        if parts.is_empty() {
            self.user_name.clone()
        } else {
            parts.join(" ")
        }
    }
}

#[derive(Debug, Clone)]
pub struct DepartmentEntry {
    pub name: String,
    pub faculty: EntityId,
}

#[derive(Debug, Clone, Default)]
pub struct Directory {
    pub users: BTreeMap<EntityId, UserEntry>,
    pub departments: BTreeMap<EntityId, DepartmentEntry>,
    pub faculties: BTreeMap<EntityId, String>,
    pub role_levels: BTreeMap<EntityId, u8>,
}

impl Directory {
    pub fn load(store: &dyn Gateway) -> Result<Self> {
        let mut d = Directory::default();
        for r in store.scan("Role", vec![])? {
            d.role_levels
                .insert(r.id, r.int("Level").unwrap_or(0).clamp(0, 3) as u8);
        }
        for f in store.scan("Faculty", vec![])? {
            d.faculties.insert(f.id, f.str("FacultyName").to_string());
        }
        for dep in store.scan("Department", vec![])? {
            d.departments.insert(
                dep.id,
                DepartmentEntry {
                    name: dep.str("DepartmentName").to_string(),
                    faculty: dep.id_of("FacultyID").unwrap_or(EntityId(0)),
                },
            );
        }
        for u in store.scan("User", vec![])? {
            let role = u.id_of("RoleID").unwrap_or(EntityId(0));
            d.users.insert(
                u.id,
                UserEntry {
                    id: u.id,
                    user_name: u.str("UserName").to_string(),
                    first_name: u.text("FirstName").map(str::to_string),
                    last_name: u.text("LastName").map(str::to_string),
                    role,
                    level: d.role_levels.get(&role).copied().unwrap_or(0),
                    departments: BTreeSet::new(),
                },
            );
        }
        for m in store.scan("UserIsInDepartment", vec![])? {
            if let (Some(u), Some(dep)) = (m.id_of("UserID"), m.id_of("DepartmentID")) {
                if let Some(entry) = d.users.get_mut(&u) {
                    entry.departments.insert(dep);
                }
            }
        }
        Ok(d)
    }

    pub fn user(&self, id: EntityId) -> Option<&UserEntry> {
        self.users.get(&id)
    }

    pub fn user_by_name(&self, name: &str) -> Option<&UserEntry> {
        self.users.values().find(|u| u.user_name == name)
    }

    pub fn faculty_of_department(&self, dep: EntityId) -> Option<EntityId> {
        self.departments.get(&dep).map(|d| d.faculty)
    }

    pub fn faculties_of(&self, user: EntityId) -> BTreeSet<EntityId> {
        self.user(user)
            .map(|u| {
                u.departments
                    .iter()
                    .filter_map(|d| self.faculty_of_department(*d))
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn faculty_by_name(&self, name: &str) -> Option<EntityId> {
        self.faculties
            .iter()
            .find(|(_, n)| n.as_str() == name)
            .map(|(id, _)| *id)
    }

    pub fn department_name(&self, dep: EntityId) -> Option<&str> {
        self.departments.get(&dep).map(|d| d.name.as_str())
    }

    pub fn faculty_name(&self, fac: EntityId) -> Option<&str> {
        self.faculties.get(&fac).map(String::as_str)
    }

    pub fn display_name(&self, user: EntityId) -> Option<String> {
        self.user(user).map(UserEntry::display_name)
    }
}
