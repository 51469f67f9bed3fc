//! Entity registry: every stored kind with its columns and constraints.
//!
//! Column names follow the inventory data dictionary. Relationship tables
//! with composite keys carry a generated surrogate key plus a unique
//! constraint over the pair.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use super::value::{parse_time, Value};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldType {
    Int,
    Bool,
    /// Text with a maximum length in characters.
    Text(usize),
    Time,
}

#[derive(Debug, Clone)]
pub struct FieldDef {
    pub name: &'static str,
    pub ty: FieldType,
    pub nullable: bool,
    pub default: Option<Value>,
    /// Target entity kind for foreign keys.
    pub references: Option<&'static str>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyMode {
    /// Ids come from the per-kind counter.
    Generated,
    /// Extension row sharing the primary key of a row in another kind.
    SharedWith(&'static str),
}

#[derive(Debug, Clone)]
pub struct EntityDef {
    pub name: &'static str,
    pub key: &'static str,
    pub key_mode: KeyMode,
    pub fields: Vec<FieldDef>,
    pub unique: Vec<Vec<&'static str>>,
}

impl EntityDef {
    pub fn field(&self, name: &str) -> Option<&FieldDef> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn require_field(&self, name: &str) -> Result<&FieldDef> {
        self.field(name).ok_or_else(|| Error::unknown_field(name))
    }
}

impl FieldType {
    /// Decodes a JSON fixture value into a typed [`Value`].
    pub fn decode(self, field: &str, v: &serde_json::Value) -> Result<Value> {
        use serde_json::Value as J;
        let bad = || {
            Error::ConstraintViolation(format!("{field}: expected {}, got {v}", self.describe()))
        };
        Ok(match (self, v) {
            (_, J::Null) => Value::Null,
            (FieldType::Int, J::Number(n)) => Value::Int(n.as_i64().ok_or_else(bad)?),
            (FieldType::Bool, J::Bool(b)) => Value::Bool(*b),
            (FieldType::Text(_), J::String(s)) => Value::Text(s.clone()),
            (FieldType::Time, J::String(s)) => Value::Time(parse_time(s).ok_or_else(bad)?),
            _ => return Err(bad()),
        })
    }

    pub fn accepts(self, v: &Value) -> bool {
        matches!(
            (self, v),
            (_, Value::Null)
                | (FieldType::Int, Value::Int(_))
                | (FieldType::Bool, Value::Bool(_))
                | (FieldType::Text(_), Value::Text(_))
                | (FieldType::Time, Value::Time(_))
        )
    }

    pub fn describe(self) -> &'static str {
        match self {
            FieldType::Int => "integer",
            FieldType::Bool => "boolean",
            FieldType::Text(_) => "text",
            FieldType::Time => "timestamp",
        }
    }
}

/// The full set of entity kinds, in an order where every kind only
/// references kinds listed before it.
pub struct Schema {
    entities: Vec<EntityDef>,
    by_name: BTreeMap<&'static str, usize>,
}

impl Schema {
    pub fn global() -> &'static Schema {
        &SCHEMA
    }

    pub fn entity(&self, name: &str) -> Result<&EntityDef> {
        self.by_name
            .get(name)
            .map(|&i| &self.entities[i])
            .ok_or_else(|| Error::UnknownEntityKind(name.to_string()))
    }

    pub fn entities(&self) -> impl Iterator<Item = &EntityDef> {
        self.entities.iter()
    }

    /// Kinds holding a foreign key (or shared key) into `target`, with the column.
    pub fn referrers(&self, target: &str) -> Vec<(&EntityDef, &'static str)> {
        let mut out = Vec::new();
        for e in &self.entities {
            if matches!(e.key_mode, KeyMode::SharedWith(p) if p == target) {
                out.push((e, e.key));
            }
            for f in &e.fields {
                if f.references == Some(target) {
                    out.push((e, f.name));
                }
            }
        }
        out
    }
}

struct Builder {
    def: EntityDef,
}

fn entity(name: &'static str, key: &'static str) -> Builder {
    Builder {
        def: EntityDef {
            name,
            key,
            key_mode: KeyMode::Generated,
            fields: vec![FieldDef {
                name: key,
                ty: FieldType::Int,
                nullable: false,
                default: None,
                references: None,
            }],
            unique: Vec::new(),
        },
    }
}

impl Builder {
    fn shared_with(mut self, parent: &'static str) -> Self {
        self.def.key_mode = KeyMode::SharedWith(parent);
        self
    }

    fn col(mut self, name: &'static str, ty: FieldType, nullable: bool) -> Self {
        self.def.fields.push(FieldDef {
            name,
            ty,
            nullable,
            default: None,
            references: None,
        });
        self
    }

    fn text(self, name: &'static str, max: usize) -> Self {
        self.col(name, FieldType::Text(max), false)
    }

    fn opt_text(self, name: &'static str, max: usize) -> Self {
        self.col(name, FieldType::Text(max), true)
    }

    fn int(self, name: &'static str) -> Self {
        self.col(name, FieldType::Int, false)
    }

    fn opt_int(self, name: &'static str) -> Self {
        self.col(name, FieldType::Int, true)
    }

    fn time(self, name: &'static str) -> Self {
        self.col(name, FieldType::Time, false)
    }

    fn opt_time(self, name: &'static str) -> Self {
        self.col(name, FieldType::Time, true)
    }

    fn fk(mut self, name: &'static str, target: &'static str, nullable: bool) -> Self {
        self.def.fields.push(FieldDef {
            name,
            ty: FieldType::Int,
            nullable,
            default: None,
            references: Some(target),
        });
        self
    }

    fn default(mut self, v: Value) -> Self {
        let f = self.def.fields.last_mut().expect("column");
        f.default = Some(v);
        self
    }

    fn unique(mut self, cols: &[&'static str]) -> Self {
        self.def.unique.push(cols.to_vec());
        self
    }

    fn done(self) -> EntityDef {
        self.def
    }
}

use FieldType::Bool;

static SCHEMA: LazyLock<Schema> = LazyLock::new(|| {
    let entities = vec![
        entity("Faculty", "FacultyID")
            .text("FacultyName", 128)
            .opt_text("FacultyDean", 128)
            .unique(&["FacultyName"])
            .done(),
        entity("Department", "DepartmentID")
            .fk("FacultyID", "Faculty", false)
            .text("DepartmentName", 128)
            .done(),
        entity("Role", "RoleID")
            .opt_text("RoleName", 32)
            .int("Level")
            .done(),
        entity("Permission", "PermissionID")
            .text("PermissionName", 128)
            .unique(&["PermissionName"])
            .done(),
        entity("RoleHasPermission", "GrantID")
            .fk("RoleID", "Role", false)
            .fk("PermissionID", "Permission", false)
            .col("Authorize", Bool, false)
            .unique(&["RoleID", "PermissionID"])
            .done(),
        entity("User", "UserID")
            .fk("RoleID", "Role", false)
            .text("UserName", 32)
            .text("Password", 256)
            .opt_text("FirstName", 64)
            .opt_text("LastName", 64)
            .opt_text("Email", 64)
            .unique(&["UserName"])
            .done(),
        entity("UserIsInDepartment", "MembershipID")
            .fk("UserID", "User", false)
            .fk("DepartmentID", "Department", false)
            .unique(&["UserID", "DepartmentID"])
            .done(),
        entity("Log", "LogID")
            .fk("UserID", "User", false)
            .time("LoginDate")
            .opt_time("LogoutDate")
            .done(),
        entity("ResetToken", "TokenID")
            .fk("UserID", "User", false)
            .text("TokenHash", 64)
            .time("IssuedAt")
            .col("Used", Bool, false)
            .default(Value::Bool(false))
            .done(),
        entity("Building", "BuildingID")
            .text("BuildingName", 128)
            .opt_text("Address", 128)
            .opt_text("City", 64)
            .opt_text("Province", 64)
            .opt_text("Country", 64)
            .opt_text("ZipCode", 16)
            .unique(&["BuildingName"])
            .done(),
        entity("Floor", "FloorID")
            .fk("BuildingID", "Building", false)
            .int("FloorNo")
            .unique(&["BuildingID", "FloorNo"])
            .done(),
        entity("Location", "LocationID")
            .fk("DepartmentID", "Department", false)
            .fk("FloorID", "Floor", false)
            .text("LocationName", 128)
            .text("Type", 32)
            .opt_text("Status", 32)
            .opt_int("SquareMeters")
            .done(),
        entity("Lab", "LocationID")
            .shared_with("Location")
            .fk("Responsible", "User", true)
            .opt_text("LabType", 64)
            .opt_int("Capacity")
            .done(),
        entity("LabMember", "LabMemberID")
            .fk("LocationID", "Lab", false)
            .fk("UserID", "User", false)
            .unique(&["LocationID", "UserID"])
            .done(),
        entity("Room", "LocationID")
            .shared_with("Location")
            .opt_text("RoomNo", 32)
            .done(),
        entity("Office", "LocationID")
            .shared_with("Location")
            .opt_text("OfficeNo", 32)
            .done(),
        entity("StorageCompartment", "LocationID")
            .shared_with("Location")
            .fk("UserID", "User", false)
            .int("CompartmentNo")
            .done(),
        entity("Group", "GroupID")
            .fk("UserID", "User", false)
            .fk("LocationID", "Location", false)
            .opt_text("GroupName", 128)
            .text("Status", 32)
            .default(Value::from("active"))
            .done(),
        entity("PhysicalAsset", "AssetID")
            .fk("LocationID", "Location", true)
            .fk("GroupID", "Group", true)
            .fk("DepartmentID", "Department", false)
            .text("BarCode", 64)
            .text("Owner", 128)
            .opt_text("LegacyCode", 64)
            .opt_time("DatePurchased")
            .opt_time("WarrantyExpiration")
            .opt_text("Manufacturer", 128)
            .opt_text("Model", 128)
            .text("Category", 64)
            .text("Status", 32)
            .default(Value::from("In-stock"))
            .opt_text("PoNumber", 64)
            .opt_text("PRequest", 64)
            .unique(&["BarCode"])
            .done(),
        entity("Furniture", "AssetID")
            .shared_with("PhysicalAsset")
            .opt_text("Dimension", 64)
            .opt_text("Type", 64)
            .opt_text("Color", 64)
            .opt_text("Finish", 64)
            .done(),
        entity("StorageUnit", "AssetID")
            .shared_with("PhysicalAsset")
            .opt_text("Type", 64)
            .int("NumberOfCompartment")
            .default(Value::Int(1))
            .done(),
        entity("Equipment", "AssetID")
            .shared_with("PhysicalAsset")
            .fk("UserID", "User", true)
            .opt_text("SerialNo", 64)
            .opt_text("Type", 64)
            .done(),
        entity("Computer", "AssetID")
            .shared_with("PhysicalAsset")
            .opt_text("Type", 64)
            .opt_text("Processor", 64)
            .opt_text("MACAddress", 64)
            .opt_text("HardDriveCap", 64)
            .opt_text("ROM", 64)
            .opt_text("RAM", 64)
            .done(),
        entity("AdditionalParameter", "ParameterID")
            .fk("AssetID", "PhysicalAsset", false)
            .text("ParameterName", 128)
            .opt_text("Value", 64)
            .unique(&["AssetID", "ParameterName"])
            .done(),
        entity("Software", "SoftwareID")
            .text("Name", 128)
            .opt_text("VendorID", 64)
            .opt_text("VendorName", 128)
            .opt_text("Category", 64)
            .text("VersionID", 64)
            .opt_text("Media", 128)
            .unique(&["Name", "VersionID"])
            .done(),
        entity("License", "LicenseID")
            .fk("SoftwareID", "Software", false)
            .fk("DepartmentID", "Department", false)
            .fk("UserID", "User", false)
            .text("Key", 128)
            .time("DatePurchased")
            .opt_text("PoNumber", 64)
            .opt_text("PRequest", 64)
            .text("Type", 64)
            .time("ExpirationDate")
            .int("SeatCount")
            .done(),
        entity("LicenseAssignment", "AssignmentID")
            .fk("LicenseID", "License", false)
            .fk("UserID", "User", false)
            .unique(&["LicenseID", "UserID"])
            .done(),
        entity("LicenseInstalledInComputer", "InstallationID")
            .fk("LicenseID", "License", false)
            .fk("AssetID", "Computer", false)
            .unique(&["LicenseID", "AssetID"])
            .done(),
        entity("Request", "RequestID")
            .fk("UserID", "User", false)
            .fk("ApproverID", "User", true)
            .text("Kind", 16)
            .text("Category", 64)
            .opt_text("Description", 1024)
            .text("Status", 32)
            .default(Value::from("Pending"))
            .opt_text("BarCode", 64)
            .opt_text("LocationName", 128)
            .opt_int("GroupID")
            .opt_text("UserName", 64)
            .opt_int("CompartmentNo")
            .opt_text("ClosureNote", 256)
            .done(),
    ];
    let by_name = entities
        .iter()
        .enumerate()
        .map(|(i, e)| (e.name, i))
        .collect();
    Schema { entities, by_name }
});

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn references_point_backwards() {
        let schema = Schema::global();
        let mut seen = Vec::new();
        for e in schema.entities() {
            if let KeyMode::SharedWith(p) = e.key_mode {
                assert!(seen.contains(&p), "{} before {}", p, e.name);
            }
            for f in &e.fields {
                if let Some(t) = f.references {
                    assert!(seen.contains(&t), "{}.{} -> {}", e.name, f.name, t);
                }
            }
            seen.push(e.name);
        }
    }

    #[test]
    fn declared_defaults() {
        let s = Schema::global();
        let d = |e: &str, f: &str| s.entity(e).unwrap().field(f).unwrap().default.clone();
        assert_eq!(d("Request", "Status"), Some(Value::from("Pending")));
        assert_eq!(d("PhysicalAsset", "Status"), Some(Value::from("In-stock")));
        assert_eq!(d("StorageUnit", "NumberOfCompartment"), Some(Value::Int(1)));
    }

    #[test]
    fn referrers_include_extensions() {
        let s = Schema::global();
        let r: Vec<_> = s
            .referrers("PhysicalAsset")
            .into_iter()
            .map(|(e, f)| (e.name, f))
            .collect();
        assert!(r.contains(&("Computer", "AssetID")));
        assert!(r.contains(&("AdditionalParameter", "AssetID")));
    }
}
