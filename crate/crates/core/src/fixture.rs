//! Seeded generator for larger fixtures: the demo organisation (3 faculties,
//! 6 departments, 4 role levels) populated with a few hundred assets and
//! requests. Every generated user signs in with `<UserName>pass`.

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value as J};

use crate::assets::{CATEGORIES, STATUSES};
use crate::password;
use crate::permissions::{ADMIN, CATALOG};
use crate::requests::{GENERAL_CATEGORIES, SPECIFIC_CATEGORIES};

pub const FACULTIES: [&str; 3] = ["ENCS", "FAS", "JMSB"];
/// (name, faculty index)
pub const DEPARTMENTS: [(&str, usize); 6] = [
    ("Computer Science", 0),
    ("Electrical Engineering", 0),
    ("Physics", 1),
    ("History", 1),
    ("Finance", 2),
    ("Marketing", 2),
];

/// Digest cost for generated users; low so large fixtures load quickly.
const ROUNDS: u32 = 1_000;

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub users_per_department: usize,
    pub assets: usize,
    pub requests: usize,
    pub licenses: usize,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            users_per_department: 6,
            assets: 240,
            requests: 240,
            licenses: 24,
        }
    }
}

pub fn user_password(user_name: &str) -> String {
    format!("{user_name}pass")
}

/// Grants of the shipped role levels.
pub fn level_allows(level: u8, permission: &str) -> bool {
    match level {
        3 => true,
        2 => permission != ADMIN,
        1 => permission == "asset.search",
        _ => false,
    }
}

pub fn generate(seed: u64, shape: Shape) -> J {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut doc = serde_json::Map::new();
    let mut put = |k: &str, v: Vec<J>| {
        doc.insert(k.to_string(), J::Array(v));
    };

    put(
        "Faculty",
        FACULTIES
            .iter()
            .enumerate()
            .map(|(i, f)| json!({"FacultyID": i + 1, "FacultyName": f}))
            .collect(),
    );
    put(
        "Department",
        DEPARTMENTS
            .iter()
            .enumerate()
            .map(|(i, (n, f))| json!({"DepartmentID": i + 1, "FacultyID": f + 1, "DepartmentName": n}))
            .collect(),
    );
    put(
        "Role",
        (0..4)
            .map(|l| json!({"RoleID": l + 1, "RoleName": format!("Role {l}"), "Level": l}))
            .collect(),
    );
    put(
        "Permission",
        CATALOG
            .iter()
            .enumerate()
            .map(|(i, p)| json!({"PermissionID": i + 1, "PermissionName": p}))
            .collect(),
    );
    let mut grants = Vec::new();
    for level in 0..4u8 {
        for (i, p) in CATALOG.iter().enumerate() {
            grants.push(json!({
                "RoleID": level + 1,
                "PermissionID": i + 1,
                "Authorize": level_allows(level, p),
            }));
        }
    }
    put("RoleHasPermission", grants);

    // Users: per department, levels cycle 0,1,2,3,0,1,...; every fourth user
    // also belongs to the next department (possibly in another faculty).
    let mut users = Vec::new();
    let mut members = Vec::new();
    let mut user_depts: Vec<(i64, usize)> = Vec::new();
    let mut id = 0i64;
    for d in 0..DEPARTMENTS.len() {
        for k in 0..shape.users_per_department {
            id += 1;
            let level = k % 4;
            let name = format!("d{}l{}u{}", d + 1, level, k);
            users.push(json!({
                "UserID": id,
                "RoleID": level + 1,
                "UserName": name,
                "Password": password::hash_with_rounds(&user_password(&name), ROUNDS),
                "FirstName": format!("First{id}"),
                "LastName": format!("Last{id}"),
            }));
            members.push(json!({"UserID": id, "DepartmentID": d + 1}));
            user_depts.push((id, d));
            if k % 4 == 3 {
                let other = (d + 1) % DEPARTMENTS.len();
                members.push(json!({"UserID": id, "DepartmentID": other + 1}));
            }
        }
    }
    let user_count = id;
    put("User", users);
    put("UserIsInDepartment", members);

    put(
        "Building",
        vec![
            json!({"BuildingID": 1, "BuildingName": "EV", "City": "Montreal"}),
            json!({"BuildingID": 2, "BuildingName": "H", "City": "Montreal"}),
        ],
    );
    let mut floors = Vec::new();
    for b in 1..=2 {
        for n in 1..=6 {
            floors.push(json!({"BuildingID": b, "FloorNo": n}));
        }
    }
    put("Floor", floors);
    let types = ["Room", "Office", "Lab", "StorageCompartment"];
    let mut locations = Vec::new();
    let (mut labs, mut rooms, mut offices, mut compartments) = (vec![], vec![], vec![], vec![]);
    let location_count = 24i64;
    for l in 1..=location_count {
        let ty = types[(l as usize) % types.len()];
        let floor = rng.gen_range(1..=12);
        let b = if floor <= 6 { "EV" } else { "H" };
        locations.push(json!({
            "LocationID": l,
            "DepartmentID": (l as usize % DEPARTMENTS.len()) + 1,
            "FloorID": floor,
            "LocationName": format!("{b}-{}{:02}", (floor - 1) % 6 + 1, l),
            "Type": ty,
            "Status": "open",
            "SquareMeters": rng.gen_range(5..120),
        }));
        match ty {
            "Lab" => labs.push(json!({"LocationID": l, "LabType": "Teaching", "Capacity": 10})),
            "Room" => rooms.push(json!({"LocationID": l, "RoomNo": l.to_string()})),
            "Office" => offices.push(json!({"LocationID": l, "OfficeNo": l.to_string()})),
            _ => compartments.push(json!({
                "LocationID": l,
                "UserID": rng.gen_range(1..=user_count),
                "CompartmentNo": l,
            })),
        }
    }
    put("Location", locations);
    put("Lab", labs);
    put("Room", rooms);
    put("Office", offices);
    put("StorageCompartment", compartments);

    let group_count = 6i64;
    put(
        "Group",
        (1..=group_count)
            .map(|g| {
                json!({
                    "GroupID": g,
                    "UserID": rng.gen_range(1..=user_count),
                    "LocationID": rng.gen_range(1..=location_count),
                    "GroupName": format!("Group {g}"),
                })
            })
            .collect(),
    );

    let mut assets = Vec::new();
    let (mut furniture, mut storage, mut equipment, mut computers) = (vec![], vec![], vec![], vec![]);
    for a in 1..=shape.assets as i64 {
        let dept = rng.gen_range(0..DEPARTMENTS.len());
        // mostly the department's own faculty, sometimes another
        let owner = if rng.gen_bool(0.8) {
            FACULTIES[DEPARTMENTS[dept].1]
        } else {
            FACULTIES.choose(&mut rng).copied().expect("non-empty")
        };
        let category = CATEGORIES.choose(&mut rng).copied().expect("non-empty");
        let location = rng.gen_bool(0.9).then(|| rng.gen_range(1..=location_count));
        let group = rng.gen_bool(0.1).then(|| rng.gen_range(1..=group_count));
        let maker = ["Dell", "HP", "Steelcase", "Krueger"][rng.gen_range(0..4)];
        let status = STATUSES.choose(&mut rng).copied().expect("non-empty");
        let model = format!("M{}", rng.gen_range(100..999));
        assets.push(json!({
            "AssetID": a,
            "LocationID": location,
            "GroupID": group,
            "DepartmentID": dept + 1,
            "BarCode": format!("BC-{a:05}"),
            "Owner": owner,
            "Category": category,
            "Status": status,
            "Manufacturer": maker,
            "Model": model,
        }));
        let holder = rng.gen_bool(0.6).then(|| rng.gen_range(1..=user_count));
        match category {
            "Furniture" => furniture.push(json!({"AssetID": a, "Type": "Chair", "Color": "Blue"})),
            "StorageUnit" => {
                furniture.push(json!({"AssetID": a, "Type": "Cabinet"}));
                storage.push(json!({"AssetID": a, "Type": "Cabinet", "NumberOfCompartment": rng.gen_range(1..6)}));
            }
            "Equipment" => equipment.push(json!({"AssetID": a, "UserID": holder, "SerialNo": format!("SN{a}"), "Type": "Projector"})),
            _ => {
                equipment.push(json!({"AssetID": a, "UserID": holder, "SerialNo": format!("SN{a}"), "Type": "Desktop"}));
                computers.push(json!({"AssetID": a, "Type": "Desktop", "RAM": "8GB"}));
            }
        }
    }
    put("PhysicalAsset", assets);
    put("Furniture", furniture);
    put("StorageUnit", storage);
    put("Equipment", equipment);
    put("Computer", computers);

    let software_count = 8i64;
    put(
        "Software",
        (1..=software_count)
            .map(|s| json!({"SoftwareID": s, "Name": format!("Package {s}"), "VersionID": "1.0", "VendorName": "Vendor"}))
            .collect(),
    );
    put(
        "License",
        (1..=shape.licenses as i64)
            .map(|l| {
                json!({
                    "LicenseID": l,
                    "SoftwareID": rng.gen_range(1..=software_count),
                    "DepartmentID": rng.gen_range(1..=DEPARTMENTS.len()),
                    "UserID": rng.gen_range(1..=user_count),
                    "Key": format!("KEY-{l:04}"),
                    "DatePurchased": "2011-01-01",
                    "Type": "site",
                    "ExpirationDate": format!("2012-{:02}-15", rng.gen_range(1..=12)),
                    "SeatCount": rng.gen_range(1..8),
                })
            })
            .collect(),
    );

    let mut requests = Vec::new();
    for r in 1..=shape.requests as i64 {
        let (user, _) = user_depts[rng.gen_range(0..user_depts.len())];
        let specific = rng.gen_bool(0.4);
        let status = if specific {
            ["Pending", "Approved", "Closed"].choose(&mut rng)
        } else {
            ["Pending", "Closed"].choose(&mut rng)
        }
        .copied()
        .expect("non-empty");
        let approver = (status != "Pending").then(|| rng.gen_range(1..=user_count));
        let category = if specific {
            SPECIFIC_CATEGORIES.choose(&mut rng)
        } else {
            GENERAL_CATEGORIES.choose(&mut rng)
        }
        .copied()
        .expect("non-empty");
        requests.push(json!({
            "RequestID": r,
            "UserID": user,
            "ApproverID": approver,
            "Kind": if specific { "Specific" } else { "General" },
            "Category": category,
            "Description": format!("request {r}"),
            "Status": status,
        }));
    }
    put("Request", requests);
    J::Object(doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_rows() {
        let strip = |mut v: J| {
            for u in v["User"].as_array_mut().unwrap() {
                u["Password"] = J::Null;
            }
            v
        };
        let s = Shape {
            users_per_department: 2,
            ..Shape::default()
        };
        assert_eq!(strip(generate(7, s)), strip(generate(7, s)));
    }

    #[test]
    fn grants_follow_levels() {
        assert!(CATALOG.iter().all(|p| level_allows(3, p)));
        assert!(!level_allows(2, ADMIN));
        assert_eq!(CATALOG.iter().filter(|p| level_allows(1, p)).count(), 1);
        assert!(CATALOG.iter().all(|p| !level_allows(0, p)));
    }
}
